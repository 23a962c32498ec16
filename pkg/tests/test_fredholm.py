import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tasep_fredholm.fredholm import (
    F_t,
    RankOneUpdate,
    ObservationSpec,
    WindowPlan,
    assemble_kernel,
    dK_dt,
    delta_k,
    det_and_trace,
    resolvent_trace,
)
from tasep_fredholm.lattice import TASEP, RateParams
from tasep_fredholm.oracles import master_equation_oracle
from tasep_fredholm.walk import ParticleConfig

PUSH = RateParams(0.0, 1.0)
MIXED = RateParams(1.0, 1.0)


def spec(n, a):
    return ObservationSpec(tuple(n), tuple(a))


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ObservationSpec((2, 1), (0, 0))
        with pytest.raises(ValueError):
            ObservationSpec((), ())
        with pytest.raises(ValueError):
            spec([3], [0]).check((0, -1))

    def test_indicator(self):
        s = spec([1, 3], [-1, -5])
        assert s.indicator((0, -2, -4))
        assert not s.indicator((0, -2, -5))


class TestClosedForms:
    def test_single_particle(self):
        r = F_t(1.0, (0,), spec([1], [0]))
        assert r.converged and r.in_bounds
        assert r.value == pytest.approx(1 - math.exp(-1), abs=1e-12)

    def test_two_particle_second_moved(self):
        # second particle of (0,-1) must jump once; it can only move after the first
        t = 0.5
        r = F_t(t, (0, -1), spec([2], [-1]))
        assert r.value == pytest.approx(1 - (1 + t) * math.exp(-t), abs=1e-12)

    def test_push_single(self):
        # stays above -2 iff at most one left jump
        t = 0.7
        r = F_t(t, (0,), spec([1], [-2]), PUSH)
        assert r.value == pytest.approx(math.exp(-t) * (1 + t), abs=1e-12)

    @pytest.mark.parametrize(
        "X0,n,a",
        [((0, -1, -2), [3], [-3]), ((0, -1, -2), [3], [-2]), ((2, -1, -3), [1, 3], [2, -4]), ((0, -2), [1, 2], [0, -2])],
    )
    def test_time_zero_is_indicator(self, X0, n, a):
        s = spec(n, a)
        for rates in (TASEP, PUSH, MIXED):
            assert F_t(0.0, X0, s, rates).value == pytest.approx(float(s.indicator(X0)), abs=1e-12)

    @pytest.mark.parametrize("rates", [TASEP, PUSH, MIXED], ids=["tasep", "push", "mixed"])
    def test_master_equation(self, rates):
        X0, s, t = (1, 0, -2), spec([1, 3], [0, -3]), 0.8
        p, bound = master_equation_oracle(X0, s, rates, t, cap=25)
        assert F_t(t, X0, s, rates).value == pytest.approx(p, abs=bound + 1e-9)


class TestWindow:
    def test_doubling_settles(self):
        r = F_t(1.0, (0, -2, -3), spec([1, 3], [0, -4]), MIXED)
        assert r.converged
        assert r.history[0][0] == 32
        assert abs(r.history[-1][1] - r.history[-2][1]) < 1e-10

    def test_non_convergence_is_flagged(self):
        plan = WindowPlan(depth=1, growth=2, tol=1e-14, max_depth=2)
        r = F_t(3.0, (0, -1, -2), spec([3], [-6]), MIXED, plan)
        assert not r.converged
        assert r.depth == 2

    def test_kernel_blocks(self):
        M = assemble_kernel(0.5, (0, -1, -3), spec([1, 3], [-1, -5]))
        assert M.ranges == [(-37, -1), (-37, -5)]
        assert M.matrix.shape == (70, 70)
        assert M.block(0, 1).shape == (M.ranges[0][1] - M.ranges[0][0] + 1, M.ranges[1][1] - M.ranges[1][0] + 1)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            assemble_kernel(-0.1, (0,), spec([1], [0]))


def _configs():
    gaps = st.lists(st.integers(1, 3), min_size=1, max_size=3)
    return gaps.map(lambda g: tuple([0] + [-sum(g[: i + 1]) for i in range(len(g))]))


class TestRankOne:
    @settings(max_examples=15, deadline=None)
    @given(_configs(), st.data())
    def test_delta_matches_kernel_difference(self, X0, data):
        N = len(X0)
        n = data.draw(st.integers(1, N))
        a = data.draw(st.integers(X0[n - 1] - 3, X0[n - 1]))
        s = spec([n], [a])
        t = data.draw(st.sampled_from([0.3, 1.0]))
        variant = data.draw(st.sampled_from(["tasep", "push"]))
        rates = TASEP if variant == "tasep" else PUSH
        k = data.draw(st.integers(1, n))
        X = ParticleConfig(X0)
        if variant == "tasep":
            if not X.movable(k):
                return
            moved = tuple(X.moved_right(k))
        else:
            moved = tuple(X.pushed_left(k))
        base = assemble_kernel(t, X0, s, rates=rates).matrix
        after = assemble_kernel(t, moved, s, rates=rates).matrix
        d = delta_k(t, k, X0, s, rates, variant=variant).dense()
        assert np.max(np.abs(after - base - d)) < 1e-11

    @pytest.mark.parametrize("rates", [TASEP, PUSH, MIXED], ids=["tasep", "push", "mixed"])
    def test_derivative_matches_finite_difference(self, rates):
        X0, s, t, h = (0, -1, -3), spec([1, 3], [-1, -5]), 0.9, 1e-3
        Kp = assemble_kernel(t + h, X0, s, rates=rates).matrix
        Km = assemble_kernel(t - h, X0, s, rates=rates).matrix
        Kp2 = assemble_kernel(t + h / 2, X0, s, rates=rates).matrix
        Km2 = assemble_kernel(t - h / 2, X0, s, rates=rates).matrix
        fd = (4 * (Kp2 - Km2) / h - (Kp - Km) / (2 * h)) / 3
        exact = sum(u.dense() for u in dK_dt(t, X0, s, rates))
        assert np.max(np.abs(fd - exact)) < 1e-7 * max(1.0, np.max(np.abs(exact)))

    def test_sum_of_deltas(self):
        X0, s, t = (0, -2, -3), spec([3], [-4]), 0.6
        lhs = sum(u.dense() for u in dK_dt(t, X0, s, TASEP))
        rhs = sum(delta_k(t, k, X0, s, TASEP).dense() for k in range(1, 4))
        assert np.max(np.abs(lhs - rhs)) < 1e-10


class TestTrace:
    def test_rank_one_trace_equals_dense(self):
        rng = np.random.default_rng(3)
        M = 0.1 * rng.standard_normal((6, 6))
        u = RankOneUpdate(rng.standard_normal(6), rng.standard_normal(6))
        assert resolvent_trace(M, u) == pytest.approx(resolvent_trace(M, u.dense()), rel=1e-12)
        d, deriv = det_and_trace(M, [u])
        eps = 1e-6
        num = (np.linalg.det(np.eye(6) - M - eps * u.dense()) - np.linalg.det(np.eye(6) - M + eps * u.dense())) / (2 * eps)
        assert deriv == pytest.approx(num, rel=1e-7)
        assert d == pytest.approx(np.linalg.det(np.eye(6) - M))
