import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tasep_fredholm.lattice import (
    GAMMA_0,
    GAMMA_01,
    TASEP,
    ContourConfig,
    LatticeFunction,
    RateParams,
    contour_quadrature,
    g_schutz,
    nabla,
    poisson_group,
    psi,
    q_inv_pow,
    q_kernel,
    q_pow,
    qbar,
    s_conj,
    s_kernel,
    sbar_kernel,
)


def quad(f, radius=0.5, nodes=256, center=0.0):
    return contour_quadrature(f, ContourConfig(center, radius, nodes)).real


def s_oracle(t, n, z1, z2, rates=TASEP):
    d = z2 - z1
    return quad(
        lambda w: (1 - w) ** n / (2.0**d * w ** (n + 1 + d)) * np.exp(t * (rates.r * (w - 0.5) + rates.l * (1 / w - 2))),
        radius=0.6,
    )


def sbar_oracle(t, n, z1, z2, rates=TASEP):
    d = z2 - z1
    return quad(
        lambda w: (1 - w) ** (d + n - 1) / (2.0 ** (-d) * w**n) * np.exp(t * (rates.r * (w - 0.5) + rates.l * (2 - 1 / (1 - w)))),
        radius=0.5,
    )


class TestQ:
    def test_examples(self):
        assert q_kernel(1, 0) == Fraction(1, 2)
        assert q_kernel(0, 0) == 0
        assert q_kernel(3, 0) == Fraction(1, 8)
        assert q_pow(0, 5, 5) == 1
        assert q_pow(2, 3, 0) == Fraction(1, 4)
        assert q_pow(2, 1, 0) == 0

    def test_inverse_examples(self):
        assert q_inv_pow(1, 0, 1) == 2
        assert q_inv_pow(1, 0, 0) == -1
        assert q_inv_pow(0, 0, 0) == 1
        assert q_inv_pow(2, 0, 1) == -4

    def test_qbar_examples(self):
        assert qbar(2, 3, 0) == Fraction(1, 4)
        assert qbar(3, 0, 0) == 1
        for x, y in [(0, 0), (4, 1), (-3, 2)]:
            assert qbar(1, x, y) == Fraction(2) ** (y - x)

    def test_q_pow_brute_force(self):
        # Q^2(3,0) as a convolution over intermediate sites
        assert sum(q_kernel(3, z) * q_kernel(z, 0) for z in range(-5, 6)) == q_pow(2, 3, 0)

    @given(st.integers(0, 6), st.integers(-8, 8), st.integers(-8, 8))
    def test_inverse_property(self, n, x, z):
        total = sum(q_pow(n, x, y) * q_inv_pow(n, y, z) for y in range(z - n, z + 1))
        assert total == (1 if x == z else 0)

    @given(st.integers(1, 8), st.integers(1, 30))
    def test_qbar_coincides(self, n, d):
        assert qbar(n, d, 0) == q_pow(n, d, 0)

    @given(st.integers(1, 6), st.integers(-12, 12))
    def test_annihilation(self, n, d):
        assert sum(q_inv_pow(n, 0, y) * qbar(n, y, d) for y in range(0, n + 1)) == 0


def test_nabla_examples():
    const = LatticeFunction(-3, np.full(7, 2.5))
    assert np.all(nabla("minus", const).values == 0)
    ident = LatticeFunction(-3, np.arange(-3, 4, dtype=float))
    assert np.all(nabla("minus", ident).values == 1)
    pow2 = LatticeFunction(-2, np.exp2(np.arange(-2, 3)))
    assert nabla("plus", pow2)(0) == 1.0
    with pytest.raises(ValueError):
        nabla("sideways", ident)


class TestPoissonGroup:
    def test_examples(self):
        assert poisson_group(0.7, 4, 4) == pytest.approx(math.exp(-0.35), rel=1e-15)
        assert poisson_group(0.0, 2, 2) == 1.0 and poisson_group(0.0, 3, 2) == 0.0
        assert poisson_group(2.0, 1, 0) == pytest.approx(math.exp(-1), rel=1e-15)

    def test_group_law(self):
        t = 1.3
        for x in range(-2, 3):
            for z in range(-2, 3):
                s = sum(poisson_group(t, x, y) * poisson_group(-t, y, z) for y in range(z, x + 1))
                assert s == pytest.approx(float(x == z), abs=1e-12)


class TestSKernels:
    def test_t0_is_inverse_power(self):
        for n in range(0, 4):
            for z1 in range(-3, 3):
                for z2 in range(-3, 5):
                    assert s_kernel(0.0, n, z1, z2) == pytest.approx(float(q_inv_pow(n, z2, z1)), abs=1e-15)

    def test_n0_is_poisson(self):
        t = 0.9
        for d in range(0, 6):
            assert s_kernel(t, 0, 0, d) == pytest.approx(poisson_group(t, d, 0), rel=1e-13)

    def test_sbar_t0_is_qbar(self):
        for n in range(1, 5):
            for z1 in range(-4, 4):
                for z2 in range(-4, 4):
                    assert sbar_kernel(0.0, n, z1, z2) == pytest.approx(float(qbar(n, z1, z2)), rel=1e-13, abs=1e-300)

    def test_sbar_semigroup(self):
        t, n, z1, z2 = 0.8, 3, 2, -1
        total = sum(sbar_kernel(t, n, z1, y) * poisson_group(t, y, z2) for y in range(z2, z2 + 60))
        assert total == pytest.approx(float(qbar(n, z1, z2)), rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        st.floats(0.05, 3.0),
        st.integers(0, 5),
        st.integers(-5, 5),
        st.integers(-5, 5),
        st.sampled_from([(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.4, 1.7)]),
    )
    def test_s_matches_quadrature(self, t, n, z1, z2, rl):
        rates = RateParams(*rl)
        val = s_kernel(t, n, z1, z2, rates)
        ref = s_oracle(t, n, z1, z2, rates)
        assert val == pytest.approx(ref, rel=1e-11, abs=1e-13 * max(1.0, 2.0 ** (z1 - z2)))

    @settings(max_examples=40, deadline=None)
    @given(
        st.floats(0.05, 3.0),
        st.integers(1, 5),
        st.integers(-5, 5),
        st.integers(-5, 5),
        st.sampled_from([(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.4, 1.7)]),
    )
    def test_sbar_matches_quadrature(self, t, n, z1, z2, rl):
        rates = RateParams(*rl)
        val = sbar_kernel(t, n, z1, z2, rates)
        ref = sbar_oracle(t, n, z1, z2, rates)
        assert val == pytest.approx(ref, rel=1e-11, abs=1e-13 * max(1.0, 2.0 ** (z2 - z1)))

    def test_series_and_quadrature_agree(self):
        for n, m, u, v in [(2, 3, 0.7, 0.4), (0, -2, 1.0, 1.0), (4, 0, 2.5, 0.3), (3, 7, 0.0, 2.0)]:
            assert s_conj(n, m, u, v, method="series") == pytest.approx(s_conj(n, m, u, v, method="quadrature"), rel=1e-11, abs=1e-15)

    def test_time_derivative_relations(self):
        # d/dt S* = -1/2 nabla^- acting on the second variable; d/dt Sbar = +1/2 nabla^- on the first
        t, h, n = 0.6, 1e-4, 3
        for z1, z2 in [(0, 1), (2, -1), (-1, 3)]:
            ds = (s_kernel(t + h, n, z1, z2) - s_kernel(t - h, n, z1, z2)) / (2 * h)
            assert ds == pytest.approx(-0.5 * (s_kernel(t, n, z1, z2) - s_kernel(t, n, z1, z2 - 1)), rel=1e-6, abs=1e-9)
            db = (sbar_kernel(t + h, n, z1, z2) - sbar_kernel(t - h, n, z1, z2)) / (2 * h)
            assert db == pytest.approx(0.5 * (sbar_kernel(t, n, z1, z2) - sbar_kernel(t, n, z1 - 1, z2)), rel=1e-6, abs=1e-9)


    def test_push_time_derivative_relations(self):
        # pure push clock: d/dt S* = 2 nabla^+ (second variable), d/dt Sbar = -2 nabla^+ (first variable)
        rates, t, h, n = RateParams(0.0, 1.0), 0.5, 1e-4, 2
        for z1, z2 in [(0, 1), (2, -1), (-1, 3)]:
            ds = (s_kernel(t + h, n, z1, z2, rates) - s_kernel(t - h, n, z1, z2, rates)) / (2 * h)
            assert ds == pytest.approx(2 * (s_kernel(t, n, z1, z2 + 1, rates) - s_kernel(t, n, z1, z2, rates)), rel=1e-6, abs=1e-9)
            db = (sbar_kernel(t + h, n, z1, z2, rates) - sbar_kernel(t - h, n, z1, z2, rates)) / (2 * h)
            assert db == pytest.approx(-2 * (sbar_kernel(t, n, z1 + 1, z2, rates) - sbar_kernel(t, n, z1, z2, rates)), rel=1e-6, abs=1e-9)


class TestPsiAndSchutz:
    X0 = (2, 0, -1, -4)

    def test_psi_indicator(self):
        for n in range(1, 5):
            for x in range(-8, 5):
                assert psi(n, 0, x, 0.0, self.X0) == float(x == self.X0[n - 1])

    def test_psi_k0_closed_form(self):
        t = 1.4
        for x in range(self.X0[2], self.X0[2] + 6):
            d = x - self.X0[2]
            assert psi(3, 0, x, t, self.X0) == pytest.approx(math.exp(-t) * t**d / (2**d * math.factorial(d)), rel=1e-13)

    def test_psi_quadrature(self):
        t = 0.8
        for n, k, x in [(3, 1, -1), (4, 2, 0), (4, 3, 1), (2, 1, -2)]:
            base = self.X0[n - k - 1]
            ref = quad(lambda w: (1 - w) ** k / (2.0 ** (x - base) * w ** (x + k + 1 - base)) * np.exp(t * (w - 1)))
            assert psi(n, k, x, t, self.X0) == pytest.approx(ref, rel=1e-12, abs=1e-15)

    def test_g_schutz(self):
        t = 1.1
        for x in range(0, 6):
            assert g_schutz(0, t, x) == pytest.approx(math.exp(-t) * t**x / math.factorial(x), rel=1e-12)
        assert abs(g_schutz(0, t, -2)) < 1e-14
        # n=1, t=0: -[residues of (1-w)^{-1} w^{-x}] at 0 and 1, which is 1{x <= 0}
        for x in range(-3, 4):
            assert g_schutz(1, 0.0, x) == pytest.approx(float(x <= 0), abs=1e-12)


class TestQuadrature:
    def test_examples(self):
        unit = ContourConfig(0.0, 1.0, 64)
        assert contour_quadrature(lambda w: 1 / w, unit) == pytest.approx(1.0)
        assert abs(contour_quadrature(lambda w: np.ones_like(w), unit)) < 1e-15
        assert contour_quadrature(lambda w: np.exp(w) / w**2, unit) == pytest.approx(1.0, rel=1e-14)

    def test_defaults(self):
        assert (GAMMA_0.center, GAMMA_0.radius, GAMMA_0.nodes) == (0.0, 0.5, 64)
        assert (GAMMA_01.center, GAMMA_01.radius) == (0.5, 1.2)
        assert GAMMA_01.encloses(0) and GAMMA_01.encloses(1)


def test_rate_params():
    assert TASEP.clock(2.0) == (2.0, 0.0)
    assert RateParams(0.5, 2.0).clock(1.0, 3.0) == (0.5, 6.0)
    with pytest.raises(ValueError):
        RateParams(-1.0, 0.0)
