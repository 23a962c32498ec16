"""Independent ground truth for the determinant formula.

* the Markov generators of TASEP / PushASEP acting on functionals,
* Gillespie Monte Carlo of the autonomous first ``n_m`` particles,
* uniformization of the truncated master equation,
* Schutz's determinant for the transition probabilities (TASEP).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.stats import poisson

from .fredholm import ObservationSpec
from .lattice import RateParams, g_schutz
from .walk import block_length

__all__ = [
    "GeneratorTerm",
    "MCConfig",
    "TruncatedStateSpace",
    "block_length",
    "generator_terms",
    "apply_generator",
    "simulate_positions",
    "mc_estimate",
    "build_state_space",
    "master_equation_oracle",
    "schutz_joint_prob",
    "schutz_F",
]


@dataclass(frozen=True)
class GeneratorTerm:
    mover: int
    moved_config: tuple
    rate: float


def generator_terms(X, rates: RateParams, n_max: int) -> list[GeneratorTerm]:
    """Single moves of labels ``1..n_max`` with their rates.

    Right jumps need ``X(k-1) - X(k) > 1`` (``X(0) = +inf``).  A left jump of
    ``k`` pushes its block; the block is cut at the stored configuration,
    which only matters for labels beyond ``n_max``.
    """
    X = tuple(int(x) for x in X)
    if len(X) < n_max:
        raise ValueError(f"configuration has {len(X)} particles, need {n_max}")
    terms = []
    for k in range(1, n_max + 1):
        if rates.r > 0 and (k == 1 or X[k - 2] - X[k - 1] > 1):
            moved = list(X)
            moved[k - 1] += 1
            terms.append(GeneratorTerm(k, tuple(moved), rates.r))
        if rates.l > 0:
            b = block_length(X, k, truncate=True)
            moved = list(X)
            for j in range(k - 1, k - 1 + b):
                moved[j] -= 1
            terms.append(GeneratorTerm(k, tuple(moved), rates.l))
    return terms


def apply_generator(F, X0, rates: RateParams, n_max: int) -> float:
    """``(L F)(X0)`` for a functional ``F`` of the first ``n_max`` particles."""
    X0 = tuple(X0)
    base = F(X0)
    return sum(term.rate * (F(term.moved_config) - base) for term in generator_terms(X0, rates, n_max))


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MCConfig:
    samples: int = 100_000
    seed: int = 0
    t: float = 1.0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


_BATCH = 100_000


def _clock_rng(seed: int, batch: int, label: int, kind: int) -> np.random.Generator:
    # one stream per (batch, particle, clock) so the first N particles see the
    # same randomness however many particles are simulated
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(batch, label, kind))
    return np.random.Generator(np.random.Philox(ss))


def simulate_positions(X0, rates: RateParams, t: float, size: int, seed: int, batch: int = 0) -> np.ndarray:
    """Positions at time ``t`` of ``size`` independent copies started from ``X0``.

    Each particle carries its own Poisson clocks (right jumps at rate ``r``,
    left pushes at rate ``l``); the superposed events are applied in time
    order, which is exactly the Gillespie dynamics of the finite system.
    """
    X0 = np.asarray(X0, dtype=np.int64)
    N = X0.size
    X = np.tile(X0, (size, 1))
    if t == 0:
        return X
    times, labels, kinds = [], [], []
    for i in range(N):
        for kind, rate in ((0, rates.r), (1, rates.l)):
            if rate == 0:
                continue
            rng = _clock_rng(seed, batch, i, kind)
            counts = rng.poisson(rate * t, size)
            kmax = int(counts.max())
            if kmax == 0:
                continue
            tt = rng.uniform(0.0, t, (size, kmax))
            tt[np.arange(kmax)[None, :] >= counts[:, None]] = np.inf
            times.append(tt)
            labels.append(np.full(kmax, i))
            kinds.append(np.full(kmax, kind))
    if not times:
        return X
    times = np.concatenate(times, axis=1)
    labels = np.concatenate(labels)
    kinds = np.concatenate(kinds)
    order = np.argsort(times, axis=1)
    rows = np.arange(size)
    for e in range(order.shape[1]):
        col = order[:, e]
        live = np.isfinite(times[rows, col])
        if not live.any():
            break
        p = labels[col]
        right = live & (kinds[col] == 0)
        left = live & (kinds[col] == 1)
        if right.any():
            r_rows = rows[right]
            pr = p[right]
            ahead = np.where(pr > 0, X[r_rows, np.maximum(pr - 1, 0)], X[r_rows, pr] + 2)
            ok = ahead - X[r_rows, pr] > 1
            X[r_rows[ok], pr[ok]] += 1
        if left.any():
            l_rows = rows[left]
            pl = p[left]
            X[l_rows, pl] -= 1
            for j in range(1, N):
                sel = (j > pl) & (X[l_rows, j] >= X[l_rows, j - 1])
                X[l_rows[sel], j] -= 1
    return X


def mc_estimate(X0, spec: ObservationSpec, rates: RateParams, cfg: MCConfig, *, n_particles: int | None = None):
    """Monte Carlo estimate of the event probability and its binomial standard error."""
    spec.check(X0)
    N = n_particles or spec.indices[-1]
    X0 = tuple(X0)[:N]
    idx = np.array(spec.indices) - 1
    lev = np.array(spec.levels)
    hits = 0
    for b, start in enumerate(range(0, cfg.samples, _BATCH)):
        size = min(_BATCH, cfg.samples - start)
        X = simulate_positions(X0, rates, cfg.t, size, cfg.seed, b)
        hits += int(np.all(X[:, idx] > lev, axis=1).sum())
    p = hits / cfg.samples
    return p, math.sqrt(p * (1 - p) / cfg.samples)


# ---------------------------------------------------------------------------
# master equation


@dataclass
class TruncatedStateSpace:
    """Configurations of the first ``N`` particles inside a box, with the sparse generator.

    ``escape[s]`` is the total rate of moves from ``s`` that leave the box.
    """

    states: list
    index: dict
    generator: sparse.csr_matrix
    escape: np.ndarray
    cap: int


def build_state_space(X0, rates: RateParams, cap: int, budget: int = 2_000_000) -> TruncatedStateSpace:
    X0 = tuple(int(x) for x in X0)
    N = len(X0)
    top = X0[0] + cap
    bottom = X0[-1] - cap if rates.l > 0 else X0[-1]
    index = {X0: 0}
    states = [X0]
    rows, cols, vals = [], [], []
    escape = []
    queue = deque([X0])
    while queue:
        X = queue.popleft()
        s = index[X]
        out_rate = 0.0
        esc = 0.0
        for term in generator_terms(X, rates, N):
            Y = term.moved_config
            out_rate += term.rate
            if Y[0] > top or Y[-1] < bottom:
                esc += term.rate
                continue
            if Y not in index:
                if len(states) >= budget:
                    raise MemoryError(f"state budget {budget} exceeded")
                index[Y] = len(states)
                states.append(Y)
                queue.append(Y)
            rows.append(s)
            cols.append(index[Y])
            vals.append(term.rate)
        rows.append(s)
        cols.append(s)
        vals.append(-out_rate)
        escape.append(esc)
    n = len(states)
    G = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return TruncatedStateSpace(states, index, G, np.array(escape), cap)


def master_equation_oracle(
    X0, spec: ObservationSpec, rates: RateParams, t: float, cap: int = 30, epsilon: float = 1e-10
) -> tuple[float, float]:
    """Uniformization of the truncated chain; returns ``(p, bound)``.

    ``p`` is a lower estimate of the event probability; the true value lies
    in ``[p, p + bound]`` where ``bound`` adds the mass that escaped the box
    to the Poisson truncation ``epsilon``.
    """
    spec.check(X0)
    N = spec.indices[-1]
    X0 = tuple(X0)[:N]
    if t == 0:
        return float(spec.indicator(X0)), 0.0
    space = build_state_space(X0, rates, cap)
    in_event = np.array([spec.indicator(X) for X in space.states], dtype=float)
    lam = N * (rates.r + rates.l)
    P_T = (sparse.identity(len(space.states), format="csr") + space.generator / lam).T.tocsr()
    mu = lam * t
    kmax = int(poisson.isf(epsilon / 2, mu)) + 1
    weights = poisson.pmf(np.arange(kmax + 1), mu)
    pi = np.zeros(len(space.states))
    pi[0] = 1.0
    p = 0.0
    kept = 0.0
    for k in range(kmax + 1):
        p += weights[k] * (pi @ in_event)
        kept += weights[k] * pi.sum()
        pi = P_T @ pi
    lost = max(0.0, weights.sum() - kept)
    return float(p), float(lost + (1 - weights.sum()) + epsilon)


# ---------------------------------------------------------------------------
# Schutz


@lru_cache(maxsize=65536)
def _G(n: int, t: float, x: int) -> float:
    return g_schutz(n, t, x)


def schutz_joint_prob(X0, targets, t: float) -> float:
    """``P(X_t = targets)`` for N-particle TASEP as an ``N x N`` determinant."""
    X0 = tuple(X0)
    x = tuple(targets)
    N = len(X0)
    if len(x) != N or N > 6:
        raise ValueError("targets must match X0 in length, N <= 6")
    if any(a <= b for a, b in zip(x, x[1:])):
        raise ValueError("targets must be strictly decreasing")
    M = np.empty((N, N))
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            M[i - 1, j - 1] = _G(i - j, float(t), x[N - i] - X0[N - j])
    return float(np.linalg.det(M))


def schutz_F(X0, spec: ObservationSpec, t: float, cap: int = 25) -> tuple[float, float]:
    """Event probability by summing Schutz's formula; returns ``(value, tail)``.

    Targets range over ``X0(k) <= x_k`` and ``x_1 <= X0(1) + cap``; the
    neglected mass is at most ``P(Poisson(t) > cap)``.
    """
    spec.check(X0)
    N = spec.indices[-1]
    if N > 4:
        raise ValueError("schutz_F is limited to n_m <= 4")
    X0 = tuple(X0)[:N]
    if t == 0:
        return float(spec.indicator(X0)), 0.0
    lower = {n: a + 1 for n, a in zip(spec.indices, spec.levels)}
    total = 0.0

    def rec(prefix):
        nonlocal total
        k = len(prefix)
        if k == N:
            total += schutz_joint_prob(X0, prefix, t)
            return
        hi = X0[0] + cap if k == 0 else prefix[-1] - 1
        lo = max(X0[k], lower.get(k + 1, X0[k]))
        for xk in range(lo, hi + 1):
            rec(prefix + (xk,))

    rec(())
    tail = float(poisson.sf(cap, t))
    return total, tail
