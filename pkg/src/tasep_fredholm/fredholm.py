"""Extended kernel assembly, windowed Fredholm determinants and rank-one updates.

All matrices live in the *conjugated* frame: the entry for ``(n_i, x; n_j, y)``
is ``2**(x - y) * K(n_i, x; n_j, y)``.  Diagonal conjugation leaves
determinants and traces unchanged and keeps every entry of polynomial size.

Each level ``n_j`` is realized on the sites ``[lo, a_j]`` with a common lower
end ``lo = min(a) - depth``.  A common ``lo`` makes the discarded rows
(which only carry the strictly upper-triangular ``-Q`` part for TASEP)
decouple exactly, so for TASEP the windowed determinant is exact as soon as
the window reaches below the kernel's support.  For PushASEP the discarded
part decays factorially and the window is deepened until the value settles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import TASEP, ConvergenceError, RateParams, _binom_float, poisson_weight, s_conj, sbar_conj
from .walk import block_length, hit_counts

__all__ = [
    "ObservationSpec",
    "WindowPlan",
    "ExtendedKernelMatrix",
    "RankOneUpdate",
    "DetResult",
    "FtResult",
    "kernel_matrix",
    "assemble_kernel",
    "fredholm_det",
    "F_t",
    "delta_k",
    "dK_dt",
    "resolvent_trace",
    "det_and_trace",
]


@dataclass(frozen=True)
class ObservationSpec:
    """Event ``{X_t(n_j) > a_j, j = 1..m}``."""

    indices: tuple[int, ...]
    levels: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(n) for n in self.indices)
        lev = tuple(int(a) for a in self.levels)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "levels", lev)
        if not idx or len(idx) != len(lev):
            raise ValueError("need m >= 1 indices and as many levels")
        if idx[0] < 1 or any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"indices must be strictly increasing positive integers: {idx}")

    @property
    def m(self) -> int:
        return len(self.indices)

    def check(self, X0) -> None:
        if self.indices[-1] > len(X0):
            raise ValueError(f"index {self.indices[-1]} exceeds configuration length {len(X0)}")

    def indicator(self, X) -> bool:
        return all(X[n - 1] > a for n, a in zip(self.indices, self.levels))


@dataclass(frozen=True)
class WindowPlan:
    """Window depth schedule for the truncated determinant."""

    depth: int = 32
    growth: int = 2
    tol: float = 1e-10
    max_depth: int = 512

    def lower(self, spec: ObservationSpec, depth: int | None = None) -> int:
        return min(spec.levels) - (self.depth if depth is None else depth)

    def ranges(self, spec: ObservationSpec, depth: int | None = None) -> list[tuple[int, int]]:
        lo = self.lower(spec, depth)
        return [(lo, a) for a in spec.levels]


@dataclass
class ExtendedKernelMatrix:
    """Dense realization of the projected kernel on ``{n_1..n_m} x window``."""

    matrix: np.ndarray
    ranges: list
    conjugated: bool = True

    @property
    def offsets(self) -> list[int]:
        sizes = [b - a + 1 for a, b in self.ranges]
        return list(np.concatenate([[0], np.cumsum(sizes)]).astype(int))

    def block(self, i: int, j: int) -> np.ndarray:
        o = self.offsets
        return self.matrix[o[i] : o[i + 1], o[j] : o[j + 1]]

    def sites(self) -> np.ndarray:
        return np.concatenate([np.arange(a, b + 1) for a, b in self.ranges])

    def unconjugated(self) -> np.ndarray:
        """``K`` itself; only representable on narrow windows."""
        s = self.sites().astype(float)
        return self.matrix * np.exp2(s[None, :] - s[:, None])


@dataclass
class RankOneUpdate:
    """``left (x) right`` over the extended index, in the conjugated frame."""

    left: np.ndarray
    right: np.ndarray

    def dense(self) -> np.ndarray:
        return np.outer(self.left, self.right)


@dataclass
class DetResult:
    value: float
    converged: bool
    error_estimate: float
    depth: int
    history: list = field(default_factory=list)


@dataclass
class FtResult:
    value: float
    raw: float
    converged: bool
    error_estimate: float
    depth: int
    in_bounds: bool
    history: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# assembly


def _push_tail(v: float, width: int, n: int) -> int:
    """How far above ``x + n`` the contraction index must run when ``v > 0``."""
    if v == 0:
        return 0
    p = 1
    while poisson_weight(v, p) * (p + width + 2.0) ** (n + 1) * math.exp(2 * v) > 1e-20:
        p += 1
        if p > 2000:
            raise ConvergenceError("contraction tail bound not reached")
    return p


def _s_matrix(n: int, xs: np.ndarray, bs: np.ndarray, u: float, v: float) -> np.ndarray:
    """``s_conj(n, n + x - b)`` on the grid ``xs x bs`` (Toeplitz, tabulated once)."""
    m = n + xs[:, None] - bs[None, :]
    lo, hi = int(m.min()), int(m.max())
    table = s_conj(n, np.arange(lo, hi + 1), u, v)
    return table[m - lo]


def _sbar_matrix(n: int, firsts: np.ndarray, ys: np.ndarray, u: float, v: float) -> np.ndarray:
    d = ys[None, :] - firsts[:, None]
    lo, hi = int(d.min()), int(d.max())
    table = sbar_conj(n, np.arange(lo, hi + 1), u, v)
    return table[d - lo]


def _epi_matrix(n: int, curve, bs: np.ndarray, ys: np.ndarray, u: float, v: float) -> np.ndarray:
    """Conjugated epigraph kernel ``2**(b-y) Sbar^epi_n(b, y)`` on ``bs x ys``."""
    hc = hit_counts(bs, curve)
    E = np.zeros((bs.size, ys.size))
    for k, h in hc.hits.items():
        cols = np.nonzero(h.any(axis=0))[0]
        if cols.size == 0:
            continue
        E += h[:, cols] @ _sbar_matrix(n - k, hc.positions[cols], ys, u, v)
    return E


def _support_start(curve) -> int:
    """Smallest start from which the walk can hit the strict epigraph of ``curve``."""
    return min(c + k for k, c in enumerate(curve)) + 1


def kernel_matrix(X0, spec: ObservationSpec, lo: int, u: float, v: float) -> ExtendedKernelMatrix:
    """Conjugated kernel on the windows ``[lo, a_j]`` for clock amounts ``(u, v)``."""
    X0 = tuple(int(x) for x in X0)
    ranges = [(lo, a) for a in spec.levels]
    sizes = [max(a - lo + 1, 0) for a in spec.levels]
    off = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    M = np.zeros((off[-1], off[-1]))
    for i, (ni, ai) in enumerate(zip(spec.indices, spec.levels)):
        xs = np.arange(lo, ai + 1)
        if xs.size == 0:
            continue
        for j, (nj, aj) in enumerate(zip(spec.indices, spec.levels)):
            ys = np.arange(lo, aj + 1)
            if ys.size == 0:
                continue
            curve = X0[:nj]
            b_lo = _support_start(curve)
            b_hi = ai + ni + _push_tail(v, ai - lo + (aj - lo), nj)
            block = np.zeros((xs.size, ys.size))
            if b_hi >= b_lo:
                bs = np.arange(b_lo, b_hi + 1)
                block += _s_matrix(ni, xs, bs, u, v) @ _epi_matrix(nj, curve, bs, ys, u, v)
            if ni < nj:
                d = xs[:, None] - ys[None, :]
                gap = nj - ni
                block -= np.where(d >= gap, _binom_float(d - 1, gap - 1), 0.0)
            M[off[i] : off[i + 1], off[j] : off[j + 1]] = block
    return ExtendedKernelMatrix(M, ranges)


def assemble_kernel(
    t: float,
    X0,
    spec: ObservationSpec,
    plan: WindowPlan = WindowPlan(),
    rates: RateParams = TASEP,
    *,
    depth: int | None = None,
    t2: float | None = None,
) -> ExtendedKernelMatrix:
    """Projected kernel ``chi_a K_t chi_a`` at window depth ``depth`` (default ``plan.depth``).

    ``t2`` gives the push clock its own time (two-parameter kernel).
    """
    if t < 0 or (t2 is not None and t2 < 0):
        raise ValueError("times must be nonnegative")
    spec.check(X0)
    u, v = rates.clock(t, t2)
    return kernel_matrix(X0, spec, plan.lower(spec, depth), u, v)


def _det(M: np.ndarray) -> float:
    if M.size == 0:
        return 1.0
    return float(np.linalg.det(np.eye(M.shape[0]) - M))


def fredholm_det(plan: WindowPlan, matrix_builder) -> DetResult:
    """``det(I - M)`` with the window depth multiplied by ``plan.growth`` until it settles.

    ``matrix_builder(depth)`` returns the projected matrix at that depth.
    Non-convergence is flagged, not raised.
    """
    depth = plan.depth
    prev = None
    history = []
    while True:
        val = _det(matrix_builder(depth))
        history.append((depth, val))
        if prev is not None:
            err = abs(val - prev)
            if err < plan.tol:
                return DetResult(val, True, err, depth, history)
        if depth * plan.growth > plan.max_depth:
            err = abs(val - prev) if prev is not None else math.inf
            return DetResult(val, False, err, depth, history)
        prev = val
        depth *= plan.growth


def F_t(
    t: float,
    X0,
    spec: ObservationSpec,
    rates: RateParams = TASEP,
    plan: WindowPlan = WindowPlan(),
    *,
    t2: float | None = None,
) -> FtResult:
    """``P_{X0}(X_t(n_j) > a_j for all j)`` as a Fredholm determinant."""
    spec.check(X0)
    u, v = rates.clock(t, t2)
    X0 = tuple(X0)
    res = fredholm_det(plan, lambda depth: kernel_matrix(X0, spec, plan.lower(spec, depth), u, v).matrix)
    eps = 10 * res.error_estimate + 1e-12
    clamped = min(max(res.value, 0.0), 1.0)
    return FtResult(
        clamped, res.value, res.converged, res.error_estimate, res.depth, -eps <= res.value <= 1 + eps, res.history
    )


# ---------------------------------------------------------------------------
# rank-one pieces


def _left(spec, lo, f_curve, k: int, anchor: int, u: float, v: float) -> np.ndarray:
    """Conjugated ``(S_{-t,-n_i})^* f`` stacked over the levels.

    ``f(b) = P_b(tau = k-1, B_{k-1} = anchor)`` for the hitting time of ``f_curve``.
    """
    top = max(f_curve[0], anchor)
    starts = np.arange(anchor + k - 1, top + 1)
    parts = []
    hc = hit_counts(starts, f_curve) if starts.size else None
    if hc is not None and (k - 1) in hc.hits and hc.positions[0] <= anchor <= hc.positions[-1]:
        counts = hc.hits[k - 1][:, anchor - hc.positions[0]]
    else:
        counts = np.zeros(starts.size)
    keep = counts != 0
    bs, counts = starts[keep], counts[keep]
    for ni, ai in zip(spec.indices, spec.levels):
        xs = np.arange(lo, ai + 1)
        if bs.size == 0 or xs.size == 0:
            parts.append(np.zeros(xs.size))
        else:
            parts.append(_s_matrix(ni, xs, bs, u, v) @ counts)
    return np.concatenate(parts)


def _restart_row(n, k, start, curve, ys, anchor, shift, u, v) -> np.ndarray:
    """Conjugated ``E_{B_{k-1}=start}[Sbar_{n-tau}(B_tau + shift, y); tau < n]`` (hits from time ``k``)."""
    out = np.zeros(ys.size)
    hc = hit_counts([start], curve[:n], start_time=k - 1, hit_from=k)
    for tau, h in hc.hits.items():
        cols = np.nonzero(h[0])[0]
        if cols.size == 0:
            continue
        firsts = hc.positions[cols] + shift
        w = h[0, cols] * np.exp2(anchor - start - shift)
        out += w @ _sbar_matrix(n - tau, firsts, ys, u, v)
    return out


def _plain_row(n, first, ys, anchor, u, v) -> np.ndarray:
    return math.ldexp(1.0, anchor - first) * _sbar_matrix(n, np.array([first]), ys, u, v)[0]


def _right(spec, lo, X0, k: int, kind: str, u: float, v: float) -> np.ndarray:
    """Conjugated right factor (``g``, ``g_hat`` in either model) stacked over levels."""
    parts = []
    for nj, aj in zip(spec.indices, spec.levels):
        ys = np.arange(lo, aj + 1)
        if k > nj or ys.size == 0:
            parts.append(np.zeros(ys.size))
            continue
        xk = X0[k - 1]
        if kind == "tasep_g":
            anchor = xk + 1
            row = _restart_row(nj, k, xk + 1, X0, ys, anchor, 0, u, v) - _plain_row(nj - k + 1, xk + 1, ys, anchor, u, v)
        elif kind == "tasep_ghat":
            anchor = xk + 1
            row = _restart_row(nj, k, xk, X0, ys, anchor, 0, u, v) - _plain_row(nj - k + 1, xk, ys, anchor, u, v)
        elif kind == "push_g":
            anchor = xk
            row = _plain_row(nj - k + 1, xk, ys, anchor, u, v) - _restart_row(nj, k, xk, X0, ys, anchor, 0, u, v)
        elif kind == "push_ghat":
            anchor = xk
            row = _plain_row(nj - k + 1, xk + 1, ys, anchor, u, v) - _restart_row(nj, k, xk, X0, ys, anchor, 1, u, v)
        else:
            raise ValueError(kind)
        parts.append(row)
    return np.concatenate(parts)


def _moved_curve(X0, k: int, variant: str) -> tuple:
    X0 = list(X0)
    if variant == "tasep":
        X0[k - 1] += 1
    else:
        b = block_length(X0, k, truncate=True)
        for j in range(k - 1, k - 1 + b):
            X0[j] -= 1
    return tuple(X0)


def _rank_one(X0, spec, lo, k, variant, u, v, derivative: bool) -> RankOneUpdate:
    X0 = tuple(X0)
    size = sum(max(a - lo + 1, 0) for a in spec.levels)
    if k > spec.indices[-1]:
        return RankOneUpdate(np.zeros(size), np.zeros(size))
    xk = X0[k - 1]
    if variant == "tasep":
        left = _left(spec, lo, X0[:k], k, xk + 1, u, v)
        right = _right(spec, lo, X0, k, "tasep_ghat" if derivative else "tasep_g", u, v)
        if derivative:
            right = 0.5 * right
    elif variant == "push":
        f_curve = tuple(c - 1 for c in X0[:k]) if derivative else _moved_curve(X0, k, "push")[:k]
        left = _left(spec, lo, f_curve, k, xk, u, v)
        right = _right(spec, lo, X0, k, "push_ghat" if derivative else "push_g", u, v)
        if derivative:
            right = 2.0 * right
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return RankOneUpdate(left, right)


def delta_k(
    t: float,
    k: int,
    X0,
    spec: ObservationSpec,
    rates: RateParams = TASEP,
    plan: WindowPlan = WindowPlan(),
    variant: str = "tasep",
    *,
    depth: int | None = None,
    t2: float | None = None,
) -> RankOneUpdate:
    """Kernel change from moving particle ``k`` right (``tasep``) or its block left (``push``).

    Returned as ``(S_{-t,-n_i})^* f_k (x) g^{(n_j)}_k`` in the conjugated frame.
    """
    u, v = rates.clock(t, t2)
    return _rank_one(X0, spec, plan.lower(spec, depth), k, variant, u, v, derivative=False)


def dK_dt(
    t: float,
    X0,
    spec: ObservationSpec,
    rates: RateParams = TASEP,
    plan: WindowPlan = WindowPlan(),
    variant: str | None = None,
    *,
    depth: int | None = None,
    t2: float | None = None,
) -> list[RankOneUpdate]:
    """Time derivative of the projected kernel as a finite sum of rank-one terms.

    The right-jump clock contributes ``r/2 sum_k S^* f_k (x) g_hat_k`` and the
    push clock ``2 l sum_k S^* f_hat_k (x) g_hat_k``.  ``variant`` restricts to
    one clock (``"tasep"`` or ``"push"``), which gives the partial derivatives
    of the two-parameter kernel.
    """
    u, v = rates.clock(t, t2)
    lo = plan.lower(spec, depth)
    out = []
    for k in range(1, spec.indices[-1] + 1):
        if rates.r > 0 and variant in (None, "tasep"):
            term = _rank_one(X0, spec, lo, k, "tasep", u, v, derivative=True)
            out.append(RankOneUpdate(term.left, rates.r * term.right))
        if rates.l > 0 and variant in (None, "push"):
            term = _rank_one(X0, spec, lo, k, "push", u, v, derivative=True)
            out.append(RankOneUpdate(term.left, rates.l * term.right))
    return out


def resolvent_trace(projected: np.ndarray, update) -> float:
    """``tr[(I - M)^{-1} U]`` for a dense ``U``, a rank-one update or a list of them."""
    A = np.eye(projected.shape[0]) - projected
    if isinstance(update, RankOneUpdate):
        return float(update.right @ np.linalg.solve(A, update.left))
    if isinstance(update, (list, tuple)):
        return sum(resolvent_trace(projected, u) for u in update)
    return float(np.trace(np.linalg.solve(A, update)))


def det_and_trace(projected: np.ndarray, updates) -> tuple[float, float]:
    """``det(I - M)`` and ``-det(I - M) tr[(I - M)^{-1} U]`` (the derivative of the determinant)."""
    d = _det(projected)
    return d, -d * resolvent_trace(projected, updates)
