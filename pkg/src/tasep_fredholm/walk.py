"""The geometric down-walk and its strict-epigraph hitting law.

The walk ``B`` steps from ``y`` to ``y - s`` with probability ``2**-s``
(``s >= 1``), i.e. it has transition kernel ``Q``.  Given a curve
``c_0 >= c_1 >= ... >= c_{n-1}`` (a prefix of an initial configuration,
``c_k = X0(k+1)``) the hitting time ``tau`` is the first ``k`` with
``B_k > c_k``.

Two evaluation routes are provided:

* exact dynamic programming in dyadic rationals (:func:`hit_distribution`),
  used by the identity checks;
* a vectorized float DP over many starting points (:func:`hit_counts`)
  that tracks *path counts* ``2**(start - B) * P(...)``, which are
  integers, used for kernel assembly.

Because the walk moves down by at least one site per step, any state at or
below the minimum of the remaining curve can never hit; those states are
lumped into a single absorbing dead state.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import TASEP, RateParams, qbar, sbar_kernel

__all__ = [
    "ParticleConfig",
    "WalkHitDistribution",
    "HitCounts",
    "block_length",
    "hit_distribution",
    "hit_counts",
    "constrained_propagator",
    "sbar_epi",
    "f_k",
    "f_hat_k",
    "g_k",
    "g_hat_k",
    "is_dyadic",
]

MAX_WIDTH = 512


@dataclass(frozen=True)
class ParticleConfig:
    """Strictly decreasing particle positions ``X(1) > X(2) > ... > X(N)``."""

    positions: tuple[int, ...]

    def __post_init__(self):
        pos = tuple(int(x) for x in self.positions)
        object.__setattr__(self, "positions", pos)
        if any(a <= b for a, b in zip(pos, pos[1:])):
            raise ValueError(f"positions must be strictly decreasing: {pos}")

    def __len__(self):
        return len(self.positions)

    def __iter__(self):
        return iter(self.positions)

    def __getitem__(self, i):
        return self.positions[i]

    def x(self, k: int) -> int:
        """Position of particle ``k`` (1-based label)."""
        return self.positions[k - 1]

    def movable(self, k: int) -> bool:
        return k == 1 or self.positions[k - 2] - self.positions[k - 1] > 1

    def moved_right(self, k: int) -> "ParticleConfig":
        pos = list(self.positions)
        pos[k - 1] += 1
        return ParticleConfig(tuple(pos))

    def pushed_left(self, k: int) -> "ParticleConfig":
        """Particle ``k`` jumps left, pushing its block (truncated at ``N``)."""
        b = block_length(self.positions, k, truncate=True)
        pos = list(self.positions)
        for j in range(k - 1, k - 1 + b):
            pos[j] -= 1
        return ParticleConfig(tuple(pos))


def block_length(X0, k: int, *, truncate: bool = False) -> int:
    """Length of the run of occupied sites ending at (and including) particle ``k``.

    ``X0(k+j) = X0(k) - j`` for ``j < b``.  When the block reaches the last
    stored particle its true length is unknown; that is an error unless
    ``truncate`` is set, in which case the stored part is returned.
    """
    pos = tuple(X0)
    if not 1 <= k <= len(pos):
        raise IndexError(f"particle label {k} out of range 1..{len(pos)}")
    b = 1
    while k - 1 + b < len(pos) and pos[k - 1 + b] == pos[k - 1] - b:
        b += 1
    if k - 1 + b == len(pos) and not truncate:
        raise ValueError(f"block of particle {k} runs past the stored configuration")
    return b


def is_dyadic(p: Fraction) -> bool:
    d = p.denominator
    return d & (d - 1) == 0


@dataclass
class WalkHitDistribution:
    """Exact law of ``(tau, B_tau)`` restricted to ``tau < n``.

    ``mass[(k, y)] = P(tau = k, B_k = y)``; ``survival`` is the mass alive and
    unhit at the last curve time, ``dead`` the mass absorbed below the curve.
    """

    start: int
    start_time: int
    mass: dict = field(default_factory=dict)
    survival: Fraction = Fraction(0)
    dead: Fraction = Fraction(0)

    def total(self) -> Fraction:
        return sum(self.mass.values(), Fraction(0)) + self.survival + self.dead

    def at(self, k: int, y: int) -> Fraction:
        return self.mass.get((k, y), Fraction(0))


def _floor(curve, first: int):
    tail = curve[first:]
    return min(tail) if tail else None


def hit_distribution(start: int, curve, *, start_time: int = 0, hit_from: int | None = None) -> WalkHitDistribution:
    """Exact hitting law for a walk sitting at ``start`` at time ``start_time``.

    Hits are only counted at times ``>= hit_from`` (default ``start_time``);
    the curve entry ``curve[k]`` applies at time ``k``.
    """
    curve = tuple(int(c) for c in curve)
    if not curve:
        raise ValueError("empty curve")
    n = len(curve)
    hit_from = start_time if hit_from is None else max(hit_from, start_time)
    out = WalkHitDistribution(start, start_time)
    floor = _floor(curve, hit_from)
    if floor is None:
        out.survival = Fraction(1)
        return out
    if start <= floor:
        out.dead = Fraction(1)
        return out
    if start - floor > MAX_WIDTH:
        raise ValueError(f"walk window {start - floor} exceeds {MAX_WIDTH}")
    alive = {start: Fraction(1)}
    for k in range(start_time, n):
        if k >= hit_from:
            for y in [y for y in alive if y > curve[k]]:
                out.mass[(k, y)] = alive.pop(y)
        if k == n - 1:
            break
        step = defaultdict(Fraction)
        for y, p in alive.items():
            for y2 in range(floor + 1, y):
                step[y2] += p / 2 ** (y - y2)
            out.dead += p / 2 ** (y - floor - 1)
        alive = step
    out.survival = sum(alive.values(), Fraction(0))
    return out


def constrained_propagator(start: int, curve, n: int, z: int, *, start_time: int = 0, hit_from: int | None = None) -> Fraction:
    """``P(B_n = z, no hit at times in [hit_from, n))`` for a walk at ``start`` at ``start_time``."""
    curve = tuple(int(c) for c in curve)
    hit_from = start_time if hit_from is None else max(hit_from, start_time)
    if z > start - (n - start_time):
        return Fraction(0)
    alive = {start: Fraction(1)}
    for k in range(start_time, n):
        if hit_from <= k < len(curve):
            alive = {y: p for y, p in alive.items() if y <= curve[k]}
        step = defaultdict(Fraction)
        for y, p in alive.items():
            for y2 in range(z, y):
                step[y2] += p / 2 ** (y - y2)
        alive = step
    return alive.get(z, Fraction(0))


@dataclass
class HitCounts:
    """Path-count form of the hitting law for many starting points at once.

    ``hits[k][s, g]`` is ``2**(starts[s] - positions[g]) * P(tau = k, B_k = positions[g])``
    (an integer path count, stored as float).  ``survivors`` has the same
    meaning for the unhit mass at the last curve time.
    """

    starts: np.ndarray
    positions: np.ndarray
    hits: dict
    survivors: np.ndarray


def hit_counts(starts, curve, *, start_time: int = 0, hit_from: int | None = None) -> HitCounts:
    starts = np.asarray(starts, dtype=np.int64)
    curve = tuple(int(c) for c in curve)
    n = len(curve)
    hit_from = start_time if hit_from is None else max(hit_from, start_time)
    floor = _floor(curve, hit_from)
    if floor is None or starts.size == 0 or starts.max() <= floor:
        return HitCounts(starts, np.zeros(0, dtype=np.int64), {}, np.zeros((starts.size, 0)))
    top = int(starts.max())
    if top - floor > 4 * MAX_WIDTH:
        raise ValueError(f"walk window {top - floor} too wide")
    positions = np.arange(floor + 1, top + 1)
    alive = np.zeros((starts.size, positions.size))
    live = starts > floor
    alive[np.nonzero(live)[0], starts[live] - floor - 1] = 1.0
    hits = {}
    for k in range(start_time, n):
        if k >= hit_from:
            mask = positions > curve[k]
            if mask.any():
                h = np.where(mask[None, :], alive, 0.0)
                if h.any():
                    hits[k] = h
                alive = np.where(mask[None, :], 0.0, alive)
        if k == n - 1:
            break
        above = np.cumsum(alive[:, ::-1], axis=1)[:, ::-1]
        alive = np.zeros_like(alive)
        alive[:, :-1] = above[:, 1:]
    return HitCounts(starts, positions, hits, alive)


# ---------------------------------------------------------------------------
# epigraph kernel and the rank-one ingredients


def _sbar(t: float, n: int, z1: int, z2: int, rates: RateParams):
    """``Sbar_{-t,n}(z1, z2)``, exact (``Qbar``) at ``t == 0``."""
    if t == 0:
        return qbar(n, z1, z2)
    return sbar_kernel(t, n, z1, z2, rates)


def _restarted(t, n, hd: WalkHitDistribution, z, rates, shift: int = 0):
    """``E[Sbar_{n-tau}(B_tau + shift, z); tau < n]`` under a hitting law."""
    total = Fraction(0) if t == 0 else 0.0
    for (k, y), p in hd.mass.items():
        if k < n:
            total += (p if t == 0 else float(p)) * _sbar(t, n - k, y + shift, z, rates)
    return total


def sbar_epi(t: float, n: int, X0, z1: int, z2: int, rates: RateParams = TASEP):
    """``E_{B_0=z1}[Sbar_{-t,n-tau}(B_tau, z2); tau < n]`` for the curve ``X0(1..n)``."""
    if not 1 <= n <= len(X0):
        raise ValueError("sbar_epi needs 1 <= n <= len(X0)")
    hd = hit_distribution(z1, tuple(X0)[:n])
    return _restarted(t, n, hd, z2, rates)


def _shift_block(X0, k: int) -> tuple[int, ...]:
    pos = list(X0)
    b = block_length(pos, k, truncate=True)
    for j in range(k - 1, k - 1 + b):
        pos[j] -= 1
    return tuple(pos)


def f_k(k: int, z: int, X0, variant: str = "tasep") -> Fraction:
    """Probability that the walk from ``z`` first hits at time ``k-1`` at the moved site.

    TASEP: ``P(tau = k-1, B_{k-1} = X0(k)+1)``.  Push: the same with the
    block-shifted configuration and target ``X0(k)``.
    """
    X0 = tuple(X0)
    if not 1 <= k <= len(X0):
        raise ValueError("f_k needs 1 <= k <= len(X0)")
    if variant == "tasep":
        curve, target = X0[:k], X0[k - 1] + 1
    elif variant == "push":
        curve, target = _shift_block(X0, k)[:k], X0[k - 1]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return hit_distribution(z, curve).at(k - 1, target)


def f_hat_k(k: int, z: int, X0) -> Fraction:
    """Push ``f_hat``: ``P(tau_hat = k-1, B_{k-1} = X0(k))`` for the curve shifted down by one."""
    X0 = tuple(X0)
    curve = tuple(c - 1 for c in X0[:k])
    return hit_distribution(z, curve).at(k - 1, X0[k - 1])


def g_k(n: int, k: int, z: int, t: float, X0, rates: RateParams = TASEP, variant: str = "tasep"):
    """Right factor of the rank-one kernel change from moving particle ``k``.

    Exact (``Fraction``) at ``t == 0``.
    """
    X0 = tuple(X0)
    if k > n:
        return Fraction(0) if t == 0 else 0.0
    curve = X0[:n]
    if variant == "tasep":
        s = X0[k - 1] + 1
        hd = hit_distribution(s, curve, start_time=k - 1, hit_from=k)
        return _restarted(t, n, hd, z, rates) - _sbar(t, n - k + 1, s, z, rates)
    if variant == "push":
        s = X0[k - 1]
        hd = hit_distribution(s, curve, start_time=k - 1, hit_from=k)
        return _sbar(t, n - k + 1, s, z, rates) - _restarted(t, n, hd, z, rates)
    raise ValueError(f"unknown variant {variant!r}")


def g_hat_k(n: int, k: int, z: int, t: float, X0, rates: RateParams = TASEP, variant: str = "tasep"):
    """Right factor appearing in the time derivative of the kernel."""
    X0 = tuple(X0)
    if k > n:
        return Fraction(0) if t == 0 else 0.0
    curve = X0[:n]
    s = X0[k - 1]
    hd = hit_distribution(s, curve, start_time=k - 1, hit_from=k)
    if variant == "tasep":
        return _restarted(t, n, hd, z, rates) - _sbar(t, n - k + 1, s, z, rates)
    if variant == "push":
        return _sbar(t, n - k + 1, s + 1, z, rates) - _restarted(t, n, hd, z, rates, shift=1)
    raise ValueError(f"unknown variant {variant!r}")
