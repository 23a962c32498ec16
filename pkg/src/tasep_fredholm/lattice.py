"""One-dimensional lattice kernels.

Every kernel here is a function of integer lattice sites.  The discrete
ones (``Q`` powers, their inverses and the polynomial extension ``Qbar``)
are dyadic rationals and are returned exactly as :class:`fractions.Fraction`.
The time-dependent ones are floats.

The ``S`` kernels carry an overall ``2**(z1 - z2)`` (or ``2**(z2 - z1)``)
factor that overflows doubles on wide windows.  ``s_conj`` / ``sbar_conj``
return the kernel with that factor stripped; they depend only on the
difference of their two arguments and are vectorized over it.

Time enters only through the two "clock amounts" ``u = r*t`` (right jumps)
and ``v = l*t`` (left pushes).  The public ``(t, rates)`` signatures map to
``(u, v)`` internally.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "ConvergenceError",
    "RateParams",
    "TASEP",
    "ContourConfig",
    "LatticeFunction",
    "q_kernel",
    "q_pow",
    "q_inv_pow",
    "qbar",
    "nabla",
    "poisson_group",
    "poisson_weight",
    "s_kernel",
    "sbar_kernel",
    "s_conj",
    "sbar_conj",
    "psi",
    "g_schutz",
    "contour_quadrature",
    "binom_int",
]


class ConvergenceError(ArithmeticError):
    """A truncated series or quadrature did not reach its tolerance."""


@dataclass(frozen=True)
class RateParams:
    """PushASEP rates: right jumps at rate ``r``, left pushes at rate ``l``."""

    r: float = 1.0
    l: float = 0.0

    def __post_init__(self):
        if self.r < 0 or self.l < 0:
            raise ValueError(f"rates must be nonnegative, got r={self.r}, l={self.l}")
        if self.r + self.l <= 0:
            raise ValueError("at least one of r, l must be positive")

    def clock(self, t: float, t2: float | None = None) -> tuple[float, float]:
        """Clock amounts ``(r*t, l*t2)``; ``t2`` defaults to ``t``."""
        return self.r * t, self.l * (t if t2 is None else t2)


TASEP = RateParams(1.0, 0.0)


@dataclass(frozen=True)
class ContourConfig:
    """Circle used for trapezoidal contour quadrature."""

    center: complex = 0.0
    radius: float = 0.5
    nodes: int = 64

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.nodes < 16:
            raise ValueError("need at least 16 quadrature nodes")

    def encloses(self, w: complex) -> bool:
        return abs(w - self.center) < self.radius

    def with_nodes(self, nodes: int) -> "ContourConfig":
        return ContourConfig(self.center, self.radius, nodes)


GAMMA_0 = ContourConfig(0.0, 0.5, 64)
GAMMA_01 = ContourConfig(0.5, 1.2, 64)
MAX_NODES = 4096


@dataclass(frozen=True)
class LatticeFunction:
    """Values of a function on the consecutive sites ``start, start+1, ...``."""

    start: int
    values: np.ndarray

    @property
    def stop(self) -> int:
        return self.start + len(self.values)

    def sites(self) -> np.ndarray:
        return np.arange(self.start, self.stop)

    def __call__(self, x: int):
        return self.values[x - self.start]


# ---------------------------------------------------------------------------
# exact combinatorics


def binom_int(m: int, j: int) -> int:
    """Binomial coefficient ``C(m, j)`` for any integer ``m`` and ``j >= 0``.

    Uses the falling factorial, so negative upper arguments follow
    ``C(-m, j) = (-1)**j C(m + j - 1, j)``.
    """
    if j < 0:
        return 0
    if m >= 0:
        return math.comb(m, j)
    return (-1) ** j * math.comb(-m + j - 1, j)


def _binom_float(m, j: int) -> np.ndarray:
    """Generalized binomial ``C(m, j)`` vectorized over the upper argument."""
    m = np.asarray(m, dtype=float)
    out = np.ones_like(m)
    for i in range(j):
        out = out * (m - i) / (i + 1)
    return out


def poisson_weight(t: float, k):
    """``t**k / k!`` for integer ``k >= 0`` (zero for negative ``k``).

    Exact factorials up to 20, log-gamma above.  ``t`` may be negative.
    """
    k = np.asarray(k)
    scalar = k.ndim == 0
    k = np.atleast_1d(k).astype(np.int64)
    out = np.zeros(k.shape, dtype=float)
    ok = k >= 0
    if t == 0:
        out[k == 0] = 1.0
    else:
        small = ok & (k <= 20)
        big = ok & (k > 20)
        if small.any():
            ks = k[small]
            fact = np.array([math.factorial(int(i)) for i in ks], dtype=float)
            out[small] = np.power(float(t), ks) / fact
        if big.any():
            kb = k[big].astype(float)
            logs = kb * math.log(abs(t)) - np.array([math.lgamma(i + 1.0) for i in kb])
            sign = np.where((k[big] % 2 == 1) & (t < 0), -1.0, 1.0)
            out[big] = sign * np.exp(logs)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Q and friends (exact)


def q_kernel(x: int, y: int) -> Fraction:
    """Transition kernel of the geometric down-walk: ``2**(y-x)`` if ``x > y``."""
    return Fraction(1, 2 ** (x - y)) if x > y else Fraction(0)


def q_pow(n: int, x: int, y: int) -> Fraction:
    """``Q**n(x, y)``; the identity for ``n == 0``."""
    if n < 0:
        raise ValueError("q_pow needs n >= 0; use q_inv_pow for negative powers")
    if n == 0:
        return Fraction(int(x == y))
    d = x - y
    if d < n:
        return Fraction(0)
    return Fraction(math.comb(d - 1, n - 1), 2**d)


def q_inv_pow(n: int, x: int, y: int) -> Fraction:
    """``Q**(-n)(x, y) = (-1)**(y-x+n) 2**(y-x) C(n, y-x)`` for ``0 <= y-x <= n``."""
    if n < 0:
        raise ValueError("q_inv_pow needs n >= 0")
    d = y - x
    if d < 0 or d > n:
        return Fraction(0)
    return Fraction((-1) ** ((d + n) % 2) * 2**d * math.comb(n, d))


def qbar(n: int, x: int, y: int) -> Fraction:
    """Polynomial extension of ``Q**n``: ``2**(y-x) prod_{j=1}^{n-1} (x-y-j) / (n-1)!``.

    Agrees with ``q_pow(n, x, y)`` whenever ``x - y >= 1``.
    """
    if n < 1:
        raise ValueError("qbar needs n >= 1")
    d = x - y
    return Fraction(binom_int(d - 1, n - 1)) * (Fraction(2) ** (-d))


def nabla(direction: str, f: LatticeFunction) -> LatticeFunction:
    """Backward (``"minus"``) or forward (``"plus"``) difference of ``f``.

    The result lives on a window one site narrower than ``f``.
    """
    if len(f.values) < 2:
        raise ValueError("window too small for a difference")
    diff = np.diff(f.values)
    if direction == "minus":
        return LatticeFunction(f.start + 1, diff)
    if direction == "plus":
        return LatticeFunction(f.start, diff)
    raise ValueError(f"unknown direction {direction!r}")


def poisson_group(t: float, x: int, y: int) -> float:
    """Kernel of ``exp(-t/2 nabla^-)``: ``e^{-t/2} (t/2)**(x-y) / (x-y)!`` for ``x >= y``."""
    if x < y:
        return 0.0
    return math.exp(-t / 2) * poisson_weight(t / 2, x - y)


# ---------------------------------------------------------------------------
# contour quadrature


def contour_quadrature(f, cfg: ContourConfig, *, real: bool = False, imag_tol: float = 1e-12):
    """Trapezoidal approximation of ``(1/2 pi i) \\oint f(w) dw`` on a circle.

    ``f`` must accept a complex ndarray.  With ``real=True`` the imaginary
    part is checked against ``imag_tol`` (relative to the integrand scale)
    and a warning is issued when it is larger.
    """
    theta = 2 * np.pi * np.arange(cfg.nodes) / cfg.nodes
    e = np.exp(1j * theta)
    w = cfg.center + cfg.radius * e
    vals = np.asarray(f(w), dtype=complex)
    total = cfg.radius * np.mean(vals * e)
    if real:
        scale = max(abs(total), cfg.radius * float(np.max(np.abs(vals))) * 1e-3, 1e-300)
        if abs(total.imag) > imag_tol * scale:
            warnings.warn(
                f"contour quadrature: imaginary residue {total.imag:.3e}", RuntimeWarning, stacklevel=2
            )
    return complex(total)


def _adaptive_quadrature(f, cfg: ContourConfig, rtol: float = 1e-13) -> float:
    """Double the node count until two successive values agree."""
    prev = contour_quadrature(f, cfg)
    nodes = cfg.nodes
    while nodes < MAX_NODES:
        nodes *= 2
        c = cfg.with_nodes(nodes)
        cur = contour_quadrature(f, c)
        theta = 2 * np.pi * np.arange(nodes) / nodes
        scale = cfg.radius * float(np.max(np.abs(f(cfg.center + cfg.radius * np.exp(1j * theta)))))
        if abs(cur - prev) <= rtol * max(abs(cur), scale * 1e-3):
            return cur.real
        prev = cur
    raise ConvergenceError(f"contour quadrature did not converge with {MAX_NODES} nodes")


# ---------------------------------------------------------------------------
# power-series coefficients


def _tasep_coeffs(n: int, k, u: float) -> np.ndarray:
    """``[w**k] (1-w)**n e^{u w}`` for an array of ``k`` (zero when ``k < 0``)."""
    k = np.asarray(k, dtype=np.int64)
    out = np.zeros(k.shape, dtype=float)
    for j in range(n + 1):
        c = math.comb(n, j) * (-1) ** j
        out += c * poisson_weight(u, k - j).reshape(k.shape)
    return out


def _exp_series(g: np.ndarray) -> np.ndarray:
    """Taylor coefficients of ``exp(g(w))`` given those of ``g`` with ``g[0] == 0``."""
    a = np.zeros_like(g)
    a[0] = 1.0
    for k in range(1, len(g)):
        a[k] = sum(j * g[j] * a[k - j] for j in range(1, k + 1)) / k
    return a


_TAIL_EXTRA = 5


def s_conj(n: int, m, u: float = 0.0, v: float = 0.0, *, method: str = "auto"):
    """Conjugated ``S_{-t,-n}``: ``2**(z2-z1) S(z1, z2)`` as a function of ``m = n + z2 - z1``.

    Equals ``e^{-u/2 - 2v} [w**m] (1-w)**n exp(u w + v / w)``.
    ``method`` is ``"auto"``, ``"series"`` or ``"quadrature"``.
    """
    m = np.asarray(m, dtype=np.int64)
    scalar = m.ndim == 0
    m = np.atleast_1d(m)
    if method == "quadrature" or (method == "auto" and (u > 50 or v > 50)):
        out = np.array([_s_quadrature(n, int(mi), u, v) for mi in m.ravel()]).reshape(m.shape)
    elif v == 0 and method == "auto":
        out = math.exp(-u / 2) * _tasep_coeffs(n, m, u)
    else:
        out = math.exp(-u / 2 - 2 * v) * _s_double_series(n, m, u, v)
    return float(out[0]) if scalar else out


def _s_double_series(n: int, m: np.ndarray, u: float, v: float) -> np.ndarray:
    """``[w**m] (1-w)**n e^{uw} e^{v/w}`` as a Cauchy product of the two series.

    ``sum_{k >= max(0, m)} p_k v**(k-m) / (k-m)!`` with ``p_k`` the Taylor
    coefficients of ``(1-w)**n e^{uw}``.  Truncated once five consecutive
    terms fall below ``1e-17`` of the running sum.
    """
    if v == 0:
        return _tasep_coeffs(n, m, u)
    flat = m.ravel()
    k0 = np.maximum(flat, 0)
    span = 40 + int(4 * (u + v))
    out = np.zeros(flat.shape, dtype=float)
    while True:
        steps = np.arange(span)
        k = k0[:, None] + steps[None, :]
        terms = _tasep_coeffs(n, k, u) * poisson_weight(v, (k - flat[:, None]).ravel()).reshape(k.shape)
        out = terms.sum(axis=1)
        tail = np.abs(terms[:, -_TAIL_EXTRA:]).max(axis=1)
        if np.all((tail <= 1e-17 * np.abs(out)) | (tail == 0)):
            break
        if span > 4000:
            raise ConvergenceError("S kernel series did not converge")
        span *= 2
    return out.reshape(m.shape)


def _s_quadrature(n: int, m: int, u: float, v: float) -> float:
    # saddle-ish radius balances e^{uw} against e^{v/w} and w**(-m-1)
    rho = 0.5 if v == 0 else max(0.05, min(5.0, math.sqrt(v / max(u, 1e-12)) if u > 0 else 1.0))
    cfg = ContourConfig(0.0, rho, 64)

    def f(w):
        return (1 - w) ** n * np.exp(u * (w - 0.5) + v * (1 / w - 2)) / w ** (m + 1)

    return _adaptive_quadrature(f, cfg)


def sbar_conj(n: int, d, u: float = 0.0, v: float = 0.0):
    """Conjugated ``Sbar_{-t,n}``: ``2**(z1-z2) Sbar(z1, z2)`` as a function of ``d = z2 - z1``.

    Equals ``e^{v - u/2} [w**(n-1)] (1-w)**(d+n-1) exp(u w - v w / (1-w))``,
    a finite sum of ``n`` terms with generalized binomial coefficients.
    """
    if n < 1:
        raise ValueError("sbar needs n >= 1")
    d = np.asarray(d, dtype=np.int64)
    scalar = d.ndim == 0
    g = np.zeros(n)
    if n > 1:
        g[1:] = -v
        g[1] += u
    a = _exp_series(g)
    upper = d + n - 1
    out = np.zeros(d.shape, dtype=float)
    for j in range(n):
        out += (-1) ** j * _binom_float(upper, j) * a[n - 1 - j]
    out *= math.exp(v - u / 2)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# public scalar kernels


def s_kernel(t: float, n: int, z1: int, z2: int, rates: RateParams = TASEP, *, method: str = "auto") -> float:
    """``S_{-t,-n}(z1, z2)``; for TASEP rates ``(e^{-t/2 nabla^-} Q^{-n})^*``."""
    if t < 0 or n < 0:
        raise ValueError("s_kernel needs t >= 0 and n >= 0")
    u, v = rates.clock(t)
    return math.ldexp(s_conj(n, n + z2 - z1, u, v, method=method), z1 - z2)


def sbar_kernel(t: float, n: int, z1: int, z2: int, rates: RateParams = TASEP) -> float:
    """``Sbar_{-t,n}(z1, z2)``; for TASEP rates ``Qbar^{(n)} e^{t/2 nabla^-}``."""
    if t < 0 or n < 1:
        raise ValueError("sbar_kernel needs t >= 0 and n >= 1")
    u, v = rates.clock(t)
    return math.ldexp(sbar_conj(n, z2 - z1, u, v), z2 - z1)


def psi(n: int, k: int, x: int, t: float, X0) -> float:
    """``Psi^n_k(x) = 2**(X0(n-k)-x) e^{-t} [w**(x+k-X0(n-k))] (1-w)**k e^{tw}``."""
    if not 0 <= k <= n - 1 or n > len(X0):
        raise ValueError("psi needs 0 <= k <= n-1 and n <= len(X0)")
    base = X0[n - k - 1]
    coeff = _tasep_coeffs(k, np.array([x + k - base]), t)[0]
    return math.ldexp(math.exp(-t) * coeff, base - x)


def g_schutz(n: int, t: float, x: int, cfg: ContourConfig = GAMMA_01) -> float:
    """Schutz's ``G_n(t, x)`` by trapezoidal quadrature on a loop around 0 and 1."""
    if t < 0:
        raise ValueError("g_schutz needs t >= 0")
    if not (cfg.encloses(0) and cfg.encloses(1)):
        raise ValueError("contour must enclose both w=0 and w=1")
    p = x - n + 1

    def f(w):
        return (1 - w) ** (-n) * w ** (-p) * np.exp(t * (w - 1))

    return (-1) ** (n % 2) * _adaptive_quadrature(f, cfg)
