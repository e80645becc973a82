"""q-Gaussian distribution family: densities, truncations, CDF/sampling,
mode analysis and the arcsine equilibrium measure.

The standardized density for -1 < q < 1 is supported on
[-2/sqrt(1-q), 2/sqrt(1-q)] and is evaluated through its Chebyshev-U
series, whose k-th coefficient is (-1)^(k-1) * q^(k(k-1)/2).  A location
and a variance scale extend the family to mu(dx) = f((x-loc)/sqrt(s))/sqrt(s) dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "QGaussianParams",
    "q_bracket",
    "q_factorial",
    "q_pochhammer",
    "density",
    "density_truncated",
    "truncation_bound",
    "cdf",
    "inverse_cdf",
    "sample",
    "equilibrium_density",
    "sample_equilibrium",
    "bimodal_threshold",
    "mode_count",
]

# Constructors clamp tighter than the open interval (-1, 1): the series and
# product representations lose double-precision accuracy near |q| = 1.
Q_MAX = 0.99

_SERIES_TAIL_TOL = 1e-15
_CDF_TABLE_SIZE = 1024


def _check_q(q: float) -> None:
    if not -1.0 < q < 1.0:
        raise ValueError(f"q must lie in (-1, 1), got {q}")


def q_bracket(n: int, q: float) -> float:
    """q-analogue of the integer n: 1 + q + ... + q^(n-1), with 0 for n=0."""
    _check_q(q)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 0.0
    if q == 1.0:  # unreachable through _check_q, kept for clarity
        return float(n)
    return (1.0 - q**n) / (1.0 - q)


def q_factorial(n: int, q: float) -> float:
    """Product [1]_q [2]_q ... [n]_q; empty product 1 for n=0."""
    _check_q(q)
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = 1.0
    for k in range(1, n + 1):
        out *= q_bracket(k, q)
    return out


def q_pochhammer(a: float, q: float, n: int) -> float:
    """Finite q-shifted factorial prod_{k=0}^{n-1} (1 - a q^k)."""
    _check_q(q)
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = 1.0
    for k in range(n):
        out *= 1.0 - a * q**k
    return out


@dataclass(frozen=True)
class QGaussianParams:
    """Prior family parameters: deformation q, location and variance scale.

    The support is the closed interval
    location +- 2*sqrt(scale)/sqrt(1-q); its half-width is finite for
    every admissible q.
    """

    q: float
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not -Q_MAX <= self.q <= Q_MAX:
            raise ValueError(f"q must lie in [-{Q_MAX}, {Q_MAX}], got {self.q}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def support(self) -> tuple[float, float]:
        half = 2.0 * math.sqrt(self.scale) / math.sqrt(1.0 - self.q)
        return (self.location - half, self.location + half)

    def standardize(self, x):
        return (np.asarray(x, dtype=float) - self.location) / math.sqrt(self.scale)

    def unstandardize(self, u):
        return self.location + math.sqrt(self.scale) * np.asarray(u, dtype=float)


@lru_cache(maxsize=256)
def _series_coeffs(q: float, n_terms: int | None = None) -> np.ndarray:
    """Signed series coefficients (-1)^(k-1) q^(k(k-1)/2), k = 1..K.

    With n_terms=None, K is chosen adaptively so the magnitude bound of the
    first dropped summand, |q|^(K(K+1)/2) * (2K+1), falls below 1e-15.
    """
    coeffs = []
    k = 1
    while True:
        mag = abs(q) ** (k * (k - 1) / 2.0) * (2 * k - 1)
        if n_terms is None:
            if mag < _SERIES_TAIL_TOL or k > 400:
                break
        elif k > n_terms:
            break
        coeffs.append((-1.0) ** (k - 1) * q ** (k * (k - 1) // 2))
        k += 1
    return np.asarray(coeffs)


def _chebu_series(t: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Sum_k coeffs[k-1] * U_{2k-2}(t) via the three-term recurrence.

    The recurrence U_{n+1} = 2t U_n - U_{n-1} is exact at t = +-1, so no
    endpoint special-casing is required.
    """
    t = np.asarray(t, dtype=float)
    total = np.full_like(t, coeffs[0])  # U_0 = 1
    if len(coeffs) == 1:
        return total
    u_prev = np.ones_like(t)
    u_curr = 2.0 * t
    deg = 1
    for k in range(2, len(coeffs) + 1):
        while deg < 2 * k - 2:
            u_prev, u_curr = u_curr, 2.0 * t * u_curr - u_prev
            deg += 1
        total += coeffs[k - 1] * u_curr
    return total


def _density_std(q: float, u, n_terms: int | None = None):
    """Standardized density at u; zero outside [-2/sqrt(1-q), 2/sqrt(1-q)]."""
    u = np.asarray(u, dtype=float)
    t = u * math.sqrt(1.0 - q) / 2.0
    inside = np.abs(t) <= 1.0
    t_in = np.where(inside, t, 0.0)
    series = _chebu_series(t_in, _series_coeffs(q, n_terms))
    vals = (math.sqrt(1.0 - q) / math.pi) * np.sqrt(np.clip(1.0 - t_in**2, 0.0, None)) * series
    return np.where(inside, vals, 0.0)


def _as_input_shape(x, vals):
    return float(vals) if np.isscalar(x) else vals


def density(params: QGaussianParams, x):
    """Probability density of mu_q at x (scalar or array); 0 outside support."""
    u = params.standardize(x)
    vals = _density_std(params.q, u) / math.sqrt(params.scale)
    return _as_input_shape(x, vals)


def density_truncated(params: QGaussianParams, terms: int, x):
    """Partial-sum density keeping summands k = 1..terms-1.

    May be slightly negative near the support edges for small term counts;
    values are returned unclamped.
    """
    if terms < 2:
        raise ValueError("need terms >= 2")
    u = params.standardize(x)
    vals = _density_std(params.q, u, n_terms=terms - 1) / math.sqrt(params.scale)
    return _as_input_shape(x, vals)


def truncation_bound(q: float, terms: int) -> float:
    """Uniform bound on |density - density_truncated|, valid for terms >= 4."""
    _check_q(q)
    if terms < 4:
        raise ValueError("the truncation bound requires terms >= 4")
    return abs(q) ** ((terms - 1) * (terms - 2) / 2.0) / (math.pi * (1.0 - q * q) ** 2)


def _theta_pdf(q: float, psi):
    """Density of psi = angle variable under mu_q, on (0, pi).

    With x = location - 2 sqrt(scale) cos(psi)/sqrt(1-q) the pushforward of
    mu_q has density (2/pi) sin(psi) sum_k c_k sin((2k-1) psi), smooth up to
    the endpoints where it vanishes.
    """
    psi = np.asarray(psi, dtype=float)
    coeffs = _series_coeffs(q)
    total = np.zeros_like(psi)
    for k in range(1, len(coeffs) + 1):
        total += coeffs[k - 1] * np.sin((2 * k - 1) * psi)
    return (2.0 / math.pi) * np.sin(psi) * total


def _x_from_psi(params: QGaussianParams, psi):
    return params.location - 2.0 * math.sqrt(params.scale) * np.cos(psi) / math.sqrt(
        1.0 - params.q
    )


def _psi_from_x(params: QGaussianParams, x) -> float:
    t = float(params.standardize(x)) * math.sqrt(1.0 - params.q) / 2.0
    return math.acos(-min(1.0, max(-1.0, t)))


def cdf(params: QGaussianParams, x) -> float:
    """P(X <= x), by adaptive quadrature of the smooth angle-space density."""
    lo, hi = params.support()
    if x <= lo:
        return 0.0
    if x >= hi:
        return 1.0
    psi = _psi_from_x(params, x)
    val, _ = integrate.quad(lambda s: float(_theta_pdf(params.q, s)), 0.0, psi,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return min(1.0, max(0.0, val))


def inverse_cdf(params: QGaussianParams, p: float) -> float:
    """Quantile function; bracketed root-finding to |cdf(x) - p| <= 1e-12."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    psi = optimize.brentq(
        lambda s: integrate.quad(lambda r: float(_theta_pdf(params.q, r)), 0.0, s,
                                 epsabs=1e-14, epsrel=1e-13, limit=200)[0] - p,
        0.0, math.pi, xtol=1e-15, rtol=8.9e-16)
    return float(_x_from_psi(params, psi))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)


def _segment_integrals(q: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Gauss-Legendre integrals of the angle-space density over [lo, hi]."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return half * (_theta_pdf(q, pts) @ _GL_WEIGHTS)


class _CdfTable:
    """Monotone angle-space CDF table with monotone-cubic inverse lookup."""

    def __init__(self, q: float, size: int = _CDF_TABLE_SIZE):
        from scipy.interpolate import PchipInterpolator

        self.q = q
        self.psi = np.linspace(0.0, math.pi, size + 1)
        seg = _segment_integrals(q, self.psi[:-1], self.psi[1:])
        self.F = np.concatenate([[0.0], np.cumsum(seg)])
        self.total = self.F[-1]
        self._inv = PchipInterpolator(self.F, self.psi)

    def invert(self, u: np.ndarray) -> np.ndarray:
        u = np.clip(u * self.total, 0.0, self.total)
        psi = np.clip(self._inv(u), 0.0, math.pi)
        j = np.clip(np.searchsorted(self.F, u, side="right") - 1, 0, len(self.F) - 2)
        lo, hi = self.psi[j], self.psi[j + 1]
        for _ in range(2):  # Newton polish from the cubic start
            f_val = self.F[j] + _segment_integrals(self.q, lo, psi)
            slope = np.maximum(_theta_pdf(self.q, psi), 1e-300)
            psi = np.clip(psi - (f_val - u) / slope, lo, hi)
        return psi


_cdf_tables: dict[float, _CdfTable] = {}


def _cdf_table(q: float) -> _CdfTable:
    tab = _cdf_tables.get(q)
    if tab is None:
        tab = _cdf_tables[q] = _CdfTable(q)
    return tab


def sample(params: QGaussianParams, seed, count: int) -> np.ndarray:
    """i.i.d. draws by inverse-CDF transform of a seeded generator.

    Identical seeds give bit-identical output; every draw lies in the
    (closed) support interval.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return np.empty(0)
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    psi = _cdf_table(params.q).invert(u)
    return np.asarray(_x_from_psi(params, psi), dtype=float)


def equilibrium_density(params: QGaussianParams, x):
    """Arcsine (Chebyshev) equilibrium density on the same support."""
    u = params.standardize(x)
    q = params.q
    rad = 4.0 - (1.0 - q) * u * u
    with np.errstate(divide="ignore"):
        vals = np.where(
            rad > 0.0,
            math.sqrt(1.0 - q) / (math.pi * np.sqrt(np.abs(rad)) * math.sqrt(params.scale)),
            0.0,
        )
    return _as_input_shape(x, vals)


def sample_equilibrium(params: QGaussianParams, seed, count: int) -> np.ndarray:
    """Exact draws x = location + 2 sqrt(scale) cos(pi U) / sqrt(1-q)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    return params.location + 2.0 * math.sqrt(params.scale) * np.cos(math.pi * u) / math.sqrt(
        1.0 - params.q
    )


def _density_derivs_std(q: float, u):
    """Standardized density with first and second derivatives at interior u.

    Differentiates the Chebyshev-U series term by term through the joint
    recurrences for U_n, U_n' and U_n''.  Only valid strictly inside the
    support, where the sqrt factor is smooth.
    """
    u = np.asarray(u, dtype=float)
    s = math.sqrt(1.0 - q) / 2.0
    t = u * s
    if np.any(np.abs(t) >= 1.0 - 1e-10):
        raise ValueError("density derivatives require strictly interior points")
    coeffs = _series_coeffs(q)
    n_terms = len(coeffs)
    val = np.full_like(t, coeffs[0])
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    if n_terms > 1:
        u_pp, u_cc = np.ones_like(t), 2.0 * t
        d_pp, d_cc = np.zeros_like(t), np.full_like(t, 2.0)
        s_pp, s_cc = np.zeros_like(t), np.zeros_like(t)
        deg = 1
        for k in range(2, n_terms + 1):
            while deg < 2 * k - 2:
                u_pp, u_cc = u_cc, 2.0 * t * u_cc - u_pp
                d_pp, d_cc = d_cc, 2.0 * u_pp + 2.0 * t * d_cc - d_pp
                s_pp, s_cc = s_cc, 4.0 * d_pp + 2.0 * t * s_cc - s_pp
                deg += 1
            val += coeffs[k - 1] * u_cc
            d1 += coeffs[k - 1] * d_cc
            d2 += coeffs[k - 1] * s_cc
    c0 = math.sqrt(1.0 - q) / math.pi
    root = np.sqrt(1.0 - t * t)
    g0 = root * val
    g1 = -t / root * val + root * d1
    g2 = (-1.0 / root - t * t / root**3) * val - 2.0 * t / root * d1 + root * d2
    return c0 * g0, c0 * s * g1, c0 * s * s * g2


def _mode_series(q: float) -> float:
    """sum_k (2k+1)^2 q^(k(k+1)/2), summed until terms fall below 1e-16."""
    total = 0.0
    k = 0
    while True:
        term = (2 * k + 1) ** 2 * q ** (k * (k + 1) // 2)
        total += term
        if abs(term) < 1e-16 or k > 500:
            return total
        k += 1


@lru_cache(maxsize=1)
def bimodal_threshold() -> float:
    """Largest root q0 in (-1, 0) of the mode-counting series; ~ -0.1077.

    Densities with q < q0 are bimodal, with q >= q0 unimodal.
    """
    q_hi = -1e-3
    q_lo = q_hi
    step = 1e-3
    while _mode_series(q_lo) > 0.0:
        q_hi = q_lo
        q_lo -= step
        if q_lo <= -1.0:
            raise RuntimeError("no sign change found for the mode series")
    return float(optimize.brentq(_mode_series, q_lo, q_hi, xtol=1e-14))


def mode_count(params: QGaussianParams) -> int:
    """2 for bimodal densities (q below the threshold), else 1."""
    return 2 if params.q < bimodal_threshold() else 1
