"""q-Hermite polynomials, truncation index sets, coefficient-space
q-differentiation and quadrature for the matching q-Gaussian measure.

The polynomials follow the recurrence x H_n = H_{n+1} + [n]_q H_{n-1}
with H_0 = 1, H_1 = x, and are orthogonal under the standardized
q-Gaussian measure with squared norms [n]_q!.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .qgauss import QGaussianParams, _theta_pdf, _x_from_psi, q_bracket, q_factorial

__all__ = [
    "eval_all",
    "norm_squared",
    "eval_multivariate",
    "MultiIndex",
    "IndexSet",
    "build_index_set",
    "QSeries",
    "q_derivative",
    "truncation_rate_bound",
    "quadrature_nodes",
    "integrate_measure",
    "tensor_quadrature",
    "basis_matrix",
]

MultiIndex = tuple[int, ...]


def eval_all(q: float, x, degree: int) -> np.ndarray:
    """Values [H_0(x), ..., H_degree(x)] via the forward recurrence.

    For array x the result has shape (degree+1,) + x.shape.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    out = np.empty((degree + 1,) + x.shape)
    out[0] = 1.0
    if degree >= 1:
        out[1] = x
    for n in range(1, degree):
        out[n + 1] = x * out[n] - q_bracket(n, q) * out[n - 1]
    return out


def norm_squared(q: float, n: int) -> float:
    """Squared L2 norm of H_n under the standardized measure: [n]_q!."""
    return q_factorial(n, q)


def eval_multivariate(q: float, alpha: MultiIndex, x) -> float:
    """Tensor-product value H_a1(x_1) * ... * H_am(x_m)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(x) != len(alpha):
        raise ValueError(f"point has dimension {len(x)}, index has {len(alpha)}")
    out = 1.0
    for ai, xi in zip(alpha, x):
        out *= eval_all(q, xi, ai)[ai]
    return float(out)


@dataclass(frozen=True)
class IndexSet:
    """Deterministically ordered multi-index truncation set.

    Ordering is graded-lexicographic: ascending total degree, ties broken
    by ascending tuple comparison.  This fixes the column order of every
    design matrix and coefficient vector built on the set.
    """

    dimension: int
    degree: int
    kind: str  # "total_degree" | "hyperbolic"
    indices: tuple[MultiIndex, ...]
    hyperbolic_l: float | None = None

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def max_degree(self) -> int:
        return max(sum(a) for a in self.indices)

    def to_json(self) -> str:
        payload = {
            "dimension": self.dimension,
            "degree": self.degree,
            "kind": self.kind,
            "hyperbolic_l": self.hyperbolic_l,
            "indices": [list(a) for a in self.indices],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "IndexSet":
        payload = json.loads(text)
        return cls(
            dimension=payload["dimension"],
            degree=payload["degree"],
            kind=payload["kind"],
            indices=tuple(tuple(a) for a in payload["indices"]),
            hyperbolic_l=payload["hyperbolic_l"],
        )


def build_index_set(dimension: int, degree: int, kind: str = "total_degree",
                    hyperbolic_l: float | None = None) -> IndexSet:
    """All alpha with ||alpha||_1 <= degree, optionally filtered by the
    hyperbolic quasinorm (sum alpha_i^l)^(1/l) <= degree for 0 < l < 1."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if kind not in ("total_degree", "hyperbolic"):
        raise ValueError(f"unknown index-set kind {kind!r}")
    if kind == "hyperbolic":
        if hyperbolic_l is None or not 0.0 < hyperbolic_l < 1.0:
            raise ValueError("hyperbolic truncation needs 0 < l < 1")
    members = []
    for alpha in itertools.product(range(degree + 1), repeat=dimension):
        if sum(alpha) > degree:
            continue
        if kind == "hyperbolic":
            quasi = sum(a**hyperbolic_l for a in alpha) ** (1.0 / hyperbolic_l)
            if quasi > degree * (1.0 + 1e-12):
                continue
        members.append(alpha)
    members.sort(key=lambda a: (sum(a), a))
    return IndexSet(dimension=dimension, degree=degree, kind=kind,
                    indices=tuple(members), hyperbolic_l=hyperbolic_l)


@dataclass(frozen=True)
class QSeries:
    """Finitely supported expansion sum_n coeffs[n] H_n in the H_n basis."""

    q: float
    coeffs: dict[int, float] = field(default_factory=dict)

    def degree(self) -> int:
        nonzero = [n for n, a in self.coeffs.items() if a != 0.0]
        return max(nonzero) if nonzero else 0

    def norm_squared(self) -> float:
        """Parseval value sum_n [n]_q! coeffs[n]^2."""
        return sum(q_factorial(n, self.q) * a * a for n, a in self.coeffs.items())

    def evaluate(self, x):
        vals = eval_all(self.q, x, self.degree())
        out = np.zeros_like(np.asarray(x, dtype=float))
        for n, a in self.coeffs.items():
            out = out + a * vals[n]
        return out


def q_derivative(series: QSeries, order: int = 1) -> QSeries:
    """Coefficient-space q-derivative of the given order.

    H_n maps to prod_{l=1..k} |q|^{-(n-l)/2} [n-l+1]_q H_{n-k}; degrees
    below the order vanish.  Powers of |q| are used so the map stays real
    for negative q, matching the magnitude form of the tail bounds.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    q = series.q
    if q == 0.0:
        raise ValueError("the q-derivative is undefined at q = 0")
    new: dict[int, float] = {}
    for n, a in series.coeffs.items():
        if n < order:
            continue
        fac = 1.0
        for l in range(1, order + 1):
            fac *= abs(q) ** (-(n - l) / 2.0) * q_bracket(n - l + 1, q)
        new[n - order] = new.get(n - order, 0.0) + a * fac
    return QSeries(q=q, coeffs=new)


def truncation_rate_bound(q: float, degree: int, order: int, dq_norm_sq: float) -> float:
    """Tail-norm bound |q|^((2N-1-k)k/2) / prod_l [N-l+2]_q * ||D^k f||^2."""
    if not 0.0 < abs(q) < 1.0:
        raise ValueError("need 0 < |q| < 1")
    if order < 1:
        raise ValueError("order must be >= 1")
    if degree < order - 1:
        raise ValueError("need degree >= order - 1")
    denom = 1.0
    for l in range(1, order + 1):
        denom *= q_bracket(degree - l + 2, q)
    return abs(q) ** ((2 * degree - 1 - order) * order / 2.0) / denom * dq_norm_sq


def quadrature_nodes(params: QGaussianParams, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with sum_i w_i g(x_i) ~ integral of g d(mu_q).

    Uses the angle substitution x = location - 2 sqrt(scale) cos(psi)/sqrt(1-q)
    and an equispaced trapezoid rule in psi; the transformed integrand of any
    polynomial extends to a smooth even periodic function, so the rule
    converges spectrally and is exact (to ~1e-12) once count exceeds the
    polynomial degree plus the series cutoff.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    psi = np.arange(1, count + 1) * math.pi / (count + 1)
    nodes = _x_from_psi(params, psi)
    weights = _theta_pdf(params.q, psi) * math.pi / (count + 1)
    return nodes, weights


def integrate_measure(fn, params: QGaussianParams, max_degree: int = 0,
                      tol: float = 1e-11, max_doublings: int = 8) -> float:
    """Integral of fn against mu_q, doubling 64*(max_degree+1) nodes until
    two successive results agree to tol."""
    count = 64 * (max_degree + 1)
    nodes, weights = quadrature_nodes(params, count)
    prev = float(np.dot(weights, fn(nodes)))
    for _ in range(max_doublings):
        count *= 2
        nodes, weights = quadrature_nodes(params, count)
        cur = float(np.dot(weights, fn(nodes)))
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    return prev


def tensor_quadrature(priors: list[QGaussianParams], count: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product rule over independent per-dimension priors.

    Returns points of shape (count^m, m) and the matching weight vector.
    """
    rules = [quadrature_nodes(p, count) for p in priors]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    weights = np.ones(points.shape[0])
    for w in wgrids:
        weights = weights * w.ravel()
    return points, weights


def basis_matrix(q: float, index_set: IndexSet, points: np.ndarray) -> np.ndarray:
    """Design matrix with entries H_alpha(points[j]) of shape (n, |set|).

    Points are taken in the standardized coordinates of the polynomials.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != index_set.dimension:
        raise ValueError(
            f"points have dimension {points.shape[1]}, index set has {index_set.dimension}")
    max_deg = index_set.max_degree()
    alphas = np.asarray(index_set.indices, dtype=int)
    out = np.ones((points.shape[0], len(index_set)))
    for i in range(index_set.dimension):
        per_dim = eval_all(q, points[:, i], max_deg)  # (max_deg+1, n)
        out *= per_dim[alphas[:, i]].T
    return out
