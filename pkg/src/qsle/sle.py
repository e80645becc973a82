"""Spectral expansion of a scalar target over a q-Hermite basis:
quadrature projection, weighted least-squares fitting with design points
from the arcsine equilibrium measure, and surrogate evaluation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import qgauss
from .qgauss import QGaussianParams
from .qhermite import IndexSet, basis_matrix, q_factorial, tensor_quadrature

__all__ = [
    "SCHEMES",
    "FitReport",
    "SleModel",
    "IllConditionedError",
    "project_coefficients",
    "cls_fit",
    "evaluate",
]

SCHEMES = ("christoffel", "equilibrium_ratio", "unweighted")

CONDITION_LIMIT = 1e12

_TENSOR_NODES_DEFAULT = {1: 4096, 2: 512, 3: 128}


class IllConditionedError(RuntimeError):
    """Raised when the weighted design matrix is numerically rank deficient."""


@dataclass(frozen=True)
class FitReport:
    sample_count: int
    scheme: str
    residual_norm: float
    condition_estimate: float


@dataclass(frozen=True)
class SleModel:
    """Fitted coefficient vector over an index set, with per-dimension priors.

    Basis polynomials take the standardized coordinates
    (x_i - location_i)/sqrt(scale_i); ``evaluate`` handles the mapping.
    """

    index_set: IndexSet
    priors: tuple[QGaussianParams, ...]
    coeffs: np.ndarray
    fit_report: FitReport

    def __post_init__(self):
        if len(self.priors) != self.index_set.dimension:
            raise ValueError("one prior per dimension is required")
        qs = {p.q for p in self.priors}
        if len(qs) > 1:
            raise ValueError("all dimensions must share the same q")
        if len(self.coeffs) != len(self.index_set):
            raise ValueError("coefficient count must match the index set")

    @property
    def q(self) -> float:
        return self.priors[0].q

    def standardize(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        locs = np.array([p.location for p in self.priors])
        scales = np.sqrt([p.scale for p in self.priors])
        return (points - locs) / scales

    def coefficient_energy(self, weighted: bool = True) -> float:
        """sum_a coeff^2 with (weighted=True) or without the [alpha]_q! norms."""
        if not weighted:
            return float(np.dot(self.coeffs, self.coeffs))
        norms = np.array([
            math.prod(q_factorial(ai, self.q) for ai in alpha) for alpha in self.index_set
        ])
        return float(np.dot(norms, self.coeffs**2))

    def to_json(self) -> str:
        return json.dumps({
            "q": self.q,
            "priors": [{"q": p.q, "location": p.location, "scale": p.scale}
                       for p in self.priors],
            "index_set": json.loads(self.index_set.to_json()),
            "coeffs": list(map(float, self.coeffs)),
            "fit_report": asdict(self.fit_report),
        })

    @classmethod
    def from_json(cls, text: str) -> "SleModel":
        payload = json.loads(text)
        index_set = IndexSet.from_json(json.dumps(payload["index_set"]))
        priors = tuple(QGaussianParams(**p) for p in payload["priors"])
        return cls(index_set=index_set, priors=priors,
                   coeffs=np.asarray(payload["coeffs"], dtype=float),
                   fit_report=FitReport(**payload["fit_report"]))


def evaluate(model: SleModel, x):
    """Surrogate value sum_alpha a_alpha H_alpha(u(x)); may be negative.

    Accepts a single point of shape (m,) or a batch of shape (n, m).
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    pts = np.atleast_2d(arr)
    if pts.shape[1] != model.index_set.dimension:
        raise ValueError(
            f"point dimension {pts.shape[1]} != model dimension {model.index_set.dimension}")
    design = basis_matrix(model.q, model.index_set, model.standardize(pts))
    vals = design @ model.coeffs
    return float(vals[0]) if single else vals


def project_coefficients(target, index_set: IndexSet, priors,
                         nodes_per_dim: int | None = None) -> np.ndarray:
    """Quadrature approximation of the orthogonal-projection coefficients
    (target, H_alpha) / prod_i [alpha_i]_q!.

    Serves as the sampling-free reference for the least-squares fits.
    Tensor quadrature restricts the dimension to m <= 3.
    """
    priors = tuple(priors)
    m = index_set.dimension
    if m != len(priors):
        raise ValueError("one prior per dimension is required")
    if m > 3:
        raise ValueError(f"tensor quadrature supports m <= 3, got m = {m}")
    if nodes_per_dim is None:
        nodes_per_dim = _TENSOR_NODES_DEFAULT[m]
    points, weights = tensor_quadrature(list(priors), nodes_per_dim)
    q = priors[0].q
    locs = np.array([p.location for p in priors])
    scales = np.sqrt([p.scale for p in priors])
    design = basis_matrix(q, index_set, (points - locs) / scales)
    vals = np.asarray(target(points), dtype=float)
    norms = np.array([
        math.prod(q_factorial(ai, q) for ai in alpha) for alpha in index_set
    ])
    return (design.T @ (weights * vals)) / norms


def _draw_design(priors, scheme: str, count: int, rng) -> np.ndarray:
    """Design points: arcsine equilibrium draws for the weighted schemes,
    prior draws for the unweighted one."""
    u = rng.random((count, len(priors)))
    cols = []
    for i, p in enumerate(priors):
        if scheme == "unweighted":
            psi = qgauss._cdf_table(p.q).invert(u[:, i])
            cols.append(qgauss._x_from_psi(p, psi))
        else:
            cols.append(p.location + 2.0 * math.sqrt(p.scale)
                        * np.cos(math.pi * u[:, i]) / math.sqrt(1.0 - p.q))
    return np.stack(cols, axis=-1)


def _weights(scheme: str, priors, points: np.ndarray, design: np.ndarray) -> np.ndarray:
    if scheme == "unweighted":
        return np.ones(points.shape[0])
    if scheme == "equilibrium_ratio":
        k = np.ones(points.shape[0])
        for i, p in enumerate(priors):
            k *= qgauss.density(p, points[:, i]) / qgauss.equilibrium_density(p, points[:, i])
        return k
    if scheme == "christoffel":
        return design.shape[1] / np.sum(design**2, axis=1)
    raise ValueError(f"unknown weighting scheme {scheme!r}")


def cls_fit(target, index_set: IndexSet, priors, scheme: str = "christoffel",
            sample_count: int | None = None, oversampling: float = 4.0,
            seed=0, normal_equations: bool = False) -> SleModel:
    """Weighted least-squares fit of the target over the index set.

    Draws the design from the equilibrium measure (or the prior for the
    unweighted scheme), forms A[j, alpha] = H_alpha(u_j) and solves
    min ||sqrt(K)(A a - b)|| through an orthogonal factorization of the
    weighted design.  A normal-equations path is kept behind a flag for
    fidelity comparisons only.
    """
    priors = tuple(priors)
    if scheme not in SCHEMES:
        raise ValueError(f"unknown weighting scheme {scheme!r}")
    basis_size = len(index_set)
    count = int(sample_count) if sample_count is not None else math.ceil(
        oversampling * basis_size)
    if count < basis_size:
        raise ValueError(
            f"sample count {count} must be at least the basis size {basis_size}")
    rng = np.random.default_rng(seed)
    points = _draw_design(priors, scheme, count, rng)
    locs = np.array([p.location for p in priors])
    scales = np.sqrt([p.scale for p in priors])
    design = basis_matrix(priors[0].q, index_set, (points - locs) / scales)
    kappa = _weights(scheme, priors, points, design)
    b = np.asarray(target(points), dtype=float)

    sqrt_k = np.sqrt(kappa)
    # solve in the column-normalized (orthonormal) basis: equivalent in exact
    # arithmetic, and the norms [n]_q! otherwise skew the column scales
    col_scale = np.sqrt([
        math.prod(q_factorial(ai, priors[0].q) for ai in alpha)
        for alpha in index_set
    ])
    weighted_a = (sqrt_k[:, None] * design) / col_scale
    weighted_b = sqrt_k * b
    scaled, _, _, singulars = np.linalg.lstsq(weighted_a, weighted_b, rcond=None)
    cond = float(singulars[0] / singulars[-1]) if singulars[-1] > 0 else math.inf
    if cond > CONDITION_LIMIT:
        raise IllConditionedError(
            f"design matrix condition {cond:.3e} exceeds {CONDITION_LIMIT:.0e} "
            f"(degree N={index_set.degree}, samples J={count})")
    if normal_equations:
        gram = weighted_a.T @ weighted_a
        scaled = np.linalg.solve(gram, weighted_a.T @ weighted_b)
    coeffs = scaled / col_scale
    residual = float(np.linalg.norm(weighted_a @ scaled - weighted_b))
    report = FitReport(sample_count=count, scheme=scheme,
                       residual_norm=residual, condition_estimate=cond)
    return SleModel(index_set=index_set, priors=priors, coeffs=coeffs,
                    fit_report=report)
