"""Posterior assembly over q-Gaussian priors (exact, surrogate and
truncated-prior likelihood variants), potential/penalty diagnostics and a
seeded Metropolis-Hastings sampler.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as slinalg

from . import qgauss, sle
from .qgauss import QGaussianParams
from .qhermite import tensor_quadrature

__all__ = [
    "GaussianNoiseModel",
    "ExactLikelihood",
    "SleLikelihood",
    "PosteriorSpec",
    "log_likelihood_exact",
    "potential_and_penalty",
    "penalty_hessian_diag",
    "log_posterior_unnormalized",
    "log_posterior_batch",
    "normalization_constant",
    "RandomWalkProposal",
    "IndependenceProposal",
    "Chain",
    "mh_sample",
    "tune_random_walk_step",
]


class GaussianNoiseModel:
    """Centered Gaussian observation noise with covariance delta^2 I or a
    full SPD matrix; the factorization is cached at construction."""

    def __init__(self, dimension: int, delta: float | None = None,
                 covariance=None):
        if (delta is None) == (covariance is None):
            raise ValueError("provide exactly one of delta or covariance")
        self.dimension = int(dimension)
        self.delta = None
        self._chol = None
        if delta is not None:
            if delta <= 0:
                raise ValueError("delta must be positive")
            self.delta = float(delta)
            self.log_det = self.dimension * 2.0 * math.log(self.delta)
        else:
            cov = np.asarray(covariance, dtype=float)
            if cov.shape != (self.dimension, self.dimension):
                raise ValueError("covariance shape mismatch")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError("covariance must be symmetric")
            try:
                self._chol = slinalg.cho_factor(cov, lower=True)
            except slinalg.LinAlgError as exc:
                raise ValueError("covariance must be positive definite") from exc
            self.covariance = cov
            self.log_det = 2.0 * float(np.sum(np.log(np.diag(self._chol[0]))))

    def mahalanobis_sq(self, residual) -> np.ndarray:
        """||Gamma^{-1/2} r||^2, batched over the leading axis."""
        r = np.atleast_2d(np.asarray(residual, dtype=float))
        if self.delta is not None:
            out = np.sum(r * r, axis=-1) / self.delta**2
        else:
            solved = slinalg.cho_solve(self._chol, r.T)
            out = np.sum(r.T * solved, axis=0)
        return out if np.asarray(residual).ndim > 1 else float(out[0])

    def describe(self) -> dict:
        if self.delta is not None:
            return {"kind": "iso", "n": self.dimension, "delta": self.delta}
        return {"kind": "full", "n": self.dimension,
                "covariance": self.covariance.tolist()}


def log_likelihood_exact(forward_map, noise: GaussianNoiseModel, data, x) -> float:
    """log of the Gaussian likelihood: -n/2 log(2 pi) - 1/2 log det Gamma
    - 1/2 ||phi(x) - y||_Gamma^2."""
    data = np.asarray(data, dtype=float)
    pred = np.asarray(forward_map(x), dtype=float)
    quad = noise.mahalanobis_sq(pred - data)
    return float(-0.5 * noise.dimension * math.log(2.0 * math.pi)
                 - 0.5 * noise.log_det - 0.5 * quad)


@dataclass(frozen=True)
class ExactLikelihood:
    forward_map: object
    noise: GaussianNoiseModel
    data: np.ndarray

    def describe(self) -> dict:
        name = getattr(self.forward_map, "name", None) or getattr(
            self.forward_map, "__qualname__", type(self.forward_map).__qualname__)
        return {"type": "exact", "forward_map": name,
                "noise": self.noise.describe(),
                "data": [float(v) for v in np.atleast_1d(self.data)]}


@dataclass(frozen=True)
class SleLikelihood:
    model: sle.SleModel

    def describe(self) -> dict:
        return {"type": "sle", "degree": self.model.index_set.degree,
                "kind": self.model.index_set.kind,
                "coeff_digest": hashlib.sha256(
                    np.ascontiguousarray(self.model.coeffs).tobytes()).hexdigest()}


@dataclass(frozen=True)
class PosteriorSpec:
    """Unnormalized posterior: independent q-Gaussian prior components times
    an exact or surrogate likelihood.

    ``prior_truncation`` swaps each prior density for its clamped partial
    sum with the given number of series terms; it composes freely with
    either likelihood so all four measure variants are expressible.
    Surrogate values below ``clamp_floor`` are clamped before the log.
    """

    priors: tuple[QGaussianParams, ...]
    likelihood: ExactLikelihood | SleLikelihood
    prior_truncation: int | None = None
    clamp_floor: float = 0.0

    def __post_init__(self):
        if not self.priors:
            raise ValueError("at least one prior dimension is required")
        if self.clamp_floor < 0:
            raise ValueError("clamp_floor must be >= 0")
        if self.prior_truncation is not None and self.prior_truncation < 2:
            raise ValueError("prior truncation needs at least 2 terms")

    @classmethod
    def exact(cls, priors, forward_map, noise, data, **kw) -> "PosteriorSpec":
        return cls(priors=tuple(priors),
                   likelihood=ExactLikelihood(forward_map, noise,
                                              np.asarray(data, dtype=float)), **kw)

    @classmethod
    def sle(cls, priors, model, **kw) -> "PosteriorSpec":
        return cls(priors=tuple(priors), likelihood=SleLikelihood(model), **kw)

    @classmethod
    def exact_with_truncated_prior(cls, priors, forward_map, noise, data,
                                   terms: int, **kw) -> "PosteriorSpec":
        return cls(priors=tuple(priors),
                   likelihood=ExactLikelihood(forward_map, noise,
                                              np.asarray(data, dtype=float)),
                   prior_truncation=terms, **kw)

    @property
    def dimension(self) -> int:
        return len(self.priors)

    def support_box(self) -> list[tuple[float, float]]:
        return [p.support() for p in self.priors]

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return all(lo <= xi <= hi for xi, (lo, hi) in zip(x, self.support_box()))

    def describe(self) -> dict:
        return {
            "priors": [{"q": p.q, "location": p.location, "scale": p.scale}
                       for p in self.priors],
            "likelihood": self.likelihood.describe(),
            "prior_truncation": self.prior_truncation,
            "clamp_floor": self.clamp_floor,
        }

    def spec_hash(self) -> str:
        text = json.dumps(self.describe(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _log_prior_batch(spec: PosteriorSpec, points: np.ndarray) -> np.ndarray:
    """Sum of per-dimension log prior densities; -inf outside the support."""
    points = np.atleast_2d(points)
    out = np.zeros(points.shape[0])
    for i, p in enumerate(spec.priors):
        u = p.standardize(points[:, i])
        if spec.prior_truncation is None:
            vals = qgauss._density_std(p.q, u)
        else:
            vals = np.maximum(
                qgauss._density_std(p.q, u, n_terms=spec.prior_truncation - 1), 0.0)
        with np.errstate(divide="ignore"):
            out += np.where(vals > 0.0, np.log(np.maximum(vals, 1e-300)), -np.inf)
        out -= 0.5 * math.log(p.scale)
    return out


def _log_likelihood_batch(spec: PosteriorSpec, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    like = spec.likelihood
    if isinstance(like, SleLikelihood):
        vals = np.maximum(sle.evaluate(like.model, points), spec.clamp_floor)
        with np.errstate(divide="ignore"):
            return np.where(vals > 0.0, np.log(np.maximum(vals, 1e-300)), -np.inf)
    try:
        pred = np.asarray(like.forward_map(points), dtype=float)
        if pred.shape[0] != points.shape[0]:
            raise ValueError
    except Exception:
        pred = np.stack([np.asarray(like.forward_map(pt), dtype=float)
                         for pt in points])
    quad = like.noise.mahalanobis_sq(pred - like.data)
    return (-0.5 * like.noise.dimension * math.log(2.0 * math.pi)
            - 0.5 * like.noise.log_det - 0.5 * np.atleast_1d(quad))


def log_posterior_unnormalized(spec: PosteriorSpec, x) -> float:
    """Log of likelihood times prior density at one point; -inf flags a
    zero-density point (outside support or clamped surrogate)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not spec.contains(x):
        return -math.inf
    lp = float(_log_prior_batch(spec, x[None, :])[0])
    if not np.isfinite(lp):
        return -math.inf
    ll = float(_log_likelihood_batch(spec, x[None, :])[0])
    return lp + ll


def log_posterior_batch(spec: PosteriorSpec, points: np.ndarray) -> np.ndarray:
    """Vectorized log posterior over rows of ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    box = spec.support_box()
    inside = np.ones(points.shape[0], dtype=bool)
    for i, (lo, hi) in enumerate(box):
        inside &= (points[:, i] >= lo) & (points[:, i] <= hi)
    out = np.full(points.shape[0], -np.inf)
    if np.any(inside):
        sub = points[inside]
        out[inside] = _log_prior_batch(spec, sub) + _log_likelihood_batch(spec, sub)
    return out


def potential_and_penalty(spec: PosteriorSpec, x) -> tuple[float, float]:
    """Misfit 1/2 ||phi(x) - y||_Gamma^2 and penalty
    -sum_i log f((x_i - loc_i)/sqrt(scale_i)).

    The penalty saturates to +inf at or outside the support boundary, which
    doubles as the out-of-domain flag.  Requires an exact likelihood.
    """
    if not isinstance(spec.likelihood, ExactLikelihood):
        raise ValueError("the potential is defined through the exact forward map")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    like = spec.likelihood
    pred = np.asarray(like.forward_map(x), dtype=float)
    psi = 0.5 * float(like.noise.mahalanobis_sq(pred - like.data))
    penalty = 0.0
    for i, p in enumerate(spec.priors):
        val = float(qgauss._density_std(p.q, float(p.standardize(x[i]))))
        penalty += -math.log(val) if val > 0.0 else math.inf
    return psi, penalty


def penalty_hessian_diag(spec: PosteriorSpec, x) -> np.ndarray:
    """Per-component second derivative of the penalty at a strictly interior
    point: ((f')^2 - f'' f) / f^2 in standardized coordinates, scaled by
    1/scale_i from the chain rule."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(len(spec.priors))
    for i, p in enumerate(spec.priors):
        u = float(p.standardize(x[i]))
        f, f1, f2 = qgauss._density_derivs_std(p.q, u)
        out[i] = (f1 * f1 - f2 * f) / (f * f) / p.scale
    return out


def _draw_prior(spec: PosteriorSpec, rng, count: int) -> np.ndarray:
    u = rng.random((count, spec.dimension))
    cols = []
    for i, p in enumerate(spec.priors):
        psi = qgauss._cdf_table(p.q).invert(u[:, i])
        cols.append(qgauss._x_from_psi(p, psi))
    return np.stack(cols, axis=-1)


def _likelihood_times_ratio(spec: PosteriorSpec, points: np.ndarray) -> np.ndarray:
    """Likelihood value times the truncated/exact prior density ratio,
    the integrand whose prior-measure average is the normalizer."""
    vals = np.exp(_log_likelihood_batch(spec, points))
    if spec.prior_truncation is not None:
        for i, p in enumerate(spec.priors):
            u = p.standardize(points[:, i])
            f = qgauss._density_std(p.q, u)
            fj = np.maximum(
                qgauss._density_std(p.q, u, n_terms=spec.prior_truncation - 1), 0.0)
            ratio = np.where(f > 0.0, fj / np.maximum(f, 1e-300), 0.0)
            vals = vals * ratio
    return vals


def normalization_constant(spec: PosteriorSpec, method: str = "quadrature",
                           mc_count: int = 10**6, seed=0,
                           nodes_per_dim: int = 512) -> tuple[float, float]:
    """Prior-measure average of the likelihood term, gamma, with an error
    estimate (quadrature refinement gap, or Monte Carlo standard error)."""
    if method == "quadrature":
        if spec.dimension > 3:
            raise ValueError("tensor quadrature supports m <= 3")
        vals = []
        for count in (nodes_per_dim, 2 * nodes_per_dim):
            points, weights = tensor_quadrature(list(spec.priors), count)
            vals.append(float(np.dot(weights, _likelihood_times_ratio(spec, points))))
        return vals[1], abs(vals[1] - vals[0])
    if method == "monte_carlo":
        rng = np.random.default_rng(seed)
        draws = _draw_prior(spec, rng, mc_count)
        vals = _likelihood_times_ratio(spec, draws)
        mean = float(np.mean(vals))
        stderr = float(np.std(vals, ddof=1) / math.sqrt(mc_count))
        return mean, stderr
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class RandomWalkProposal:
    """Componentwise Gaussian random walk; symmetric, so the proposal
    density cancels in the acceptance ratio."""

    step: float | tuple[float, ...]

    def propose(self, rng, x: np.ndarray) -> np.ndarray:
        return x + np.asarray(self.step) * rng.standard_normal(x.shape)

    def log_density_gap(self, current, proposed) -> float:
        return 0.0

    def describe(self) -> dict:
        step = self.step if np.isscalar(self.step) else list(self.step)
        return {"type": "random_walk", "step": step}


@dataclass(frozen=True)
class IndependenceProposal:
    """Independence sampler drawing from per-dimension q-Gaussians or from
    the arcsine equilibrium measure on the same supports."""

    dists: tuple[QGaussianParams, ...]
    kind: str = "prior"  # "prior" | "equilibrium"

    def __post_init__(self):
        if self.kind not in ("prior", "equilibrium"):
            raise ValueError(f"unknown independence proposal kind {self.kind!r}")

    def propose(self, rng, x: np.ndarray) -> np.ndarray:
        u = rng.random(len(self.dists))
        out = np.empty(len(self.dists))
        for i, p in enumerate(self.dists):
            if self.kind == "prior":
                psi = qgauss._cdf_table(p.q).invert(np.array([u[i]]))[0]
                out[i] = float(qgauss._x_from_psi(p, psi))
            else:
                out[i] = p.location + 2.0 * math.sqrt(p.scale) * math.cos(
                    math.pi * u[i]) / math.sqrt(1.0 - p.q)
        return out

    def _log_density(self, x: np.ndarray) -> float:
        total = 0.0
        for i, p in enumerate(self.dists):
            dens = qgauss.density(p, x[i]) if self.kind == "prior" else \
                qgauss.equilibrium_density(p, x[i])
            if dens <= 0.0:
                return -math.inf
            total += math.log(dens)
        return total

    def log_density_gap(self, current, proposed) -> float:
        """log q(current | proposed) - log q(proposed | current)."""
        return self._log_density(current) - self._log_density(proposed)

    def describe(self) -> dict:
        return {"type": f"independence_{self.kind}",
                "dists": [{"q": p.q, "location": p.location, "scale": p.scale}
                          for p in self.dists]}


@dataclass
class Chain:
    """Post-burn-in MCMC output with acceptance bookkeeping."""

    samples: np.ndarray
    log_posts: np.ndarray
    accepted: np.ndarray
    acceptance_rate: float
    seed: object
    proposal: dict
    spec_hash: str
    burn_in: int = 0
    extra: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        m = self.samples.shape[1]
        header = "step," + ",".join(f"x{i+1}" for i in range(m)) + ",log_post,accepted"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for step in range(self.samples.shape[0]):
                coords = ",".join(repr(float(v)) for v in self.samples[step])
                fh.write(f"{step},{coords},{self.log_posts[step]!r},"
                         f"{int(self.accepted[step])}\n")

    def summary(self) -> dict:
        return {
            "acceptance_rate": self.acceptance_rate,
            "means": [float(v) for v in self.samples.mean(axis=0)],
            "variances": [float(v) for v in self.samples.var(axis=0, ddof=1)],
            "seed": self.seed,
            "steps": int(self.samples.shape[0]),
            "burn_in": self.burn_in,
            "proposal": self.proposal,
            "spec_hash": self.spec_hash,
        }


def mh_sample(spec: PosteriorSpec, proposal, steps: int, burn_in: int = 0,
              seed=0, initial=None) -> Chain:
    """Metropolis-Hastings chain on the unnormalized log posterior.

    A proposal is accepted when min{1, q(x|x^)pi(x^) / (q(x^|x)pi(x))}
    exceeds a fresh uniform draw; proposals outside the support have zero
    target density and are always rejected.  Fixed seeds give identical
    chains.
    """
    if not steps > burn_in >= 0:
        raise ValueError("need steps > burn_in >= 0")
    rng = np.random.default_rng(seed)
    if initial is None:
        x = np.array([p.location for p in spec.priors], dtype=float)
    else:
        x = np.atleast_1d(np.asarray(initial, dtype=float)).copy()
    log_post = log_posterior_unnormalized(spec, x)
    if not np.isfinite(log_post):
        raise ValueError("initial state has zero posterior density")

    dim = spec.dimension
    samples = np.empty((steps - burn_in, dim))
    log_posts = np.empty(steps - burn_in)
    accept_flags = np.zeros(steps - burn_in, dtype=bool)
    n_accept = 0
    for i in range(steps):
        cand = proposal.propose(rng, x)
        cand_log_post = log_posterior_unnormalized(spec, cand)
        if np.isfinite(cand_log_post):
            log_alpha = min(0.0, cand_log_post - log_post
                            + proposal.log_density_gap(x, cand))
            alpha = math.exp(log_alpha)
        else:
            alpha = 0.0
        u = rng.random()
        took = alpha > u
        if took:
            x = cand
            log_post = cand_log_post
            n_accept += 1
        if i >= burn_in:
            j = i - burn_in
            samples[j] = x
            log_posts[j] = log_post
            accept_flags[j] = took
    return Chain(samples=samples, log_posts=log_posts, accepted=accept_flags,
                 acceptance_rate=n_accept / steps, seed=seed,
                 proposal=proposal.describe(), spec_hash=spec.spec_hash(),
                 burn_in=burn_in)


def tune_random_walk_step(spec: PosteriorSpec, step: float, seed=0,
                          initial=None, target=(0.2, 0.4), probe_steps: int = 300,
                          rounds: int = 12) -> float:
    """Multiplicative pilot tuning of the random-walk step toward the target
    acceptance band; the returned step is then used for a fixed kernel."""
    lo, hi = target
    for r in range(rounds):
        chain = mh_sample(spec, RandomWalkProposal(step=step), steps=probe_steps,
                          burn_in=0, seed=(seed, r), initial=initial)
        rate = chain.acceptance_rate
        if rate < lo:
            step *= 0.6
        elif rate > hi:
            step *= 1.6
        else:
            return step
        initial = chain.samples[-1]
    return step
