import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsle import qgauss
from qsle.metrics import (DensityGrid, hellinger, kl_divergence,
                          posterior_relative_error, tv_distance)
from qsle.qgauss import QGaussianParams


def grid_of(params, fn, n=2000):
    return DensityGrid.on_support(params, fn, n=n)


def two_qgauss_grids(n=2000):
    """p narrower than r so p << r holds on p's support."""
    p_params = QGaussianParams(q=0.3, location=0.0, scale=1.0)
    r_params = QGaussianParams(q=0.3, location=0.1, scale=1.21)
    p = grid_of(p_params, lambda x: qgauss.density(p_params, x), n)
    r = p.with_values(qgauss.density(r_params, p.nodes))
    return p_params, p, r


class TestDensityGrid:
    def test_prior_mass_is_one(self):
        params = QGaussianParams(q=-0.4, location=1.0, scale=2.0)
        g = grid_of(params, lambda x: qgauss.density(params, x))
        assert g.integral() == pytest.approx(1.0, abs=1e-8)

    def test_validation(self):
        with pytest.raises(ValueError):
            DensityGrid(np.array([0.0, 0.0, 1.0]), np.zeros(3), np.ones(3))
        with pytest.raises(ValueError):
            DensityGrid(np.array([0.0, 1.0]), np.array([1.0, -1.0]),
                        np.ones(2))
        with pytest.raises(ValueError):
            DensityGrid(np.array([0.0, 1.0]), np.zeros(3), np.ones(2))

    def test_normalized(self):
        params = QGaussianParams(q=0.2)
        g = grid_of(params, lambda x: 3.0 * qgauss.density(params, x))
        assert g.normalized().integral() == pytest.approx(1.0, rel=1e-12)


class TestKl:
    def test_identical_is_zero(self):
        _, p, _ = two_qgauss_grids()
        assert kl_divergence(p, p) == 0.0

    def test_absolute_continuity_flag(self):
        _, p, r = two_qgauss_grids()
        broken = r.with_values(np.where(np.abs(r.nodes) < 0.2, 0.0, r.values))
        assert kl_divergence(p, broken) == math.inf

    def test_monte_carlo_oracle(self):
        p_params, p, r = two_qgauss_grids()
        r_params = QGaussianParams(q=0.3, location=0.1, scale=1.21)
        kl_grid = kl_divergence(p, r)
        draws = qgauss.sample(p_params, 123, 1_000_000)
        logs = np.log(qgauss.density(p_params, draws)
                      / qgauss.density(r_params, draws))
        se = logs.std(ddof=1) / math.sqrt(len(draws))
        assert abs(kl_grid - logs.mean()) <= 3.0 * se

    def test_asymmetry(self):
        _, p, r = two_qgauss_grids()
        forward = kl_divergence(p, r)
        reverse = kl_divergence(r, p)
        assert forward != reverse
        # regression pins from the first run of this implementation
        assert forward == pytest.approx(0.02382937472966154, rel=1e-9)
        assert reverse == pytest.approx(0.004560241909084513, rel=1e-9)

    def test_grid_mismatch(self):
        _, p, _ = two_qgauss_grids()
        other = grid_of(QGaussianParams(q=0.5),
                        lambda x: qgauss.density(QGaussianParams(q=0.5), x))
        with pytest.raises(ValueError):
            kl_divergence(p, other)


class TestTvHellinger:
    def test_identical(self):
        _, p, _ = two_qgauss_grids()
        assert tv_distance(p, p) == 0.0
        assert hellinger(p, p) == 0.0

    def test_disjoint_supports(self):
        nodes = np.linspace(-1.0, 1.0, 1001)
        w = np.full_like(nodes, 2.0 / 1001)
        left = np.where(nodes < -0.1, 1.0, 0.0)
        right = np.where(nodes > 0.1, 1.0, 0.0)
        p = DensityGrid(nodes, left / np.dot(w, left), w)
        r = DensityGrid(nodes, right / np.dot(w, right), w)
        assert tv_distance(p, r) == pytest.approx(1.0, abs=1e-12)
        assert hellinger(p, r) == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_inequality_suite(self, seed):
        # randomized positive density pairs on a shared grid
        rng = np.random.default_rng(seed)
        params = QGaussianParams(q=0.2)
        base = grid_of(params, lambda x: qgauss.density(params, x), n=400)
        bump = lambda c, s: np.exp(-(base.nodes - c) ** 2 / (2 * s * s))
        pv = 0.05 + bump(rng.uniform(-1, 1), rng.uniform(0.3, 1.0))
        rv = 0.05 + bump(rng.uniform(-1, 1), rng.uniform(0.3, 1.0))
        p = base.with_values(pv).normalized()
        r = base.with_values(rv).normalized()
        kl = kl_divergence(p, r)
        assert tv_distance(p, r) <= math.sqrt(max(kl, 0.0)) + 1e-12
        assert hellinger(p, r) ** 2 <= 0.5 * kl + 1e-12


class TestRelativeError:
    def test_zero_for_identical(self):
        _, p, _ = two_qgauss_grids()
        assert posterior_relative_error(p, p) == 0.0

    def test_homogeneity(self):
        _, p, _ = two_qgauss_grids()
        perturbed = p.with_values(1.01 * p.values)
        assert posterior_relative_error(p, perturbed) == pytest.approx(
            0.01, abs=1e-12)

    def test_zero_norm_rejected(self):
        _, p, _ = two_qgauss_grids()
        zero = p.with_values(np.zeros_like(p.values))
        with pytest.raises(ValueError):
            posterior_relative_error(zero, p)


class TestRefinementStability:
    def test_doubling_grid_changes_little(self):
        p_params = QGaussianParams(q=0.3, location=0.0, scale=1.0)
        r_params = QGaussianParams(q=0.3, location=0.1, scale=1.21)
        out = {}
        for n in (2000, 4000):
            p = grid_of(p_params, lambda x: qgauss.density(p_params, x), n)
            r = p.with_values(qgauss.density(r_params, p.nodes)).normalized()
            out[n] = (kl_divergence(p, r), tv_distance(p, r), hellinger(p, r))
        for a, b in zip(out[2000], out[4000]):
            assert abs(a - b) < 1e-6
