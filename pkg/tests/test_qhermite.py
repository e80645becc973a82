import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsle.qgauss import QGaussianParams, q_bracket, q_factorial
from qsle.qhermite import (IndexSet, QSeries, basis_matrix, build_index_set,
                           eval_all, eval_multivariate, integrate_measure,
                           norm_squared, q_derivative, quadrature_nodes,
                           tensor_quadrature, truncation_rate_bound)

from oracles import (brute_force_hyperbolic, brute_force_total_degree,
                     chebyshev_u_trig)


class TestEvalAll:
    def test_first_two(self):
        for q in (-0.7, 0.0, 0.4):
            vals = eval_all(q, 2.0, 1)
            assert vals[0] == 1.0
            assert vals[1] == 2.0

    def test_forced_by_recurrence(self):
        vals = eval_all(0.5, 1.0, 3)
        assert np.allclose(vals, [1.0, 1.0, 0.0, -1.5], atol=1e-15)

    def test_chebyshev_at_q_zero(self):
        xs = np.linspace(-1.999, 1.999, 41)
        vals = eval_all(0.0, xs, 9)
        for n in range(10):
            ref = np.array([chebyshev_u_trig(n, x / 2.0) for x in xs])
            assert np.max(np.abs(vals[n] - ref)) < 1e-12

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            eval_all(0.3, 1.0, -1)


class TestNorms:
    def test_trivial(self):
        assert norm_squared(0.7, 0) == 1.0
        assert norm_squared(0.5, 2) == pytest.approx(1.5, abs=1e-15)

    @pytest.mark.parametrize("q", (-0.6, 0.0, 0.4, 0.8))
    def test_quadrature_orthogonality(self, q):
        p = QGaussianParams(q=q)
        nodes, w = quadrature_nodes(p, 700)
        vals = eval_all(q, nodes, 8)
        gram = (vals * w) @ vals.T
        expected = np.diag([q_factorial(n, q) for n in range(9)])
        assert np.max(np.abs(gram - expected)) < 1e-8


class TestMultivariate:
    def test_constant(self):
        assert eval_multivariate(0.5, (0, 0), (3.0, -1.0)) == 1.0

    def test_product_value(self):
        assert eval_multivariate(0.5, (1, 2), (1.0, 1.0)) == pytest.approx(0.0)
        h2 = eval_all(0.5, 0.3, 2)[2]
        assert eval_multivariate(0.5, (0, 2), (9.9, 0.3)) == pytest.approx(h2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            eval_multivariate(0.5, (1, 2), (1.0,))

    def test_tensor_orthogonality(self):
        q = 0.4
        priors = [QGaussianParams(q=q), QGaussianParams(q=q)]
        points, w = tensor_quadrature(priors, 80)
        iset = build_index_set(2, 3)
        design = basis_matrix(q, iset, points)
        gram = (design * w[:, None]).T @ design
        expected = np.diag([q_factorial(a, q) * q_factorial(b, q)
                            for a, b in iset])
        assert np.max(np.abs(gram - expected)) < 1e-7


class TestIndexSets:
    def test_total_degree_cardinality(self):
        assert len(build_index_set(2, 3)) == 10
        for m in range(1, 5):
            for n in range(7):
                assert len(build_index_set(m, n)) == math.comb(m + n, n)

    def test_one_dim_listing(self):
        iset = build_index_set(1, 5)
        assert list(iset) == [(k,) for k in range(6)]

    def test_matches_brute_force(self):
        iset = build_index_set(3, 4)
        assert set(iset.indices) == brute_force_total_degree(3, 4)

    def test_hyperbolic_membership(self):
        iset = build_index_set(2, 3, kind="hyperbolic", hyperbolic_l=0.5)
        assert set(iset.indices) == brute_force_hyperbolic(2, 3, 0.5)
        for excluded in ((1, 3), (3, 1), (2, 2), (1, 2), (2, 1), (1, 1)):
            assert excluded not in set(iset.indices)
        assert set(iset.indices) <= set(build_index_set(2, 3).indices)

    def test_ordering_graded_lexicographic(self):
        iset = build_index_set(2, 2)
        assert list(iset) == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]

    def test_no_duplicates(self):
        iset = build_index_set(3, 5)
        assert len(set(iset.indices)) == len(iset)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            build_index_set(0, 3)
        with pytest.raises(ValueError):
            build_index_set(2, 3, kind="hyperbolic", hyperbolic_l=1.5)
        with pytest.raises(ValueError):
            build_index_set(2, 3, kind="hyperbolic")
        with pytest.raises(ValueError):
            build_index_set(2, 3, kind="banana")

    def test_json_roundtrip(self):
        iset = build_index_set(2, 4, kind="hyperbolic", hyperbolic_l=0.7)
        back = IndexSet.from_json(iset.to_json())
        assert back == iset
        payload = json.loads(iset.to_json())
        assert payload["dimension"] == 2


class TestQDerivative:
    def test_first_degree(self):
        out = q_derivative(QSeries(q=0.5, coeffs={1: 1.0}), 1)
        assert out.coeffs == {0: pytest.approx(1.0)}

    def test_third_order_on_h3(self):
        out = q_derivative(QSeries(q=0.5, coeffs={3: 1.0}), 3)
        expected = (0.5 ** -1.5) * q_bracket(3, 0.5) * q_bracket(2, 0.5) * 1.0
        assert out.coeffs[0] == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(7.42462, rel=1e-5)

    def test_composition(self):
        rng = np.random.default_rng(3)
        coeffs = {n: float(c) for n, c in enumerate(rng.standard_normal(8))}
        for q in (0.5, -0.5):
            series = QSeries(q=q, coeffs=coeffs)
            once = q_derivative(q_derivative(series, 1), 1)
            twice = q_derivative(series, 2)
            for n in set(once.coeffs) | set(twice.coeffs):
                assert once.coeffs.get(n, 0.0) == pytest.approx(
                    twice.coeffs.get(n, 0.0), rel=1e-12, abs=1e-12)

    def test_degree_drop_and_linearity(self):
        series = QSeries(q=0.4, coeffs={0: 1.0, 2: 0.5, 5: -2.0})
        out = q_derivative(series, 2)
        assert out.degree() == 3
        doubled = q_derivative(QSeries(q=0.4, coeffs={n: 2 * a for n, a in
                                                      series.coeffs.items()}), 2)
        for n, a in out.coeffs.items():
            assert doubled.coeffs[n] == pytest.approx(2 * a, rel=1e-14)

    def test_rejects_q_zero(self):
        with pytest.raises(ValueError):
            q_derivative(QSeries(q=0.0, coeffs={1: 1.0}), 1)


class TestTruncationRateBound:
    @pytest.mark.parametrize("q", (0.5, -0.5))
    def test_equality_case(self, q):
        # the tail of H_{N+1} after degree N equals |q|^N/[N+1] ||Df||^2
        # exactly; the general k=1 rate bound is weaker by a factor 1/|q|
        # and must still dominate
        for big_n in range(3, 9):
            series = QSeries(q=q, coeffs={big_n + 1: 1.0})
            tail = q_factorial(big_n + 1, q)
            dnorm = q_derivative(series, 1).norm_squared()
            identity = abs(q) ** big_n / q_bracket(big_n + 1, q) * dnorm
            assert tail == pytest.approx(identity, rel=1e-12)
            assert tail <= truncation_rate_bound(q, big_n, 1, dnorm) * (1 + 1e-12)

    @pytest.mark.parametrize("q", (0.5, -0.5))
    def test_parseval_tail_bounded(self, q):
        rng = np.random.default_rng(17)
        coeffs = {n: float(c) for n, c in enumerate(rng.standard_normal(10))}
        series = QSeries(q=q, coeffs=coeffs)
        dnorm = q_derivative(series, 1).norm_squared()
        for big_n in range(3, 9):
            tail = sum(q_factorial(n, q) * a * a
                       for n, a in coeffs.items() if n > big_n)
            assert tail <= truncation_rate_bound(q, big_n, 1, dnorm) * (1 + 1e-12)

    def test_monotone_in_q_magnitude(self):
        assert truncation_rate_bound(0.2, 5, 1, 1.0) < truncation_rate_bound(
            0.8, 5, 1, 1.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            truncation_rate_bound(0.0, 5, 1, 1.0)
        with pytest.raises(ValueError):
            truncation_rate_bound(0.5, 5, 0, 1.0)
        with pytest.raises(ValueError):
            truncation_rate_bound(0.5, 1, 3, 1.0)


class TestQuadrature:
    def test_weights_sum_to_one(self):
        p = QGaussianParams(q=-0.3, location=2.0, scale=0.7)
        _, w = quadrature_nodes(p, 512)
        assert abs(np.sum(w) - 1.0) < 1e-10

    def test_h2_mean_zero(self):
        p = QGaussianParams(q=0.4)
        nodes, w = quadrature_nodes(p, 256)
        h2 = eval_all(0.4, nodes, 2)[2]
        assert abs(np.dot(w, h2)) < 1e-9

    def test_h3_norm(self):
        p = QGaussianParams(q=0.4)
        nodes, w = quadrature_nodes(p, 256)
        h3 = eval_all(0.4, nodes, 3)[3]
        assert np.dot(w, h3 * h3) == pytest.approx(q_factorial(3, 0.4), abs=1e-8)

    @given(q=st.floats(-0.8, 0.8))
    @settings(max_examples=25, deadline=None)
    def test_parseval(self, q):
        series = QSeries(q=q, coeffs={0: 0.3, 1: -1.2, 3: 0.8, 6: 0.1})
        p = QGaussianParams(q=q)
        nodes, w = quadrature_nodes(p, 600)
        vals = series.evaluate(nodes)
        assert np.dot(w, vals * vals) == pytest.approx(series.norm_squared(),
                                                       rel=1e-8, abs=1e-8)

    def test_integrate_measure_doubles_until_stable(self):
        p = QGaussianParams(q=0.5)
        val = integrate_measure(lambda x: np.exp(-x), p, max_degree=2)
        nodes, w = quadrature_nodes(p, 4096)
        assert val == pytest.approx(float(np.dot(w, np.exp(-nodes))), abs=1e-10)

    def test_count_validation(self):
        with pytest.raises(ValueError):
            quadrature_nodes(QGaussianParams(q=0.1), 0)
