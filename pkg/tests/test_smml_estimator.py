import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypersmml.errors import DomainError, EmptyCellError, UnsupportedError
from hypersmml.hyperbolic_geom import horomap_xi
from hypersmml.model_core import log_base_measure, log_pdf_suffstat
from hypersmml.param_maps import u_to_xi, xi_to_theta, xi_to_u
from hypersmml.prior_marginal import TruncatedDomain, build_grid
from hypersmml.smml_estimator import (
    SmmlCode,
    assign_cell,
    cell_polytope,
    facet_functional,
    fit_smml,
    lambda_matrix,
    lambda_score,
    message_length_I1,
    resolve_threads,
    tessellation_hyperbolic,
    update_weights_and_assertions,
)

N = 4
DOMAIN = TruncatedDomain.default(1, 64)


def mirror_code(shift=1.5, weights=(0.5, 0.5), domain=DOMAIN):
    thetas = np.array([[-shift, -0.6], [shift, -0.6]])
    return SmmlCode(thetas, np.array(weights), domain)


class TestSmmlCode:
    def test_validation(self):
        with pytest.raises(DomainError):
            SmmlCode(np.array([[0.0, -1.0]]), np.array([0.5]), DOMAIN)
        with pytest.raises(DomainError):
            SmmlCode(np.array([[0.0, -1.0], [1.0, -1.0]]), np.array([1.0, 0.0]), DOMAIN)
        with pytest.raises(DomainError):
            SmmlCode(np.array([[0.0, 1.0]]), np.array([1.0]), DOMAIN)
        with pytest.raises(DomainError):
            SmmlCode(np.array([[0.0, 0.0, -1.0]]), np.array([1.0]), DOMAIN)


class TestLambda:
    def test_example(self):
        assert lambda_score([0.0, 1.0], [0.0, -0.5], 1.0, 3) == pytest.approx(0.5, rel=1e-15)

    def test_halving_q(self):
        a = lambda_score([0.3, 2.0], [0.4, -0.7], 0.4, 5)
        b = lambda_score([0.3, 2.0], [0.4, -0.7], 0.2, 5)
        assert b - a == pytest.approx(math.log(2), rel=1e-13)

    def test_equals_negative_log_posterior_part(self, rng):
        for _ in range(20):
            x = u_to_xi(np.array([rng.uniform(-2, 2), rng.uniform(0.3, 3)]))
            theta = np.array([rng.uniform(-2, 2), -rng.uniform(0.2, 2)])
            q = rng.uniform(0.05, 1)
            expected = -math.log(q) - log_pdf_suffstat(x, theta, N, 1) + log_base_measure(x, N, 1)
            assert lambda_score(x, theta, q, N) == pytest.approx(expected, rel=1e-10, abs=1e-10)

    def test_argmin_is_argmax_of_weighted_likelihood(self, rng):
        thetas = np.column_stack([rng.uniform(-2, 2, 5), -rng.uniform(0.2, 2, 5)])
        q = rng.dirichlet(np.ones(5))
        x = u_to_xi(np.column_stack([rng.uniform(-2, 2, 200), rng.uniform(0.3, 3, 200)]))
        lik = np.stack([np.log(q[i]) + log_pdf_suffstat(x, thetas[i], N, 1) for i in range(5)], axis=1)
        np.testing.assert_array_equal(np.argmin(lambda_matrix(x, thetas, q, N), axis=1), np.argmax(lik, axis=1))


class TestAssign:
    def test_single_cell(self, rng):
        code = SmmlCode(np.array([[0.3, -0.8]]), np.array([1.0]), DOMAIN)
        x = u_to_xi(np.column_stack([rng.uniform(-2, 2, 50), rng.uniform(0.3, 3, 50)]))
        assert np.all(assign_cell(x, code, N) == 0)

    def test_mirror_symmetric(self):
        code = mirror_code()
        assert assign_cell([-0.5, 2.0], code, N) == 0
        assert assign_cell([0.5, 2.0], code, N) == 1
        assert assign_cell([0.0, 2.0], code, N) == 0

    def test_raising_q_grows_cell(self):
        grid = build_grid(DOMAIN, N)
        small = assign_cell(grid.x, mirror_code(weights=(0.4, 0.6)), N) == 0
        large = assign_cell(grid.x, mirror_code(weights=(0.55, 0.45)), N) == 0
        assert np.all(large[small])
        assert large.sum() > small.sum()


class TestMessageLength:
    def test_single_cell_is_expected_neg_loglik(self):
        code = SmmlCode(np.array([[0.2, -0.9]]), np.array([1.0]), DOMAIN)
        grid = build_grid(DOMAIN, N)
        expected = -float(np.dot(grid.weights, log_pdf_suffstat(grid.x, code.assertions[0], N, 1)))
        assert message_length_I1(code, N) == pytest.approx(expected, rel=1e-12)

    def test_self_convergence(self):
        a = fit_smml(2, DOMAIN.with_resolution(64), N, restarts=2)
        b = fit_smml(2, DOMAIN.with_resolution(128), N, restarts=2)
        assert abs(a.I1 / b.I1 - 1) < 0.005

    def test_update_never_increases(self):
        code = SmmlCode(np.array([[0.7, -0.3]]), np.array([1.0]), DOMAIN)
        assert message_length_I1(update_weights_and_assertions(code, N), N) <= message_length_I1(code, N)

    def test_unsupported(self):
        code = SmmlCode(np.array([[0.7, -0.3]]), np.array([1.0]), DOMAIN)
        with pytest.raises(UnsupportedError):
            message_length_I1(code, 1)


class TestUpdate:
    def test_single_cell_centroid(self):
        grid = build_grid(DOMAIN, N)
        code = update_weights_and_assertions(SmmlCode(np.array([[0.0, -1.0]]), np.array([1.0]), DOMAIN), N)
        centroid = grid.weights @ grid.x
        np.testing.assert_allclose(code.assertions[0], xi_to_theta(centroid, N), rtol=1e-12, atol=1e-14)
        assert code.coding_probs[0] == 1.0

    def test_preserves_mirror_symmetry(self):
        code = mirror_code(shift=0.9)
        for _ in range(5):
            code = update_weights_and_assertions(code, N)
            t = code.assertions
            np.testing.assert_allclose(t[0], [-t[1, 0], t[1, 1]], rtol=1e-10, atol=1e-12)
            assert code.coding_probs[0] == pytest.approx(0.5, abs=1e-12)
            assert math.fsum(code.coding_probs) == pytest.approx(1.0, abs=1e-12)

    def test_empty_cell(self):
        thetas = np.array([[0.0, -1.0], [50.0, -0.01]])
        code = SmmlCode(thetas, np.array([1 - 1e-12, 1e-12]), DOMAIN)
        with pytest.raises(EmptyCellError):
            update_weights_and_assertions(code, N)

    @given(st.floats(-2, 2), st.floats(0.5, 3), st.floats(-2, 2), st.floats(0.5, 3))
    def test_centroids_are_interior(self, a, b, c, d):
        thetas = xi_to_theta(u_to_xi(np.array([[a, b], [c + 5.0, d]])), N)
        thetas[1, 0] = abs(thetas[1, 0]) + 1.0
        try:
            code = update_weights_and_assertions(SmmlCode(thetas, np.array([0.5, 0.5]), DOMAIN), N)
        except EmptyCellError:
            return
        assert np.all(code.assertions[:, -1] < 0)


class TestFit:
    def test_m1_closed_form(self):
        code = fit_smml(1, DOMAIN, N)
        assert code.coding_probs.tolist() == [1.0]
        again = update_weights_and_assertions(code, N)
        np.testing.assert_allclose(again.assertions, code.assertions, rtol=1e-12)

    @pytest.mark.parametrize("m", [2, 3])
    def test_wallace_conditions(self, m):
        code = fit_smml(m, DOMAIN, N, restarts=4, seed=1)
        grid = build_grid(DOMAIN, N)
        labels = assign_cell(grid.x, code, N)
        again = update_weights_and_assertions(code, N)
        np.testing.assert_array_equal(assign_cell(grid.x, again, N), labels)
        np.testing.assert_allclose(again.assertions, code.assertions, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(again.coding_probs, code.coding_probs, rtol=1e-9)
        assert math.fsum(code.coding_probs) == pytest.approx(1.0, abs=1e-9)

    def test_history_non_increasing(self):
        code = fit_smml(3, DOMAIN, N, restarts=3, seed=2)
        values = [v for kind, v in code.history if kind != "reseed"]
        assert len(values) >= 2
        assert all(b <= a + 1e-12 * abs(a) for a, b in zip(values, values[1:]))

    def test_more_cells_shorter(self):
        lengths = [fit_smml(m, DOMAIN, N, restarts=4).I1 for m in (1, 2, 3)]
        assert lengths[1] <= lengths[0] + 1e-9
        assert lengths[2] <= lengths[1] + 1e-9

    def test_deterministic_across_threads(self):
        a = fit_smml(3, DOMAIN, N, restarts=4, seed=7, threads=1)
        b = fit_smml(3, DOMAIN, N, restarts=4, seed=7, threads=4)
        np.testing.assert_array_equal(a.assertions, b.assertions)
        np.testing.assert_array_equal(a.coding_probs, b.coding_probs)
        assert a.I1 == b.I1

    def test_symmetric_m2(self):
        code = fit_smml(2, DOMAIN.with_resolution(128), N, restarts=4)
        a, b = facet_functional(code, 0, 1, N)
        assert abs(a[1]) < 1e-9 * abs(a[0])
        assert abs(b) < 1e-9
        planes = dict(tessellation_hyperbolic(code, N).cells[0][1])
        assert planes[1].kind == "vertical"
        assert planes[1].d / planes[1].c[0] == pytest.approx(0.0, abs=1e-9)

    def test_invalid(self):
        with pytest.raises(DomainError):
            fit_smml(0, DOMAIN, N)
        with pytest.raises(UnsupportedError):
            fit_smml(2, DOMAIN, 1)

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv("HYPERSMML_THREADS", "3")
        assert resolve_threads() == 3
        monkeypatch.delenv("HYPERSMML_THREADS")
        assert resolve_threads() == 1
        assert resolve_threads(0) == 1


class TestPolytopes:
    def test_single_cell(self):
        code = SmmlCode(np.array([[0.0, -1.0]]), np.array([1.0]), DOMAIN)
        assert cell_polytope(code, 0, N).inequalities == []

    def test_grid_points_satisfy_inequalities(self):
        code = fit_smml(3, DOMAIN, N, restarts=2)
        grid = build_grid(DOMAIN, N)
        labels = assign_cell(grid.x, code, N)
        for i in range(code.m):
            poly = cell_polytope(code, i, N)
            assert len(poly.inequalities) == code.m - 1
            assert np.all(poly.contains(grid.x[labels == i], slack=1e-9))

    def test_sphere_facet(self):
        code = SmmlCode(np.array([[0.0, -1.0], [0.5, -0.5]]), np.array([0.5, 0.5]), DOMAIN)
        a, b = facet_functional(code, 0, 1, N)
        plane = dict(tessellation_hyperbolic(code, N).cells[0][1])[1]
        assert plane.kind == "sphere"
        c1 = -a[0] / (2 * a[1])
        assert plane.R**2 == pytest.approx(-b / a[1] + c1**2, rel=1e-12)

    def test_hyperbolic_cells_match_affine_cells(self, rng):
        code = SmmlCode(
            np.array([[0.0, -1.0], [0.5, -0.5], [-1.0, -2.0]]), np.array([0.3, 0.3, 0.4]), DOMAIN
        )
        tess = tessellation_hyperbolic(code, N)
        x = u_to_xi(np.column_stack([rng.uniform(-2, 2, 300), rng.uniform(0.5, 3, 300)]))
        labels = assign_cell(x, code, N)
        u = xi_to_u(horomap_xi(x))
        for i, planes in tess:
            inside = np.ones(len(x), dtype=bool)
            for _, plane in planes:
                inside &= plane.orientation * plane.level(u) <= 1e-9
            np.testing.assert_array_equal(inside, labels == i)
