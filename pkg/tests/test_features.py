import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpc.errors import DimensionMismatch, UnknownPreset
from lpc.features import basis_grad_u, basis_hess_u, build_basis, eval_basis, graded_monomials


class TestBuildBasis:
    def test_lq6(self):
        b = build_basis("lq6", 2, 1, "critic")
        assert b.size == 6
        assert b.monomials() == [(2, 0, 0), (0, 2, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1), (0, 0, 2)]

    def test_cubic13(self):
        b = build_basis("cubic13", 2, 1, "critic")
        assert b.size == 13
        assert b.monomials()[:6] == build_basis("lq6", 2, 1).monomials()
        assert b.monomials()[6:] == [(3, 0, 0), (0, 3, 0), (2, 1, 0), (1, 2, 0), (2, 0, 1), (0, 2, 1), (1, 1, 1)]

    def test_actor_presets(self):
        assert build_basis("lin2", 2, 1, "actor").monomials() == [(1, 0), (0, 1)]
        assert build_basis("quad5", 2, 1, "actor").monomials() == [(1, 0), (0, 1), (2, 0), (0, 2), (1, 1)]

    def test_degree_one_actor(self):
        b = build_basis(1, 2, 0, "actor")
        assert b.monomials() == [(1, 0), (0, 1)]

    def test_generated_sizes(self):
        # 5 variables: 5 + 15 + 35 monomials of degree 1, 2, 3
        assert build_basis("poly3", 4, 1, "critic").size == 55
        assert build_basis("poly2", 4, 1, "actor").size == 14

    def test_graded_order(self):
        assert graded_monomials(2, 2) == [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]

    def test_generated_has_no_constant_and_bounded_degree(self):
        b = build_basis(3, 3, 1, "critic")
        assert b.degrees.min() == 1 and b.degrees.max() == 3
        assert len(set(b.monomials())) == b.size

    def test_actor_basis_has_no_input(self):
        b = build_basis("poly2", 4, 1, "actor")
        assert b.n_vars == 4

    def test_ordering_stable(self):
        assert build_basis(3, 4, 1).monomials() == build_basis(3, 4, 1).monomials()

    def test_errors(self):
        with pytest.raises(UnknownPreset):
            build_basis("cubic99", 2, 1)
        with pytest.raises(UnknownPreset):
            build_basis(4, 2, 1)
        with pytest.raises(UnknownPreset):
            build_basis("lin2", 2, 1, "critic")
        with pytest.raises(DimensionMismatch):
            build_basis("lq6", 3, 1, "critic")
        with pytest.raises(KeyError):
            build_basis("nope", 2, 1)


class TestEvalBasis:
    def test_lq6_values(self):
        b = build_basis("lq6", 2, 1)
        np.testing.assert_allclose(eval_basis(b, [1, -0.5], [2]), [1, 0.25, -0.5, 2, -1, 4])

    def test_origin_is_zero(self):
        for spec in (build_basis("cubic13", 2, 1), build_basis(3, 4, 1), build_basis("quad5", 2, 1, "actor")):
            x = np.zeros(spec.n)
            assert np.array_equal(eval_basis(spec, x, np.zeros(1)), np.zeros(spec.size))

    def test_lin2_identity(self):
        np.testing.assert_allclose(eval_basis(build_basis("lin2", 2, 1, "actor"), [3, 4]), [3, 4])

    def test_batch_matches_single(self):
        b = build_basis("cubic13", 2, 1)
        rng = np.random.default_rng(0)
        X, U = rng.normal(size=(7, 2)), rng.normal(size=7)
        batch = eval_basis(b, X, U)
        for i in range(7):
            np.testing.assert_allclose(batch[i], eval_basis(b, X[i], [U[i]]))

    def test_dimension_mismatch(self):
        b = build_basis("lq6", 2, 1)
        with pytest.raises(DimensionMismatch):
            eval_basis(b, [1, 2, 3], [0])
        with pytest.raises(DimensionMismatch):
            eval_basis(b, [1, 2], [0, 1])

    @pytest.mark.parametrize("c", [2, -3])
    def test_scaling_by_degree(self, c):
        b = build_basis(3, 2, 1)
        x, u = np.array([1.0, -2.0]), np.array([3.0])
        np.testing.assert_array_equal(eval_basis(b, c * x, c * u), eval_basis(b, x, u) * float(c) ** b.degrees)


class TestInputDerivatives:
    def test_lq6_grad(self):
        b = build_basis("lq6", 2, 1)
        np.testing.assert_allclose(basis_grad_u(b, [1, -0.5], [2]), [0, 0, 0, 1, -0.5, 4])

    def test_lq6_hess(self):
        b = build_basis("lq6", 2, 1)
        np.testing.assert_allclose(basis_hess_u(b, [0.3, 7.0], [-2]), [0, 0, 0, 0, 0, 2])

    def test_actor_basis_zero(self):
        b = build_basis("quad5", 2, 1, "actor")
        assert np.array_equal(basis_grad_u(b, [1, 2], [1]), np.zeros(5))

    def test_u_squared_at_zero(self):
        b = build_basis("lq6", 2, 1)
        assert basis_grad_u(b, [1, 1], [0])[5] == 0.0

    def test_degree_one_hess_zero(self):
        b = build_basis(1, 2, 1)
        assert np.array_equal(basis_hess_u(b, [1, 2], [3]), np.zeros(3))

    def test_cubic13_linear_in_u_entry(self):
        b = build_basis("cubic13", 2, 1)
        idx = b.monomials().index((2, 0, 1))
        assert basis_hess_u(b, [1.5, -0.3], [0.7])[idx] == 0.0

    def test_multi_input_rejected(self):
        b = build_basis(2, 2, 2)
        with pytest.raises(DimensionMismatch):
            basis_grad_u(b, [1, 2], [0, 1])

    def test_finite_differences(self):
        rng = np.random.default_rng(42)
        b = build_basis(3, 4, 1)
        h = 1e-5
        for _ in range(100):
            x, u = rng.uniform(-2, 2, 4), rng.uniform(-2, 2)
            fp, f0, fm = (eval_basis(b, x, [u + d]) for d in (h, 0.0, -h))
            np.testing.assert_allclose(basis_grad_u(b, x, [u]), (fp - fm) / (2 * h), rtol=1e-6, atol=1e-8)
            np.testing.assert_allclose(basis_hess_u(b, x, [u]), (fp - 2 * f0 + fm) / h**2, rtol=1e-4, atol=1e-4)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
    def test_grad_of_polynomial_in_u(self, x1, x2, u):
        b = build_basis("cubic13", 2, 1)
        w = np.arange(1.0, 14.0)
        # q(u) = w . phi is quadratic in u, so its second difference is exact
        q = lambda v: eval_basis(b, [x1, x2], [v]) @ w
        assert basis_hess_u(b, [x1, x2], [u]) @ w == pytest.approx(q(u + 1) - 2 * q(u) + q(u - 1), abs=1e-8)
