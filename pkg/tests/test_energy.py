import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glpd.energy import (
    DENSE_LIMIT,
    Params,
    dual_hessian_formula,
    eval_dual,
    eval_primal,
    grad_dual,
    grad_primal,
    hess_dual,
    hess_primal,
    residual_shifted,
    shifted_operator,
    shifted_operator_norm,
)
from glpd.mesh import GridSpec
from glpd.solve import newton_primal

ULP = np.finfo(float).eps
ONE = GridSpec((1,))


def node(x):
    return np.array([float(x)])


def single(beta, eps=0.5, K=None):
    return Params(ONE, gamma=1.0, alpha=1.0, beta=beta, epsilon=eps, K=K)


def fd_gradient(fun, u, t):
    """Central differences against the weighted inner product."""
    out = np.zeros(u.size)
    for k in range(u.size):
        e = np.zeros(u.size)
        e[k] = 1.0
        e = e.reshape(u.shape)
        out[k] = (fun(u + t * e) - fun(u - t * e)) / (2 * t)
    return out


def random_params(grid, rng, eps=None):
    return Params(
        grid,
        gamma=rng.uniform(0.5, 2.0),
        alpha=rng.uniform(0.5, 2.0),
        beta=rng.uniform(0.5, 12.0),
        epsilon=eps if eps is not None else rng.uniform(0.05, 1.0),
        f=rng.uniform(-1, 1, grid.shape),
    )


class TestParams:
    def test_defaults(self):
        p = Params(ONE, beta=2.0, epsilon=0.1)
        assert p.K == pytest.approx(3.1)
        assert not p.f.any()

    @pytest.mark.parametrize("kw", [{"gamma": 0}, {"alpha": -1}, {"beta": 0}, {"epsilon": 0},
                                    {"beta": 1, "epsilon": 0.5, "K": 1.5}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            Params(ONE, **kw)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            Params(ONE, f=np.zeros(2))
        with pytest.raises(ValueError):
            eval_primal(single(1.0), np.zeros(3))

    def test_with_epsilon_rederives_K(self):
        p = single(9.0, 0.5, K=10.0).with_epsilon(0.05)
        assert p.K == pytest.approx(10.05)


class TestPrimal:
    def test_single_node_values(self):
        assert eval_primal(single(1.0), node(1)) == 1.875
        assert eval_primal(single(9.0), node(1)) == -0.125
        assert eval_primal(single(4.0), ONE.zeros()) == 0.0

    def test_single_node_gradient(self):
        np.testing.assert_array_equal(grad_primal(single(1.0), node(1)), [8.0])
        np.testing.assert_array_equal(grad_primal(single(9.0), node(1)), [0.0])
        g = GridSpec((4, 3))
        assert not grad_primal(Params(g, beta=3.0), g.zeros()).any()

    def test_single_node_hessian(self):
        np.testing.assert_array_equal(hess_primal(single(9.0), node(1)).dense(), [[2.0]])

    def test_hessian_at_zero_is_shifted_laplacian(self):
        g = GridSpec((5,))
        p = Params(g, gamma=1.5, beta=2.0)
        expected = -1.5 * g.laplacian_matrix.toarray() - 2.0 * np.eye(5)
        np.testing.assert_allclose(hess_primal(p, g.zeros()).dense(), expected, rtol=1e-15)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        g = GridSpec((7,))
        p = random_params(g, rng)
        u = rng.standard_normal(g.shape)
        fd = fd_gradient(lambda v: eval_primal(p, v), u, 1e-5) / g.cell_volume
        np.testing.assert_allclose(grad_primal(p, u).ravel(), fd, rtol=1e-6, atol=1e-7)

    def test_hessian_apply_matches_fd_of_gradient(self):
        rng = np.random.default_rng(12)
        g = GridSpec((4, 5))
        p = random_params(g, rng)
        u, w = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
        t = 1e-6
        fd = (grad_primal(p, u + t * w) - grad_primal(p, u - t * w)) / (2 * t)
        hw = hess_primal(p, u).apply(w)
        assert np.linalg.norm(hw - fd) <= 1e-6 * np.linalg.norm(hw)
        np.testing.assert_allclose(hess_primal(p, u).dense() @ w.ravel(), hw.ravel(), rtol=1e-12, atol=1e-9)

    def test_dense_cap(self):
        g = GridSpec((DENSE_LIMIT + 1,))
        with pytest.raises(ValueError):
            hess_primal(Params(g), g.zeros()).dense()
        with pytest.raises(ValueError):
            hess_dual(Params(g), g.zeros()).dense()


class TestShiftedResidual:
    def test_values(self):
        np.testing.assert_array_equal(residual_shifted(single(9.0), node(1)), [-0.5])
        np.testing.assert_array_equal(residual_shifted(single(1.0), node(1)), [7.5])
        assert not residual_shifted(single(1.0), ONE.zeros()).any()

    def test_relation_to_gradient(self):
        rng = np.random.default_rng(2)
        g = GridSpec((3, 3))
        p = random_params(g, rng)
        u = rng.standard_normal(g.shape)
        np.testing.assert_allclose(residual_shifted(p, u), grad_primal(p, u) - p.epsilon * u, atol=1e-12)


class TestDual:
    def test_single_node_values(self):
        assert eval_dual(single(1.0), node(1)) == -30.125
        assert eval_dual(single(9.0), node(1)) == -0.125
        assert eval_dual(single(1.0), ONE.zeros()) == 0.0

    def test_single_node_gradient(self):
        np.testing.assert_array_equal(grad_dual(single(9.0), node(1)), [0.0])
        assert not grad_dual(single(1.0), ONE.zeros()).any()

    def test_single_node_hessian(self):
        np.testing.assert_array_equal(hess_dual(single(9.0), node(1)).dense(), [[-6.0]])

    def test_gradient_matches_expanded_form(self):
        rng = np.random.default_rng(5)
        g = GridSpec((6,))
        p = random_params(g, rng)
        u = rng.standard_normal(g.shape)
        r = residual_shifted(p, u)
        expanded = (p.gamma * g.laplacian(u) - 3 * p.alpha * u**3 + (p.beta + p.epsilon) * u
                    - shifted_operator(p, u).apply(r) / p.epsilon)
        np.testing.assert_allclose(grad_dual(p, u), expanded, rtol=1e-10, atol=1e-8)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        g = GridSpec((7,))
        p = random_params(g, rng)
        u = rng.standard_normal(g.shape)
        fd = fd_gradient(lambda v: eval_dual(p, v), u, 1e-5) / g.cell_volume
        an = grad_dual(p, u).ravel()
        assert np.linalg.norm(fd - an) <= 1e-6 * np.linalg.norm(an)

    def test_hessian_apply_matches_fd_of_gradient(self):
        rng = np.random.default_rng(8)
        g = GridSpec((3, 4))
        p = random_params(g, rng)
        u, w = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
        t = 1e-6
        fd = (grad_dual(p, u + t * w) - grad_dual(p, u - t * w)) / (2 * t)
        hw = hess_dual(p, u).apply(w)
        assert np.linalg.norm(hw - fd) <= 1e-5 * np.linalg.norm(hw)
        np.testing.assert_allclose(hess_dual(p, u).dense() @ w.ravel(), hw.ravel(), rtol=1e-10,
                                   atol=1e-10 * np.abs(hw).max())

    def test_hessian_identity_at_zero(self):
        g = GridSpec((6,))
        p = Params(g, gamma=1.0, alpha=1.0, beta=2.0, epsilon=0.3)
        H = hess_primal(p, g.zeros()).dense()
        Hd = hess_dual(p, g.zeros()).dense()
        np.testing.assert_allclose(Hd, dual_hessian_formula(H, p.epsilon), rtol=0, atol=1e-8 * np.abs(H).max())

    def test_hessians_exactly_symmetric(self):
        rng = np.random.default_rng(9)
        g = GridSpec((4, 4))
        p = random_params(g, rng)
        u = rng.standard_normal(g.shape)
        for op in (hess_primal(p, u), hess_dual(p, u)):
            m = op.dense()
            assert np.array_equal(m, m.T)


@settings(max_examples=25, deadline=None)
@given(counts=st.lists(st.integers(1, 15), min_size=1, max_size=2), seed=st.integers(0, 2**32 - 1))
def test_directional_derivatives(counts, seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(tuple(counts))
    p = random_params(g, rng, eps=rng.uniform(0.1, 1.0))
    u = rng.uniform(-1, 1, g.shape)
    w = rng.standard_normal(g.shape)
    w /= np.linalg.norm(w)
    t = 1e-5 * max(1.0, np.max(np.abs(u)))
    for fun, grad in ((eval_primal, grad_primal), (eval_dual, grad_dual)):
        fd = (fun(p, u + t * w) - fun(p, u - t * w)) / (2 * t)
        an = g.inner(grad(p, u), w)
        assert abs(fd - an) <= 1e-6 * (1 + abs(fun(p, u)))


def test_critical_point_transfer_bound():
    g = GridSpec((63,))
    p = Params(g, gamma=1.0, alpha=1.0, beta=10.0, epsilon=1e-2)
    cp = newton_primal(p, g.bump(), 1e-12, 25)
    tau = np.max(np.abs(grad_primal(p, cp.u0)))
    assert tau <= 1e-12
    bound = shifted_operator_norm(p, cp.u0) * tau / p.epsilon
    assert np.max(np.abs(grad_dual(p, cp.u0))) <= bound


def test_zero_gap_exact_single_node():
    for eps in (0.5, 0.05, 1e-3):
        p = single(9.0, eps)
        J, Jd = eval_primal(p, node(1)), eval_dual(p, node(1))
        assert abs(J - Jd) <= 64 * ULP * abs(J)
