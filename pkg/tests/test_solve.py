import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glpd.energy import Params, eval_dual, eval_primal, grad_dual, hess_dual, hess_primal
from glpd.mesh import GridSpec
from glpd.solve import (
    CriticalPoint,
    SpectrumReport,
    ascend_dual,
    eigenvalues,
    multistart_oracle,
    newton_primal,
    spectrum,
)

ULP = np.finfo(float).eps
ONE = GridSpec((1,))


def node(x):
    return np.array([float(x)])


def benchmark():
    g = GridSpec((63,))
    return Params(g, gamma=1.0, alpha=1.0, beta=10.0, epsilon=1e-2)


def roundoff_scale(p, u):
    """Size of the rounding error in one residual evaluation at ``u``."""
    un = np.max(np.abs(u))
    stiff = 4 * p.gamma * p.grid.dimension / min(p.grid.spacing) ** 2
    return ULP * (stiff * un + p.alpha * un**3 + p.beta * un + np.max(np.abs(p.f)))


class TestNewton:
    def test_single_node(self):
        p = Params(ONE, beta=9.0, epsilon=0.5, K=10.0)
        cp = newton_primal(p, node(0.5))
        assert cp.converged
        assert cp.u0[0] == pytest.approx(1.0, abs=1e-12)
        assert cp.primal_grad_norm <= 1e-12

    def test_zero_start_is_critical(self):
        g = GridSpec((15,))
        cp = newton_primal(Params(g, beta=1.0), g.zeros())
        assert cp.converged and cp.iterations == 0
        assert not cp.u0.any()

    def test_benchmark(self):
        p = benchmark()
        cp = newton_primal(p, p.grid.bump(), 1e-12, 25)
        assert cp.converged
        assert cp.iterations <= 25
        assert np.all(cp.u0 > 0)
        assert np.allclose(cp.u0, cp.u0[::-1], atol=1e-12)
        assert eval_primal(p, cp.u0) < 0

    def test_quadratic_tail(self):
        p = benchmark()
        cp = newton_primal(p, p.grid.bump(), 1e-12, 25)
        floor = roundoff_scale(p, cp.u0)
        hist = cp.history
        tail = [(a, b) for a, b in zip(hist, hist[1:]) if a < 1e-2 and b > 100 * floor]
        assert tail
        for a, b in tail:
            assert b / a**2 < 1e3

    def test_residual_history_decreases(self):
        p = benchmark()
        hist = newton_primal(p, p.grid.bump()).history
        assert all(b < a for a, b in zip(hist, hist[1:]))

    def test_nonconvergence_reported(self):
        p = benchmark()
        cp = newton_primal(p, p.grid.bump(), 1e-12, 2)
        assert not cp.converged
        assert cp.iterations == 2
        assert cp.primal_grad_norm > 1e-12

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            newton_primal(Params(ONE), node(1), tol=0)
        with pytest.raises(ValueError):
            newton_primal(Params(ONE), np.zeros(2))

    def test_critical_point_invariant(self):
        with pytest.raises(ValueError):
            CriticalPoint(node(0), 1.0, True, 1e-12)


class TestAscent:
    def test_single_node_from_nearby(self):
        p = Params(ONE, beta=9.0, epsilon=0.5, K=10.0)
        res = ascend_dual(p, node(1.2))
        assert res.converged
        assert res.uhat[0] == pytest.approx(1.0, abs=1e-8)
        assert res.grad_norm <= 1e-8

    def test_start_at_critical_point(self):
        p = Params(ONE, beta=9.0, epsilon=0.5, K=10.0)
        res = ascend_dual(p, node(1.0))
        assert res.converged and res.iterations == 0
        assert res.uhat[0] == 1.0

    def test_monotone_values(self):
        g = GridSpec((9,))
        p = Params(g, beta=12.0, epsilon=0.5)
        cp = newton_primal(p, g.bump())
        res = ascend_dual(p, cp.u0 + 0.05 * g.bump())
        assert all(b >= a for a, b in zip(res.values, res.values[1:]))
        assert res.values[-1] == pytest.approx(eval_dual(p, res.uhat))

    def test_newton_variant_agrees(self):
        g = GridSpec((9,))
        p = Params(g, beta=12.0, epsilon=0.5)
        cp = newton_primal(p, g.bump())
        start = cp.u0 + 0.02 * g.bump()
        # dual gradient roundoff here is about ||A_eps|| / eps * 1e-14 ~ 6e-9
        res = ascend_dual(p, start, tol=1e-7, newton=True)
        assert res.converged and res.newton_steps > 0
        np.testing.assert_allclose(res.uhat, cp.u0, atol=1e-8)
        assert np.max(np.abs(grad_dual(p, res.uhat))) <= 1e-7


def random_symmetric(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    return 0.5 * (a + a.T)


class TestSpectrum:
    def test_laplacian_n3(self):
        g = GridSpec((3,))
        op = -g.laplacian_matrix.toarray()
        expected = np.array([16 * (2 - np.sqrt(2)), 32.0, 16 * (2 + np.sqrt(2))])
        np.testing.assert_allclose(eigenvalues(op), expected, rtol=1e-13)
        rep = spectrum(op)
        assert rep.min_eig == pytest.approx(expected[0], rel=1e-13)
        assert rep.max_eig == pytest.approx(expected[2], rel=1e-13)

    def test_one_by_one(self):
        rep = spectrum(np.array([[2.0]]))
        assert (rep.min_eig, rep.max_eig) == (2.0, 2.0)
        rep = spectrum(np.array([[-3.0]]), mode="iterative")
        assert (rep.min_eig, rep.max_eig) == (-3.0, -3.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_iterative_matches_dense(self, seed):
        m = random_symmetric(50, seed)
        dense = spectrum(m)
        it = spectrum(m, mode="iterative", seed=seed)
        assert it.converged
        assert it.min_eig == pytest.approx(dense.min_eig, abs=1e-8)
        assert it.max_eig == pytest.approx(dense.max_eig, abs=1e-8)

    def test_iterative_on_operator(self):
        g = GridSpec((5, 4))
        p = Params(g, beta=3.0, epsilon=0.3)
        u = 0.5 * g.bump()
        for op in (hess_primal(p, u), hess_dual(p, u)):
            dense = spectrum(op)
            it = spectrum(op, mode="iterative")
            scale = max(abs(dense.min_eig), abs(dense.max_eig))
            assert it.min_eig == pytest.approx(dense.min_eig, abs=1e-8 * scale)
            assert it.max_eig == pytest.approx(dense.max_eig, abs=1e-8 * scale)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            spectrum(np.eye(2), mode="lanczos")

    def test_report_order(self):
        with pytest.raises(ValueError):
            SpectrumReport(1.0, 0.0, "dense")


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_spectrum_brackets_rayleigh_quotients(n, seed):
    m = random_symmetric(n, seed)
    rep = spectrum(m)
    x = np.random.default_rng(seed).standard_normal(n)
    q = x @ m @ x / (x @ x)
    assert rep.min_eig - 1e-12 <= q <= rep.max_eig + 1e-12


class TestMultistart:
    def test_single_node(self):
        assert multistart_oracle(Params(ONE, beta=9.0, epsilon=0.5, K=10.0)) == pytest.approx(-0.125, abs=1e-12)

    @pytest.mark.parametrize("beta", [1.0, 4.0, 7.5])
    def test_convex_single_node(self, beta):
        # beta below the single-node Laplacian eigenvalue 8 makes J convex with minimum 0
        assert multistart_oracle(Params(ONE, beta=beta)) == 0.0

    def test_agrees_with_newton(self):
        g = GridSpec((4,))
        p = Params(g, beta=10.0)
        cp = newton_primal(p, g.bump())
        assert multistart_oracle(p) == pytest.approx(eval_primal(p, cp.u0), abs=1e-6)

    def test_deterministic(self):
        p = Params(GridSpec((3,)), beta=12.0, f=np.array([0.1, -0.2, 0.3]))
        assert multistart_oracle(p, seed=4) == multistart_oracle(p, seed=4)

    def test_size_limit(self):
        with pytest.raises(ValueError):
            multistart_oracle(Params(GridSpec((9,))))
