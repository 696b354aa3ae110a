import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ammkit.errors import ConfigurationError, InnerSolverError
from ammkit.local_solver import InnerSolverConfig, Subproblem, solve_batched, solve_subproblem, subproblem_objective
from ammkit.objectives import BallIndicator, L1Norm, StackedNonsmooth, ZeroNonsmooth, ZeroSmooth, l1_plus_ball
from ammkit.surrogates import DataQuadraticKernel, ScaledIdentityKernel


def model(Q):
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    return DataQuadraticKernel(Q).model(ZeroSmooth(Q.shape[0]), np.zeros(Q.shape[0]))


def random_spd(rng, d, cond=20.0):
    U, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return (U * np.geomspace(1.0, cond, d)) @ U.T


class TestClosedForms:
    def test_unconstrained_identity(self):
        sp = Subproblem(ScaledIdentityKernel(1.0).model(ZeroSmooth(2), np.zeros(2)), ZeroNonsmooth(), np.array([2.0, -2.0]))
        r = solve_subproblem(sp)
        np.testing.assert_allclose(r.x, [-2.0, 2.0])
        assert r.method == "prox"

    def test_soft_threshold(self):
        sp = Subproblem(ScaledIdentityKernel(1.0).model(ZeroSmooth(2), np.zeros(2)), L1Norm(1.0), -np.array([1.5, 0.2]))
        np.testing.assert_allclose(solve_subproblem(sp).x, [0.5, 0.0])

    def test_ball_with_anisotropic_kernel(self):
        sp = Subproblem(model(np.diag([2.0, 1.0])), BallIndicator(np.zeros(2), 1.0), -np.array([4.0, 0.0]))
        r = solve_subproblem(sp, InnerSolverConfig(tol=1e-12))
        np.testing.assert_allclose(r.x, [1.0, 0.0], atol=1e-10)
        assert r.method == "apg" and r.converged

    def test_linear_solve(self):
        rng = np.random.default_rng(0)
        Q = random_spd(rng, 3)
        c = rng.standard_normal(3)
        r = solve_subproblem(Subproblem(model(Q), ZeroNonsmooth(), c))
        assert r.method == "linear"
        np.testing.assert_allclose(Q @ r.x, -c, atol=1e-12)

    def test_exact_unavailable(self):
        sp = Subproblem(model(np.diag([2.0, 1.0])), L1Norm(1.0), np.ones(2))
        with pytest.raises(ConfigurationError):
            solve_subproblem(sp, method="exact")


class TestIterative:
    @pytest.mark.parametrize("seed", range(100))
    def test_cross_dispatch(self, seed):
        """The iterative path agrees with the closed forms on problems that have one."""
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 5))
        c = 3 * rng.standard_normal(d)
        if seed % 3 == 0:
            m, h = model(random_spd(rng, d)), ZeroNonsmooth()
        else:
            m = ScaledIdentityKernel(float(rng.uniform(0.5, 5))).model(ZeroSmooth(d), np.zeros(d))
            h = L1Norm(float(rng.uniform(0, 2))) if seed % 3 == 1 else l1_plus_ball(0.3, rng.standard_normal(d), 1.0)
        sp = Subproblem(m, h, c)
        exact = solve_subproblem(sp)
        it = solve_subproblem(sp, InnerSolverConfig(tol=1e-12, max_iters=100000), method="iterative")
        assert it.converged
        np.testing.assert_allclose(it.x, exact.x, atol=1e-9)

    def test_monotone_without_momentum(self):
        rng = np.random.default_rng(1)
        Q = random_spd(rng, 4, cond=50.0)
        sp = Subproblem(model(Q), l1_plus_ball(0.5, np.zeros(4), 2.0), 5 * rng.standard_normal(4))
        vals = []
        for k in range(1, 60):
            cfg = InnerSolverConfig(tol=1e-300, max_iters=k, accelerated=False)
            vals.append(subproblem_objective(sp, solve_subproblem(sp, cfg, method="iterative").x))
        assert np.all(np.diff(vals) <= 1e-12)

    def test_warm_start_reduces_work(self):
        rng = np.random.default_rng(2)
        Q = random_spd(rng, 5, cond=100.0)
        sp = Subproblem(model(Q), L1Norm(0.2), rng.standard_normal(5))
        cold = solve_subproblem(sp, method="iterative")
        warm = solve_subproblem(sp, x0=cold.x + 1e-6, method="iterative")
        assert warm.iters < cold.iters

    def test_non_convergence(self):
        rng = np.random.default_rng(3)
        sp = Subproblem(model(random_spd(rng, 4, 1e4)), L1Norm(0.1), rng.standard_normal(4))
        r = solve_subproblem(sp, InnerSolverConfig(tol=1e-14, max_iters=3), method="iterative")
        assert not r.converged and r.residual > 1e-14
        with pytest.raises(InnerSolverError):
            solve_subproblem(sp, InnerSolverConfig(tol=1e-14, max_iters=3, raise_on_fail=True), method="iterative")

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_optimality_certificate(self, seed):
        rng = np.random.default_rng(seed)
        Q = random_spd(rng, 3)
        h = l1_plus_ball(0.4, rng.standard_normal(3), 1.5)
        c = 2 * rng.standard_normal(3)
        r = solve_subproblem(Subproblem(model(Q), h, c), InnerSolverConfig(tol=1e-11))
        assert h.subdifferential_distance(r.x, -(Q @ r.x + c), tol=1e-8) < 1e-7


class TestBatched:
    def test_matches_per_node(self):
        rng = np.random.default_rng(4)
        n, d = 6, 3
        Q = np.stack([random_spd(rng, d) for _ in range(n)])
        lin = rng.standard_normal((n, d))
        terms = [l1_plus_ball(0.3, rng.standard_normal(d), 1.0) for _ in range(n)]
        b = solve_batched(Q, lin, StackedNonsmooth(terms), InnerSolverConfig(tol=1e-12))
        for i in range(n):
            r = solve_subproblem(Subproblem(model(Q[i]), terms[i], lin[i]), InnerSolverConfig(tol=1e-12))
            np.testing.assert_allclose(b.X[i], r.x, atol=1e-10)
        assert b.residuals.max() <= 1e-12

    def test_dispatch(self):
        n, d = 3, 2
        lin = np.ones((n, d))
        Q = np.stack([2.0 * np.eye(d)] * n)
        assert solve_batched(Q, lin, StackedNonsmooth([L1Norm(0.1)] * n), InnerSolverConfig()).method == "prox"
        Q2 = Q.copy()
        Q2[:, 0, 1] = Q2[:, 1, 0] = 0.5
        r = solve_batched(Q2, lin, StackedNonsmooth([ZeroNonsmooth()] * n), InnerSolverConfig())
        assert r.method == "linear"
        np.testing.assert_allclose(np.einsum("nij,nj->ni", Q2, r.X), -lin, atol=1e-12)
        cfg = InnerSolverConfig(accelerated=False)
        assert solve_batched(Q2, lin, StackedNonsmooth([L1Norm(0.1)] * n), cfg).method == "pg"

    def test_failure_names_node(self):
        rng = np.random.default_rng(5)
        Q = np.stack([random_spd(rng, 3, 1e4) for _ in range(3)])
        cfg = InnerSolverConfig(tol=1e-14, max_iters=2, raise_on_fail=True)
        with pytest.raises(InnerSolverError, match="node"):
            solve_batched(Q, rng.standard_normal((3, 3)), StackedNonsmooth([L1Norm(0.1)] * 3), cfg)

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            InnerSolverConfig(tol=0.0)
        with pytest.raises(ConfigurationError):
            InnerSolverConfig(max_iters=0)
