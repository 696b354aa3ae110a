"""DAMM: separable Bregman surrogates with one neighbor broadcast per round."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, InnerSolverError
from ..graph_topology import WeightPair
from ..local_solver import InnerSolverConfig, Subproblem, solve_batched, solve_subproblem
from ..objectives import NetworkProblem
from ..surrogates import BregmanKernel, bregman_A
from .base import AmmState, Engine, NodeProgram, Phase, weighted_sum


class DammEngine(Engine):
    """Node i solves argmin ψ_i^k(x) + h_i(x) + ⟨x, c_i^k⟩ with
    c_i^k = q_i^k − ∇ψ_i^k(x_i^k) + ∇f_i(x_i^k) + ρ Σ_j p_ij x_j^k,
    then q_i^{k+1} = q_i^k + ρ Σ_j p̃_ij x_j^{k+1}.
    """

    kind = "damm"
    distributed = True

    def __init__(self, prob: NetworkProblem, wp: WeightPair, rho: float, kernels,
                 inner: InnerSolverConfig | None = None, name: str | None = None):
        super().__init__(prob, wp, rho, name)
        if isinstance(kernels, BregmanKernel):
            kernels = [kernels] * prob.n_nodes
        kernels = list(kernels)
        if len(kernels) != prob.n_nodes:
            raise ConfigurationError(f"{len(kernels)} kernels for {prob.n_nodes} nodes")
        self.kernels = kernels
        self.inner = inner or InnerSolverConfig()
        self.static = all(k.time_invariant(f) for k, f in zip(kernels, prob.smooth))
        self._static_models = None
        if self.static:
            Z = np.zeros(prob.shape)
            models = self._models(Z)
            if all(m.Q is not None for m in models):
                Q = np.stack([m.Q for m in models])
                ev = np.linalg.eigvalsh(Q)
                self._static_models = (Q, np.stack([m.ell for m in models]), (ev[:, 0], ev[:, -1]))

    def _models(self, X):
        return [k.model(f, x) for k, f, x in zip(self.kernels, self.prob.smooth, X)]

    @property
    def A_constant(self):
        return self._static_models is not None

    def A_matrix(self, k=0, X=None):
        X = np.zeros(self.shape) if X is None else X
        return bregman_A(self.kernels, self.prob.smooth, self.wp, self.rho, X)

    def communication_cost(self):
        return 1.0

    def linear_terms(self, s: AmmState, models=None):
        """c^k for every node, plus stacked kernel curvature when quadratic."""
        X = s.x
        G = self.prob.grad(X)
        PX = self.wp.P @ X
        if self._static_models is not None:
            Q, ell, eig = self._static_models
            gpsi = np.einsum("nij,nj->ni", Q, X) + ell
            return s.q - gpsi + G + self.rho * PX, (Q, ell, eig)
        models = models or self._models(X)
        gpsi = np.stack([m.grad(x) for m, x in zip(models, X)])
        c = s.q - gpsi + G + self.rho * PX
        if all(m.Q is not None for m in models):
            return c, (np.stack([m.Q for m in models]), np.stack([m.ell for m in models]), None)
        return c, models

    def step(self, s: AmmState) -> AmmState:
        c, curv = self.linear_terms(s)
        if isinstance(curv, tuple):
            Q, ell, eig = curv
            r = solve_batched(Q, c + ell, self.prob.stacked_nonsmooth, self.inner, X0=s.x, eig=eig)
            X, res = r.X, float(r.residuals.max())
        else:
            rows, rs = [], []
            for i, (m, h) in enumerate(zip(curv, self.prob.nonsmooth)):
                out = solve_subproblem(Subproblem(m, h, c[i]), self.inner, x0=s.x[i])
                if not out.converged and self.inner.raise_on_fail:
                    raise InnerSolverError("DAMM subproblem did not converge", out.residual, i + 1)
                rows.append(out.x)
                rs.append(out.residual)
            X, res = np.stack(rows), max(rs)
        q = s.q + self.rho * (self.wp.P_tilde @ X)
        return AmmState(X, q, s.k + 1, inner_residual=res)

    # ------------------------------------------------------------------ per-node program

    def program(self) -> NodeProgram:
        P, Pt, rho = self.wp.P, self.wp.P_tilde, self.rho
        prob, kernels, inner = self.prob, self.kernels, self.inner

        def primal(i, view):
            x_i, q_i = view.own("x"), view.own("q")
            f = prob.smooth[i]
            m = kernels[i].model(f, x_i)
            c = q_i - m.grad(x_i) + f.grad(x_i) + rho * weighted_sum(view, "x", P[i], i)
            out = solve_subproblem(Subproblem(m, prob.nonsmooth[i], c), inner, x0=x_i)
            if not out.converged and inner.raise_on_fail:
                raise InnerSolverError("DAMM subproblem did not converge", out.residual, i + 1)
            return {"x": out.x}

        def dual(i, view):
            return {"q": view.own("q") + rho * weighted_sum(view, "x", Pt[i], i)}

        return NodeProgram(
            init_phases=(Phase("share x^0", lambda i, v: {}, ("x",)),),
            round_phases=(Phase("primal", primal, ("x",)), Phase("dual", dual, ())),
        )
