"""DAMM-SQ: smooth problems with neighbor-sparse quadratic update matrices G^k."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..graph_topology import WeightPair
from ..objectives import NetworkProblem
from ..surrogates import UpdateMatrix, blocks_to_dense
from .base import AmmState, Engine, NodeProgram, Phase, weighted_sum


class DammSqEngine(Engine):
    """x^{k+1} = x^k − G^k z^k, q^{k+1} = q^k + ρH̃x^{k+1},
    z^{k+1} = ∇f(x^{k+1}) + q^{k+1} + ρHx^{k+1}.
    """

    kind = "damm_sq"
    distributed = True

    def __init__(self, prob: NetworkProblem, wp: WeightPair, rho: float, G: UpdateMatrix,
                 name: str | None = None, check_sparsity: bool = True):
        super().__init__(prob, wp, rho, name)
        prob.require_smooth_only("DAMM-SQ")
        self.G = G
        self.check_sparsity = check_sparsity
        self._support = prob.topo.support()
        self._checked = False

    @property
    def A_constant(self):
        return self.G.constant

    def A_matrix(self, k=0, X=None):
        X = np.zeros(self.shape) if X is None else X
        D = self.G.dense(k, X)
        return np.linalg.inv(D) - self.rho * self.wp.H(self.shape[1])

    def communication_cost(self):
        return 2.0

    def z_of(self, X, q):
        return self.prob.grad(X) + q + self.rho * (self.wp.P @ X)

    def init_state(self, x0=None, q0=None) -> AmmState:
        s = super().init_state(x0, q0)
        s.z = self.z_of(s.x, s.q)
        return s

    def _blocks(self, k, X):
        Gb = self.G.blocks(k, X)
        if self.check_sparsity and not (self.G.constant and self._checked):
            n = Gb.shape[0]
            nz = np.abs(Gb).reshape(n, n, -1).max(axis=2) > 0
            bad = np.argwhere(nz & ~self._support)
            if bad.size:
                i, j = bad[0]
                raise ConfigurationError(f"G^{k} sparsity violation: block ({i + 1},{j + 1}) couples non-neighbors")
            self._checked = True
        return Gb

    def step(self, s: AmmState) -> AmmState:
        Gb = self._blocks(s.k, s.x)
        x = s.x - np.einsum("ijab,jb->ia", Gb, s.z)
        q = s.q + self.rho * (self.wp.P_tilde @ x)
        return AmmState(x, q, s.k + 1, z=self.z_of(x, q))

    def G_dense(self, k, X):
        return blocks_to_dense(self._blocks(k, X))

    def program(self) -> NodeProgram:
        P, Pt, rho, prob, G = self.wp.P, self.wp.P_tilde, self.rho, self.prob, self.G
        if G.local is None:
            raise ConfigurationError("update matrix has no per-node rows; strict mode unavailable")

        def z_local(i, view, x, q):
            return prob.smooth[i].grad(x) + q + rho * weighted_sum(view, "x", P[i], i)

        def z0(i, view):
            return {"z": z_local(i, view, view.own("x"), view.own("q"))}

        def primal(i, view):
            x = view.own("x").copy()
            for j, blk in sorted(G.local(i, view.k, view.own("x")).items()):
                x = x - blk @ view.read("z", j)
            return {"x": x}

        def dual(i, view):
            q = view.own("q") + rho * weighted_sum(view, "x", Pt[i], i)
            return {"q": q, "z": z_local(i, view, view.own("x"), q)}

        return NodeProgram(
            init_phases=(Phase("share x^0", lambda i, v: {}, ("x",)), Phase("z^0", z0, ("z",))),
            round_phases=(Phase("primal", primal, ("x",)), Phase("dual", dual, ("z",))),
        )
