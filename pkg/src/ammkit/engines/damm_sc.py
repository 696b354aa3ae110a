"""DAMM-SC: smooth problems with a constant conjugate generator γ."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..graph_topology import WeightPair
from ..objectives import NetworkProblem
from ..surrogates import ConjugateGenerator, conjugate_A
from .base import AmmState, Engine, NodeProgram, Phase, weighted_sum


class DammScEngine(Engine):
    """x^{k+1} = ∇γ(y^k − ∇f(x^k) − q^k), y^{k+1} = y^k − ∇f(x^k) − q^k − ρHx^{k+1},
    q^{k+1} = q^k + ρH̃x^{k+1}, with y^k = ∇φ(x^k) maintained from y^0 = z̃ − ρHx^0.

    With a separable generator the exchange of y − ∇f − q is unnecessary and
    each node broadcasts only x per round.
    """

    kind = "damm_sc"
    distributed = True

    def __init__(self, prob: NetworkProblem, wp: WeightPair, rho: float, gen: ConjugateGenerator,
                 name: str | None = None):
        super().__init__(prob, wp, rho, name)
        prob.require_smooth_only("DAMM-SC")
        self.gen = gen

    @property
    def A_constant(self):
        return bool(getattr(self.gen, "is_quadratic", False))

    def A_matrix(self, k=0, X=None):
        return conjugate_A(self.gen, self.wp, self.rho)

    def communication_cost(self):
        return 1.0 if self.gen.separable else 2.0

    def init_state(self, x0=None, q0=None, z_tilde=None) -> AmmState:
        """Start from z̃ (x^0 = ∇γ(z̃)); an explicit x^0 is mapped through (∇γ)⁻¹."""
        if z_tilde is not None and x0 is not None:
            raise ConfigurationError("give either z̃ or x^0, not both")
        if x0 is not None:
            z_tilde = self.gen.inverse_grad(self.initial_x(x0))
        z = np.zeros(self.shape) if z_tilde is None else np.array(z_tilde, dtype=float)
        x = self.gen.grad(z)
        q = self.initial_q(x, q0)
        y = z - self.rho * (self.wp.P @ x)
        return AmmState(x, q, 0, y=y)

    def node_init(self, x0=None, q0=None, z_tilde=None) -> dict:
        if z_tilde is None:
            z_tilde = self.gen.inverse_grad(self.initial_x(x0)) if x0 is not None else np.zeros(self.shape)
        s = self.init_state(None, q0, z_tilde=z_tilde)
        return {"z_tilde": np.array(z_tilde, dtype=float), "q": s.q}

    def step(self, s: AmmState) -> AmmState:
        w = s.y - self.prob.grad(s.x) - s.q
        x = self.gen.grad(w)
        y = w - self.rho * (self.wp.P @ x)
        q = s.q + self.rho * (self.wp.P_tilde @ x)
        return AmmState(x, q, s.k + 1, y=y)

    def program(self) -> NodeProgram:
        P, Pt, rho, gen, prob = self.wp.P, self.wp.P_tilde, self.rho, self.gen, self.prob
        share = () if gen.separable else ("w",)

        def x0(i, view):
            return {"x": gen.grad_block(i, lambda j: view.read("z_tilde", j))}

        def y0(i, view):
            y = view.own("z_tilde") - rho * weighted_sum(view, "x", P[i], i)
            return {"y": y, "w": y - prob.smooth[i].grad(view.own("x")) - view.own("q")}

        def primal(i, view):
            return {"x": gen.grad_block(i, lambda j: view.read("w", j))}

        def dual(i, view):
            y = view.own("w") - rho * weighted_sum(view, "x", P[i], i)
            q = view.own("q") + rho * weighted_sum(view, "x", Pt[i], i)
            return {"y": y, "q": q, "w": y - prob.smooth[i].grad(view.own("x")) - q}

        return NodeProgram(
            init_phases=(
                Phase("share z̃", lambda i, v: {}, () if gen.separable else ("z_tilde",)),
                Phase("x^0", x0, ("x",)),
                Phase("y^0", y0, share),
            ),
            round_phases=(Phase("primal", primal, ("x",)), Phase("dual", dual, share)),
            init_keys=("z_tilde", "q"),
        )
