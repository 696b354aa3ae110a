"""Centralized matrix-form engine and the two-step split variant.

Both materialize Nd×Nd matrices and serve as test oracles and hosts for
presets whose surrogate couples more than one hop.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, InnerSolverError
from ..graph_topology import WeightPair, psd_sqrt
from ..local_solver import InnerSolverConfig, _apg, solve_batched
from ..objectives import NetworkProblem
from ..surrogates import QuadraticSurrogate
from .base import AmmState, Engine

DENSE_LIMIT = 2000


def _diagonal_blocks(K, n, d):
    """(N, d, d) diagonal blocks of K when K is block diagonal, else None."""
    Kb = K.reshape(n, d, n, d).transpose(0, 2, 1, 3)
    idx = np.arange(n)
    diag = Kb[idx, idx].copy()
    off = Kb.copy()
    off[idx, idx] = 0.0
    return diag if np.abs(off).max(initial=0.0) <= 1e-14 * max(1.0, np.abs(K).max()) else None


class ReferenceEngine(Engine):
    """x^{k+1} = argmin u^k(𝐱) + h(𝐱) + (ρ/2)‖𝐱‖²_H + ⟨𝐪^k, 𝐱⟩, q^{k+1} = q^k + ρH̃x^{k+1}.

    u^k(𝐱) = ⟨∇f(𝐱^k), 𝐱⟩ + ½‖𝐱 − 𝐱^k‖²_{A^k} with A^k from ``surrogate``.

    Parameters
    ----------
    track_v : bool
        Also carry v with q = H̃^{1/2}v (square-root dual form).
    comm_cost : float
        Declared d-vectors per node per round of the algorithm this engine hosts.
    """

    kind = "reference"
    distributed = False

    def __init__(self, prob: NetworkProblem, wp: WeightPair, rho: float, surrogate: QuadraticSurrogate,
                 inner: InnerSolverConfig | None = None, track_v: bool = False, comm_cost: float = 1.0,
                 name: str | None = None):
        super().__init__(prob, wp, rho, name)
        n, d = prob.shape
        if n * d > DENSE_LIMIT:
            raise ConfigurationError(f"reference engine limited to N·d ≤ {DENSE_LIMIT} (got {n * d})")
        self.surrogate = surrogate
        self.inner = inner or InnerSolverConfig(tol=1e-11, max_iters=100000)
        self.track_v = track_v
        self._comm = float(comm_cost)
        self.H = wp.H(d)
        self.bypass = n == 1
        self._cache = None
        if track_v:
            self._Ht_sqrt = psd_sqrt(wp.P_tilde)

    # ------------------------------------------------------------------

    def A_matrix(self, k=0, X=None):
        return self.surrogate.matrix(k, np.zeros(self.shape) if X is None else X)

    @property
    def A_constant(self):
        return self.surrogate.constant

    def communication_cost(self):
        return self._comm

    def init_state(self, x0=None, q0=None, v0=None):
        s = super().init_state(x0, q0)
        if self.track_v:
            s.v = self.v_from_q(s.q) if v0 is None else np.array(v0, dtype=float)
            if np.abs(self._Ht_sqrt @ s.v - s.q).max() > 1e-8 * max(1.0, np.abs(s.q).max()):
                raise ConfigurationError("q^0 must equal H̃^{1/2} v^0")
        return s

    def _system(self, k, X):
        if self.surrogate.constant and self._cache is not None:
            return self._cache
        A = self.surrogate.matrix(k, X)
        K = A + self.rho * self.H
        K = 0.5 * (K + K.T)
        ev = np.linalg.eigvalsh(K)
        if ev[0] <= 0:
            raise ConfigurationError(f"A^k + ρH is not positive definite (min eigenvalue {ev[0]:.3g})")
        out = (A, K, float(ev[0]), float(ev[-1]), _diagonal_blocks(K, *self.shape))
        if self.surrogate.constant:
            self._cache = out
        return out

    def primal(self, s: AmmState):
        """Return (x^{k+1}, inner residual)."""
        n, d = self.shape
        A, K, mu, L, blocks = self._system(s.k, s.x)
        x = s.x.reshape(-1)
        b = self.prob.grad(s.x).reshape(-1) - A @ x + s.q.reshape(-1)
        if self.prob.h_is_zero:
            return np.linalg.solve(K, -b).reshape(n, d), 0.0
        if blocks is not None:
            # separable primal step: solve all node subproblems at once
            r = solve_batched(blocks, b.reshape(n, d), self.prob.stacked_nonsmooth, self.inner, X0=s.x)
            if self.inner.raise_on_fail and r.residuals.max() > self.inner.tol:
                raise InnerSolverError("reference primal step did not converge", float(r.residuals.max()))
            return r.X, float(r.residuals.max())
        prox = lambda t, v: self.prob.prox(t, v.reshape(n, d)).reshape(-1)  # noqa: E731
        xs, res, _, ok = _apg(lambda z: K @ z + b, prox, L, mu, x.copy(), self.inner)
        if not ok and self.inner.raise_on_fail:
            raise InnerSolverError("reference primal step did not converge", res)
        return xs.reshape(n, d), res

    def step(self, s: AmmState) -> AmmState:
        x, res = self.primal(s)
        if self.bypass:
            q = s.q
        else:
            q = s.q + self.rho * (self.wp.P_tilde @ x)
        out = AmmState(x, q, s.k + 1, inner_residual=res)
        if s.v is not None:
            out.v = s.v + self.rho * (self._Ht_sqrt @ x)
        return out


class SplitProxEngine(Engine):
    """Two sequential primal minimizations.

    z^{k+1} = argmin u^k(z) + (ρ/2)‖z‖²_H + ⟨q^k, z⟩,
    x^{k+1} = prox_{h/ρ}(z^{k+1}),
    q^{k+1} = q^k + ρH̃z^{k+1}, with q^0 = 0.
    """

    kind = "split_prox"
    distributed = False

    def __init__(self, prob: NetworkProblem, wp: WeightPair, rho: float, surrogate: QuadraticSurrogate,
                 comm_cost: float = 1.0, name: str | None = None):
        super().__init__(prob, wp, rho, name)
        n, d = prob.shape
        if n * d > DENSE_LIMIT:
            raise ConfigurationError(f"split engine limited to N·d ≤ {DENSE_LIMIT} (got {n * d})")
        self.surrogate = surrogate
        self.H = wp.H(d)
        self._comm = float(comm_cost)

    def A_matrix(self, k=0, X=None):
        return self.surrogate.matrix(k, np.zeros(self.shape) if X is None else X)

    @property
    def A_constant(self):
        return self.surrogate.constant

    def communication_cost(self):
        return self._comm

    def init_state(self, x0=None, q0=None):
        s = super().init_state(x0, q0)
        if np.abs(s.q).max() > 0:
            raise ConfigurationError("the split variant starts from q^0 = 0")
        s.z = s.x.copy()
        return s

    def step(self, s: AmmState) -> AmmState:
        n, d = self.shape
        A = self.surrogate.matrix(s.k, s.x)
        K = A + self.rho * self.H
        x = s.x.reshape(-1)
        rhs = A @ x - self.prob.grad(s.x).reshape(-1) - s.q.reshape(-1)
        z = np.linalg.solve(K, rhs).reshape(n, d)
        xn = self.prob.prox(1.0 / self.rho, z)
        q = s.q + self.rho * (self.wp.P_tilde @ z)
        return AmmState(xn, q, s.k + 1, z=z)
