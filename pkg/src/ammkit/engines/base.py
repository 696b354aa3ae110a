"""Shared state, engine interface and per-node program description."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..errors import ConfigurationError
from ..graph_topology import WeightPair, psd_pinv_sqrt
from ..objectives import NetworkProblem

SUM_TOL = 1e-10


@dataclass
class AmmState:
    """Stacked iterates, each of shape (N, d).

    ``y`` is carried by DAMM-SC, ``z`` by DAMM-SQ and the split variant, and
    ``v`` by the reference engine when run in its square-root dual form.
    """

    x: np.ndarray
    q: np.ndarray
    k: int = 0
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    v: np.ndarray | None = None
    inner_residual: float = 0.0

    def copy(self) -> "AmmState":
        c = lambda a: None if a is None else a.copy()  # noqa: E731
        return replace(self, x=self.x.copy(), q=self.q.copy(), y=c(self.y), z=c(self.z), v=c(self.v))


def check_dual_sum(q: np.ndarray, what: str = "q^0") -> None:
    s = np.abs(q.sum(axis=0)).max() if q.size else 0.0
    if s > SUM_TOL * max(1.0, np.abs(q).max()):
        raise ConfigurationError(f"{what} must sum to zero over nodes (max |Σ q_i| = {s:.3g})")


@dataclass(frozen=True)
class Phase:
    """One synchronous compute step of every node.

    ``compute(i, view)`` returns a dict of updated local entries; after all
    nodes computed, updates are committed and the entries named in ``send``
    are broadcast to neighbors.
    """

    name: str
    compute: Callable
    send: tuple = ()


@dataclass(frozen=True)
class NodeProgram:
    init_phases: tuple
    round_phases: tuple
    init_keys: tuple = ("x", "q")
    tags: dict = field(default_factory=dict)


class Engine:
    """Common interface.

    Subclasses implement :meth:`step` (whole-network, vectorized) and, for
    distributed engines, :meth:`program` (per-node phases for the message
    passing harness).
    """

    kind = "abstract"
    distributed = False

    def __init__(self, prob: NetworkProblem, wp: WeightPair, rho: float, name: str | None = None):
        if not rho > 0:
            raise ConfigurationError("ρ must be positive")
        if wp.n != prob.n_nodes:
            raise ConfigurationError(f"weight matrices are {wp.n}×{wp.n} but the problem has {prob.n_nodes} nodes")
        self.prob = prob
        self.wp = wp
        self.rho = float(rho)
        self.name = name or self.kind
        self.default_q0 = None
        self.default_x0 = None

    # ------------------------------------------------------------------ state

    @property
    def shape(self):
        return self.prob.shape

    def initial_x(self, x0=None) -> np.ndarray:
        if x0 is None:
            x0 = self.default_x0
        if x0 is None:
            return np.zeros(self.shape)
        x0 = np.array(x0, dtype=float)
        if x0.ndim == 1:
            x0 = np.tile(x0, (self.shape[0], 1))
        if x0.shape != self.shape:
            raise ConfigurationError(f"x^0 has shape {x0.shape}, expected {self.shape}")
        return x0

    def initial_q(self, x0: np.ndarray, q0=None) -> np.ndarray:
        if q0 is None and self.default_q0 is not None:
            q0 = self.default_q0(x0) if callable(self.default_q0) else self.default_q0
        q0 = np.zeros(self.shape) if q0 is None else np.array(q0, dtype=float)
        if q0.shape != self.shape:
            raise ConfigurationError(f"q^0 has shape {q0.shape}, expected {self.shape}")
        check_dual_sum(q0)
        return q0

    def init_state(self, x0=None, q0=None) -> AmmState:
        x = self.initial_x(x0)
        return AmmState(x, self.initial_q(x, q0))

    def node_init(self, x0=None, q0=None, **kw) -> dict:
        """Stacked initial values of the keys each node starts with."""
        s = self.init_state(x0, q0, **kw)
        return {"x": s.x, "q": s.q}

    def step(self, s: AmmState) -> AmmState:
        raise NotImplementedError

    def run(self, s: AmmState, iters: int) -> list:
        out = [s]
        for _ in range(iters):
            s = self.step(s)
            out.append(s)
        return out

    # ------------------------------------------------------------------ analysis hooks

    @property
    def P_tilde(self) -> np.ndarray:
        return self.wp.P_tilde

    @property
    def P(self) -> np.ndarray:
        return self.wp.P

    def A_matrix(self, k: int = 0, X=None) -> np.ndarray | None:
        """Dense A^k of the equivalent quadratic surrogate, when available."""
        return None

    @property
    def A_constant(self) -> bool:
        return False

    def communication_cost(self) -> float:
        """d-vectors broadcast per node per round."""
        return 1.0

    def program(self) -> NodeProgram:
        raise NotImplementedError(f"{self.name} has no per-node program")

    def v_from_q(self, q: np.ndarray) -> np.ndarray:
        """v = (H̃^{1/2})^† q; valid because q stays in the range of H̃^{1/2}."""
        if not hasattr(self, "_pinv_sqrt"):
            self._pinv_sqrt = psd_pinv_sqrt(self.P_tilde)
        return self._pinv_sqrt @ q

    def describe(self) -> dict:
        return {"engine": self.kind, "name": self.name, "rho": self.rho}


def weighted_sum(view, key: str, row: np.ndarray, i: int) -> np.ndarray:
    """Σ_j row[j] · (key of node j) over the nonzero pattern of ``row``, read via the mailbox."""
    out = None
    for j in np.flatnonzero(row):
        term = row[j] * view.read(key, int(j))
        out = term if out is None else out + term
    return out if out is not None else np.zeros_like(view.own(key))
