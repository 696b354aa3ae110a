"""Per-node primal subproblems argmin_x ψ(x) + h(x) + ⟨x, c⟩.

Closed forms are used where they exist (scaled-identity kernel with a
prox-friendly h, quadratic kernel with h = 0); otherwise an (accelerated)
proximal gradient method runs until its certified subgradient residual
drops below the tolerance. A batched variant solves all nodes at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InnerSolverError
from .objectives import NonsmoothLocal, StackedNonsmooth
from .surrogates import KernelModel


@dataclass(frozen=True)
class InnerSolverConfig:
    """Inner solver settings.

    Attributes
    ----------
    tol : float
        Bound on the certified subgradient residual.
    max_iters : int
        Iteration cap for the iterative path.
    accelerated : bool
        Use strongly convex momentum; plain proximal gradient otherwise.
    raise_on_fail : bool
        Raise :class:`InnerSolverError` instead of returning a flagged result.
    """

    tol: float = 1e-10
    max_iters: int = 20000
    accelerated: bool = True
    raise_on_fail: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError("inner solver tolerance must be positive")
        if self.max_iters < 1:
            raise ConfigurationError("inner solver max_iters must be at least 1")


@dataclass
class Subproblem:
    """argmin_x ψ(x) + h(x) + ⟨x, linear⟩ with ψ given by a kernel model."""

    model: KernelModel
    h: NonsmoothLocal
    linear: np.ndarray


@dataclass
class SubproblemResult:
    x: np.ndarray
    residual: float
    iters: int
    converged: bool
    method: str


def _scalar_identity(Q, rtol=0.0):
    """Return ε if Q = εI exactly, else None."""
    e = Q[0, 0]
    if np.array_equal(Q, e * np.eye(Q.shape[0])):
        return float(e)
    return None


def _prox_is_exact(h: NonsmoothLocal) -> bool:
    kinds = sorted(p.kind for p in h.elementary())
    return len(kinds) <= 1 or kinds == ["ball", "l1"]


def solve_subproblem(sp: Subproblem, cfg: InnerSolverConfig = InnerSolverConfig(), x0=None,
                     method: str = "auto") -> SubproblemResult:
    """Solve one node's primal subproblem.

    Parameters
    ----------
    method : {"auto", "exact", "iterative"}
        ``auto`` dispatches to a closed form when available.
    """
    m, h = sp.model, sp.h
    c = np.asarray(sp.linear, dtype=float)
    lin = c + (m.ell if m.ell is not None else 0.0)
    d = c.shape[0]
    if method not in ("auto", "exact", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    if method != "iterative" and m.Q is not None:
        eps = _scalar_identity(m.Q)
        if eps is not None and _prox_is_exact(h):
            return SubproblemResult(h.prox(1.0 / eps, -lin / eps), 0.0, 0, True, "prox")
        if h.is_zero:
            return SubproblemResult(np.linalg.solve(m.Q, -lin), 0.0, 0, True, "linear")
    if method == "exact":
        raise ConfigurationError("no closed form for this subproblem")
    x = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
    grad = (lambda z: m.Q @ z + lin) if m.Q is not None else (lambda z: m.grad(z) + c)
    xs, res, it, ok = _apg(grad, lambda t, v: h.prox(t, v), m.L, m.mu, x, cfg)
    if not ok and cfg.raise_on_fail:
        raise InnerSolverError("subproblem did not converge", res)
    return SubproblemResult(xs, res, it, ok, "apg" if cfg.accelerated else "pg")


def _apg(grad, prox, L, mu, x, cfg):
    t = 1.0 / L
    beta = (np.sqrt(L) - np.sqrt(mu)) / (np.sqrt(L) + np.sqrt(mu)) if cfg.accelerated else 0.0
    y = x.copy()
    res = np.inf
    for it in range(1, cfg.max_iters + 1):
        gy = grad(y)
        xn = prox(t, y - t * gy)
        res = float(np.linalg.norm(grad(xn) - gy + (y - xn) / t))
        y = xn + beta * (xn - x)
        x = xn
        if res <= cfg.tol:
            return x, res, it, True
    return x, res, cfg.max_iters, False


def subproblem_objective(sp: Subproblem, x) -> float:
    """ψ(x) + h(x) + ⟨x, c⟩ up to the additive constant of ψ (quadratic models only)."""
    m = sp.model
    if m.Q is None:
        raise ConfigurationError("objective value needs a quadratic kernel model")
    x = np.asarray(x, dtype=float)
    return float(0.5 * x @ m.Q @ x + (m.ell + sp.linear) @ x + sp.h.value(x))


@dataclass
class BatchResult:
    X: np.ndarray
    residuals: np.ndarray
    iters: int
    method: str


def solve_batched(Q: np.ndarray, lin: np.ndarray, stack: StackedNonsmooth, cfg: InnerSolverConfig,
                  X0: np.ndarray | None = None, eig: tuple | None = None, method: str = "auto") -> BatchResult:
    """Solve argmin_x ½xᵀQ_i x + ⟨x, lin_i⟩ + h_i(x) for all nodes at once.

    Parameters
    ----------
    Q : (N, d, d) array
        Positive definite curvature blocks.
    lin : (N, d) array
        Linear terms (kernel offset already included).
    eig : (mu, L) arrays, optional
        Precomputed extreme eigenvalues of each block.
    """
    n, d = lin.shape
    if method != "iterative":
        diag = Q[:, np.arange(d), np.arange(d)]
        eps = diag[:, 0]
        scaled = np.array_equal(Q, eps[:, None, None] * np.eye(d)[None])
        if scaled and all(_prox_is_exact(h) for h in stack.terms):
            return BatchResult(stack.prox(1.0 / eps, -lin / eps[:, None]), np.zeros(n), 0, "prox")
        if stack.all_zero:
            return BatchResult(np.linalg.solve(Q, -lin[..., None])[..., 0], np.zeros(n), 0, "linear")
    if eig is None:
        ev = np.linalg.eigvalsh(Q)
        mu, L = ev[:, 0], ev[:, -1]
    else:
        mu, L = eig
    t = 1.0 / L
    if cfg.accelerated:
        sl, sm = np.sqrt(L), np.sqrt(mu)
        beta = ((sl - sm) / (sl + sm))[:, None]
    else:
        beta = np.zeros((n, 1))
    name = "apg" if cfg.accelerated else "pg"
    X = np.zeros((n, d)) if X0 is None else np.array(X0, dtype=float)
    Y = X.copy()
    tc = t[:, None]
    # gradients are evaluated afresh; a two-term recursion drifts and floors the residual near 1e-12
    gY = np.einsum("nij,nj->ni", Q, Y) + lin
    res = np.full(n, np.inf)
    for it in range(1, cfg.max_iters + 1):
        Xn = stack.prox(t, Y - tc * gY)
        gXn = np.einsum("nij,nj->ni", Q, Xn) + lin
        r = gXn - gY + (Y - Xn) / tc
        res = np.sqrt(np.einsum("ni,ni->n", r, r))
        Y = Xn + beta * (Xn - X)
        gY = np.einsum("nij,nj->ni", Q, Y) + lin
        X = Xn
        if res.max() <= cfg.tol:
            return BatchResult(X, res, it, name)
    if cfg.raise_on_fail:
        node = int(np.argmax(res))
        raise InnerSolverError(f"inner solve at node {node + 1} stalled", float(res[node]), node + 1)
    return BatchResult(X, res, cfg.max_iters, name)


__all__ = ["InnerSolverConfig", "Subproblem", "SubproblemResult", "solve_subproblem", "subproblem_objective",
           "solve_batched", "BatchResult"]
