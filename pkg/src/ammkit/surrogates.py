"""Surrogate families for the primal step and their validators.

* Bregman kernels ψ_i^k for DAMM: u^k(𝐱) = D_φ(𝐱, 𝐱^k) + ⟨∇f(𝐱^k), 𝐱⟩ with
  φ = Σ ψ_i − (ρ/2)‖·‖²_H.
* Conjugate generators γ for DAMM-SC: x^{k+1} = ∇γ(y^k − ∇f(x^k) − q^k).
* Neighbor-sparse update matrices G^k for DAMM-SQ: x^{k+1} = x^k − G^k z^k.
* Dense quadratic models A^k for the reference engine:
  u^k(𝐱) = ⟨∇f(𝐱^k), 𝐱⟩ + ½‖𝐱 − 𝐱^k‖²_{A^k}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import block_diag

from .errors import ConfigurationError, InvalidMatrixError
from .graph_topology import Topology, WeightPair, lambda_max, lambda_max_upper_bound
from .objectives import QuadraticSmooth, SmoothLocal
from .validation import EIG_TOL, ValidationReport, max_eig, min_eig


# ====================================================================== Bregman kernels


@dataclass
class KernelModel:
    """ψ_i^k at a fixed node and iteration.

    For quadratic kernels ψ(x) = ½xᵀQx + ellᵀx (up to a constant) and ``Q`` is
    set; otherwise only ``grad`` is available.
    """

    grad: Callable[[np.ndarray], np.ndarray]
    mu: float
    L: float
    Q: np.ndarray | None = None
    ell: np.ndarray | None = None

    @property
    def is_quadratic(self) -> bool:
        return self.Q is not None


class BregmanKernel:
    """Per-node kernel ψ_i^k."""

    kind = "abstract"

    def model(self, f: SmoothLocal, x_k: np.ndarray) -> KernelModel:
        raise NotImplementedError

    def modulus_bounds(self, f: SmoothLocal) -> tuple:
        """(strong-convexity lower bound, gradient-Lipschitz upper bound)."""
        raise NotImplementedError

    def time_invariant(self, f: SmoothLocal) -> bool:
        return True


@dataclass(frozen=True)
class ScaledIdentityKernel(BregmanKernel):
    """ψ(x) = (ε/2)‖x‖²."""

    eps: float
    kind = "scaled_identity"

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError("scaled_identity kernel needs ε > 0")

    def model(self, f, x_k):
        d = f.dim
        e = self.eps
        return KernelModel(lambda x: e * x, e, e, e * np.eye(d), np.zeros(d))

    def modulus_bounds(self, f):
        return (self.eps, self.eps)


@dataclass(frozen=True)
class ProximalKernel(BregmanKernel):
    """ψ^k(x) = r(x − x_i^k) + (ε/2)‖x‖² with r smooth convex."""

    r: SmoothLocal
    eps: float
    kind = "proximal"

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError("proximal kernel needs ε > 0")

    def model(self, f, x_k):
        r, e = self.r, self.eps
        x_k = np.array(x_k, dtype=float)
        grad = lambda x: r.grad(x - x_k) + e * x  # noqa: E731
        if r.is_quadratic:
            Q = r.hessian(x_k) + e * np.eye(f.dim)
            return KernelModel(grad, e, r.M + e, Q, r.grad(-x_k))
        return KernelModel(grad, e, r.M + e)

    def modulus_bounds(self, f):
        return (self.eps, self.r.M + self.eps)

    def time_invariant(self, f):
        return False


@dataclass(frozen=True)
class HessianPlusKernel(BregmanKernel):
    """ψ^k(x) = ½xᵀ(∇²f_i(x_i^k) + εI)x."""

    eps: float
    kind = "hessian_plus"

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError("hessian_plus kernel needs ε > 0")

    def model(self, f, x_k):
        Q = f.hessian(x_k) + self.eps * np.eye(f.dim)
        ev = np.linalg.eigvalsh(Q)
        return KernelModel(lambda x: Q @ x, float(ev[0]), float(ev[-1]), Q, np.zeros(f.dim))

    def modulus_bounds(self, f):
        return (self.eps, f.M + self.eps)

    def time_invariant(self, f):
        return f.is_quadratic


@dataclass(frozen=True, eq=False)
class DataQuadraticKernel(BregmanKernel):
    """ψ(x) = ½xᵀQx with a fixed positive definite Q."""

    Q: np.ndarray
    kind = "data_quadratic"
    _ev: tuple = field(init=False, repr=False)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        Q = 0.5 * (Q + Q.T)
        ev = np.linalg.eigvalsh(Q)
        if ev[0] <= 0:
            raise ConfigurationError(f"data_quadratic kernel needs Q ≻ 0 (min eigenvalue {ev[0]:.3g})")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "_ev", (float(ev[0]), float(ev[-1])))

    def model(self, f, x_k):
        Q = self.Q
        return KernelModel(lambda x: Q @ x, self._ev[0], self._ev[1], Q, np.zeros(Q.shape[0]))

    def modulus_bounds(self, f):
        return self._ev


def varpi_kernel(f: SmoothLocal, eps: float) -> DataQuadraticKernel:
    """ϖ_i = ½‖·‖²_{B_iᵀB_i + εI} for a least-squares term f_i = ½‖B_i x − b_i‖²."""
    if not isinstance(f, QuadraticSmooth):
        raise ConfigurationError("the data-quadratic kernel needs least-squares local terms")
    return DataQuadraticKernel(f.hessian() + eps * np.eye(f.dim))


def bregman_gradient(kernel: BregmanKernel, f: SmoothLocal, x, x_k=None) -> np.ndarray:
    """∇ψ_i^k(x); the anchor x_k defaults to x."""
    x = np.asarray(x, dtype=float)
    return kernel.model(f, x if x_k is None else x_k).grad(x)


def bregman_subproblem_terms(kernel: BregmanKernel, f: SmoothLocal, x_k):
    """(curvature model of ψ_i^k, ∇ψ_i^k(x_i^k))."""
    m = kernel.model(f, x_k)
    return m, m.grad(np.asarray(x_k, dtype=float))


def _lambda_for_check(wp: WeightPair, bound: str) -> float:
    if bound == "exact":
        return lambda_max(wp.P)
    if bound == "neighbor":
        return lambda_max_upper_bound(wp)
    raise ValueError("bound must be 'exact' or 'neighbor'")


def validate_bregman(kernels, wp: WeightPair, rho: float, smooth=None, sample_points=None,
                     bound: str = "exact", tol: float = EIG_TOL) -> ValidationReport:
    """Check kernel moduli and the separable-sum convexity of φ = Σψ_i − (ρ/2)‖·‖²_H.

    Parameters
    ----------
    kernels : list of BregmanKernel
    smooth : list of SmoothLocal, optional
        Local terms; needed by Hessian-based kernels. Defaults to zero terms.
    sample_points : list of (N, d) arrays, optional
        Anchors at which time-varying quadratic kernels are evaluated.
    bound : {"exact", "neighbor"}
        λ_max(P) used by the sufficient test.
    """
    rep = ValidationReport("Bregman kernels")
    n = wp.n
    if len(kernels) != n:
        rep.add("kernel count", False, f"{len(kernels)} kernels for {n} nodes")
        return rep
    if smooth is None:
        raise ConfigurationError("validate_bregman needs the local smooth terms")
    d = smooth[0].dim
    mods = np.array([k.modulus_bounds(f) for k, f in zip(kernels, smooth)])
    rep.add("kernel moduli positive", bool(np.all(mods[:, 0] > 0)), f"min modulus = {mods[:, 0].min():.3g}")
    lam = _lambda_for_check(wp, bound)
    need = rho * lam
    rep.add("sufficient: modulus ≥ ρ·λ_max(P)", bool(mods[:, 0].min() >= need - tol),
            f"min modulus {mods[:, 0].min():.6g} vs ρλ_max = {need:.6g} ({bound})")
    H = wp.H(d)
    points = sample_points if sample_points is not None else [np.zeros((n, d))]
    quad = True
    worst = np.inf
    for X in points:
        blocks = []
        for i, (k, f) in enumerate(zip(kernels, smooth)):
            m = k.model(f, X[i])
            if m.Q is None:
                quad = False
                blocks.append(m.mu * np.eye(d))
            else:
                blocks.append(m.Q)
        worst = min(worst, min_eig(block_diag(*blocks) - rho * H))
    label = "exact" if quad else "bound-based"
    rep.add("blockdiag(∇²ψ) − ρH ⪰ O", worst >= -tol, f"min eigenvalue = {worst:.3g} ({label})")
    return rep


def bregman_A(kernels, smooth, wp: WeightPair, rho: float, X) -> np.ndarray:
    """Dense A^k = blockdiag(∇²ψ_i^k) − ρH for quadratic kernels anchored at X = 𝐱^k.

    A single kernel instead of a list is used at every node.
    """
    d = smooth[0].dim
    if isinstance(kernels, BregmanKernel):
        kernels = [kernels] * len(smooth)
    blocks = []
    for i, (k, f) in enumerate(zip(kernels, smooth)):
        m = k.model(f, X[i])
        if m.Q is None:
            raise ConfigurationError(f"kernel at node {i + 1} is not quadratic; no dense lift")
        blocks.append(m.Q)
    return block_diag(*blocks) - rho * wp.H(d)


# ====================================================================== conjugate generators


class ConjugateGenerator:
    """Strongly convex γ with blockwise-local gradient."""

    kind = "abstract"
    separable = False

    def grad(self, W: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_block(self, i: int, read) -> np.ndarray:
        """Block i of ∇γ, reading other blocks w_j only through ``read(j)``."""
        raise NotImplementedError

    def bounds(self) -> tuple:
        """(γ̲, γ̄)."""
        raise NotImplementedError

    def hessian_dense(self, W=None) -> np.ndarray:
        raise NotImplementedError

    def inverse_grad(self, X: np.ndarray) -> np.ndarray:
        """(∇γ)⁻¹(X) = ∇γ⋆(X) for quadratic generators."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class SeparableGenerator(ConjugateGenerator):
    """γ(w) = Σ_i g_i(w_i) + (ε/2)‖w‖²; block i of ∇γ uses w_i only."""

    g: tuple
    eps: float
    kind = "separable_smooth"
    separable = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError("separable generator needs ε > 0")
        object.__setattr__(self, "g", tuple(self.g))

    @property
    def dim(self):
        return self.g[0].dim

    def grad(self, W):
        return np.stack([gi.grad(w) + self.eps * w for gi, w in zip(self.g, W)])

    def grad_block(self, i, read):
        w = read(i)
        return self.g[i].grad(w) + self.eps * w

    def bounds(self):
        return (self.eps, max(gi.M for gi in self.g) + self.eps)

    def support(self, i):
        return (i,)

    def hessian_dense(self, W=None):
        d = self.dim
        W = np.zeros((len(self.g), d)) if W is None else W
        return block_diag(*[gi.hessian(w) + self.eps * np.eye(d) for gi, w in zip(self.g, W)])

    def inverse_grad(self, X):
        if not all(gi.is_quadratic for gi in self.g):
            raise ConfigurationError("inverse gradient available for quadratic g_i only")
        out = []
        for gi, x in zip(self.g, X):
            S = gi.hessian(x) + self.eps * np.eye(self.dim)
            out.append(np.linalg.solve(S, x - gi.grad(np.zeros(self.dim))))
        return np.stack(out)

    @property
    def is_quadratic(self):
        return all(gi.is_quadratic for gi in self.g)


@dataclass(frozen=True, eq=False)
class QuadraticGenerator(ConjugateGenerator):
    """γ(w) = ½wᵀGw with G symmetric positive definite and neighbor-sparse.

    ``G`` is stored as blocks of shape (N, N, d, d).
    """

    G: np.ndarray
    kind = "quadratic"

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        if G.ndim != 4 or G.shape[0] != G.shape[1] or G.shape[2] != G.shape[3]:
            raise InvalidMatrixError("quadratic generator expects blocks of shape (N, N, d, d)")
        object.__setattr__(self, "G", G)

    @classmethod
    def from_dense(cls, G, n, d):
        return cls(dense_to_blocks(G, n, d))

    @classmethod
    def from_scalar(cls, Gs, d):
        Gs = np.asarray(Gs, dtype=float)
        return cls(Gs[:, :, None, None] * np.eye(d)[None, None])

    @property
    def dense(self):
        return blocks_to_dense(self.G)

    @property
    def separable(self):
        """True when G is block diagonal, so block i of ∇γ needs w_i only."""
        return all(self.support(i) == (i,) for i in range(self.G.shape[0]))

    def grad(self, W):
        return np.einsum("ijab,jb->ia", self.G, W)

    def support(self, i):
        return tuple(int(j) for j in np.flatnonzero(np.abs(self.G[i]).reshape(self.G.shape[0], -1).max(axis=1) > 0))

    def grad_block(self, i, read):
        out = np.zeros(self.G.shape[2])
        for j in self.support(i):
            out += self.G[i, j] @ read(j)
        return out

    def bounds(self):
        ev = np.linalg.eigvalsh(self.dense)
        return (float(ev[0]), float(ev[-1]))

    def hessian_dense(self, W=None):
        return self.dense

    def inverse_grad(self, X):
        n, d = X.shape
        return np.linalg.solve(self.dense, X.reshape(-1)).reshape(n, d)

    @property
    def is_quadratic(self):
        return True


def conjugate_gradient_map(gen: ConjugateGenerator, W) -> np.ndarray:
    """∇γ(w) for stacked w of shape (N, d)."""
    return gen.grad(np.asarray(W, dtype=float))


def _check_block_sparsity(rep, name, Gb, topo):
    if topo is None:
        return
    n = Gb.shape[0]
    nz = np.abs(Gb).reshape(n, n, -1).max(axis=2) > 0
    bad = np.argwhere(nz & ~topo.support())
    detail = ""
    if bad.size:
        i, j = bad[0]
        detail = f"block ({i + 1},{j + 1}) nonzero but nodes are not neighbors"
    rep.add(f"{name} neighbor-sparse", bad.size == 0, detail)


def validate_conjugate(gen: ConjugateGenerator, wp: WeightPair, rho: float, topo: Topology | None = None,
                       tol: float = EIG_TOL) -> ValidationReport:
    rep = ValidationReport("conjugate generator")
    lo, hi = gen.bounds()
    rep.add("strong convexity γ̲ > 0", lo > 0, f"γ̲ = {lo:.6g}, γ̄ = {hi:.6g}")
    lam = lambda_max(wp.P)
    rep.add("sufficient: I/γ̄ − ρH ⪰ O", 1.0 / hi - rho * lam >= -tol,
            f"1/γ̄ − ρλ_max(P) = {1.0 / hi - rho * lam:.3g}")
    if isinstance(gen, QuadraticGenerator):
        _check_block_sparsity(rep, "G", gen.G, topo)
        if lo > 0:
            d = gen.G.shape[2]
            e = min_eig(np.linalg.inv(gen.dense) - rho * wp.H(d))
            rep.add("exact: G⁻¹ − ρH ⪰ O", e >= -tol, f"min eigenvalue = {e:.3g}")
    elif gen.is_quadratic:
        S = gen.hessian_dense()
        d = gen.dim
        e = min_eig(np.linalg.inv(S) - rho * wp.H(d))
        rep.add("exact: (∇²γ)⁻¹ − ρH ⪰ O", e >= -tol, f"min eigenvalue = {e:.3g}")
    return rep


def conjugate_A(gen: ConjugateGenerator, wp: WeightPair, rho: float) -> np.ndarray:
    """Dense A = (∇²γ)⁻¹ − ρH for quadratic generators."""
    if not gen.is_quadratic:
        raise ConfigurationError("dense lift needs a quadratic generator")
    S = gen.hessian_dense()
    d = S.shape[0] // wp.n
    return np.linalg.inv(S) - rho * wp.H(d)


# ====================================================================== DAMM-SQ matrices


def dense_to_blocks(G, n, d):
    return np.asarray(G, dtype=float).reshape(n, d, n, d).transpose(0, 2, 1, 3).copy()


def blocks_to_dense(Gb):
    n, _, d, _ = Gb.shape
    return Gb.transpose(0, 2, 1, 3).reshape(n * d, n * d)


@dataclass(frozen=True, eq=False)
class UpdateMatrix:
    """Provider of the DAMM-SQ matrices G^k as (N, N, d, d) blocks.

    Parameters
    ----------
    provider : callable (k, X) -> blocks
        Whole-network blocks, used by the vectorized step and validators.
    constant : bool
        True when G^k does not depend on (k, X).
    local : callable (i, k, x_i) -> dict, optional
        Row i of G^k as {j: block}, computed from node-local data only.
    """

    provider: Callable
    constant: bool = False
    label: str = "G"
    local: Callable | None = None

    @classmethod
    def scalar(cls, Gs, d, label="G"):
        """G^k = Gs⊗I_d for a fixed N×N matrix Gs."""
        Gs = np.asarray(Gs, dtype=float)
        blocks = Gs[:, :, None, None] * np.eye(d)[None, None]
        rows = [{int(j): Gs[i, j] * np.eye(d) for j in np.flatnonzero(Gs[i])} for i in range(Gs.shape[0])]
        return cls(lambda k, X: blocks, True, label, lambda i, k, x: rows[i])

    @classmethod
    def fixed_blocks(cls, blocks, label="G"):
        blocks = np.asarray(blocks, dtype=float)
        n = blocks.shape[0]
        nz = np.abs(blocks).reshape(n, n, -1).max(axis=2) > 0
        rows = [{int(j): blocks[i, j] for j in np.flatnonzero(nz[i])} for i in range(n)]
        return cls(lambda k, X: blocks, True, label, lambda i, k, x: rows[i])

    @classmethod
    def block_diagonal(cls, fn, label="G"):
        """G^k = blockdiag(fn(i, k, x_i)) with each fn value of shape (d, d)."""

        def provider(k, X):
            n, d = X.shape
            out = np.zeros((n, n, d, d))
            for i in range(n):
                out[i, i] = fn(i, k, X[i])
            return out

        return cls(provider, False, label, lambda i, k, x: {i: fn(i, k, x)})

    def blocks(self, k, X):
        return self.provider(k, X)

    def dense(self, k, X):
        return blocks_to_dense(self.blocks(k, X))


def validate_update_matrix(G: UpdateMatrix, wp: WeightPair, rho: float, topo: Topology | None,
                           sample_points, bounds: tuple | None = None, tol: float = EIG_TOL) -> ValidationReport:
    """Sparsity, spectral bounds and (G^k)⁻¹ ⪰ ρH at sampled (k, 𝐱^k)."""
    rep = ValidationReport("DAMM-SQ update matrix")
    lo_all, hi_all, worst = np.inf, -np.inf, np.inf
    for k, X in sample_points:
        Gb = G.blocks(k, X)
        d = Gb.shape[2]
        _check_block_sparsity(rep, f"G^{k}", Gb, topo)
        D = blocks_to_dense(Gb)
        asym = float(np.abs(D - D.T).max())
        rep.add(f"G^{k} symmetric", asym <= tol * max(1.0, np.abs(D).max()), f"max asymmetry {asym:.3g}")
        ev = np.linalg.eigvalsh(0.5 * (D + D.T))
        lo_all, hi_all = min(lo_all, ev[0]), max(hi_all, ev[-1])
        if ev[0] > 0:
            worst = min(worst, min_eig(np.linalg.inv(D) - rho * wp.H(d)))
    rep.add("G^k ≻ O", lo_all > 0, f"observed spectrum in [{lo_all:.6g}, {hi_all:.6g}]")
    if bounds is not None:
        g_lo, g_hi = bounds
        rep.add("γ̲I ⪯ G^k ⪯ γ̄I", lo_all >= g_lo - tol and hi_all <= g_hi + tol,
                f"declared [{g_lo:.6g}, {g_hi:.6g}]")
    rep.add("(G^k)⁻¹ − ρH ⪰ O", worst >= -tol, f"min eigenvalue = {worst:.3g}")
    return rep


def update_matrix_A(G: UpdateMatrix, wp: WeightPair, rho: float):
    """Provider of A^k = (G^k)⁻¹ − ρH."""

    def provider(k, X):
        D = G.dense(k, X)
        return np.linalg.inv(D) - rho * wp.H(X.shape[1])

    return provider


# ====================================================================== dense quadratic surrogates


@dataclass(frozen=True, eq=False)
class QuadraticSurrogate:
    """u^k(𝐱) = ⟨∇f(𝐱^k), 𝐱⟩ + ½‖𝐱 − 𝐱^k‖²_{A^k} with A^k from ``provider(k, X)``."""

    provider: Callable
    constant: bool = False
    A_lo: np.ndarray | None = None
    A_hi: np.ndarray | None = None

    @classmethod
    def fixed(cls, A):
        A = np.asarray(A, dtype=float)
        return cls(lambda k, X: A, True, A, A)

    def matrix(self, k, X):
        return self.provider(k, X)

    def bounds(self):
        if self.A_lo is None or self.A_hi is None:
            raise ConfigurationError("surrogate bounds were not declared")
        return SurrogateBounds(self.A_lo, self.A_hi)


@dataclass
class SurrogateBounds:
    """A_ℓ ⪯ ∇²u^k ⪯ A_u with A_a = (A_ℓ + A_u)/2 and Δ = ‖A_u − A_ℓ‖."""

    A_lo: np.ndarray
    A_hi: np.ndarray

    @property
    def A_a(self):
        return 0.5 * (self.A_lo + self.A_hi)

    @property
    def Delta(self):
        return float(np.linalg.norm(self.A_hi - self.A_lo, 2))

    def contains(self, A, tol=EIG_TOL) -> bool:
        return min_eig(A - self.A_lo) >= -tol and min_eig(self.A_hi - A) >= -tol


def hessian_kernel_bounds(smooth, eps, wp: WeightPair, rho: float) -> SurrogateBounds:
    """Bounds for ψ_i^k = ½xᵀ(∇²f_i(x_i^k) + ε_iI)x from the per-node ranges [ε_i, M_i + ε_i].

    Quadratic local terms have a constant Hessian, giving A_ℓ = A_u.
    """
    n = len(smooth)
    d = smooth[0].dim
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (n,))
    H = wp.H(d)
    lo, hi = [], []
    for f, e in zip(smooth, eps):
        if f.is_quadratic:
            S = f.hessian(np.zeros(d)) + e * np.eye(d)
            lo.append(S)
            hi.append(S)
        else:
            lo.append(e * np.eye(d))
            hi.append((f.M + e) * np.eye(d))
    return SurrogateBounds(block_diag(*lo) - rho * H, block_diag(*hi) - rho * H)


def check_anchor_gradient(A_provider, prob, X, k=0) -> float:
    """‖∇u^k(𝐱^k) − ∇f(𝐱^k)‖ for a quadratic model (zero by construction)."""
    A = A_provider(k, X)
    g = prob.grad(X).reshape(-1)
    return float(np.linalg.norm(g + A @ (X.reshape(-1) - X.reshape(-1)) - g))


__all__ = [
    "KernelModel", "BregmanKernel", "ScaledIdentityKernel", "ProximalKernel", "HessianPlusKernel",
    "DataQuadraticKernel", "varpi_kernel", "bregman_gradient", "bregman_subproblem_terms",
    "validate_bregman", "bregman_A", "ConjugateGenerator", "SeparableGenerator", "QuadraticGenerator",
    "conjugate_gradient_map", "validate_conjugate", "conjugate_A", "UpdateMatrix", "validate_update_matrix",
    "update_matrix_A", "QuadraticSurrogate", "SurrogateBounds", "hessian_kernel_bounds",
    "dense_to_blocks", "blocks_to_dense", "max_eig",
]
