"""Local objective terms: smooth f_i and nonsmooth h_i, and the network problem.

Smooth terms expose value, gradient, Hessian and the smoothness constant M_i.
Nonsmooth terms expose value and prox. Stacked network iterates have
shape ``(N, d)``; row i is node i's copy x_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InnerSolverError, UnsupportedProblemError
from .graph_topology import Topology

DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_ITERS = 10000


# ====================================================================== smooth terms


class SmoothLocal:
    """Convex M-smooth local function f_i."""

    kind = "abstract"
    dim: int

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def M(self) -> float:
        raise NotImplementedError

    @property
    def is_quadratic(self) -> bool:
        return False


@dataclass(frozen=True)
class ZeroSmooth(SmoothLocal):
    dim: int
    kind = "zero"

    def value(self, x):
        return 0.0

    def grad(self, x):
        return np.zeros(self.dim)

    def hessian(self, x):
        return np.zeros((self.dim, self.dim))

    @property
    def M(self):
        return 0.0

    @property
    def is_quadratic(self):
        return True


@dataclass(frozen=True, eq=False)
class QuadraticSmooth(SmoothLocal):
    """f(x) = ½‖Bx − b‖²."""

    B: np.ndarray
    b: np.ndarray
    _BtB: np.ndarray = field(init=False, repr=False)
    _Btb: np.ndarray = field(init=False, repr=False)
    _M: float = field(init=False, repr=False)
    kind = "quadratic"

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if b.shape[0] != B.shape[0]:
            raise ValueError(f"b has length {b.shape[0]} but B has {B.shape[0]} rows")
        BtB = B.T @ B
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_BtB", BtB)
        object.__setattr__(self, "_Btb", B.T @ b)
        object.__setattr__(self, "_M", float(np.linalg.eigvalsh(BtB)[-1]))

    @property
    def dim(self):
        return self.B.shape[1]

    def value(self, x):
        r = self.B @ x - self.b
        return 0.5 * float(r @ r)

    def grad(self, x):
        return self._BtB @ x - self._Btb

    def hessian(self, x=None):
        return self._BtB

    @property
    def linear(self):
        """Bᵀb, so that ∇f(x) = BᵀBx − Bᵀb."""
        return self._Btb

    @property
    def M(self):
        return self._M

    @property
    def is_quadratic(self):
        return True


@dataclass(frozen=True, eq=False)
class LogisticSmooth(SmoothLocal):
    """f(x) = Σ_j log(1 + exp(−y_j a_jᵀx)) + (l2/2)‖x‖², labels y_j ∈ {−1, +1}."""

    features: np.ndarray
    labels: np.ndarray
    l2: float = 0.0
    _M: float = field(init=False, repr=False)
    kind = "logistic"

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.features, dtype=float))
        y = np.asarray(self.labels, dtype=float).reshape(-1)
        if y.shape[0] != F.shape[0]:
            raise ValueError("labels and features disagree in length")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be ±1")
        object.__setattr__(self, "features", F)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "_M", 0.25 * float(np.linalg.eigvalsh(F.T @ F)[-1]) + self.l2)

    @property
    def dim(self):
        return self.features.shape[1]

    def _margins(self, x):
        return self.labels * (self.features @ x)

    def value(self, x):
        return float(np.sum(np.logaddexp(0.0, -self._margins(x)))) + 0.5 * self.l2 * float(x @ x)

    def grad(self, x):
        s = 0.5 * (1.0 - np.tanh(0.5 * self._margins(x)))  # sigmoid(−margin)
        return -self.features.T @ (self.labels * s) + self.l2 * x

    def hessian(self, x):
        m = self._margins(x)
        w = 0.25 / np.cosh(0.5 * m) ** 2  # σ(m)(1 − σ(m))
        return (self.features.T * w) @ self.features + self.l2 * np.eye(self.dim)

    @property
    def M(self):
        return self._M


# ====================================================================== prox helpers


def soft_threshold(v, t):
    """Componentwise sign(v)·max(|v| − t, 0); ``t`` broadcasts."""
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_ball(v, center, radius):
    """Radial projection onto {x : ‖x − center‖ ≤ radius}; rows are independent."""
    diff = np.asarray(v, dtype=float) - center
    nrm = np.linalg.norm(diff, axis=-1, keepdims=True)
    r = np.asarray(radius, dtype=float)
    if r.ndim and diff.ndim == 2:
        r = r.reshape(-1, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(nrm > r, r / nrm, 1.0)
    return center + diff * scale


def _rows(a, shape):
    a = np.asarray(a, dtype=float)
    return a if a.shape == shape else np.broadcast_to(a, shape)


def prox_l1_ball(V, steps, lam, centers, radii):
    """Exact prox of step·(λ‖·‖₁ + I{‖· − a‖ ≤ r}), row-wise.

    With a multiplier μ ≥ 0 on the ball, the minimizer is
    soft(a + (τ/s)(v − a), λτ) where τ = 1/(1/s + μ) ∈ (0, s]. The distance
    ‖x(τ) − a‖ is continuous, nondecreasing and piecewise of the form
    √(ατ² + β) between the breakpoints where a component enters or leaves the
    soft-threshold dead zone, so the active τ is found by evaluating the
    breakpoints and solving one scalar quadratic.

    Parameters
    ----------
    V : (n, d) array
    steps, lam, radii : (n,) arrays
    centers : (n, d) array
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    n, d = V.shape
    steps, lam, radii = (_rows(a, (n,)) for a in (steps, lam, radii))
    centers = _rows(centers, (n, d))
    X = soft_threshold(V, (lam * steps)[:, None])
    D = X - centers
    outside = np.einsum("ni,ni->n", D, D) > radii * radii
    if not outside.any():
        return X
    v, s, l, a, r = V[outside], steps[outside], lam[outside], centers[outside], radii[outside]
    m = v.shape[0]
    e = (v - a) / s[:, None]
    lc = l[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = a / (lc - e)
        t2 = -a / (lc + e)
    T = np.concatenate([np.zeros((m, 1)), t1, t2, s[:, None]], axis=1)
    mid = T[:, 1:-1]
    bad = ~np.isfinite(mid) | (mid <= 0.0) | (mid >= s[:, None])
    mid[bad] = s[np.nonzero(bad)[0]]
    T.sort(axis=1)
    W = a[:, None, :] + T[:, :, None] * e[:, None, :]
    Xc = soft_threshold(W, (l[:, None] * T)[:, :, None])
    phi = np.linalg.norm(Xc - a[:, None, :], axis=2)
    above = phi > r[:, None]
    above[:, -1] = True
    hi = np.argmax(above, axis=1)
    hi = np.maximum(hi, 1)
    rows = np.arange(m)
    tl, th = T[rows, hi - 1], T[rows, hi]
    tm = 0.5 * (tl + th)
    Wm = a + tm[:, None] * e
    active = np.abs(Wm) > l[:, None] * tm[:, None]
    coef = np.where(active, e - l[:, None] * np.sign(Wm), 0.0)
    alpha = np.sum(coef * coef, axis=1)
    beta = np.sum(np.where(active, 0.0, a * a), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.sqrt(np.maximum(r * r - beta, 0.0) / alpha)
    tau = np.where(alpha > 0, tau, th)
    tau = np.clip(tau, tl, th)
    X[outside] = soft_threshold(a + tau[:, None] * e, (l * tau)[:, None])
    return X


# ====================================================================== nonsmooth terms


class NonsmoothLocal:
    """Proper closed convex local function h_i with a computable prox."""

    kind = "abstract"

    def value(self, x) -> float:
        raise NotImplementedError

    def prox(self, step: float, v: np.ndarray) -> np.ndarray:
        """argmin_x h(x) + ‖x − v‖²/(2·step)."""
        raise NotImplementedError

    def subdifferential_distance(self, x, g, tol: float = 1e-9) -> float:
        """Distance from g to ∂h(x); ``inf`` if x ∉ dom h."""
        raise NotImplementedError

    def elementary(self) -> list:
        """Flattened list of non-zero elementary terms."""
        return [self]

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class ZeroNonsmooth(NonsmoothLocal):
    kind = "zero"

    def value(self, x):
        return 0.0

    def prox(self, step, v):
        return np.array(v, dtype=float)

    def subdifferential_distance(self, x, g, tol=1e-9):
        return float(np.linalg.norm(g))

    def elementary(self):
        return []

    @property
    def is_zero(self):
        return True


@dataclass(frozen=True)
class L1Norm(NonsmoothLocal):
    """h(x) = weight·‖x‖₁."""

    weight: float
    kind = "l1"

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("l1 weight must be nonnegative")
        object.__setattr__(self, "weight", float(self.weight))

    def value(self, x):
        return self.weight * float(np.sum(np.abs(x)))

    def prox(self, step, v):
        return soft_threshold(np.asarray(v, dtype=float), self.weight * step)

    def subdifferential_distance(self, x, g, tol=1e-9):
        x, g = np.asarray(x, float), np.asarray(g, float)
        zero = np.abs(x) <= tol
        r = np.where(zero, np.maximum(np.abs(g) - self.weight, 0.0), g - self.weight * np.sign(x))
        return float(np.linalg.norm(r))

    def elementary(self):
        return [self] if self.weight > 0 else []


@dataclass(frozen=True, eq=False)
class BallIndicator(NonsmoothLocal):
    """Indicator of X = {x : ‖x − center‖ ≤ radius}."""

    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, x, tol=1e-9) -> bool:
        return float(np.linalg.norm(np.asarray(x) - self.center)) <= self.radius * (1 + tol) + tol

    def value(self, x):
        return 0.0 if self.contains(x) else np.inf

    def prox(self, step, v):
        return project_ball(v, self.center, self.radius)

    def _normal(self, x, tol):
        """Unit outward normal if x is on the boundary, None if interior; raises if outside."""
        diff = np.asarray(x, float) - self.center
        nrm = float(np.linalg.norm(diff))
        slack = tol * max(1.0, self.radius)
        if nrm > self.radius + slack:
            return False
        if nrm < self.radius - slack:
            return None
        return diff / nrm

    def subdifferential_distance(self, x, g, tol=1e-9):
        n = self._normal(x, tol)
        g = np.asarray(g, float)
        if n is False:
            return np.inf
        if n is None:
            return float(np.linalg.norm(g))
        t = max(0.0, float(g @ n))
        return float(np.linalg.norm(g - t * n))


@dataclass(frozen=True)
class SumNonsmooth(NonsmoothLocal):
    """h = Σ terms. The prox is exact for (l1 + ball) and iterative otherwise."""

    terms: tuple
    kind = "sum"

    def __post_init__(self):
        flat = []
        for t in self.terms:
            flat.extend(t.terms if isinstance(t, SumNonsmooth) else [t])
        object.__setattr__(self, "terms", tuple(flat))

    def elementary(self):
        out = []
        l1 = [t for t in self.terms if isinstance(t, L1Norm)]
        if l1:
            w = sum(t.weight for t in l1)
            if w > 0:
                out.append(L1Norm(w))
        for t in self.terms:
            if not isinstance(t, (L1Norm, ZeroNonsmooth)):
                out.extend(t.elementary())
        return out

    @property
    def is_zero(self):
        return not self.elementary()

    def value(self, x):
        return float(sum(t.value(x) for t in self.terms))

    def prox(self, step, v):
        parts = self.elementary()
        v = np.asarray(v, dtype=float)
        if not parts:
            return v.copy()
        if len(parts) == 1:
            return parts[0].prox(step, v)
        if len(parts) == 2 and {p.kind for p in parts} == {"l1", "ball"}:
            l1 = parts[0] if parts[0].kind == "l1" else parts[1]
            ball = parts[1] if l1 is parts[0] else parts[0]
            return prox_l1_ball(v[None, :], step, l1.weight, ball.center[None, :], ball.radius)[0]
        return self.prox_dykstra(step, v)

    def prox_dykstra(self, step, v, tol: float = DYKSTRA_TOL, max_iters: int = DYKSTRA_MAX_ITERS):
        """Prox of the sum by Dykstra-type splitting over the elementary proxes.

        Two terms use the sequential Dykstra-like proximal scheme; more terms use
        its parallel (averaged) form, where each term's prox is taken with the
        step multiplied by the number of terms.
        """
        parts = self.elementary() or [ZeroNonsmooth()]
        return dykstra_prox(parts, step, np.asarray(v, dtype=float), tol, max_iters)

    def subdifferential_distance(self, x, g, tol=1e-9):
        parts = self.elementary()
        g = np.asarray(g, float)
        if not parts:
            return float(np.linalg.norm(g))
        balls = [p for p in parts if p.kind == "ball"]
        boxes = [p for p in parts if p.kind == "l1"]
        normals = []
        for b in balls:
            n = b._normal(x, tol)
            if n is False:
                return np.inf
            if n is not None:
                normals.append(n)
        if len(normals) > 1:
            raise NotImplementedError("subdifferential test supports at most one active ball")
        l1 = boxes[0] if boxes else L1Norm(0.0)
        if not normals:
            return l1.subdifferential_distance(x, g, tol)
        return _l1_ray_distance(np.asarray(x, float), g, l1.weight, normals[0], tol)


def _l1_ray_distance(x, g, lam, n, tol):
    """min_{t ≥ 0} dist(g − t·n, ∂(λ‖·‖₁)(x)), exactly.

    The squared distance is a convex piecewise quadratic in t; its pieces
    change where |g_j − t n_j| = λ for coordinates with x_j = 0.
    """
    zero = np.abs(x) <= tol
    sgn = np.sign(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        bps = np.concatenate([(g[zero] - lam) / n[zero], (g[zero] + lam) / n[zero]])
    bps = bps[np.isfinite(bps) & (bps > 0)]
    knots = np.unique(np.concatenate([[0.0], bps]))
    ends = np.append(knots[1:], knots[-1] + 1.0 + abs(float(g @ n)) + lam * np.sqrt(g.size))

    def dist(t):
        u = g - t * n
        r = np.where(zero, np.maximum(np.abs(u) - lam, 0.0), u - lam * sgn)
        return float(np.linalg.norm(r))

    best = min(dist(t) for t in knots)
    for lo, hi in zip(knots, ends):
        tm = 0.5 * (lo + hi)
        u = g - tm * n
        # residual r_j(t) = c_j − t n_j on active pieces
        active = ~zero | (np.abs(u) > lam)
        c = np.where(zero, g - lam * np.sign(u), g - lam * sgn)
        den = float(np.sum(n[active] ** 2))
        if den > 0:
            t = float(np.sum(c[active] * n[active])) / den
            best = min(best, dist(min(max(t, lo), hi)))
    return best


def dykstra_prox(parts, step, v, tol=DYKSTRA_TOL, max_iters=DYKSTRA_MAX_ITERS):
    """Prox of step·Σ parts at v by Dykstra-type splitting."""
    if len(parts) == 1:
        return parts[0].prox(step, v)
    if len(parts) == 2:
        f, g = parts
        x = v.copy()
        p = np.zeros_like(v)
        q = np.zeros_like(v)
        for it in range(max_iters):
            y = g.prox(step, x + p)
            p = x + p - y
            x_new = f.prox(step, y + q)
            q = y + q - x_new
            res = max(float(np.linalg.norm(x_new - x)), float(np.linalg.norm(x_new - y)))
            x = x_new
            if res <= tol:
                return x
        raise InnerSolverError(f"Dykstra splitting stopped at residual {res:.3g}", residual=res)
    m = len(parts)
    x = v.copy()
    z = [v.copy() for _ in range(m)]
    for it in range(max_iters):
        p = [parts[i].prox(m * step, z[i]) for i in range(m)]
        x_new = sum(p) / m
        for i in range(m):
            z[i] = x_new + z[i] - p[i]
        spread = max(float(np.linalg.norm(pi - x_new)) for pi in p)
        res = max(float(np.linalg.norm(x_new - x)), spread)
        x = x_new
        if res <= tol:
            return x
    raise InnerSolverError(f"parallel Dykstra splitting stopped at residual {res:.3g}", residual=res)


def l1_plus_ball(weight: float, center, radius: float) -> SumNonsmooth:
    return SumNonsmooth((L1Norm(weight), BallIndicator(center, radius)))


# ====================================================================== stacked prox


class StackedNonsmooth:
    """Row-wise prox of (h_1, …, h_N) vectorized over nodes when the kinds agree."""

    def __init__(self, terms):
        self.terms = list(terms)
        sigs = [tuple(sorted(p.kind for p in t.elementary())) for t in self.terms]
        self.signature = sigs[0] if len(set(sigs)) == 1 else None
        self.all_zero = all(not s for s in sigs)
        if self.signature in (("l1",), ("ball", "l1"), ("ball",)):
            lam, cen, rad = [], [], []
            for t in self.terms:
                parts = t.elementary()
                l1 = [p for p in parts if p.kind == "l1"]
                ball = [p for p in parts if p.kind == "ball"]
                lam.append(l1[0].weight if l1 else 0.0)
                cen.append(ball[0].center if ball else None)
                rad.append(ball[0].radius if ball else np.inf)
            self.lam = np.array(lam)
            self.centers = np.array(cen, dtype=float) if "ball" in self.signature else None
            self.radii = np.array(rad)

    def prox(self, steps, V):
        V = np.asarray(V, dtype=float)
        steps = np.broadcast_to(np.asarray(steps, dtype=float), (V.shape[0],))
        if self.all_zero:
            return V.copy()
        if self.signature == ("l1",):
            return soft_threshold(V, (self.lam * steps)[:, None])
        if self.signature == ("ball",):
            return project_ball(V, self.centers, self.radii[:, None])
        if self.signature == ("ball", "l1"):
            return prox_l1_ball(V, steps, self.lam, self.centers, self.radii)
        return np.stack([t.prox(s, v) for t, s, v in zip(self.terms, steps, V)])

    def value(self, X):
        return float(sum(t.value(x) for t, x in zip(self.terms, X)))


# ====================================================================== network problem


@dataclass(frozen=True, eq=False)
class NetworkProblem:
    """minimize Σ_i f_i(x) + h_i(x) over a connected graph.

    Stacked functions f(𝐱) = Σ f_i(x_i) and h(𝐱) = Σ h_i(x_i) act on
    arrays of shape ``(N, d)``.
    """

    topo: Topology
    smooth: tuple
    nonsmooth: tuple
    dim: int

    def __post_init__(self):
        smooth, nonsmooth = tuple(self.smooth), tuple(self.nonsmooth)
        n = self.topo.n_nodes
        if len(smooth) != n or len(nonsmooth) != n:
            raise ValueError(f"need {n} local terms, got {len(smooth)} smooth and {len(nonsmooth)} nonsmooth")
        for i, f in enumerate(smooth):
            if f.dim != self.dim:
                raise ValueError(f"f_{i + 1} has dimension {f.dim}, expected {self.dim}")
        object.__setattr__(self, "smooth", smooth)
        object.__setattr__(self, "nonsmooth", nonsmooth)
        object.__setattr__(self, "_stack", StackedNonsmooth(nonsmooth))

    @property
    def n_nodes(self) -> int:
        return self.topo.n_nodes

    @property
    def shape(self):
        return (self.topo.n_nodes, self.dim)

    @property
    def h_is_zero(self) -> bool:
        return all(h.is_zero for h in self.nonsmooth)

    @property
    def smooth_is_quadratic(self) -> bool:
        return all(f.is_quadratic for f in self.smooth)

    @property
    def M(self) -> np.ndarray:
        """Vector of smoothness constants (M_1, …, M_N)."""
        return np.array([f.M for f in self.smooth])

    def Lambda_M(self) -> np.ndarray:
        """Dense Λ_M = diag(M_i)⊗I_d."""
        return np.kron(np.diag(self.M), np.eye(self.dim))

    def f_value(self, X) -> float:
        return float(sum(f.value(x) for f, x in zip(self.smooth, X)))

    def h_value(self, X) -> float:
        return float(sum(h.value(x) for h, x in zip(self.nonsmooth, X)))

    def objective(self, X) -> float:
        """f(𝐱) + h(𝐱) at a stacked (possibly non-consensual) point."""
        return self.f_value(X) + self.h_value(X)

    def grad(self, X) -> np.ndarray:
        return np.stack([f.grad(x) for f, x in zip(self.smooth, X)])

    def hessian_blocks(self, X) -> np.ndarray:
        """(N, d, d) array of local Hessians ∇²f_i(x_i)."""
        return np.stack([f.hessian(x) for f, x in zip(self.smooth, X)])

    def hessian_dense(self, X) -> np.ndarray:
        from scipy.linalg import block_diag
        return block_diag(*self.hessian_blocks(X))

    def prox(self, steps, V) -> np.ndarray:
        """Row-wise prox of h_i with per-node steps."""
        return self._stack.prox(steps, V)

    @property
    def stacked_nonsmooth(self) -> StackedNonsmooth:
        return self._stack

    def centralized_value(self, x) -> float:
        """Σ_i f_i(x) + h_i(x) at a single point x."""
        return float(sum(f.value(x) + h.value(x) for f, h in zip(self.smooth, self.nonsmooth)))

    def require_smooth_only(self, what: str) -> None:
        if not self.h_is_zero:
            raise UnsupportedProblemError(f"{what} requires h ≡ 0 at every node")

    def with_topology(self, topo: Topology) -> "NetworkProblem":
        return NetworkProblem(topo, self.smooth, self.nonsmooth, self.dim)
