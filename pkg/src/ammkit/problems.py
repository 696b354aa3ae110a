"""Problem generators, centralized reference solutions and problem files."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import lsq_linear

from .errors import InnerSolverError
from .graph_topology import Topology, erdos_renyi_graph, psd_pinv_sqrt, random_connected_graph
from .objectives import (
    BallIndicator,
    L1Norm,
    LogisticSmooth,
    NetworkProblem,
    QuadraticSmooth,
    SumNonsmooth,
    ZeroNonsmooth,
    ZeroSmooth,
    dykstra_prox,
    prox_l1_ball,
    soft_threshold,
)

FORMAT_NAME = "ammkit-problem"
FORMAT_VERSION = 1


# ====================================================================== generators


def generate_benchmark_problem(seed, n_nodes: int = 20, dim: int = 5, rows: int = 3,
                              n_edges: int = 26) -> NetworkProblem:
    """Constrained l1-regularized least squares over a random graph.

    f_i(x) = ½‖B_i x − b_i‖² and h_i(x) = (1/N)‖x‖₁ + I{‖x − a_i‖ ≤ ‖a_i‖ + 1},
    with B_i, b_i, a_i standard normal. Every ball contains the origin.
    """
    rng = np.random.default_rng(seed)
    topo = random_connected_graph(n_nodes, n_edges, seed=int(rng.integers(2**63)))
    smooth, nonsmooth = [], []
    for _ in range(n_nodes):
        B = rng.standard_normal((rows, dim))
        b = rng.standard_normal(rows)
        a = rng.standard_normal(dim)
        smooth.append(QuadraticSmooth(B, b))
        nonsmooth.append(SumNonsmooth((L1Norm(1.0 / n_nodes), BallIndicator(a, np.linalg.norm(a) + 1.0))))
    return NetworkProblem(topo, tuple(smooth), tuple(nonsmooth), dim)


def random_quadratic_problem(seed, n_nodes: int, dim: int, rows: int | None = None, h: str = "zero",
                             l1_weight: float = 0.1, topo: Topology | None = None,
                             edge_prob: float = 0.5) -> NetworkProblem:
    """Least-squares instance with a selectable nonsmooth term.

    ``h`` is one of ``zero``, ``l1``, ``ball``, ``l1_ball``. With the default
    ``rows = dim`` every f_i is strongly convex almost surely.
    """
    rng = np.random.default_rng(seed)
    rows = dim if rows is None else rows
    if topo is None:
        topo = erdos_renyi_graph(n_nodes, edge_prob, seed=int(rng.integers(2**63))) if n_nodes > 1 else Topology(1)
    smooth, nonsmooth = [], []
    for _ in range(topo.n_nodes):
        smooth.append(QuadraticSmooth(rng.standard_normal((rows, dim)), rng.standard_normal(rows)))
        a = rng.standard_normal(dim)
        ball = BallIndicator(a, np.linalg.norm(a) + 0.5)
        nonsmooth.append({
            "zero": ZeroNonsmooth(),
            "l1": L1Norm(l1_weight),
            "ball": ball,
            "l1_ball": SumNonsmooth((L1Norm(l1_weight), ball)),
        }[h])
    return NetworkProblem(topo, tuple(smooth), tuple(nonsmooth), dim)


def random_logistic_problem(seed, n_nodes: int, dim: int, samples: int = 10, l2: float = 0.0,
                            topo: Topology | None = None, edge_prob: float = 0.5) -> NetworkProblem:
    rng = np.random.default_rng(seed)
    if topo is None:
        topo = erdos_renyi_graph(n_nodes, edge_prob, seed=int(rng.integers(2**63)))
    smooth = []
    for _ in range(topo.n_nodes):
        F = rng.standard_normal((samples, dim))
        y = np.where(rng.random(samples) < 0.5, -1.0, 1.0)
        smooth.append(LogisticSmooth(F, y, l2))
    return NetworkProblem(topo, tuple(smooth), tuple(ZeroNonsmooth() for _ in range(topo.n_nodes)), dim)


# ====================================================================== reference optimum


@dataclass
class ReferenceOptimum:
    """Consensus optimum x⋆ of Σ f_i + h_i and the optimal value F⋆."""

    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    warning: str = ""


def _centralized_prox(prob: NetworkProblem):
    """prox of t·Σ_i h_i as a function (t, v) -> x."""
    lam = 0.0
    balls = []
    others = []
    for h in prob.nonsmooth:
        for p in h.elementary():
            if p.kind == "l1":
                lam += p.weight
            elif p.kind == "ball":
                balls.append(p)
            else:
                others.append(p)
    if others:
        parts = ([L1Norm(lam)] if lam > 0 else []) + balls + others
        return lambda t, v: dykstra_prox(parts, t, v, tol=1e-14, max_iters=200000)
    if not balls:
        return lambda t, v: soft_threshold(v, lam * t)
    if len(balls) == 1:
        b = balls[0]
        return lambda t, v: prox_l1_ball(v[None, :], t, lam, b.center[None, :], b.radius)[0]
    centers = np.array([b.center for b in balls])
    radii = np.array([b.radius for b in balls])

    def prox(t, v):
        # parallel Dykstra-type splitting over {l1, ball_1, ..., ball_K}
        m = len(balls) + 1
        zl = v.copy()
        zb = np.tile(v, (len(balls), 1))
        x = v.copy()
        for _ in range(200000):
            pl = soft_threshold(zl, m * t * lam)
            diff = zb - centers
            nrm = np.linalg.norm(diff, axis=1)
            scale = np.where(nrm > radii, radii / np.where(nrm > 0, nrm, 1.0), 1.0)
            pb = centers + diff * scale[:, None]
            x_new = (pl + pb.sum(axis=0)) / m
            zl += x_new - pl
            zb += x_new - pb
            res = max(np.abs(x_new - x).max(), np.abs(pb - x_new).max(), np.abs(pl - x_new).max())
            x = x_new
            if res <= 1e-14 * max(1.0, np.abs(x).max()):
                break
        return x

    return prox


def solve_reference_optimum(prob: NetworkProblem, tol: float = 1e-12, max_iters: int = 200000,
                            x0=None) -> ReferenceOptimum:
    """Centralized proximal gradient on Σ f_i + Σ h_i with step 1/Σ M_i.

    Stops when the successive-iterate change falls below ``tol``.
    """
    prox = _centralized_prox(prob)
    Msum = float(np.sum(prob.M))
    t = 1.0 / Msum if Msum > 0 else 1.0
    x = np.zeros(prob.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    x = prox(t, x)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        g = sum(f.grad(x) for f in prob.smooth)
        x_new = prox(t, x - t * g)
        change = float(np.linalg.norm(x_new - x))
        x = x_new
        if change < tol:
            converged = True
            break
        if Msum == 0:
            converged = True
            break
    warning = "" if converged else f"proximal gradient stopped after {max_iters} iterations (last change {change:.3g})"
    if warning:
        warnings.warn(warning)
    return ReferenceOptimum(x, prob.centralized_value(x), it, converged, warning)


# ====================================================================== dual optimum


@dataclass
class DualOptimum:
    """Optimal multipliers in the two parameterizations q⋆ and v⋆ = (H̃^{1/2})^†q⋆.

    ``g`` holds the per-node subgradients g_i ∈ ∂h_i(x⋆) with
    Σ_i ∇f_i(x⋆) + g_i = 0; ``residual`` is the norm of that sum before
    projection.
    """

    q: np.ndarray
    v: np.ndarray
    g: np.ndarray
    residual: float


def optimal_subgradients(prob: NetworkProblem, x_star, tol: float = 1e-8):
    """Per-node g_i ∈ ∂h_i(x⋆) balancing the gradients, via bounded least squares."""
    x = np.asarray(x_star, dtype=float)
    n, d = prob.shape
    grads = np.stack([f.grad(x) for f in prob.smooth])
    fixed = np.zeros((n, d))
    lam = np.zeros(n)
    zero = np.abs(x) <= tol
    normals = []
    for i, h in enumerate(prob.nonsmooth):
        for p in h.elementary():
            if p.kind == "l1":
                lam[i] += p.weight
            elif p.kind == "ball":
                diff = x - p.center
                nrm = float(np.linalg.norm(diff))
                if nrm >= p.radius - tol * max(1.0, p.radius):
                    normals.append((i, diff / nrm))
            else:
                raise NotImplementedError(f"optimal subgradients for kind {p.kind}")
    fixed += lam[:, None] * np.where(zero, 0.0, np.sign(x))[None, :]
    rhs = -(grads.sum(axis=0) + fixed.sum(axis=0))
    zidx = np.flatnonzero(zero) if lam.sum() > 0 else np.array([], dtype=int)
    cols, lo, hi = [], [], []
    for j in zidx:
        e = np.zeros(d)
        e[j] = 1.0
        cols.append(e)
        lo.append(-lam.sum())
        hi.append(lam.sum())
    for _, nv in normals:
        cols.append(nv)
        lo.append(0.0)
        hi.append(np.inf)
    g = fixed.copy()
    if cols:
        Amat = np.array(cols).T
        sol = lsq_linear(Amat, rhs, bounds=(np.array(lo), np.array(hi)), method="bvls", tol=1e-15)
        coef = sol.x
        for k, j in enumerate(zidx):
            g[:, j] += coef[k] * lam / lam.sum()
        for k, (i, nv) in enumerate(normals):
            g[i] += coef[len(zidx) + k] * nv
    residual = float(np.linalg.norm(grads.sum(axis=0) + g.sum(axis=0)))
    return g, grads, residual


def dual_optimum(prob: NetworkProblem, x_star, P_tilde: np.ndarray, tol: float = 1e-8) -> DualOptimum:
    """q⋆ = −(∇f(𝐱⋆) + g⋆) with g⋆ ∈ ∂h(𝐱⋆) and Σq⋆_i = 0."""
    g, grads, residual = optimal_subgradients(prob, x_star, tol)
    q = -(grads + g)
    q -= q.mean(axis=0, keepdims=True)
    v = psd_pinv_sqrt(P_tilde) @ q
    return DualOptimum(q, v, g, residual)


# ====================================================================== serialization


def _smooth_to_dict(f):
    if f.kind == "zero":
        return {"kind": "zero"}
    if f.kind == "quadratic":
        return {"kind": "quadratic", "rows": int(f.B.shape[0]), "B": f.B.ravel().tolist(), "b": f.b.tolist()}
    if f.kind == "logistic":
        return {"kind": "logistic", "rows": int(f.features.shape[0]), "features": f.features.ravel().tolist(),
                "labels": f.labels.tolist(), "l2": f.l2}
    raise ValueError(f"cannot serialize smooth kind {f.kind}")


def _nonsmooth_to_dict(h):
    if h.kind == "zero":
        return {"kind": "zero"}
    if h.kind == "l1":
        return {"kind": "l1", "weight": h.weight}
    if h.kind == "ball":
        return {"kind": "ball", "center": h.center.tolist(), "radius": h.radius}
    if h.kind == "sum":
        return {"kind": "sum", "terms": [_nonsmooth_to_dict(t) for t in h.terms]}
    raise ValueError(f"cannot serialize nonsmooth kind {h.kind}")


def _smooth_from_dict(doc, d):
    kind = doc.get("kind")
    if kind == "zero":
        return ZeroSmooth(d)
    if kind == "quadratic":
        m = int(doc["rows"])
        return QuadraticSmooth(np.array(doc["B"], dtype=float).reshape(m, d), np.array(doc["b"], dtype=float))
    if kind == "logistic":
        m = int(doc["rows"])
        return LogisticSmooth(np.array(doc["features"], dtype=float).reshape(m, d),
                              np.array(doc["labels"], dtype=float), float(doc.get("l2", 0.0)))
    raise ValueError(f"unknown smooth kind {kind!r}")


def _nonsmooth_from_dict(doc):
    kind = doc.get("kind")
    if kind == "zero":
        return ZeroNonsmooth()
    if kind == "l1":
        return L1Norm(float(doc["weight"]))
    if kind == "ball":
        return BallIndicator(np.array(doc["center"], dtype=float), float(doc["radius"]))
    if kind == "sum":
        return SumNonsmooth(tuple(_nonsmooth_from_dict(t) for t in doc["terms"]))
    raise ValueError(f"unknown nonsmooth kind {kind!r}")


def problem_to_dict(prob: NetworkProblem) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n_nodes": prob.n_nodes,
        "dim": prob.dim,
        "edges": [[i + 1, j + 1] for i, j in prob.topo.edges],
        "nodes": [{"smooth": _smooth_to_dict(f), "nonsmooth": _nonsmooth_to_dict(h)}
                  for f, h in zip(prob.smooth, prob.nonsmooth)],
    }


def problem_from_dict(doc: dict) -> NetworkProblem:
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"not a problem file (format={doc.get('format')!r})")
    if int(doc.get("version", -1)) != FORMAT_VERSION:
        raise ValueError(f"unsupported problem file version {doc.get('version')}")
    n, d = int(doc["n_nodes"]), int(doc["dim"])
    topo = Topology(n, tuple((int(i) - 1, int(j) - 1) for i, j in doc["edges"]))
    nodes = doc["nodes"]
    if len(nodes) != n:
        raise ValueError(f"expected {n} node entries, found {len(nodes)}")
    smooth = tuple(_smooth_from_dict(e["smooth"], d) for e in nodes)
    nonsmooth = tuple(_nonsmooth_from_dict(e["nonsmooth"]) for e in nodes)
    return NetworkProblem(topo, smooth, nonsmooth, d)


def save_problem(prob: NetworkProblem, path) -> None:
    """Write a problem as JSON; matrices are flattened row-major with explicit row counts."""
    Path(path).write_text(json.dumps(problem_to_dict(prob), indent=1))


def load_problem(path) -> NetworkProblem:
    return problem_from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "generate_benchmark_problem", "random_quadratic_problem", "random_logistic_problem",
    "ReferenceOptimum", "solve_reference_optimum", "DualOptimum", "dual_optimum",
    "optimal_subgradients", "save_problem", "load_problem", "problem_to_dict", "problem_from_dict",
    "InnerSolverError",
]
