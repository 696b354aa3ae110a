"""Graphs, weight matrices P and P̃, and their spectral quantities.

Node indices are 0-based in memory. Edge-list files and human-facing
messages use 1-based labels.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidMatrixError, TopologyError
from .validation import EIG_TOL, ValidationReport


@dataclass(frozen=True)
class Topology:
    """Connected undirected simple graph.

    Parameters
    ----------
    n_nodes : int
        Number of nodes N.
    edges : iterable of pairs
        Unordered pairs ``(i, j)`` with ``i != j``; stored sorted as ``i < j``.
    """

    n_nodes: int
    edges: tuple = ()
    _nbrs: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n_nodes)
        if n < 1:
            raise TopologyError("n_nodes must be positive")
        seen = set()
        for e in self.edges:
            i, j = (int(e[0]), int(e[1]))
            if i == j:
                raise TopologyError(f"self-loop at node {i + 1}")
            if not (0 <= i < n and 0 <= j < n):
                raise TopologyError(f"edge ({i + 1},{j + 1}) out of range for N={n}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise TopologyError(f"duplicate edge ({key[0] + 1},{key[1] + 1})")
            seen.add(key)
        edges = tuple(sorted(seen))
        nbrs = [[] for _ in range(n)]
        for i, j in edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "n_nodes", n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_nbrs", tuple(tuple(sorted(v)) for v in nbrs))
        if not self.is_connected():
            raise TopologyError(f"graph with N={n} and {len(edges)} edges is disconnected")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple:
        """Neighbor set 𝒩_i (excluding i)."""
        return self._nbrs[i]

    def degree(self, i: int) -> int:
        return len(self._nbrs[i])

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(v) for v in self._nbrs], dtype=int)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self._nbrs[i]

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_nodes, self.n_nodes))
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1.0
        return A

    def support(self) -> np.ndarray:
        """Boolean mask of allowed nonzeros: edges plus the diagonal."""
        return self.adjacency().astype(bool) | np.eye(self.n_nodes, dtype=bool)

    def is_connected(self) -> bool:
        n = self.n_nodes
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self._nbrs[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        return bool(seen.all())


# ---------------------------------------------------------------- standard graphs


def path_graph(n: int) -> Topology:
    return Topology(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Topology:
    if n < 3:
        raise TopologyError("cycle needs at least 3 nodes")
    return Topology(n, tuple((i, (i + 1) % n) for i in range(n)))


def complete_graph(n: int) -> Topology:
    return Topology(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def star_graph(n: int) -> Topology:
    return Topology(n, tuple((0, j) for j in range(1, n)))


def _components_connected(n, edges) -> bool:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(a) for a in range(n)}) == 1


def random_connected_graph(n_nodes: int, n_edges: int, seed=None, max_tries: int = 2000) -> Topology:
    """Uniform random graph with exactly ``n_edges`` edges, conditioned on connectivity.

    Edge sets are drawn uniformly and redrawn until connected. When the
    acceptance rate is too low (very sparse graphs), a random spanning tree
    plus uniformly chosen extra edges is used instead.
    """
    n, m = int(n_nodes), int(n_edges)
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if n == 1:
        if m != 0:
            raise TopologyError("a single node admits no edges")
        return Topology(1, ())
    if m < n - 1:
        raise TopologyError(f"{m} edges cannot connect {n} nodes (need at least {n - 1})")
    if m > len(all_pairs):
        raise TopologyError(f"{m} edges exceed the {len(all_pairs)} possible pairs")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        idx = rng.choice(len(all_pairs), size=m, replace=False)
        edges = [all_pairs[t] for t in idx]
        if _components_connected(n, edges):
            return Topology(n, tuple(edges))
    order = rng.permutation(n)
    tree = set()
    for t in range(1, n):
        u, v = int(order[t]), int(order[rng.integers(t)])
        tree.add((min(u, v), max(u, v)))
    rest = [p for p in all_pairs if p not in tree]
    extra = rng.choice(len(rest), size=m - (n - 1), replace=False)
    return Topology(n, tuple(sorted(tree | {rest[t] for t in extra})))


def erdos_renyi_graph(n_nodes: int, p: float, seed=None, max_tries: int = 10000) -> Topology:
    """Erdős–Rényi G(N, p) sample, redrawn until connected."""
    if not 0.0 < p <= 1.0:
        raise TopologyError("edge probability must lie in (0, 1]")
    n = int(n_nodes)
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    for _ in range(max_tries):
        keep = rng.random(iu[0].size) < p
        edges = list(zip(iu[0][keep].tolist(), iu[1][keep].tolist()))
        if n == 1 or _components_connected(n, edges):
            return Topology(n, tuple(edges))
    raise TopologyError(f"no connected G({n}, {p}) sample in {max_tries} draws")


# ---------------------------------------------------------------- weight matrices


@dataclass(frozen=True)
class WeightPair:
    """Penalty matrix P and dual-coupling matrix P̃ (both N×N).

    The network-level operators are H = P⊗I_d and H̃ = P̃⊗I_d; engines apply
    them to stacked iterates of shape ``(N, d)`` as ``P @ X``.
    """

    P: np.ndarray
    P_tilde: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        Pt = np.array(self.P_tilde, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape != Pt.shape:
            raise InvalidMatrixError(f"P {P.shape} and P̃ {Pt.shape} must be equal square shapes")
        P.setflags(write=False)
        Pt.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "P_tilde", Pt)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def scaled(self, s: float, s_tilde: float | None = None) -> "WeightPair":
        return WeightPair(s * self.P, (s if s_tilde is None else s_tilde) * self.P_tilde)

    def H(self, d: int) -> np.ndarray:
        """Dense H = P⊗I_d (reference engine only)."""
        return np.kron(self.P, np.eye(d))

    def H_tilde(self, d: int) -> np.ndarray:
        return np.kron(self.P_tilde, np.eye(d))


def _require_connected(topo: Topology) -> None:
    if not topo.is_connected():
        raise TopologyError("weight matrices need a connected graph")


def metropolis_matrix(topo: Topology) -> np.ndarray:
    """M_𝒢 with [M]_ij = −1/(max(|𝒩_i|,|𝒩_j|)+1) on edges and zero row sums."""
    _require_connected(topo)
    n = topo.n_nodes
    deg = topo.degrees
    M = np.zeros((n, n))
    for i, j in topo.edges:
        M[i, j] = M[j, i] = -1.0 / (max(deg[i], deg[j]) + 1)
    M[np.diag_indices(n)] = -M.sum(axis=1)
    return M


def laplacian_matrix(topo: Topology) -> np.ndarray:
    _require_connected(topo)
    A = topo.adjacency()
    return np.diag(A.sum(axis=1)) - A


def build_metropolis(topo: Topology, scale: float = 1.0) -> WeightPair:
    """P = P̃ = scale·M_𝒢."""
    if scale <= 0:
        raise InvalidMatrixError("scale must be positive")
    M = scale * metropolis_matrix(topo)
    return WeightPair(M, M.copy())


def build_laplacian(topo: Topology, scale: float = 1.0) -> WeightPair:
    """P = P̃ = scale·L_𝒢."""
    if scale <= 0:
        raise InvalidMatrixError("scale must be positive")
    L = scale * laplacian_matrix(topo)
    return WeightPair(L, L.copy())


def metropolis_average_matrix(topo: Topology) -> np.ndarray:
    """Symmetric doubly stochastic W = I − M_𝒢."""
    return np.eye(topo.n_nodes) - metropolis_matrix(topo)


def _check_consensus_matrix(report, name, S, support, tol, require_sparse):
    n = S.shape[0]
    asym = np.abs(S - S.T)
    k = np.unravel_index(np.argmax(asym), asym.shape)
    report.add(f"{name} symmetric", asym[k] <= tol,
               "" if asym[k] <= tol else f"|{name}[{k[0] + 1},{k[1] + 1}] − {name}[{k[1] + 1},{k[0] + 1}]| = {asym[k]:.3g}")
    if require_sparse and support is not None:
        bad = np.argwhere((np.abs(S) > 0) & ~support)
        detail = ""
        if bad.size:
            i, j = bad[0]
            detail = f"sparsity violation at ({i + 1},{j + 1}): {name}[{i + 1},{j + 1}] = {S[i, j]:.3g} but nodes are not neighbors"
        report.add(f"{name} neighbor-sparse", bad.size == 0, detail)
    Ssym = 0.5 * (S + S.T)
    scale = max(1.0, float(np.abs(Ssym).max()))
    one_res = float(np.linalg.norm(Ssym @ np.ones(n)))
    ev = np.linalg.eigvalsh(Ssym)
    ok_null = one_res <= tol * scale * np.sqrt(n) and (n == 1 or ev[1] > tol * scale)
    detail = f"‖{name}·1‖ = {one_res:.3g}"
    if n > 1:
        detail += f", second eigenvalue = {ev[1]:.3g}"
    report.add(f"{name} null space = span(1)", ok_null, detail)
    report.add(f"{name} PSD", ev[0] >= -tol * scale, f"min eigenvalue = {ev[0]:.3g}")


def validate_weight_pair(wp: WeightPair, topo: Topology | None = None, require_dominated: bool = False,
                         require_sparse: bool = True, tol: float = EIG_TOL) -> ValidationReport:
    """Check the structural conditions on (P, P̃).

    Parameters
    ----------
    wp : WeightPair
    topo : Topology, optional
        Needed for the sparsity check.
    require_dominated : bool
        Additionally check P − P̃ ⪰ −tol·I.
    require_sparse : bool
        Disable for matrices that are intentionally multi-hop (centralized presets).
    """
    report = ValidationReport("weight pair")
    if topo is not None and wp.n != topo.n_nodes:
        report.add("dimensions", False, f"matrices are {wp.n}×{wp.n} but the graph has {topo.n_nodes} nodes")
        return report
    support = topo.support() if topo is not None else None
    _check_consensus_matrix(report, "P", wp.P, support, tol, require_sparse)
    _check_consensus_matrix(report, "P̃", wp.P_tilde, support, tol, require_sparse)
    if require_dominated:
        e = np.linalg.eigvalsh(0.5 * ((wp.P - wp.P_tilde) + (wp.P - wp.P_tilde).T))[0]
        report.add("P ⪰ P̃", e >= -tol, f"min eigenvalue of P − P̃ = {e:.3g}")
    return report


def lambda_max(S: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1])


def lambda_max_upper_bound(wp: WeightPair) -> float:
    """Neighbor-computable bound N·max_{i, j∈𝒩_i} |p_ij| on λ_max(P)."""
    P = wp.P
    off = np.abs(P - np.diag(np.diag(P)))
    return float(off.max() * P.shape[0]) if P.shape[0] > 1 else float(abs(P[0, 0]))


def smallest_nonzero_eigenvalue(wp_or_matrix) -> float:
    """λ_H̃: the second-smallest eigenvalue of P̃ (null space must be span(1))."""
    S = wp_or_matrix.P_tilde if isinstance(wp_or_matrix, WeightPair) else np.asarray(wp_or_matrix, float)
    ev = np.linalg.eigvalsh(0.5 * (S + S.T))
    scale = max(1.0, float(np.abs(ev).max()))
    nz = int(np.sum(np.abs(ev) <= EIG_TOL * scale))
    if nz != 1:
        raise InvalidMatrixError(f"zero eigenvalue has multiplicity {nz}, expected 1")
    return float(ev[1])


def psd_pinv_sqrt(S: np.ndarray, tol: float = EIG_TOL) -> np.ndarray:
    """(S^{1/2})^† for symmetric PSD S, truncating eigenvalues below tol."""
    ev, U = np.linalg.eigh(0.5 * (S + S.T))
    keep = ev > tol * max(1.0, float(np.abs(ev).max()))
    inv = np.zeros_like(ev)
    inv[keep] = 1.0 / np.sqrt(ev[keep])
    return (U * inv) @ U.T


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    ev, U = np.linalg.eigh(0.5 * (S + S.T))
    return (U * np.sqrt(np.clip(ev, 0.0, None))) @ U.T


def psd_pinv(S: np.ndarray, tol: float = EIG_TOL) -> np.ndarray:
    ev, U = np.linalg.eigh(0.5 * (S + S.T))
    keep = np.abs(ev) > tol * max(1.0, float(np.abs(ev).max()))
    inv = np.zeros_like(ev)
    inv[keep] = 1.0 / ev[keep]
    return (U * inv) @ U.T


# ---------------------------------------------------------------- file formats


def write_edge_list(topo: Topology, path) -> None:
    """One ``i j`` line per edge, 1-indexed."""
    text = "".join(f"{i + 1} {j + 1}\n" for i, j in topo.edges)
    Path(path).write_text(text)


def parse_edge_list(text: str, n_nodes: int | None = None) -> Topology:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TopologyError(f"line {lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise TopologyError(f"line {lineno}: non-integer node label in {raw!r}") from exc
        if i < 1 or j < 1:
            raise TopologyError(f"line {lineno}: node labels are 1-indexed")
        edges.append((i - 1, j - 1))
    n = n_nodes if n_nodes is not None else (max(max(e) for e in edges) + 1 if edges else 1)
    return Topology(n, tuple(edges))


def read_edge_list(path, n_nodes: int | None = None) -> Topology:
    return parse_edge_list(Path(path).read_text(), n_nodes)


def write_matrix_csv(S: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(S, dtype=float), delimiter=",", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))
