"""Named parameter mappings that turn AMM into published algorithms.

Every builder takes the problem and a parameter dict and returns a
:class:`Preset` holding a configured engine plus the validation report of
the algorithm's own preconditions. Failed preconditions are reported by the
matrix inequality that does not hold (e.g. "W̃ − W not PSD").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..graph_topology import WeightPair, laplacian_matrix, metropolis_matrix, validate_weight_pair
from ..local_solver import InnerSolverConfig
from ..objectives import NetworkProblem
from ..surrogates import (
    DataQuadraticKernel,
    QuadraticSurrogate,
    ScaledIdentityKernel,
    UpdateMatrix,
    validate_bregman,
    validate_update_matrix,
)
from ..validation import EIG_TOL, ValidationReport, max_eig, min_eig
from .base import Engine
from .damm import DammEngine
from .damm_sq import DammSqEngine
from .reference import ReferenceEngine, SplitProxEngine


@dataclass
class Preset:
    """A configured engine together with the checks of its preconditions."""

    name: str
    engine: Engine
    params: dict
    report: ValidationReport
    family: str
    notes: str = ""
    extra: dict = field(default_factory=dict)

    def describe(self) -> dict:
        out = {"preset": self.name, "family": self.family}
        out.update(self.engine.describe())
        out.update({k: v for k, v in self.params.items() if np.isscalar(v)})
        return out


# ====================================================================== checks


def _psd(rep, expr, S, strict=False, tol=EIG_TOL):
    e = min_eig(S)
    ok = e > tol if strict else e >= -tol
    word = "positive definite" if strict else "PSD"
    sym = "≻" if strict else "⪰"
    detail = f"min eigenvalue {e:.3g}" if ok else f"{expr} not {word} (min eigenvalue {e:.3g})"
    return rep.add(f"{expr} {sym} O", ok, detail)


def _positive(rep, name, value):
    v = np.atleast_1d(np.asarray(value, dtype=float))
    ok = bool(np.all(v > 0))
    return rep.add(f"{name} > 0", ok, "" if ok else f"{name} must be positive (got min {v.min():.3g})")


def _average_matrix(rep, name, W, topo, tol=1e-9):
    """Symmetric, W1 = 1, ‖W − 11ᵀ/N‖ < 1 and neighbor-sparse."""
    n = W.shape[0]
    sym = float(np.abs(W - W.T).max())
    rep.add(f"{name} symmetric", sym <= tol, "" if sym <= tol else f"{name} not symmetric (max asymmetry {sym:.3g})")
    rs = float(np.abs(W @ np.ones(n) - 1.0).max())
    rep.add(f"{name}·1 = 1", rs <= tol, "" if rs <= tol else f"{name} rows do not sum to one (error {rs:.3g})")
    gap = float(np.linalg.norm(0.5 * (W + W.T) - np.ones((n, n)) / n, 2))
    rep.add(f"‖{name} − 11ᵀ/N‖ < 1", gap < 1 - tol, f"‖{name} − 11ᵀ/N‖ = {gap:.6g}")
    bad = np.argwhere((np.abs(W) > 0) & ~topo.support())
    detail = ""
    if bad.size:
        i, j = bad[0]
        detail = f"{name}[{i + 1},{j + 1}] ≠ 0 but nodes are not neighbors"
    rep.add(f"{name} neighbor-sparse", bad.size == 0, detail)


def _mat(params, key, default):
    v = params.get(key)
    return default if v is None else np.array(v, dtype=float)


def _scalar(params, key, default):
    v = params.get(key)
    return float(default) if v is None else float(v)


def _Mbar(prob):
    m = float(np.max(prob.M)) if prob.n_nodes else 0.0
    return m if m > 0 else 1.0


def _q0(params, engine, rule):
    if params.get("q0") is not None:
        engine.default_q0 = np.array(params["q0"], dtype=float)
    else:
        engine.default_q0 = rule


def _weights(rep, wp, prob, sparse=True, dominated=False):
    rep.extend(validate_weight_pair(wp, prob.topo, require_dominated=dominated, require_sparse=sparse))


# ====================================================================== DAMM-SQ family


def _extra_like(prob, params, W, Wt, alpha, name, rep):
    prob.require_smooth_only(name)
    n = prob.n_nodes
    _positive(rep, "α", alpha)
    _average_matrix(rep, "W", W, prob.topo)
    _average_matrix(rep, "W̃", Wt, prob.topo)
    _psd(rep, "W̃ − W", Wt - W)
    _psd(rep, "W̃", Wt, strict=True)
    rho = 1.0 / alpha
    wp = WeightPair(np.eye(n) - Wt, Wt - W)
    _weights(rep, wp, prob)
    G = UpdateMatrix.scalar(alpha * np.eye(n), prob.dim, label="αI")
    eng = DammSqEngine(prob, wp, rho, G, name=name)
    rep.extend(validate_update_matrix(G, wp, rho, prob.topo, [(0, np.zeros(prob.shape))]), prefix="G: ")
    return eng, wp, rho


def build_extra(prob: NetworkProblem, params: dict):
    """x^{k+1} = W̃x^k − α∇f(x^k) + Σ_{t≤k}(W − W̃)x^t as DAMM-SQ with G = αI."""
    rep = ValidationReport("extra")
    n = prob.n_nodes
    W = _mat(params, "W", np.eye(n) - metropolis_matrix(prob.topo))
    Wt = _mat(params, "W_tilde", 0.5 * (np.eye(n) + W))
    alpha = _scalar(params, "alpha", max(min_eig(Wt), 1e-3) / _Mbar(prob))
    eng, wp, rho = _extra_like(prob, params, W, Wt, alpha, "extra", rep)
    _q0(params, eng, lambda x0: rho * (wp.P_tilde @ x0))
    return eng, rep, {"alpha": alpha, "W": W, "W_tilde": Wt}


def build_id_fbbs(prob, params):
    """EXTRA form with W = 2W̃ − I and any q^0 ∈ S⊥ (default ρP̃x^0)."""
    rep = ValidationReport("id_fbbs")
    n = prob.n_nodes
    Wt = _mat(params, "W_tilde", np.eye(n) - 0.5 * metropolis_matrix(prob.topo))
    W = 2.0 * Wt - np.eye(n)
    alpha = _scalar(params, "alpha", max(min_eig(Wt), 1e-3) / _Mbar(prob))
    eng, wp, rho = _extra_like(prob, params, W, Wt, alpha, "id_fbbs", rep)
    _q0(params, eng, lambda x0: rho * (wp.P_tilde @ x0))
    return eng, rep, {"alpha": alpha, "W": W, "W_tilde": Wt}


def build_dqm(prob, params):
    """G^k = (2c·diag(|𝒩_i|)⊗I + ∇²f(x^k))⁻¹, ρ = c, P = P̃ = L_𝒢.

    ``engine`` selects the dense reference host (default) or DAMM-SQ.
    """
    prob.require_smooth_only("dqm")
    rep = ValidationReport("dqm")
    c = _scalar(params, "c", 1.0)
    _positive(rep, "c", c)
    n, d = prob.shape
    L = laplacian_matrix(prob.topo)
    wp = WeightPair(L, L.copy())
    _weights(rep, wp, prob)
    deg = prob.topo.degrees.astype(float)
    which = params.get("engine", "reference")

    def block(i, k, x):
        return 2 * c * deg[i] * np.eye(d) + prob.smooth[i].hessian(x)

    if which == "damm_sq":
        G = UpdateMatrix.block_diagonal(lambda i, k, x: np.linalg.inv(block(i, k, x)), label="G_dqm")
        eng = DammSqEngine(prob, wp, c, G, name="dqm")
        rep.extend(validate_update_matrix(G, wp, c, prob.topo, [(0, np.zeros(prob.shape))]), prefix="G: ")
    elif which == "reference":
        H = wp.H(d)

        def provider(k, X):
            from scipy.linalg import block_diag
            return block_diag(*[block(i, k, X[i]) for i in range(n)]) - c * H

        sur = QuadraticSurrogate(provider, constant=prob.smooth_is_quadratic)
        eng = ReferenceEngine(prob, wp, c, sur, comm_cost=1.0, name="dqm")
        A0 = provider(0, np.zeros(prob.shape))
        _psd(rep, "2c·diag(|𝒩_i|)⊗I + ∇²f − ρH", A0)
    else:
        raise ConfigurationError(f"dqm engine must be 'reference' or 'damm_sq', got {which!r}")
    _q0(params, eng, None)
    return eng, rep, {"c": c, "engine": which}


# ====================================================================== DAMM family


def _damm(prob, rep, wp, rho, kernels, name, params):
    inner = params.get("inner") or InnerSolverConfig()
    eng = DammEngine(prob, wp, rho, kernels, inner=inner, name=name)
    full = validate_bregman(eng.kernels, wp, rho, smooth=prob.smooth)
    # the uniform-modulus test is only sufficient; the exact eigenvalue test decides
    for c in full.checks:
        if not c.name.startswith("sufficient"):
            rep.add("ψ: " + c.name, c.passed, c.detail)
    return eng


def build_pgc(prob, params):
    """ψ_i = (β_i/2)‖·‖², ρ = 1, P̃ = Λ_β(W̃ − W), P = Λ_β(I − W̃).

    Default W = I − cΛ_β⁻¹L_𝒢 and W̃ = (I + W)/2.
    """
    rep = ValidationReport("pgc")
    n = prob.n_nodes
    beta = np.broadcast_to(np.asarray(params.get("beta", _Mbar(prob)), dtype=float), (n,)).copy()
    _positive(rep, "β", beta)
    deg = prob.topo.degrees.astype(float)
    c = _scalar(params, "c", 0.5 * float(np.min(beta / np.maximum(deg, 1))))
    Lb = np.diag(beta)
    W = _mat(params, "W", np.eye(n) - c * np.diag(1.0 / beta) @ laplacian_matrix(prob.topo))
    Wt = _mat(params, "W_tilde", 0.5 * (np.eye(n) + W))
    sup = prob.topo.support()
    for nm, S in (("W", W), ("W̃", Wt)):
        rs = float(np.abs(S.sum(axis=1) - 1).max())
        rep.add(f"{nm} row-stochastic", rs <= 1e-9, "" if rs <= 1e-9 else f"{nm} rows do not sum to one")
        pos = bool(np.all(S[sup] > 0) and np.all(S[~sup] == 0))
        rep.add(f"{nm} positive exactly on 𝒩_i ∪ {{i}}", pos, "" if pos else f"{nm} sign pattern does not match the graph")
        asym = float(np.abs(Lb @ S - (Lb @ S).T).max())
        rep.add(f"Λ_β{nm} symmetric", asym <= 1e-9, "" if asym <= 1e-9 else f"Λ_β{nm} not symmetric")
    _psd(rep, "Λ_βW̃ − Λ_βW", Lb @ (Wt - W))
    _psd(rep, "Λ_βW̃", Lb @ Wt)
    P = Lb @ (np.eye(n) - Wt)
    Pt = Lb @ (Wt - W)
    wp = WeightPair(0.5 * (P + P.T), 0.5 * (Pt + Pt.T))
    _weights(rep, wp, prob)
    eng = _damm(prob, rep, wp, 1.0, [ScaledIdentityKernel(b) for b in beta], "pgc", params)
    _q0(params, eng, None)
    return eng, rep, {"beta": beta, "c": c, "W": W, "W_tilde": Wt}


def build_pg_extra(prob, params):
    """ψ_i = (ρ/2)‖·‖², ρ = 1/α, P = I − W̃, P̃ = W̃ − W, q^0 = ρP̃x^0.

    Defaults W = I − M_𝒢 and W̃ = (I + W)/2, i.e. P = P̃ = M_𝒢/2.
    """
    rep = ValidationReport("pg_extra")
    n = prob.n_nodes
    W = _mat(params, "W", np.eye(n) - metropolis_matrix(prob.topo))
    Wt = _mat(params, "W_tilde", 0.5 * (np.eye(n) + W))
    alpha = _scalar(params, "alpha", max(min_eig(Wt), 1e-3) / _Mbar(prob))
    _positive(rep, "α", alpha)
    _average_matrix(rep, "W", W, prob.topo)
    _average_matrix(rep, "W̃", Wt, prob.topo)
    _psd(rep, "W̃ − W", Wt - W)
    _psd(rep, "W̃", Wt)
    rho = 1.0 / alpha
    wp = WeightPair(np.eye(n) - Wt, Wt - W)
    _weights(rep, wp, prob)
    eng = _damm(prob, rep, wp, rho, ScaledIdentityKernel(rho), "pg_extra", params)
    _q0(params, eng, lambda x0: rho * (wp.P_tilde @ x0))
    return eng, rep, {"alpha": alpha, "W": W, "W_tilde": Wt}


def build_dpga(prob, params):
    """ψ_i = ‖·‖²/(2c_i), ρ = 1, P = P̃ = Γ; default Γ = M_𝒢/(2c)."""
    rep = ValidationReport("dpga")
    n = prob.n_nodes
    c = np.broadcast_to(np.asarray(params.get("c", 0.5 / _Mbar(prob)), dtype=float), (n,)).copy()
    _positive(rep, "c_i", c)
    Gamma = _mat(params, "Gamma", metropolis_matrix(prob.topo) / (2.0 * float(c.max())))
    off = Gamma[prob.topo.adjacency().astype(bool)]
    rep.add("Γ_ij < 0 on edges", bool(np.all(off < 0)), "" if np.all(off < 0) else "Γ has a nonnegative edge weight")
    wp = WeightPair(Gamma, Gamma.copy())
    _weights(rep, wp, prob)
    eng = _damm(prob, rep, wp, 1.0, [ScaledIdentityKernel(1.0 / ci) for ci in c], "dpga", params)
    _q0(params, eng, None)
    return eng, rep, {"c": c, "Gamma": Gamma}


def build_decentralized_admm(prob, params):
    """DPGA with c_i = 1/(2c|𝒩_i|) and Γ = cL_𝒢.

    With ``exact_f`` the kernel becomes ½xᵀ(∇²f_i + 2c|𝒩_i|I)x, which for
    least-squares f_i minimizes f_i exactly in each primal step.
    """
    rep = ValidationReport("decentralized_admm")
    c = _scalar(params, "c", _Mbar(prob))
    _positive(rep, "c", c)
    deg = prob.topo.degrees.astype(float)
    L = laplacian_matrix(prob.topo)
    wp = WeightPair(c * L, c * L)
    _weights(rep, wp, prob)
    if params.get("exact_f", False):
        if not prob.smooth_is_quadratic:
            raise ConfigurationError("exact_f needs quadratic local terms")
        d = prob.dim
        kernels = [DataQuadraticKernel(f.hessian(np.zeros(d)) + 2 * c * deg[i] * np.eye(d))
                   for i, f in enumerate(prob.smooth)]
    else:
        kernels = [ScaledIdentityKernel(2 * c * di) for di in deg]
    eng = _damm(prob, rep, wp, 1.0, kernels, "decentralized_admm", params)
    _q0(params, eng, None)
    return eng, rep, {"c": c, "exact_f": bool(params.get("exact_f", False))}


def build_d_fbbs(prob, params):
    """ψ_i = (ρ/2)‖·‖², P = P̃ = I − W, q^0 ∈ S⊥ (default 0); default W = I − M_𝒢/2."""
    rep = ValidationReport("d_fbbs")
    n = prob.n_nodes
    W = _mat(params, "W", np.eye(n) - 0.5 * metropolis_matrix(prob.topo))
    rho = _scalar(params, "rho", _Mbar(prob))
    _positive(rep, "ρ", rho)
    _average_matrix(rep, "W", W, prob.topo)
    _psd(rep, "W", W, strict=True)
    wp = WeightPair(np.eye(n) - W, np.eye(n) - W)
    _weights(rep, wp, prob)
    eng = _damm(prob, rep, wp, rho, ScaledIdentityKernel(rho), "d_fbbs", params)
    _q0(params, eng, None)
    return eng, rep, {"rho": rho, "W": W}


# ====================================================================== reference-engine family


def _dense_checks(rep, A, K, label):
    _psd(rep, f"A ({label})", A)
    _psd(rep, "A + ρH", K, strict=True)


def build_distributed_admm(prob, params):
    """q = Γᵀw, H = H̃ = ΓᵀΛ⁻¹Γ, ρ = c, A = ∇²f + ρ(Q̃ − H) with f absorbed exactly.

    Λ = diag(|𝒩_i| + 1) and Q̃ = diag(Σ_j Γ_ji²)⊗I. Default Γ = M_𝒢/2.
    """
    rep = ValidationReport("distributed_admm_makhdoumi")
    if not prob.smooth_is_quadratic:
        raise ConfigurationError("distributed_admm_makhdoumi absorbs f exactly and needs quadratic (or zero) f_i")
    n, d = prob.shape
    c = _scalar(params, "c", 1.0)
    _positive(rep, "c", c)
    Gamma = _mat(params, "Gamma", 0.5 * metropolis_matrix(prob.topo))
    bad = np.argwhere((np.abs(Gamma) > 0) & ~prob.topo.support())
    rep.add("Γ neighbor-sparse", bad.size == 0, "" if not bad.size else f"Γ[{bad[0][0] + 1},{bad[0][1] + 1}] ≠ 0 off the graph")
    Lam_inv = np.diag(1.0 / (prob.topo.degrees + 1.0))
    Hn = Gamma.T @ Lam_inv @ Gamma
    Hn = 0.5 * (Hn + Hn.T)
    Qt = np.diag((Gamma ** 2).sum(axis=0))
    wp = WeightPair(Hn, Hn.copy())
    _weights(rep, wp, prob, sparse=False)
    _psd(rep, "Q̃ − ΓᵀΛ⁻¹Γ", Qt - Hn)
    Hd = np.kron(Hn, np.eye(d))
    A = prob.hessian_dense(np.zeros(prob.shape)) + c * (np.kron(Qt, np.eye(d)) - Hd)
    sur = QuadraticSurrogate.fixed(A)
    eng = ReferenceEngine(prob, wp, c, sur, comm_cost=2.0, name="distributed_admm_makhdoumi")
    _dense_checks(rep, A, A + c * Hd, "∇²f + ρ(Q̃ − H)")
    _q0(params, eng, None)
    return eng, rep, {"c": c, "Gamma": Gamma, "Lambda_inv": Lam_inv, "Q_tilde": Qt}


def build_lei_primal_dual(prob, params):
    """ρ = α, H̃ = Γ², H = Γ/α − Γ², A = (I − αΓ + α²Γ²)/α, q^0 = Γ(w^0 + αΓx^0).

    Default Γ = M_𝒢 and α = min(1/(2‖Γ‖), 1/max_i M_i).
    """
    rep = ValidationReport("lei_primal_dual")
    n, d = prob.shape
    Gamma = _mat(params, "Gamma", metropolis_matrix(prob.topo))
    nrm = float(np.linalg.norm(Gamma, 2))
    alpha = _scalar(params, "alpha", min(0.5 / nrm, 1.0 / _Mbar(prob)))
    _positive(rep, "α", alpha)
    rep.add("α ≤ 1/(2‖Γ‖)", alpha <= 0.5 / nrm * (1 + 1e-12),
            f"α = {alpha:.6g}, 1/(2‖Γ‖) = {0.5 / nrm:.6g}" + ("" if alpha <= 0.5 / nrm * (1 + 1e-12) else "; α ≤ 1/(2‖Γ‖) violated"))
    rep.extend(validate_weight_pair(WeightPair(Gamma, Gamma), prob.topo), prefix="Γ: ")
    G2 = Gamma @ Gamma
    wp = WeightPair(Gamma / alpha - G2, G2)
    _weights(rep, wp, prob, sparse=False)
    An = (np.eye(n) - alpha * Gamma + alpha ** 2 * G2) / alpha
    A = np.kron(An, np.eye(d))
    sur = QuadraticSurrogate.fixed(A)
    eng = ReferenceEngine(prob, wp, alpha, sur, comm_cost=2.0, name="lei_primal_dual")
    _dense_checks(rep, A, A + alpha * wp.H(d), "(I − αΓ + α²Γ²)/α")
    w0 = params.get("w0")
    if params.get("q0") is None:
        def rule(x0):
            w = np.zeros(prob.shape) if w0 is None else np.array(w0, dtype=float)
            return Gamma @ (w + alpha * (Gamma @ x0))
        eng.default_q0 = rule
    else:
        eng.default_q0 = np.array(params["q0"], dtype=float)
    return eng, rep, {"alpha": alpha, "Gamma": Gamma}


def build_diging_static(prob, params):
    """ρ = 1/α, H = I − W², H̃ = (I − W)², A = ρW², q^0 = (W² − W)x^0/α."""
    prob.require_smooth_only("diging_static")
    rep = ValidationReport("diging_static")
    n, d = prob.shape
    W = _mat(params, "W", np.eye(n) - metropolis_matrix(prob.topo))
    alpha = _scalar(params, "alpha", 0.25 / _Mbar(prob))
    _positive(rep, "α", alpha)
    _average_matrix(rep, "W", W, prob.topo)
    rho = 1.0 / alpha
    W2 = W @ W
    wp = WeightPair(np.eye(n) - W2, (np.eye(n) - W) @ (np.eye(n) - W))
    _weights(rep, wp, prob, sparse=False)
    A = rho * np.kron(W2, np.eye(d))
    eng = ReferenceEngine(prob, wp, rho, QuadraticSurrogate.fixed(A), comm_cost=2.0, name="diging_static")
    _dense_checks(rep, A, A + rho * wp.H(d), "ρW²")
    _q0(params, eng, lambda x0: ((W2 - W) @ x0) / alpha)
    return eng, rep, {"alpha": alpha, "W": W}


def esom_Q(hess_blocks, eps, alpha, W, K):
    """Q^k(K) = D^{-1/2} Σ_{t=0}^K (D^{-1/2} B D^{-1/2})^t D^{-1/2} (dense)."""
    from scipy.linalg import block_diag
    n, d, _ = hess_blocks.shape
    Wd = np.diag(np.diag(W))
    I = np.eye(n * d)
    D = block_diag(*hess_blocks) + eps * I + 2 * alpha * (I - np.kron(Wd, np.eye(d)))
    B = alpha * (I + np.kron(W - 2 * Wd, np.eye(d)))
    ev, U = np.linalg.eigh(D)
    Dm = (U / np.sqrt(ev)) @ U.T
    C = Dm @ B @ Dm
    S = np.zeros_like(C)
    T = I.copy()
    for _ in range(K + 1):
        S += T
        T = T @ C
    return Dm @ S @ Dm


def build_esom(prob, params):
    """ρ = α, H = H̃ = (I − W)⊗I, A^k = Q^k(K)⁻¹ − ρH."""
    prob.require_smooth_only("esom")
    rep = ValidationReport("esom")
    n, d = prob.shape
    K = int(params.get("K", 1))
    rep.add("K ≥ 0", K >= 0, "" if K >= 0 else "K must be nonnegative")
    alpha = _scalar(params, "alpha", 1.0)
    eps = _scalar(params, "eps", 1.0)
    _positive(rep, "α", alpha)
    _positive(rep, "ε", eps)
    W = _mat(params, "W", np.eye(n) - metropolis_matrix(prob.topo))
    _average_matrix(rep, "W", W, prob.topo)
    neg = bool(np.all(W >= 0))
    rep.add("W ≥ 0 entrywise", neg, "" if neg else "W has negative entries")
    wp = WeightPair(np.eye(n) - W, np.eye(n) - W)
    _weights(rep, wp, prob)
    Hd = wp.H(d)

    def provider(k, X):
        Q = esom_Q(prob.hessian_blocks(X), eps, alpha, W, K)
        return np.linalg.inv(Q) - alpha * Hd

    sur = QuadraticSurrogate(provider, constant=prob.smooth_is_quadratic)
    eng = ReferenceEngine(prob, wp, alpha, sur, comm_cost=float(K + 1), name=f"esom_{K}")
    A0 = provider(0, np.zeros(prob.shape))
    _dense_checks(rep, A0, A0 + alpha * Hd, "Q(K)⁻¹ − ρH")
    _q0(params, eng, None)
    return eng, rep, {"K": K, "alpha": alpha, "eps": eps, "W": W}


def build_split_prox(prob, params):
    """Smooth step then prox: ρ = 1/α, H = H̃ = P (default M_𝒢/2), A = ρ(I − P)."""
    rep = ValidationReport("split_prox")
    n, d = prob.shape
    P = _mat(params, "P", 0.5 * metropolis_matrix(prob.topo))
    alpha = _scalar(params, "alpha", 1.0 / _Mbar(prob))
    _positive(rep, "α", alpha)
    rho = 1.0 / alpha
    wp = WeightPair(P, P.copy())
    _weights(rep, wp, prob)
    A = rho * np.kron(np.eye(n) - P, np.eye(d))
    eng = SplitProxEngine(prob, wp, rho, QuadraticSurrogate.fixed(A), name="split_prox")
    _dense_checks(rep, A, A + rho * wp.H(d), "ρ(I − P)")
    if params.get("q0") is not None:
        eng.default_q0 = np.array(params["q0"], dtype=float)
    return eng, rep, {"alpha": alpha, "P": P}


# ====================================================================== registry


_BUILDERS = {
    "extra": ("damm_sq", build_extra),
    "id_fbbs": ("damm_sq", build_id_fbbs),
    "dqm": ("reference", build_dqm),
    "pgc": ("damm", build_pgc),
    "pg_extra": ("damm", build_pg_extra),
    "dpga": ("damm", build_dpga),
    "decentralized_admm": ("damm", build_decentralized_admm),
    "d_fbbs": ("damm", build_d_fbbs),
    "distributed_admm_makhdoumi": ("reference", build_distributed_admm),
    "lei_primal_dual": ("reference", build_lei_primal_dual),
    "diging_static": ("reference", build_diging_static),
    "esom": ("reference", build_esom),
    "split_prox": ("split_prox", build_split_prox),
}


def preset_names() -> list:
    return list(_BUILDERS)


def make_preset(name: str, prob: NetworkProblem, params: dict | None = None, check: bool = True) -> Preset:
    """Build a preset; with ``check`` a failed precondition raises ConfigurationError.

    The error message lists every failed inequality.
    """
    if name not in _BUILDERS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(_BUILDERS)}")
    family, fn = _BUILDERS[name]
    params = dict(params or {})
    engine, rep, used = fn(prob, params)
    if name == "dqm":
        family = used["engine"]
    if check and not rep.ok:
        msgs = [c.detail or c.name for c in rep.failures]
        raise ConfigurationError(f"{name}: " + "; ".join(msgs))
    return Preset(name, engine, used, rep, family)


def validate_preset(name: str, prob: NetworkProblem, params: dict | None = None) -> ValidationReport:
    """Run a preset's precondition checks without raising on failures."""
    return make_preset(name, prob, params, check=False).report


__all__ = ["Preset", "make_preset", "validate_preset", "preset_names", "esom_Q"]
