"""Convergence metrics, bound curves, rate fits and the linear-rate certificate.

Notation: 𝐳 = (𝐱, 𝐯) with 𝐯 = (H̃^{1/2})^†𝐪, G = diag(A, I/ρ) and
G̃ = diag(A_a, I/ρ). Consensus error is ‖H̃^{1/2}𝐱‖, evaluated as the square
root of the quadratic form 𝐱ᵀ(P̃⊗I)𝐱.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import CertificateError, ConfigurationError, RegimeError
from .graph_topology import psd_pinv, psd_sqrt
from .objectives import NetworkProblem
from .problems import dual_optimum, solve_reference_optimum
from .validation import EIG_TOL, ValidationReport, min_eig

TRACE_COLUMNS = ("k", "obj_err_iterate", "obj_err_avg", "cons_err_iterate", "cons_err_avg",
                 "optimality_err_iterate", "optimality_err_avg", "lyapunov_G", "lyapunov_c")

PSD_TOL = 1e-10
NUMERICAL_FLOOR = 1e-14


def _sqnorm(X, S=None) -> float:
    x = np.asarray(X, dtype=float).reshape(-1)
    return float(x @ x) if S is None else float(x @ (S @ x))


# ====================================================================== optimum


@dataclass
class OptimalPoint:
    """A primal-dual optimum (𝐱⋆, 𝐪⋆, 𝐯⋆) and F⋆ = f(𝐱⋆) + h(𝐱⋆)."""

    X: np.ndarray
    F: float
    q: np.ndarray
    v: np.ndarray
    warning: str | None = None


def optimal_point(prob: NetworkProblem, P_tilde: np.ndarray, tol: float = 1e-12) -> OptimalPoint:
    """Centralized reference solution with a dual optimum lying in S⊥."""
    ref = solve_reference_optimum(prob, tol=tol)
    X = np.tile(ref.x, (prob.n_nodes, 1))
    dual = dual_optimum(prob, ref.x, P_tilde)
    return OptimalPoint(X, prob.objective(X), dual.q, dual.v, ref.warning)


# ====================================================================== traces


@dataclass
class RunTrace:
    """Per-row metrics of one run; ``snapshots`` maps k to thinned 𝐱^k copies."""

    name: str = ""
    rows: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = TRACE_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    @property
    def k(self) -> np.ndarray:
        return self.column("k").astype(int)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in self.rows:
                w.writerow([int(r[0])] + [format(float(v), ".17g") for v in r[1:]])

    @classmethod
    def from_csv(cls, path, name: str = "") -> "RunTrace":
        with open(path, newline="", encoding="utf-8") as fh:
            rd = csv.reader(fh)
            header = tuple(next(rd))
            if header != TRACE_COLUMNS:
                raise ValueError(f"unexpected trace header {header}")
            rows = [(int(r[0]),) + tuple(float(v) for v in r[1:]) for r in rd]
        return cls(name, rows)


class TraceRecorder:
    """Observer that turns a stream of states into a :class:`RunTrace`.

    Parameters
    ----------
    A : (Nd, Nd) array, optional
        Constant surrogate matrix for ‖𝐳−𝐳⋆‖²_G; the column is NaN without it.
    A_a : (Nd, Nd) array, optional
        Averaged surrogate matrix for c^k; NaN without it.
    cadence : int
        Record every ``cadence``-th state (the running average is updated every state).
    snapshot_every : int
        Keep a copy of 𝐱^k every this many states (0 disables).
    stop_below : float, optional
        Ask the harness to stop once the optimality error at 𝐱^k drops below this.
    """

    def __init__(self, prob: NetworkProblem, opt: OptimalPoint, engine, A=None, A_a=None, cadence: int = 1,
                 snapshot_every: int = 0, stop_below: float | None = None, name: str | None = None):
        if cadence < 1:
            raise ConfigurationError("metric cadence must be at least 1")
        self.prob, self.opt, self.engine = prob, opt, engine
        self.Pt = engine.P_tilde
        self.rho = engine.rho
        self.A, self.A_a = A, A_a
        self.cadence = int(cadence)
        self.snapshot_every = int(snapshot_every)
        self.stop_below = stop_below
        self.trace = RunTrace(name or engine.name)
        self.xbar = None
        self.hit = None
        self._last = None

    def consensus(self, X) -> float:
        return float(np.sqrt(max(0.0, float(np.sum(X * (self.Pt @ X))))))

    def objective_error(self, X) -> float:
        return self.prob.objective(X) - self.opt.F

    def lyapunov_G(self, s) -> float:
        if self.A is None:
            return float("nan")
        dv = self.engine.v_from_q(s.q) - self.opt.v
        return _sqnorm(s.x - self.opt.X, self.A) + _sqnorm(dv) / self.rho

    def lyapunov_c(self, s) -> float:
        if self.A_a is None:
            return float("nan")
        dv = self.engine.v_from_q(s.q) - self.opt.v
        return _sqnorm(s.x - self.opt.X, self.A_a) + _sqnorm(dv) / self.rho + self.rho * self.consensus(s.x) ** 2

    def row(self, s) -> tuple:
        oi, oa = self.objective_error(s.x), self.objective_error(self.xbar)
        ci, ca = self.consensus(s.x), self.consensus(self.xbar)
        return (s.k, oi, oa, ci, ca, abs(oi) + ci, abs(oa) + ca, self.lyapunov_G(s), self.lyapunov_c(s))

    def __call__(self, s) -> bool:
        k = s.k
        if k == 0 or self.xbar is None:
            self.xbar = s.x.copy()
        else:
            self.xbar = self.xbar + (s.x - self.xbar) / k
        self._last = s
        stop = False
        r = None
        if self.stop_below is not None:
            r = self.row(s)
            if self.hit is None and r[5] <= self.stop_below:
                self.hit = k
                stop = True
        if k % self.cadence == 0 or stop:
            self.trace.rows.append(r or self.row(s))
        if self.snapshot_every and k % self.snapshot_every == 0:
            self.trace.snapshots[k] = s.x.copy()
        return stop

    def finish(self) -> RunTrace:
        """Append the final state if the cadence skipped it."""
        s = self._last
        if s is not None and (not self.trace.rows or self.trace.rows[-1][0] != s.k):
            self.trace.rows.append(self.row(s))
        return self.trace


def run_traced(engine, opt: OptimalPoint, iters: int, strict: bool = False, A="auto", A_a=None, cadence: int = 1,
               snapshot_every: int = 0, stop_below=None, x0=None, q0=None, workers: int = 1, **init_kw):
    """Run through the harness and record metrics; returns (RunResult, RunTrace)."""
    from . import netsim

    if isinstance(A, str) and A == "auto":
        A = engine.A_matrix() if engine.A_constant else None
    rec = TraceRecorder(engine.prob, opt, engine, A=A, A_a=A_a, cadence=cadence, snapshot_every=snapshot_every,
                        stop_below=stop_below)
    res = netsim.run(engine, iters, strict=strict, workers=workers, x0=x0, q0=q0, observer=rec,
                     keep_states=False, **init_kw)
    trace = rec.finish()
    trace.meta.update(mode=res.mode, aborted=res.aborted, error=res.error, hit=rec.hit)
    return res, trace


# ====================================================================== sublinear bounds


def sigma_lower(A: np.ndarray, Lambda_M: np.ndarray) -> float:
    """σ̲ = min{σ : σA ⪰ Λ_M/2}; requires A ≻ O."""
    A = 0.5 * (A + A.T)
    if min_eig(A) <= EIG_TOL:
        raise RegimeError("A is not positive definite")
    return float(sla.eigh(0.5 * Lambda_M, A, eigvals_only=True)[-1])


@dataclass
class BoundCurves:
    k: np.ndarray
    consensus: np.ndarray
    objective_upper: np.ndarray
    objective_lower: np.ndarray
    constants: dict = field(default_factory=dict)


def _as_k(ks):
    ks = np.asarray(ks, dtype=float)
    if np.any(ks < 1):
        raise ValueError("bounds are stated for k ≥ 1")
    return ks


def sublinear_bounds(ks, v0, v_star, x0, x_star, A, rho: float, Lambda_M, sigma: float | None = None) -> BoundCurves:
    """O(1/k) bounds on consensus and objective error at the running average (A ≻ Λ_M/2 regime)."""
    ks = _as_k(ks)
    if sigma is None:
        sigma = sigma_lower(A, Lambda_M)
    if not sigma < 1:
        raise RegimeError(f"σ̲ = {sigma:.6g} ≥ 1: A ≻ Λ_M/2 fails")
    dv = float(np.linalg.norm(np.asarray(v0) - v_star))
    z2 = _sqnorm(np.asarray(x0) - x_star, A) + dv ** 2 / rho
    num = dv + np.sqrt(rho * z2)
    upper = 0.5 * (_sqnorm(v0) / rho + _sqnorm(np.asarray(x0) - x_star, A) + z2 / (1 - sigma))
    vs = float(np.linalg.norm(v_star))
    return BoundCurves(ks, num / (rho * ks), upper / ks, -vs * num / (rho * ks),
                       {"sigma_lower": sigma, "z0_G_sq": z2, "v0_minus_vstar": dv})


def compute_d0(x0, v0, x_star, v_star, A_a, Pt_dense, rho: float) -> float:
    """d₀ = √(ρ‖𝐳⁰−𝐳⋆‖²_G̃ + ρ²‖𝐱⁰‖²_H̃)."""
    zt = _sqnorm(np.asarray(x0) - x_star, A_a) + _sqnorm(np.asarray(v0) - v_star) / rho
    return float(np.sqrt(rho * zt + rho ** 2 * _sqnorm(x0, Pt_dense)))


def varying_surrogate_bounds(ks, d0: float, eta: float, beta: float, sigma: float, Delta: float, m_rho: float, A_u, rho: float,
                    v0, v_star, x0, x_star) -> BoundCurves:
    """O(1/k) bounds under restricted strong convexity with nonsmooth h."""
    ks = _as_k(ks)
    gap = 2 * eta * m_rho - beta * Delta
    if not (0 < eta < 1 and 0 < sigma < 1 and beta > 0 and gap > 0):
        raise RegimeError("need η, σ ∈ (0,1), β > 0 and βΔ < 2ηm_ρ")
    dv = float(np.linalg.norm(np.asarray(v0) - v_star))
    upper = (d0 ** 2 / rho * (Delta / (2 * gap) + (1 - eta) / (1 - sigma))
             + 0.5 * _sqnorm(np.asarray(x0) - x_star, A_u) + _sqnorm(v0) / (2 * rho))
    vs = float(np.linalg.norm(v_star))
    return BoundCurves(ks, (d0 + dv) / (rho * ks), upper / ks, -vs * (d0 + dv) / (rho * ks), {"d0": d0})


# ====================================================================== rate fits


@dataclass
class RateFit:
    """Least-squares fits of log(error) against log(k) and against k."""

    power_slope: float
    power_residual: float
    geometric_factor: float
    geometric_residual: float
    window: tuple
    truncated: bool
    n_points: int


def fit_rate(series, ks=None, window=None, floor: float = NUMERICAL_FLOOR) -> RateFit:
    """Fit y_k ≈ C k^p and y_k ≈ C r^k over ``window = (k1, k2)``.

    Points at or below ``floor`` end the window early and set ``truncated``.
    """
    y = np.asarray(series, dtype=float)
    ks = np.arange(len(y), dtype=float) if ks is None else np.asarray(ks, dtype=float)
    if window is not None:
        sel = (ks >= window[0]) & (ks <= window[1])
        y, ks = y[sel], ks[sel]
    truncated = False
    low = np.flatnonzero(y <= floor)
    if low.size:
        y, ks = y[:low[0]], ks[:low[0]]
        truncated = True
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("fit_rate needs a positive finite series")
    if y.size < 2:
        raise ValueError("fewer than two usable points in the fit window")
    ly = np.log(y)

    def lsq(t):
        Vm = np.vstack([t, np.ones_like(t)]).T
        coef, *_ = np.linalg.lstsq(Vm, ly, rcond=None)
        return float(coef[0]), float(np.sqrt(np.mean((Vm @ coef - ly) ** 2)))

    if np.any(ks <= 0):
        p, pres = float("nan"), float("nan")
    else:
        p, pres = lsq(np.log(ks))
    g, gres = lsq(ks)
    return RateFit(p, pres, float(np.exp(g)), gres, (float(ks[0]), float(ks[-1])), truncated, int(y.size))


def sparse_rate_estimate(lambda2: float, kappa: float) -> float:
    """Order estimate min{√(1−λ₂(W))/κ_f, 1−λ₂(W)} of the linear-rate constant."""
    if not 0 <= lambda2 < 1:
        raise ValueError("λ₂(W) must lie in [0, 1)")
    if not kappa >= 1:
        raise ValueError("κ_f must be at least 1")
    return float(min(np.sqrt(1 - lambda2) / kappa, 1 - lambda2))


# ====================================================================== linear-rate certificate


def m_rho_quadratic(prob: NetworkProblem, Pt_dense: np.ndarray, rho: float) -> float:
    """Exact m_ρ for quadratic f: λ_min(∇²f + (ρ/2)H̃), the modulus of f + (ρ/4)‖·‖²_H̃."""
    if not prob.smooth_is_quadratic:
        raise ConfigurationError("m_ρ helper needs quadratic f_i; supply m_ρ directly otherwise")
    return min_eig(prob.hessian_dense(np.zeros(prob.shape)) + 0.5 * rho * Pt_dense)


@dataclass
class CertificateInput:
    """Inputs of the δ̃ certificate; matrices are dense (Nd × Nd)."""

    rho: float
    H: np.ndarray
    H_tilde: np.ndarray
    Lambda_M: np.ndarray
    A_a: np.ndarray
    A_u: np.ndarray
    Delta: float
    m_rho: float
    eta: float
    beta: float
    sigma: float
    theta1: float = 1.0
    theta2: float = 1.0
    lam_bar: float | None = None
    lam_Ht: float | None = None

    def __post_init__(self):
        if self.lam_bar is None:
            self.lam_bar = float(np.linalg.eigvalsh(self.H)[-1])
        if self.lam_Ht is None:
            w = np.linalg.eigvalsh(self.H_tilde)
            self.lam_Ht = float(w[w > EIG_TOL].min())

    def validate(self) -> ValidationReport:
        rep = ValidationReport("certificate input")
        scalar = [("ρ > 0", self.rho > 0), ("η ∈ (0,1)", 0 < self.eta < 1), ("β > 0", self.beta > 0),
                  ("σ ∈ (0,1)", 0 < self.sigma < 1), ("θ₁, θ₂ > 0", self.theta1 > 0 and self.theta2 > 0),
                  ("m_ρ > 0", self.m_rho > 0), ("Δ ≥ 0", self.Delta >= 0),
                  ("λ̄ ≥ ‖H‖", self.lam_bar >= float(np.linalg.eigvalsh(self.H)[-1]) - EIG_TOL)]
        for name, ok in scalar:
            rep.add(name, bool(ok))
        gap = 2 * self.eta * self.m_rho - self.beta * self.Delta
        rep.add("βΔ < 2ηm_ρ", gap > 0, f"2ηm_ρ − βΔ = {gap:.6g}")
        I = np.eye(self.A_a.shape[0])
        lam = self.Lambda_M / (2 * (1 - self.eta)) if 0 < self.eta < 1 else self.Lambda_M
        S = self.sigma * self.A_a - ((1 / (4 * self.beta) + 1) * self.Delta * I if self.beta > 0 else 0) - lam
        e = min_eig(S)
        rep.add("σA_a ⪰ (1/(4β)+1)ΔI + Λ_M/(2(1−η))", e >= -EIG_TOL, f"min eigenvalue {e:.6g}")
        if self.m_rho > 0 and 0 < self.eta < 1:
            T = self.A_a - (self.Delta ** 2 / (8 * self.eta * self.m_rho) + self.Delta) * I - lam
            e = min_eig(T)
            rep.add("A_a ≻ (Δ²/(8ηm_ρ)+Δ)I + Λ_M/(2(1−η))", e > EIG_TOL, f"min eigenvalue {e:.6g}")
        return rep


def min_feasible_sigma(A_a, Lambda_M, Delta: float, eta: float, beta: float) -> float:
    """Smallest σ with σA_a ⪰ (1/(4β)+1)ΔI + Λ_M/(2(1−η))."""
    R = (1 / (4 * beta) + 1) * Delta * np.eye(A_a.shape[0]) + Lambda_M / (2 * (1 - eta))
    if min_eig(A_a) <= EIG_TOL:
        raise RegimeError("A_a is not positive definite")
    return float(sla.eigh(R, A_a, eigvals_only=True)[-1])


def certificate_input(prob: NetworkProblem, wp, rho: float, A_a, A_u, Delta: float, m_rho: float | None = None,
                      eta: float = 0.5, beta: float | None = None, sigma: float | None = None,
                      theta1: float = 1.0, theta2: float = 1.0) -> CertificateInput:
    """Assemble certificate inputs, choosing β = ηm_ρ/Δ and the smallest feasible σ when not given."""
    d = prob.dim
    H, Ht = wp.H(d), wp.H_tilde(d)
    if m_rho is None:
        m_rho = m_rho_quadratic(prob, Ht, rho)
    if beta is None:
        beta = eta * m_rho / Delta if Delta > 0 else 1.0
    LM = prob.Lambda_M()
    if sigma is None:
        sigma = min_feasible_sigma(A_a, LM, Delta, eta, beta)
    return CertificateInput(rho, H, Ht, LM, A_a, A_u, Delta, m_rho, eta, beta, sigma, theta1, theta2)


@dataclass
class DeltaCertificate:
    """δ̃ with its witness: the binding B_i and min eigenvalues at δ̃ and δ̃ + probe."""

    delta: float
    binding: int
    min_eigs: tuple
    min_eigs_after: tuple
    theta1: float
    theta2: float
    probe: float = 1e-6

    def report(self) -> str:
        lines = [f"delta_tilde = {self.delta:.12g}", f"contraction bound 1 - delta_tilde = {1 - self.delta:.12g}",
                 f"binding matrix B{self.binding}", f"theta1 = {self.theta1:g}, theta2 = {self.theta2:g}"]
        for i, (a, b) in enumerate(zip(self.min_eigs, self.min_eigs_after), 1):
            lines.append(f"  min eig B{i}: {a:.6g} at delta_tilde, {b:.6g} at delta_tilde + {self.probe:g}")
        return "\n".join(lines)


def _affine_parts(ci: CertificateInput, theta1: float, theta2: float):
    """B_i(δ) = C_i − δD_i; B₂ is restricted to Range(H̃), where it is not identically zero."""
    n = ci.A_a.shape[0]
    I = np.eye(n)
    rl = ci.rho * ci.lam_Ht
    Htp = psd_pinv(ci.H_tilde)
    Hs = psd_sqrt(ci.H)
    C1 = (2 * ci.eta * ci.m_rho - ci.beta * ci.Delta) * I
    D1 = ci.A_a + (1 + theta1) * (1 + theta2) * (ci.Lambda_M @ ci.Lambda_M) / rl
    w, U = np.linalg.eigh(0.5 * (ci.H_tilde + ci.H_tilde.T))
    U = U[:, w > EIG_TOL]
    C2 = ci.rho * (1 - ci.eta) * ci.H_tilde
    D2 = ci.rho * ci.H_tilde + ci.rho * (1 + 1 / theta1) * ci.H @ Htp @ ci.H
    C2, D2 = U.T @ C2 @ U, U.T @ D2 @ U
    C3 = (1 - ci.sigma) * ci.A_a
    D3 = 2 * (1 + theta1) * (1 + 1 / theta2) * (ci.A_u @ ci.A_u / rl + ci.rho * ci.lam_bar * Hs @ Htp @ Hs)
    sym = lambda S: 0.5 * (S + S.T)  # noqa: E731
    return [(sym(C1), sym(D1)), (sym(C2), sym(D2)), (sym(C3), sym(D3))]


def _min_eigs(parts, delta):
    return tuple(float(np.linalg.eigvalsh(C - delta * D)[0]) for C, D in parts)


_B_TEXT = ("B1 = (2ηm_ρ−βΔ)I − δA_a − δ(1+θ₁)(1+θ₂)Λ_M²/(ρλ_H̃)",
           "B2 = ρ(1−δ−η)H̃ − ρδ(1+1/θ₁)HH̃^†H",
           "B3 = (1−σ)A_a − 2δ(1+θ₁)(1+1/θ₂)(A_u²/(ρλ_H̃) + ρλ̄H^{1/2}H̃^†H^{1/2})")


def _bisect(parts, tol: float, feas: float):
    at0 = _min_eigs(parts, 0.0)
    bad = [i for i, e in enumerate(at0) if e < feas]
    if bad:
        i = bad[0]
        raise CertificateError(f"{_B_TEXT[i]} is not PSD at δ = 0⁺ (min eigenvalue {at0[i]:.3g})")
    lo, hi = 0.0, 1.0
    if min(_min_eigs(parts, hi)) >= feas:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if min(_min_eigs(parts, mid)) >= feas:
            lo = mid
        else:
            hi = mid
    return lo


def compute_delta_tilde(ci: CertificateInput, theta_grid=None, tol: float = 1e-12, feas: float = -PSD_TOL,
                        probe: float = 1e-6) -> DeltaCertificate:
    """Largest δ ∈ (0,1) with B₁(δ), B₂(δ), B₃(δ) ⪰ O, by bisection.

    Parameters
    ----------
    theta_grid : iterable of (θ₁, θ₂), optional
        Candidate pairs; the one giving the largest δ̃ is kept.
    feas : float
        Feasibility threshold on the minimum eigenvalue.
    """
    rep = ci.validate()
    if not rep.ok:
        raise ConfigurationError("certificate inputs invalid: " + "; ".join(c.name for c in rep.failures))
    pairs = list(theta_grid) if theta_grid is not None else [(ci.theta1, ci.theta2)]
    best = None
    for t1, t2 in pairs:
        if not (t1 > 0 and t2 > 0):
            raise ConfigurationError("θ₁, θ₂ must be positive")
        parts = _affine_parts(ci, t1, t2)
        delta = _bisect(parts, tol, feas)
        if best is None or delta > best[0]:
            best = (delta, parts, t1, t2)
    delta, parts, t1, t2 = best
    at = _min_eigs(parts, delta)
    after = _min_eigs(parts, delta + probe)
    binding = int(np.argmin(after)) + 1
    return DeltaCertificate(delta, binding, at, after, t1, t2, probe)


__all__ = [
    "TRACE_COLUMNS", "OptimalPoint", "optimal_point", "RunTrace", "TraceRecorder", "run_traced", "sigma_lower",
    "BoundCurves", "sublinear_bounds", "compute_d0", "varying_surrogate_bounds", "RateFit", "fit_rate",
    "sparse_rate_estimate", "m_rho_quadratic", "CertificateInput", "min_feasible_sigma", "certificate_input",
    "DeltaCertificate", "compute_delta_tilde",
]
