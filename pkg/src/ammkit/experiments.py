"""Configuration-driven experiment runner and report writer."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import graph_topology as gt
from .analysis import (OptimalPoint, RunTrace, certificate_input, compute_d0, compute_delta_tilde, fit_rate,
                       optimal_point, run_traced, sigma_lower, sublinear_bounds)
from .config import AlgorithmSpec, ExperimentConfig
from .engines import DammEngine, make_preset
from .errors import AmmError, CertificateError, ConfigurationError, RegimeError
from .local_solver import InnerSolverConfig
from .netsim import communication_cost
from .objectives import NetworkProblem
from .problems import (generate_benchmark_problem, load_problem, random_logistic_problem,
                       random_quadratic_problem)
from .surrogates import HessianPlusKernel, ScaledIdentityKernel, validate_bregman, varpi_kernel
from .validation import ValidationReport

# ====================================================================== construction


def build_topology(spec) -> gt.Topology:
    n = spec.nodes
    if spec.kind == "file":
        return gt.read_edge_list(spec.path, n)
    if n is None:
        raise ConfigurationError("topology needs a node count")
    if spec.kind == "random":
        return gt.random_connected_graph(n, spec.edges, seed=spec.seed)
    return {"path": gt.path_graph, "cycle": gt.cycle_graph, "complete": gt.complete_graph,
            "star": gt.star_graph}[spec.kind](n)


def build_problem(cfg: ExperimentConfig) -> NetworkProblem:
    p = cfg.problem
    if p.generator == "benchmark":
        prob = generate_benchmark_problem(p.seed, p.nodes, p.dim, p.rows or 3, p.edges)
    elif p.generator == "random_quadratic":
        prob = random_quadratic_problem(p.seed, p.nodes, p.dim, p.rows, h=p.h)
    elif p.generator == "random_logistic":
        prob = random_logistic_problem(p.seed, p.nodes, p.dim, samples=p.samples)
    else:
        prob = load_problem(p.path)
    if cfg.topology is not None:
        topo = build_topology(cfg.topology)
        if topo.n_nodes != prob.n_nodes:
            raise ConfigurationError(f"topology has {topo.n_nodes} nodes but the problem has {prob.n_nodes}")
        prob = prob.with_topology(topo)
    return prob


def weight_pair(kind: str, topo: gt.Topology) -> gt.WeightPair:
    """P = P̃ from a named rule."""
    if kind == "half_metropolis":
        S = 0.5 * gt.metropolis_matrix(topo)
    elif kind == "metropolis":
        S = gt.metropolis_matrix(topo)
    elif kind == "laplacian":
        S = gt.laplacian_matrix(topo)
    else:
        raise ConfigurationError(f"unknown weight rule '{kind}'")
    return gt.WeightPair(S, S.copy())


def build_damm(prob: NetworkProblem, kernel: str, weights: str, params: dict, inner: InnerSolverConfig):
    """DAMM with a named kernel.

    ε defaults to ρλ_max(P), the smallest value keeping φ convex; ``eps_factor``
    sets ε = eps_factor·ρλ_max(P) instead of an absolute value.
    """
    wp = weight_pair(weights, prob.topo)
    unknown = set(params) - {"rho", "eps", "eps_factor"}
    if unknown:
        raise ConfigurationError(f"unknown DAMM parameter(s): {', '.join(sorted(unknown))}")
    rho = float(params.get("rho", 1.0))
    if not rho > 0:
        raise ConfigurationError("ρ must be positive")
    if "eps" in params and "eps_factor" in params:
        raise ConfigurationError("give at most one of eps and eps_factor")
    eps = float(params.get("eps", float(params.get("eps_factor", 1.0)) * rho * gt.lambda_max(wp.P)))
    if kernel == "varpi":
        kernels = [varpi_kernel(f, eps) for f in prob.smooth]
    elif kernel == "hessian":
        kernels = [HessianPlusKernel(eps)] * prob.n_nodes
    else:
        kernels = [ScaledIdentityKernel(eps)] * prob.n_nodes
    eng = DammEngine(prob, wp, rho, kernels, inner=inner, name=f"damm_{kernel}")
    rep = ValidationReport(f"damm ({kernel})")
    for c in validate_bregman(eng.kernels, wp, rho, smooth=prob.smooth).checks:
        if not c.name.startswith("sufficient"):
            rep.add(c.name, c.passed, c.detail)
    return eng, rep, {"rho": rho, "eps": eps}


def build_algorithm(spec: AlgorithmSpec, prob: NetworkProblem, params: dict, inner: InnerSolverConfig, check=True):
    """(engine, validation report, resolved parameters) for one grid point."""
    if spec.preset is not None:
        p = dict(params)
        p.setdefault("inner", inner)
        pr = make_preset(spec.preset, prob, p, check=check)
        used = {k: v for k, v in pr.params.items() if np.isscalar(v)} if isinstance(pr.params, dict) else {}
        pr.engine.name = spec.name
        return pr.engine, pr.report, used
    eng, rep, used = build_damm(prob, spec.kernel, spec.weights, params, inner)
    if check and not rep.ok:
        raise ConfigurationError(f"{spec.name}: " + "; ".join(c.detail or c.name for c in rep.failures))
    eng.name = spec.name
    return eng, rep, used


def validate_experiment(cfg: ExperimentConfig, prob: NetworkProblem | None = None) -> list:
    """Run every validator for every grid point without iterating; returns (label, report) pairs."""
    prob = prob or build_problem(cfg)
    inner = InnerSolverConfig(tol=cfg.tolerances.inner)
    out = []
    for spec in cfg.algorithms:
        for params in spec.grid_points():
            label = spec.name + ("" if not spec.grid else " " + _fmt_params(params))
            try:
                _, rep, _ = build_algorithm(spec, prob, params, inner, check=False)
            except AmmError as e:
                rep = ValidationReport(label)
                rep.add("construction", False, str(e))
            out.append((label, rep))
    return out


def _fmt_params(p: dict) -> str:
    return "(" + ", ".join(f"{k}={v}" for k, v in sorted(p.items()) if np.isscalar(v)) + ")"


# ====================================================================== runs


@dataclass
class AlgorithmOutcome:
    name: str
    params: dict
    trace: RunTrace
    hit: int | None
    mode: str
    comm_cost: float
    aborted: bool
    error: str | None
    grid: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.aborted and self.error is None


def _first_hit(trace: RunTrace, threshold: float):
    e = trace.column("optimality_err_iterate")
    idx = np.flatnonzero(e <= threshold)
    return int(trace.k[idx[0]]) if idx.size else None


def _score(hit, final):
    return (math.inf if hit is None else hit, final if np.isfinite(final) else math.inf)


def in_sublinear_regime(engine) -> bool:
    """True when the surrogate matrix is constant and σ̲ < 1, i.e. A ≻ Λ_M/2."""
    if not engine.A_constant:
        return False
    try:
        return sigma_lower(engine.A_matrix(), engine.prob.Lambda_M()) < 1
    except RegimeError:
        return False


def grid_search(spec: AlgorithmSpec, prob, opt, iters: int, threshold: float, inner: InnerSolverConfig,
                cap: int | None = None):
    """Pick the grid point reaching ``threshold`` in the fewest iterations (then smallest final error).

    With ``spec.regime == "sublinear"`` points outside A ≻ Λ_M/2 are skipped and
    logged with a NaN error. ``cap`` bounds the iterations of each grid run.
    Returns (best params, log of (params, hit, final error)).
    """
    log, best = [], None
    for params in spec.grid_points():
        eng, _, _ = build_algorithm(spec, prob, params, inner)
        if spec.regime == "sublinear" and not in_sublinear_regime(eng):
            log.append((params, None, float("nan")))
            continue
        _, tr = run_traced(eng, opt, cap if cap is not None else iters, A=None, stop_below=threshold,
                           cadence=max(1, iters))
        hit = tr.meta["hit"]
        final = tr.rows[-1][5]
        log.append((params, hit, final))
        if best is None or _score(hit, final) < _score(best[1], best[2]):
            best = (params, hit, final)
    if best is None:
        raise ConfigurationError(f"{spec.name}: no grid point satisfies A ≻ Λ_M/2")
    return best[0], log


def _fits(trace: RunTrace, iters: int) -> dict:
    out = {}
    k1 = max(1, iters // 100)
    for col, key in (("optimality_err_avg", "avg"), ("optimality_err_iterate", "iterate")):
        try:
            f = fit_rate(trace.column(col), trace.k, window=(k1, iters))
            out[key] = {"power_slope": f.power_slope, "geometric_factor": f.geometric_factor,
                        "window": list(f.window), "truncated": f.truncated}
        except ValueError as e:
            out[key] = {"error": str(e)}
    return out


def sublinear_constants(engine, opt: OptimalPoint) -> dict:
    """σ̲ and the 1/k coefficients of the sublinear bounds at the default start."""
    if not engine.A_constant:
        return {"note": "surrogate matrix varies with k"}
    A = engine.A_matrix()
    s0 = engine.init_state()
    v0 = engine.v_from_q(s0.q)
    try:
        b = sublinear_bounds([1.0], v0, opt.v, s0.x, opt.X, A, engine.rho, engine.prob.Lambda_M())
    except RegimeError as e:
        return {"regime": False, "note": str(e)}
    return {"regime": True, "sigma_lower": b.constants["sigma_lower"], "consensus_coef": float(b.consensus[0]),
            "objective_upper_coef": float(b.objective_upper[0]), "objective_lower_coef": float(b.objective_lower[0])}


def linear_rate_constants(engine, opt: OptimalPoint, eta: float = 0.5) -> dict:
    """δ̃ (smooth problems) or d₀ (nonsmooth) for constant surrogates with quadratic f."""
    prob = engine.prob
    if not (engine.A_constant and prob.smooth_is_quadratic):
        return {"note": "needs a constant surrogate and quadratic f"}
    A = engine.A_matrix()
    try:
        ci = certificate_input(prob, engine.wp, engine.rho, A, A, 0.0, eta=eta)
    except (RegimeError, AmmError) as e:
        return {"note": str(e)}
    out = {"m_rho": ci.m_rho, "eta": ci.eta, "sigma": ci.sigma}
    s0 = engine.init_state()
    out["d0"] = compute_d0(s0.x, engine.v_from_q(s0.q), opt.X, opt.v, A, engine.wp.H_tilde(prob.dim), engine.rho)
    if prob.h_is_zero:
        try:
            cert = compute_delta_tilde(ci)
            out.update(delta_tilde=cert.delta, binding=cert.binding)
        except (CertificateError, ConfigurationError) as e:
            out["note"] = str(e)
    return out


def run_algorithm(spec: AlgorithmSpec, prob, opt, cfg: ExperimentConfig) -> AlgorithmOutcome:
    inner = InnerSolverConfig(tol=cfg.tolerances.inner)
    thr = cfg.tolerances.threshold
    grid_log = []
    params = spec.grid_points()[0]
    if spec.grid or spec.regime:
        params, grid_log = grid_search(spec, prob, opt, cfg.iterations, thr, inner)
    eng, _, used = build_algorithm(spec, prob, params, inner)
    res, tr = run_traced(eng, opt, cfg.iterations, strict=cfg.strict, cadence=cfg.cadence)
    tr.name = spec.name
    out = AlgorithmOutcome(spec.name, used or params, tr, _first_hit(tr, thr), res.mode, communication_cost(res),
                           res.aborted, res.error, grid_log)
    if cfg.iterations >= 2 and not res.aborted:
        out.fits = _fits(tr, cfg.iterations)
    out.constants = {"sublinear": sublinear_constants(eng, opt), "linear_rate": linear_rate_constants(eng, opt)}
    return out


@dataclass
class ExperimentResult:
    outcomes: list
    output: Path | None
    errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and all(o.ok for o in self.outcomes)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (int, str, bool)) or x is None:
        return x
    return str(x)


def summary_dict(cfg: ExperimentConfig, result: ExperimentResult) -> dict:
    return _jsonable({
        "config": cfg.source, "iterations": cfg.iterations, "threshold": cfg.tolerances.threshold,
        "ok": result.ok, "errors": result.errors,
        "algorithms": [{
            "name": o.name, "params": o.params, "mode": o.mode, "communication_cost": o.comm_cost,
            "iterations_to_threshold": o.hit, "final": dict(zip(("obj_err_iterate", "obj_err_avg", "cons_err_iterate",
                                                                 "cons_err_avg", "optimality_err_iterate",
                                                                 "optimality_err_avg"), o.trace.rows[-1][1:7]))
            if o.trace.rows else {},
            "aborted": o.aborted, "error": o.error, "rate_fits": o.fits, "constants": o.constants,
            "grid": [{"params": p, "iterations_to_threshold": h, "final_optimality_err": f} for p, h, f in o.grid],
        } for o in result.outcomes],
    })


def summary_text(summary: dict) -> str:
    lines = [f"iterations: {summary['iterations']}, threshold: {summary['threshold']:g}", ""]
    for a in summary["algorithms"]:
        status = "ok" if not a["aborted"] and not a["error"] else f"FAILED: {a['error']}"
        lines.append(f"{a['name']}: {status}")
        lines.append(f"  params: {a['params']}")
        lines.append(f"  mode: {a['mode']}, communication cost: {a['communication_cost']:g}")
        lines.append(f"  iterations to threshold: {a['iterations_to_threshold']}")
        if a["final"]:
            lines.append(f"  final optimality error: iterate {a['final']['optimality_err_iterate']:.3e}, "
                         f"average {a['final']['optimality_err_avg']:.3e}")
        for key, f in a["rate_fits"].items():
            if "error" not in f:
                lines.append(f"  fit ({key}): power slope {f['power_slope']:.4f}, "
                             f"geometric factor {f['geometric_factor']:.6f}")
        for key, c in a["constants"].items():
            lines.append(f"  {key}: {c}")
    for e in summary["errors"]:
        lines.append(f"error: {e}")
    return "\n".join(lines) + "\n"


@dataclass
class RaceResult:
    """Iterations to threshold for a leader and its competitors (None: not reached within the cap)."""

    leader: str
    hits: dict
    params: dict

    @property
    def leader_wins(self) -> bool:
        h = self.hits[self.leader]
        if h is None:
            return False
        return all(v is None or v > h for k, v in self.hits.items() if k != self.leader)


def race(cfg: ExperimentConfig, max_iters: int | None = None) -> RaceResult:
    """Grid-search every algorithm for the fewest iterations to the threshold.

    The first configured algorithm is the leader; each competitor grid run is
    capped at the leader's hit count, since only whether it gets there first
    matters.
    """
    if not cfg.algorithms:
        raise ConfigurationError("no algorithms configured")
    prob = build_problem(cfg)
    inner = InnerSolverConfig(tol=cfg.tolerances.inner)
    thr = cfg.tolerances.threshold
    iters = max_iters or cfg.iterations
    opt = optimal_point(prob, weight_pair("half_metropolis", prob.topo).P_tilde, tol=cfg.tolerances.reference)
    hits, params, cap = {}, {}, iters
    for n, spec in enumerate(cfg.algorithms):
        best, log = grid_search(spec, prob, _with_dual(opt, prob, spec, cfg), iters, thr, inner, cap=cap)
        hit = min((h for _, h, _ in log if h is not None), default=None)
        hits[spec.name], params[spec.name] = hit, best
        if n == 0:
            if hit is None:
                break
            cap = hit
    return RaceResult(cfg.algorithms[0].name, hits, params)


def run_experiment(cfg: ExperimentConfig, output=None, write: bool = True) -> ExperimentResult:
    """Validate everything, run every algorithm, write one CSV per algorithm plus a summary."""
    if not cfg.algorithms:
        raise ConfigurationError("no algorithms configured")
    prob = build_problem(cfg)
    bad = [(label, rep) for label, rep in validate_experiment(cfg, prob) if not rep.ok]
    if bad:
        raise ConfigurationError("; ".join(f"{label}: " + ", ".join(c.detail or c.name for c in rep.failures)
                                           for label, rep in bad))
    Pt = weight_pair("half_metropolis", prob.topo).P_tilde
    opt = optimal_point(prob, Pt, tol=cfg.tolerances.reference)
    out_dir = Path(output or cfg.output) if write else None
    result = ExperimentResult([], out_dir)
    for spec in cfg.algorithms:
        try:
            outcome = run_algorithm(spec, prob, _with_dual(opt, prob, spec, cfg), cfg)
        except AmmError as e:
            result.errors.append(f"{spec.name}: {e}")
            continue
        result.outcomes.append(outcome)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        for o in result.outcomes:
            o.trace.to_csv(out_dir / f"{o.name}.csv")
        summ = summary_dict(cfg, result)
        (out_dir / "summary.json").write_text(json.dumps(summ, indent=2, ensure_ascii=False), encoding="utf-8")
        (out_dir / "summary.txt").write_text(summary_text(summ), encoding="utf-8")
    return result


def _with_dual(opt: OptimalPoint, prob, spec, cfg) -> OptimalPoint:
    """Re-express 𝐯⋆ for the algorithm's own P̃ (𝐪⋆ does not depend on it)."""
    inner = InnerSolverConfig(tol=cfg.tolerances.inner)
    eng, _, _ = build_algorithm(spec, prob, spec.grid_points()[0], inner, check=False)
    return OptimalPoint(opt.X, opt.F, opt.q, eng.v_from_q(opt.q), opt.warning)


def certificate_report(cfg: ExperimentConfig) -> str:
    """Sublinear-bound constants and the linear-rate certificate for each configured algorithm."""
    prob = build_problem(cfg)
    inner = InnerSolverConfig(tol=cfg.tolerances.inner)
    Pt = weight_pair("half_metropolis", prob.topo).P_tilde
    opt = optimal_point(prob, Pt, tol=cfg.tolerances.reference)
    lines = []
    for spec in cfg.algorithms:
        eng, rep, used = build_algorithm(spec, prob, spec.grid_points()[0], inner, check=False)
        o = OptimalPoint(opt.X, opt.F, opt.q, eng.v_from_q(opt.q))
        lines.append(f"[{spec.name}]")
        lines.append(f"  validation: {'ok' if rep.ok else 'FAILED'}")
        if eng.A_constant:
            try:
                lines.append(f"  sigma_lower = {sigma_lower(eng.A_matrix(), prob.Lambda_M()):.12g}")
            except RegimeError as e:
                lines.append(f"  sigma_lower: {e}")
        for k, v in sublinear_constants(eng, o).items():
            lines.append(f"  sublinear.{k} = {v}")
        lr = linear_rate_constants(eng, o)
        for k, v in lr.items():
            lines.append(f"  linear_rate.{k} = {v}")
        if "delta_tilde" in lr:
            lines.append(f"  contraction bound 1 - delta_tilde = {1 - lr['delta_tilde']:.12g}")
    return "\n".join(lines) + "\n"


__all__ = ["build_topology", "build_problem", "weight_pair", "build_damm", "build_algorithm", "validate_experiment",
           "AlgorithmOutcome", "in_sublinear_regime", "grid_search", "sublinear_constants", "linear_rate_constants",
           "run_algorithm", "ExperimentResult", "summary_dict", "summary_text", "run_experiment", "RaceResult", "race",
           "certificate_report"]
