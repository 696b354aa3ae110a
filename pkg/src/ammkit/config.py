"""Experiment configuration: a versioned YAML document.

Schema (``version: 1``)::

    version: 1
    problem:
      generator: benchmark | random_quadratic | random_logistic | file
      seed: 0
      nodes: 20            # all generators
      dim: 5
      rows: 3              # rows of B_i (benchmark, random_quadratic)
      edges: 26            # benchmark only
      h: zero              # random_quadratic: zero | l1 | ball | l1_ball
      samples: 10          # random_logistic
      path: problem.json   # file
    topology:              # optional; replaces the generator's graph
      kind: random | path | cycle | complete | star | file
      nodes: 20
      edges: 26
      seed: 7
      path: graph.txt
    algorithms:
      - name: pg_extra     # unique label, also the CSV file stem
        preset: pg_extra   # one of the registered presets, or
        engine: damm       # a DAMM engine with a named kernel
        kernel: varpi      # varpi | hessian | scaled_identity
        weights: half_metropolis   # P = P̃: half_metropolis | metropolis | laplacian
        params: {alpha: 0.05}
        grid: {alpha: [0.01, 0.05]}
        regime: sublinear   # optional: keep only grid points with A ≻ Λ_M/2
    iterations: 1000
    cadence: 1
    output: results
    strict: false
    tolerances:
      inner: 1.0e-10
      threshold: 1.0e-6
      reference: 1.0e-12

Errors carry the dotted field path and the 1-based line of the offending
entry.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

CONFIG_VERSION = 1
GENERATORS = ("benchmark", "random_quadratic", "random_logistic", "file")
TOPOLOGIES = ("random", "path", "cycle", "complete", "star", "file")
KERNELS = ("varpi", "hessian", "scaled_identity")
WEIGHTS = ("half_metropolis", "metropolis", "laplacian")
REGIMES = ("sublinear",)


@dataclass
class ProblemSpec:
    generator: str = "benchmark"
    seed: int = 0
    nodes: int = 20
    dim: int = 5
    rows: int | None = None
    edges: int = 26
    h: str = "zero"
    samples: int = 10
    path: str | None = None


@dataclass
class TopologySpec:
    kind: str
    nodes: int | None = None
    edges: int | None = None
    seed: int = 0
    path: str | None = None


@dataclass
class AlgorithmSpec:
    """One algorithm entry; ``grid`` maps parameter names to candidate lists."""

    name: str
    preset: str | None = None
    engine: str | None = None
    kernel: str = "varpi"
    weights: str = "half_metropolis"
    params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    regime: str | None = None

    def grid_points(self) -> list:
        """Parameter dicts for every grid combination (just ``params`` without a grid)."""
        if not self.grid:
            return [dict(self.params)]
        keys = sorted(self.grid)
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            p = dict(self.params)
            p.update(zip(keys, combo))
            out.append(p)
        return out


@dataclass
class Tolerances:
    inner: float = 1e-10
    threshold: float = 1e-6
    reference: float = 1e-12


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    algorithms: list
    topology: TopologySpec | None = None
    iterations: int = 1000
    cadence: int = 1
    output: str = "results"
    strict: bool = False
    tolerances: Tolerances = field(default_factory=Tolerances)
    source: str | None = None


# ====================================================================== parsing helpers


class _Locator:
    """Maps dotted field paths to 1-based source lines via the YAML node tree."""

    def __init__(self, node):
        self.root = node

    def line(self, path: str):
        node = self.root
        if node is None:
            return None
        best = node.start_mark.line + 1
        for part in path.split(".") if path else []:
            if isinstance(node, yaml.MappingNode):
                nxt = None
                for k, v in node.value:
                    if k.value == part:
                        best = k.start_mark.line + 1
                        nxt = v
                        break
                if nxt is None:
                    return best
                node = nxt
            elif isinstance(node, yaml.SequenceNode) and part.isdigit() and int(part) < len(node.value):
                node = node.value[int(part)]
                best = node.start_mark.line + 1
            else:
                return best
        return best


class _Reader:
    def __init__(self, loc: _Locator):
        self.loc = loc

    def fail(self, msg, path):
        raise ConfigError(msg, self.loc.line(path), path)

    def mapping(self, doc, path, allowed):
        if doc is None:
            return {}
        if not isinstance(doc, dict):
            self.fail("expected a mapping", path)
        for k in doc:
            if k not in allowed:
                self.fail(f"unknown key '{k}'", f"{path}.{k}" if path else str(k))
        return doc

    def get(self, doc, key, path, kind, default=None, choices=None, positive=False):
        full = f"{path}.{key}" if path else key
        if key not in doc or doc[key] is None:
            return default
        v = doc[key]
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                self.fail("expected an integer", full)
        elif kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                self.fail("expected a number", full)
            v = float(v)
        elif kind is bool:
            if not isinstance(v, bool):
                self.fail("expected true or false", full)
        elif kind is str:
            if not isinstance(v, str):
                self.fail("expected a string", full)
        elif kind is dict:
            if not isinstance(v, dict):
                self.fail("expected a mapping", full)
        if choices is not None and v not in choices:
            self.fail(f"'{v}' is not one of {', '.join(choices)}", full)
        if positive and not v > 0:
            self.fail("must be positive", full)
        return v


def parse_config(text: str, source: str | None = None, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse and structurally validate a configuration document."""
    try:
        node = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(e, 'problem', e)}", mark.line + 1 if mark else None) from None
    rd = _Reader(_Locator(node))
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping", 1)
    rd.mapping(doc, "", {"version", "problem", "topology", "algorithms", "iterations", "cadence", "output",
                         "strict", "tolerances"})
    if "version" not in doc:
        raise ConfigError("missing version header", 1, "version")
    if doc["version"] != CONFIG_VERSION:
        rd.fail(f"unsupported version {doc['version']!r} (expected {CONFIG_VERSION})", "version")

    base = base_dir or Path(".")

    def resolve(p):
        return None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))

    pd = rd.mapping(doc.get("problem"), "problem",
                    {"generator", "seed", "nodes", "dim", "rows", "edges", "h", "samples", "path"})
    if not pd:
        rd.fail("missing problem section", "problem")
    prob = ProblemSpec(
        generator=rd.get(pd, "generator", "problem", str, "benchmark", GENERATORS),
        seed=rd.get(pd, "seed", "problem", int, 0),
        nodes=rd.get(pd, "nodes", "problem", int, 20, positive=True),
        dim=rd.get(pd, "dim", "problem", int, 5, positive=True),
        rows=rd.get(pd, "rows", "problem", int, None, positive=True),
        edges=rd.get(pd, "edges", "problem", int, 26, positive=True),
        h=rd.get(pd, "h", "problem", str, "zero", ("zero", "l1", "ball", "l1_ball")),
        samples=rd.get(pd, "samples", "problem", int, 10, positive=True),
        path=resolve(rd.get(pd, "path", "problem", str)),
    )
    if prob.generator == "file" and prob.path is None:
        rd.fail("file generator needs a path", "problem.path")

    topo = None
    if doc.get("topology") is not None:
        td = rd.mapping(doc["topology"], "topology", {"kind", "nodes", "edges", "seed", "path"})
        topo = TopologySpec(
            kind=rd.get(td, "kind", "topology", str, None, TOPOLOGIES),
            nodes=rd.get(td, "nodes", "topology", int, None, positive=True),
            edges=rd.get(td, "edges", "topology", int, None, positive=True),
            seed=rd.get(td, "seed", "topology", int, 0),
            path=resolve(rd.get(td, "path", "topology", str)),
        )
        if topo.kind is None:
            rd.fail("missing topology kind", "topology.kind")
        if topo.kind == "file" and topo.path is None:
            rd.fail("file topology needs a path", "topology.path")
        if topo.kind == "random" and topo.edges is None:
            rd.fail("random topology needs an edge count", "topology.edges")

    algs = doc.get("algorithms")
    if algs is None or algs == []:
        raise ConfigError("no algorithms configured", rd.loc.line("algorithms"), "algorithms")
    if not isinstance(algs, list):
        rd.fail("expected a list", "algorithms")
    specs, names = [], set()
    for i, a in enumerate(algs):
        path = f"algorithms.{i}"
        a = rd.mapping(a, path, {"name", "preset", "engine", "kernel", "weights", "params", "grid",
                                     "regime"})
        preset = rd.get(a, "preset", path, str)
        engine = rd.get(a, "engine", path, str, None, ("damm",))
        if (preset is None) == (engine is None):
            rd.fail("give exactly one of preset or engine", path)
        name = rd.get(a, "name", path, str, preset or engine)
        if name in names:
            rd.fail(f"duplicate algorithm name '{name}'", f"{path}.name")
        names.add(name)
        params = rd.get(a, "params", path, dict, {})
        grid = rd.get(a, "grid", path, dict, {})
        for k, v in grid.items():
            if not isinstance(v, list) or not v:
                rd.fail("grid entries must be non-empty lists", f"{path}.grid.{k}")
        specs.append(AlgorithmSpec(name, preset, engine, rd.get(a, "kernel", path, str, "varpi", KERNELS),
                                   rd.get(a, "weights", path, str, "half_metropolis", WEIGHTS), params, grid,
                                   rd.get(a, "regime", path, str, None, REGIMES)))

    tol = Tolerances()
    if doc.get("tolerances") is not None:
        td = rd.mapping(doc["tolerances"], "tolerances", {"inner", "threshold", "reference"})
        tol = Tolerances(rd.get(td, "inner", "tolerances", float, tol.inner, positive=True),
                         rd.get(td, "threshold", "tolerances", float, tol.threshold, positive=True),
                         rd.get(td, "reference", "tolerances", float, tol.reference, positive=True))
    iters = rd.get(doc, "iterations", "", int, 1000)
    if iters < 0:
        rd.fail("must be nonnegative", "iterations")
    out = rd.get(doc, "output", "", str, "results")
    return ExperimentConfig(
        problem=prob, algorithms=specs, topology=topo, iterations=iters,
        cadence=rd.get(doc, "cadence", "", int, 1, positive=True),
        output=resolve(out), strict=rd.get(doc, "strict", "", bool, False), tolerances=tol, source=source,
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {p}: {e.strerror}") from None
    return parse_config(text, source=str(p), base_dir=p.parent)


__all__ = ["CONFIG_VERSION", "ProblemSpec", "TopologySpec", "AlgorithmSpec", "Tolerances", "ExperimentConfig",
           "parse_config", "load_config"]
