import textwrap

import pytest

from ammkit.config import load_config, parse_config
from ammkit.errors import ConfigError

BASE = """\
version: 1
problem:
  generator: random_quadratic
  nodes: 4
  dim: 2
algorithms:
  - name: a
    preset: pg_extra
    params: {alpha: 0.05}
iterations: 5
"""


def doc(text):
    return textwrap.dedent(text)


class TestParse:
    def test_minimal(self):
        cfg = parse_config(BASE)
        assert cfg.problem.generator == "random_quadratic" and cfg.problem.nodes == 4
        assert cfg.iterations == 5 and cfg.cadence == 1 and not cfg.strict
        assert cfg.algorithms[0].grid_points() == [{"alpha": 0.05}]
        assert cfg.tolerances.threshold == 1e-6

    def test_grid_product(self):
        cfg = parse_config(BASE.replace("params: {alpha: 0.05}", "params: {beta: 1}\n    grid: {alpha: [1, 2], c: [3]}"))
        assert cfg.algorithms[0].grid_points() == [{"beta": 1, "alpha": 1, "c": 3}, {"beta": 1, "alpha": 2, "c": 3}]

    def test_paths_resolve_against_file(self, tmp_path):
        p = tmp_path / "exp.yaml"
        p.write_text(BASE + "output: out\n")
        cfg = load_config(p)
        assert cfg.output == str(tmp_path / "out") and cfg.source == str(p)

    def test_shipped_configs_parse(self):
        from pathlib import Path

        root = Path(__file__).resolve().parents[1] / "configs"
        for p in sorted(root.glob("*.yaml")):
            assert load_config(p).algorithms


class TestErrors:
    def test_missing_version(self):
        with pytest.raises(ConfigError, match="missing version header") as e:
            parse_config(BASE.replace("version: 1\n", ""))
        assert e.value.line == 1

    def test_wrong_version(self):
        with pytest.raises(ConfigError, match="unsupported version"):
            parse_config(BASE.replace("version: 1", "version: 2"))

    def test_no_algorithms(self):
        text = BASE.split("algorithms:")[0] + "algorithms: []\n"
        with pytest.raises(ConfigError, match="no algorithms configured") as e:
            parse_config(text)
        assert e.value.line == 6

    @pytest.mark.parametrize("old, new, line, field", [
        ("nodes: 4", "nodes: four", 4, "problem.nodes"),
        ("dim: 2", "dim: -2", 5, "problem.dim"),
        ("generator: random_quadratic", "generator: banana", 3, "problem.generator"),
        ("preset: pg_extra", "preset: pg_extra\n    engine: damm", 7, "algorithms.0"),
        ("iterations: 5", "iterations: -1", 10, "iterations"),
        ("iterations: 5", "iterationz: 5", 10, "iterationz"),
        ("params: {alpha: 0.05}", "grid: {alpha: []}", 9, "algorithms.0.grid.alpha"),
    ])
    def test_line_numbers(self, old, new, line, field):
        with pytest.raises(ConfigError) as e:
            parse_config(BASE.replace(old, new))
        assert e.value.line == line and e.value.field == field
        assert f"line {line}" in str(e.value)

    def test_duplicate_names(self):
        text = BASE + doc("""\
            algorithms:
              - {name: a, preset: dpga}
              - {name: a, preset: pg_extra}
            """)
        text = BASE.split("algorithms:")[0] + text.split("iterations: 5\n")[1]
        with pytest.raises(ConfigError, match="duplicate algorithm name"):
            parse_config(text)

    def test_yaml_syntax(self):
        with pytest.raises(ConfigError, match="YAML syntax error") as e:
            parse_config("version: 1\nproblem: [\n")
        assert e.value.line is not None

    def test_random_topology_needs_edges(self):
        with pytest.raises(ConfigError, match="edge count"):
            parse_config(BASE + "topology: {kind: random, nodes: 4}\n")

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "missing.yaml")
