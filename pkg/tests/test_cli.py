import subprocess
import sys
from pathlib import Path

import pytest

from ammkit.cli import main
from ammkit.engines import preset_names
from ammkit.graph_topology import read_edge_list

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """\
version: 1
problem: {generator: random_quadratic, seed: 0, nodes: 4, dim: 2}
topology: {kind: path, nodes: 4}
algorithms:
  - {name: pg_extra, preset: pg_extra, params: {alpha: 0.05}}
iterations: 10
"""


def test_presets_list(capsys):
    assert main(["presets", "list"]) == 0
    out = capsys.readouterr().out.split()
    assert len(out) == 13 and out == list(preset_names())


def test_graph_gen_file(tmp_path):
    path = tmp_path / "g.txt"
    assert main(["graph", "gen", "--nodes", "20", "--edges", "26", "--seed", "7", "--output", str(path)]) == 0
    assert len([ln for ln in path.read_text().splitlines() if ln.strip()]) == 26
    topo = read_edge_list(path, 20)
    assert topo.n_edges == 26 and topo.is_connected()


def test_graph_gen_stdout_is_one_based(capsys):
    assert main(["graph", "gen", "--nodes", "5", "--edges", "4", "--seed", "1"]) == 0
    pairs = [tuple(map(int, ln.split())) for ln in capsys.readouterr().out.splitlines()]
    assert len(pairs) == 4 and min(min(p) for p in pairs) >= 1 and max(max(p) for p in pairs) <= 5


def test_graph_gen_impossible(capsys):
    assert main(["graph", "gen", "--nodes", "4", "--edges", "2"]) == 1
    assert "error:" in capsys.readouterr().err


def test_validate_bad_weights(capsys):
    assert main(["validate", str(CONFIGS / "extra_bad_weights.yaml")]) == 1
    out = capsys.readouterr().out
    assert "W̃ − W not PSD" in out and "validation failed" in out


def test_validate_ok(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text(SMALL)
    assert main(["validate", str(p)]) == 0
    assert "all checks passed" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text(SMALL.replace("version: 1\n", ""))
    assert main(["run", str(p)]) == 1
    assert "missing version header" in capsys.readouterr().err


def test_run_writes_outputs(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["run", str(p), "--output", str(out)]) == 0
    assert (out / "pg_extra.csv").exists() and (out / "summary.json").exists()
    assert "wrote 1 trace(s)" in capsys.readouterr().out


def test_certificate(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text(SMALL)
    assert main(["certificate", str(p)]) == 0
    assert "[pg_extra]" in capsys.readouterr().out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ammkit.cli", "presets", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "pg_extra" in r.stdout.split()


def test_missing_subcommand():
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2
