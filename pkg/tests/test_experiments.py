import json

import numpy as np
import pytest

from ammkit.analysis import RunTrace
from ammkit.config import parse_config
from ammkit.errors import ConfigurationError
from ammkit.experiments import certificate_report, race, run_experiment, summary_dict, summary_text, \
    validate_experiment

CFG = """\
version: 1
problem: {generator: random_quadratic, seed: 3, nodes: 5, dim: 2, h: l1}
topology: {kind: cycle, nodes: 5}
algorithms:
  - {name: damm, engine: damm, kernel: varpi, weights: metropolis, params: {rho: 1.0, eps_factor: 1.2}}
  - {name: pg_extra, preset: pg_extra, params: {alpha: 0.05}}
iterations: ITERS
tolerances: {threshold: 1.0e-4}
"""


def cfg(iters=60, text=CFG):
    return parse_config(text.replace("ITERS", str(iters)))


class TestRun:
    def test_traces_and_summary(self, tmp_path):
        res = run_experiment(cfg(), output=tmp_path)
        assert res.ok
        for name in ("damm", "pg_extra"):
            tr = RunTrace.from_csv(tmp_path / f"{name}.csv")
            assert list(tr.k) == list(range(61))
            rows = np.array(tr.rows)
            np.testing.assert_allclose(rows[:, 5], np.abs(rows[:, 1]) + rows[:, 3], rtol=1e-12)
            np.testing.assert_allclose(rows[:, 6], np.abs(rows[:, 2]) + rows[:, 4], rtol=1e-12)
        summ = json.loads((tmp_path / "summary.json").read_text())
        assert [a["name"] for a in summ["algorithms"]] == ["damm", "pg_extra"]
        assert summ["algorithms"][0]["communication_cost"] == 1.0
        assert "damm: ok" in (tmp_path / "summary.txt").read_text()

    def test_zero_iterations(self, tmp_path):
        res = run_experiment(cfg(0), output=tmp_path)
        for o in res.outcomes:
            assert list(o.trace.k) == [0] and o.fits == {}
        assert len((tmp_path / "damm.csv").read_text().splitlines()) == 2

    def test_bitwise_reproducible(self, tmp_path):
        run_experiment(cfg(30), output=tmp_path / "a")
        run_experiment(cfg(30), output=tmp_path / "b")
        for name in ("damm.csv", "pg_extra.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_no_write(self):
        res = run_experiment(cfg(5), write=False)
        assert res.output is None and len(res.outcomes) == 2
        assert "iterations: 5" in summary_text(summary_dict(cfg(5), res))

    def test_invalid_weights_rejected_before_running(self, tmp_path):
        from pathlib import Path

        from ammkit.config import load_config

        bad = load_config(Path(__file__).resolve().parents[1] / "configs" / "extra_bad_weights.yaml")
        with pytest.raises(ConfigurationError, match="W̃ − W"):
            run_experiment(bad, output=tmp_path)
        assert not any(tmp_path.iterdir())


class TestValidate:
    def test_reports_per_algorithm(self):
        reports = validate_experiment(cfg())
        assert len(reports) >= 2 and all(rep.ok for _, rep in reports)


class TestRace:
    def test_hits_recorded(self):
        r = race(cfg(400))
        assert r.leader == "damm" and set(r.hits) == {"damm", "pg_extra"}
        # competitors are capped at the leader's count, so the comparison is exact
        assert r.hits["damm"] == 117 and r.hits["pg_extra"] == 52
        assert not r.leader_wins


def test_certificate_report_lists_each_algorithm():
    text = certificate_report(cfg())
    assert "[damm]" in text and "[pg_extra]" in text and "sublinear." in text
