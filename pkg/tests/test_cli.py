import json

import numpy as np
import pytest

from arratia_lab import cli
from arratia_lab.experiments import ConfigError, ExperimentConfig, run, run_batch


def test_config_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig("nope").resolved()
    with pytest.raises(ConfigError):
        ExperimentConfig("lemma1", replicas=0).resolved()
    with pytest.raises(ConfigError):
        ExperimentConfig("lemma1", t=(-1.0,)).resolved()


def test_defaults_filled():
    cfg = ExperimentConfig("essentiality").resolved()
    assert cfg.replicas == 20_000 and cfg.t == (1.0, 2.0) and cfg.scheme == "bridge"


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["lemma1", "--replicas", "0", "--out", str(tmp_path)]) == 3
    with pytest.raises(SystemExit) as exc:
        cli.main(["lemma1", "--scheme", "euler"])
    assert exc.value.code == 3
    code = cli.main(["lemma1", "--replicas", "400", "--out", str(tmp_path), "--no-figures"])
    assert code in (0, 2)
    out = capsys.readouterr().out
    assert "=== lemma1 ===" in out and "decay-1-2|" in out


def test_verdict_schema_and_reproducible_csv(tmp_path):
    args = ["coalescence", "--replicas", "300", "--t", "0.5,1", "--dt", "0.01"]
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(args + ["--out", str(a)])
    cli.main(args + ["--out", str(b), "--no-figures"])
    for name in ("cells.csv", "ks.csv"):
        assert (a / "coalescence" / name).read_bytes() == (b / "coalescence" / name).read_bytes()
    assert (a / "coalescence" / "coalescence.png").exists()
    v = json.loads((a / "coalescence" / "verdict.json").read_text())
    for key in ("experiment", "params", "seed", "replicas", "estimate", "ci", "oracle", "verdict"):
        assert key in v
    assert v["params"]["t"] == [0.5, 1.0]
    assert v["verdict"] in ("pass", "fail", "report-only")
    header = (a / "coalescence" / "cells.csv").read_text().splitlines()[0]
    assert header.startswith("gap,t,replicas")
    rows = (a / "coalescence" / "cells.csv").read_text().splitlines()[1:]
    assert rows[0].split(",")[4] == "1.0"  # zero gap row is merged at once


def test_workers_do_not_change_results():
    one = run_batch([0.0, 0.4, 1.0], 0.2, 1e-2, "bridge", 5, 6, "final", workers=1)
    two = run_batch([0.0, 0.4, 1.0], 0.2, 1e-2, "bridge", 5, 6, "final", workers=2)
    assert np.array_equal(one.positions, two.positions)
    assert np.array_equal(one.labels, two.labels)
    assert np.array_equal(one.merge_times, two.merge_times, equal_nan=True)


def test_small_runs_of_each_experiment(tmp_path):
    from arratia_lab.report import write_report

    small = {
        "duality": dict(replicas=200),
        "essentiality": dict(replicas=100, comb_pairs=4),
        "widths": dict(replicas=2, grid_step=1 / 16),
        "gram": dict(replicas=3),
    }
    for name, kw in small.items():
        rep = run(ExperimentConfig(name, **kw))
        assert rep.checks
        files = write_report(rep, tmp_path, figures=True)
        assert any(f.suffix == ".png" for f in files)
