import os

import pandas as pd
import pytest

from smtpcps.harness import RESULT_COLUMNS, SUMMARY_COLUMNS, TRACE_COLUMNS
from smtpcps.scripts.run import main

SMALL = "[controller]\nN = 30\n\n[sim]\nsteps = 20\nreps = 2\n\n[sweep]\nalphas = 2 8\n"


@pytest.fixture
def small_ini(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return str(path)


@pytest.fixture
def cached_family(tmp_path, small_ini):
    path = str(tmp_path / "small.ctrlfam")
    assert main(["precompute", "--config", small_ini, "--out", path]) == 0
    return path


def test_precompute_prints_stats(tmp_path, small_ini, capsys):
    out = str(tmp_path / "f.ctrlfam")
    assert main(["precompute", "--config", small_ini, "--out", out]) == 0
    assert "N=30 sets=31" in capsys.readouterr().out
    assert os.path.getsize(out) > 0


def test_corrupt_config(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[model\nA = 1\n")
    assert main(["run", "--config", str(path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_run_is_reproducible(tmp_path, small_ini, cached_family):
    args = ["run", "--config", small_ini, "--family", cached_family, "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--trace"]) == 0
    first = (tmp_path / "a" / "episode.csv").read_text()
    assert first == (tmp_path / "b" / "episode.csv").read_text()
    assert list(pd.read_csv(tmp_path / "a" / "episode.csv").columns) == RESULT_COLUMNS
    assert not (tmp_path / "a" / "trace.csv").exists()
    trace = pd.read_csv(tmp_path / "b" / "trace.csv")
    assert list(trace.columns) == TRACE_COLUMNS and len(trace) == 20


def test_matching_models_transfer_nothing(tmp_path, cached_family):
    path = tmp_path / "alpha1.ini"
    path.write_text(SMALL + "\n[dist]\nalpha = 1\n")
    assert main(["run", "--config", str(path), "--family", cached_family, "--out", str(tmp_path)]) == 0
    row = pd.read_csv(tmp_path / "episode.csv").iloc[0]
    assert row["key_events"] == 0 and row["rate_bps"] == 0.0


def test_sweep_outputs(tmp_path, small_ini, cached_family):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", small_ini, "--family", cached_family, "--out", str(out)]) == 0
    results = pd.read_csv(out / "results.csv")
    assert list(results.columns) == RESULT_COLUMNS and len(results) == 12
    summary = pd.read_csv(out / "summary.csv")
    assert list(summary.columns) == SUMMARY_COLUMNS and summary["alpha"].tolist() == [2.0, 8.0]
    assert (out / "rate_vs_alpha.svg").read_text().lstrip().startswith("<?xml")


def test_sweep_without_alphas(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("[sweep]\nalphas =\n")
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_verify_rejects_bad_bounds(tmp_path):
    path = tmp_path / "bounds.ini"
    path.write_text("[dist]\ntrue_bound = 0.2\ncontroller_bound = 0.12\n")
    assert main(["verify", "--config", str(path)]) == 2


def test_verify_rejects_tampered_cache(tmp_path, small_ini, cached_family):
    with open(cached_family) as f:
        lines = f.read().splitlines()
    lines[2] = lines[2] + " "
    with open(cached_family, "w") as f:
        f.write("\n".join(lines) + "\n")
    assert main(["verify", "--config", small_ini, "--family", cached_family]) == 2


def test_cache_built_for_other_horizon(tmp_path, cached_family):
    path = tmp_path / "n20.ini"
    path.write_text(SMALL.replace("N = 30", "N = 20"))
    assert main(["run", "--config", str(path), "--family", cached_family, "--out", str(tmp_path)]) == 2


def test_verify_passes(small_ini, cached_family, capsys):
    assert main(["verify", "--config", small_ini, "--family", cached_family]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "PASS key_event_concealment" in out


@pytest.mark.parametrize("section, setting", [("dist", "controller_bound = 0.2"), ("controller", "alpha_max = 0.1")])
def test_cache_built_for_other_model(tmp_path, cached_family, capsys, section, setting):
    path = tmp_path / "other.ini"
    if section == "controller":
        path.write_text(SMALL.replace("N = 30", "N = 30\n" + setting))
    else:
        path.write_text(SMALL + f"\n[{section}]\n{setting}\n")
    assert main(["run", "--config", str(path), "--family", cached_family, "--out", str(tmp_path)]) == 2
    assert "another configuration" in capsys.readouterr().err


def test_sweep_with_aborted_episodes_fails(tmp_path, cached_family, capsys):
    path = tmp_path / "far.ini"
    path.write_text(SMALL.replace("[sim]\n", "[sim]\nx0 = 100 100\n"))
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(path), "--family", cached_family, "--out", str(out)]) == 1
    captured = capsys.readouterr()
    assert "4 aborted" in captured.out
    assert "InfeasibleStateError" in captured.err
    assert len(pd.read_csv(out / "results.csv")) == 4
