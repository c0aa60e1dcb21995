import csv
from pathlib import Path

import numpy as np
import pytest

from ecofl.config import load_scenario
from ecofl.energy import total_energy
from ecofl.harness import (
    EXIT_CONFIG,
    EXIT_INFEASIBLE,
    EXIT_OK,
    ExperimentSpec,
    build_parser,
    load_state,
    main,
)

SMALL = """\
N = 8
T = 120.0
eps_G = 40.0
Q = "2 Mb"
"""

FILES = ("run_report.csv", "verdict.csv", "energy_breakdown.csv", "trajectory.csv",
         "participation.csv", "gap_vs_bound.csv")


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def small_toml(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


@pytest.fixture(scope="module")
def eco_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("eco")
    cfg_path = root / "small.toml"
    cfg_path.write_text(SMALL)
    codes = [main(["--experiment", "eco", "--config", str(cfg_path), "--out", str(root / f"run{i}")])
             for i in range(2)]
    return root, cfg_path, codes


def test_eco_cli_writes_artifacts(eco_run):
    root, _, codes = eco_run
    assert codes == [EXIT_OK, EXIT_OK]
    for name in FILES:
        assert (root / "run0" / name).exists(), name
    verdict = {r["key"]: r["value"] for r in read(root / "run0" / "verdict.csv")}
    assert verdict["feasible"] == "1" and verdict["reason"] in ("ok", "max-iterations")
    phases = {r["phase"] for r in read(root / "run0" / "run_report.csv")}
    assert phases == {"phase1", "phase2"}


def test_csv_round_trip(eco_run):
    root, cfg_path, _ = eco_run
    cfg = load_scenario(cfg_path)
    st = load_state(root / "run0", cfg)
    rows = {r["term"]: float(r["energy_J"]) for r in read(root / "run0" / "energy_breakdown.csv")}
    got = total_energy(st, cfg).totals()
    for k, v in rows.items():
        assert got[k] == pytest.approx(v, rel=1e-9, abs=1e-9), k


def test_rerun_is_deterministic(eco_run):
    root, _, _ = eco_run
    p0, p1 = read(root / "run0" / "participation.csv"), read(root / "run1" / "participation.csv")
    assert [r["a"] for r in p0] == [r["a"] for r in p1]
    for name, cols in (("participation.csv", ("D_bits", "p_ue_W")),
                       ("trajectory.csv", ("x_m", "y_m", "t_hov_s", "p_uav_W"))):
        r0, r1 = read(root / "run0" / name), read(root / "run1" / name)
        for a, b in zip(r0, r1):
            for c in cols:
                if a[c] != "":
                    assert float(a[c]) == pytest.approx(float(b[c]), rel=1e-7, abs=1e-9)


def test_unknown_key_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("bandwidth = 1e6\n")
    assert main(["--experiment", "eco", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "unknown" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["--experiment", "eco", "--out", str(blocker / "sub")]) == EXIT_CONFIG


def test_infeasible_exit_code(tmp_path, capsys):
    cfg = tmp_path / "tight.toml"
    cfg.write_text(SMALL.replace("eps_G = 40.0", "eps_G = 1e-6"))
    assert main(["--experiment", "eco", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
    assert "infeasible" in capsys.readouterr().err
    verdict = {r["key"]: r["value"] for r in read(tmp_path / "o" / "verdict.csv")}
    assert verdict["feasible"] == "0"


def test_baseline_and_trajectory_runs(small_toml, tmp_path):
    for kind in ("baseline:random", "trajectory:CUR"):
        out = tmp_path / kind.replace(":", "_")
        assert main(["--experiment", kind, "--config", str(small_toml), "--out", str(out), "--seed", "3"]) == EXIT_OK
        traj = read(out / "trajectory.csv")
        assert len(traj) == 9


def test_small_sweep(small_toml, tmp_path):
    out = tmp_path / "sweep"
    code = main(["--experiment", "q-sweep", "--config", str(small_toml), "--out", str(out),
                 "--qsweep", "1.5,2", "--jobs", "2"])
    assert code == EXIT_OK
    rows = read(out / "sweep_summary.csv")
    assert len(rows) == 14
    assert (out / "Q=1.5Mb" / "trajectory_STR" / "trajectory.csv").exists()


def test_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentSpec("train", tmp_path)
    with pytest.raises(ValueError):
        ExperimentSpec("eco", tmp_path, seed=-1)
    with pytest.raises(ValueError):
        ExperimentSpec("q-sweep", tmp_path, sweep=(1.0, -2.0))
    with pytest.raises(ValueError):
        ExperimentSpec("eco", tmp_path, jobs=0)
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--experiment", "nope", "--out", "x"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--experiment", "q-sweep", "--out", "x", "--qsweep", "a,b"])
