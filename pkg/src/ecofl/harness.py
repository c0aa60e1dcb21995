"""Batch runner: one experiment per invocation, CSV artifacts in ``--out``.

    python -m ecofl.harness --experiment eco --out runs/eco
    python -m ecofl.harness --experiment trajectory:STR --config my.toml --out runs/str
    python -m ecofl.harness --experiment q-sweep --qsweep 1.42496,2.81557 --jobs 4 --out runs/sweep
    python -m ecofl.harness --experiment bound-validation --seed 7 --out runs/bound

Exit status: 0 success, 1 bad config or output directory, 3 infeasible
verdict (reason printed on stderr), 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ConfigError, load_scenario
from .eco import HEURISTICS, RunReport, baseline_participation, heuristic_trajectory, run_eco
from .flbound import ParticipationPlan, bound_trace
from .flsim import validate_bound
from .scenario import MB, DecisionState, ScenarioConfig, default_scenario, fly_times

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 3
EXIT_FAILED = 4

DEFAULT_Q_SWEEP_MB = (1.42496, 2.81557, 5.50014, 10.5133)
SWEEP_KINDS = ("eco", "baseline:fixed", "baseline:random") + tuple(f"trajectory:{k}" for k in HEURISTICS)
KINDS = SWEEP_KINDS + ("bound-validation", "q-sweep")


@dataclass
class ExperimentSpec:
    kind: str
    out: Path
    config: Optional[Path] = None
    seed: int = 0
    sweep: tuple = field(default=DEFAULT_Q_SWEEP_MB)  # model sizes in Mb
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment {self.kind!r}; expected one of {list(KINDS)}")
        self.sweep = tuple(float(x) for x in self.sweep)
        if not self.sweep or any(not x > 0 for x in self.sweep):
            raise ValueError("sweep values must be positive")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        self.out = Path(self.out)

    def scenario(self) -> ScenarioConfig:
        return default_scenario() if self.config is None else load_scenario(self.config)


# --- single runs ------------------------------------------------------------

def execute(kind: str, cfg: ScenarioConfig, seed: int) -> RunReport:
    if kind == "eco":
        return run_eco(cfg, seed)
    if kind.startswith("baseline:"):
        return baseline_participation(kind.split(":", 1)[1], cfg, seed)
    if kind.startswith("trajectory:"):
        return heuristic_trajectory(kind.split(":", 1)[1], cfg, seed)
    raise ValueError(f"{kind!r} is not a single-run experiment")


def _write(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def write_report(report: RunReport, out: Path):
    """The per-run CSV set; files are overwritten."""
    out.mkdir(parents=True, exist_ok=True)
    cfg = report.cfg
    _write(out / "run_report.csv",
           ["phase", "iteration", "objective_J", "energy_J", "max_slack", "status",
            "primal_residual", "dual_residual", "rel_gap", "solve_s"],
           [[r.phase, r.iteration, r.objective, r.energy, r.slack, r.status,
             r.primal, r.dual, r.gap, r.seconds] for r in report.iterations])

    verdict = [["kind", report.kind], ["seed", report.seed],
               ["feasible", int(report.feasible)], ["reason", report.reason],
               ["energy_J", report.total_energy], ["accuracy_bound", report.accuracy]]
    if report.audit is not None:
        verdict += [[f"min_slack:{k}", v] for k, v in report.audit.worst().items()]
    _write(out / "verdict.csv", ["key", "value"], verdict)

    if report.energy is not None:
        rows = [[k, v] for k, v in report.energy.totals().items()]
        _write(out / "energy_breakdown.csv", ["term", "energy_J"], rows)
    else:
        _write(out / "energy_breakdown.csv", ["term", "energy_J"], [])

    st = report.state
    if st is None:
        for name, header in (("trajectory.csv", TRAJ_HEADER), ("participation.csv", PART_HEADER)):
            _write(out / name, header, [])
        _write(out / "gap_vs_bound.csv", BOUND_HEADER, [])
        return
    t_fly = fly_times(st.q, cfg.uav_speed)
    N = cfg.N
    rows = []
    for n in range(N + 1):
        rows.append([n, st.q[n, 0], st.q[n, 1],
                     t_fly[n - 1] if n >= 1 else "",
                     st.t_hov[n - 1] if 1 <= n <= N - 1 else "",
                     st.p_uav[n - 1] if 1 <= n <= N - 2 else ""])
    _write(out / "trajectory.csv", TRAJ_HEADER, rows)
    data = st.data_matrix()
    a = st.a if st.a is not None else (data > 0).astype(int)
    _write(out / "participation.csv", PART_HEADER,
           [[k, n + 1, int(a[k, n]), data[k, n], st.p_ue[k, n]]
            for k in range(cfg.K) for n in range(N - 1)])
    plan = ParticipationPlan.from_state(st)
    bound = bound_trace(plan, cfg.fl, cfg.I, plan.n_slots * cfg.I)
    _write(out / "gap_vs_bound.csv", BOUND_HEADER,
           [[i + 1, "", b, int((i + 1) % cfg.I == 0)] for i, b in enumerate(bound)])


TRAJ_HEADER = ["n", "x_m", "y_m", "t_fly_s", "t_hov_s", "p_uav_W"]
PART_HEADER = ["k", "n", "a", "D_bits", "p_ue_W"]
BOUND_HEADER = ["update", "mean_gap", "bound", "aggregation"]


def load_state(out, cfg: ScenarioConfig) -> DecisionState:
    """Rebuild the decision state from ``trajectory.csv`` and ``participation.csv``."""
    out = Path(out)
    with open(out / "trajectory.csv") as fh:
        rows = list(csv.DictReader(fh))
    q = np.array([[float(r["x_m"]), float(r["y_m"])] for r in rows])
    t_hov = np.array([float(r["t_hov_s"]) for r in rows if r["t_hov_s"] != ""])
    p_uav = np.array([float(r["p_uav_W"]) for r in rows if r["p_uav_W"] != ""])
    K, M = cfg.K, cfg.N - 1
    a = np.zeros((K, M), dtype=int)
    D = np.zeros((K, M))
    p_ue = np.zeros((K, M))
    with open(out / "participation.csv") as fh:
        for r in csv.DictReader(fh):
            k, n = int(r["k"]), int(r["n"]) - 1
            a[k, n] = int(r["a"])
            D[k, n] = float(r["D_bits"])
            p_ue[k, n] = float(r["p_ue_W"])
    return DecisionState(q=q, p_ue=p_ue, p_uav=p_uav, t_hov=t_hov, D_relaxed=D)


def _exit_code(report: RunReport) -> int:
    if report.feasible:
        return EXIT_OK
    if report.reason.startswith("infeasible"):
        return EXIT_INFEASIBLE
    return EXIT_FAILED


def _sweep_point(args):
    kind, cfg, seed, out = args
    report = execute(kind, cfg, seed)
    write_report(report, out)
    return kind, cfg.Q, report.feasible, report.total_energy, report.reason, report.wall_clock


def run_sweep(spec: ExperimentSpec, cfg: ScenarioConfig) -> int:
    tasks = []
    for q_mb in spec.sweep:
        point = cfg.replace(Q=q_mb * MB)
        for kind in SWEEP_KINDS:
            sub = spec.out / f"Q={q_mb:g}Mb" / kind.replace(":", "_")
            tasks.append((kind, point, spec.seed, sub))
    if spec.jobs == 1:
        results = [_sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    _write(spec.out / "sweep_summary.csv",
           ["kind", "Q_Mb", "feasible", "energy_J", "reason", "wall_clock_s"],
           [[k, q / MB, int(f), e, r, t] for k, q, f, e, r, t in results])
    return EXIT_OK


def run_bound_validation(spec: ExperimentSpec) -> int:
    val = validate_bound(seed=spec.seed)
    agg = set(val.trace.aggregation_indices.tolist())
    spec.out.mkdir(parents=True, exist_ok=True)
    _write(spec.out / "gap_vs_bound.csv", BOUND_HEADER,
           [[i, g, b, int(i in agg)] for i, g, b in val.rows()])
    _write(spec.out / "run_report.csv", ["key", "value"], [
        ["seed", spec.seed],
        ["seed_pass_fraction", val.seed_pass_fraction],
        ["mean_gap_under_bound", int(val.mean_pass)],
        ["virtual_average_error", val.trace.virtual_error],
    ])
    if val.seed_pass_fraction < 0.95:
        print(f"bound violated: only {val.seed_pass_fraction:.2%} of seeds stay under it", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def run_experiment(spec: ExperimentSpec) -> int:
    try:
        spec.out.mkdir(parents=True, exist_ok=True)
        probe = spec.out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"cannot write to {spec.out}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if spec.kind == "bound-validation":
        return run_bound_validation(spec)
    try:
        cfg = spec.scenario()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if spec.kind == "q-sweep":
        return run_sweep(spec, cfg)
    report = execute(spec.kind, cfg, spec.seed)
    write_report(report, spec.out)
    code = _exit_code(report)
    if code != EXIT_OK:
        print(report.reason, file=sys.stderr)
    return code


def _parse_list(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecofl-harness", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, default=None, help="scenario TOML (default: built-in scenario)")
    p.add_argument("--experiment", required=True, choices=KINDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--qsweep", type=_parse_list, default=DEFAULT_Q_SWEEP_MB,
                   help="model sizes in Mb for q-sweep (comma separated)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = ExperimentSpec(args.experiment, args.out, args.config, args.seed, args.qsweep, args.jobs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(spec)


if __name__ == "__main__":
    sys.exit(main())
