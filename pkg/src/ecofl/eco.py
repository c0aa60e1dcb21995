"""Two-phase energy optimization: relaxed SCA, rounding, fixed-participation SCA.

Also hosts the baselines: random or full participation with an optimized
trajectory, and fixed heuristic trajectories with optimized participation.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import check_rate_constraints
from .energy import EnergyBreakdown, total_energy
from .flbound import ParticipationPlan, accuracy_lhs, check_accuracy
from .scenario import (
    MB,
    DecisionState,
    ScenarioConfig,
    SlackReport,
    check_boundary,
    check_power_boxes,
    check_timeslot_feasibility,
)
from .subproblem import (
    SLACK_TOL,
    ConicProgram,
    SolveResult,
    build_phase1,
    build_phase2,
    next_reference,
    program_energy,
    solve,
    to_state,
    validate_plan,
)
from .surrogates import ReferencePoint, sign_approx

REL_TOL = 1e-3
MAX_ITER = 30
AUDIT_TOL = 1e-6

HEURISTICS = ("CUR", "STR", "MID", "ASY")


@dataclass
class IterationRecord:
    phase: str
    iteration: int
    objective: float
    energy: float
    slack: float
    status: str
    primal: float
    dual: float
    gap: float
    seconds: float

    def as_row(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SCAResult:
    records: list
    result: Optional[SolveResult]
    program: Optional[ConicProgram]
    references: list
    converged: bool
    reason: str = ""

    @property
    def objectives(self) -> list:
        return [r.objective for r in self.records]


@dataclass
class RunReport:
    kind: str
    seed: int
    cfg: ScenarioConfig
    iterations: list = field(default_factory=list)
    state: Optional[DecisionState] = None
    relaxed_state: Optional[DecisionState] = None
    energy: Optional[EnergyBreakdown] = None
    accuracy: float = float("nan")
    feasible: bool = False
    reason: str = ""
    audit: Optional[SlackReport] = None
    relaxed_audit: Optional[SlackReport] = None
    wall_clock: float = 0.0
    a: Optional[np.ndarray] = None
    converged: dict = field(default_factory=dict)  # phase -> stopping rule met

    def objectives(self, phase: str) -> list:
        return [r.objective for r in self.iterations if r.phase == phase]

    @property
    def total_energy(self) -> float:
        return self.energy.e_total if self.energy is not None else float("nan")

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "feasible": self.feasible,
            "reason": self.reason,
            "energy_J": self.total_energy,
            "accuracy": self.accuracy,
            "iterations": len(self.iterations),
            "wall_clock_s": self.wall_clock,
        }


# --- initial point ----------------------------------------------------------

def straight_line(cfg: ScenarioConfig) -> np.ndarray:
    s = np.linspace(0.0, 1.0, cfg.N + 1)[:, None]
    return cfg.q_ini[None, :] + s * (cfg.q_fin - cfg.q_ini)[None, :]


def initialize(cfg: ScenarioConfig, seed: int = 0, q=None) -> ReferencePoint:
    """Full participation, straight line, half of the UE power budget.

    ``seed`` is accepted for interface symmetry; the initializer is
    deterministic.
    """
    q = straight_line(cfg) if q is None else np.asarray(q, dtype=float)
    K, M = cfg.K, cfg.N - 1
    B_r = np.full((K, M), np.log(cfg.p_ue_max / 2.0))
    D_r = np.full((K, M), cfg.D_th / M)
    return ReferencePoint.build(cfg, q, B_r, D_r)


def initial_hover(cfg: ScenarioConfig) -> np.ndarray:
    return np.full(cfg.N - 1, cfg.t_cm)


# --- SCA loop ---------------------------------------------------------------

def _sca(phase: str, build, ref: ReferencePoint, max_iter: int, rel_tol: float, tol: float) -> SCAResult:
    records, refs = [], [ref]
    best = best_prog = None
    prev = None
    for it in range(1, max_iter + 1):
        prog = build(ref)
        res = solve(prog, tol=tol)
        if not res.ok:
            reason = f"{phase} iteration {it}: solver status {res.status} ({res.solver_status})"
            return SCAResult(records, best, best_prog, refs, False, reason)
        rec = IterationRecord(phase, it, res.objective, program_energy(res, prog), res.slack_max(),
                              res.solver_status, res.residuals["primal"], res.residuals["dual"],
                              res.residuals["gap"], res.solve_time)
        records.append(rec)
        best, best_prog = res, prog
        ref = next_reference(res, prog)
        refs.append(ref)
        if prev is not None and (prev - res.objective) <= rel_tol * abs(prev):
            return SCAResult(records, best, best_prog, refs, True)
        prev = res.objective
    return SCAResult(records, best, best_prog, refs, False, f"{phase}: no convergence in {max_iter} iterations")


def phase1(cfg: ScenarioConfig, init: ReferencePoint, fixed_q=None, max_iter: int = MAX_ITER,
           rel_tol: float = REL_TOL, tol: float = 1e-8) -> SCAResult:
    """SCA on the relaxed-data program starting from ``init``."""
    return _sca("phase1", lambda r: build_phase1(r, cfg, fixed_q), init, max_iter, rel_tol, tol)


def round_participation(D_relaxed, beta: float, a_min: int = 1) -> np.ndarray:
    """a = 1 where the sign approximation reaches 0.5, then floor repair.

    ``D_relaxed`` is K x S in bits. Deficient slots promote their
    non-participants with the largest relaxed data; a UE left with no slot at
    all is switched on in its largest-data slot.
    """
    D = np.asarray(D_relaxed, dtype=float)
    if np.any(D < 0):
        raise ValueError("data sizes must be non-negative")
    a = (sign_approx(D / MB, beta) >= 0.5 - 1e-12).astype(int)
    K = D.shape[0]
    if a_min > K:
        raise ValueError("participation floor exceeds the number of UEs")
    for n in range(D.shape[1]):
        deficit = a_min - a[:, n].sum()
        if deficit > 0:
            off = np.flatnonzero(a[:, n] == 0)
            order = off[np.argsort(-D[off, n], kind="stable")]
            a[order[:deficit], n] = 1
    for k in np.flatnonzero(a.sum(axis=1) == 0):
        a[k, int(np.argmax(D[k]))] = 1
    return a


def phase2(cfg: ScenarioConfig, a, ref: ReferencePoint, fixed_q=None, max_iter: int = MAX_ITER,
           rel_tol: float = REL_TOL, tol: float = 1e-8) -> SCAResult:
    """SCA with participation fixed to ``a``; ``ref.D_r`` is per-UE."""
    a = validate_plan(a, cfg)
    return _sca("phase2", lambda r: build_phase2(a, r, cfg, fixed_q), ref, max_iter, rel_tol, tol)


def phase2_reference(cfg: ScenarioConfig, a, q, B) -> ReferencePoint:
    count = np.asarray(a).sum(axis=1)
    return ReferencePoint.build(cfg, q, B, cfg.D_th / count)


# --- audit ------------------------------------------------------------------

def audit(state: DecisionState, cfg: ScenarioConfig) -> SlackReport:
    """Every constraint of the original model, as slacks (negative = violated).

    A relaxed state is audited with the sign approximation of its data in
    place of the binary participation.
    """
    rep = check_boundary(state, cfg)
    rep = rep.merge(check_timeslot_feasibility(state, cfg))
    rep = rep.merge(check_power_boxes(state, cfg))
    plan = ParticipationPlan.from_state(state)
    if state.relaxed:
        part = sign_approx(state.D_relaxed / MB, cfg.beta)
        rep = rep.merge(check_rate_constraints(state, cfg, participation=part))
        rep = rep.merge(SlackReport({
            "participation_floor": part.sum(axis=0) - cfg.a_min,
            "data_floor": (state.D_relaxed.sum(axis=1) - cfg.D_th) / MB,
        }))
    else:
        rep = rep.merge(check_rate_constraints(state, cfg))
        floors = plan.check_floors(cfg.a_min, cfg.D_th)
        rep = rep.merge(SlackReport({
            "participation_floor": floors["participation_floor"],
            "data_floor": floors["data_floor"] / MB,
        }))
    rep = rep.merge(check_accuracy(plan, cfg))
    return _normalize(rep, cfg)


def _normalize(rep: SlackReport, cfg: ScenarioConfig) -> SlackReport:
    # rates in bits are compared relative to the model size
    s = dict(rep.slacks)
    for name in ("uplink_rate", "broadcast_rate"):
        s[name] = np.asarray(s[name]) / cfg.Q
    return SlackReport(s)


# --- drivers ----------------------------------------------------------------

def _finish_report(report: RunReport, sca: SCAResult, cfg: ScenarioConfig, t0: float) -> RunReport:
    report.iterations += sca.records
    report.converged["phase2"] = sca.converged
    report.wall_clock = time.perf_counter() - t0
    if sca.result is None:
        report.reason = sca.reason or "no solution"
        return report
    state = to_state(sca.result, sca.program)
    report.state = state
    report.a = state.a
    report.energy = total_energy(state, cfg)
    report.accuracy = accuracy_lhs(ParticipationPlan.from_state(state), cfg.fl, cfg.I)
    report.audit = audit(state, cfg)
    slack = sca.result.slack_max()
    if slack > SLACK_TOL:
        which = {k: float(np.max(sca.result.values[k])) for k in ("s_rate", "s_bc", "s_acc")}
        worst = max(which, key=which.get)
        report.reason = f"infeasible: slack {worst} = {which[worst]:.3g} > {SLACK_TOL:g}"
    elif not report.audit.ok(AUDIT_TOL):
        report.reason = f"infeasible: audit violations {report.audit.violations(AUDIT_TOL)}"
    else:
        report.feasible = True
        report.reason = "ok" if sca.converged else sca.reason
    return report


def run_eco(cfg: ScenarioConfig, seed: int = 0, fixed_q=None, kind: str = "eco") -> RunReport:
    """Initialize, relaxed SCA, round, fixed-participation SCA."""
    t0 = time.perf_counter()
    report = RunReport(kind, seed, cfg)
    init = initialize(cfg, seed, q=fixed_q)
    p1 = phase1(cfg, init, fixed_q)
    report.iterations += p1.records
    report.converged["phase1"] = p1.converged
    if p1.result is None:
        report.reason = p1.reason
        report.wall_clock = time.perf_counter() - t0
        return report
    relaxed = to_state(p1.result, p1.program)
    report.relaxed_state = relaxed
    report.relaxed_audit = audit(relaxed, cfg)
    a = round_participation(relaxed.D_relaxed, cfg.beta, cfg.a_min)
    ref2 = phase2_reference(cfg, a, p1.result.values["q"], p1.result.values["B"])
    p2 = phase2(cfg, a, ref2, fixed_q)
    return _finish_report(report, p2, cfg, t0)


def random_plan(cfg: ScenarioConfig, seed: int) -> np.ndarray:
    """a_min UEs per slot drawn uniformly; redraws until every UE appears."""
    rng = np.random.default_rng(seed)
    K, M = cfg.K, cfg.N - 1
    for _ in range(1000):
        a = np.zeros((K, M), dtype=int)
        for n in range(M):
            a[rng.choice(K, size=cfg.a_min, replace=False), n] = 1
        if cfg.D_th <= 0 or np.all(a.sum(axis=1) > 0):
            return a
    raise RuntimeError("could not draw a plan covering every UE")


def baseline_participation(kind: str, cfg: ScenarioConfig, seed: int = 0) -> RunReport:
    """Random (a_min UEs per slot) or fixed (all UEs) participation."""
    if kind == "random":
        a = random_plan(cfg, seed)
    elif kind == "fixed":
        a = np.ones((cfg.K, cfg.N - 1), dtype=int)
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    t0 = time.perf_counter()
    report = RunReport(f"baseline:{kind}", seed, cfg)
    init = initialize(cfg, seed)
    ref = phase2_reference(cfg, a, init.q_r, init.B_r)
    p2 = phase2(cfg, a, ref)
    return _finish_report(report, p2, cfg, t0)


# --- heuristic trajectories -------------------------------------------------

def resample_path(points, n_points: int) -> np.ndarray:
    """``n_points`` arc-length-equidistant samples of a polyline."""
    pts = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return np.repeat(pts[:1], n_points, axis=0)
    t = np.linspace(0.0, s[-1], n_points)
    return np.column_stack([np.interp(t, s, pts[:, 0]), np.interp(t, s, pts[:, 1])])


def heuristic_waypoints(kind: str, cfg: ScenarioConfig) -> np.ndarray:
    """Dense polyline of a heuristic path from q_ini to q_fin."""
    q0, q1 = cfg.q_ini, cfg.q_fin
    w, h = cfg.area
    center = np.array([w / 2.0, h / 2.0])
    if kind == "STR":
        return np.vstack([q0, q1])
    if kind == "MID":
        return np.vstack([q0, center, q1])
    if kind == "ASY":
        return np.vstack([q0, cfg.ue_positions.mean(axis=0), q1])
    if kind == "CUR":
        # half-ellipse on the chord q0 -> q1, apex 150 m off the chord toward the UEs
        mid = 0.5 * (q0 + q1)
        chord = q1 - q0
        half = 0.5 * np.linalg.norm(chord)
        u = chord / half / 2.0 if half > 0 else np.array([1.0, 0.0])
        nrm = np.array([-u[1], u[0]])
        if np.dot(cfg.ue_positions.mean(axis=0) - mid, nrm) < 0:
            nrm = -nrm
        th = np.linspace(np.pi, 0.0, 2001)
        return mid + np.outer(half * np.cos(th), u) + np.outer(150.0 * np.sin(th), nrm)
    raise ValueError(f"unknown trajectory kind {kind!r}")


def heuristic_path(kind: str, cfg: ScenarioConfig) -> np.ndarray:
    return resample_path(heuristic_waypoints(kind, cfg), cfg.N + 1)


def heuristic_trajectory(kind: str, cfg: ScenarioConfig, seed: int = 0) -> RunReport:
    """Fixed heuristic trajectory; everything else optimized by the two phases."""
    q = heuristic_path(kind, cfg)
    return run_eco(cfg, seed, fixed_q=q, kind=f"trajectory:{kind}")
