"""Per-iteration convex programs of the two-phase scheme and the solver contract.

Programs are modelled with cvxpy and solved by Clarabel (an interior-point
conic solver with native exponential and second-order cones). Variable
blocks and their units:

=========  ==============  =========================================
name       shape           meaning
=========  ==============  =========================================
q          (N+1, 2)        trajectory, hectometres (reported in metres)
t_hov      (N-1,)          hover time per slot, s
B          (K, N-1)        ln of UE transmit power (W)
At         (K, N-1)        upper bound of ln gain, see ``coupling``
C          (N-2,)          ln of UAV broadcast power (W)
D          (K, N-1)        Phase I: relaxed data per slot, Mb
D          (K,)            Phase II: per-UE data, Mb
Dhat       (N-1,)          lower bound of (sum_k D_k[n])^2
d_lb       (N-1,)          lower bound of segment length, m
tau        (N-1,)          epigraph of sum_k D_k[n]^2 / Dhat[n]
ahat       (K, N-1)        Phase I only: hypograph of the sign approximation
s_rate     (K, N-1)        slack of the uplink rate rows
s_bc       (K, N-2)        slack of the broadcast rows
s_acc      ()              slack of the accuracy row
=========  ==============  =========================================

The objective is total energy in joules times ``OBJ_SCALE`` plus
``SLACK_PENALTY`` joules per unit slack. See :func:`solve` for how the
penalty is applied.

Dump format (``ConicProgram.dump``), plain text, one section per block::

    # ecofl conic program v1
    phase <1|2>
    var <name> <offset> <shape...>      one line per cvxpy variable
    cones zero=<n> nonneg=<n> soc=<d1,d2,...> exp=<n>
    c <n>           followed by n lines "<j> <value>" (nonzeros only)
    A <m> <n> <nnz> followed by nnz lines "<i> <j> <value>"
    b <m>           followed by m lines "<value>"

The program is ``min c'x  s.t.  b - A x in K`` with the cones stacked in the
order listed; exponential cones are triples (x, y, z) with y e^{x/y} <= z.
Variable offsets index the solver vector ``x``.
"""
from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from typing import Optional

import cvxpy as cp
import numpy as np

from .energy import propulsion_power
from .flbound import accuracy_constant, slot_weights
from .scenario import MB, DecisionState, ScenarioConfig
from .channel import gain_constant
from .surrogates import (
    ReferencePoint,
    broadcast_coeffs,
    broadcast_log_requirement,
    participation_pwl_lb,
    q_hat,
    q_tilde,
    r1_weights,
    segment_deltas,
    sign_approx,
    sign_approx_slope,
)

OBJ_SCALE = 1e-2
SLACK_PENALTY = 1e6  # J per unit slack
SLACK_TOL = 1e-6
LOG_POWER_FLOOR = np.log(1e-7)  # W; keeps e^B bounded away from 0
DHAT_FLOOR = 1e-6
LEX_RELAX = 1e-4  # relative room on the minimum slack in the lexicographic stage
Q_UNIT = 100.0  # m per trajectory unit inside the program
# d_lb comes out of a squared row, so a residual eps there costs sqrt(eps) in
# metres; the time-slot rows credit the flight leg this much less
D_LB_BACKOFF = 1e-3  # m


@dataclass
class ConicProgram:
    """A convex program plus its named variable blocks.

    Programs from the builders also carry the scenario, the reference point,
    the energy expression and the total slack; a bare program (``phase`` 0)
    only needs ``problem`` and ``variables``. ``units`` maps a block name to
    the factor that converts solver values to reported values.
    """

    phase: int
    problem: cp.Problem
    variables: dict
    cfg: Optional[ScenarioConfig] = None
    ref: Optional[ReferencePoint] = None
    a: Optional[np.ndarray] = None
    energy_terms: dict = field(default_factory=dict)
    units: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    energy_expr: Optional[cp.Expression] = None
    slack_sum: Optional[cp.Expression] = None
    rows: dict = field(default_factory=dict)  # named constraint groups, for inspection
    q_pin: Optional[np.ndarray] = None  # exact positions of equality-pinned q (metres), NaN if free

    def variable_counts(self) -> dict:
        return {k: int(v.size) for k, v in self.variables.items()}

    def cone_summary(self) -> dict:
        data, _, _ = self.problem.get_problem_data(cp.CLARABEL)
        d = data["dims"]
        return {"zero": d.zero, "nonneg": d.nonneg, "soc": list(d.soc), "exp": d.exp}

    def dump(self, out=None) -> str:
        """Write the canonical conic form in the format of the module docstring."""
        data, _, _ = self.problem.get_problem_data(cp.CLARABEL)
        A = data["A"].tocoo()
        c = np.asarray(data["c"])
        b = np.asarray(data["b"])
        d = data["dims"]
        buf = io.StringIO()
        buf.write("# ecofl conic program v1\n")
        buf.write(f"phase {self.phase}\n")
        offsets = data["param_prob"].var_id_to_col
        for var in self.problem.variables():
            shape = " ".join(str(s) for s in var.shape) or "1"
            buf.write(f"var {var.name()} {offsets[var.id]} {shape}\n")
        soc = ",".join(str(s) for s in d.soc)
        buf.write(f"cones zero={d.zero} nonneg={d.nonneg} soc={soc} exp={d.exp}\n")
        nz = np.flatnonzero(c)
        buf.write(f"c {nz.size}\n")
        for j in nz:
            buf.write(f"{j} {c[j]!r}\n")
        buf.write(f"A {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            buf.write(f"{i} {j} {v!r}\n")
        buf.write(f"b {b.size}\n")
        for v in b:
            buf.write(f"{v!r}\n")
        text = buf.getvalue()
        if out is not None:
            with open(out, "w") as fh:
                fh.write(text)
        return text


@dataclass
class SolveResult:
    status: str                       # optimal | infeasible | max-iterations | failed
    values: dict
    objective: float                  # energy in J including slack penalty
    residuals: dict
    iterations: int = 0
    solve_time: float = 0.0
    solver_status: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def slack_max(self) -> float:
        out = 0.0
        for name in ("s_rate", "s_bc", "s_acc"):
            v = self.values.get(name)
            if v is not None and np.size(v):
                out = max(out, float(np.max(v)))
        return out


# --- building blocks --------------------------------------------------------

def _check_ref(ref: ReferencePoint, cfg: ScenarioConfig):
    if ref.cfg is not cfg and ref.cfg != cfg:
        raise ValueError("reference point was built for a different scenario")


def _rows_for_each_slot(expr_row, K):
    """Broadcast a (M,) expression to (K, M)."""
    return np.ones((K, 1)) @ cp.reshape(expr_row, (1, expr_row.shape[0]), order="C")


def _common(ref: ReferencePoint, cfg: ScenarioConfig, fixed_q):
    """Variables and constraints shared by both phases."""
    K, N = cfg.K, cfg.N
    M = N - 1
    v = cfg.uav_speed
    U = Q_UNIT
    q = cp.Variable((N + 1, 2), name="q")
    t_hov = cp.Variable(M, name="t_hov")
    B = cp.Variable((K, M), name="B")
    At = cp.Variable((K, M), name="At")
    C = cp.Variable(N - 2, name="C")
    d_lb = cp.Variable(M, nonneg=True, name="d_lb")
    Dhat = cp.Variable(M, name="Dhat")
    tau = cp.Variable(M, name="tau")
    s_rate = cp.Variable((K, M), nonneg=True, name="s_rate")
    s_bc = cp.Variable((K, N - 2), nonneg=True, name="s_bc")
    s_acc = cp.Variable(nonneg=True, name="s_acc")

    cons = [
        q[0] == cfg.q_ini / U,
        q[N] == cfg.q_fin / U,
        t_hov >= cfg.t_cm,
        B <= np.log(cfg.p_ue_max),
        B >= LOG_POWER_FLOOR,
        C <= np.log(cfg.p_uav_max),
        C >= LOG_POWER_FLOOR,
        Dhat >= DHAT_FLOOR,
    ]
    q_pin = np.full((N + 1, 2), np.nan)
    q_pin[0], q_pin[N] = cfg.q_ini, cfg.q_fin
    if fixed_q is not None:
        cons.append(q == np.asarray(fixed_q, dtype=float) / U)
        q_pin[:] = fixed_q

    seg = cp.norm(q[1:] - q[:-1], 2, axis=1)
    fixed_time = np.sum(np.full(M, cfg.t_agg)) + (N - 2) * cfg.t_bc
    cons.append(U * cp.sum(seg) / v + cp.sum(t_hov) + fixed_time <= cfg.T)

    # squared segment length >= tangent, for segments n = 1..N-1
    delta = segment_deltas(ref) / U
    dq = q[1:N] - q[0:N - 1]
    lin_seg = -np.sum(delta ** 2, axis=1) + 2.0 * cp.sum(cp.multiply(delta, dq), axis=1)
    cons.append(cp.square(d_lb / 10.0) <= (U / 10.0) ** 2 * lin_seg)  # both sides in (10 m)^2

    # points of the FL slots and the coupling e^{-At} <= lin(||q - g||^2 + H^2) / kappa^2
    qs = q[1:N]
    g = cfg.ue_positions / U
    H = cfg.uav_altitude / U
    S_r = ref.S_r / U ** 2
    qr = ref.q_r[1:N] / U
    dx = qr[None, :, 0] - g[:, None, 0]
    dy = qr[None, :, 1] - g[:, None, 1]
    lin_c = (S_r - 2.0 * (dx * qr[None, :, 0] + dy * qr[None, :, 1])
             + 2.0 * (cp.multiply(dx, _rows_for_each_slot(qs[:, 0], K))
                      + cp.multiply(dy, _rows_for_each_slot(qs[:, 1], K))))
    ln_k2 = np.log(gain_constant(cfg.f_c) / U ** 2)
    cons.append(cp.log(lin_c) >= ln_k2 - At)

    # R1 lower bound per slot: R1_r + sum_i w_i (1 - S_i(q)/S_r_i) + sum_i w_i (B_i - B_r_i)
    w, r1 = r1_weights(ref)
    ws = w / S_r
    cq = ws.sum(axis=0)
    lin_q = ws.T @ g                       # (M, 2)
    const_q = ws.T @ np.sum(g ** 2, axis=1) + H ** 2 * cq
    S_weighted = (cp.multiply(cq, cp.sum(cp.square(qs), axis=1))
                  - 2.0 * cp.sum(cp.multiply(lin_q, qs), axis=1) + const_q)
    R1_lb = r1 + w.sum(axis=0) - S_weighted + cp.sum(cp.multiply(w, B - ref.B_r), axis=0)

    ln_s2 = np.log(cfg.sigma_z2)
    R2_rows = []
    for k in range(K):
        others = [i for i in range(K) if i != k]
        if others:
            stack = cp.vstack([B[others] + At[others], np.full((1, M), ln_s2)])
            R2_rows.append(-cp.log_sum_exp(stack, axis=0))
        else:
            R2_rows.append(cp.Constant(np.full(M, -ln_s2)))
    R2_lb = cp.vstack([cp.reshape(r, (1, M), order="C") for r in R2_rows])
    rate_rhs = _rows_for_each_slot(R1_lb, K) + R2_lb + s_rate

    # A_lb at broadcast points q[1..N-2]
    S_bc = S_r[:, : N - 2]
    qb = q[1:N - 1]
    sq_b = (_rows_for_each_slot(cp.sum(cp.square(qb), axis=1), K)
            - 2.0 * (cp.multiply(np.repeat(g[:, :1], N - 2, axis=1), _rows_for_each_slot(qb[:, 0], K))
                     + cp.multiply(np.repeat(g[:, 1:], N - 2, axis=1), _rows_for_each_slot(qb[:, 1], K)))
            + (np.sum(g ** 2, axis=1)[:, None] + H ** 2))
    A_lb_bc = ref.A_r[:, : N - 2] + 1.0 - cp.multiply(1.0 / S_bc, sq_b)
    bc_rhs = _rows_for_each_slot(C, K) + A_lb_bc - ln_s2 + s_bc

    energy = {
        "fly": propulsion_power(v, cfg.rotor) * U / v * cp.sum(seg),
        "hover": propulsion_power(0.0, cfg.rotor) * cp.sum(t_hov),
        "comm": cfg.t_cm * cp.sum(cp.exp(B)),
        "broadcast": cfg.t_bc * cp.sum(cp.exp(C)),
    }
    variables = {"q": q, "t_hov": t_hov, "B": B, "At": At, "C": C, "d_lb": d_lb,
                 "Dhat": Dhat, "tau": tau, "s_rate": s_rate, "s_bc": s_bc, "s_acc": s_acc}
    parts = {"rate_rhs": rate_rhs, "bc_rhs": bc_rhs, "q_pin": q_pin}
    return cons, variables, energy, parts


def _timeslot_rows(cfg, Dm, d_lb, t_hov):
    K = cfg.K
    lhs = cfg.t_cm + cp.multiply((cfg.phi * MB)[:, None], Dm)
    rhs = _rows_for_each_slot((d_lb - D_LB_BACKOFF) / cfg.uav_speed + t_hov, K)
    return [lhs <= rhs]


def _accuracy_rows(cfg, Dm, Dhat, tau, s_acc, S_r):
    """Accuracy bound with sum_k D^2 / Dhat epigraphs and the Dhat tangent rows."""
    M = cfg.N - 1
    cons = [
        cp.SOC(tau + Dhat, cp.vstack([2.0 * Dm, cp.reshape(tau - Dhat, (1, M), order="C")]), axis=0),
        Dhat <= -S_r ** 2 + 2.0 * cp.multiply(S_r, cp.sum(Dm, axis=0)),
    ]
    if np.isfinite(cfg.eps_G):
        w = slot_weights(cfg.fl, cfg.I, M)
        const = accuracy_constant(cfg.fl, cfg.I, M)
        cons.append(const + w @ tau <= cfg.eps_G + s_acc)
    else:
        cons.append(s_acc == 0)
    return cons


def _finish(phase, cons, variables, energy, cfg, ref, parts, a=None, rows=None) -> ConicProgram:
    slack = variables["s_rate"], variables["s_bc"], variables["s_acc"]
    total = sum(energy.values())
    slack_sum = cp.sum(slack[0]) + cp.sum(slack[1]) + slack[2]
    prob = cp.Problem(cp.Minimize(OBJ_SCALE * (total + SLACK_PENALTY * slack_sum)), cons)
    return ConicProgram(phase, prob, variables, cfg, ref, a, energy, units={"q": Q_UNIT},
                        constraints=cons, energy_expr=total, slack_sum=slack_sum, rows=rows or {},
                        q_pin=parts["q_pin"])


# --- public builders --------------------------------------------------------

def build_phase1(ref: ReferencePoint, cfg: ScenarioConfig, fixed_q=None) -> ConicProgram:
    """Relaxed-data program at ``ref`` (D_r is K x (N-1) bits)."""
    _check_ref(ref, cfg)
    K, N = cfg.K, cfg.N
    M = N - 1
    if ref.D_r.shape != (K, M):
        raise ValueError("Phase I needs a K x (N-1) data reference")
    cons, var, energy, parts = _common(ref, cfg, fixed_q)
    Dm = cp.Variable((K, M), nonneg=True, name="D")
    ahat = cp.Variable((K, M), name="ahat")
    var["D"] = Dm
    var["ahat"] = ahat
    D_r = ref.D_r_mb

    cons += _timeslot_rows(cfg, Dm, var["d_lb"], var["t_hov"])

    # uplink: a_check Q~ <= R1_lb + R2_lb
    a_r = sign_approx(D_r, cfg.beta)
    sl = sign_approx_slope(D_r, cfg.beta)
    a_check = a_r - sl * D_r + cp.multiply(sl, Dm)
    uplink = q_tilde(cfg) * a_check <= parts["rate_rhs"]
    cons.append(uplink)

    # broadcast in slot n (column n-1) serves the participants of slot n+1
    bc_const, bc_slope = broadcast_coeffs(cfg, D_r[:, 1:])
    cons.append(bc_const + cp.multiply(bc_slope, Dm[:, 1:]) <= parts["bc_rhs"])

    cons += _accuracy_rows(cfg, Dm, var["Dhat"], var["tau"], var["s_acc"], D_r.sum(axis=0))
    cons.append(cp.sum(Dm, axis=1) >= cfg.D_th / MB)

    slopes, inter = participation_pwl_lb(D_r, cfg.beta)
    for j in range(slopes.shape[0]):
        cons.append(ahat <= cp.multiply(slopes[j], Dm) + inter[j])
    cons.append(cp.sum(ahat, axis=0) >= cfg.a_min)

    energy["comp"] = cp.sum(cp.multiply((cfg.energy_per_bit * MB)[:, None], Dm))
    return _finish(1, cons, var, energy, cfg, ref, parts, rows={"uplink": uplink})


def validate_plan(a, cfg: ScenarioConfig) -> np.ndarray:
    a = np.asarray(a)
    if a.shape != (cfg.K, cfg.N - 1):
        raise ValueError(f"participation has shape {a.shape}, expected {(cfg.K, cfg.N - 1)}")
    if not np.all((a == 0) | (a == 1)):
        raise ValueError("participation must be binary")
    a = a.astype(int)
    short = np.flatnonzero(a.sum(axis=0) < cfg.a_min)
    if short.size:
        raise ValueError(f"slots below the participation floor: {(short + 1).tolist()}")
    if cfg.D_th > 0 and np.any(a.sum(axis=1) == 0):
        raise ValueError("a UE never participates but must contribute data")
    return a


def build_phase2(a, ref: ReferencePoint, cfg: ScenarioConfig, fixed_q=None) -> ConicProgram:
    """Fixed-participation program; D is per-UE (Mb) and ref.D_r is (K,) bits."""
    _check_ref(ref, cfg)
    a = validate_plan(a, cfg)
    K, N = cfg.K, cfg.N
    M = N - 1
    if ref.D_r.shape != (K,):
        raise ValueError("Phase II needs a per-UE data reference")
    cons, var, energy, parts = _common(ref, cfg, fixed_q)
    Dk = cp.Variable(K, nonneg=True, name="D")
    var["D"] = Dk
    Dm = cp.diag(Dk) @ a.astype(float)

    cons += _timeslot_rows(cfg, Dm, var["d_lb"], var["t_hov"])

    on = a.astype(bool)
    rows = {}
    if on.any():
        rows["uplink"] = q_tilde(cfg) <= parts["rate_rhs"][on]
        cons.append(rows["uplink"])
    # rows of non-participants are absent; pin their slacks
    if (~on).any():
        cons.append(var["s_rate"][~on] == 0)

    on_bc = a[:, 1:].astype(bool)
    req = float(broadcast_log_requirement(1.0, q_hat(cfg)))
    if on_bc.any():
        cons.append(req <= parts["bc_rhs"][on_bc])
    if (~on_bc).any():
        cons.append(var["s_bc"][~on_bc] == 0)

    S_r = (a * ref.D_r_mb[:, None]).sum(axis=0)
    cons += _accuracy_rows(cfg, Dm, var["Dhat"], var["tau"], var["s_acc"], S_r)
    count = a.sum(axis=1)
    cons.append(cp.multiply(count, Dk) >= cfg.D_th / MB)

    energy["comp"] = cp.sum(cp.multiply(cfg.energy_per_bit * MB * count, Dk))
    return _finish(2, cons, var, energy, cfg, ref, parts, a, rows)


# --- solving ----------------------------------------------------------------

_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "infeasible",
    "AlmostDualInfeasible": "infeasible",
    "MaxIterations": "max-iterations",
    "MaxTime": "max-iterations",
}


def _run(prob: cp.Problem, tol: float, max_iter: int):
    opts = {
        "tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol,
        "max_iter": max_iter, "max_threads": 1,
    }
    data, chain, inv = prob.get_problem_data(cp.CLARABEL)
    try:
        sol = chain.solver.solve_via_data(data, False, False, opts)
    except Exception as exc:  # numerical breakdown inside the solver
        return "failed", repr(exc), {}, 0
    raw = str(sol.status)
    status = _STATUS.get(raw, "failed")
    residuals = {
        "primal": float(sol.r_prim),
        "dual": float(sol.r_dual),
        "gap": float(abs(sol.obj_val - sol.obj_val_dual) / max(1.0, abs(sol.obj_val))),
    }
    if status == "optimal":
        if raw == "AlmostSolved" and max(residuals["primal"], residuals["dual"]) > 1e3 * tol:
            return "failed", raw, residuals, int(sol.iterations)
        prob.unpack_results(sol, chain, inv)
    return status, raw, residuals, int(sol.iterations)


def _stages(prog: ConicProgram):
    if prog.slack_sum is None:
        yield "direct", prog.problem
        return
    slack_vars = [prog.variables[k] for k in ("s_rate", "s_bc", "s_acc")]
    hard = cp.Problem(cp.Minimize(OBJ_SCALE * prog.energy_expr),
                      prog.constraints + [v == 0 for v in slack_vars])
    yield "hard", hard
    yield "penalty", prog.problem
    feas = cp.Problem(cp.Minimize(prog.slack_sum), prog.constraints)
    yield "feasibility", feas
    s_star = float(prog.slack_sum.value)
    bound = s_star * (1.0 + LEX_RELAX) + 1e-9
    yield "lexicographic", cp.Problem(cp.Minimize(OBJ_SCALE * prog.energy_expr),
                                      prog.constraints + [prog.slack_sum <= bound])


def solve(prog: ConicProgram, tol: float = 1e-8, max_iter: int = 200) -> SolveResult:
    """Solve with Clarabel; statuses are optimal, infeasible, max-iterations or failed.

    The slack penalty is large enough that its optimum is lexicographic in
    practice: least total slack first, then least energy. Interior-point
    solvers handle such objectives poorly, so the program is solved in stages
    and the first stage that succeeds is returned:

    1. slacks pinned to zero (the common, feasible case);
    2. the penalized objective itself;
    3. minimum total slack, then minimum energy with the slack held within
       ``LEX_RELAX`` of that minimum (the infinite-penalty limit of 2); if the
       second solve fails the minimum-slack point itself is returned.

    ``objective`` is always energy plus ``SLACK_PENALTY`` times total slack.
    """
    t0 = time.perf_counter()
    total_iter = 0
    last = ("failed", "", {})
    feasible_point = None
    for name, prob in _stages(prog):
        status, raw, residuals, iters = _run(prob, tol, max_iter)
        total_iter += iters
        last = (status, f"{name}:{raw}", residuals)
        if name == "feasibility":
            if status != "optimal":
                break
            feasible_point = (_collect(prog), residuals, f"{name}:{raw}")
            continue
        if status == "optimal":
            return _result(prog, _collect(prog), residuals, total_iter, t0, f"{name}:{raw}")
    if feasible_point is not None:
        values, residuals, raw = feasible_point
        return _result(prog, values, residuals, total_iter, t0, raw)
    status, raw, residuals = last
    if status == "optimal":
        status = "failed"
    return SolveResult(status, {}, np.nan, residuals, total_iter, time.perf_counter() - t0, raw)


def _collect(prog: ConicProgram) -> dict:
    values = {k: np.array(v.value, dtype=float) * prog.units.get(k, 1.0)
              for k, v in prog.variables.items()}
    if prog.slack_sum is None:
        values["_objective"] = float(prog.problem.objective.value)
        return values
    for k in ("s_rate", "s_bc", "s_acc"):
        values[k] = np.maximum(values[k], 0.0)
    # equality-pinned points hold only to solver tolerance in scaled units
    pin = ~np.isnan(prog.q_pin)
    values["q"][pin] = prog.q_pin[pin]
    energy = float(prog.energy_expr.value)
    slack = float(np.sum(values["s_rate"]) + np.sum(values["s_bc"]) + values["s_acc"])
    values["_objective"] = energy + SLACK_PENALTY * slack
    return values


def _result(prog, values, residuals, iters, t0, raw) -> SolveResult:
    objective = values.pop("_objective")
    return SolveResult("optimal", values, objective, residuals, iters, time.perf_counter() - t0, raw)


# --- mapping back -----------------------------------------------------------

def to_state(result: SolveResult, prog: ConicProgram) -> DecisionState:
    """Decision state of an optimal solution (powers from logs, data in bits)."""
    v = result.values
    cfg = prog.cfg
    common = dict(q=v["q"], p_ue=np.exp(v["B"]), p_uav=np.exp(v["C"]), t_hov=v["t_hov"])
    if prog.phase == 1:
        return DecisionState(D_relaxed=np.maximum(v["D"], 0.0) * MB, **common)
    return DecisionState(a=prog.a, D=np.maximum(v["D"], 0.0) * MB, **common)


def next_reference(result: SolveResult, prog: ConicProgram) -> ReferencePoint:
    v = result.values
    D = np.maximum(v["D"], 0.0) * MB
    return ReferencePoint.build(prog.cfg, v["q"], v["B"], D)


def program_energy(result: SolveResult, prog: ConicProgram) -> float:
    """Energy (J) of the solution without the slack penalty."""
    v = result.values
    slack = SLACK_PENALTY * (np.sum(v["s_rate"]) + np.sum(v["s_bc"]) + float(v["s_acc"]))
    return result.objective - float(slack)
