import json
from pathlib import Path

import cvxpy as cp
import numpy as np
import pytest

from ecofl.eco import audit, initialize, phase2_reference
from ecofl.energy import total_energy
from ecofl.scenario import MB, default_scenario
from ecofl.subproblem import (
    ConicProgram,
    build_phase1,
    build_phase2,
    program_energy,
    solve,
    to_state,
    validate_plan,
)
from ecofl.surrogates import ReferencePoint

GOLDEN = Path(__file__).parent / "golden" / "phase1_default.json"


def test_lp_corner():
    x = cp.Variable(name="x")
    y = cp.Variable(name="y")
    prob = cp.Problem(cp.Minimize(x + 2 * y), [x >= 1, x <= 3, y >= -1, y <= 2])
    res = solve(ConicProgram(0, prob, {"x": x, "y": y}))
    assert res.ok
    assert res.values["x"] == pytest.approx(1.0, abs=1e-7)
    assert res.values["y"] == pytest.approx(-1.0, abs=1e-7)
    assert res.objective == pytest.approx(-1.0, abs=1e-7)
    assert max(res.residuals.values()) <= 1e-8


def test_exp_cone_smoke():
    x = cp.Variable(name="x")
    prob = cp.Problem(cp.Minimize(cp.exp(x)), [x >= 0])
    res = solve(ConicProgram(0, prob, {"x": x}))
    assert res.ok and res.objective == pytest.approx(1.0, abs=1e-7)
    assert res.values["x"] == pytest.approx(0.0, abs=1e-6)


def test_infeasible_status():
    x = cp.Variable(name="x")
    prob = cp.Problem(cp.Minimize(x), [x >= 1, x <= 0])
    assert solve(ConicProgram(0, prob, {"x": x})).status == "infeasible"


def test_phase1_variable_counts(cfg):
    prog = build_phase1(initialize(cfg), cfg)
    counts = prog.variable_counts()
    expected = dict(q=102, D=294, B=294, At=294, C=48, t_hov=49, d_lb=49, Dhat=49)
    assert {k: counts[k] for k in expected} == expected
    cones = prog.cone_summary()
    assert cones["exp"] > 0 and len(cones["soc"]) > 0


def test_reference_must_match_scenario(cfg, small_cfg):
    with pytest.raises(ValueError):
        build_phase1(initialize(small_cfg), cfg)
    ref2 = phase2_reference(cfg, np.ones((cfg.K, cfg.N - 1)), initialize(cfg).q_r, initialize(cfg).B_r)
    with pytest.raises(ValueError):
        build_phase1(ref2, cfg)
    with pytest.raises(ValueError):
        build_phase2(np.ones((cfg.K, cfg.N - 1)), initialize(cfg), cfg)


def test_plan_validation(cfg):
    a = np.ones((cfg.K, cfg.N - 1))
    a[:, 3] = 0
    with pytest.raises(ValueError, match="floor"):
        validate_plan(a, cfg)
    with pytest.raises(ValueError):
        validate_plan(np.full((cfg.K, cfg.N - 1), 0.5), cfg)
    with pytest.raises(ValueError):
        validate_plan(np.ones((cfg.K, 3)), cfg)


def _set_values(prog, rng, cfg):
    for name, v in prog.variables.items():
        v.value = rng.uniform(0.1, 1.0, size=v.shape) if v.shape else float(rng.uniform(0.1, 1.0))
    prog.variables["q"].value = np.linspace(cfg.q_ini, cfg.q_fin, cfg.N + 1) / 100.0


def test_all_ones_plan_reproduces_phase1_rate_rows(small_cfg):
    cfg = small_cfg
    init = initialize(cfg)
    # at 10 Mb the sign approximation is 1 and its tangent is flat
    ref1 = ReferencePoint.build(cfg, init.q_r, init.B_r, np.full((cfg.K, cfg.N - 1), 10 * MB))
    ref2 = ReferencePoint.build(cfg, init.q_r, init.B_r, np.full(cfg.K, 10 * MB))
    p1 = build_phase1(ref1, cfg)
    p2 = build_phase2(np.ones((cfg.K, cfg.N - 1)), ref2, cfg)
    rng = np.random.default_rng(0)
    _set_values(p1, rng, cfg)
    for name, v in p2.variables.items():
        if name != "D":
            v.value = p1.variables[name].value
    r1 = p1.rows["uplink"]
    r2 = p2.rows["uplink"]
    lhs1 = r1.args[0].value - r1.args[1].value
    lhs2 = r2.args[0].value - r2.args[1].value
    assert np.allclose(np.ravel(lhs1, order="C"), np.ravel(lhs2), rtol=1e-12, atol=1e-12)


def test_single_user_program_solves():
    cfg = default_scenario(ue_positions=[[300.0, 300.0]], a_min=1, N=8, T=120.0, eps_G=40.0)
    prog = build_phase1(initialize(cfg), cfg)
    res = solve(prog)
    assert res.ok and res.slack_max() <= 1e-6


@pytest.fixture(scope="module")
def phase2_solution():
    cfg = default_scenario(N=8, T=120.0, eps_G=40.0, Q=2e6)
    init = initialize(cfg)
    a = np.zeros((cfg.K, cfg.N - 1), dtype=int)
    for n in range(cfg.N - 1):
        a[[n % cfg.K, (n + 1) % cfg.K, (n + 3) % cfg.K], n] = 1
    ref = phase2_reference(cfg, a, init.q_r, init.B_r)
    prog = build_phase2(a, ref, cfg)
    return cfg, a, prog, solve(prog)


def test_phase2_data_floor(phase2_solution):
    cfg, a, prog, res = phase2_solution
    assert res.ok
    st = to_state(res, prog)
    assert np.all(st.D * a.sum(axis=1) >= cfg.D_th * (1 - 1e-7))
    assert np.array_equal(st.a, a)


def test_phase2_objective_equals_energy(phase2_solution):
    cfg, a, prog, res = phase2_solution
    st = to_state(res, prog)
    assert res.slack_max() <= 1e-6
    e = total_energy(st, cfg).totals()["total"]
    assert program_energy(res, prog) == pytest.approx(e, rel=1e-7)


def test_phase2_solution_is_feasible_for_true_model(phase2_solution):
    cfg, a, prog, res = phase2_solution
    rep = audit(to_state(res, prog), cfg)
    assert rep.ok(1e-6), rep.violations(1e-6)


def test_phase1_objective_equals_energy(small_cfg):
    prog = build_phase1(initialize(small_cfg), small_cfg)
    res = solve(prog)
    assert res.ok
    st = to_state(res, prog)
    assert program_energy(res, prog) == pytest.approx(total_energy(st, small_cfg).totals()["total"], rel=1e-7)
    assert audit(st, small_cfg).ok(1e-6)


def test_infinite_accuracy_target_frees_participation(small_cfg):
    cfg = small_cfg.replace(eps_G=np.inf)
    res = solve(build_phase1(initialize(cfg), cfg))
    assert res.ok


def test_dump_format(small_cfg):
    prog = build_phase1(initialize(small_cfg), small_cfg)
    text = prog.dump()
    lines = text.splitlines()
    assert lines[0] == "# ecofl conic program v1"
    assert lines[1] == "phase 1"
    assert any(l.startswith("var q ") for l in lines)
    cones = next(l for l in lines if l.startswith("cones "))
    assert "exp=" in cones and "soc=" in cones
    a_line = next(l for l in lines if l.startswith("A "))
    _, m, n, nnz = a_line.split()
    b_idx = lines.index(next(l for l in lines if l.startswith("b ")))
    assert int(lines[b_idx].split()[1]) == int(m)
    assert text == prog.dump()


def test_default_phase1_golden(cfg):
    """First Phase I program of the default scenario, frozen from a verified build."""
    prog = build_phase1(initialize(cfg), cfg)
    res = solve(prog)
    assert res.ok
    got = {"objective": res.objective, "energy": program_energy(res, prog)}
    want = json.loads(GOLDEN.read_text())
    assert got["objective"] == pytest.approx(want["objective"], rel=1e-7)
    assert got["energy"] == pytest.approx(want["energy"], rel=1e-7)
    again = solve(build_phase1(initialize(cfg), cfg))
    assert again.objective == res.objective
