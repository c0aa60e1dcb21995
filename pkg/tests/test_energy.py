import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecofl.energy import propulsion_power, total_energy
from ecofl.scenario import MB, DecisionState, RotorModel, default_scenario

# three-term rotary-wing power at 10 m/s with the default rotor, evaluated separately
P_AT_10 = 126.0336867737212


def test_hover_power_is_blade_plus_induced():
    r = RotorModel()
    assert propulsion_power(0.0, r) == r.P0 + r.Pi
    assert propulsion_power(0.0, r) == pytest.approx(168.49)


def test_power_at_cruise_speed():
    assert propulsion_power(10.0, RotorModel()) == pytest.approx(P_AT_10, rel=1e-14)


def test_power_vectorized_and_rejects_negative():
    v = np.array([0.0, 10.0])
    assert np.allclose(propulsion_power(v, RotorModel()), [168.49, P_AT_10])
    with pytest.raises(ValueError):
        propulsion_power(-1.0, RotorModel())


@settings(max_examples=50, deadline=None)
@given(st.floats(30.0, 60.0), st.floats(0.0, 5.0))
def test_power_grows_at_high_speed(v, dv):
    r = RotorModel()
    assert propulsion_power(v + dv, r) >= propulsion_power(v, r) - 1e-9


def test_total_energy_breakdown():
    cfg = default_scenario()
    K, N = cfg.K, cfg.N
    q = np.linspace(cfg.q_ini, cfg.q_fin, N + 1)
    st_ = DecisionState(q=q, p_ue=np.full((K, N - 1), 0.5), p_uav=np.full(N - 2, 0.2),
                        t_hov=np.full(N - 1, 2.0), a=np.ones((K, N - 1)), D=np.full(K, 1 * MB))
    e = total_energy(st_, cfg)
    t = e.totals()
    assert t["fly"] == pytest.approx(60.0 * P_AT_10)
    assert t["hover"] == pytest.approx(49 * 2.0 * 168.49)
    assert t["comm"] == pytest.approx(K * 49 * 2.0 * 0.5)
    # 5 x 1e-25 x 10 x (1e9)^2 = 5e-6 J/bit
    assert t["comp"] == pytest.approx(K * 49 * 1e6 * 5e-6)
    assert t["broadcast"] == pytest.approx(48 * 0.5 * 0.2)
    assert t["total"] == pytest.approx(sum(v for k, v in t.items() if k != "total"))
    assert e.e_cm.shape == (K, N - 1) and e.e_bc.shape == (N - 2,)
    assert np.allclose(e.per_ue()["comp"], 49 * 5.0)
