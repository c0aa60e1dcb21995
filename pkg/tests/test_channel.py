import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecofl.channel import (
    LinkGain,
    broadcast_rate,
    check_rate_constraints,
    distance,
    gain_constant,
    gain_matrix,
    linear_gain,
    path_loss_db,
    uplink_rate,
    uplink_sinr,
    uplink_sinr_all,
)
from ecofl.scenario import DecisionState, default_scenario

# 20 log10(4 pi d f / c) at 150 m, 2.4 GHz, evaluated separately
PL_150M_DB = 83.57383323722912


def test_path_loss_at_altitude():
    assert path_loss_db(150.0, 2.4e9) == pytest.approx(PL_150M_DB, abs=1e-9)
    assert abs(path_loss_db(150.0, 2.4e9) - 83.6) <= 0.1


def test_path_loss_doubles_distance_adds_6db():
    assert path_loss_db(300.0, 2.4e9) - path_loss_db(150.0, 2.4e9) == pytest.approx(20 * np.log10(2))


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        path_loss_db(0.0, 2.4e9)


def test_distance_and_gain():
    assert distance(np.array([0.0, 0.0]), np.array([0.0, 0.0]), 150.0) == 150.0
    assert distance(np.array([0.0, 300.0]), np.array([100.0, 400.0]), 150.0) == pytest.approx(np.sqrt(42500.0))
    assert linear_gain(150.0, 2.4e9) == pytest.approx(gain_constant(2.4e9) / 150.0 ** 2)
    assert LinkGain.from_db(83.0).g_lin == pytest.approx(10 ** -8.3)


def test_uplink_rate_exact():
    assert uplink_rate(1.0, 20e6) == 2.0e7
    assert uplink_rate(0.0, 20e6) == 0.0


def test_single_ue_sinr_is_snr():
    assert uplink_sinr(0, [2.0], [1e-9], 1e-11) == pytest.approx(200.0)


def test_sinr_two_equal_users():
    # equal received powers and no noise -> SINR 1
    assert uplink_sinr(0, [1.0, 1.0], [1.0, 1.0], 1e-300) == pytest.approx(1.0)


def test_noise_must_be_positive():
    with pytest.raises(ValueError):
        uplink_sinr(0, [1.0], [1.0], 0.0)
    with pytest.raises(ValueError):
        broadcast_rate(1.0, 1.0, 0.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-4, 2.0), min_size=2, max_size=6), st.floats(1.0, 10.0))
def test_sinr_vectorized_matches_scalar_and_power_monotone(p, bump):
    p = np.array(p)
    g = np.linspace(1e-10, 5e-10, len(p))
    vec = uplink_sinr_all(p, g, 1e-11)
    for k in range(len(p)):
        assert vec[k] == pytest.approx(uplink_sinr(k, p, g, 1e-11), rel=1e-12)
    q = p.copy()
    q[0] *= bump
    assert uplink_sinr(0, q, g, 1e-11) >= vec[0]
    assert uplink_sinr(1, q, g, 1e-11) <= vec[1] + 1e-15


def test_gain_matrix_shape(cfg):
    q = np.linspace(cfg.q_ini, cfg.q_fin, cfg.N + 1)
    G = gain_matrix(q, cfg)
    assert G.shape == (cfg.K, cfg.N + 1)
    d = distance(q[3], cfg.ue_positions[2], cfg.uav_altitude)
    assert G[2, 3] == pytest.approx(linear_gain(d, cfg.f_c))


def test_rate_constraints_slack(cfg):
    K, N = cfg.K, cfg.N
    q = np.linspace(cfg.q_ini, cfg.q_fin, N + 1)
    st_ = DecisionState(q=q, p_ue=np.full((K, N - 1), 1e-3), p_uav=np.full(N - 2, 1.0),
                        t_hov=np.full(N - 1, 2.0), a=np.zeros((K, N - 1)), D=np.zeros(K))
    rep = check_rate_constraints(st_, cfg)
    assert rep["uplink_rate"].shape == (K, N - 1)
    assert rep["broadcast_rate"].shape == (K, N - 2)
    assert rep.ok()
    st_.a = np.ones((K, N - 1), dtype=int)
    # six users at equal tiny power cannot all carry an 8 Mb model in 2 s
    assert not check_rate_constraints(st_, cfg).ok()
    with pytest.raises(ValueError):
        check_rate_constraints(DecisionState(q=q, p_ue=st_.p_ue, p_uav=st_.p_uav, t_hov=st_.t_hov,
                                             D_relaxed=np.zeros((K, N - 1))), cfg)
