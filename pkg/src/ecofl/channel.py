"""Line-of-sight path loss, SINR and achievable rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import DecisionState, ScenarioConfig, SlackReport

SPEED_OF_LIGHT = 2.99792458e8


@dataclass(frozen=True)
class LinkGain:
    g_db: float
    g_lin: float

    @classmethod
    def from_db(cls, g_db: float) -> "LinkGain":
        return cls(float(g_db), float(10.0 ** (-g_db / 10.0)))


def distance(q, g_ue, H: float):
    """UAV-to-UE distance; broadcasts over leading axes of ``q`` and ``g_ue``."""
    q = np.asarray(q, dtype=float)
    g_ue = np.asarray(g_ue, dtype=float)
    return np.sqrt(np.sum((q - g_ue) ** 2, axis=-1) + H ** 2)


def path_loss_db(d, f_c: float):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return 20.0 * np.log10(4.0 * np.pi * f_c * d / SPEED_OF_LIGHT)


def linear_gain(d, f_c: float):
    """Linear power gain 10^(-g/10), computed through the dB path loss."""
    return 10.0 ** (-path_loss_db(d, f_c) / 10.0)


def gain_constant(f_c: float) -> float:
    """(c / (4 pi f_c))^2, so that gain = gain_constant / d^2."""
    return (SPEED_OF_LIGHT / (4.0 * np.pi * f_c)) ** 2


def gain_matrix(q, cfg: ScenarioConfig) -> np.ndarray:
    """Linear gains for every UE and every trajectory point, shape (K, len(q))."""
    q = np.asarray(q, dtype=float)
    d = distance(q[None, :, :], cfg.ue_positions[:, None, :], cfg.uav_altitude)
    return linear_gain(d, cfg.f_c)


def uplink_sinr(k: int, p, gains, sigma_z2: float) -> float:
    if sigma_z2 <= 0:
        raise ValueError("noise power must be positive")
    p = np.asarray(p, dtype=float)
    gains = np.asarray(gains, dtype=float)
    rx = p * gains
    return float(rx[k] / (rx.sum() - rx[k] + sigma_z2))


def uplink_sinr_all(p, gains, sigma_z2: float) -> np.ndarray:
    """SINR of every UE; ``p`` and ``gains`` are (K, ...) arrays."""
    if sigma_z2 <= 0:
        raise ValueError("noise power must be positive")
    rx = np.asarray(p, dtype=float) * np.asarray(gains, dtype=float)
    return rx / (rx.sum(axis=0, keepdims=True) - rx + sigma_z2)


def uplink_rate(sinr, W: float):
    return W * np.log2(1.0 + np.asarray(sinr, dtype=float))


def broadcast_rate(p_uav, gain, sigma_z2: float, W: float):
    if sigma_z2 <= 0:
        raise ValueError("noise power must be positive")
    snr = np.asarray(p_uav, dtype=float) * np.asarray(gain, dtype=float) / sigma_z2
    return W * np.log2(1.0 + snr)


def slot_rates(state: DecisionState, cfg: ScenarioConfig):
    """Uplink rates (K x (N-1)) and broadcast rates (K x (N-2)) of a state."""
    gains = gain_matrix(state.q[1:cfg.N], cfg)
    sinr = uplink_sinr_all(state.p_ue, gains, cfg.sigma_z2)
    r_up = uplink_rate(sinr, cfg.W)
    r_bc = broadcast_rate(state.p_uav[None, :], gains[:, : cfg.N - 2], cfg.sigma_z2, cfg.W)
    return r_up, r_bc


def check_rate_constraints(state: DecisionState, cfg: ScenarioConfig, participation=None) -> SlackReport:
    """Slacks of ``a Q <= t_cm R`` and ``a[n+1] Q <= t_bc R_bc[n]`` in bits.

    ``participation`` overrides ``state.a``; relaxed states pass the smooth
    indicator of their data sizes here.
    """
    a = state.a if participation is None else np.asarray(participation, dtype=float)
    if a is None:
        raise ValueError("relaxed state needs an explicit participation array")
    r_up, r_bc = slot_rates(state, cfg)
    uplink = cfg.t_cm * r_up - a * cfg.Q
    bcast = cfg.t_bc * r_bc - a[:, 1:] * cfg.Q
    return SlackReport({"uplink_rate": uplink, "broadcast_rate": bcast})
