"""Propulsion, communication, computation and broadcast energy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import DecisionState, RotorModel, ScenarioConfig, fly_times


def propulsion_power(v, rotor: RotorModel):
    """Rotary-wing propulsion power (W) at horizontal speed ``v`` (m/s)."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("speed must be non-negative")
    blade = rotor.P0 * (1.0 + 3.0 * v ** 2 / rotor.U_tip ** 2)
    induced = rotor.Pi * np.sqrt(np.sqrt(1.0 + v ** 4 / (4.0 * rotor.v0 ** 4)) - v ** 2 / (2.0 * rotor.v0 ** 2))
    parasite = 0.5 * rotor.d0 * rotor.rho * rotor.s * rotor.A * v ** 3
    out = blade + induced + parasite
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-slot energy terms (J).

    e_fly has N entries, e_hov N-1, e_cm and e_cp are K x (N-1), e_bc N-2.
    """

    e_fly: np.ndarray
    e_hov: np.ndarray
    e_cm: np.ndarray
    e_cp: np.ndarray
    e_bc: np.ndarray
    e_total: float

    def totals(self) -> dict:
        return {
            "fly": float(self.e_fly.sum()),
            "hover": float(self.e_hov.sum()),
            "comm": float(self.e_cm.sum()),
            "comp": float(self.e_cp.sum()),
            "broadcast": float(self.e_bc.sum()),
            "total": float(self.e_total),
        }

    def per_ue(self) -> dict:
        return {"comm": self.e_cm.sum(axis=1), "comp": self.e_cp.sum(axis=1)}


def total_energy(state: DecisionState, cfg: ScenarioConfig) -> EnergyBreakdown:
    state.check_shapes(cfg)
    e_fly = fly_times(state.q, cfg.uav_speed) * propulsion_power(cfg.uav_speed, cfg.rotor)
    e_hov = state.t_hov * propulsion_power(0.0, cfg.rotor)
    e_cm = cfg.t_cm * state.p_ue
    e_cp = state.data_matrix() * cfg.energy_per_bit[:, None]
    e_bc = cfg.t_bc * state.p_uav
    total = e_fly.sum() + e_hov.sum() + e_cm.sum() + e_cp.sum() + e_bc.sum()
    return EnergyBreakdown(e_fly, e_hov, e_cm, e_cp, e_bc, float(total))
