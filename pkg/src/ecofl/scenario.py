"""Scenario records, decision state and time-slot bookkeeping.

Everything here is in SI units: bits, seconds, watts, metres and hertz.
dB/dBm only appear when a config file is parsed (see :mod:`ecofl.config`).

Slot conventions used across the package
-----------------------------------------
* ``q`` has ``N + 1`` rows, ``q[0] = q_ini`` and ``q[N] = q_fin``.
* Segment ``n`` (``1 <= n <= N``) is the leg ``q[n-1] -> q[n]``.
* FL slots are ``n = 1 .. N-1``; per-slot arrays have ``N - 1`` columns and
  column ``j`` holds slot ``n = j + 1``.
* Broadcast arrays have ``N - 2`` entries (slots ``1 .. N-2``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

MB = 1e6  # bits per megabit

DEFAULT_UE_POSITIONS = (
    (0.0, 400.0),
    (100.0, 600.0),
    (100.0, 400.0),
    (400.0, 600.0),
    (400.0, 400.0),
    (500.0, 400.0),
)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def _frozen_array(x, shape=None) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FLHyperparams:
    """Constants of the strongly convex FL convergence bound."""

    eta: float = 0.01
    mu: float = 1.0
    L: float = 10.0
    eps_v2: float = 60.0
    eps_s2: float = 1.0
    eps_w: float = 0.1
    w0_gap: float = 10.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.L < self.mu:
            raise ValueError("L must be >= mu")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        for name in ("eps_v2", "eps_s2", "eps_w", "w0_gap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.omega < 1.0:
            raise ValueError("1 - eta*mu must lie in (0, 1)")

    @property
    def omega(self) -> float:
        return 1.0 - self.eta * self.mu


@dataclass(frozen=True)
class RotorModel:
    """Rotary-wing propulsion constants (blade profile, induced, parasite)."""

    P0: float = 79.86
    Pi: float = 88.63
    U_tip: float = 120.0
    v0: float = 4.03
    d0: float = 0.6
    rho: float = 1.225
    s: float = 0.05
    A: float = 0.503

    def __post_init__(self):
        for name in ("P0", "Pi", "U_tip", "v0", "d0", "rho", "s", "A"):
            if not getattr(self, name) > 0:
                raise ValueError(f"rotor parameter {name} must be > 0")


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, radio, timing, FL and energy parameters of one mission.

    Defaults reproduce the simulation settings of the reference scenario:
    600 m x 600 m area, six ground users, 50 slots over 500 s.
    """

    area: tuple = (600.0, 600.0)
    ue_positions: np.ndarray = field(default=DEFAULT_UE_POSITIONS)
    uav_altitude: float = 150.0
    uav_speed: float = 10.0
    q_ini: np.ndarray = field(default=(0.0, 300.0))
    q_fin: np.ndarray = field(default=(600.0, 300.0))
    N: int = 50
    T: float = 500.0
    t_cm: float = 2.0
    t_agg: float = 0.5
    t_bc: float = 0.5
    W: float = 20e6
    f_c: float = 2.4e9
    sigma_z2: float = dbm_to_watt(-80.0)
    p_ue_max: float = dbm_to_watt(31.8)
    p_uav_max: float = dbm_to_watt(30.0)
    Q: float = 8.065 * MB
    C: float = 10.0
    psi: float = 1e-25
    f_cpu: np.ndarray = field(default=1e9)
    I: int = 5
    a_min: int = 2
    D_th: float = 50.0 * MB
    eps_G: float = 10.0
    beta: float = 5.0  # sign-approximation steepness, per megabit
    fl: FLHyperparams = field(default_factory=FLHyperparams)
    rotor: RotorModel = field(default_factory=RotorModel)

    def __post_init__(self):
        ue = _frozen_array(self.ue_positions)
        if ue.ndim != 2 or ue.shape[1] != 2 or ue.shape[0] < 1:
            raise ValueError("ue_positions must be a (K, 2) array")
        object.__setattr__(self, "ue_positions", ue)
        object.__setattr__(self, "q_ini", _frozen_array(self.q_ini, (2,)))
        object.__setattr__(self, "q_fin", _frozen_array(self.q_fin, (2,)))
        object.__setattr__(self, "area", tuple(float(a) for a in self.area))
        f_cpu = np.broadcast_to(np.asarray(self.f_cpu, dtype=float), (ue.shape[0],)).copy()
        object.__setattr__(self, "f_cpu", _frozen_array(f_cpu))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "I", int(self.I))
        object.__setattr__(self, "a_min", int(self.a_min))
        self._validate()

    def _validate(self):
        K = self.K
        if not (K >= self.a_min >= 1):
            raise ValueError("need K >= a_min >= 1")
        if self.N < 3:
            raise ValueError("need N >= 3")
        if self.I < 1:
            raise ValueError("need I >= 1")
        positive = ("uav_altitude", "uav_speed", "T", "t_cm", "t_agg", "t_bc", "W",
                    "f_c", "sigma_z2", "p_ue_max", "p_uav_max", "Q", "C", "psi", "beta")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if np.any(self.f_cpu <= 0):
            raise ValueError("f_cpu must be > 0")
        if self.D_th < 0 or self.eps_G <= 0:
            raise ValueError("D_th must be >= 0 and eps_G > 0")
        w, h = self.area
        for name in ("q_ini", "q_fin"):
            x, y = getattr(self, name)
            if not (0.0 <= x <= w and 0.0 <= y <= h):
                raise ValueError(f"{name} lies outside the area")
        if self.fl.eta > 1.0 / (2.0 * self.fl.L) + 1e-15:
            raise ValueError("learning rate must satisfy eta <= 1/(2L)")

    @property
    def K(self) -> int:
        return self.ue_positions.shape[0]

    @property
    def n_slots(self) -> int:
        """Number of FL slots, N - 1."""
        return self.N - 1

    @property
    def phi(self) -> np.ndarray:
        """Local computation time per bit for each UE (s/bit)."""
        return self.I * self.C / self.f_cpu

    @property
    def energy_per_bit(self) -> np.ndarray:
        """Computation energy per processed bit for each UE (J/bit)."""
        return self.I * self.psi * self.C * self.f_cpu ** 2

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def default_scenario(**overrides) -> ScenarioConfig:
    return ScenarioConfig(**overrides)


@dataclass
class DecisionState:
    """One full candidate solution.

    Either ``a`` (K x (N-1) binary) together with per-UE ``D`` (bits) is set
    (restricted mode), or ``D_relaxed`` (K x (N-1) bits) is set with ``a``
    left as ``None`` (relaxed mode).
    """

    q: np.ndarray
    p_ue: np.ndarray
    p_uav: np.ndarray
    t_hov: np.ndarray
    a: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    D_relaxed: Optional[np.ndarray] = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p_ue = np.asarray(self.p_ue, dtype=float)
        self.p_uav = np.asarray(self.p_uav, dtype=float)
        self.t_hov = np.asarray(self.t_hov, dtype=float)
        if self.a is not None:
            self.a = np.asarray(self.a).astype(int)
        if self.D is not None:
            self.D = np.asarray(self.D, dtype=float)
        if self.D_relaxed is not None:
            self.D_relaxed = np.asarray(self.D_relaxed, dtype=float)
        if self.D_relaxed is None and (self.a is None or self.D is None):
            raise ValueError("need either (a, D) or D_relaxed")

    @property
    def relaxed(self) -> bool:
        return self.D_relaxed is not None and self.a is None

    def data_matrix(self) -> np.ndarray:
        """Effective data D_k[n] (bits), shape K x (N-1)."""
        if self.relaxed:
            return self.D_relaxed
        return self.a * self.D[:, None]

    def check_shapes(self, cfg: ScenarioConfig):
        K, N = cfg.K, cfg.N
        expected = {
            "q": (self.q, (N + 1, 2)),
            "p_ue": (self.p_ue, (K, N - 1)),
            "p_uav": (self.p_uav, (N - 2,)),
            "t_hov": (self.t_hov, (N - 1,)),
        }
        if self.a is not None:
            expected["a"] = (self.a, (K, N - 1))
        if self.D is not None:
            expected["D"] = (self.D, (K,))
        if self.D_relaxed is not None:
            expected["D_relaxed"] = (self.D_relaxed, (K, N - 1))
        for name, (arr, shape) in expected.items():
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")


@dataclass
class SlackReport:
    """Named constraint slacks; a negative entry is a violation."""

    slacks: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.slacks[name]

    def __contains__(self, name):
        return name in self.slacks

    def merge(self, other: "SlackReport") -> "SlackReport":
        return SlackReport({**self.slacks, **other.slacks})

    def worst(self) -> dict:
        return {k: float(np.min(v)) if np.size(v) else np.inf for k, v in self.slacks.items()}

    def violations(self, tol: float = 0.0) -> dict:
        return {k: v for k, v in self.worst().items() if v < -tol}

    def ok(self, tol: float = 0.0) -> bool:
        return not self.violations(tol)


def fly_time(q, n: int, v_uav: float) -> float:
    """Flight time of segment ``n`` (the leg ``q[n-1] -> q[n]``)."""
    q = np.asarray(q, dtype=float)
    N = q.shape[0] - 1
    if not 1 <= n <= N:
        raise IndexError(f"segment index {n} outside 1..{N}")
    return float(np.linalg.norm(q[n] - q[n - 1]) / v_uav)


def fly_times(q, v_uav: float) -> np.ndarray:
    """All N segment flight times."""
    q = np.asarray(q, dtype=float)
    return np.linalg.norm(np.diff(q, axis=0), axis=1) / v_uav


def total_mission_time(state: DecisionState, cfg: ScenarioConfig) -> float:
    t_fly = fly_times(state.q, cfg.uav_speed)
    return float(t_fly.sum() + np.sum(state.t_hov + cfg.t_agg) + (cfg.N - 2) * cfg.t_bc)


def check_timeslot_feasibility(state: DecisionState, cfg: ScenarioConfig) -> SlackReport:
    """Slacks of the hover, per-slot timing and total mission-time constraints."""
    t_fly = fly_times(state.q, cfg.uav_speed)
    t_cp = state.data_matrix() * cfg.phi[:, None]
    hover = state.t_hov - cfg.t_cm
    slot = (t_fly[: cfg.N - 1] + state.t_hov)[None, :] - (cfg.t_cm + t_cp)
    total = cfg.T - total_mission_time(state, cfg)
    return SlackReport({
        "hover": hover,
        "timeslot": slot,
        "total_time": np.array([total]),
    })


def check_boundary(state: DecisionState, cfg: ScenarioConfig) -> SlackReport:
    gap_ini = np.linalg.norm(state.q[0] - cfg.q_ini)
    gap_fin = np.linalg.norm(state.q[-1] - cfg.q_fin)
    return SlackReport({"boundary": -np.array([gap_ini, gap_fin])})


def check_power_boxes(state: DecisionState, cfg: ScenarioConfig) -> SlackReport:
    return SlackReport({
        "p_ue_min": state.p_ue,
        "p_ue_max": cfg.p_ue_max - state.p_ue,
        "p_uav_min": state.p_uav,
        "p_uav_max": cfg.p_uav_max - state.p_uav,
    })
