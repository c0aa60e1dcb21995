"""Convex surrogates used by the successive convex approximation.

Each builder takes a :class:`ReferencePoint` (the current SCA iterate) and
returns a small form object that can be evaluated anywhere with numpy. The
conic program builder in :mod:`ecofl.subproblem` reads the same coefficients,
so the forms checked in the tests are the ones the solver sees.

Data sizes inside the sign approximation are in megabits; ``beta`` is per
megabit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .channel import gain_constant
from .scenario import MB, ScenarioConfig

# Reference sign-approximation values below this are clamped before
# linearizing ln(exp(x Q) - 1), whose slope diverges at 0. Any tangent of a
# concave function stays above it, so the clamp only costs tightness.
BROADCAST_REF_FLOOR = 1e-3


@dataclass(frozen=True)
class AffineForm:
    """``const + sum_v <coef[v], x[v]>`` over named variables."""

    const: float
    coef: dict = field(default_factory=dict)
    ref_value: Optional[float] = None

    def __call__(self, values: Optional[dict] = None) -> float:
        values = values or {}
        out = self.const
        for name, c in self.coef.items():
            out += float(np.sum(np.asarray(c) * np.asarray(values[name], dtype=float)))
        return float(out)

    def gradient(self, name: str) -> np.ndarray:
        return np.asarray(self.coef.get(name, 0.0), dtype=float)


@dataclass(frozen=True)
class ReferencePoint:
    """SCA linearization point with cached squared distances and log gains.

    ``D_r`` is in bits: K x (N-1) in Phase I, per-UE (K,) in Phase II.
    ``S_r`` and ``A_r`` are K x (N-1), one column per FL slot.
    """

    cfg: ScenarioConfig
    q_r: np.ndarray
    B_r: np.ndarray
    D_r: np.ndarray
    S_r: np.ndarray
    A_r: np.ndarray

    @classmethod
    def build(cls, cfg: ScenarioConfig, q_r, B_r, D_r) -> "ReferencePoint":
        q_r = np.array(q_r, dtype=float)
        B_r = np.array(B_r, dtype=float)
        D_r = np.array(D_r, dtype=float)
        if q_r.shape != (cfg.N + 1, 2):
            raise ValueError(f"q_r has shape {q_r.shape}, expected {(cfg.N + 1, 2)}")
        if B_r.shape != (cfg.K, cfg.N - 1):
            raise ValueError(f"B_r has shape {B_r.shape}, expected {(cfg.K, cfg.N - 1)}")
        if D_r.shape not in ((cfg.K, cfg.N - 1), (cfg.K,)):
            raise ValueError(f"D_r has shape {D_r.shape}")
        for name, arr in (("q_r", q_r), ("B_r", B_r), ("D_r", D_r)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} is not finite")
        if np.any(D_r < 0):
            raise ValueError("D_r must be non-negative")
        S_r = squared_distance(q_r[1:cfg.N], cfg)
        A_r = np.log(gain_constant(cfg.f_c) / S_r)
        for arr in (q_r, B_r, D_r, S_r, A_r):
            arr.setflags(write=False)
        return cls(cfg, q_r, B_r, D_r, S_r, A_r)

    @property
    def D_r_mb(self) -> np.ndarray:
        return self.D_r / MB


def squared_distance(q, cfg: ScenarioConfig) -> np.ndarray:
    """||q - g_k||^2 + H^2, shape (K, len(q))."""
    q = np.asarray(q, dtype=float)
    diff = q[None, :, :] - cfg.ue_positions[:, None, :]
    return np.sum(diff ** 2, axis=-1) + cfg.uav_altitude ** 2


# --- sign approximation -----------------------------------------------------

def sign_approx(d_mb, beta: float):
    """(e^{2 beta D} - 1) / (e^{2 beta D} + 1), i.e. tanh(beta D)."""
    return np.tanh(beta * np.asarray(d_mb, dtype=float))


def sign_approx_slope(d_mb, beta: float):
    """Derivative 4 beta e^{2 beta D} / (e^{2 beta D} + 1)^2."""
    # beta / cosh^2 keeps relative accuracy where 1 - tanh^2 would cancel
    x = np.abs(beta * np.asarray(d_mb, dtype=float))
    with np.errstate(over="ignore"):
        return beta / np.cosh(x) ** 2


# --- true functions the surrogates bound ------------------------------------

def true_r1(q_n, B_n, cfg: ScenarioConfig) -> float:
    """ln(sum_i p_i g_i + sigma^2) at one trajectory point."""
    logg = np.log(gain_constant(cfg.f_c) / squared_distance(np.atleast_2d(q_n), cfg)[:, 0])
    return float(logsumexp(np.append(np.asarray(B_n) + logg, np.log(cfg.sigma_z2))))


def true_r2(q_n, B_n, k: int, cfg: ScenarioConfig) -> float:
    """-ln(sum_{i != k} p_i g_i + sigma^2) at one trajectory point."""
    logg = np.log(gain_constant(cfg.f_c) / squared_distance(np.atleast_2d(q_n), cfg)[:, 0])
    x = np.delete(np.asarray(B_n) + logg, k)
    return -float(logsumexp(np.append(x, np.log(cfg.sigma_z2))))


def broadcast_log_requirement(x, Q_hat: float):
    """ln(e^{x Q_hat} - 1); -inf at x = 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.expm1(x * Q_hat))


def q_tilde(cfg: ScenarioConfig) -> float:
    return cfg.Q * np.log(2.0) / (cfg.t_cm * cfg.W)


def q_hat(cfg: ScenarioConfig) -> float:
    return cfg.Q * np.log(2.0) / (cfg.t_bc * cfg.W)


# --- trajectory surrogates --------------------------------------------------

def segment_length_lb(ref: ReferencePoint, n: int) -> AffineForm:
    """Tangent of ||q[n] - q[n-1]||^2 at the reference, 1 <= n <= N - 1."""
    if not 1 <= n <= ref.cfg.N - 1:
        raise IndexError(f"segment {n} outside 1..{ref.cfg.N - 1}")
    delta = ref.q_r[n] - ref.q_r[n - 1]
    sq = float(delta @ delta)
    return AffineForm(-sq, {"q[n]": 2.0 * delta, "q[n-1]": -2.0 * delta}, sq)


def segment_deltas(ref: ReferencePoint) -> np.ndarray:
    """q_r[n] - q_r[n-1] for n = 1..N-1, the coefficients of every segment form."""
    return np.diff(ref.q_r[: ref.cfg.N], axis=0)


@dataclass(frozen=True)
class GainLogBound:
    """A_lb(q) = ln(kappa^2 / S_r) - (S(q) - S_r) / S_r with S(q) = ||q - g||^2 + H^2.

    Affine in S, concave in q; never above ln g(q).
    """

    S_r: float
    kappa2: float
    g_ue: np.ndarray
    H: float

    @property
    def ref_value(self) -> float:
        return float(np.log(self.kappa2 / self.S_r))

    @property
    def affine(self) -> AffineForm:
        return AffineForm(self.ref_value + 1.0, {"S": -1.0 / self.S_r}, self.ref_value)

    def S(self, q) -> float:
        d = np.asarray(q, dtype=float) - self.g_ue
        return float(d @ d + self.H ** 2)

    def __call__(self, q) -> float:
        return self.affine({"S": self.S(q)})

    def gradient(self, q) -> np.ndarray:
        return -2.0 * (np.asarray(q, dtype=float) - self.g_ue) / self.S_r


def gain_log_lb(ref: ReferencePoint, k: int, n: int) -> GainLogBound:
    """Lower bound of ln g_k(q[n]); ``n`` is the slot, 1 <= n <= N - 1."""
    cfg = ref.cfg
    return GainLogBound(float(ref.S_r[k, n - 1]), gain_constant(cfg.f_c),
                        cfg.ue_positions[k].copy(), cfg.uav_altitude)


# --- uplink rate surrogates -------------------------------------------------

def r1_weights(ref: ReferencePoint) -> tuple[np.ndarray, np.ndarray]:
    """Softmax weights (K x (N-1)) and reference values ((N-1),) of R1."""
    x = ref.B_r + ref.A_r
    ln_s2 = np.log(ref.cfg.sigma_z2)
    top = np.vstack([x, np.full((1, x.shape[1]), ln_s2)])
    r1 = logsumexp(top, axis=0)
    return np.exp(x - r1[None, :]), r1


@dataclass(frozen=True)
class R1LowerBound:
    """R1_r + sum_i w_i (A_lb_i(q) - A_r_i) + sum_i w_i (B_i - B_r_i)."""

    ref_value: float
    weights: np.ndarray
    gains: tuple
    A_r: np.ndarray
    B_r: np.ndarray

    def __call__(self, q, B) -> float:
        B = np.asarray(B, dtype=float)
        alb = np.array([g(q) for g in self.gains])
        return float(self.ref_value + self.weights @ (alb - self.A_r) + self.weights @ (B - self.B_r))

    def gradient(self, q, B=None) -> tuple[np.ndarray, np.ndarray]:
        gq = sum(w * g.gradient(q) for w, g in zip(self.weights, self.gains))
        return np.asarray(gq), self.weights.copy()


def rate_r1_lb(ref: ReferencePoint, n: int) -> R1LowerBound:
    w, r1 = r1_weights(ref)
    j = n - 1
    gains = tuple(gain_log_lb(ref, k, n) for k in range(ref.cfg.K))
    return R1LowerBound(float(r1[j]), w[:, j].copy(), gains, ref.A_r[:, j].copy(), ref.B_r[:, j].copy())


@dataclass(frozen=True)
class R2LowerBound:
    """-ln(sum_{i != k} e^{B_i + At_i} + sigma^2).

    Valid below R2 whenever e^{At_i} >= g_i, which the coupling forms enforce:
    ``coupling[i](q) / kappa^2 >= e^{-At_i}``.
    """

    k: int
    sigma_z2: float
    kappa2: float
    coupling: tuple

    def __call__(self, B, At) -> float:
        x = np.delete(np.asarray(B, dtype=float) + np.asarray(At, dtype=float), self.k)
        return -float(logsumexp(np.append(x, np.log(self.sigma_z2))))

    def gradient(self, B, At) -> np.ndarray:
        x = np.asarray(B, dtype=float) + np.asarray(At, dtype=float)
        mask = np.ones_like(x, dtype=bool)
        mask[self.k] = False
        lse = logsumexp(np.append(x[mask], np.log(self.sigma_z2)))
        g = np.zeros_like(x)
        g[mask] = -np.exp(x[mask] - lse)
        return g

    def coupling_ok(self, q, At, tol: float = 0.0) -> bool:
        lhs = np.array([c({"q[n]": q}) for c in self.coupling])
        return bool(np.all(np.log(np.maximum(lhs, 1e-300)) - np.log(self.kappa2) + np.asarray(At) >= -tol))

    def tightest_At(self, q) -> np.ndarray:
        """Smallest At the coupling allows at ``q``."""
        lhs = np.array([c({"q[n]": q}) for c in self.coupling])
        return np.log(self.kappa2) - np.log(lhs)


def coupling_form(ref: ReferencePoint, k: int, n: int) -> AffineForm:
    """Tangent of ||q[n] - g_k||^2 + H^2 at q_r[n] (a global under-estimator)."""
    qr = ref.q_r[n]
    d = qr - ref.cfg.ue_positions[k]
    S_r = float(ref.S_r[k, n - 1])
    return AffineForm(S_r - 2.0 * float(d @ qr), {"q[n]": 2.0 * d}, S_r)


def rate_r2_lb(ref: ReferencePoint, n: int, k: int) -> R2LowerBound:
    cfg = ref.cfg
    coupling = tuple(coupling_form(ref, i, n) for i in range(cfg.K))
    return R2LowerBound(k, cfg.sigma_z2, gain_constant(cfg.f_c), coupling)


# --- data-size surrogates ---------------------------------------------------

def participation_affine_ub(D_r_mb: float, beta: float) -> AffineForm:
    """Tangent of the sign approximation at ``D_r_mb``; above it for every D >= 0."""
    if D_r_mb < 0:
        raise ValueError("reference data size must be non-negative")
    if beta <= 0:
        raise ValueError("beta must be positive")
    a_r = float(sign_approx(D_r_mb, beta))
    slope = float(sign_approx_slope(D_r_mb, beta))
    return AffineForm(a_r - slope * D_r_mb, {"D": slope}, a_r)


def participation_pwl_lb(D_r_mb, beta: float, grid=None) -> tuple[np.ndarray, np.ndarray]:
    """Concave piecewise-linear minorant of the sign approximation.

    Breakpoints are ``grid`` plus the reference itself, so the minorant is tight
    at the reference. Returns (slopes, intercepts) of shape (J,) + D_r.shape;
    the minorant is the pointwise minimum of the pieces (the last piece is the
    flat cap at the largest breakpoint).
    """
    if grid is None:
        grid = PWL_GRID_MB
    grid = np.asarray(grid, dtype=float)
    D_r = np.atleast_1d(np.asarray(D_r_mb, dtype=float))
    flat = D_r.ravel()
    J = len(grid)
    slopes = np.empty((J + 1, flat.size))
    inter = np.empty((J + 1, flat.size))
    for idx, d in enumerate(flat):
        pts = np.unique(np.append(grid, d))
        if pts.size == J:  # reference coincides with a grid point
            pts = np.append(pts, pts[-1] * 2.0)
        x0, x1 = pts[:-1], pts[1:]
        y0, y1 = sign_approx(x0, beta), sign_approx(x1, beta)
        s = (y1 - y0) / (x1 - x0)
        slopes[:J, idx] = s
        inter[:J, idx] = y0 - s * x0
        slopes[J, idx] = 0.0
        inter[J, idx] = sign_approx(pts[-1], beta)
    shape = (J + 1,) + np.shape(D_r_mb)
    return slopes.reshape(shape), inter.reshape(shape)


PWL_GRID_MB = np.array([0.0, 0.01, 0.025, 0.05, 0.08, 0.12, 0.18, 0.25, 0.35, 0.5, 0.75, 1.1, 1.6, 2.5, 4.0])


def evaluate_pwl(slopes, inter, d_mb):
    return np.min(slopes * np.asarray(d_mb) + inter, axis=0)


def sum_data_sq_lb(D_r_mb) -> AffineForm:
    """Tangent of (sum_j D_j)^2 at the reference column ``D_r_mb`` (K,)."""
    D_r = np.asarray(D_r_mb, dtype=float)
    if np.any(D_r < 0):
        raise ValueError("reference data sizes must be non-negative")
    s = float(D_r.sum())
    return AffineForm(-s * s, {"D": np.full(D_r.shape, 2.0 * s)}, s * s)


def broadcast_lhs_surrogate(cfg: ScenarioConfig, D_r_next_mb: Optional[float] = None,
                            a_next: Optional[int] = None) -> Optional[AffineForm]:
    """Left side of the broadcast constraint ``lhs <= C[n] + A_lb_k[n] - ln sigma^2``.

    Phase I (``D_r_next_mb`` given): affine in the next-slot data ``D`` (Mb),
    the tangent of ln(e^{x Q_hat} - 1) at the reference sign approximation,
    evaluated at the affine upper bound of the sign approximation.
    Phase II (``a_next`` given): the constant ln(e^{Q_hat} - 1) when the UE
    participates next slot, ``None`` (no constraint) otherwise.
    """
    Qh = q_hat(cfg)
    if a_next is not None:
        if a_next not in (0, 1):
            raise ValueError("participation must be binary")
        if a_next == 0:
            return None
        v = float(broadcast_log_requirement(1.0, Qh))
        return AffineForm(v, {}, v)
    if D_r_next_mb is None:
        raise ValueError("need D_r_next_mb (Phase I) or a_next (Phase II)")
    a_ub = participation_affine_ub(D_r_next_mb, cfg.beta)
    x_r = max(a_ub.ref_value, BROADCAST_REF_FLOOR)
    f_r = float(broadcast_log_requirement(x_r, Qh))
    fp = Qh * np.exp(x_r * Qh) / np.expm1(x_r * Qh)
    const = f_r + fp * (a_ub.const - x_r)
    slope = fp * a_ub.coef["D"]
    ref_val = f_r + fp * (a_ub.ref_value - x_r)
    return AffineForm(const, {"D": slope}, ref_val)


def broadcast_coeffs(cfg: ScenarioConfig, D_r_next_mb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Phase I broadcast left side: (const, slope) per element."""
    Qh = q_hat(cfg)
    a_r = sign_approx(D_r_next_mb, cfg.beta)
    sl = sign_approx_slope(D_r_next_mb, cfg.beta)
    x_r = np.maximum(a_r, BROADCAST_REF_FLOOR)
    f_r = broadcast_log_requirement(x_r, Qh)
    fp = Qh * np.exp(x_r * Qh) / np.expm1(x_r * Qh)
    const = f_r + fp * (a_r - sl * D_r_next_mb - x_r)
    return const, fp * sl
