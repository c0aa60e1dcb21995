"""Convergence bound of federated SGD with partial, data-weighted participation.

The bound tracks ``E||w_bar^i - w*||^2`` through the contraction

    e_{i+1} <= omega * e_i + A1 + eta^2 * sum_k (share_k^i)^2 * eps_v2,

with ``omega = 1 - eta*mu``, and reports ``(L/2) * e_{i+1}`` as the bound on
the expected optimality gap of the global loss.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import DecisionState, FLHyperparams, ScenarioConfig, SlackReport


class EmptySlotError(ValueError):
    """A slot without any participating data; the plan cannot train."""


@dataclass(frozen=True)
class ParticipationPlan:
    """Participation ``a`` and effective data ``d`` (bits), both K x S."""

    a: np.ndarray
    d: np.ndarray
    restricted: bool = True

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if a.shape != d.shape or a.ndim != 2:
            raise ValueError("a and d must be equal-shape 2-D arrays")
        if np.any(d < 0):
            raise ValueError("data sizes must be non-negative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_data(cls, d, restricted: bool = False) -> "ParticipationPlan":
        d = np.asarray(d, dtype=float)
        return cls((d > 0).astype(float), d, restricted)

    @classmethod
    def from_participation(cls, a, D) -> "ParticipationPlan":
        a = np.asarray(a, dtype=float)
        return cls(a, a * np.asarray(D, dtype=float)[:, None], True)

    @classmethod
    def from_state(cls, state: DecisionState) -> "ParticipationPlan":
        if state.relaxed:
            return cls.from_data(state.D_relaxed)
        return cls.from_participation(state.a, state.D)

    @property
    def K(self) -> int:
        return self.a.shape[0]

    @property
    def n_slots(self) -> int:
        return self.a.shape[1]

    def check_floors(self, a_min: int, D_th: float) -> SlackReport:
        count = (self.d > 0).sum(axis=0)
        return SlackReport({
            "participation_floor": count - a_min,
            "data_floor": self.d.sum(axis=1) - D_th,
        })


@dataclass(frozen=True)
class BoundConstants:
    omega: float
    zeta: float
    A1: float

    @classmethod
    def from_hyperparams(cls, fl: FLHyperparams, I: int) -> "BoundConstants":
        eta, L = fl.eta, fl.L
        omega = 1.0 - eta * fl.mu
        zeta = 2.0 * eta * (1.0 - 2.0 * eta * L)
        A1 = ((1.0 + zeta / (2.0 * eta)) * I ** 2 * eta ** 2 * fl.eps_s2
              + 0.5 * eta * L ** 2 * fl.eps_w * (zeta + 4.0 * eta))
        return cls(omega, zeta, A1)


def weighted_shares(plan: ParticipationPlan, n: int) -> np.ndarray:
    """Data shares of slot column ``n``; they sum to one."""
    col = plan.d[:, n]
    total = col.sum()
    if not total > 0:
        raise EmptySlotError(f"slot column {n} has no participating data")
    return col / total


def share_square_sums(plan: ParticipationPlan) -> np.ndarray:
    """sum_k share_k^2 for every slot column."""
    total = plan.d.sum(axis=0)
    if np.any(total <= 0):
        raise EmptySlotError(f"empty slot columns: {np.flatnonzero(total <= 0).tolist()}")
    shares = plan.d / total
    return np.sum(shares ** 2, axis=0)


def _update_square_sums(plan: ParticipationPlan, I: int, n_updates: int) -> np.ndarray:
    # update l belongs to slot column l // I
    per_slot = share_square_sums(plan)
    cols = np.arange(n_updates) // I
    if n_updates and cols[-1] >= plan.n_slots:
        raise ValueError(f"plan covers {plan.n_slots * I} updates, {n_updates} requested")
    return per_slot[cols]


def convergence_bound(plan: ParticipationPlan, fl: FLHyperparams, I: int, upto: int) -> float:
    """Bound on E[f_G(w_bar^upto) - f_G(w*)] after ``upto`` updates (closed form)."""
    if upto < 1:
        raise ValueError("need at least one update")
    if fl.eta > 1.0 / (2.0 * fl.L) + 1e-15:
        raise ValueError("bound requires eta <= 1/(2L)")
    c = BoundConstants.from_hyperparams(fl, I)
    s = _update_square_sums(plan, I, upto)
    i = upto - 1
    powers = c.omega ** (i - np.arange(upto))
    variance = fl.eta ** 2 * fl.eps_v2 * float(np.dot(powers, s))
    inner = (c.omega ** upto * fl.w0_gap
             + c.A1 * (1.0 - c.omega ** upto) / (fl.eta * fl.mu)
             + variance)
    return 0.5 * fl.L * inner


def bound_trace(plan: ParticipationPlan, fl: FLHyperparams, I: int, n_updates: int) -> np.ndarray:
    """Closed-form bound for upto = 1..n_updates (entry j is upto = j + 1)."""
    return np.array([convergence_bound(plan, fl, I, u) for u in range(1, n_updates + 1)])


def recursive_bound_trace(plan: ParticipationPlan, fl: FLHyperparams, I: int, n_updates: int) -> np.ndarray:
    """Same quantity as :func:`bound_trace`, one contraction step per update."""
    c = BoundConstants.from_hyperparams(fl, I)
    s = _update_square_sums(plan, I, n_updates)
    out = np.empty(n_updates)
    e = fl.w0_gap
    for l in range(n_updates):
        e = c.omega * e + c.A1 + fl.eta ** 2 * s[l] * fl.eps_v2
        out[l] = 0.5 * fl.L * e
    return out


def slot_weights(fl: FLHyperparams, I: int, n_slots: int) -> np.ndarray:
    """Per-slot multipliers of sum_k share^2 in the accuracy left-hand side."""
    omega = 1.0 - fl.eta * fl.mu
    n = np.arange(1, n_slots + 1)
    geo = (1.0 - omega ** I) / (fl.eta * fl.mu)
    return 0.5 * fl.L * fl.eta ** 2 * fl.eps_v2 * omega ** ((n_slots - n) * I) * geo


def accuracy_constant(fl: FLHyperparams, I: int, n_slots: int) -> float:
    """Participation-independent part of the accuracy left-hand side."""
    c = BoundConstants.from_hyperparams(fl, I)
    horizon = n_slots * I
    return 0.5 * fl.L * (c.omega ** horizon * fl.w0_gap
                         + c.A1 * (1.0 - c.omega ** horizon) / (fl.eta * fl.mu))


def accuracy_lhs(plan: ParticipationPlan, fl: FLHyperparams, I: int) -> float:
    """Bound after all (N-1) I updates, with the per-slot geometric collapse."""
    s = share_square_sums(plan)
    return accuracy_constant(fl, I, plan.n_slots) + float(np.dot(slot_weights(fl, I, plan.n_slots), s))


def check_accuracy(plan: ParticipationPlan, cfg: ScenarioConfig) -> SlackReport:
    try:
        value = accuracy_lhs(plan, cfg.fl, cfg.I)
    except EmptySlotError:
        value = np.inf
    return SlackReport({"accuracy": np.array([cfg.eps_G - value])})


def lemma_inequality_check(a, b, eta: float) -> bool:
    """-2<a,b> <= ||a||^2/eta + eta ||b||^2 (holds for every a, b, eta > 0)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lhs = -2.0 * float(np.dot(a, b))
    rhs = float(np.dot(a, a)) / eta + eta * float(np.dot(b, b))
    return lhs <= rhs + 1e-12 * max(1.0, abs(rhs))
