"""Federated SGD on synthetic strongly convex quadratics.

Each UE owns ``f_k(w) = 0.5 (w - c_k)^T M_k (w - c_k)`` with the spectrum of
``M_k`` inside ``[mu, L]``. The global loss weights the local losses by
dataset size, so it inherits the same ``mu`` and ``L``. Stochastic gradients
are the exact gradient plus isotropic Gaussian noise, which makes the
gradient-variance constant known in closed form.

Seeds: repetition ``r`` of a run with root seed ``s`` uses
``np.random.SeedSequence(s).spawn(n_reps)[r]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flbound import ParticipationPlan, bound_trace, weighted_shares
from .scenario import FLHyperparams


@dataclass(frozen=True)
class SyntheticTask:
    M: np.ndarray       # (K, dim, dim) local Hessians
    c: np.ndarray       # (K, dim) local optima
    D: np.ndarray       # (K,) dataset sizes used as global weights
    noise: float        # per-coordinate std of the gradient noise
    w0: np.ndarray      # (dim,) common initial model
    mu: float
    L: float

    @property
    def K(self) -> int:
        return self.M.shape[0]

    @property
    def dim(self) -> int:
        return self.M.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return self.D / self.D.sum()

    @property
    def w_star(self) -> np.ndarray:
        pi = self.weights
        H = np.einsum("k,kij->ij", pi, self.M)
        rhs = np.einsum("k,kij,kj->i", pi, self.M, self.c)
        return np.linalg.solve(H, rhs)

    def local_loss(self, w) -> np.ndarray:
        """f_k(w) for every UE; ``w`` is (dim,) or (K, dim)."""
        r = np.asarray(w) - self.c
        return 0.5 * np.einsum("ki,kij,kj->k", r, self.M, r)

    def local_grad(self, w) -> np.ndarray:
        """Exact gradients, (K, dim); ``w`` is (dim,) or (K, dim)."""
        return np.einsum("kij,kj->ki", self.M, np.asarray(w) - self.c)

    def global_loss(self, w) -> float:
        w = np.broadcast_to(np.asarray(w, dtype=float), self.c.shape)
        return float(np.dot(self.weights, self.local_loss(w)))

    def gap(self, w) -> float:
        return self.global_loss(w) - self.global_loss(self.w_star)


def _random_spd(rng, dim, mu, L):
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = rng.uniform(mu, L, size=dim)
    eig[0], eig[-1] = mu, L
    return (Q * eig) @ Q.T


def make_task(K: int = 6, dim: int = 10, mu: float = 1.0, L: float = 4.0,
              eps_w: float = 1.0, noise: float = 0.3, w0_distance: float = 3.0,
              D=None, seed: int = 0) -> SyntheticTask:
    """Random quadratic task with ``max_k ||w* - c_k||^2 == eps_w``."""
    rng = np.random.default_rng(seed)
    M = np.stack([_random_spd(rng, dim, mu, L) for _ in range(K)])
    D = rng.uniform(0.5, 1.5, size=K) if D is None else np.asarray(D, dtype=float)
    pi = D / D.sum()
    center = rng.standard_normal(dim)
    x = rng.standard_normal((K, dim))
    x -= x.mean(axis=0)
    H = np.einsum("k,kij->ij", pi, M)
    shift = np.linalg.solve(H, np.einsum("k,kij,kj->i", pi, M, x))
    dev = np.sum((x - shift) ** 2, axis=1).max()
    t = np.sqrt(eps_w / dev) if dev > 0 else 0.0
    c = center + t * x
    task = SyntheticTask(M, c, D, float(noise), np.zeros(dim), float(mu), float(L))
    u = rng.standard_normal(dim)
    w0 = task.w_star + w0_distance * u / np.linalg.norm(u)
    return SyntheticTask(M, c, D, float(noise), w0, float(mu), float(L))


def random_plan(task: SyntheticTask, n_slots: int, a_min: int = 2, seed: int = 0) -> ParticipationPlan:
    """Each slot draws between a_min and K participants uniformly."""
    rng = np.random.default_rng(seed)
    a = np.zeros((task.K, n_slots))
    for n in range(n_slots):
        m = rng.integers(a_min, task.K + 1)
        a[rng.choice(task.K, size=m, replace=False), n] = 1.0
    return ParticipationPlan.from_participation(a, task.D)


@dataclass
class FedSGDTrace:
    gaps: np.ndarray              # (reps, total_updates + 1), virtual-model gap
    virtual_error: float          # max |recursive w_bar - averaged w_bar|
    aggregation_indices: np.ndarray

    @property
    def mean_gap(self) -> np.ndarray:
        return self.gaps.mean(axis=0)


def _single_run(task, plan, I, eta, total_updates, rng):
    K = task.K
    w_local = np.tile(task.w0, (K, 1))
    w_bar = task.w0.copy()
    w_rec = task.w0.copy()
    gaps = np.empty(total_updates + 1)
    gaps[0] = task.gap(w_bar)
    err = 0.0
    for i in range(total_updates):
        col = i // I
        shares = weighted_shares(plan, col)
        active = shares > 0
        g = task.local_grad(w_local) + task.noise * rng.standard_normal(w_local.shape)
        g[~active] = 0.0
        w_local = w_local - eta * g
        w_rec = w_rec - eta * shares @ g
        if (i + 1) % I == 0:
            w_glob = shares @ w_local
            w_local = np.tile(w_glob, (K, 1))
            w_bar = w_glob
        else:
            w_bar = shares @ w_local
        err = max(err, float(np.max(np.abs(w_rec - w_bar))))
        gaps[i + 1] = task.gap(w_bar)
    return gaps, err


def run_federated_sgd(task: SyntheticTask, plan: ParticipationPlan, I: int, eta: float,
                      total_updates: int, seed: int, n_reps: int = 50) -> FedSGDTrace:
    """I-step local SGD with weighted aggregation; every I-th update aggregates.

    Returns the gap of the virtual (data-weighted average) model after every
    update, for ``n_reps`` seeded repetitions.
    """
    if eta > 1.0 / (2.0 * task.L) + 1e-15:
        raise ValueError("eta must satisfy eta <= 1/(2L)")
    if plan.n_slots * I < total_updates:
        raise ValueError("plan does not cover the requested number of updates")
    for col in range(-(-total_updates // I)):
        weighted_shares(plan, col)  # raises on an empty slot
    children = np.random.SeedSequence(seed).spawn(n_reps)
    gaps = np.empty((n_reps, total_updates + 1))
    err = 0.0
    for r, child in enumerate(children):
        gaps[r], e = _single_run(task, plan, I, eta, total_updates, np.random.default_rng(child))
        err = max(err, e)
    agg = np.arange(I, total_updates + 1, I)
    return FedSGDTrace(gaps, err, agg)


def estimate_constants(task: SyntheticTask, seed: int, eta: float | None = None,
                       n_samples: int = 4000, margin: float = 0.1) -> FLHyperparams:
    """Constants of the bound for ``task``.

    ``mu`` and ``L`` come from the Hessian spectra. The gradient-variance,
    gradient-norm, optimum-spread and initial-gap constants are Monte-Carlo
    maxima inflated by ``margin``. Gradient norms are sampled on the sphere of
    radius ``2 R`` around ``w*``, with ``R`` the largest distance from ``w*``
    to the initial model or any local optimum.
    """
    rng = np.random.default_rng(seed)
    eigs = np.linalg.eigvalsh(task.M)
    L = float(eigs.max())
    mu = float(eigs.min())
    eta = 1.0 / (2.0 * L) if eta is None else eta
    up = 1.0 + margin
    dim = task.dim

    xi = task.noise * rng.standard_normal((n_samples, dim))
    eps_v2 = up * float(np.mean(np.sum(xi ** 2, axis=1)))

    w_star = task.w_star
    R = max(np.linalg.norm(task.w0 - w_star), np.linalg.norm(task.c - w_star, axis=1).max())
    u = rng.standard_normal((n_samples, dim))
    pts = w_star + 2.0 * R * u / np.linalg.norm(u, axis=1, keepdims=True)
    grad_sq = np.einsum("kij,skj->ski", task.M, pts[:, None, :] - task.c[None, :, :])
    eps_s2 = up * (float(np.max(np.sum(grad_sq ** 2, axis=2))) + eps_v2 / up)

    eps_w = up * float(np.max(np.sum((task.c - w_star) ** 2, axis=1)))
    w0_gap = up * float(np.sum((task.w0 - w_star) ** 2))
    return FLHyperparams(eta=eta, mu=mu, L=L, eps_v2=eps_v2, eps_s2=eps_s2, eps_w=eps_w, w0_gap=w0_gap)


@dataclass
class BoundValidation:
    trace: FedSGDTrace
    bound: np.ndarray           # bound for upto = 1..total_updates
    seed_pass_fraction: float   # seeds whose gap stays under the bound at every aggregation
    mean_pass: bool             # mean gap under the bound at every aggregation

    def rows(self):
        """(update index, mean empirical gap, bound) for every update >= 1."""
        mean = self.trace.mean_gap
        for i in range(1, len(mean)):
            yield i, float(mean[i]), float(self.bound[i - 1])


def validate_bound(task: SyntheticTask | None = None, plan: ParticipationPlan | None = None,
                   I: int = 5, total_updates: int = 200, n_reps: int = 50, seed: int = 0,
                   eta: float = 0.05) -> BoundValidation:
    """Run the Monte-Carlo check of the bound on the default K=6, dim=10 task."""
    task = make_task(seed=seed) if task is None else task
    n_slots = -(-total_updates // I)
    plan = random_plan(task, n_slots, seed=seed + 1) if plan is None else plan
    fl = estimate_constants(task, seed + 2, eta=eta)
    trace = run_federated_sgd(task, plan, I, eta, total_updates, seed + 3, n_reps)
    bound = bound_trace(plan, fl, I, total_updates)
    idx = trace.aggregation_indices
    under = trace.gaps[:, idx] <= bound[idx - 1]
    frac = float(np.mean(np.all(under, axis=1)))
    mean_ok = bool(np.all(trace.mean_gap[idx] <= bound[idx - 1]))
    return BoundValidation(trace, bound, frac, mean_ok)
