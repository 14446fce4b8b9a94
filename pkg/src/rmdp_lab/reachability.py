"""Ground-truth diagnostics built on exhaustive enumeration of h-reachable
models of the sample-mean learner."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .explorers import TransitionCounts
from .mdp import TabularMDP, policy_value, value_iteration

MAX_ALLOCATIONS = 10 ** 6
TIE_TOL = 1e-12


class CapacityError(RuntimeError):
    """Raised when an enumeration would exceed :data:`MAX_ALLOCATIONS`."""


def num_allocations(h: int, num_states: int) -> int:
    return math.comb(h + num_states - 1, num_states - 1)


@lru_cache(maxsize=256)
def _compositions(total: int, parts: int) -> np.ndarray:
    if parts == 1:
        out = np.array([[total]], dtype=np.int64)
    else:
        blocks = []
        for first in range(total + 1):
            rest = _compositions(total - first, parts - 1)
            blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
        out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def allocations(h: int, num_states: int) -> np.ndarray:
    """All ways to distribute ``h`` extra samples over ``num_states``
    successors, in lexicographic order."""
    if h < 0 or int(h) != h:
        raise ValueError(f"h must be a non-negative integer, got {h}")
    count = num_allocations(int(h), num_states)
    if count > MAX_ALLOCATIONS:
        raise CapacityError(f"{count} allocations for h={h}, |S|={num_states} exceeds {MAX_ALLOCATIONS}")
    return _compositions(int(h), num_states)


def best_reachable_allocation(counts_sa, p_true, h: int) -> tuple[np.ndarray, float]:
    """Allocation of ``h`` extra samples minimising the L1 distance of the
    updated sample mean to ``p_true``.  Returns ``(allocation, distance)``;
    ties go to the lexicographically smallest allocation."""
    counts_sa = np.asarray(counts_sa, dtype=float)
    p_true = np.asarray(p_true, dtype=float)
    n = counts_sa.sum()
    if n + h == 0:
        raise ValueError("no samples and h = 0: the sample mean is undefined")
    extra = allocations(h, len(counts_sa))
    models = (counts_sa[None, :] + extra) / (n + h)
    dist = np.abs(models - p_true[None, :]).sum(axis=1)
    best = int(np.flatnonzero(dist <= dist.min() + TIE_TOL)[0])
    return extra[best].copy(), float(dist[best])


def best_reachable_model(counts_sa, p_true, h: int) -> np.ndarray:
    """Closest (in L1) model to ``p_true`` among those the sample-mean
    learner reaches with ``h`` more samples.

    With no data and ``h = 0`` the current model is undefined; the uniform
    distribution is substituted.
    """
    counts_sa = np.asarray(counts_sa, dtype=float)
    n = counts_sa.sum()
    if n + h == 0:
        return np.full(len(counts_sa), 1.0 / len(counts_sa))
    extra, _ = best_reachable_allocation(counts_sa, p_true, h)
    return (counts_sa + extra) / (n + h)


def h_reachable_mdp(true_mdp: TabularMDP, counts, h: int) -> tuple[TabularMDP, np.ndarray]:
    """MDP with true rewards and, per (s, a), the best h-reachable model.

    Returns ``(mdp, substituted)`` where ``substituted`` flags pairs whose
    model fell back to uniform (no data and ``h = 0``).
    """
    n_sas = counts.n_sas if isinstance(counts, TransitionCounts) else np.asarray(counts, dtype=float)
    n_s, n_a = true_mdp.num_states, true_mdp.num_actions
    if n_sas.shape != (n_s, n_a, n_s):
        raise ValueError(f"counts shape {n_sas.shape} does not match the MDP")
    p = np.empty_like(n_sas)
    substituted = np.zeros((n_s, n_a), dtype=bool)
    for s in range(n_s):
        for a in range(n_a):
            substituted[s, a] = n_sas[s, a].sum() + h == 0
            p[s, a] = best_reachable_model(n_sas[s, a], true_mdp.transition[s, a], h)
    # renormalise away rounding so the TabularMDP invariant holds exactly
    p /= p.sum(axis=2, keepdims=True)
    return TabularMDP(p, true_mdp.reward, true_mdp.gamma), substituted


def h_reachable_optimal_value(true_mdp: TabularMDP, counts, h: int, tol: float = 1e-6) -> np.ndarray:
    mdp, _ = h_reachable_mdp(true_mdp, counts, h)
    return value_iteration(mdp, tol)


def anytime_error(true_mdp: TabularMDP, policy, counts, h: int, state: int, tol: float = 1e-6) -> float:
    """Shortfall of the policy's true value at ``state`` against the
    h-reachable optimal value, floored at zero."""
    target = h_reachable_optimal_value(true_mdp, counts, h, tol)[state]
    actual = policy_value(true_mdp, policy, tol)[state]
    return max(0.0, float(target - actual))


def average_loss(errors, horizon: int, gamma: float) -> float:
    """``(1/T) sum_{t=1..T} (1 - gamma^(T+1-t)) eps_t``."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    errors = np.asarray(errors, dtype=float)
    if len(errors) < horizon:
        raise ValueError(f"need {horizon} errors, got {len(errors)}")
    t = np.arange(1, horizon + 1)
    weights = 1.0 - gamma ** (horizon + 1 - t)
    return float(np.dot(weights, errors[:horizon]) / horizon)


def explicit_exploration_runtime(gaps, eps: float) -> int | None:
    """Smallest index after which every gap stays within ``eps``;
    ``None`` if the final gap still exceeds it."""
    gaps = np.asarray(gaps, dtype=float)
    if len(gaps) == 0:
        return 0
    above = np.flatnonzero(gaps > eps)
    if len(above) == 0:
        return 0
    last = int(above[-1])
    return None if last == len(gaps) - 1 else last + 1


@dataclass
class MetricSeries:
    """Per-step diagnostics of one run.  ``anytime_error`` holds NaN at
    steps where it was not evaluated."""

    anytime_error: list = field(default_factory=list)
    explore_gap: list = field(default_factory=list)
    cumulative_reward: list = field(default_factory=list)

    def record(self, reward: float, gap: float = math.nan, error: float = math.nan) -> None:
        prev = self.cumulative_reward[-1] if self.cumulative_reward else 0.0
        self.cumulative_reward.append(prev + reward)
        self.explore_gap.append(gap)
        self.anytime_error.append(math.nan if math.isnan(error) else max(0.0, error))

    def exploration_runtime(self, eps: float) -> int | None:
        return explicit_exploration_runtime(self.explore_gap, eps)
