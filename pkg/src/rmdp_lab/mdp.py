"""Finite MDPs and exact planning primitives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

MAX_SWEEPS = 1_000_000


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Finite MDP ``(S, A, P, R, gamma)`` with dense tensors.

    ``transition[s, a, s2]`` is P(s2 | s, a) and ``reward[s, a, s2]`` is
    R(s, a, s2).  Arrays are copied and frozen on construction.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float

    def __post_init__(self):
        p = np.array(self.transition, dtype=float)
        r = np.array(self.reward, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"transition must have shape (S, A, S), got {p.shape}")
        if r.shape != p.shape:
            raise ValueError(f"reward shape {r.shape} != transition shape {p.shape}")
        if np.any(p < 0):
            raise ValueError("transition probabilities must be non-negative")
        if np.max(np.abs(p.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1")
        if not np.all(np.isfinite(r)):
            raise ValueError("rewards must be finite")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def value_bounds(self) -> tuple[float, float]:
        scale = 1.0 / (1.0 - self.gamma)
        return float(self.reward.min()) * scale, float(self.reward.max()) * scale


def stopping_threshold(tol: float, gamma: float) -> float:
    """Successive-sweep sup-norm threshold that makes ``tol`` a bound on
    the distance to the fixed point."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if gamma == 0.0:
        return np.inf
    return tol * (1.0 - gamma) / gamma


def q_values(mdp: TabularMDP, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.num_states,):
        raise ValueError(f"value shape {v.shape} does not match {mdp.num_states} states")
    return np.einsum("ijk,ijk->ij", mdp.transition, mdp.reward + mdp.gamma * v[None, None, :])


def bellman_operator(mdp: TabularMDP, v: np.ndarray) -> np.ndarray:
    return q_values(mdp, v).max(axis=1)


def value_iteration(mdp: TabularMDP, tol: float = 0.01) -> np.ndarray:
    """Synchronous value iteration with ``||V - V*|| <= tol`` on return."""
    thresh = stopping_threshold(tol, mdp.gamma)
    n_s, n_a = mdp.num_states, mdp.num_actions
    v, _, _ = _kernels.mixture_fixed_point(
        mdp.transition, np.zeros((n_s, n_a)), np.zeros((n_s, n_a)),
        mdp.reward, mdp.gamma, thresh, MAX_SWEEPS,
    )
    return v


def _check_policy(mdp: TabularMDP, policy) -> np.ndarray:
    policy = np.asarray(policy)
    if policy.shape != (mdp.num_states,):
        raise ValueError(f"policy shape {policy.shape} does not match {mdp.num_states} states")
    if not np.issubdtype(policy.dtype, np.integer):
        raise ValueError("policy entries must be integer action indices")
    if np.any(policy < 0) or np.any(policy >= mdp.num_actions):
        raise ValueError("policy contains out-of-range action indices")
    return policy.astype(np.int64)


def policy_value(mdp: TabularMDP, policy, tol: float = 0.01) -> np.ndarray:
    """Iterative policy evaluation, ``||V - V^pi|| <= tol``."""
    policy = _check_policy(mdp, policy)
    thresh = stopping_threshold(tol, mdp.gamma)
    v, _ = _kernels.policy_fixed_point(
        mdp.transition, mdp.reward, policy, mdp.gamma, thresh, MAX_SWEEPS
    )
    return v


def greedy_policy(mdp: TabularMDP, v: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximiser: lowest-index tie-break.
    return np.argmax(q_values(mdp, v), axis=1).astype(np.int64)


def expected_reward(mdp: TabularMDP) -> np.ndarray:
    """``r(s, a) = sum_s' P(s'|s,a) R(s,a,s')``, shape ``(S, A)``."""
    return np.einsum("ijk,ijk->ij", mdp.transition, mdp.reward)


def known_reward_model(mdp: TabularMDP) -> np.ndarray:
    """Reward tensor an agent plans with when it knows ``r(s, a)`` but not
    the transitions: the expected reward broadcast over successors."""
    r = expected_reward(mdp)
    return np.repeat(r[:, :, None], mdp.num_states, axis=2)
