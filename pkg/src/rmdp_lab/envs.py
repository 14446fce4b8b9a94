"""Benchmark simulators: the five-state chain, its low-probability variant,
and the modified mountain car."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mdp import TabularMDP

FORWARD, RESET = 0, 1


SLIP_MODES = ("opposite", "to_start")


@dataclass(frozen=True)
class ChainSpec:
    """Five-state chain parameters, rewards scaled so that R_max = 1.

    ``slip`` selects what a failed move does.  ``"opposite"`` (default)
    executes the other action, so a slipped forward move resets and a
    slipped reset moves forward; rewards then depend only on the
    successor.  ``"to_start"`` sends a slipped forward move to the first
    state, resets always succeed, and rewards depend on the chosen action.
    """

    num_states: int = 5
    forward_success: float = 0.8
    reset_reward: float = 0.2
    goal_reward: float = 1.0
    slip: str = "opposite"

    def __post_init__(self):
        if self.num_states < 2:
            raise ValueError("chain needs at least two states")
        if not 0.0 <= self.forward_success <= 1.0:
            raise ValueError("forward_success must be a probability")
        if self.goal_reward != 1.0:
            raise ValueError("goal reward is normalised to R_max = 1")
        if not 0.0 <= self.reset_reward <= self.goal_reward:
            raise ValueError("reset_reward must lie in [0, goal_reward]")
        if self.slip not in SLIP_MODES:
            raise ValueError(f"slip must be one of {SLIP_MODES}, got {self.slip!r}")


def _chain_rewards(spec: ChainSpec, action_based: bool) -> np.ndarray:
    # rewards follow the executed action: when a slip executes the other
    # action they are a function of the successor instead
    n = spec.num_states
    r = np.zeros((n, 2, n))
    if not action_based:
        r[:, :, 0] = spec.reset_reward
        r[n - 1, :, n - 1] = spec.goal_reward
    else:
        r[n - 1, FORWARD, :] = spec.goal_reward
        r[:, RESET, :] = spec.reset_reward
    return r


def chain_mdp(spec: ChainSpec = ChainSpec(), gamma: float = 0.95) -> TabularMDP:
    """Forward moves one state right (staying at the end) with probability
    ``forward_success``; reset returns to the first state.  What happens
    otherwise is set by ``spec.slip``."""
    n = spec.num_states
    q = 1.0 - spec.forward_success
    p = np.zeros((n, 2, n))
    for i in range(n):
        nxt = min(i + 1, n - 1)
        p[i, FORWARD, nxt] += spec.forward_success
        p[i, FORWARD, 0] += q
        if spec.slip == "opposite":
            p[i, RESET, 0] += spec.forward_success
            p[i, RESET, nxt] += q
        else:
            p[i, RESET, 0] = 1.0
    return TabularMDP(p, _chain_rewards(spec, spec.slip == "to_start"), gamma)


def modified_chain_mdp(spec: ChainSpec = ChainSpec(), gamma: float = 0.95) -> TabularMDP:
    """Chain whose first forward step succeeds with probability 0.05;
    later forward steps succeed with probability 0.99 and reset is
    deterministic.  A failed forward move is not a slip into the other
    action, so rewards follow the chosen action.  ``forward_success`` and
    ``slip`` are ignored."""
    n = spec.num_states
    p = np.zeros((n, 2, n))
    p[0, FORWARD, 1] = 0.05
    p[0, FORWARD, 0] = 0.95
    for i in range(1, n):
        p[i, FORWARD, min(i + 1, n - 1)] += 0.99
        p[i, FORWARD, 0] += 0.01
    p[:, RESET, 0] = 1.0
    return TabularMDP(p, _chain_rewards(spec, True), gamma)


class DiscreteEnv:
    """Samples transitions of a TabularMDP using an injected generator."""

    def __init__(self, mdp: TabularMDP, rng: np.random.Generator, start_state: int = 0):
        self.mdp = mdp
        self.rng = rng
        self.start_state = start_state
        self._cdf = np.cumsum(mdp.transition, axis=2)
        self._cdf[:, :, -1] = 1.0
        self.state = start_state

    @property
    def num_states(self) -> int:
        return self.mdp.num_states

    @property
    def num_actions(self) -> int:
        return self.mdp.num_actions

    def reset(self) -> int:
        self.state = self.start_state
        return self.state

    def step(self, action: int) -> tuple[int, float]:
        s = self.state
        u = self.rng.random()
        s2 = int(np.searchsorted(self._cdf[s, action], u, side="right"))
        r = float(self.mdp.reward[s, action, s2])
        self.state = s2
        return s2, r


@dataclass(frozen=True)
class MountainCarSpec:
    position_range: tuple[float, float] = (-1.2, 0.6)
    velocity_range: tuple[float, float] = (-0.07, 0.07)
    actions: tuple[float, ...] = (-1.0, 0.0, 1.0)
    start: tuple[float, float] = (-0.5, 0.0)
    velocity_noise: float = 0.001
    near_zone: tuple[float, float] = (-0.6, 0.4)
    near_reward: float = -0.9
    far_reward: float = -1.0
    goal_position: float = 0.5
    episode_steps: int = 2000
    force: float = 0.001
    gravity: float = 0.0025

    def __post_init__(self):
        if self.velocity_noise < 0:
            raise ValueError("velocity_noise must be non-negative")
        if self.episode_steps < 1:
            raise ValueError("episode_steps must be positive")

    def clamp(self, position: float, velocity: float) -> tuple[float, float]:
        lo_p, hi_p = self.position_range
        lo_v, hi_v = self.velocity_range
        return min(max(position, lo_p), hi_p), min(max(velocity, lo_v), hi_v)

    def reward_at(self, position: float) -> float:
        if position >= self.goal_position:
            return 0.0
        lo, hi = self.near_zone
        return self.near_reward if lo <= position <= hi else self.far_reward


def mountain_car_step(spec: MountainCarSpec, state, action: int,
                      rng: np.random.Generator | None) -> tuple[tuple[float, float], float, bool]:
    """One transition of the modified mountain car.

    Returns ``(next_state, reward, reached_goal)``; the step cap is the
    caller's business (see :class:`MountainCarEnv`).
    """
    p, v = float(state[0]), float(state[1])
    lo_p, hi_p = spec.position_range
    lo_v, hi_v = spec.velocity_range
    if not (lo_p <= p <= hi_p and lo_v <= v <= hi_v):
        raise ValueError(f"state {state!r} outside the mountain-car box")
    noise = spec.velocity_noise * rng.standard_normal() if rng is not None and spec.velocity_noise else 0.0
    v2 = v + spec.force * spec.actions[action] - spec.gravity * math.cos(3.0 * p) + noise
    v2 = min(max(v2, lo_v), hi_v)
    p2 = p + v2
    if p2 <= lo_p:
        p2, v2 = lo_p, 0.0
    p2 = min(p2, hi_p)
    done = p2 >= spec.goal_position
    return (p2, v2), spec.reward_at(p2), done


class MountainCarEnv:
    def __init__(self, spec: MountainCarSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.state = spec.start
        self.steps = 0

    @property
    def num_actions(self) -> int:
        return len(self.spec.actions)

    def reset(self):
        self.state = self.spec.start
        self.steps = 0
        return self.state

    def step(self, action: int):
        """Returns ``(next_state, reward, done)``; done on goal or step cap."""
        self.state, r, goal = mountain_car_step(self.spec, self.state, action, self.rng)
        self.steps += 1
        return self.state, r, goal or self.steps >= self.spec.episode_steps
