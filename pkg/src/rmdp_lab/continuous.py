"""Continuous-state agents: the linear PAC-RMDP learner, its PAC-MDP
style variant and epsilon-greedy, on the mountain car."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import MountainCarSpec
from .linear import FeatureMap, LinearModel, ModelSnapshot, bonus_reward, estimate_L
from .planning import RIDGE, PlanResult, RbfGrid, fitted_value_iteration, greedy_action


FEATURE_KINDS = ("velocity", "position_velocity")


def mountain_car_features(spec: MountainCarSpec, grid: int = 10, kind: str = "velocity") -> FeatureMap:
    """Velocity model features.  Only the velocity is learned; the position
    update is the known kinematics ``p' = p + v'``.

    ``kind="velocity"``: ``grid`` Gaussian RBFs over the velocity, one copy
    per control signal (``3 * grid`` features).  The model cannot see the
    position, so gravity is left to the misspecification bound Delta.
    ``kind="position_velocity"``: a ``grid x grid`` RBF grid over
    (position, velocity) followed by the control signal.
    Bandwidths are one grid cell.
    """
    if kind not in FEATURE_KINDS:
        raise ValueError(f"unknown feature kind {kind!r}")
    (p_lo, p_hi), (v_lo, v_hi) = spec.position_range, spec.velocity_range
    pc = np.linspace(p_lo, p_hi, grid)
    vc = np.linspace(v_lo, v_hi, grid)
    pw = (p_hi - p_lo) / (grid - 1)
    vw = (v_hi - v_lo) / (grid - 1)
    controls = np.asarray(spec.actions, dtype=float)
    n_a = len(controls)

    def phi_v(states, actions):
        kv = np.exp(-(((states[:, 1, None] - vc[None, :]) / vw) ** 2))
        out = np.zeros((len(states), n_a, grid))
        out[np.arange(len(states)), actions] = kv
        return out.reshape(len(states), -1)

    def phi_pv(states, actions):
        kp = np.exp(-(((states[:, 0, None] - pc[None, :]) / pw) ** 2))
        kv = np.exp(-(((states[:, 1, None] - vc[None, :]) / vw) ** 2))
        rbf = (kp[:, :, None] * kv[:, None, :]).reshape(len(states), -1)
        return np.concatenate([rbf, controls[actions][:, None]], axis=1)

    if kind == "velocity":
        return FeatureMap((phi_v,), (n_a * grid,), (1,))
    return FeatureMap((phi_pv,), (grid * grid + 1,), (1,))


def mountain_car_kinematics(spec: MountainCarSpec, states, velocity) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Apply the known part of the dynamics to predicted velocities.
    Returns ``(next_states, rewards, done)`` for a batch."""
    (p_lo, p_hi), (v_lo, v_hi) = spec.position_range, spec.velocity_range
    v2 = np.clip(velocity, v_lo, v_hi)
    p2 = states[:, 0] + v2
    wall = p2 <= p_lo
    p2 = np.clip(p2, p_lo, p_hi)
    v2 = np.where(wall, 0.0, v2)
    lo, hi = spec.near_zone
    r = np.where((p2 >= lo) & (p2 <= hi), spec.near_reward, spec.far_reward)
    done = p2 >= spec.goal_position
    r = np.where(done, 0.0, r)
    return np.stack([p2, v2], axis=1), r, done


@dataclass(frozen=True)
class LinearAgentConfig:
    """Settings of :class:`LinearRmdpAgent`.

    ``lipschitz=None`` re-estimates L from the planner's values after
    every planning phase.
    ``pac_mdp_eps`` switches to the known/unknown treatment: pairs whose
    value uncertainty ``L ||I_1||`` exceeds it are given the optimistic
    value ``R_max / (1 - gamma)`` instead of a bonus.
    """

    h: float = 10.0
    delta: float = 0.9
    delta_bound: float | None = 0.14
    sigma: float = 0.001
    lipschitz: float | None = None
    gamma: float = 0.99
    feature_grid: int = 10
    features: str = "velocity"
    plan_grid: tuple[int, int] = (30, 30)
    plan_every: int = 100
    sweeps: int = 60
    tol: float = 1e-3
    ridge: float = RIDGE
    explore_eps: float = 0.0
    pac_mdp_eps: float | None = None
    r_max: float = 0.0

    def validate(self):
        if self.h < 0:
            raise ValueError("h must be non-negative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.delta_bound is not None and self.delta_bound < 0:
            raise ValueError("delta_bound must be non-negative")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ValueError("lipschitz must be non-negative")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.explore_eps <= 1.0:
            raise ValueError("explore_eps must lie in [0, 1]")
        if self.features not in FEATURE_KINDS:
            raise ValueError(f"features must be one of {FEATURE_KINDS}")
        if self.pac_mdp_eps is not None and not self.pac_mdp_eps > 0:
            raise ValueError("pac_mdp_eps must be positive")
        if not self.ridge > 0:
            raise ValueError("ridge must be positive")
        if self.plan_every < 1 or self.sweeps < 1 or self.feature_grid < 2 or min(self.plan_grid) < 2:
            raise ValueError("plan_every, sweeps and grid sizes must be positive")


class LinearRmdpAgent:
    """Learns the velocity by least squares and plans by fitted value
    iteration on the certainty-equivalent model with bonused reward.

    Planning happens on the first action of an episode and then every
    ``plan_every`` steps; between plans the agent acts greedily against
    the latest value function and model snapshot.
    """

    def __init__(self, spec: MountainCarSpec, config: LinearAgentConfig, rng: np.random.Generator | None = None):
        config.validate()
        self.spec = spec
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.features = mountain_car_features(spec, config.feature_grid, config.features)
        self.model = LinearModel(self.features, [config.sigma], [config.delta_bound])
        self.num_actions = len(spec.actions)
        (p_lo, p_hi), (v_lo, v_hi) = spec.position_range, spec.velocity_range
        self.grid = RbfGrid.uniform([p_lo, v_lo], [p_hi, v_hi], config.plan_grid)
        self.lipschitz = 0.0 if config.lipschitz is None else float(config.lipschitz)
        self.plan_result: PlanResult | None = None
        self.snapshot: ModelSnapshot = self.model.snapshot(config.h, config.delta)
        self.plans = 0
        self._since_plan = 0

    # -- model ------------------------------------------------------------

    def model_step(self, states, action):
        """Certainty-equivalent transition of the current snapshot, with
        the bonused reward capped at ``r_max``."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        acts = np.full(len(states), action)
        v = self.snapshot.predict(states, acts)[:, 0]
        s2, r, done = mountain_car_kinematics(self.spec, states, v)
        if self.config.pac_mdp_eps is None and self.config.h > 0 and self.lipschitz > 0:
            r = bonus_reward(r, self.snapshot.intervals(states, acts), self.lipschitz)
            r = np.minimum(r, self.config.r_max)
        return s2, r, done

    def _unknown_values(self) -> np.ndarray | None:
        eps = self.config.pac_mdp_eps
        if eps is None:
            return None
        centers = self.grid.centers
        v_max = self.config.r_max / (1.0 - self.config.gamma)
        out = np.full((self.num_actions, len(centers)), np.nan)
        unit = self.model.snapshot(1.0, self.config.delta)
        for a in range(self.num_actions):
            acts = np.full(len(centers), a)
            width = self.lipschitz * np.linalg.norm(unit.intervals(centers, acts), axis=1)
            out[a, width > eps] = v_max
        return out

    # -- agent contract ---------------------------------------------------

    def plan(self) -> PlanResult:
        cfg = self.config
        self.snapshot = self.model.snapshot(cfg.h, cfg.delta)
        result = fitted_value_iteration(
            self.model_step, self.grid, cfg.gamma, self.num_actions,
            sweeps=cfg.sweeps, tol=cfg.tol, ridge=cfg.ridge, optimistic_value=self._unknown_values(),
        )
        self.model.count_call()
        self.grid = result.grid
        self.plan_result = result
        self.plans += 1
        self._since_plan = 0
        if cfg.lipschitz is None and (cfg.h > 0 or cfg.pac_mdp_eps is not None):
            # re-estimated from this planning phase's values; a flat value
            # surface (every pair capped at r_max) yields L = 0
            self.lipschitz = estimate_L(result.visited_states, result.visited_values)
        return result

    def begin_episode(self) -> None:
        self._since_plan = self.config.plan_every

    def act(self, state) -> int:
        if self.plan_result is None or self._since_plan >= self.config.plan_every:
            self.plan()
        self._since_plan += 1
        if self.config.explore_eps > 0 and self.rng.random() < self.config.explore_eps:
            return int(self.rng.integers(self.num_actions))
        return greedy_action(self.grid, self.model_step, state, self.num_actions, self.config.gamma)

    def observe(self, state, action, next_state, reward) -> None:
        self.model.observe(state, action, next_state)
