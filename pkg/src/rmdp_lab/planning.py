"""Fitted value iteration on a grid of Gaussian radial basis functions."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

RIDGE = 1e-6
DIVERGENCE_FACTOR = 10.0

# model_step(states (N, d), action) -> (next_states (N, d), rewards (N,), done (N,))
ModelStep = Callable[[np.ndarray, int], tuple[np.ndarray, np.ndarray, np.ndarray]]


class PlanningError(RuntimeError):
    """Raised when fitted value iteration diverges."""


@dataclass(frozen=True, eq=False)
class RbfGrid:
    """Gaussian RBFs centred on the Cartesian product of ``axes``.

    ``weights`` has one entry per centre, shaped like the grid.  The
    basis is separable, which the batch evaluator exploits.
    """

    axes: tuple[np.ndarray, ...]
    bandwidth: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        bw = np.asarray(self.bandwidth, dtype=float).reshape(-1)
        if not axes or any(a.ndim != 1 or a.size < 1 for a in axes):
            raise ValueError("need at least one non-empty axis")
        if bw.shape != (len(axes),) or np.any(bw <= 0):
            raise ValueError("bandwidth must be positive, one per axis")
        w = np.asarray(self.weights, dtype=float).reshape(tuple(a.size for a in axes))
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "bandwidth", bw)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, low: Sequence[float], high: Sequence[float], counts: Sequence[int]) -> "RbfGrid":
        """Evenly spaced centres with bandwidth equal to the spacing."""
        axes = tuple(np.linspace(lo, hi, n) for lo, hi, n in zip(low, high, counts))
        bw = np.array([(hi - lo) / (n - 1) if n > 1 else max(hi - lo, 1.0) for lo, hi, n in zip(low, high, counts)])
        return cls(axes, bw, np.zeros(tuple(counts)))

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def centers(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def kernels(self, states) -> list[np.ndarray]:
        """Per-axis kernel matrices, ``K_d[n, k] = exp(-((s_nd - c_kd)/bw_d)^2)``."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return [np.exp(-(((states[:, d, None] - ax[None, :]) / self.bandwidth[d]) ** 2))
                for d, ax in enumerate(self.axes)]

    def kernels_at_centers(self) -> list[np.ndarray]:
        """Per-axis kernel matrices between the centres of each axis."""
        return [np.exp(-(((ax[:, None] - ax[None, :]) / self.bandwidth[d]) ** 2)) for d, ax in enumerate(self.axes)]

    def evaluate(self, states) -> np.ndarray:
        return contract(self.weights, self.kernels(states))

    def with_weights(self, weights) -> "RbfGrid":
        return replace(self, weights=np.asarray(weights, dtype=float))


def contract(weights: np.ndarray, kernels: list[np.ndarray]) -> np.ndarray:
    """``sum_k W[k] prod_d K_d[n, k_d]`` for every row ``n``."""
    out = np.tensordot(kernels[0], weights, axes=(1, 0))
    for k in kernels[1:]:
        out = np.einsum("nj...,nj->n...", out, k)
    return out


def separable_apply(weights: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
    """``contract`` for a tensor grid of evaluation points: applies the
    per-axis matrix ``mats[d]`` along axis ``d`` of ``weights``."""
    out = weights
    for d, m in enumerate(mats):
        out = np.moveaxis(np.tensordot(m, np.moveaxis(out, d, 0), axes=(1, 0)), 0, d)
    return out


def rbf_eval(grid: RbfGrid, s) -> float:
    """Unnormalised RBF sum at a single state."""
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.shape != (grid.dims,) or not np.all(np.isfinite(s)):
        raise ValueError(f"state must be a finite vector of length {grid.dims}")
    c = grid.centers
    phi = np.exp(-np.sum(((s[None, :] - c) / grid.bandwidth[None, :]) ** 2, axis=1))
    return float(phi @ grid.weights.reshape(-1))


class _RidgeSolver:
    """Solves ``(K^T K + ridge I) w = K^T y`` for the separable kernel
    matrix ``K`` of the grid evaluated at its own centres."""

    def __init__(self, grid: RbfGrid, ridge: float):
        self.vecs, self.vals = [], []
        for k in grid.kernels_at_centers():
            lam, u = np.linalg.eigh(k)
            self.vals.append(lam)
            self.vecs.append(u)
        lam = self.vals[0]
        for extra in self.vals[1:]:
            lam = np.multiply.outer(lam, extra)
        self.filter = lam / (lam * lam + ridge)

    def solve(self, targets: np.ndarray) -> np.ndarray:
        coef = separable_apply(targets, [u.T for u in self.vecs]) * self.filter
        return separable_apply(coef, self.vecs)


@dataclass
class PlanResult:
    grid: RbfGrid
    sweeps: int
    max_change: float
    # values at the centres and the successor states, for the L estimate
    visited_states: np.ndarray
    visited_values: np.ndarray


def fitted_value_iteration(model_step: ModelStep, grid: RbfGrid, gamma: float, actions: int,
                           sweeps: int = 60, tol: float = 1e-3, ridge: float = RIDGE,
                           optimistic_value: np.ndarray | None = None) -> PlanResult:
    """Fitted value iteration with the model held fixed.

    Targets at every centre are ``max_a r(c, a) + gamma (1 - done) V(s'(c, a))``,
    clipped to the value range the rewards allow; the weights are refitted
    by ridge regression after each sweep.  The
    initial weights of ``grid`` warm-start the iteration.
    ``optimistic_value``, shaped ``(actions, centres)``, overrides the
    target of selected pairs where it is not NaN.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if actions < 1 or sweeps < 1:
        raise ValueError("need at least one action and one sweep")
    centers = grid.centers
    shape = grid.weights.shape
    nexts, rewards, dones = [], [], []
    for a in range(actions):
        s2, r, done = model_step(centers, a)
        nexts.append(np.asarray(s2, dtype=float))
        rewards.append(np.asarray(r, dtype=float))
        dones.append(np.asarray(done, dtype=bool))
    # successors of every action stacked, so one contraction serves a sweep
    kernels = grid.kernels(np.concatenate(nexts))
    rewards = np.array(rewards)
    cont = gamma * ~np.array(dones)
    # value range of the model: terminal value 0, per-step rewards in [r_lo, r_hi]
    r_lo, r_hi = min(float(rewards.min()), 0.0), max(float(rewards.max()), 0.0)
    if optimistic_value is not None:
        fixed = ~np.isnan(optimistic_value)
        if np.any(fixed):
            r_lo = min(r_lo, float(optimistic_value[fixed].min()) * (1.0 - gamma))
            r_hi = max(r_hi, float(optimistic_value[fixed].max()) * (1.0 - gamma))
    v_lo, v_hi = r_lo / (1.0 - gamma), r_hi / (1.0 - gamma)
    limit = DIVERGENCE_FACTOR * max(abs(v_lo), abs(v_hi))
    solver = _RidgeSolver(grid, ridge)
    own = grid.kernels_at_centers()
    weights = grid.weights
    prev = None
    change = np.inf
    done_sweeps = 0
    for done_sweeps in range(1, sweeps + 1):
        q = rewards + cont * contract(weights, kernels).reshape(actions, -1)
        if optimistic_value is not None:
            q = np.where(fixed, optimistic_value, q)
        # clipping keeps interpolation overshoot from compounding through the max
        targets = np.clip(q.max(axis=0), v_lo, v_hi)
        change = np.inf if prev is None else float(np.max(np.abs(targets - prev)))
        prev = targets
        weights = solver.solve(targets.reshape(shape))
        fitted = separable_apply(weights, own)
        if np.max(np.abs(fitted)) > limit + 1e-9:
            raise PlanningError(f"fitted values reached {np.max(np.abs(fitted)):.3g}, above the bound {limit:.3g}")
        if change <= tol:
            break
    out = grid.with_weights(weights)
    visited = np.concatenate([centers] + nexts)
    values = out.evaluate(visited)
    return PlanResult(out, done_sweeps, change, visited, values)


def greedy_action(value: RbfGrid, model_step: ModelStep, s, actions: int, gamma: float) -> int:
    """``argmax_a r(s, a) + gamma V(s'(s, a))``, lowest index on ties."""
    s = np.atleast_2d(np.asarray(s, dtype=float))
    steps = [model_step(s, a) for a in range(actions)]
    nexts = np.concatenate([st[0][:1] for st in steps])
    rewards = np.array([float(st[1][0]) for st in steps])
    cont = np.array([0.0 if bool(st[2][0]) else gamma for st in steps])
    q = rewards + cont * value.evaluate(nexts)
    # argmax returns the first maximiser, i.e. the lowest action index
    return int(np.argmax(q))
