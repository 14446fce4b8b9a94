"""Linearly parameterised dynamics: least-squares fitting, h-reachable
model intervals and the optimistic reward bonus built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .linalg import EigSplit, eig_split


@dataclass(frozen=True)
class FeatureMap:
    """Per-component basis functions ``Phi_i(s, a)``.

    Each entry of ``functions`` maps a batch ``(states (N, n_S), actions
    (N,))`` to an ``(N, dims[i])`` array.  ``components`` lists which
    state coordinates the maps predict.
    """

    functions: tuple[Callable[[np.ndarray, np.ndarray], np.ndarray], ...]
    dims: tuple[int, ...]
    components: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.functions) == len(self.dims) == len(self.components)):
            raise ValueError("functions, dims and components must have equal length")
        if any(d < 1 for d in self.dims):
            raise ValueError("feature dimensions must be positive")

    @property
    def num_components(self) -> int:
        return len(self.functions)

    def batch(self, i: int, states, actions) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.broadcast_to(np.asarray(actions, dtype=np.int64), (states.shape[0],))
        out = np.asarray(self.functions[i](states, actions), dtype=float)
        if out.shape != (states.shape[0], self.dims[i]):
            raise ValueError(f"component {i} features have shape {out.shape}, expected {(states.shape[0], self.dims[i])}")
        if not np.all(np.isfinite(out)):
            raise ValueError(f"component {i} produced non-finite features")
        return out

    def __call__(self, state, action) -> list[np.ndarray]:
        return [self.batch(i, state, action)[0] for i in range(self.num_components)]


class ComponentModel:
    """Least-squares model of one state coordinate, ``y = theta^T phi``."""

    def __init__(self, dim: int, sigma: float, delta_bound: float | None = None, eigensolver: str = "lapack"):
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        if delta_bound is not None and delta_bound < 0:
            raise ValueError("delta_bound must be non-negative")
        self.dim = dim
        self.sigma = float(sigma)
        self.fixed_delta = delta_bound
        self.eigensolver = eigensolver
        self.gram = np.zeros((dim, dim))
        self.xty = np.zeros(dim)
        self.data_count = 0
        self.residual_sum = 0.0
        self._theta = np.zeros(dim)
        self._split: EigSplit | None = None
        self._stale = False

    def add(self, phi, y) -> None:
        """Accumulate rows ``phi`` (N, dim) with targets ``y`` (N,)."""
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if phi.shape[1] != self.dim or phi.shape[0] != y.shape[0]:
            raise ValueError(f"batch shapes {phi.shape}, {y.shape} do not match dimension {self.dim}")
        if self.fixed_delta is None:
            # residuals against the fit before this batch is absorbed
            self.residual_sum += float(np.abs(phi @ self.theta - y).sum())
        self.gram += phi.T @ phi
        self.xty += phi.T @ y
        self.data_count += len(y)
        self._stale = True

    def _refresh(self) -> None:
        if not self._stale and self._split is not None:
            return
        split = eig_split(self.gram, self.eigensolver)
        self._theta = split.z @ self.xty
        self._split = split
        self._stale = False

    @property
    def theta(self) -> np.ndarray:
        self._refresh()
        return self._theta

    @property
    def split(self) -> EigSplit:
        self._refresh()
        return self._split

    @property
    def delta_bound(self) -> float:
        if self.fixed_delta is not None:
            return float(self.fixed_delta)
        return self.residual_sum / self.data_count if self.data_count else 0.0

    def predict(self, phi) -> np.ndarray:
        return np.asarray(phi, dtype=float) @ self.theta


class LinearModel:
    """One :class:`ComponentModel` per predicted coordinate plus the count
    ``M`` of interval evaluations."""

    def __init__(self, features: FeatureMap, sigma: Sequence[float], delta_bound: Sequence[float | None] | None = None,
                 eigensolver: str = "lapack"):
        n = features.num_components
        if len(sigma) != n:
            raise ValueError(f"need {n} noise levels, got {len(sigma)}")
        if delta_bound is None:
            delta_bound = [None] * n
        self.features = features
        self.parts = [ComponentModel(d, s, b, eigensolver) for d, s, b in zip(features.dims, sigma, delta_bound)]
        self.call_count = 1

    @property
    def num_components(self) -> int:
        return len(self.parts)

    def observe(self, state, action, next_state) -> None:
        next_state = np.asarray(next_state, dtype=float)
        for i, part in enumerate(self.parts):
            phi = self.features.batch(i, state, action)
            part.add(phi, next_state[self.features.components[i]])

    def predict(self, states, actions) -> np.ndarray:
        """Mean prediction of every component, shape (N, n_components)."""
        cols = [part.predict(self.features.batch(i, states, actions)) for i, part in enumerate(self.parts)]
        return np.stack(cols, axis=1)

    def intervals(self, states, actions, h: float, delta: float) -> np.ndarray:
        """``I_h`` per component at a batch of inputs, shape (N, n_components).
        Does not advance ``call_count``."""
        out = []
        for i, part in enumerate(self.parts):
            phi = self.features.batch(i, states, actions)
            vs = varsigma(self.call_count, self.num_components, h, delta)
            out.append(interval_Ih(phi, part.split, h, part.delta_bound, part.sigma, vs))
        return np.stack(out, axis=1)

    def count_call(self) -> None:
        self.call_count += 1

    def snapshot(self, h: float, delta: float) -> "ModelSnapshot":
        """Frozen copy of the current fit and interval ingredients."""
        vs = varsigma(self.call_count, self.num_components, h, delta) if h > 0 else 0.0
        return ModelSnapshot(
            self.features,
            tuple(p.theta.copy() for p in self.parts),
            tuple(p.split for p in self.parts),
            tuple(h * (p.delta_bound + vs * p.sigma) for p in self.parts),
        )


@dataclass(frozen=True, eq=False)
class ModelSnapshot:
    """Immutable view of a :class:`LinearModel` at one point in time;
    ``scale[i]`` is ``h (Delta_i + varsigma sigma_i)``."""

    features: FeatureMap
    thetas: tuple[np.ndarray, ...]
    splits: tuple[EigSplit, ...]
    scale: tuple[float, ...]

    def predict(self, states, actions) -> np.ndarray:
        cols = [self.features.batch(i, states, actions) @ th for i, th in enumerate(self.thetas)]
        return np.stack(cols, axis=1)

    def intervals(self, states, actions) -> np.ndarray:
        cols = [interval_Ih(self.features.batch(i, states, actions), sp, 1.0, c, 0.0, 0.0)
                for i, (sp, c) in enumerate(zip(self.splits, self.scale))]
        return np.stack(cols, axis=1)


def fit_least_squares(model: ComponentModel, batch) -> ComponentModel:
    """Accumulate ``(phi, y)`` pairs into ``model`` and refit it."""
    batch = list(batch)
    if batch:
        phi = np.array([np.asarray(p, dtype=float) for p, _ in batch])
        y = np.array([float(t) for _, t in batch])
        model.add(phi, y)
    model.theta  # noqa: B018 - forces the refit
    return model


def varsigma(call_count: int, n_s: int, h: float, delta: float) -> float:
    """``sqrt(2 ln(pi^2 M^2 n_s h / (6 delta)))``, floored at zero."""
    if call_count < 1:
        raise ValueError("call_count must be at least 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    arg = math.pi ** 2 * call_count ** 2 * n_s * h / (6.0 * delta)
    if arg <= 1.0:
        return 0.0
    return math.sqrt(2.0 * math.log(arg))


def interval_Ih(phi, split: EigSplit, h: float, delta_bound: float, sigma: float, varsigma_val: float):
    """``h (Delta + varsigma sigma) (|phi^T g phi| + ||phi^T z|| ||w phi||)``.

    ``phi`` may be one feature vector or a batch of rows.
    """
    if h < 0:
        raise ValueError("h must be non-negative")
    phi = np.asarray(phi, dtype=float)
    single = phi.ndim == 1
    phi = np.atleast_2d(phi)
    quad = np.abs(np.sum((phi @ split.g) * phi, axis=1))
    cross = np.linalg.norm(phi @ split.z, axis=1) * np.linalg.norm(phi @ split.w, axis=1)
    out = h * (delta_bound + varsigma_val * sigma) * (quad + cross)
    return float(out[0]) if single else out


def bonus_reward(r, intervals, lipschitz: float):
    """``r + L ||I||``; ``intervals`` holds one entry per component on its
    last axis."""
    if lipschitz < 0:
        raise ValueError("L must be non-negative")
    return r + lipschitz * np.linalg.norm(np.asarray(intervals, dtype=float), axis=-1)


@njit(cache=True)
def _max_ratio(states, values):
    # compares squared ratios so the inner loop needs no sqrt or division
    n, d = states.shape
    best_num, best_den = -1.0, 1.0
    for i in range(n):
        for j in range(i + 1, n):
            dist2 = 0.0
            for k in range(d):
                diff = states[i, k] - states[j, k]
                dist2 += diff * diff
            if dist2 < 1e-18:
                continue
            dv = values[i] - values[j]
            if best_num < 0.0 or dv * dv * best_den > best_num * dist2:
                best_num, best_den = dv * dv, dist2
    if best_num < 0.0:
        return -1.0
    return np.sqrt(best_num / best_den)


def estimate_L(states, values, prior: float = 0.0) -> float:
    """``max |V(s) - V(s')| / ||s - s'||`` over all pairs, skipping pairs
    closer than 1e-9.  Returns ``prior`` when no valid pair exists."""
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    values = np.asarray(values, dtype=float)
    if len(states) != len(values):
        raise ValueError("states and values must have the same length")
    best = _max_ratio(np.ascontiguousarray(states), np.ascontiguousarray(values))
    return prior if best < 0 else float(best)


def estimate_delta(residuals, configured: float | None = None) -> float:
    """Mean absolute residual, or ``configured`` when one is given."""
    if configured is not None:
        return float(configured)
    residuals = np.abs(np.asarray(residuals, dtype=float))
    return float(residuals.mean()) if residuals.size else 0.0

