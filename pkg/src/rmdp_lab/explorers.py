"""Discrete explorers: PAC-RMDP(h) and the comparison baselines.

All internal value functions are fixed points of an optimistic Bellman
backup solved by synchronous sweeps to a sup-norm tolerance.  Agents
replan from scratch at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mdp import MAX_SWEEPS, stopping_threshold


class TransitionCounts:
    """Sufficient statistics ``n(s, a, s')`` of observed transitions."""

    def __init__(self, n_sas):
        n_sas = np.array(n_sas, dtype=float)
        if n_sas.ndim != 3 or n_sas.shape[0] != n_sas.shape[2]:
            raise ValueError(f"counts must have shape (S, A, S), got {n_sas.shape}")
        if np.any(n_sas < 0):
            raise ValueError("counts must be non-negative")
        self.n_sas = n_sas

    @classmethod
    def zeros(cls, num_states: int, num_actions: int) -> "TransitionCounts":
        return cls(np.zeros((num_states, num_actions, num_states)))

    @property
    def shape(self):
        return self.n_sas.shape

    @property
    def n_sa(self) -> np.ndarray:
        return self.n_sas.sum(axis=2)

    def add(self, s: int, a: int, s2: int) -> None:
        n_s, n_a, _ = self.n_sas.shape
        if not (0 <= s < n_s and 0 <= a < n_a and 0 <= s2 < n_s):
            raise IndexError(f"transition ({s}, {a}, {s2}) out of range for {self.n_sas.shape}")
        self.n_sas[s, a, s2] += 1

    def sample_mean(self) -> tuple[np.ndarray, np.ndarray]:
        """Sample-mean model with the uniform distribution for unvisited
        pairs.  Returns ``(p_hat, unvisited_mask)``."""
        n_sa = self.n_sa
        unvisited = n_sa == 0
        p_hat = self.n_sas / np.where(unvisited, 1.0, n_sa)[:, :, None]
        p_hat[unvisited] = 1.0 / self.n_sas.shape[2]
        return p_hat, unvisited

    def copy(self) -> "TransitionCounts":
        return TransitionCounts(self.n_sas.copy())


class DirichletModel:
    """Independent Dirichlet belief per (s, a): prior pseudo-counts plus
    observed counts."""

    def __init__(self, prior, counts=None):
        prior = np.array(prior, dtype=float)
        if prior.ndim != 3 or prior.shape[0] != prior.shape[2]:
            raise ValueError(f"prior must have shape (S, A, S), got {prior.shape}")
        if np.any(prior < 0):
            raise ValueError("Dirichlet pseudo-counts must be non-negative")
        self.prior = prior
        self.counts = TransitionCounts.zeros(prior.shape[0], prior.shape[1]) if counts is None else counts

    @classmethod
    def symmetric(cls, num_states: int, num_actions: int, alpha0: float | None = None) -> "DirichletModel":
        """``alpha0`` per successor; default 1/|S| (one pseudo-observation per pair)."""
        if alpha0 is None:
            alpha0 = 1.0 / num_states
        return cls(np.full((num_states, num_actions, num_states), float(alpha0)))

    @property
    def alpha(self) -> np.ndarray:
        return self.prior + self.counts.n_sas

    @property
    def n_obs(self) -> np.ndarray:
        return self.counts.n_sa

    def mean(self) -> np.ndarray:
        alpha = self.alpha
        total = alpha.sum(axis=2, keepdims=True)
        n_s = alpha.shape[2]
        return np.where(total > 0, alpha / np.where(total > 0, total, 1.0), 1.0 / n_s)

    def variance_sum(self) -> np.ndarray:
        """Sum over successors of the marginal posterior variances,
        ``(1 - sum_s' mean^2) / (alpha_0 + 1)``."""
        alpha = self.alpha
        total = alpha.sum(axis=2)
        mean = self.mean()
        return (1.0 - (mean ** 2).sum(axis=2)) / (total + 1.0)

    def add(self, s: int, a: int, s2: int) -> None:
        self.counts.add(s, a, s2)


def _n_sas(counts) -> np.ndarray:
    if isinstance(counts, TransitionCounts):
        return counts.n_sas
    return np.asarray(counts, dtype=float)


def _check_reward(reward: np.ndarray, shape) -> np.ndarray:
    reward = np.asarray(reward, dtype=float)
    if reward.shape != tuple(shape):
        raise ValueError(f"reward shape {reward.shape} does not match {tuple(shape)}")
    return reward


def _counts_solve(counts, extra, bonus, reward, gamma, tol):
    thresh = stopping_threshold(tol, gamma)
    v, q, _ = _kernels.counts_fixed_point(
        np.ascontiguousarray(counts, dtype=float),
        np.ascontiguousarray(extra, dtype=float),
        np.ascontiguousarray(bonus, dtype=float),
        np.ascontiguousarray(reward, dtype=float),
        float(gamma), thresh, MAX_SWEEPS,
    )
    return v, q


def _rmdp_solve(counts, reward, gamma, h, tol):
    n_sas = _n_sas(counts)
    reward = _check_reward(reward, n_sas.shape)
    h = np.broadcast_to(np.asarray(h, dtype=float), n_sas.shape[:2])
    if np.any(h < 0) or np.any(np.isnan(h)):
        raise ValueError("h must be non-negative")
    return _counts_solve(n_sas, h, np.zeros(h.shape), reward, gamma, tol)


def rmdp_internal_values(counts, reward, gamma: float, h, tol: float = 0.01) -> np.ndarray:
    """Internal value of PAC-RMDP(h) with the sample-mean learner.

    Every one of the ``h`` imagined future samples lands on the successor
    with the best backed-up value, so the backup mixes the sample mean
    (weight ``n/(n+h)``) with the best successor (weight ``h/(n+h)``).
    ``h`` may be a scalar or a per-pair array and may be ``inf``.  Pairs
    with ``n(s,a) = h = 0`` get the fully optimistic backup.
    """
    return _rmdp_solve(counts, reward, gamma, h, tol)[0]


def solve_l1_optimistic(p_hat, values, radius: float) -> np.ndarray:
    """Maximise ``P . values`` over the simplex within L1 distance
    ``radius`` of ``p_hat`` (radius clamped to 2)."""
    p_hat = np.ascontiguousarray(p_hat, dtype=float)
    values = np.ascontiguousarray(values, dtype=float)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    out = np.empty_like(p_hat)
    _kernels.l1_optimistic(p_hat, values, float(radius), out)
    return out


def mbie_default_m(eps: float, delta: float, gamma: float, num_states: int, num_actions: int) -> int:
    """Known-state threshold ``m`` with unit constants, rounded up to a
    whole number of samples (at least one)."""
    scale = 1.0 / (eps ** 2 * (1.0 - gamma) ** 4)
    m = scale * num_states + scale * math.log(num_states * num_actions / (eps * (1.0 - gamma) * delta))
    return max(1, math.ceil(m))


def mbie_radius(n, num_states: int, num_actions: int, m: float, delta: float):
    """``z = 2 sqrt(2 [ln(2^|S| - 2) - ln(delta / (2 |S||A| m))] / n)``; inf for n = 0."""
    log_term = math.log(2.0 ** num_states - 2.0) - math.log(delta / (2.0 * num_states * num_actions * m))
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore"):
        z = 2.0 * np.sqrt(2.0 * max(log_term, 0.0) / n)
    z = np.where(n > 0, z, np.inf)
    return float(z) if z.ndim == 0 else z


def mbie_equivalent_h(n, num_states: int, num_actions: int, m: float, delta: float):
    """PAC-RMDP horizon matching MBIE's radius, ``n z / (1 - z)``;
    ``inf`` (fully optimistic) when ``z >= 1``."""
    z = np.asarray(mbie_radius(n, num_states, num_actions, m, delta))
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(z < 1.0, n * z / (1.0 - z), np.inf)
    return float(h) if h.ndim == 0 else h


def _mbie_solve(counts, reward, gamma, delta, m, tol):
    n_sas = _n_sas(counts)
    reward = _check_reward(reward, n_sas.shape)
    n_s, n_a, _ = n_sas.shape
    tc = TransitionCounts(n_sas)
    p_hat, _ = tc.sample_mean()
    z = mbie_radius(tc.n_sa, n_s, n_a, m, delta)
    radius = np.minimum(z, 2.0)
    thresh = stopping_threshold(tol, gamma)
    v, q, _ = _kernels.l1_fixed_point(
        np.ascontiguousarray(p_hat), np.ascontiguousarray(radius, dtype=float),
        np.ascontiguousarray(reward), float(gamma), thresh, MAX_SWEEPS,
    )
    return v, q


def mbie_internal_values(counts, reward, gamma: float, delta: float, m: float, tol: float = 0.01) -> np.ndarray:
    return _mbie_solve(counts, reward, gamma, delta, m, tol)[0]


def _bolt_solve(belief: DirichletModel, reward, gamma, eta, tol):
    return _rmdp_solve(belief.alpha, reward, gamma, eta, tol)


def bolt_internal_values(belief: DirichletModel, reward, gamma: float, eta: float, tol: float = 0.01) -> np.ndarray:
    """PAC-RMDP backup over Dirichlet pseudo-counts with ``eta`` imagined
    transitions; the same code path as :func:`rmdp_internal_values`."""
    return _bolt_solve(belief, reward, gamma, eta, tol)[0]


def beb_bonus(belief: DirichletModel, beta: float) -> np.ndarray:
    return beta / (1.0 + belief.n_obs)


def _beb_solve(belief: DirichletModel, reward, gamma, beta, tol):
    alpha = belief.alpha
    reward = _check_reward(reward, alpha.shape)
    bonus = beb_bonus(belief, beta)
    return _counts_solve(alpha, np.zeros(bonus.shape), bonus, reward, gamma, tol)


def beb_internal_values(belief: DirichletModel, reward, gamma: float, beta: float, tol: float = 0.01) -> np.ndarray:
    """Dirichlet-mean planning plus the ``beta / (1 + n(s,a))`` bonus."""
    return _beb_solve(belief, reward, gamma, beta, tol)[0]


def vbe_bonus(belief: DirichletModel, gamma: float, delta: float, r_max: float = 1.0) -> np.ndarray:
    """Variance bonus ``gamma r_max / (1 - gamma)^2 * sqrt(|S| sum_s' Var[P(s'|s,a)] / delta)``.

    Chebyshev on the squared L2 error of the posterior mean bounds the L1
    model error by ``sqrt(|S| sum Var / delta)`` with probability at least
    ``1 - delta``; the bonus is the value error that model error can cause.
    """
    n_s = belief.alpha.shape[2]
    return gamma * r_max / (1.0 - gamma) ** 2 * np.sqrt(n_s * belief.variance_sum() / delta)


def _vbe_solve(belief: DirichletModel, reward, gamma, delta, tol):
    alpha = belief.alpha
    reward = _check_reward(reward, alpha.shape)
    bonus = vbe_bonus(belief, gamma, delta)
    return _counts_solve(alpha, np.zeros(bonus.shape), bonus, reward, gamma, tol)


def vbe_internal_values(belief: DirichletModel, reward, gamma: float, delta: float, tol: float = 0.01) -> np.ndarray:
    return _vbe_solve(belief, reward, gamma, delta, tol)[0]


# --- configurations ---------------------------------------------------------


@dataclass(frozen=True)
class PacRmdp:
    h: float

    def validate(self):
        if not self.h >= 0:
            raise ValueError(f"PAC-RMDP h must be >= 0, got {self.h}")

    @property
    def label(self):
        return f"PAC-RMDP({_fmt(self.h)})"


@dataclass(frozen=True)
class Mbie:
    eps: float
    delta: float
    m: float | None = None

    def validate(self):
        if not self.eps > 0:
            raise ValueError("MBIE eps must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("MBIE delta must lie in (0, 1)")
        if self.m is not None and not self.m > 0:
            raise ValueError("MBIE m must be positive")

    @property
    def label(self):
        return f"MBIE({_fmt(self.eps)}, {_fmt(self.delta)})"


@dataclass(frozen=True)
class Vbe:
    delta: float

    def validate(self):
        if not self.delta > 0:
            raise ValueError("VBE delta must be positive")

    @property
    def label(self):
        return f"VBE({_fmt(self.delta)})"


@dataclass(frozen=True)
class Beb:
    beta: float

    def validate(self):
        if not self.beta > 0:
            raise ValueError("BEB beta must be positive")

    @property
    def label(self):
        return f"BEB({_fmt(self.beta)})"


@dataclass(frozen=True)
class Bolt:
    eta: float

    def validate(self):
        if not self.eta >= 0:
            raise ValueError("BOLT eta must be non-negative")

    @property
    def label(self):
        return f"BOLT({_fmt(self.eta)})"


@dataclass(frozen=True)
class EpsGreedy:
    eps: float = 0.1

    def validate(self):
        if not 0 <= self.eps <= 1:
            raise ValueError("epsilon must lie in [0, 1]")

    @property
    def label(self):
        return f"eps-greedy({_fmt(self.eps)})"


ExplorerConfig = PacRmdp | Mbie | Vbe | Beb | Bolt | EpsGreedy


def _fmt(x) -> str:
    return f"{x:g}"


# --- agents -----------------------------------------------------------------


class DiscreteAgent:
    """act/observe contract over a discrete environment.

    ``act`` replans from scratch and returns the greedy action of the
    internal Q-values (lowest index on ties).  After ``act`` the fields
    ``values`` and ``q`` hold the internal value function used.
    """

    def __init__(self, reward: np.ndarray, gamma: float, tol: float = 0.01, rng=None):
        self.reward = np.ascontiguousarray(reward, dtype=float)
        self.gamma = float(gamma)
        self.tol = float(tol)
        self.rng = rng
        n_s, n_a, _ = self.reward.shape
        self.num_states, self.num_actions = n_s, n_a
        self.counts = TransitionCounts.zeros(n_s, n_a)
        self.values = None
        self.q = None

    def _solve(self):
        raise NotImplementedError

    def plan(self):
        self.values, self.q = self._solve()
        return self.values

    def policy(self) -> np.ndarray:
        if self.q is None:
            self.plan()
        return np.argmax(self.q, axis=1).astype(np.int64)

    def act(self, state: int) -> int:
        if not 0 <= state < self.num_states:
            raise IndexError(f"state {state} out of range")
        self.plan()
        return int(np.argmax(self.q[state]))

    def observe(self, s: int, a: int, s2: int, r: float | None = None) -> None:
        self.counts.add(s, a, s2)


class PacRmdpAgent(DiscreteAgent):
    def __init__(self, reward, gamma, h, tol=0.01, rng=None):
        super().__init__(reward, gamma, tol, rng)
        self.h = h

    def _solve(self):
        return _rmdp_solve(self.counts, self.reward, self.gamma, self.h, self.tol)


class MbieAgent(DiscreteAgent):
    def __init__(self, reward, gamma, delta, m, tol=0.01, rng=None):
        super().__init__(reward, gamma, tol, rng)
        self.delta, self.m = delta, m

    def _solve(self):
        return _mbie_solve(self.counts, self.reward, self.gamma, self.delta, self.m, self.tol)


class _DirichletAgent(DiscreteAgent):
    def __init__(self, reward, gamma, tol=0.01, rng=None, alpha0=None):
        super().__init__(reward, gamma, tol, rng)
        self.belief = DirichletModel.symmetric(self.num_states, self.num_actions, alpha0)
        self.belief.counts = self.counts


VBE_ALPHA0 = 1.0


class VbeAgent(_DirichletAgent):
    """Mean-model planner with a posterior-variance bonus.  Uses a flat
    Dirichlet prior (one pseudo-count per successor) unless told otherwise."""

    def __init__(self, reward, gamma, delta, tol=0.01, rng=None, alpha0=None):
        super().__init__(reward, gamma, tol, rng, VBE_ALPHA0 if alpha0 is None else alpha0)
        self.delta = delta

    def _solve(self):
        return _vbe_solve(self.belief, self.reward, self.gamma, self.delta, self.tol)


class BebAgent(_DirichletAgent):
    def __init__(self, reward, gamma, beta, tol=0.01, rng=None, alpha0=None):
        super().__init__(reward, gamma, tol, rng, alpha0)
        self.beta = beta

    def _solve(self):
        return _beb_solve(self.belief, self.reward, self.gamma, self.beta, self.tol)


class BoltAgent(_DirichletAgent):
    def __init__(self, reward, gamma, eta, tol=0.01, rng=None, alpha0=None):
        super().__init__(reward, gamma, tol, rng, alpha0)
        self.eta = eta

    def _solve(self):
        return _bolt_solve(self.belief, self.reward, self.gamma, self.eta, self.tol)


class EpsGreedyAgent(DiscreteAgent):
    """Certainty-equivalent planning on the sample-mean model (uniform for
    unvisited pairs) with uniformly random actions at rate ``eps``."""

    def __init__(self, reward, gamma, eps=0.1, tol=0.01, rng=None):
        super().__init__(reward, gamma, tol, rng)
        if eps > 0 and rng is None:
            raise ValueError("epsilon-greedy needs a random generator")
        self.eps = eps

    def _solve(self):
        p_hat, _ = self.counts.sample_mean()
        n = p_hat.shape[:2]
        return _counts_solve(p_hat, np.zeros(n), np.zeros(n), self.reward, self.gamma, self.tol)

    def act(self, state: int) -> int:
        greedy = super().act(state)
        if self.eps > 0 and self.rng.random() < self.eps:
            return int(self.rng.integers(self.num_actions))
        return greedy


def make_agent(config: ExplorerConfig, reward, gamma: float, tol: float = 0.01,
               rng: np.random.Generator | None = None, alpha0: float | None = None) -> DiscreteAgent:
    if not isinstance(config, (PacRmdp, Mbie, Vbe, Beb, Bolt, EpsGreedy)):
        raise TypeError(f"unknown explorer config {config!r}")
    config.validate()
    reward = np.asarray(reward, dtype=float)
    n_s, n_a, _ = reward.shape
    if isinstance(config, PacRmdp):
        return PacRmdpAgent(reward, gamma, config.h, tol, rng)
    if isinstance(config, Mbie):
        m = config.m if config.m is not None else mbie_default_m(config.eps, config.delta, gamma, n_s, n_a)
        return MbieAgent(reward, gamma, config.delta, m, tol, rng)
    if isinstance(config, Vbe):
        return VbeAgent(reward, gamma, config.delta, tol, rng, alpha0)
    if isinstance(config, Beb):
        return BebAgent(reward, gamma, config.beta, tol, rng, alpha0)
    if isinstance(config, Bolt):
        return BoltAgent(reward, gamma, config.eta, tol, rng, alpha0)
    return EpsGreedyAgent(reward, gamma, config.eps, tol, rng)
