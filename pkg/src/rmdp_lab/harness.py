"""Declarative experiment runner: config parsing, seeded multi-run
execution, aggregation and CSV/SVG output."""

from __future__ import annotations

import csv
import json
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from .continuous import LinearAgentConfig, LinearRmdpAgent
from .envs import ChainSpec, DiscreteEnv, MountainCarEnv, MountainCarSpec, chain_mdp, modified_chain_mdp
from .explorers import Beb, Bolt, EpsGreedy, Mbie, PacRmdp, Vbe, _counts_solve, make_agent
from .mdp import TabularMDP, known_reward_model
from .reachability import anytime_error, explicit_exploration_runtime

DISCRETE_ENVIRONMENTS = {"chain": chain_mdp, "modified_chain": modified_chain_mdp}
CONTINUOUS_ENVIRONMENTS = ("mountain_car",)
DISCRETE_ALGORITHMS = {"pac_rmdp": PacRmdp, "mbie": Mbie, "vbe": Vbe, "beb": Beb, "bolt": Bolt, "eps_greedy": EpsGreedy}
CONTINUOUS_ALGORITHMS = ("pac_rmdp", "pac_mdp", "eps_greedy")

BASE_COLUMNS = ("algorithm", "run", "t", "reward", "cum_reward_per_step")
OPTIONAL_COLUMNS = ("anytime_error", "explore_gap", "steps", "goal")
SUMMARY_COLUMNS = ("algorithm", "runs", "at_step", "metric", "mean", "p10", "p90")
THREADS_ENV = "RMDP_LAB_THREADS"

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "rmdp_lab experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["environment", "algorithms", "runs", "horizon"],
    "properties": {
        "environment": {
            "type": "object",
            "additionalProperties": False,
            "required": ["id"],
            "properties": {
                "id": {"enum": sorted(DISCRETE_ENVIRONMENTS) + list(CONTINUOUS_ENVIRONMENTS)},
                "overrides": {"type": "object"},
            },
        },
        "algorithms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id"],
                "properties": {
                    "id": {"enum": sorted(set(DISCRETE_ALGORITHMS) | set(CONTINUOUS_ALGORITHMS))},
                    "params": {"type": "object"},
                },
            },
        },
        "runs": {"type": "integer", "minimum": 1},
        "horizon": {
            "oneOf": [
                {"type": "integer", "minimum": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["episodes"],
                    "properties": {
                        "episodes": {"type": "integer", "minimum": 1},
                        "steps": {"type": "integer", "minimum": 1},
                    },
                },
            ]
        },
        "gamma": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "base_seed": {"type": "integer", "minimum": 0},
        "record_every": {"type": "integer", "minimum": 1},
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "anytime_error_every": {"type": "integer", "minimum": 0},
                "anytime_h": {"type": ["integer", "null"], "minimum": 0},
                "exploration_eps": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "output_dir": {"type": ["string", "null"]},
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# --- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class AlgorithmSpec:
    id: str
    params: tuple[tuple[str, Any], ...] = ()

    @property
    def kwargs(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an environment, algorithm settings and run counts.

    ``horizon`` is a step count on the chains and an episode count on the
    mountain car (``episode_steps`` then caps each episode).
    """

    environment: str
    algorithms: tuple[AlgorithmSpec, ...]
    runs: int
    horizon: int
    env_overrides: tuple[tuple[str, Any], ...] = ()
    episode_steps: int | None = None
    gamma: float | None = None
    tol: float | None = None
    base_seed: int = 0
    record_every: int = 1
    anytime_error_every: int | None = None
    anytime_h: int | None = None
    exploration_eps: float | None = None
    output_dir: str | None = None

    @property
    def continuous(self) -> bool:
        return self.environment in CONTINUOUS_ENVIRONMENTS

    @property
    def effective_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return LinearAgentConfig.gamma if self.continuous else 0.95

    @property
    def effective_tol(self) -> float:
        if self.tol is not None:
            return self.tol
        return LinearAgentConfig.tol if self.continuous else 0.01

    @property
    def effective_anytime_every(self) -> int:
        if self.anytime_error_every is not None:
            return self.anytime_error_every
        return 0 if self.continuous else 50

    def validate(self) -> None:
        """Builds every environment and algorithm object once, so that bad
        parameters fail before any run starts."""
        if self.runs < 1 or self.horizon < 1 or self.record_every < 1:
            raise ConfigError("runs, horizon and record_every must be at least 1")
        if self.environment not in DISCRETE_ENVIRONMENTS and not self.continuous:
            raise ConfigError(f"unknown environment {self.environment!r}")
        if not 0.0 <= self.effective_gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if not self.effective_tol > 0:
            raise ConfigError("tol must be positive")
        if self.continuous:
            if self.effective_anytime_every or self.exploration_eps is not None:
                raise ConfigError("diagnostics are only available on the discrete environments")
            if self.episode_steps is not None and self.episode_steps < 1:
                raise ConfigError("episode steps must be positive")
        elif self.episode_steps is not None:
            raise ConfigError("the chain horizon is a plain step count")
        try:
            build_environment(self)
            for alg in self.algorithms:
                algorithm_label(self, alg)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a parsed JSON document against :data:`CONFIG_SCHEMA` and
    build the config.  Raises :class:`ConfigError`."""
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    horizon = doc["horizon"]
    episode_steps = None
    if isinstance(horizon, dict):
        episode_steps = horizon.get("steps")
        horizon = horizon["episodes"]
        if doc["environment"]["id"] not in CONTINUOUS_ENVIRONMENTS:
            raise ConfigError("horizon: episodes are only meaningful for the mountain car")
    diag = doc.get("diagnostics", {})
    cfg = ExperimentConfig(
        environment=doc["environment"]["id"],
        env_overrides=tuple(sorted(doc["environment"].get("overrides", {}).items())),
        algorithms=tuple(AlgorithmSpec(a["id"], tuple(sorted(a.get("params", {}).items()))) for a in doc["algorithms"]),
        runs=doc["runs"],
        horizon=horizon,
        episode_steps=episode_steps,
        gamma=doc.get("gamma"),
        tol=doc.get("tol"),
        base_seed=doc.get("base_seed", 0),
        record_every=doc.get("record_every", 1),
        anytime_error_every=diag.get("anytime_error_every"),
        anytime_h=diag.get("anytime_h"),
        exploration_eps=diag.get("exploration_eps"),
        output_dir=doc.get("output_dir"),
    )
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return config_from_dict(doc)


# --- building blocks ---------------------------------------------------------


def _tuplify(value):
    return tuple(value) if isinstance(value, list) else value


def build_environment(cfg: ExperimentConfig):
    """The TabularMDP of a chain, or the MountainCarSpec."""
    overrides = {k: _tuplify(v) for k, v in cfg.env_overrides}
    if cfg.continuous:
        if cfg.episode_steps is not None:
            overrides["episode_steps"] = cfg.episode_steps
        return MountainCarSpec(**overrides)
    return DISCRETE_ENVIRONMENTS[cfg.environment](ChainSpec(**overrides), cfg.effective_gamma)


def discrete_explorer(alg: AlgorithmSpec):
    if alg.id not in DISCRETE_ALGORITHMS:
        raise ConfigError(f"algorithm {alg.id!r} is not available on the chains")
    explorer = DISCRETE_ALGORITHMS[alg.id](**alg.kwargs)
    explorer.validate()
    return explorer


def linear_agent_config(cfg: ExperimentConfig, alg: AlgorithmSpec) -> LinearAgentConfig:
    """Maps ``pac_rmdp {h}``, ``pac_mdp {eps}`` and ``eps_greedy {eps}`` onto
    :class:`LinearAgentConfig`; any other parameter must name one of its
    fields."""
    params = alg.kwargs
    base: dict[str, Any] = {"gamma": cfg.effective_gamma, "tol": cfg.effective_tol}
    if alg.id == "pac_rmdp":
        pass
    elif alg.id == "pac_mdp":
        base["pac_mdp_eps"] = params.pop("eps", None)
        if base["pac_mdp_eps"] is None:
            raise ConfigError("pac_mdp needs eps")
    elif alg.id == "eps_greedy":
        base["h"] = 0.0
        base["explore_eps"] = params.pop("eps", 0.1)
    else:
        raise ConfigError(f"algorithm {alg.id!r} is not available on the mountain car")
    known = {f.name for f in fields(LinearAgentConfig)}
    unknown = sorted(set(params) - known)
    if unknown:
        raise ConfigError(f"unknown parameters for {alg.id}: {', '.join(unknown)}")
    base.update({k: _tuplify(v) for k, v in params.items()})
    out = LinearAgentConfig(**base)
    out.validate()
    return out


def algorithm_label(cfg: ExperimentConfig, alg: AlgorithmSpec) -> str:
    if not cfg.continuous:
        return discrete_explorer(alg).label
    lc = linear_agent_config(cfg, alg)
    if alg.id == "pac_mdp":
        return f"PAC-MDP({lc.pac_mdp_eps:g})"
    if alg.id == "eps_greedy":
        return f"eps-greedy({lc.explore_eps:g})"
    return f"PAC-RMDP({lc.h:g})"


def run_rngs(base_seed: int, run: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent environment and agent generators of run ``run``."""
    env_seq, agent_seq = np.random.SeedSequence(base_seed + run).spawn(2)
    return np.random.default_rng(env_seq), np.random.default_rng(agent_seq)


def quantize(values) -> np.ndarray:
    """Round to 9 significant digits, the precision of the CSV output, so
    that written records parse back to identical values."""
    arr = np.asarray(values, dtype=float)
    return np.array([float(f"{x:.9g}") for x in arr.reshape(-1)]).reshape(arr.shape)


def current_model_value(counts, reward, gamma: float, tol: float) -> np.ndarray:
    """Optimal value of the sample-mean model (uniform where unvisited)."""
    p_hat, _ = counts.sample_mean()
    n = p_hat.shape[:2]
    return _counts_solve(p_hat, np.zeros(n), np.zeros(n), reward, gamma, tol)[0]


# --- records -----------------------------------------------------------------


@dataclass(eq=False)
class RunRecord:
    """Trace of one (algorithm, run) pair at the recorded steps ``t``.

    ``reward`` is the reward collected since the previous recorded step
    (the per-step reward when every step is recorded; the episode total on
    the mountain car).  Optional series are ``None`` when not collected;
    ``anytime_error`` holds NaN at recorded steps where it was not
    evaluated.  ``runtime`` is the explicit exploration runtime, kept in
    memory only.
    """

    algorithm: str
    run: int
    t: np.ndarray
    reward: np.ndarray
    cum_reward_per_step: np.ndarray
    anytime_error: np.ndarray | None = None
    explore_gap: np.ndarray | None = None
    steps: np.ndarray | None = None
    goal: np.ndarray | None = None
    runtime: int | None = field(default=None, compare=False)

    def column(self, name: str) -> np.ndarray | None:
        if name not in BASE_COLUMNS[2:] + OPTIONAL_COLUMNS:
            raise ValueError(f"unknown column {name!r}")
        return getattr(self, name)

    def value_at(self, name: str, step: int) -> float:
        idx = np.searchsorted(self.t, step)
        if idx >= len(self.t) or self.t[idx] != step:
            raise ValueError(f"run {self.run} of {self.algorithm} has no record at step {step}")
        series = self.column(name)
        if series is None:
            raise ValueError(f"records carry no {name!r} column")
        return float(series[idx])

    def same_as(self, other: "RunRecord") -> bool:
        if (self.algorithm, self.run) != (other.algorithm, other.run):
            return False
        for name in ("t", "reward", "cum_reward_per_step") + OPTIONAL_COLUMNS:
            a, b = self.column(name), other.column(name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b, equal_nan=True):
                return False
        return True


def _recorded_steps(total: int, every: int) -> np.ndarray:
    t = np.arange(every, total + 1, every)
    if len(t) == 0 or t[-1] != total:
        t = np.append(t, total)
    return t


def _make_record(label, run, rewards, counts_per_row, every, extra) -> RunRecord:
    total = len(rewards)
    t = _recorded_steps(total, every)
    cum = np.cumsum(rewards)
    block = np.diff(np.concatenate([[0.0], cum[t - 1]]))
    steps_so_far = np.cumsum(counts_per_row)[t - 1]
    rec = RunRecord(label, run, t, quantize(block), quantize(cum[t - 1] / steps_so_far))
    for name, series in extra.items():
        if series is not None:
            setattr(rec, name, quantize(np.asarray(series, dtype=float)[t - 1]))
    return rec


def run_discrete(cfg: ExperimentConfig, alg_index: int, run: int) -> RunRecord:
    """One chain run.  Agents plan with the expected reward ``r(s, a)``;
    the environment pays the sampled reward."""
    alg = cfg.algorithms[alg_index]
    explorer = discrete_explorer(alg)
    mdp = build_environment(cfg)
    gamma, tol = cfg.effective_gamma, cfg.effective_tol
    reward = known_reward_model(mdp)
    env_rng, agent_rng = run_rngs(cfg.base_seed, run)
    env = DiscreteEnv(mdp, env_rng)
    agent = make_agent(explorer, reward, gamma, tol, agent_rng)
    model_mdp = TabularMDP(mdp.transition, reward, gamma)
    every = cfg.effective_anytime_every
    h_diag = cfg.anytime_h
    if h_diag is None:
        h_diag = int(explorer.h) if isinstance(explorer, PacRmdp) and float(explorer.h).is_integer() else 0
    horizon = cfg.horizon
    rewards = np.empty(horizon)
    errors = np.full(horizon, np.nan) if every else None
    gaps = np.empty(horizon) if cfg.exploration_eps is not None else None
    s = env.reset()
    for i in range(horizon):
        a = agent.act(s)
        if gaps is not None:
            gaps[i] = abs(agent.values[s] - current_model_value(agent.counts, reward, gamma, tol)[s])
        if every and (i + 1) % every == 0:
            errors[i] = anytime_error(model_mdp, agent.policy(), agent.counts, h_diag, s, tol)
        s2, r = env.step(a)
        agent.observe(s, a, s2, r)
        rewards[i] = r
        s = s2
    rec = _make_record(explorer.label, run, rewards, np.ones(horizon), cfg.record_every,
                       {"anytime_error": errors, "explore_gap": gaps})
    if gaps is not None:
        rec.runtime = explicit_exploration_runtime(gaps, cfg.exploration_eps)
    return rec


def run_continuous(cfg: ExperimentConfig, alg_index: int, run: int) -> RunRecord:
    """One mountain-car run; one record row per episode."""
    alg = cfg.algorithms[alg_index]
    spec = build_environment(cfg)
    env_rng, agent_rng = run_rngs(cfg.base_seed, run)
    env = MountainCarEnv(spec, env_rng)
    agent = LinearRmdpAgent(spec, linear_agent_config(cfg, alg), agent_rng)
    episodes = cfg.horizon
    totals, lengths, goals = np.empty(episodes), np.empty(episodes), np.empty(episodes)
    for ep in range(episodes):
        s = env.reset()
        agent.begin_episode()
        total = 0.0
        while True:
            a = agent.act(s)
            s2, r, done = env.step(a)
            agent.observe(s, a, s2, r)
            total += r
            s = s2
            if done:
                break
        totals[ep], lengths[ep], goals[ep] = total, env.steps, float(s[0] >= spec.goal_position)
    return _make_record(algorithm_label(cfg, alg), run, totals, lengths, cfg.record_every,
                        {"steps": lengths, "goal": goals})


def run_single(cfg: ExperimentConfig, alg_index: int, run: int) -> RunRecord:
    return (run_continuous if cfg.continuous else run_discrete)(cfg, alg_index, run)


# --- execution -----------------------------------------------------------------


@dataclass
class RunFailure:
    algorithm: str
    run: int
    message: str


@dataclass
class ExperimentResult:
    records: list[RunRecord]
    failures: list[RunFailure]


def _task(args):
    cfg, alg_index, run = args
    try:
        return alg_index, run, run_single(cfg, alg_index, run), None
    except Exception:  # noqa: BLE001 - isolate the failure to this run
        return alg_index, run, None, traceback.format_exc()


def resolve_workers(parallel: int | None) -> int:
    """Worker count: the environment override wins over ``parallel``."""
    env = os.environ.get(THREADS_ENV)
    if env is not None and env.strip():
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be at least 1")
        return value
    if parallel is None:
        return 1
    if parallel < 1:
        raise ConfigError("--parallel must be at least 1")
    return parallel


def run_experiment(cfg: ExperimentConfig, parallel: int | None = None) -> ExperimentResult:
    """Every (algorithm, run) pair, serially or in worker processes.
    Records come back ordered by algorithm then run index, whatever the
    completion order."""
    cfg.validate()
    workers = resolve_workers(parallel)
    tasks = [(cfg, a, r) for a in range(len(cfg.algorithms)) for r in range(cfg.runs)]
    if workers == 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    results.sort(key=lambda x: (x[0], x[1]))
    records, failures = [], []
    for alg_index, run, rec, err in results:
        if rec is not None:
            records.append(rec)
        else:
            label = algorithm_label(cfg, cfg.algorithms[alg_index])
            failures.append(RunFailure(label, run, err))
    return ExperimentResult(records, failures)


# --- aggregation ----------------------------------------------------------------


def nearest_rank(values, pct: int) -> float:
    """Nearest-rank percentile: the ``ceil(pct/100 * n)``-th smallest value."""
    xs = np.sort(np.asarray(values, dtype=float))
    if xs.size == 0:
        raise ValueError("no values")
    if not 0 < pct <= 100:
        raise ValueError("percentile must lie in (0, 100]")
    rank = -(-pct * xs.size // 100)
    return float(xs[rank - 1])


@dataclass
class AlgorithmSummary:
    algorithm: str
    runs: int
    at_step: int
    metric: str
    mean: float
    p10: float
    p90: float
    curve_t: np.ndarray
    curve_mean: np.ndarray


@dataclass
class SummaryStats:
    """Per-algorithm summaries in order of first appearance."""

    algorithms: list[AlgorithmSummary]

    def __getitem__(self, label: str) -> AlgorithmSummary:
        for s in self.algorithms:
            if s.algorithm == label:
                return s
        raise KeyError(label)

    def labels(self) -> list[str]:
        return [s.algorithm for s in self.algorithms]


def _exact_mean(values) -> float:
    return math.fsum(values) / len(values)


def aggregate(records: Sequence[RunRecord], at_step: int, metric: str = "cum_reward_per_step") -> SummaryStats:
    """Mean and nearest-rank 10th/90th percentiles of ``metric`` at
    ``at_step`` across runs, plus the mean curve over the recorded steps
    all runs share.  Exact summation makes the result independent of
    record order."""
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict[str, list[RunRecord]] = {}
    for rec in records:
        groups.setdefault(rec.algorithm, []).append(rec)
    out = []
    for label, recs in groups.items():
        vals = [rec.value_at(metric, at_step) for rec in recs]
        common = recs[0].t
        for rec in recs[1:]:
            common = np.intersect1d(common, rec.t)
        cols = np.array([rec.column(metric)[np.searchsorted(rec.t, common)] for rec in recs])
        curve = np.array([_exact_mean(cols[:, j]) for j in range(cols.shape[1])])
        out.append(AlgorithmSummary(label, len(recs), int(at_step), metric, _exact_mean(vals),
                                    nearest_rank(vals, 10), nearest_rank(vals, 90), common.copy(), curve))
    return SummaryStats(out)


# --- CSV ------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.9g}"


def _open_for_write(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_csv(data, path) -> None:
    """Write run records (a sequence of :class:`RunRecord`) or a
    :class:`SummaryStats` table.  LF line endings, 9 significant digits,
    empty cells for missing values."""
    if isinstance(data, SummaryStats):
        header = list(SUMMARY_COLUMNS)
        rows = [[s.algorithm, s.runs, s.at_step, s.metric, _fmt(s.mean), _fmt(s.p10), _fmt(s.p90)]
                for s in data.algorithms]
    else:
        records = list(data)
        extra = [c for c in OPTIONAL_COLUMNS if any(r.column(c) is not None for r in records)]
        header = list(BASE_COLUMNS) + extra
        rows = []
        for rec in records:
            series = [rec.column(c) for c in extra]
            for i, t in enumerate(rec.t):
                row = [rec.algorithm, rec.run, int(t), _fmt(rec.reward[i]), _fmt(rec.cum_reward_per_step[i])]
                row += ["" if s is None else _fmt(s[i]) for s in series]
                rows.append(row)
    try:
        with _open_for_write(path) as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_records(path) -> list[RunRecord]:
    """Parse a records CSV written by :func:`emit_csv`."""
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[: len(BASE_COLUMNS)]) != BASE_COLUMNS:
            raise ValueError(f"{path}: not a records file")
        extra = header[len(BASE_COLUMNS):]
        if any(c not in OPTIONAL_COLUMNS for c in extra):
            raise ValueError(f"{path}: unexpected columns {extra}")
        groups: dict[tuple[str, int], list[list[str]]] = {}
        for row in reader:
            groups.setdefault((row[0], int(row[1])), []).append(row)
    records = []
    for (label, run), rows in groups.items():
        def col(j):
            return np.array([float(r[j]) if r[j] != "" else np.nan for r in rows])

        rec = RunRecord(label, run, np.array([int(r[2]) for r in rows]), col(3), col(4))
        for k, name in enumerate(extra):
            values = col(len(BASE_COLUMNS) + k)
            if name in ("anytime_error",) or not np.all(np.isnan(values)):
                setattr(rec, name, values)
        records.append(rec)
    return records


# --- SVG ------------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000", "#aec7e8")
MAX_POINTS = 500


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def emit_svg_curves(curves: Sequence[tuple[str, Sequence[float], Sequence[float]]], path,
                    title: str = "", x_label: str = "t", y_label: str = "") -> None:
    """Static line chart: one polyline per ``(label, x, y)`` curve, a
    legend and tick-labelled axes.  Output depends only on the input."""
    width, height = 720, 440
    left, right, top, bottom = 70, 190, 40, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [np.asarray(c[1], dtype=float) for c in curves]
    ys = [np.asarray(c[2], dtype=float) for c in curves]
    finite_x = np.concatenate([x[np.isfinite(y)] for x, y in zip(xs, ys)]) if curves else np.zeros(0)
    finite_y = np.concatenate([y[np.isfinite(y)] for y in ys]) if curves else np.zeros(0)
    x_lo, x_hi = (float(finite_x.min()), float(finite_x.max())) if finite_x.size else (0.0, 1.0)
    y_lo, y_hi = (float(finite_y.min()), float(finite_y.max())) if finite_y.size else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>']
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="20" text-anchor="middle" font-size="14">{_escape(title)}</text>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="#000000"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="#000000"/>')
    for x in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(x):.2f}" y1="{top + ph}" x2="{px(x):.2f}" y2="{top + ph + 5}" stroke="#000000"/>')
        out.append(f'<text x="{px(x):.2f}" y="{top + ph + 18}" text-anchor="middle">{x:.4g}</text>')
    for y in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{left - 5}" y1="{py(y):.2f}" x2="{left}" y2="{py(y):.2f}" stroke="#000000"/>')
        out.append(f'<text x="{left - 8}" y="{py(y) + 4:.2f}" text-anchor="end">{y:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 10}" text-anchor="middle">{_escape(x_label)}</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.2f})">{_escape(y_label)}</text>')
    for k, ((label, _, _), x, y) in enumerate(zip(curves, xs, ys)):
        color = PALETTE[k % len(PALETTE)]
        keep = np.flatnonzero(np.isfinite(y))
        if len(keep) > MAX_POINTS:
            keep = keep[np.unique(np.linspace(0, len(keep) - 1, MAX_POINTS).round().astype(int))]
        pts = " ".join(f"{px(x[i]):.2f},{py(y[i]):.2f}" for i in keep)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 10 + 18 * k
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 35}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 40}" y="{ly + 4}">{_escape(label)}</text>')
    out.append("</svg>")
    try:
        with _open_for_write(path) as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def mean_curves(records: Sequence[RunRecord], metric: str) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Per-algorithm mean of ``metric`` over the steps all runs share."""
    if not records:
        return []
    if any(r.column(metric) is None for r in records):
        raise ValueError(f"records carry no {metric!r} column")
    stats = aggregate(records, min(int(r.t[-1]) for r in records), metric)
    return [(s.algorithm, s.curve_t, s.curve_mean) for s in stats.algorithms]


# --- whole experiments ----------------------------------------------------------


def write_outputs(cfg: ExperimentConfig, result: ExperimentResult, out_dir) -> dict[str, Path]:
    """records.csv, summary.csv (at the last shared step) and curves.svg,
    plus failures.txt when some runs failed."""
    out_dir = Path(out_dir)
    paths = {"records": out_dir / "records.csv", "summary": out_dir / "summary.csv", "curves": out_dir / "curves.svg"}
    emit_csv(result.records, paths["records"])
    if result.records:
        last = min(int(r.t[-1]) for r in result.records)
        stats = aggregate(result.records, last)
    else:
        stats = SummaryStats([])
    emit_csv(stats, paths["summary"])
    unit = "episode" if cfg.continuous else "t"
    emit_svg_curves([(s.algorithm, s.curve_t, s.curve_mean) for s in stats.algorithms], paths["curves"],
                    title=cfg.environment, x_label=unit, y_label="cum_reward_per_step")
    if result.failures:
        paths["failures"] = out_dir / "failures.txt"
        with _open_for_write(paths["failures"]) as fh:
            for f in result.failures:
                fh.write(f"{f.algorithm} run {f.run}\n{f.message}\n")
    return paths


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, base_seed=seed)
