"""Experiment runner, hindsight comparators, and result emission.

Runs the online engines over synthetic or file-backed objective streams,
accounts per-round rewards against the best fixed point in hindsight, and
writes one CSV per replica plus an aggregate file and a metadata header that
records every auto-resolved parameter.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .bodies import ConvexBody
from .functions import DRFunction, estimate_params
from .hypercube import HypercubeEngine, default_binary_granularity
from .instances import BatchSampler, gen_random_graph, gen_random_quadratic, load_edge_list
from .lift import default_granularity
from .mfw import (KAPPA, MetaFrankWolfeDownClosed, MetaFrankWolfeGeneral, StepSchedule,
                  default_levels_down_closed, default_levels_general, doubling_run)
from .rng import make_rng

OUTPUT_DIR_ENV = "DRSUBMAX_OUT"
CSV_HEADER = "t,reward,cum_reward,comparator_cum,ratio,elapsed_ms"

ALGORITHMS = ("down-closed", "general", "hypercube",
              "doubling-down-closed", "doubling-general")


class ConfigError(ValueError):
    """Invalid or incompatible experiment configuration."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a run; unknown fields are rejected."""

    algorithm: str = "down-closed"
    horizon: int = 500
    # body
    body_kind: str = "budget"          # hypercube | budget | budget-band
    n: int = 20
    budget: float = 1.0
    budget_lower: float = 0.0
    # instance stream
    instance: str = "revenue"          # revenue | quadratic
    graph_path: str | None = None
    edge_prob: float = 0.3
    graph_seed: int = 7
    p: float = 0.01                    # desk-scale advocacy probability
    p_original: float = 0.0001         # value used at full scale, recorded only
    batch_size: int | None = None
    quad_density: float = 0.6
    quad_scale: float = 1.0
    # engine knobs (None: auto-resolved and recorded)
    levels: int | None = None
    granularity: int | None = None
    sigma: float = 0.0
    oracle: str = "auto"
    epsilon: float | None = None
    # accounting
    comparator_grid: int | None = None
    master_seed: int = 0
    replicas: int = 5
    name: str | None = None
    output_dir: str = "out"
    wall_clock: bool = True

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.instance not in ("revenue", "quadratic"):
            raise ConfigError(f"unknown instance family {self.instance!r}")
        if self.body_kind not in ("hypercube", "budget", "budget-band"):
            raise ConfigError(f"unsupported body kind {self.body_kind!r} for experiments")
        if self.algorithm in ("down-closed", "doubling-down-closed"):
            if self.body_kind == "budget-band" and self.budget_lower > 0:
                raise ConfigError("down-closed engine needs a down-closed body")
        if self.algorithm == "hypercube" and self.body_kind != "hypercube":
            raise ConfigError("hypercube engine requires the hypercube body")

    def build_body(self) -> ConvexBody:
        if self.body_kind == "hypercube":
            return ConvexBody.hypercube(self.n)
        if self.body_kind == "budget":
            return ConvexBody.budget(self.n, self.budget)
        return ConvexBody.budget_band(self.n, self.budget_lower, self.budget)


def parse_config_file(path: str) -> dict:
    """key=value lines with '#' comments; values typed as bool/int/float/str."""
    out: dict = {}
    with open(path, "rt") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            out[key.strip().replace("-", "_")] = _coerce(value.strip())
    return out


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", ""):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(mapping) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**mapping)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# hindsight comparators
# ---------------------------------------------------------------------------

@dataclass
class Hindsight:
    point: np.ndarray
    value: float
    method: str
    candidates: dict[str, float] = field(default_factory=dict)


def _offline_frank_wolfe(total: DRFunction, body: ConvexBody, levels: int) -> tuple[np.ndarray, float]:
    """Conditional-gradient ascent on the summed objective with exact gradients.

    Down-closed bodies use headroom-capped directions and uniform steps;
    other bodies start at the minimum infinity-norm point with harmonic
    steps.  Returns the best iterate seen, not just the final one.
    """
    if body.down_closed:
        x = np.zeros(body.n)
        best_x, best_v = x.copy(), total.value(x)
        for _ in range(levels):
            v = body.linear_maximize_boxed(total.gradient(x), 1.0 - x)
            x = x + v / levels
            val = total.value(x)
            if val > best_v:
                best_x, best_v = x.copy(), val
        return best_x, float(best_v)
    schedule = StepSchedule.harmonic(levels)
    x = body.min_inf_norm_point()
    best_x, best_v = x.copy(), total.value(x)
    for eta in schedule.etas:
        v = body.linear_maximize(total.gradient(x))
        x = (1.0 - eta) * x + eta * v
        val = total.value(x)
        if val > best_v:
            best_x, best_v = x.copy(), val
    return best_x, float(best_v)


def _projected_ascent(total: DRFunction, body: ConvexBody, rng, starts: int,
                      iters: int) -> tuple[np.ndarray, float]:
    bound = total.grad_norm_bound
    if bound is None:
        bound = estimate_params(total, rng)["grad_norm_bound"]
    scale = body.diameter / max(bound, 1e-12)
    best_x, best_v = None, -np.inf
    for _ in range(starts):
        x = body.sample(rng)
        for t in range(1, iters + 1):
            x = body.project(x + (scale / np.sqrt(t)) * total.gradient(x))
        val = total.value(x)
        if val > best_v:
            best_x, best_v = x, val
    return best_x, float(best_v)


def _grid_points(body: ConvexBody, resolution: int) -> np.ndarray:
    axes = [np.arange(resolution + 1) / resolution] * body.n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, body.n)
    return grid[body.contains_batch(grid)]


def compute_hindsight(functions, body: ConvexBody, extra_candidates=(), *,
                      grid_resolution: int | None = None, grid_limit: float = 1e6,
                      fw_levels: int = 256, ascent_starts: int = 32,
                      ascent_iters: int = 150, rng=None) -> Hindsight:
    """Best fixed feasible point for the summed objectives, by best-of search.

    Combines (a) lattice brute force when the grid fits the budget, (b)
    offline conditional gradient on the sum, (c) multistart projected
    ascent, and (d) the provided candidate points (e.g. the plays, which
    keeps the comparator at least as good as every played point).
    """
    functions = list(functions)
    if not functions:
        raise ValueError("empty function list")
    rng = make_rng(0 if rng is None else rng)
    total = functions[0]
    for fn in functions[1:]:
        total = total + fn
    candidates: dict[str, tuple[np.ndarray, float]] = {}

    resolution = grid_resolution
    if resolution is None:
        by_budget = int(grid_limit ** (1.0 / body.n)) - 1
        resolution = min(100, by_budget)
    if resolution >= 1 and (resolution + 1) ** body.n <= grid_limit:
        pts = _grid_points(body, resolution)
        if len(pts):
            vals = total.value_batch(pts)
            best = int(np.argmax(vals))
            candidates["lattice-bruteforce"] = (pts[best], float(vals[best]))

    candidates["offline-frank-wolfe"] = _offline_frank_wolfe(total, body, fw_levels)
    candidates["multistart-gradient-ascent"] = _projected_ascent(
        total, body, rng, ascent_starts, ascent_iters)

    extra = [np.asarray(x, dtype=float) for x in extra_candidates]
    if extra:
        vals = total.value_batch(np.stack(extra))
        best = int(np.argmax(vals))
        candidates["played-points"] = (extra[best], float(vals[best]))

    method = max(candidates, key=lambda k: candidates[k][1])
    point, value = candidates[method]
    return Hindsight(point=point, value=value, method=method,
                     candidates={k: v[1] for k, v in candidates.items()})


# ---------------------------------------------------------------------------
# streams and engines
# ---------------------------------------------------------------------------

def _build_stream(cfg: ExperimentConfig, rng) -> tuple[list[DRFunction], dict]:
    meta: dict = {"instance": cfg.instance}
    if cfg.instance == "revenue":
        if cfg.graph_path:
            graph = load_edge_list(cfg.graph_path)
            meta["graph"] = {"path": cfg.graph_path, "n": graph.n, "edges": graph.edge_count}
        else:
            graph = gen_random_graph(cfg.n, cfg.edge_prob, seed=cfg.graph_seed)
            meta["graph"] = {"generator": "erdos-renyi", "n": graph.n,
                             "edge_prob": cfg.edge_prob, "seed": cfg.graph_seed,
                             "edges": graph.edge_count}
        if graph.n != cfg.n:
            raise ConfigError(f"graph has {graph.n} vertices but config says n={cfg.n}")
        batch = cfg.batch_size if cfg.batch_size is not None else max(1, cfg.n // 2)
        meta["batch_size"] = batch
        meta["p"] = cfg.p
        meta["p_original"] = cfg.p_original
        sampler = BatchSampler(graph, batch, cfg.p, rng)
        return [sampler.draw() for _ in range(cfg.horizon)], meta
    meta["quad_density"] = cfg.quad_density
    meta["quad_scale"] = cfg.quad_scale
    return [gen_random_quadratic(cfg.n, rng, cfg.quad_density, cfg.quad_scale)
            for _ in range(cfg.horizon)], meta


def _resolve_engine(cfg: ExperimentConfig, body: ConvexBody, rng) -> tuple[object, dict]:
    meta: dict = {}
    if cfg.algorithm in ("down-closed", "doubling-down-closed"):
        levels = cfg.levels if cfg.levels is not None else default_levels_down_closed(cfg.horizon)
        meta.update(levels=levels, schedule="uniform",
                    granularity=cfg.granularity if cfg.granularity is not None
                    else default_granularity(cfg.horizon, body.n),
                    epsilon=cfg.epsilon if cfg.epsilon is not None else 1.0 / math.sqrt(cfg.horizon))
        if cfg.algorithm == "down-closed":
            engine = MetaFrankWolfeDownClosed(
                body, horizon=cfg.horizon, levels=levels, sigma=cfg.sigma,
                oracle_strategy=cfg.oracle, granularity=cfg.granularity,
                epsilon=cfg.epsilon, rng=rng)
            meta.update(oracle=engine.oracle_strategy, granularity=engine.granularity,
                        epsilon=engine.epsilon)
            return engine, meta
        return None, meta
    if cfg.algorithm in ("general", "doubling-general"):
        levels = cfg.levels if cfg.levels is not None else default_levels_general(cfg.horizon)
        strategy = "ascent" if cfg.oracle == "auto" else cfg.oracle
        x0 = body.min_inf_norm_point()
        meta.update(levels=levels, schedule="harmonic", kappa=KAPPA, oracle=strategy,
                    x0_inf_norm=float(np.max(np.abs(x0))),
                    target_ratio=(1.0 - float(np.max(np.abs(x0)))) / (3.0 * math.sqrt(3.0)))
        if cfg.algorithm == "general":
            return MetaFrankWolfeGeneral(body, horizon=cfg.horizon, levels=levels,
                                         sigma=cfg.sigma, oracle_strategy=strategy,
                                         rng=rng), meta
        return None, meta
    depth = cfg.granularity if cfg.granularity is not None else default_binary_granularity(cfg.horizon)
    meta.update(depth=depth, oracle="baseline-follow-the-leader", initial_point="zeros")
    return HypercubeEngine(body.n, horizon=cfg.horizon, depth=depth, rng=rng), meta


# ---------------------------------------------------------------------------
# records and emission
# ---------------------------------------------------------------------------

@dataclass
class RegretRow:
    t: int
    reward: float
    cum_reward: float
    comparator_cum: float
    ratio: float
    elapsed_ms: float


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r.t},{r.reward!r},{r.cum_reward!r},{r.comparator_cum!r},"
                     f"{r.ratio!r},{r.elapsed_ms!r}")
    return "\n".join(lines) + "\n"


def write_csv(path, rows) -> None:
    with open(path, "wt") as fh:
        fh.write(rows_to_csv(rows))


def write_json(path, rows, metadata) -> None:
    payload = {"metadata": metadata, "records": [asdict(r) for r in rows]}
    with open(path, "wt") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def build_rows(rewards, comparator_values, elapsed_ms) -> tuple[list[RegretRow], bool]:
    """Assemble per-round records; 0/0 ratios report 1 and raise a flag."""
    rows, zero_flag = [], False
    cum = comp_cum = 0.0
    for t, (reward, comp, ms) in enumerate(zip(rewards, comparator_values, elapsed_ms), start=1):
        cum += reward
        comp_cum += comp
        if comp_cum == 0.0:
            ratio = 1.0
            if cum == 0.0:
                zero_flag = True
        else:
            ratio = cum / comp_cum
        rows.append(RegretRow(t, float(reward), float(cum), float(comp_cum),
                              float(ratio), float(ms)))
    return rows, zero_flag


# ---------------------------------------------------------------------------
# the runner
# ---------------------------------------------------------------------------

@dataclass
class ReplicaResult:
    rows: list[RegretRow]
    hindsight: Hindsight
    plays: list[np.ndarray]
    final_ratio: float
    zero_over_zero: bool


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replicas: list[ReplicaResult]
    metadata: dict
    csv_paths: list[str]
    aggregate_path: str
    metadata_path: str

    @property
    def mean_final_ratio(self) -> float:
        return float(np.mean([r.final_ratio for r in self.replicas]))


def run_replica(cfg: ExperimentConfig, body: ConvexBody, seed_child) -> tuple[ReplicaResult, dict]:
    rng = make_rng(seed_child)
    stream_rng, engine_rng, hindsight_rng = rng.spawn(3)
    functions, stream_meta = _build_stream(cfg, stream_rng)
    engine, engine_meta = _resolve_engine(cfg, body, engine_rng)

    rewards: list[float] = []
    plays: list[np.ndarray] = []
    elapsed: list[float] = []
    if engine is None:  # doubling variants run through the restart wrapper
        base_algorithm = cfg.algorithm.removeprefix("doubling-")
        start = time.perf_counter()
        result = doubling_run(base_algorithm, body, functions, rng=engine_rng, sigma=cfg.sigma)
        total_ms = (time.perf_counter() - start) * 1000.0 if cfg.wall_clock else 0.0
        rewards = result.rewards
        plays = result.plays
        elapsed = [total_ms / len(functions)] * len(functions) if cfg.wall_clock else [0.0] * len(functions)
        engine_meta["phases"] = [asdict(ph) for ph in result.phases]
    else:
        for fn in functions:
            tic = time.perf_counter()
            x = engine.play()
            reward = engine.feedback(fn)
            elapsed.append((time.perf_counter() - tic) * 1000.0 if cfg.wall_clock else 0.0)
            plays.append(x)
            rewards.append(reward)

    hindsight = compute_hindsight(functions, body, extra_candidates=plays,
                                  grid_resolution=cfg.comparator_grid, rng=hindsight_rng)
    per_round_comp = [fn.value(hindsight.point) for fn in functions]
    rows, zero_flag = build_rows(rewards, per_round_comp, elapsed)
    replica = ReplicaResult(rows=rows, hindsight=hindsight, plays=plays,
                            final_ratio=rows[-1].ratio, zero_over_zero=zero_flag)
    meta = {"stream": stream_meta, "engine": engine_meta,
            "hindsight": {"method": hindsight.method, "value": hindsight.value,
                          "candidates": hindsight.candidates},
            "zero_over_zero": zero_flag}
    return replica, meta


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    body = cfg.build_body()
    out_dir = os.environ.get(OUTPUT_DIR_ENV, cfg.output_dir)
    os.makedirs(out_dir, exist_ok=True)
    name = cfg.name or f"{cfg.algorithm}_{cfg.instance}_T{cfg.horizon}"

    seed_seq = np.random.SeedSequence(cfg.master_seed)
    children = seed_seq.spawn(cfg.replicas)

    replicas: list[ReplicaResult] = []
    replica_meta: list[dict] = []
    csv_paths: list[str] = []
    for r, child in enumerate(children):
        replica, meta = run_replica(cfg, body, child)
        replicas.append(replica)
        replica_meta.append(meta)
        path = os.path.join(out_dir, f"{name}_rep{r}.csv")
        write_csv(path, replica.rows)
        csv_paths.append(path)

    agg_path = os.path.join(out_dir, f"{name}_aggregate.csv")
    _write_aggregate(agg_path, replicas)

    metadata = {
        "version": __version__,
        "config": asdict(cfg),
        "body": {"kind": body.kind, "n": body.n, "down_closed": body.down_closed,
                 "diameter": body.diameter, "diameter_is_exact": body.diameter_is_exact},
        "master_seed": cfg.master_seed,
        "replicas": replica_meta,
        "mean_final_ratio": float(np.mean([r.final_ratio for r in replicas])),
        "std_final_ratio": float(np.std([r.final_ratio for r in replicas])),
    }
    meta_path = os.path.join(out_dir, f"{name}_metadata.json")
    with open(meta_path, "wt") as fh:
        json.dump(metadata, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")

    return ExperimentResult(config=cfg, replicas=replicas, metadata=metadata,
                            csv_paths=csv_paths, aggregate_path=agg_path,
                            metadata_path=meta_path)


def _write_aggregate(path, replicas: list[ReplicaResult]) -> None:
    horizon = len(replicas[0].rows)
    ratios = np.array([[row.ratio for row in rep.rows] for rep in replicas])
    cums = np.array([[row.cum_reward for row in rep.rows] for rep in replicas])
    with open(path, "wt") as fh:
        fh.write("t,ratio_mean,ratio_std,cum_reward_mean,cum_reward_std\n")
        for t in range(horizon):
            fh.write(f"{t + 1},{ratios[:, t].mean()!r},{ratios[:, t].std()!r},"
                     f"{cums[:, t].mean()!r},{cums[:, t].std()!r}\n")
