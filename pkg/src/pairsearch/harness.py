"""Experiment harness: dataset generation, benchmark suites, exports.

Suites mirror the benchmark protocol: synthetic uniform-hypercube data,
answer noise calibrated to a target flip rate, many episodes per
configuration with one RNG stream per episode, and per-episode metrics
rows written as CSV. Timing columns cover query selection and posterior
update only (stop-rule evaluation is measurement, not algorithm); they
are the one part of a row that is not bit-for-bit reproducible.
"""
from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .baselines import (
    STRATEGY_EC2,
    STRATEGY_IG,
    STRATEGY_RANDOM,
    PairTables,
    run_discrete_episode,
)
from .blind import (
    MODE_GROUND_TRUTH,
    MODE_LEARNED,
    MODE_RANDOM_FIXED,
    BlindConfig,
    run_blind,
    sliding_window_means,
)
from .catalog import ObjectSet, build_index
from .embed import TrainConfig, kfold_accuracy
from .oracle import Oracle, OracleConfig, calibrate_sigma
from .search import (
    STOP_ARGMAX_POSTERIOR,
    SearchConfig,
    default_max_steps,
    initial_belief_from_features,
    run_episode,
    write_episode_log,
)

STRATEGY_GAUSS = "gauss"
EXACT_STRATEGY_CAP = 100  # IG / EC2 are O(n^3) per step; capped as documented


@dataclass
class ExperimentSpec:
    """Parameters shared by the experiment suites."""

    suite: str = "scaling"
    n_grid: tuple = (50, 100, 1000, 10000)
    d: int = 5
    dataset: Optional[str] = None  # CSV path; overrides synthetic data
    strategies: tuple = (STRATEGY_GAUSS, STRATEGY_IG, STRATEGY_EC2, STRATEGY_RANDOM)
    flip_rate: float = 0.10
    episodes: int = 200
    seed: int = 0
    window: int = 100
    out: Optional[str] = None
    # blind-suite specifics
    blind_n: int = 500
    blind_episodes: int = 4000
    schedule: tuple = tuple(2 ** k for k in range(12))
    embed_dim: int = 5
    embed_epochs: int = 30
    modes: tuple = (MODE_LEARNED, MODE_GROUND_TRUTH, MODE_RANDOM_FIXED)
    blind_max_steps: int = 200
    blind_window: int = 1000

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            data = json.load(fh)
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - fields
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("n_grid", "strategies", "schedule", "modes"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass
class MetricsRow:
    strategy: str
    n: int
    d: int
    episode: int
    queries: int
    t_select_us: float
    t_update_us: float
    window_mean: float


METRICS_HEADER = "strategy,n,d,episode,queries,t_select_us,t_update_us,window_mean"


def write_metrics_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write(METRICS_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.strategy},{r.n},{r.d},{r.episode},{r.queries},"
                     f"{r.t_select_us:.3f},{r.t_update_us:.3f},{r.window_mean!r}\n")


def gen_hypercube(n: int, d: int, seed: int = 0) -> ObjectSet:
    """n i.i.d. uniform-[0,1]^d points, deterministic per seed."""
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    vectors = rng.random((n, d))
    return ObjectSet(vectors=vectors, labels=[f"object-{i}" for i in range(n)])


def standardize(objects: ObjectSet) -> ObjectSet:
    """Zero-mean, unit-variance per feature column (for ingested datasets)."""
    X = objects.vectors
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return ObjectSet(vectors=(X - mean) / std, labels=objects.labels,
                     image_refs=objects.image_refs)


def _episode_rng(seed: int, *key) -> np.random.Generator:
    """One independent stream per episode: SeedSequence keyed on the suite
    seed plus the episode coordinates."""
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def run_gauss_episodes(objects: ObjectSet, sigma_eps: float, episodes: int,
                       seed: int, key: int = 0,
                       max_steps: Optional[int] = None,
                       warmup: bool = True):
    """Episodes of the Gaussian-belief search with the argmax stop rule."""
    index = build_index(objects)
    steps = max_steps if max_steps is not None else default_max_steps(objects.n)
    cfg = SearchConfig(sigma_eps=sigma_eps, stop_rule=STOP_ARGMAX_POSTERIOR,
                       max_steps=steps)
    results = []
    start = -1 if warmup else 0
    for e in range(start, episodes):
        rng = _episode_rng(seed, key, e + 1)
        target = int(rng.integers(0, objects.n))
        oracle = Oracle(objects.vectors, OracleConfig(sigma_eps=sigma_eps), rng=rng)
        res = run_episode(index, target, cfg,
                          lambda i, j: oracle.sample_for_target(i, j, target),
                          belief=initial_belief_from_features(objects.vectors),
                          rng=rng)
        if e >= 0:
            results.append(res)
    return results


def run_discrete_episodes(objects: ObjectSet, sigma_eps: float, strategy: str,
                          episodes: int, seed: int, key: int = 0,
                          max_steps: Optional[int] = None,
                          warmup: bool = True):
    # the exhaustive strategies precompute all-pair likelihoods (O(n^3)
    # memory, they are capped at small n anyway); random stays table-free
    tables = (PairTables.build(objects.vectors, sigma_eps)
              if strategy in (STRATEGY_IG, STRATEGY_EC2) else None)
    steps = max_steps if max_steps is not None else default_max_steps(objects.n)
    results = []
    start = -1 if warmup else 0
    for e in range(start, episodes):
        rng = _episode_rng(seed, key, e + 1)
        target = int(rng.integers(0, objects.n))
        oracle = Oracle(objects.vectors, OracleConfig(sigma_eps=sigma_eps), rng=rng)
        out = run_discrete_episode(
            target, lambda i, j: oracle.sample_for_target(i, j, target),
            rng, strategy, steps, tables=tables, vectors=objects.vectors,
            sigma_eps=sigma_eps)
        if e >= 0:
            results.append(out)
    return results


def run_scaling_suite(spec: ExperimentSpec):
    """Query/computational complexity grid over n for every strategy.

    The exact strategies (ig, ec2) are skipped above EXACT_STRATEGY_CAP
    objects. Returns (rows, summary) where summary maps (strategy, n) to
    mean queries and mean per-step times.
    """
    rows: list[MetricsRow] = []
    summary: dict = {}
    for n_ix, n in enumerate(spec.n_grid):
        objects = (standardize(ObjectSet.from_csv(spec.dataset))
                   if spec.dataset else gen_hypercube(n, spec.d, seed=spec.seed + n_ix))
        n_actual = objects.n
        sigma = calibrate_sigma(objects.vectors, spec.flip_rate, seed=spec.seed)
        for s_ix, strategy in enumerate(spec.strategies):
            if strategy in (STRATEGY_IG, STRATEGY_EC2) and n_actual > EXACT_STRATEGY_CAP:
                continue
            key = 1000 * n_ix + s_ix
            if strategy == STRATEGY_GAUSS:
                eps = run_gauss_episodes(objects, sigma, spec.episodes, spec.seed, key)
                data = [(r.queries_used, r.mean_select_us, r.mean_update_us)
                        for r in eps]
                if spec.out:
                    log_dir = Path(spec.out)
                    log_dir.mkdir(parents=True, exist_ok=True)
                    with open(log_dir / f"episodes_gauss_n{n_actual}.jsonl", "w") as fh:
                        for e, r in enumerate(eps):
                            write_episode_log(r.log, f"gauss-n{n_actual}-ep{e + 1}", fh)
            else:
                eps = run_discrete_episodes(objects, sigma, strategy,
                                            spec.episodes, spec.seed, key)
                data = [(q, float(np.mean(sel)), float(np.mean(upd)))
                        for q, _, sel, upd in eps]
            queries = np.array([d[0] for d in data], dtype=float)
            means = sliding_window_means(queries, min(spec.window, len(queries)))
            for e, (q, sel, upd) in enumerate(data):
                rows.append(MetricsRow(strategy=strategy, n=n_actual, d=spec.d,
                                       episode=e + 1, queries=int(q),
                                       t_select_us=sel, t_update_us=upd,
                                       window_mean=float(means[e])))
            summary[(strategy, n_actual)] = {
                "mean_queries": float(queries.mean()),
                "mean_select_us": float(np.mean([d[1] for d in data])),
                "mean_update_us": float(np.mean([d[2] for d in data])),
            }
    if spec.out:
        out = Path(spec.out)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(rows, out / "scaling_metrics.csv")
        with open(out / "scaling_summary.json", "w") as fh:
            json.dump({f"{k[0]}@{k[1]}": v for k, v in summary.items()}, fh, indent=2)
    return rows, summary


def run_blind_suite(spec: ExperimentSpec):
    """Blind-setting curves for each embedding mode, plus snapshots."""
    objects = (standardize(ObjectSet.from_csv(spec.dataset)) if spec.dataset
               else gen_hypercube(spec.blind_n, spec.d, seed=spec.seed))
    sigma = calibrate_sigma(objects.vectors, spec.flip_rate, seed=spec.seed)
    cfg = BlindConfig(
        episodes=spec.blind_episodes,
        schedule=frozenset(spec.schedule),
        train=TrainConfig(dim=spec.embed_dim, epochs=spec.embed_epochs,
                          rng_seed=spec.seed),
        max_steps=spec.blind_max_steps,
        window=min(spec.blind_window, spec.blind_episodes),
        rng_seed=spec.seed,
    )
    results = {}
    for mode in spec.modes:
        results[mode] = run_blind(objects, sigma, cfg, mode=mode)
    if spec.out:
        out = Path(spec.out)
        out.mkdir(parents=True, exist_ok=True)
        for mode, res in results.items():
            with open(out / f"blind_{mode}.csv", "w") as fh:
                fh.write("episode,target,queries,window_mean\n")
                for e in range(res.queries.size):
                    fh.write(f"{e + 1},{res.targets[e]},{res.queries[e]},"
                             f"{float(res.window_means[e])!r}\n")
            for ep, snap in res.snapshots.items():
                snap.save(out / f"snapshot_{mode}_ep{ep}.txt")
    return results


def run_convergence_suite(x_t: float, mu0: float, sigma0sq: float, steps: int,
                          seeds, out: Optional[str] = None, stride: int = 1):
    """1-D recurrence trajectories for several seeds."""
    from .search import convergence_sim

    trajectories = {}
    for seed in seeds:
        rng = np.random.default_rng(seed)
        trajectories[seed] = convergence_sim(x_t, mu0, sigma0sq, steps, rng)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write("seed,m,mu,sigma2\n")
            for seed, traj in trajectories.items():
                for m in range(0, traj.mu.size, stride):
                    fh.write(f"{seed},{m},{float(traj.mu[m])!r},{float(traj.sigma2[m])!r}\n")
    return trajectories


def sample_triplets(objects: ObjectSet, count: int, sigma_eps: float,
                    seed: int = 0) -> np.ndarray:
    """Random (i, j; k) triplets answered by the probit model on the true
    features (sigma_eps = 0 gives noiseless comparisons)."""
    X = objects.vectors
    n = objects.n
    rng = np.random.default_rng(seed)
    out = np.empty((count, 3), dtype=np.int64)
    a = rng.integers(0, n, size=count)
    b = rng.integers(0, n, size=count)
    k = rng.integers(0, n, size=count)
    bad = (a == b) | (a == k) | (b == k)
    while np.any(bad):
        m = int(bad.sum())
        a[bad] = rng.integers(0, n, size=m)
        b[bad] = rng.integers(0, n, size=m)
        k[bad] = rng.integers(0, n, size=m)
        bad = (a == b) | (a == k) | (b == k)
    diff = X[a] - X[b]
    dist = np.linalg.norm(diff, axis=1)
    dist[dist == 0] = 1.0
    mid = 0.5 * (X[a] + X[b])
    s = np.einsum("td,td->t", X[k] - mid, diff) / dist
    if sigma_eps == 0.0:
        a_wins = s > 0
    else:
        a_wins = rng.random(count) < ndtr(s / sigma_eps)
    out[:, 0] = np.where(a_wins, a, b)
    out[:, 1] = np.where(a_wins, b, a)
    out[:, 2] = k
    return out


def run_embed_eval(triplets: np.ndarray, n_objects: int, dims,
                   folds: int = 10, epochs: int = 100, seed: int = 0,
                   out: Optional[str] = None):
    """Cross-validated holdout triplet accuracy per embedding dimension."""
    rows = []
    for dim in dims:
        cfg = TrainConfig(dim=dim, epochs=epochs, rng_seed=seed)
        scores = kfold_accuracy(triplets, n_objects, cfg, folds=folds, seed=seed)
        for f, acc in enumerate(scores):
            rows.append((dim, f, acc))
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write("dim,fold,accuracy\n")
            for dim, f, acc in rows:
                fh.write(f"{dim},{f},{acc!r}\n")
    return rows


def pca_project(nu: np.ndarray, k: int = 2) -> np.ndarray:
    """Projection onto the top-k principal components of cov(nu), centered.

    Component signs are fixed (first nonzero loading positive) so the
    output is deterministic.
    """
    X = np.asarray(nu, dtype=np.float64)
    if X.shape[0] < k:
        raise ValueError("need at least k objects")
    centered = X - X.mean(axis=0)
    cov = np.cov(centered, rowvar=False, bias=False)
    vals, vecs = np.linalg.eigh(np.atleast_2d(cov))
    order = np.argsort(vals)[::-1][:k]
    W = vecs[:, order]
    for c in range(W.shape[1]):
        col = W[:, c]
        for entry in col:
            if abs(entry) > 1e-12:
                if entry < 0:
                    W[:, c] = -col
                break
    return centered @ W
