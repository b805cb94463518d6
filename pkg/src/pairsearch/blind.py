"""Blind-setting framework: search on a learned embedding, retrain on the
triplets the searches produce, repeat.

The search algorithm never sees the true feature vectors; answers come
from an oracle that does. Every answered query (i, j) with winner y in
an episode targeting t yields the triplet (y, loser; t). At scheduled
episode counts the embedding is retrained on all triplets collected so
far (warm-started from the previous fit) and the spatial index is
rebuilt over the new means. Two search-side modifications account for
embedding uncertainty: per-object Mahalanobis nearest-neighbor lookups,
and the effective answer-noise variance sigma_eps^2 + w'Psi_i w +
w'Psi_j w in the belief update.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .catalog import ObjectSet, build_index
from .embed import (
    GaussianEmbedding,
    TrainConfig,
    TripletObservation,
    TripletStore,
    effective_noise,
    init_embedding,
    train,
)
from .oracle import Oracle, OracleConfig
from .search import (
    STOP_TARGET_IN_QUERY,
    SearchConfig,
    SearchSession,
    STATUS_RUNNING,
    STATUS_FOUND,
    initial_belief_blind,
    initial_belief_from_features,
)

logger = logging.getLogger(__name__)

__all__ = ["effective_noise", "BlindConfig", "BlindResult", "run_blind",
           "estimate_dim", "MODE_LEARNED", "MODE_GROUND_TRUTH", "MODE_RANDOM_FIXED"]

MODE_LEARNED = "gauss-embed"
MODE_GROUND_TRUTH = "ground-truth"
MODE_RANDOM_FIXED = "random-fixed"


@dataclass(frozen=True)
class BlindConfig:
    """One blind run: episode count, retrain schedule, training setup."""

    episodes: int
    schedule: frozenset
    train: TrainConfig
    assumed_sigma_eps: float = 1.0
    max_steps: int = 200
    window: int = 1000
    rng_seed: int = 0
    # early retrains see tiny stores; guarantee enough optimizer steps so
    # the embedding escapes its symmetric prior initialization
    min_retrain_steps: int = 5000

    def __post_init__(self):
        if self.window > self.episodes:
            raise ValueError("window must not exceed the episode count")


@dataclass
class BlindResult:
    mode: str
    targets: np.ndarray
    queries: np.ndarray
    found: np.ndarray
    window_means: np.ndarray
    store: TripletStore
    embedding: GaussianEmbedding
    snapshots: dict = field(default_factory=dict)
    mean_wpsi: Optional[np.ndarray] = None  # per-episode mean w'Psi w over queries

    def window_mean_at(self, episode: int) -> float:
        """Mean query count over the window centered at `episode` (1-based)."""
        return float(self.window_means[episode - 1])


def sliding_window_means(queries: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average (window truncated at the edges)."""
    q = np.asarray(queries, dtype=np.float64)
    out = np.empty_like(q)
    half = window // 2
    for e in range(q.size):
        lo = max(0, e - half)
        hi = min(q.size, e + window - half)
        out[e] = q[lo:hi].mean()
    return out


def run_blind(objects: ObjectSet, oracle_sigma: float, config: BlindConfig,
              mode: str = MODE_LEARNED) -> BlindResult:
    """Run `episodes` searches, learning the embedding along the way.

    `objects` carries the ground-truth features, visible only to the
    simulated oracle. Modes: the learned-embedding loop, a ground-truth
    reference (plain search on the real features), and a fixed random
    embedding (no learning; a floor to compare against). Each episode
    gets its own RNG stream, so runs are reproducible per seed.
    """
    n = objects.n
    root = np.random.SeedSequence(config.rng_seed)
    streams = root.spawn(config.episodes + 1)
    setup_rng = np.random.default_rng(streams[0])

    blind = mode != MODE_GROUND_TRUTH
    if mode == MODE_LEARNED:
        embedding = init_embedding(n, config.train.dim, setup_rng)
    elif mode == MODE_RANDOM_FIXED:
        embedding = GaussianEmbedding(
            nu=setup_rng.standard_normal((n, config.train.dim)),
            log_psi=np.zeros((n, config.train.dim)))
    elif mode == MODE_GROUND_TRUTH:
        embedding = None
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if blind:
        index = build_index(embedding.nu)
        sigma_eps = config.assumed_sigma_eps
    else:
        index = build_index(objects)
        sigma_eps = oracle_sigma

    store = TripletStore(n_objects=n)
    targets = np.empty(config.episodes, dtype=np.int64)
    queries = np.empty(config.episodes, dtype=np.int64)
    found = np.zeros(config.episodes, dtype=bool)
    mean_wpsi = np.full(config.episodes, np.nan)
    snapshots: dict = {}
    retrain_seed = 0

    for e in range(config.episodes):
        rng = np.random.default_rng(streams[e + 1])
        target = int(rng.integers(0, n))
        targets[e] = target
        oracle = Oracle(objects.vectors, OracleConfig(sigma_eps=oracle_sigma), rng=rng)
        search_cfg = SearchConfig(sigma_eps=sigma_eps,
                                  stop_rule=STOP_TARGET_IN_QUERY,
                                  max_steps=config.max_steps)
        if blind:
            belief = initial_belief_blind(config.train.dim)
            psi = embedding.psi
        else:
            belief = initial_belief_from_features(objects.vectors)
            psi = None
        session = SearchSession(index, search_cfg, belief=belief,
                                target_id=target, psi=psi, rng=rng)
        wpsi_terms = []
        while session.status == STATUS_RUNNING:
            record = session.step(lambda i, j: oracle.sample_for_target(i, j, target))
            if record.winner is not None:
                loser = record.j if record.winner == record.i else record.i
                if record.winner != target and loser != target:
                    store.append(TripletObservation(i=record.winner, j=loser,
                                                    k=target, source=f"ep{e}"))
                if blind:
                    vi = embedding.nu[record.i]
                    vj = embedding.nu[record.j]
                    gap = vi - vj
                    nrm = np.linalg.norm(gap)
                    if nrm > 0:
                        w = gap / nrm
                        wpsi_terms.append(float((w * w) @ (embedding.psi[record.i]
                                                           + embedding.psi[record.j])) / 2.0)
        queries[e] = session.step_count
        found[e] = session.status == STATUS_FOUND
        if wpsi_terms:
            mean_wpsi[e] = float(np.mean(wpsi_terms))

        episode_number = e + 1
        if mode == MODE_LEARNED and episode_number in config.schedule and len(store):
            retrain_seed += 1
            batches = max(1, -(-len(store) // config.train.batch_size))
            epochs = max(config.train.epochs,
                         -(-config.min_retrain_steps // batches))
            cfg = TrainConfig(dim=config.train.dim, epochs=epochs,
                              batch_size=config.train.batch_size,
                              learning_rate=config.train.learning_rate,
                              samples=config.train.samples,
                              rng_seed=config.train.rng_seed + retrain_seed)
            embedding = train(store, cfg, init=embedding, n_objects=n)
            index = build_index(embedding.nu)
            snapshots[episode_number] = embedding.copy()
            logger.info("retrained after episode %d on %d triplets",
                        episode_number, len(store))

    return BlindResult(
        mode=mode, targets=targets, queries=queries, found=found,
        window_means=sliding_window_means(queries, config.window),
        store=store,
        embedding=embedding if blind else GaussianEmbedding(
            nu=objects.vectors.copy(), log_psi=np.full(objects.vectors.shape, -30.0)),
        snapshots=snapshots,
        mean_wpsi=mean_wpsi,
    )


def estimate_dim(nu: np.ndarray, energy: float = 0.98) -> int:
    """Smallest dimensionality whose top eigenvalues of cov(nu) capture at
    least `energy` of the total eigenvalue mass."""
    if not 0.0 < energy <= 1.0:
        raise ValueError("energy must be in (0, 1]")
    nu = np.asarray(nu, dtype=np.float64)
    if nu.shape[0] < 2:
        raise ValueError("need at least two objects")
    cov = np.cov(nu, rowvar=False, bias=False)
    vals = np.linalg.eigvalsh(np.atleast_2d(cov))[::-1]
    vals = np.clip(vals, 0.0, None)
    total = float(vals.sum())
    if total == 0.0:
        return 1
    frac = np.cumsum(vals) / total
    return int(np.searchsorted(frac, energy - 1e-12) + 1)
