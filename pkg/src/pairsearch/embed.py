"""Variational Gaussian embedding learned from triplet comparisons.

Each object i gets an independent Gaussian q_i = N(nu_i, diag(psi_i)):
nu_i is the position estimate, psi_i the per-coordinate uncertainty
(stored as log-variances so positivity is structural). The parameters
maximize an evidence lower bound with a standard-normal prior per object
and a probit likelihood (unit noise) for each observed triplet
"i is closer to k than j is":

    ELBO = -sum_i KL(q_i || N(0, I))
           + sum_(i,j;k) E_q[ log Phi( xhat_k . w_ij + b_ij ) ],

where (w_ij, b_ij) is the bisecting hyperplane of the *sampled*
positions xhat = nu + sqrt(psi) * eps (reparameterization trick), so the
likelihood expectation is estimated by Monte Carlo and differentiated
exactly through the sample. The KL term is closed-form:
KL = 1/2 * sum_dims (psi + nu^2 - 1 - log psi).

Training is plain minibatch stochastic gradient ascent: the likelihood
term is rescaled by |T| / batch so each step sees an unbiased full-data
ELBO estimate, and steps are normalized per triplet so the learning rate
is insensitive to |T|. One epoch costs O(|T| d).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import log_ndtr

from .constants import COINCIDENT_TOL, ELBO_DIVERGENCE_FLOOR
from .exceptions import TrainingDivergedError

logger = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def effective_noise(psi_i, psi_j, w, sigma_eps: float) -> float:
    """Answer-noise std inflated by the two objects' positional uncertainty
    along the query normal: sqrt(sigma_eps^2 + w'Psi_i w + w'Psi_j w)."""
    w = np.asarray(w, dtype=np.float64)
    w2 = w * w
    var = sigma_eps * sigma_eps
    var += float(w2 @ np.asarray(psi_i, dtype=np.float64))
    var += float(w2 @ np.asarray(psi_j, dtype=np.float64))
    return math.sqrt(var)


@dataclass(frozen=True)
class TripletObservation:
    """One answered comparison: object i was judged closer to k than j is."""

    i: int
    j: int
    k: int
    source: str = ""
    ts: float = 0.0

    def __post_init__(self):
        if len({self.i, self.j, self.k}) != 3:
            raise ValueError("triplet ids must be pairwise distinct")


class TripletStore:
    """Append-only triplet collection with per-object participation counts."""

    def __init__(self, n_objects: Optional[int] = None):
        self._items: list[TripletObservation] = []
        self._n_objects = n_objects
        self._counts: dict[int, int] = {}
        self._max_id = -1

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    @property
    def n_objects(self) -> int:
        return max(self._n_objects or 0, self._max_id + 1)

    def count(self, i: int) -> int:
        return self._counts.get(i, 0)

    def append(self, obs: TripletObservation) -> None:
        self._items.append(obs)
        for oid in (obs.i, obs.j, obs.k):
            self._counts[oid] = self._counts.get(oid, 0) + 1
            if oid > self._max_id:
                self._max_id = oid

    def extend(self, items) -> None:
        for obs in items:
            self.append(obs)

    def as_array(self) -> np.ndarray:
        """(T, 3) int array of (i, j, k) rows."""
        if not self._items:
            return np.empty((0, 3), dtype=np.int64)
        return np.array([(t.i, t.j, t.k) for t in self._items], dtype=np.int64)

    def save_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for t in self._items:
                fh.write(json.dumps({"i": t.i, "j": t.j, "k": t.k,
                                     "source": t.source, "ts": t.ts}) + "\n")

    def append_jsonl(self, items, path) -> None:
        with open(path, "a") as fh:
            for t in items:
                fh.write(json.dumps({"i": t.i, "j": t.j, "k": t.k,
                                     "source": t.source, "ts": t.ts}) + "\n")

    @classmethod
    def load_jsonl(cls, path, n_objects: Optional[int] = None) -> "TripletStore":
        store = cls(n_objects=n_objects)
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                store.append(TripletObservation(i=rec["i"], j=rec["j"], k=rec["k"],
                                                source=rec.get("source", ""),
                                                ts=rec.get("ts", 0.0)))
        return store


@dataclass
class GaussianEmbedding:
    """Per-object Gaussian positions: means nu (n, d) and log-variances."""

    nu: np.ndarray
    log_psi: np.ndarray

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=np.float64)
        lp = np.asarray(self.log_psi, dtype=np.float64)
        if nu.shape != lp.shape or nu.ndim != 2:
            raise ValueError("nu and log_psi must share an (n, d) shape")
        if not (np.all(np.isfinite(nu)) and np.all(np.isfinite(lp))):
            raise ValueError("embedding has non-finite entries")
        self.nu = nu
        self.log_psi = lp

    @property
    def n(self) -> int:
        return self.nu.shape[0]

    @property
    def dim(self) -> int:
        return self.nu.shape[1]

    @property
    def psi(self) -> np.ndarray:
        return np.exp(self.log_psi)

    def copy(self) -> "GaussianEmbedding":
        return GaussianEmbedding(self.nu.copy(), self.log_psi.copy())

    def save(self, path) -> None:
        """Snapshot: first line `n d`, then rows `id nu... log_psi...`."""
        with open(path, "w") as fh:
            fh.write(f"{self.n} {self.dim}\n")
            for i in range(self.n):
                cells = [str(i)] + [repr(float(x)) for x in self.nu[i]] \
                                 + [repr(float(x)) for x in self.log_psi[i]]
                fh.write(" ".join(cells) + "\n")

    @classmethod
    def load(cls, path) -> "GaussianEmbedding":
        with open(path) as fh:
            n, d = (int(x) for x in fh.readline().split())
            nu = np.empty((n, d))
            lp = np.empty((n, d))
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                i = int(parts[0])
                vals = [float(x) for x in parts[1:]]
                nu[i] = vals[:d]
                lp[i] = vals[d:]
        return cls(nu, lp)


def init_embedding(n: int, dim: int, rng, psi0: float = 1.0) -> GaussianEmbedding:
    """Prior-matched start: psi = psi0 (1 by default), tiny mean jitter to
    break symmetry.

    For large dim, psi0 must shrink (~1/dim): with psi = 1 the total
    sampled positional noise grows with dim, the likelihood gradients
    scale as 1 / |xhat_i - xhat_j| ~ 1/sqrt(2 dim), and below a critical
    ratio the symmetric all-zeros start becomes an attractive fixed point
    of the training dynamics — the embedding then never trains at all.
    """
    nu = 0.01 * rng.standard_normal((n, dim))
    return GaussianEmbedding(nu=nu,
                             log_psi=np.full((n, dim), math.log(psi0)))


@dataclass(frozen=True)
class TrainConfig:
    dim: int
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 0.2  # per-triplet step scale; see train()
    samples: int = 1
    init_psi: float = 1.0  # cold-start positional variance; use ~1/dim when dim is large
    rng_seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.samples < 1:
            raise ValueError("dim and samples must be >= 1")
        if self.init_psi <= 0:
            raise ValueError("init_psi must be positive")


def kl_to_standard_normal(nu: np.ndarray, log_psi: np.ndarray) -> float:
    """Closed-form sum_i KL(N(nu_i, diag psi_i) || N(0, I))."""
    psi = np.exp(log_psi)
    return 0.5 * float(np.sum(psi + nu * nu - 1.0 - log_psi))


def _scatter_rows(out, ids, values):
    """out[ids] += values with duplicate ids, via sort + reduceat (much
    faster than np.add.at for wide rows)."""
    order = np.argsort(ids, kind="stable")
    sorted_ids = ids[order]
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_ids)) + 1
    starts = np.concatenate(([0], boundaries))
    sums = np.add.reduceat(sorted_vals, starts, axis=0)
    out[sorted_ids[starts]] += sums


def _likelihood_core(nu, log_psi, trip, eps, need_grad):
    """Sampled log-likelihood sum over a triplet batch, and its gradients.

    eps has shape (S, 3, B, d): noise for the (i, j, k) slots of B triplets
    under S reparameterized samples. Degenerate sampled pairs are
    masked out with a warning.
    """
    std = np.exp(0.5 * log_psi)
    i_ids, j_ids, k_ids = trip[:, 0], trip[:, 1], trip[:, 2]
    S = eps.shape[0]
    total = 0.0
    g_nu = np.zeros_like(nu) if need_grad else None
    g_lp = np.zeros_like(log_psi) if need_grad else None
    all_ids = np.concatenate([i_ids, j_ids, k_ids]) if need_grad else None
    for s_ix in range(S):
        xi = nu[i_ids] + std[i_ids] * eps[s_ix, 0]
        xj = nu[j_ids] + std[j_ids] * eps[s_ix, 1]
        xk = nu[k_ids] + std[k_ids] * eps[s_ix, 2]
        u = xi - xj
        nrm2 = np.einsum("bd,bd->b", u, u)
        ok = nrm2 > COINCIDENT_TOL * COINCIDENT_TOL
        if not np.all(ok):
            logger.warning("skipping %d degenerate sampled triplet(s)",
                           int((~ok).sum()))
        nrm = np.sqrt(np.where(ok, nrm2, 1.0))
        g = xk - 0.5 * (xi + xj)
        s_val = np.einsum("bd,bd->b", g, u) / nrm
        loglik = log_ndtr(s_val)
        total += float(np.sum(np.where(ok, loglik, 0.0)))
        if not need_grad:
            continue
        # r = phi(s)/Phi(s), stable in log space; fold r into the 1/|u|
        # prefactor so each gradient block is a single fused expression
        log_r = -0.5 * s_val * s_val - _LOG_SQRT_2PI - loglik
        r = np.where(ok, np.exp(log_r), 0.0)
        inv_n = r / nrm
        rw = inv_n[:, None] * u                      # r * u / |u|
        rq = inv_n[:, None] * g - (s_val * inv_n / nrm)[:, None] * u
        half_rw = 0.5 * rw
        ds_i = rq - half_rw
        ds_j = -rq - half_rw
        gnu_parts = np.concatenate([ds_i, ds_j, rw], axis=0)
        xh_minus_nu = np.concatenate([xi - nu[i_ids], xj - nu[j_ids],
                                      xk - nu[k_ids]], axis=0)
        _scatter_rows(g_nu, all_ids, gnu_parts)
        _scatter_rows(g_lp, all_ids, gnu_parts * (0.5 * xh_minus_nu))
    inv_s = 1.0 / S
    if need_grad:
        return total * inv_s, g_nu * inv_s, g_lp * inv_s
    return total * inv_s, None, None


def _draw_eps(rng, samples, batch, dim):
    return rng.standard_normal((samples, 3, batch, dim))


def elbo_components(embedding: GaussianEmbedding, triplets: np.ndarray, rng,
                    scale: float = 1.0, samples: int = 1):
    """(negative KL, scaled likelihood estimate) for a triplet batch."""
    trip = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    kl = kl_to_standard_normal(embedding.nu, embedding.log_psi)
    if trip.shape[0] == 0:
        return -kl, 0.0
    eps = _draw_eps(rng, samples, trip.shape[0], embedding.dim)
    lik, _, _ = _likelihood_core(embedding.nu, embedding.log_psi, trip, eps, False)
    return -kl, scale * lik


def elbo_estimate(embedding: GaussianEmbedding, triplets, rng,
                  scale: float = 1.0, samples: int = 1) -> float:
    """Reparameterized ELBO estimate: full closed-form KL plus the batch
    likelihood rescaled by `scale` (use |T| / batch for minibatches)."""
    neg_kl, lik = elbo_components(embedding, triplets, rng, scale, samples)
    return neg_kl + lik


def elbo_gradient(embedding: GaussianEmbedding, triplets, rng,
                  scale: float = 1.0, samples: int = 1):
    """Exact gradient of elbo_estimate under the same noise draws.

    Returns (grad_nu, grad_log_psi), each shaped like the embedding.
    Drawing order matches elbo_estimate, so seeding the two identically
    freezes the same noise.
    """
    trip = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    psi = embedding.psi
    g_nu = -embedding.nu.copy()
    g_lp = -0.5 * (psi - 1.0)
    if trip.shape[0]:
        eps = _draw_eps(rng, samples, trip.shape[0], embedding.dim)
        _, lik_gnu, lik_glp = _likelihood_core(embedding.nu, embedding.log_psi,
                                               trip, eps, True)
        g_nu += scale * lik_gnu
        g_lp += scale * lik_glp
    return g_nu, g_lp


def train(store: TripletStore, config: TrainConfig,
          init: Optional[GaussianEmbedding] = None,
          n_objects: Optional[int] = None,
          stats: Optional[dict] = None) -> GaussianEmbedding:
    """Minibatch stochastic gradient ascent on the ELBO.

    Deterministic given the config seed. Warm-starts from `init` when
    given (repeated retrains resume from the previous embedding). The
    per-step update is the full-ELBO gradient divided by |T|, so the
    learning rate acts per triplet. Aborts with diagnostics when the
    epoch-average ELBO falls below the divergence floor.
    """
    if len(store) == 0:
        raise ValueError("triplet store is empty")
    n = max(n_objects or 0, store.n_objects)
    rng = np.random.default_rng(config.rng_seed)
    if init is not None:
        if init.dim != config.dim or init.n < n:
            raise ValueError("warm-start embedding shape mismatch")
        nu = init.nu.copy()
        log_psi = init.log_psi.copy()
    else:
        start = init_embedding(n, config.dim, rng, psi0=config.init_psi)
        nu, log_psi = start.nu, start.log_psi

    trip_all = store.as_array()
    total = trip_all.shape[0]
    batch = min(config.batch_size, total)
    lr = config.learning_rate
    grad_evals = 0
    epoch_elbo: list[float] = []
    epoch_elbo_frozen: list[float] = []
    for _epoch in range(config.epochs):
        order = rng.permutation(total)
        batch_values = []
        # divergent runs produce transient overflows right before the
        # divergence check aborts; keep them out of the warning stream
        with np.errstate(over="ignore", invalid="ignore"):
            for lo in range(0, total, batch):
                ids = order[lo:lo + batch]
                trip = trip_all[ids]
                scale = total / trip.shape[0]
                eps = _draw_eps(rng, config.samples, trip.shape[0], config.dim)
                lik, lik_gnu, lik_glp = _likelihood_core(nu, log_psi, trip, eps, True)
                grad_evals += trip.shape[0] * config.samples
                kl = kl_to_standard_normal(nu, log_psi)
                batch_values.append(-kl + scale * lik)
                g_nu = (-nu + scale * lik_gnu) / total
                g_lp = (-0.5 * (np.exp(log_psi) - 1.0) + scale * lik_glp) / total
                nu += lr * g_nu
                log_psi += lr * g_lp
        epoch_elbo.append(float(np.mean(batch_values)))
        if stats is not None:
            # fixed-noise full-data value, comparable across epochs
            frozen = elbo_estimate(GaussianEmbedding(nu.copy(), log_psi.copy()),
                                   trip_all, np.random.default_rng(config.rng_seed))
            epoch_elbo_frozen.append(frozen)
        if not epoch_elbo[-1] >= ELBO_DIVERGENCE_FLOOR:  # catches NaN too
            raise TrainingDivergedError(
                f"epoch {_epoch}: ELBO {epoch_elbo[-1]:.3g} below floor "
                f"{ELBO_DIVERGENCE_FLOOR:.0e} (lr={lr}, batch={batch}, "
                f"|T|={total})")
    if stats is not None:
        stats["triplet_grad_evals"] = grad_evals
        stats["epoch_elbo"] = epoch_elbo
        stats["epoch_elbo_frozen"] = epoch_elbo_frozen
    return GaussianEmbedding(nu=nu, log_psi=log_psi)


def triplet_accuracy(nu: np.ndarray, triplets) -> float:
    """Fraction of triplets (i, j; k) with ||nu_i - nu_k|| < ||nu_j - nu_k||;
    exact ties count one half."""
    trip = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    if trip.shape[0] == 0:
        raise ValueError("holdout is empty")
    nu = np.asarray(nu, dtype=np.float64)
    di = np.linalg.norm(nu[trip[:, 0]] - nu[trip[:, 2]], axis=1)
    dj = np.linalg.norm(nu[trip[:, 1]] - nu[trip[:, 2]], axis=1)
    return float(np.mean(np.where(di < dj, 1.0, np.where(di == dj, 0.5, 0.0))))


def kfold_accuracy(triplets: np.ndarray, n_objects: int, config: TrainConfig,
                   folds: int = 10, seed: int = 0) -> list:
    """k-fold cross-validated holdout triplet accuracy."""
    trip = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    rng = np.random.default_rng(seed)
    order = rng.permutation(trip.shape[0])
    parts = np.array_split(order, folds)
    scores = []
    for f in range(folds):
        test_ids = parts[f]
        train_ids = np.concatenate([parts[g] for g in range(folds) if g != f])
        store = TripletStore(n_objects=n_objects)
        for row in trip[train_ids]:
            store.append(TripletObservation(int(row[0]), int(row[1]), int(row[2])))
        emb = train(store, config, n_objects=n_objects)
        scores.append(triplet_accuracy(emb.nu, trip[test_ids]))
    return scores
