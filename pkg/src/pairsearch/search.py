"""Interactive search session: query generation, belief updates, stop rules.

One session = one episode of the Bayesian pairwise search. Each step:

1. compute the most informative hyperplane (through the belief mean,
   normal along the top-variance direction),
2. draw z1 from the belief, mirror it across that hyperplane to get z2,
3. snap z1, z2 to the nearest unused catalog objects (i, j),
4. obtain an answer, update the belief with the rank-one probit step.

Objects are never reused within a session. Two stop rules exist for
simulations: target-in-query (episode ends when the target is one of
the two shown objects) and argmax-posterior (ends when the target has
the highest belief density among all objects). A session with no known
target (human-answered) runs until the caller ends it or the catalog is
exhausted.

Also here: the 1-D recurrence simulator used to exercise the asymptotic
behavior of the update rule in a dense space, and a d-dimensional dense
search where query points are used directly instead of snapping to a
catalog.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .belief import GaussianBelief, adf_update, density_scores, optimal_hyperplane
from .catalog import SpatialIndex
from .embed import effective_noise
from .exceptions import ProtocolError
from .geometry import bisect, reflect

STOP_TARGET_IN_QUERY = "target-in-query"
STOP_ARGMAX_POSTERIOR = "argmax-posterior"

STATUS_RUNNING = "running"
STATUS_FOUND = "found"
STATUS_EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class SearchConfig:
    """Per-session knobs: assumed answer noise, stop rule, step budget."""

    sigma_eps: float
    stop_rule: str = STOP_TARGET_IN_QUERY
    max_steps: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.stop_rule not in (STOP_TARGET_IN_QUERY, STOP_ARGMAX_POSTERIOR):
            raise ValueError(f"unknown stop rule {self.stop_rule!r}")


@dataclass
class QueryRecord:
    step: int
    i: int
    j: int
    winner: Optional[int]
    t_select_us: float
    t_update_us: float


def default_max_steps(n: int) -> int:
    """Simulation default: 10 * ceil(log2 n)."""
    return 10 * max(1, math.ceil(math.log2(max(n, 2))))


def initial_belief_from_features(vectors: np.ndarray) -> GaussianBelief:
    """Empirical mean/covariance prior (+1e-6 I) for the known-features mode."""
    X = np.asarray(vectors, dtype=np.float64)
    mu = X.mean(axis=0)
    sigma = np.cov(X, rowvar=False, bias=False)
    sigma = np.atleast_2d(sigma) + 1e-6 * np.eye(X.shape[1])
    return GaussianBelief(mu, sigma)


def initial_belief_blind(dim: int) -> GaussianBelief:
    """N(0, I) prior matching the embedding prior in the blind setting."""
    return GaussianBelief(np.zeros(dim), np.eye(dim))


def sample_mirror(belief: GaussianBelief, index: SpatialIndex, excluded, rng,
                  psi: Optional[np.ndarray] = None, warm_start=None):
    """Draw the next query pair (i, j).

    z1 ~ N(mu, Sigma); z2 is z1 mirrored across the optimal hyperplane;
    i, j are the nearest unused objects to z1, z2 (j skipping i, which
    always exists while two or more objects remain unused). With `psi`
    given, lookups use per-object Mahalanobis distances.
    Returns (i, j, hyperplane_normal_direction_used).
    """
    if index.n - len(excluded) < 2:
        raise ProtocolError("fewer than two unused objects")
    h_star = optimal_hyperplane(belief, warm_start=warm_start)
    z1 = belief.sample(rng)
    z2 = reflect(z1, h_star)
    if psi is None:
        i = index.nearest_unused(z1, excluded)
        j = index.nearest_unused(z2, excluded | {i})
    else:
        i = index.nearest_unused_mahalanobis(z1, excluded, psi)
        j = index.nearest_unused_mahalanobis(z2, excluded | {i}, psi)
    return i, j, h_star.w


class SearchSession:
    """Single-writer state machine for one search episode.

    `target_id` is only set in simulations; it enables the stop rules.
    Human-answered sessions leave it None and end via mark_found() or
    exhaustion. `psi` switches lookups to Mahalanobis and the update to
    the effective noise that adds the two objects' positional variances
    along the query normal.
    """

    def __init__(self, index: SpatialIndex, config: SearchConfig,
                 belief: Optional[GaussianBelief] = None,
                 target_id: Optional[int] = None,
                 psi: Optional[np.ndarray] = None,
                 rng=None):
        self.index = index
        self.config = config
        self.belief = belief if belief is not None else initial_belief_blind(index.dim)
        self.target_id = target_id
        self.psi = psi
        self.rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
        self.used: set = set()
        self.log: list[QueryRecord] = []
        self.status = STATUS_RUNNING
        self.pending: Optional[tuple] = None
        self._warm_direction = None

    @property
    def step_count(self) -> int:
        return len(self.log)

    def next_query(self):
        """Generate and register the next query pair."""
        if self.status != STATUS_RUNNING:
            raise ProtocolError(f"session is {self.status}")
        if self.pending is not None:
            raise ProtocolError("previous query is still unanswered")
        if self.step_count >= self.config.max_steps:
            self.status = STATUS_EXHAUSTED
            raise ProtocolError("step budget exhausted")
        if self.index.n - len(self.used) < 2:
            self.status = STATUS_EXHAUSTED
            raise ProtocolError("fewer than two unused objects")
        t0 = time.perf_counter_ns()
        i, j, w = sample_mirror(self.belief, self.index, self.used, self.rng,
                                psi=self.psi, warm_start=self._warm_direction)
        t_select = (time.perf_counter_ns() - t0) / 1e3
        self._warm_direction = w
        self.pending = (i, j, t_select)
        return i, j

    def apply_answer(self, winner: int) -> QueryRecord:
        """Record the answer to the pending query and update the belief.

        Pairs whose indexed positions coincide (possible for learned
        embeddings before an object pair has been disambiguated) carry no
        geometric information; their answers are logged without a belief
        update.
        """
        if self.pending is None:
            raise ProtocolError("no query is outstanding")
        i, j, t_select = self.pending
        if winner not in (i, j):
            raise ProtocolError(f"answer {winner} is not in the asked pair ({i}, {j})")
        xi = self.index.vectors[i]
        xj = self.index.vectors[j]
        t_update = 0.0
        if float(np.linalg.norm(xi - xj)) > 1e-12:
            h = bisect(xi, xj)
            if self.psi is not None:
                sigma = effective_noise(self.psi[i], self.psi[j], h.w,
                                        self.config.sigma_eps)
            else:
                sigma = self.config.sigma_eps
            outcome = +1 if winner == i else -1
            t0 = time.perf_counter_ns()
            self.belief = adf_update(self.belief, h, outcome, sigma)
            t_update = (time.perf_counter_ns() - t0) / 1e3
        record = QueryRecord(step=self.step_count + 1, i=i, j=j, winner=winner,
                             t_select_us=t_select, t_update_us=t_update)
        self.log.append(record)
        self.used.update((i, j))
        self.pending = None
        self._check_stop_after_update()
        return record

    def skip_answer(self) -> QueryRecord:
        """Close the pending query without an answer (target was shown)."""
        if self.pending is None:
            raise ProtocolError("no query is outstanding")
        i, j, t_select = self.pending
        record = QueryRecord(step=self.step_count + 1, i=i, j=j, winner=None,
                             t_select_us=t_select, t_update_us=0.0)
        self.log.append(record)
        self.used.update((i, j))
        self.pending = None
        return record

    def step(self, answer_source: Callable[[int, int], int]) -> QueryRecord:
        """One full query/answer/update cycle against an answer source."""
        i, j = self.next_query()
        if (self.config.stop_rule == STOP_TARGET_IN_QUERY
                and self.target_id is not None and self.target_id in (i, j)):
            record = self.skip_answer()
            self.status = STATUS_FOUND
            return record
        record = self.apply_answer(answer_source(i, j))
        if self.status == STATUS_RUNNING and self.step_count >= self.config.max_steps:
            self.status = STATUS_EXHAUSTED
        elif self.status == STATUS_RUNNING and self.index.n - len(self.used) < 2:
            self.status = STATUS_EXHAUSTED
        return record

    def _check_stop_after_update(self):
        if (self.config.stop_rule == STOP_ARGMAX_POSTERIOR
                and self.target_id is not None):
            # measurement, not part of the timed step
            scores = density_scores(self.belief, self.index.vectors)
            if int(np.argmax(scores)) == self.target_id:
                self.status = STATUS_FOUND


@dataclass
class EpisodeResult:
    queries_used: int
    success: bool
    select_us: list
    update_us: list
    log: list

    @property
    def mean_select_us(self) -> float:
        return float(np.mean(self.select_us)) if self.select_us else 0.0

    @property
    def mean_update_us(self) -> float:
        return float(np.mean(self.update_us)) if self.update_us else 0.0


def run_episode(index: SpatialIndex, target_id: int, config: SearchConfig,
                answer_source: Callable[[int, int], int],
                belief: Optional[GaussianBelief] = None,
                psi: Optional[np.ndarray] = None,
                rng=None) -> EpisodeResult:
    """Run one simulated episode to completion."""
    if not 0 <= target_id < index.n:
        raise KeyError(f"target {target_id} not in catalog")
    session = SearchSession(index, config, belief=belief, target_id=target_id,
                            psi=psi, rng=rng)
    while session.status == STATUS_RUNNING:
        session.step(answer_source)
    return EpisodeResult(
        queries_used=session.step_count,
        success=session.status == STATUS_FOUND,
        select_us=[r.t_select_us for r in session.log],
        update_us=[r.t_update_us for r in session.log if r.winner is not None],
        log=session.log,
    )


def write_episode_log(records: Iterable[QueryRecord], session_id, fh) -> None:
    """Line-delimited episode log records."""
    for r in records:
        fh.write(json.dumps({
            "session": session_id, "step": r.step, "i": r.i, "j": r.j,
            "winner": r.winner, "t_select_us": round(r.t_select_us, 3),
            "t_update_us": round(r.t_update_us, 3),
        }) + "\n")


# --- dense-space behavior ---------------------------------------------------

_C = math.sqrt(2.0 / math.pi)


@dataclass
class ConvergenceTrajectory:
    """1-D mean/variance trajectory of the idealized dense-space recurrence."""

    mu: np.ndarray
    sigma2: np.ndarray


def convergence_sim(x_t: float, mu0: float, sigma0sq: float, steps: int,
                    rng) -> ConvergenceTrajectory:
    """Recurrence followed by the update rule when every query hyperplane
    passes through the current mean (unit answer noise):

        sigma2' = sigma2 + beta * sigma2^2,   beta = -c^2 / (sigma2 + 1)
        mu'     = mu + alpha * sigma2 * z,    alpha = c / sqrt(sigma2 + 1)

    with c = sqrt(2/pi) and z = +1 with probability Phi(x_t - mu), else -1.
    The variance path is deterministic and strictly decreasing.
    """
    if sigma0sq <= 0:
        raise ValueError("sigma0sq must be positive")
    mu = np.empty(steps + 1)
    s2 = np.empty(steps + 1)
    mu[0], s2[0] = mu0, sigma0sq
    m, v = float(mu0), float(sigma0sq)
    for k in range(steps):
        alpha = _C / math.sqrt(v + 1.0)
        beta = -(_C * _C) / (v + 1.0)
        p_up = 0.5 * (1.0 + math.erf((x_t - m) / math.sqrt(2.0)))
        z = 1.0 if rng.random() < p_up else -1.0
        m = m + alpha * v * z
        v = v + beta * v * v
        mu[k + 1], s2[k + 1] = m, v
    return ConvergenceTrajectory(mu=mu, sigma2=s2)


def dense_search(x_t, steps: int, sigma_eps: float, rng,
                 belief: Optional[GaussianBelief] = None):
    """d-dimensional search in a dense space: the sampled points z1, z2 are
    used directly as query objects (no catalog snapping), answers follow
    the probit model on x_t. Returns (belief, mu_err, trace) with per-step
    ||mu - x_t|| and Tr(Sigma) histories.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    if belief is None:
        belief = GaussianBelief(np.zeros(x_t.size), np.eye(x_t.size))
    mu_err = np.empty(steps + 1)
    trace = np.empty(steps + 1)
    mu_err[0] = float(np.linalg.norm(belief.mu - x_t))
    trace[0] = float(np.trace(belief.sigma))
    warm = None
    for k in range(steps):
        h_star = optimal_hyperplane(belief, warm_start=warm)
        warm = h_star.w
        z1 = belief.sample(rng)
        s1 = float(h_star.w @ z1) + h_star.b
        if s1 == 0.0:  # z1 exactly on the plane: nudge along the normal
            z1 = z1 + 1e-12 * h_star.w
        z2 = reflect(z1, h_star)
        h = bisect(z1, z2)
        s = float(h.w @ x_t) + h.b
        if sigma_eps == 0.0:
            p = 1.0 if s > 0 else (0.5 if s == 0 else 0.0)
        else:
            p = 0.5 * (1.0 + math.erf(s / (sigma_eps * math.sqrt(2.0))))
        outcome = +1 if rng.random() < p else -1
        belief = adf_update(belief, h, outcome, sigma_eps)
        mu_err[k + 1] = float(np.linalg.norm(belief.mu - x_t))
        trace[k + 1] = float(np.trace(belief.sigma))
    return belief, mu_err, trace
