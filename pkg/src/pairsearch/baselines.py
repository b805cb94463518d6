"""Discrete-posterior search strategies used as benchmark baselines.

All three maintain an explicit posterior P over the n candidate targets,
updated by Bayes' rule with the probit answer likelihood. They differ in
query selection:

* information gain: exhaustively scores all n(n-1)/2 pairs by
  H(P) - E_y[H(P | y)] and picks the best (O(n^3) per step);
* edge cutting: a fast surrogate for adaptive equivalence-class
  splitting. Candidate pairs (a, b) are "edges" weighted p_a * p_b; a
  query's score is the expected weight of edges it cuts, where an edge
  is cut when its endpoints lie on opposite sides of the query's
  bisecting hyperplane (i.e., they predict different noiseless answers).
  That expectation equals 2 q (1 - q) with q the posterior mass on the
  positive side, so the rule favors even mass splits at O(n) per pair;
* random: uniform distinct pair.

Ties are always broken lexicographically over pairs (i < j).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .exceptions import ProtocolError


@dataclass
class PairTables:
    """Precomputed per-pair geometry against every candidate target.

    pairs: (P, 2) int array of (i, j) with i < j, lexicographic order.
    like_i: (P, n) probability that the answer names i when the target
    is candidate t (probit likelihood).
    """

    pairs: np.ndarray
    like_i: np.ndarray

    @classmethod
    def build(cls, vectors: np.ndarray, sigma_eps: float) -> "PairTables":
        X = np.asarray(vectors, dtype=np.float64)
        n = X.shape[0]
        ii, jj = np.triu_indices(n, k=1)
        pairs = np.stack([ii, jj], axis=1)
        diff = X[ii] - X[jj]
        dist = np.linalg.norm(diff, axis=1)
        dist[dist == 0] = 1.0  # coincident pair: signed distance 0 for all t
        mid = 0.5 * (X[ii] + X[jj])
        # signed distance of every candidate target to every pair's plane
        s = (X @ diff.T - np.einsum("pd,pd->p", mid, diff)) / dist
        s = s.T  # (P, n)
        if sigma_eps == 0.0:
            like = np.where(s > 0, 1.0, np.where(s == 0, 0.5, 0.0))
        else:
            like = ndtr(s / sigma_eps)
        return cls(pairs=pairs, like_i=like)

    @property
    def n(self) -> int:
        return self.like_i.shape[1]

    def pair_index(self, i: int, j: int) -> int:
        a, b = (i, j) if i < j else (j, i)
        n = self.n
        # rows before a: (n-1) + (n-2) + ... + (n-a)
        return a * (2 * n - a - 1) // 2 + (b - a - 1)


def uniform_posterior(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def likelihood_row(vectors: np.ndarray, i: int, j: int,
                   sigma_eps: float) -> np.ndarray:
    """P(answer = min(i,j) | target = t) for every candidate t, O(n d)."""
    X = np.asarray(vectors, dtype=np.float64)
    a, b = (i, j) if i < j else (j, i)
    diff = X[a] - X[b]
    dist = float(np.linalg.norm(diff))
    if dist == 0.0:
        return np.full(X.shape[0], 0.5)
    mid = 0.5 * (X[a] + X[b])
    s = (X - mid) @ diff / dist
    if sigma_eps == 0.0:
        return np.where(s > 0, 1.0, np.where(s == 0, 0.5, 0.0))
    return ndtr(s / sigma_eps)


def bayes_update(p: np.ndarray, i: int, j: int, winner: int,
                 vectors: Optional[np.ndarray] = None,
                 sigma_eps: Optional[float] = None,
                 tables: Optional[PairTables] = None) -> np.ndarray:
    """Posterior after observing `winner` for the query (i, j).

    p'_t is proportional to p_t * P(winner | target = t); pass `tables`
    to reuse precomputed likelihoods (features and noise are then fixed),
    or `vectors` + `sigma_eps` to compute the single row on demand.
    """
    if tables is not None:
        row = tables.like_i[tables.pair_index(i, j)]
    else:
        row = likelihood_row(vectors, i, j, sigma_eps)
    a = min(i, j)
    like = row if winner == a else 1.0 - row
    post = p * like
    total = float(post.sum())
    if total <= 0.0 or not np.isfinite(total):
        raise FloatingPointError("posterior mass underflow in Bayes update")
    return post / total


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def select_ig(p: np.ndarray, vectors: Optional[np.ndarray] = None,
              sigma_eps: Optional[float] = None,
              tables: Optional[PairTables] = None):
    """Pair maximizing expected information gain, scored exactly over all
    pairs (lexicographic tie-break)."""
    if tables is None:
        tables = PairTables.build(vectors, sigma_eps)
    L = tables.like_i
    w1 = L * p  # joint mass of (answer = i, target = t)
    w0 = (1.0 - L) * p
    s1 = w1.sum(axis=1)
    s0 = w0.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        post1 = np.where(s1[:, None] > 0, w1 / np.where(s1 == 0, 1, s1)[:, None], 0)
        post0 = np.where(s0[:, None] > 0, w0 / np.where(s0 == 0, 1, s0)[:, None], 0)
        h1 = -np.sum(np.where(post1 > 0, post1 * np.log(post1), 0.0), axis=1)
        h0 = -np.sum(np.where(post0 > 0, post0 * np.log(post0), 0.0), axis=1)
    expected_h = s1 * h1 + s0 * h0
    gain = _entropy(p) - expected_h
    best = int(np.argmax(gain))  # first maximum = lexicographic winner
    i, j = tables.pairs[best]
    return int(i), int(j), float(gain[best])


def select_ec2(p: np.ndarray, vectors: Optional[np.ndarray] = None,
               sigma_eps: Optional[float] = None,
               tables: Optional[PairTables] = None):
    """Edge-cutting surrogate: maximize 2 q (1 - q), q = mass predicted to
    answer i (see module docstring for the exact objective)."""
    if tables is None:
        tables = PairTables.build(vectors, sigma_eps)
    sides = tables.like_i > 0.5
    q = np.where(sides, p, 0.0).sum(axis=1)
    score = 2.0 * q * (1.0 - q)
    best = int(np.argmax(score))
    i, j = tables.pairs[best]
    return int(i), int(j), float(score[best])


def select_random(rng, n: Optional[int] = None, excluded=frozenset(),
                  vectors: Optional[np.ndarray] = None):
    """Uniformly random distinct pair among non-excluded objects."""
    if n is None:
        n = np.asarray(vectors).shape[0]
    avail = [k for k in range(n) if k not in excluded] if excluded else None
    count = len(avail) if avail is not None else n
    if count < 2:
        raise ProtocolError("fewer than two selectable objects")
    a = int(rng.integers(0, count))
    b = int(rng.integers(0, count - 1))
    if b >= a:
        b += 1
    if avail is not None:
        a, b = avail[a], avail[b]
    return (a, b) if a < b else (b, a)


STRATEGY_IG = "ig"
STRATEGY_EC2 = "ec2"
STRATEGY_RANDOM = "random"


def run_discrete_episode(target: int, oracle, rng, strategy: str,
                         max_steps: int, tables: Optional[PairTables] = None,
                         vectors: Optional[np.ndarray] = None,
                         sigma_eps: Optional[float] = None,
                         log: Optional[list] = None):
    """One episode with a discrete posterior and the argmax stop rule.

    `oracle` is a callable (i, j) -> winner. Pairs may repeat across
    steps (these baselines have no no-reuse rule); the episode ends when
    the target holds the posterior argmax or the step budget runs out.
    The exhaustive strategies need `tables`; the random strategy works
    from raw `vectors` so it scales past the O(n^3)-memory regime.
    Returns (queries_used, success, select_us, update_us); pass `log` to
    collect per-step records in the shared episode-log format.
    """
    import time

    from .search import QueryRecord

    if strategy in (STRATEGY_IG, STRATEGY_EC2) and tables is None:
        raise ValueError(f"{strategy} needs precomputed pair tables")
    n = tables.n if tables is not None else np.asarray(vectors).shape[0]
    p = uniform_posterior(n)
    select_us = []
    update_us = []
    for step in range(1, max_steps + 1):
        t0 = time.perf_counter_ns()
        if strategy == STRATEGY_IG:
            i, j, _ = select_ig(p, tables=tables)
        elif strategy == STRATEGY_EC2:
            i, j, _ = select_ec2(p, tables=tables)
        elif strategy == STRATEGY_RANDOM:
            i, j = select_random(rng, n=n)
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
        select_us.append((time.perf_counter_ns() - t0) / 1e3)
        winner = oracle(i, j)
        t0 = time.perf_counter_ns()
        p = bayes_update(p, i, j, winner, tables=tables,
                         vectors=vectors, sigma_eps=sigma_eps)
        update_us.append((time.perf_counter_ns() - t0) / 1e3)
        if log is not None:
            log.append(QueryRecord(step=step, i=i, j=j, winner=winner,
                                   t_select_us=select_us[-1],
                                   t_update_us=update_us[-1]))
        if int(np.argmax(p)) == target:
            return step, True, select_us, update_us
    return max_steps, False, select_us, update_us
