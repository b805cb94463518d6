"""Session registry, embedding versioning, and persistence for the service.

Sessions run the same belief machinery as simulated searches, but the
answers come from people. A session pins the embedding version that was
current when it started; retraining swaps the served version for new
sessions only. Pairwise outcomes are buffered per session and become
triplets only when the user confirms the target (an abandoned session
has no trustworthy reference object, so it contributes nothing).

Everything on disk lives under one state directory: the triplet log
(line-delimited JSON), the embedding snapshot, and a small meta file
with the version counter. Reloading those files reproduces the service
state exactly.
"""
from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..belief import adf_update
from ..catalog import ObjectSet, SpatialIndex, build_index
from ..embed import (
    GaussianEmbedding,
    TrainConfig,
    TripletObservation,
    TripletStore,
    effective_noise,
    init_embedding,
    train,
)
from ..exceptions import ProtocolError
from ..geometry import bisect
from ..search import initial_belief_blind, sample_mirror

logger = logging.getLogger(__name__)

STATUS_RUNNING = "running"
STATUS_FOUND = "found"
STATUS_ABANDONED = "abandoned"
STATUS_EXHAUSTED = "exhausted"


class StaleQueryError(ProtocolError):
    """The referenced query id is not the outstanding one."""


class InvalidCandidateError(ValueError):
    """The referenced object is not among the current candidates."""


@dataclass
class ServiceConfig:
    dataset: Optional[str] = None
    state_dir: Optional[str] = None
    k: int = 4  # candidates per query (2 or 4)
    sigma_eps: float = 1.0
    use_effective_noise: bool = True  # fold embedding uncertainty into updates
    max_steps: int = 200
    embed_dim: int = 5
    retrain_epochs: int = 50
    seed: int = 0
    session_ttl: float = 86400.0  # idle seconds before a session is abandoned

    def __post_init__(self):
        if self.k not in (2, 4):
            raise ValueError("k must be 2 or 4")


class InteractiveSession:
    """One human-answered search over a pinned embedding version.

    A 4-candidate query is two mirrored pairs from two independent belief
    draws. A click decomposes into one pairwise outcome against each
    non-chosen candidate (ascending id), each applied as a rank-one
    belief update. No object is ever shown twice in a session.
    """

    def __init__(self, session_id: str, index: SpatialIndex,
                 embedding: GaussianEmbedding, version: int,
                 config: ServiceConfig, rng, client_tag: str = ""):
        self.id = session_id
        self.version = version
        self.embedding = embedding
        self.index = index
        self.config = config
        self.client_tag = client_tag
        self.rng = rng
        self.belief = initial_belief_blind(embedding.dim)
        self.psi = embedding.psi
        self.used: set = set()
        self.status = STATUS_RUNNING
        self.steps = 0  # answered queries
        self.outcomes: list = []  # (winner, loser) pairs
        self.created_at = time.time()
        self.updated_at = self.created_at
        self.query_counter = 0
        self.current_query_id: Optional[str] = None
        self.current_candidates: list = []

    def generate_query(self) -> bool:
        """Build the next k candidates; False when the session cannot go on."""
        needed = self.config.k
        if (self.index.n - len(self.used) < needed
                or self.steps >= self.config.max_steps):
            self.status = STATUS_EXHAUSTED
            self.current_query_id = None
            self.current_candidates = []
            return False
        i, j, _ = sample_mirror(self.belief, self.index, self.used, self.rng,
                                psi=self.psi)
        candidates = [i, j]
        if needed == 4:
            i2, j2, _ = sample_mirror(self.belief, self.index,
                                      self.used | {i, j}, self.rng, psi=self.psi)
            candidates.extend([i2, j2])
        self.used.update(candidates)
        self.query_counter += 1
        self.current_query_id = f"q{self.query_counter}"
        self.current_candidates = candidates
        return True

    def answer(self, query_id: str, chosen: int) -> None:
        """Apply one click: the chosen candidate beats every other shown one."""
        if self.status != STATUS_RUNNING:
            raise ProtocolError(f"session is {self.status}")
        if query_id != self.current_query_id:
            raise StaleQueryError(f"query {query_id!r} is not outstanding")
        if chosen not in self.current_candidates:
            raise InvalidCandidateError(
                f"{chosen} is not a candidate of {self.current_query_id}")
        others = sorted(c for c in self.current_candidates if c != chosen)
        nu = self.embedding.nu
        for other in others:
            if float(np.linalg.norm(nu[chosen] - nu[other])) > 1e-12:
                h = bisect(nu[chosen], nu[other])
                if self.config.use_effective_noise:
                    sigma = effective_noise(self.psi[chosen], self.psi[other],
                                            h.w, self.config.sigma_eps)
                else:
                    sigma = self.config.sigma_eps
                self.belief = adf_update(self.belief, h, +1, sigma)
            self.outcomes.append((chosen, other))
        self.steps += 1
        self.updated_at = time.time()
        self.current_query_id = None
        self.current_candidates = []

    def finish(self, target: int) -> list:
        """Close the session; convert buffered outcomes to triplets."""
        if self.status != STATUS_RUNNING:
            raise ProtocolError(f"session is {self.status}")
        if target not in self.current_candidates:
            raise InvalidCandidateError(
                f"target {target} was not among the last query's candidates")
        now = time.time()
        triplets = []
        for winner, loser in self.outcomes:
            if target in (winner, loser):  # defensive; a triplet cannot
                continue                   # reference its own endpoints
            triplets.append(TripletObservation(i=winner, j=loser, k=target,
                                               source=self.id, ts=now))
        self.status = STATUS_FOUND
        self.updated_at = now
        self.current_query_id = None
        self.current_candidates = []
        return triplets


class ServiceState:
    """Catalog + embedding + sessions + triplet store, with persistence."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.lock = threading.RLock()
        self.catalog: Optional[ObjectSet] = None
        self.embedding: Optional[GaussianEmbedding] = None
        self.index: Optional[SpatialIndex] = None
        self.version = 0
        self.store = TripletStore()
        self.sessions: dict = {}
        self._seed_seq = np.random.SeedSequence(config.seed)
        self.load()

    # --- persistence -----------------------------------------------------

    def _paths(self):
        base = Path(self.config.state_dir) if self.config.state_dir else None
        if base is None:
            return None, None, None
        base.mkdir(parents=True, exist_ok=True)
        return base / "embedding.txt", base / "triplets.jsonl", base / "meta.json"

    def load(self) -> None:
        if self.config.dataset:
            self.catalog = ObjectSet.from_csv(self.config.dataset)
        emb_path, trip_path, meta_path = self._paths()
        if self.catalog is None:
            return
        n = self.catalog.n
        if emb_path is not None and emb_path.exists():
            self.embedding = GaussianEmbedding.load(emb_path)
            if self.embedding.n != n:
                raise ValueError("embedding snapshot does not match the catalog")
        else:
            rng = np.random.default_rng(self._seed_seq.spawn(1)[0])
            self.embedding = init_embedding(n, self.config.embed_dim, rng)
        if trip_path is not None and trip_path.exists():
            self.store = TripletStore.load_jsonl(trip_path, n_objects=n)
        else:
            self.store = TripletStore(n_objects=n)
        if meta_path is not None and meta_path.exists():
            with open(meta_path) as fh:
                self.version = int(json.load(fh).get("version", 0))
        self.index = build_index(self.embedding.nu)

    def _save_embedding(self) -> None:
        emb_path, _, meta_path = self._paths()
        if emb_path is not None:
            self.embedding.save(emb_path)
            with open(meta_path, "w") as fh:
                json.dump({"version": self.version}, fh)

    # --- session operations ------------------------------------------------

    @property
    def loaded(self) -> bool:
        return self.catalog is not None

    def expire_stale(self) -> None:
        cutoff = time.time() - self.config.session_ttl
        for sess in self.sessions.values():
            if sess.status == STATUS_RUNNING and sess.updated_at < cutoff:
                sess.status = STATUS_ABANDONED

    def create_session(self, client_tag: str = "") -> InteractiveSession:
        with self.lock:
            rng = np.random.default_rng(self._seed_seq.spawn(1)[0])
            session = InteractiveSession(
                session_id=uuid.uuid4().hex[:12], index=self.index,
                embedding=self.embedding, version=self.version,
                config=self.config, rng=rng, client_tag=client_tag)
            if not session.generate_query():
                raise ProtocolError("catalog too small for a first query")
            self.sessions[session.id] = session
            return session

    def get_session(self, session_id: str) -> InteractiveSession:
        self.expire_stale()
        session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def finish_session(self, session: InteractiveSession, target: int):
        with self.lock:
            triplets = session.finish(target)
            self.store.extend(triplets)
            _, trip_path, _ = self._paths()
            if trip_path is not None:
                self.store.append_jsonl(triplets, trip_path)
            return triplets

    def retrain(self) -> int:
        """Synchronous retrain + index rebuild; new sessions get the new
        version, running ones keep their pinned embedding."""
        with self.lock:
            if len(self.store) == 0:
                raise ProtocolError("triplet store is empty")
            snapshot = TripletStore(n_objects=self.catalog.n)
            snapshot.extend(list(self.store))
            warm = self.embedding
            version_at_start = self.version
        cfg = TrainConfig(dim=warm.dim, epochs=self.config.retrain_epochs,
                          rng_seed=self.config.seed + version_at_start + 1)
        new_embedding = train(snapshot, cfg, init=warm, n_objects=self.catalog.n)
        with self.lock:
            self.version = version_at_start + 1
            self.embedding = new_embedding
            self.index = build_index(new_embedding.nu)
            self._save_embedding()
            return self.version
