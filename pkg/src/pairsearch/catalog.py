"""Object store and spatial index.

The index is a static median-split k-d tree with leaf buckets. Exclusion
(objects already used in a search) is handled during traversal by
skipping excluded ids in leaf scans; the tree is never rebuilt or edited
mid-search. Ties are broken by smallest object id everywhere, and query
node visits are counted so the O(log n) behavior is observable.

Lookups come in two flavors: plain Euclidean, and per-object Mahalanobis
(ν - z)' Ψ^-1 (ν - z) for embeddings that carry positional uncertainty.
Per-object metrics break the triangle-inequality assumptions a k-d tree
relies on, so Mahalanobis lookups use an exhaustive vectorized scan up
to MAHA_EXHAUSTIVE_MAX objects and a Euclidean-shortlist re-rank above.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import MAHA_EXHAUSTIVE_MAX, MIN_PSI
from .exceptions import AllExcludedError

_LEAF_SIZE = 16


@dataclass
class ObjectSet:
    """n objects with d-dimensional feature vectors and optional metadata."""

    vectors: np.ndarray
    labels: Optional[list] = None
    image_refs: Optional[list] = None

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValueError("vectors must be an (n, d) matrix with n >= 2")
        if not np.all(np.isfinite(v)):
            raise ValueError("vectors contain non-finite entries")
        v.setflags(write=False)
        self.vectors = v
        for name in ("labels", "image_refs"):
            val = getattr(self, name)
            if val is not None and len(val) != v.shape[0]:
                raise ValueError(f"{name} length must equal object count")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels else f"object-{i}"

    def image_ref(self, i: int):
        return self.image_refs[i] if self.image_refs else None

    @classmethod
    def from_csv(cls, path) -> "ObjectSet":
        """Read `id,label,f1,...,fd` rows (header required, ids 0..n-1)."""
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if len(header) < 3 or header[0].strip().lower() != "id":
                raise ValueError("expected header starting with 'id,label,f1,...'")
            for row in reader:
                if not row:
                    continue
                rows.append((int(row[0]), row[1], [float(x) for x in row[2:]]))
        rows.sort(key=lambda r: r[0])
        ids = [r[0] for r in rows]
        if ids != list(range(len(rows))):
            raise ValueError("ids must be exactly 0..n-1")
        vectors = np.array([r[2] for r in rows], dtype=np.float64)
        labels = [r[1] for r in rows]
        return cls(vectors=vectors, labels=labels)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "label"] + [f"f{k + 1}" for k in range(self.dim)])
            for i in range(self.n):
                writer.writerow([i, self.label(i)]
                                + [repr(float(x)) for x in self.vectors[i]])


class KdTree:
    """Static k-d tree over an (n, d) point matrix with bucket leaves."""

    def __init__(self, points: np.ndarray, leaf_size: int = _LEAF_SIZE):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be (n, d)")
        self.points = pts
        self.leaf_size = max(1, leaf_size)
        n = pts.shape[0]
        self.idx = np.arange(n)
        # node arrays; children == -1 marks a leaf holding idx[start:end]
        self._axis: list = []
        self._thresh: list = []
        self._left: list = []
        self._right: list = []
        self._start: list = []
        self._end: list = []
        self._build(0, n)
        self.axis = np.asarray(self._axis, dtype=np.int64)
        self.thresh = np.asarray(self._thresh, dtype=np.float64)
        self.left = np.asarray(self._left, dtype=np.int64)
        self.right = np.asarray(self._right, dtype=np.int64)
        self.start = np.asarray(self._start, dtype=np.int64)
        self.end = np.asarray(self._end, dtype=np.int64)
        del self._axis, self._thresh, self._left, self._right, self._start, self._end

    def _new_node(self) -> int:
        self._axis.append(-1)
        self._thresh.append(0.0)
        self._left.append(-1)
        self._right.append(-1)
        self._start.append(0)
        self._end.append(0)
        return len(self._axis) - 1

    def _build(self, lo: int, hi: int) -> int:
        node = self._new_node()
        count = hi - lo
        if count <= self.leaf_size:
            self._start[node], self._end[node] = lo, hi
            return node
        block = self.points[self.idx[lo:hi]]
        spread = block.max(axis=0) - block.min(axis=0)
        axis = int(np.argmax(spread))
        if spread[axis] == 0.0:  # all points identical in this slice
            self._start[node], self._end[node] = lo, hi
            return node
        order = np.argsort(block[:, axis], kind="stable")
        self.idx[lo:hi] = self.idx[lo:hi][order]
        mid = lo + count // 2
        self._axis[node] = axis
        self._thresh[node] = float(self.points[self.idx[mid], axis])
        left = self._build(lo, mid)
        right = self._build(mid, hi)
        self._left[node] = left
        self._right[node] = right
        return node

    def query(self, z, excluded=frozenset()):
        """Nearest non-excluded point: returns (id, dist2, visits).

        Ties on distance go to the smallest id. `visits` counts expanded
        nodes (internal + leaf), the observable query cost.
        """
        z = np.asarray(z, dtype=np.float64)
        best_d2, best_id, visits = self._query_node(0, z, excluded, np.inf, -1, 0)
        if best_id < 0:
            raise AllExcludedError("all objects are excluded")
        return best_id, best_d2, visits

    def _query_node(self, node, z, excluded, best_d2, best_id, visits):
        visits += 1
        if self.left[node] < 0:
            ids = self.idx[self.start[node]:self.end[node]]
            diff = self.points[ids] - z
            d2 = np.einsum("ij,ij->i", diff, diff)
            for k in np.lexsort((ids, d2)):
                oid = int(ids[k])
                if oid in excluded:
                    continue
                dk = float(d2[k])
                if dk < best_d2 or (dk == best_d2 and oid < best_id):
                    best_d2, best_id = dk, oid
                break  # lexsort order: first non-excluded is this leaf's best
            return best_d2, best_id, visits
        axis, thresh = self.axis[node], self.thresh[node]
        gap = z[axis] - thresh
        near, far = (self.left[node], self.right[node]) if gap <= 0 else \
                    (self.right[node], self.left[node])
        best_d2, best_id, visits = self._query_node(near, z, excluded,
                                                    best_d2, best_id, visits)
        if gap * gap <= best_d2:  # <= so equal-distance smaller ids are found
            best_d2, best_id, visits = self._query_node(far, z, excluded,
                                                        best_d2, best_id, visits)
        return best_d2, best_id, visits

    def query_k(self, z, k: int, excluded=frozenset()):
        """k nearest non-excluded ids ordered by (dist2, id)."""
        z = np.asarray(z, dtype=np.float64)
        found: list = []  # kept sorted by (d2, id)

        def scan(node):
            if self.left[node] < 0:
                ids = self.idx[self.start[node]:self.end[node]]
                diff = self.points[ids] - z
                d2 = np.einsum("ij,ij->i", diff, diff)
                for j in range(ids.size):
                    oid = int(ids[j])
                    if oid in excluded:
                        continue
                    item = (float(d2[j]), oid)
                    if len(found) < k:
                        found.append(item)
                        found.sort()
                    elif item < found[-1]:
                        found[-1] = item
                        found.sort()
                return
            axis, thresh = self.axis[node], self.thresh[node]
            gap = z[axis] - thresh
            near, far = (self.left[node], self.right[node]) if gap <= 0 else \
                        (self.right[node], self.left[node])
            scan(near)
            if len(found) < k or gap * gap <= found[-1][0]:
                scan(far)

        scan(0)
        return found


class SpatialIndex:
    """Nearest-unused lookups over an object set (or embedding means)."""

    def __init__(self, vectors: np.ndarray, leaf_size: int = _LEAF_SIZE):
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.tree = KdTree(self.vectors, leaf_size=leaf_size)
        self.last_visits = 0

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def nearest_unused(self, z, excluded=frozenset()) -> int:
        """Id minimizing Euclidean distance to z among non-excluded objects."""
        if len(excluded) >= self.n:
            raise AllExcludedError("all objects are excluded")
        oid, _, visits = self.tree.query(z, excluded)
        self.last_visits = visits
        return oid

    def nearest_unused_mahalanobis(self, z, excluded, psi: np.ndarray) -> int:
        """Id minimizing (v_i - z)' diag(psi_i)^-1 (v_i - z), skipping excluded.

        Exhaustive below MAHA_EXHAUSTIVE_MAX objects (exact); above that, a
        Euclidean shortlist of max(64, 2|excluded| + 2) candidates is
        re-ranked, which keeps at least two non-excluded candidates in play.
        """
        psi = np.asarray(psi, dtype=np.float64)
        if psi.shape != self.vectors.shape:
            raise ValueError("psi must match the indexed vectors' shape")
        if np.min(psi) < MIN_PSI:
            raise ValueError(f"per-object variances must be >= {MIN_PSI}")
        if len(excluded) >= self.n:
            raise AllExcludedError("all objects are excluded")
        z = np.asarray(z, dtype=np.float64)
        if self.n <= MAHA_EXHAUSTIVE_MAX:
            diff = self.vectors - z
            d = np.einsum("ij,ij->i", diff / psi, diff)
            order = np.lexsort((np.arange(self.n), d))
            for oid in order:
                if int(oid) not in excluded:
                    return int(oid)
            raise AllExcludedError("all objects are excluded")
        k = max(64, 2 * len(excluded) + 2)
        shortlist = self.tree.query_k(z, k, excluded)
        ids = np.array([oid for _, oid in shortlist], dtype=np.int64)
        diff = self.vectors[ids] - z
        d = np.einsum("ij,ij->i", diff / psi[ids], diff)
        best = np.lexsort((ids, d))[0]
        return int(ids[best])


def build_index(objects: ObjectSet | np.ndarray, leaf_size: int = _LEAF_SIZE) -> SpatialIndex:
    """One-time O(n log n) index construction, deterministic in input order."""
    vectors = objects.vectors if isinstance(objects, ObjectSet) else objects
    return SpatialIndex(vectors, leaf_size=leaf_size)


def nearest_unused(index: SpatialIndex, z, excluded=frozenset()) -> int:
    return index.nearest_unused(z, excluded)


def nearest_unused_mahalanobis(index: SpatialIndex, z, excluded, psi) -> int:
    return index.nearest_unused_mahalanobis(z, excluded, psi)
