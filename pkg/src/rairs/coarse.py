"""k-means training and the IVF coarse quantizer."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import IP, L2, VectorSet, check_metric

log = logging.getLogger(__name__)

_CHUNK = 4096


def sq_dists(x: np.ndarray, c: np.ndarray, x_norms: np.ndarray = None) -> np.ndarray:
    """Squared L2 distances between rows of ``x`` and ``c`` (float64, >= 0)."""
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x_norms is None:
        x_norms = np.einsum("ij,ij->i", x, x)
    d = x @ c.T
    d *= -2.0
    d += x_norms[:, None]
    d += np.einsum("ij,ij->i", c, c)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    diff = x - centers[0]
    closest = np.einsum("ij,ij->i", diff, diff)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.uniform(0.0, total)))
            idx = min(idx, n - 1)
        centers[i] = x[idx]
        diff = x - centers[i]
        np.minimum(closest, np.einsum("ij,ij->i", diff, diff), out=closest)
    return centers


def _objective(x, centers, labels) -> float:
    diff = x - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    objective: list = field(default_factory=list)


def kmeans(x: np.ndarray, k: int, iters: int = 25, seed: int = 0) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    ``objective[t]`` is the sum of squared distances after the t-th
    assignment step; it is non-increasing. A cluster that ends up empty is
    re-seeded with the point farthest from its current centroid.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(x, k, rng)
    xx = np.einsum("ij,ij->i", x, x)
    objective = []
    labels = None
    for _ in range(iters):
        d = sq_dists(x, centers, xx)
        labels = d.argmin(1)
        objective.append(_objective(x, centers, labels))
        counts = np.bincount(labels, minlength=k)
        sums = np.stack([np.bincount(labels, weights=x[:, j], minlength=k)
                         for j in range(x.shape[1])], axis=1)
        new = centers.copy()
        nz = counts > 0
        new[nz] = sums[nz] / counts[nz, None]
        empty = np.flatnonzero(~nz)
        if empty.size:
            # re-seed from the points farthest from their updated centroid
            own = ((x - new[labels]) ** 2).sum(1)
            far = np.argsort(-own, kind="stable")[:empty.size]
            new[empty] = x[far]
        if np.array_equal(new, centers):
            break
        centers = new
    # final assignment against the returned centroids
    d = sq_dists(x, centers, xx)
    labels = d.argmin(1)
    final = _objective(x, centers, labels)
    if not objective or final != objective[-1]:
        objective.append(final)
    return KMeansResult(centers, labels, objective)


class CoarseQuantizer:
    """``nlist`` IVF centroids with an exhaustive nearest-lists query."""

    def __init__(self, centroids: np.ndarray, metric: str = L2):
        c = np.ascontiguousarray(centroids, dtype=np.float32)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("centroids must be a non-empty 2-d array")
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids contain NaN/Inf")
        self.centroids = c
        self.metric = check_metric(metric)
        self._c64 = c.astype(np.float64)
        self._norms = (self._c64 ** 2).sum(1)

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    @classmethod
    def train(cls, data, nlist: int, iters: int = 25, seed: int = 0,
              metric: str = L2, max_train: int = 0) -> "CoarseQuantizer":
        x = data.data if isinstance(data, VectorSet) else np.asarray(data)
        if x.shape[0] < nlist:
            raise ValueError(f"need at least nlist={nlist} training vectors, got {x.shape[0]}")
        if max_train and x.shape[0] > max_train:
            rng = np.random.default_rng(seed)
            x = x[np.sort(rng.choice(x.shape[0], max_train, replace=False))]
        res = kmeans(x, nlist, iters=iters, seed=seed)
        log.debug("coarse k-means objective %s", res.objective)
        return cls(res.centroids, metric)

    def scores(self, x: np.ndarray) -> np.ndarray:
        """(n, nlist) ranking keys: smaller is nearer for both metrics."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        ip = x @ self._c64.T
        if self.metric == IP:
            return -ip
        d = (x * x).sum(1)[:, None] - 2.0 * ip + self._norms[None, :]
        np.maximum(d, 0.0, out=d)
        return d

    def search(self, x: np.ndarray, m: int) -> np.ndarray:
        """Nearest ``m`` list ids per row, nearest first, ties by list id."""
        if not 1 <= m <= self.nlist:
            raise ValueError(f"m={m} must be in [1, {self.nlist}]")
        x = np.atleast_2d(x)
        if x.shape[0] > _CHUNK:
            return np.concatenate([self.search(x[i:i + _CHUNK], m)
                                   for i in range(0, x.shape[0], _CHUNK)])
        return self.rank(self.scores(x), m)

    def rank(self, s: np.ndarray, m: int) -> np.ndarray:
        """First ``m`` columns of ``s`` in ascending order, ties by column id."""
        ids = np.broadcast_to(np.arange(s.shape[1]), s.shape)
        if m == s.shape[1]:
            return np.lexsort((ids, s), axis=1)
        part = np.argpartition(s, m - 1, axis=1)[:, :m]
        vals = np.take_along_axis(s, part, 1)
        out = np.take_along_axis(part, np.lexsort((part, vals), axis=1), 1)
        # rows where a tie straddles the cut need the id tie-break over all lists
        kth = vals.max(1)
        ambiguous = np.flatnonzero((s <= kth[:, None]).sum(1) > m)
        for i in ambiguous:
            out[i] = np.lexsort((ids[i], s[i]))[:m]
        return out

    def find_nearest_lists(self, q: np.ndarray, m: int) -> np.ndarray:
        return self.search(np.asarray(q)[None, :], m)[0]
