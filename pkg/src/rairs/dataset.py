"""Vector datasets: texmex-style file I/O, synthetic data, exact kNN.

fvecs / bvecs / ivecs records are little-endian: an int32 dimension ``d``
followed by ``d`` payload elements (float32 / uint8 / int32).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MAX_VECTOR_ID = 1 << 48

L2 = "l2"
IP = "ip"
METRICS = (L2, IP)


class FormatError(ValueError):
    """Malformed vector file (truncated record, bad header)."""


class DimensionMismatchError(ValueError):
    pass


def check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")
    return metric


@dataclass
class VectorSet:
    """``n`` float32 vectors of dimension ``dim`` with stable 64-bit ids."""

    data: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("vectors contain NaN or Inf components")
        if self.ids is None:
            ids = np.arange(data.shape[0], dtype=np.uint64)
        else:
            ids = np.asarray(self.ids)
            if ids.ndim != 1 or ids.shape[0] != data.shape[0]:
                raise ValueError("ids must be a 1-d array aligned with the rows")
            if ids.dtype.kind == "i" and ids.size and ids.min() < 0:
                raise ValueError("vector ids must be non-negative")
            ids = ids.astype(np.uint64)
        if ids.size:
            if ids.max() >= MAX_VECTOR_ID:
                raise ValueError("vector ids must be < 2**48")
            if np.unique(ids).size != ids.size:
                raise ValueError("vector ids must be unique")
        self.data = data
        self.ids = ids

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def count(self) -> int:
        return self.data.shape[0]

    def __len__(self):
        return self.count

    def subset(self, rows) -> "VectorSet":
        return VectorSet(self.data[rows], self.ids[rows])


@dataclass
class GroundTruth:
    """Per-query exact top-K ids (sorted best first) and their distances.

    Distances are squared L2 or inner products depending on ``metric``.
    """

    ids: np.ndarray
    distances: np.ndarray
    metric: str = L2

    @property
    def k(self) -> int:
        return self.ids.shape[1]

    def __len__(self):
        return self.ids.shape[0]


# -- file formats -----------------------------------------------------------

_PAYLOAD = {
    "fvecs": np.dtype("<f4"),
    "bvecs": np.dtype("u1"),
    "ivecs": np.dtype("<i4"),
}


def format_from_path(path) -> str:
    ext = os.path.splitext(str(path))[1].lstrip(".").lower()
    if ext not in _PAYLOAD:
        raise FormatError(f"cannot infer vector format from {path!r}")
    return ext


def read_vecs(path, fmt: Optional[str] = None) -> np.ndarray:
    """Read a whole fvecs/bvecs/ivecs file into an ``(n, d)`` array."""
    fmt = fmt or format_from_path(path)
    if fmt not in _PAYLOAD:
        raise FormatError(f"unknown vector format {fmt!r}")
    payload = _PAYLOAD[fmt]
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return np.zeros((0, 0), dtype=payload)
    if raw.size < 4:
        raise FormatError(f"truncated record header at byte offset 0 in {path}")
    dim = int(raw[:4].view("<i4")[0])
    if dim <= 0:
        raise FormatError(f"invalid dimension {dim} at byte offset 0 in {path}")
    rec = 4 + dim * payload.itemsize
    n, tail = divmod(raw.size, rec)
    if tail:
        raise FormatError(
            f"truncated record at byte offset {n * rec} in {path} "
            f"({tail} of {rec} bytes present)"
        )
    records = raw.reshape(n, rec)
    dims = records[:, :4].copy().view("<i4").ravel()
    bad = np.flatnonzero(dims != dim)
    if bad.size:
        i = int(bad[0])
        raise DimensionMismatchError(
            f"record {i} at byte offset {i * rec} has dimension {int(dims[i])}, "
            f"expected {dim}"
        )
    body = np.ascontiguousarray(records[:, 4:])
    return body.view(payload).reshape(n, dim).astype(payload.newbyteorder("="))


def load_vectors(path, fmt: Optional[str] = None) -> VectorSet:
    """Load a base/query file as a VectorSet with ids ``0..n-1``.

    bvecs bytes are widened to float32. Use :func:`read_vecs` for ivecs
    ground-truth files.
    """
    fmt = fmt or format_from_path(path)
    if fmt == "ivecs":
        raise FormatError("ivecs holds integer lists; use read_vecs/load_ground_truth")
    arr = read_vecs(path, fmt)
    return VectorSet(arr.astype(np.float32))


def write_vecs(path, array, fmt: Optional[str] = None) -> None:
    fmt = fmt or format_from_path(path)
    payload = _PAYLOAD[fmt]
    arr = np.asarray(array)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d array")
    n, dim = arr.shape
    out = np.empty((n, 4 + dim * payload.itemsize), dtype=np.uint8)
    out[:, :4] = np.full((n, 1), dim, dtype="<i4").view(np.uint8)
    out[:, 4:] = np.ascontiguousarray(arr, dtype=payload).view(np.uint8).reshape(n, -1)
    out.tofile(path)


def save_vectors(path, vs: VectorSet) -> None:
    write_vecs(path, vs.data, "fvecs")


def load_ground_truth(path) -> np.ndarray:
    return read_vecs(path, "ivecs").astype(np.int64)


# -- synthetic data ---------------------------------------------------------

def generate_synthetic(n: int, dim: int, nclusters: int, seed: int = 0,
                       spread: float = 0.05) -> VectorSet:
    """Gaussian blobs around centers drawn uniformly in the unit cube.

    Points are assigned to centers round-robin, so cluster sizes differ by at
    most one.
    """
    if not n >= nclusters >= 1:
        raise ValueError("need n >= nclusters >= 1")
    if dim < 1:
        raise ValueError("dim must be positive")
    if spread < 0:
        raise ValueError("spread must be non-negative")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, 1.0, size=(nclusters, dim))
    noise = rng.normal(0.0, 1.0, size=(n, dim)) * spread
    data = centers[np.arange(n) % nclusters] + noise
    return VectorSet(data.astype(np.float32))


def synthetic_split(n: int, nq: int, dim: int, nclusters: int, seed: int = 0,
                    spread: float = 0.05):
    """Base and query sets drawn from the same blobs.

    ``n + nq`` points are generated and a seeded random ``nq`` of them become
    queries. Base ids are 0..n-1, query ids 0..nq-1.
    """
    if nq < 1:
        raise ValueError("nq must be positive")
    allv = generate_synthetic(n + nq, dim, nclusters, seed=seed, spread=spread)
    perm = np.random.default_rng([seed, 1]).permutation(n + nq)
    return VectorSet(allv.data[perm[:n]]), VectorSet(allv.data[perm[n:]])


# -- exact search -----------------------------------------------------------

def pairwise_distances(rows: np.ndarray, q: np.ndarray, metric: str = L2) -> np.ndarray:
    """Exact float64 scores of ``rows`` against one query.

    Squared L2 for ``l2``, inner product for ``ip``. This is the single exact
    scoring routine shared by the oracle and the refinement stage so their
    tie behavior agrees.
    """
    rows = np.asarray(rows, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if metric == L2:
        diff = rows - q
        return np.einsum("ij,ij->i", diff, diff)
    return rows @ q


def rank_order(scores: np.ndarray, ids: np.ndarray, metric: str = L2) -> np.ndarray:
    """Indices sorting by best score first, ties by ascending id."""
    key = scores if metric == L2 else -scores
    return np.lexsort((ids, key))


def top_k(scores: np.ndarray, ids: np.ndarray, k: int, metric: str = L2) -> np.ndarray:
    """Indices of the ``k`` best entries, ordered, ties by ascending id."""
    n = scores.shape[0]
    if k >= n:
        return rank_order(scores, ids, metric)
    key = scores if metric == L2 else -scores
    kth = np.partition(key, k - 1)[k - 1]
    cand = np.flatnonzero(key <= kth)
    order = np.lexsort((ids[cand], key[cand]))
    return cand[order[:k]]


def exact_knn(base: VectorSet, queries: VectorSet, k: int, metric: str = L2) -> GroundTruth:
    """Brute-force top-k for every query; the recall oracle."""
    check_metric(metric)
    if base.dim != queries.dim:
        raise DimensionMismatchError(f"base dim {base.dim} != query dim {queries.dim}")
    if not 1 <= k <= base.count:
        raise ValueError(f"k={k} must be in [1, {base.count}]")
    out_ids = np.empty((queries.count, k), dtype=np.int64)
    out_d = np.empty((queries.count, k), dtype=np.float64)
    for i, q in enumerate(queries.data):
        scores = pairwise_distances(base.data, q, metric)
        sel = top_k(scores, base.ids, k, metric)
        out_ids[i] = base.ids[sel]
        out_d[i] = scores[sel]
    return GroundTruth(out_ids, out_d, metric)
