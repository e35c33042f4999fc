"""Product quantization: training, encoding, lookup tables, block scan."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .coarse import kmeans
from .dataset import IP, L2, VectorSet, check_metric
from .kernels import INVALID_ID

DEFAULT_BLOCK_SIZE = 32


class PQCodebook:
    """``M`` sub-quantizers with ``2**nbits`` sub-centroids each.

    Vectors are encoded directly (not as residuals to a coarse centroid).
    """

    def __init__(self, sub_centroids: np.ndarray):
        sc = np.ascontiguousarray(sub_centroids, dtype=np.float32)
        if sc.ndim != 3:
            raise ValueError("sub_centroids must have shape (M, ksub, dsub)")
        ksub = sc.shape[1]
        nbits = int(ksub).bit_length() - 1
        if ksub != 1 << nbits or not 1 <= nbits <= 8:
            raise ValueError("ksub must be a power of two between 2 and 256")
        self.sub_centroids = sc
        self.nbits = nbits

    @property
    def M(self) -> int:
        return self.sub_centroids.shape[0]

    @property
    def ksub(self) -> int:
        return self.sub_centroids.shape[1]

    @property
    def dsub(self) -> int:
        return self.sub_centroids.shape[2]

    @property
    def dim(self) -> int:
        return self.M * self.dsub

    @classmethod
    def train(cls, data, M: int = 0, nbits: int = 4, seed: int = 0,
              iters: int = 25, max_train: int = 65536) -> "PQCodebook":
        """Independent k-means per sub-vector group. ``M=0`` means ``dim // 2``."""
        x = data.data if isinstance(data, VectorSet) else np.asarray(data, dtype=np.float32)
        n, dim = x.shape
        M = M or max(1, dim // 2)
        if dim % M:
            raise ValueError(f"M={M} must divide the dimension {dim}")
        if not 1 <= nbits <= 8:
            raise ValueError("nbits must be in [1, 8]")
        ksub = 1 << nbits
        if n < ksub:
            raise ValueError(f"need at least {ksub} training vectors, got {n}")
        if max_train and n > max_train:
            rng = np.random.default_rng(seed)
            x = x[np.sort(rng.choice(n, max_train, replace=False))]
        dsub = dim // M
        sc = np.empty((M, ksub, dsub), dtype=np.float32)
        for m in range(M):
            sub = x[:, m * dsub:(m + 1) * dsub]
            sc[m] = kmeans(sub, ksub, iters=iters, seed=seed + m).centroids
        return cls(sc)

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Codes of shape (n, M); nearest sub-centroid, ties to the smaller index."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float32))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected dim {self.dim}, got {x.shape[1]}")
        codes = np.empty((x.shape[0], self.M), dtype=np.uint8)
        sc = self.sub_centroids.astype(np.float64)
        step = max(1, (1 << 22) // (self.ksub * self.dim))
        for lo in range(0, x.shape[0], step):
            xs = x[lo:lo + step].astype(np.float64).reshape(-1, self.M, 1, self.dsub)
            diff = xs - sc[None]
            d = np.einsum("nmkd,nmkd->nmk", diff, diff)
            # argmin returns the first minimum -> smaller index on ties
            codes[lo:lo + step] = d.argmin(2)
        return codes

    def decode(self, codes: np.ndarray) -> np.ndarray:
        codes = np.atleast_2d(codes)
        parts = [self.sub_centroids[m][codes[:, m]] for m in range(self.M)]
        return np.concatenate(parts, axis=1)

    def build_lut(self, q: np.ndarray, metric: str = L2) -> np.ndarray:
        """(M, ksub) float32 table; smaller accumulated value is better.

        L2 entries are squared sub-distances. For inner product the entries
        are negated dot products so the same min-scan serves both metrics.
        """
        return self.build_luts(np.asarray(q)[None, :], metric)[0]

    def build_luts(self, queries: np.ndarray, metric: str = L2) -> np.ndarray:
        check_metric(metric)
        q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if q.shape[1] != self.dim:
            raise ValueError(f"expected dim {self.dim}, got {q.shape[1]}")
        nq = q.shape[0]
        qs = q.reshape(nq, self.M, 1, self.dsub)
        sc = self.sub_centroids.astype(np.float64)[None]
        if metric == L2:
            diff = qs - sc
            lut = np.einsum("qmkd,qmkd->qmk", diff, diff)
        else:
            lut = -np.einsum("qmd,mkd->qmk", q.reshape(nq, self.M, self.dsub), sc[0])
        return np.ascontiguousarray(lut, dtype=np.float32)


def adc_distance(lut: np.ndarray, code) -> np.float32:
    """Scalar asymmetric distance of one code, accumulated in float32."""
    acc = np.float32(0.0)
    for m, c in enumerate(code):
        acc = np.float32(acc + lut[m, int(c)])
    return acc


@dataclass
class PackedBlock:
    """A fixed-size group of codes with stored ids; padding uses ``INVALID_ID``."""

    codes: np.ndarray
    ids: np.ndarray

    @classmethod
    def pack(cls, codes: np.ndarray, ids: np.ndarray,
             block_size: int = DEFAULT_BLOCK_SIZE) -> "PackedBlock":
        n = codes.shape[0]
        if n > block_size:
            raise ValueError(f"{n} items do not fit a block of {block_size}")
        c = np.zeros((block_size, codes.shape[1]), dtype=np.uint8)
        i = np.full(block_size, INVALID_ID, dtype=np.uint64)
        c[:n] = codes
        i[:n] = ids
        return cls(c, i)

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    @property
    def valid_count(self) -> int:
        return int((self.ids != INVALID_ID).sum())


class DcoCounter:
    """Running count of approximate distance computations."""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)


def scan_block(lut: np.ndarray, block: PackedBlock, counter: DcoCounter = None):
    """Distances of the valid slots of one block.

    Returns ``(stored_ids, distances)`` in slot order. Padding and tombstoned
    slots are skipped and never counted.
    """
    dist, ids = kernels.scan_codes(lut, np.ascontiguousarray(block.codes),
                                   np.ascontiguousarray(block.ids))
    if counter is not None:
        counter.add(ids.shape[0])
    return ids, dist


__all__ = ["PQCodebook", "PackedBlock", "scan_block", "adc_distance",
           "DcoCounter", "DEFAULT_BLOCK_SIZE", "L2", "IP"]
