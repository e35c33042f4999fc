"""IVF-PQ index with redundant assignment and a pluggable list layout."""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .assignment import SINGLE, StrategyConfig, assign
from .coarse import CoarseQuantizer
from .dataset import IP, L2, VectorSet, check_metric, pairwise_distances, top_k
from .pq import DEFAULT_BLOCK_SIZE, PQCodebook
from .seil import FlatLists, Location, SeilLists, finish_candidates, make_lists

MAGIC = b"RAIRSIDX"
FORMAT_VERSION = 1


def default_nlist(n: int) -> int:
    """Power of two closest (in log scale) to sqrt(n)."""
    if n < 1:
        return 1
    return 1 << max(0, round(math.log2(math.sqrt(n))))


def default_k_factor(k: int) -> int:
    return 4 if k >= 100 else 10


@dataclass
class SearchParams:
    k: int = 10
    nprobe: int = 1
    k_factor: Optional[int] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("K must be >= 1")
        if self.nprobe < 1:
            raise ValueError("nprobe must be >= 1")
        if self.k_factor is None:
            self.k_factor = default_k_factor(self.k)
        if self.k_factor < 1:
            raise ValueError("k_factor must be >= 1")

    @property
    def bigk(self) -> int:
        return self.k * self.k_factor


@dataclass
class SearchOutput:
    """Per-query top-K ids/distances plus distance-computation counts.

    Missing results (fewer than K candidates reached) are id -1.
    """

    ids: np.ndarray
    distances: np.ndarray
    scan_dco: np.ndarray
    refine_dco: np.ndarray
    list_switches: int = 0

    def __len__(self):
        return self.ids.shape[0]


class RairsIndex:
    """Coarse quantizer + PQ codebook + inverted lists + raw-vector refine store."""

    def __init__(self, quantizer: CoarseQuantizer, codebook: PQCodebook,
                 strategy: StrategyConfig = None, layout: str = None,
                 block_size: int = DEFAULT_BLOCK_SIZE):
        if codebook.dim != quantizer.dim:
            raise ValueError("quantizer and codebook dimensions differ")
        self.quantizer = quantizer
        self.codebook = codebook
        self.strategy = strategy or StrategyConfig()
        if layout is None:
            layout = "seil" if self.strategy.multiplicity <= 2 else "flat"
        if layout == "seil" and self.strategy.multiplicity > 2:
            raise ValueError("the shared-cell layout is defined for 2-assignment only")
        self.layout = layout
        self.block_size = block_size
        self.lists = make_lists(layout, quantizer.nlist, codebook.M, block_size)
        self._vectors = np.zeros((0, quantizer.dim), dtype=np.float32)
        self._row_ids = np.zeros(0, dtype=np.uint64)
        self._alive = np.zeros(0, dtype=bool)
        self._nrows = 0
        self._row_of = {}

    # -- construction -------------------------------------------------------

    @classmethod
    def train(cls, data, nlist: int = 0, M: int = 0, nbits: int = 4,
              strategy: StrategyConfig = None, layout: str = None,
              block_size: int = DEFAULT_BLOCK_SIZE, metric: str = L2, seed: int = 0,
              iters: int = 25, max_train: int = 0) -> "RairsIndex":
        """Train the quantizer and codebook on ``data`` (nothing is added)."""
        vs = data if isinstance(data, VectorSet) else VectorSet(data)
        check_metric(metric)
        nlist = nlist or default_nlist(vs.count)
        cq = CoarseQuantizer.train(vs, nlist, iters=iters, seed=seed, metric=metric,
                                   max_train=max_train)
        pq = PQCodebook.train(vs, M=M, nbits=nbits, seed=seed, iters=iters)
        return cls(cq, pq, strategy, layout, block_size)

    @property
    def metric(self) -> str:
        return self.quantizer.metric

    @property
    def dim(self) -> int:
        return self.quantizer.dim

    @property
    def nlist(self) -> int:
        return self.quantizer.nlist

    @property
    def ntotal(self) -> int:
        return self.lists.ntotal

    def assign(self, x: np.ndarray) -> np.ndarray:
        return assign(self.quantizer, x, self.strategy)

    def add(self, vectors, ids=None) -> None:
        """Assign, encode and insert a batch; the batch is a single list insert."""
        vs = vectors if isinstance(vectors, VectorSet) else VectorSet(vectors, ids)
        if vs.count == 0:
            return
        if vs.dim != self.dim:
            raise ValueError(f"dimension mismatch: index {self.dim}, vectors {vs.dim}")
        dup = [int(v) for v in vs.ids if int(v) in self._row_of]
        if dup:
            raise ValueError(f"vector id {dup[0]} is already stored")
        assigns = self.assign(vs.data)
        codes = self.codebook.encode(vs.data)
        self.lists.insert(assigns, vs.ids, codes)
        self._append_rows(vs)

    def _append_rows(self, vs: VectorSet) -> None:
        need = self._nrows + vs.count
        if need > self._vectors.shape[0]:
            cap = max(need, 2 * self._vectors.shape[0], 1024)
            grown = np.zeros((cap, self.dim), dtype=np.float32)
            grown[:self._nrows] = self._vectors[:self._nrows]
            self._vectors = grown
            ids = np.zeros(cap, dtype=np.uint64)
            ids[:self._nrows] = self._row_ids[:self._nrows]
            self._row_ids = ids
            alive = np.zeros(cap, dtype=bool)
            alive[:self._nrows] = self._alive[:self._nrows]
            self._alive = alive
        lo, hi = self._nrows, need
        self._vectors[lo:hi] = vs.data
        self._row_ids[lo:hi] = vs.ids
        self._alive[lo:hi] = True
        for r, v in enumerate(vs.ids.tolist(), start=lo):
            self._row_of[v] = r
        self._nrows = hi

    def delete(self, ids) -> list:
        """Remove vectors by id; returns ids that were not stored."""
        ids = [int(v) for v in np.atleast_1d(np.asarray(ids, dtype=np.uint64))]
        missing = self.lists.delete(ids)
        gone = set(missing)
        for v in ids:
            if v in gone:
                continue
            row = self._row_of.pop(v, None)
            if row is not None:
                self._alive[row] = False
        return missing

    def stored_vectors(self) -> VectorSet:
        """Surviving raw vectors with their ids, in insertion order."""
        rows = np.flatnonzero(self._alive[:self._nrows])
        return VectorSet(self._vectors[rows], self._row_ids[rows])

    # -- search -------------------------------------------------------------

    def _prepare(self, queries, params: SearchParams):
        q = queries.data if isinstance(queries, VectorSet) else np.atleast_2d(
            np.asarray(queries, dtype=np.float32))
        if q.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: index {self.dim}, queries {q.shape[1]}")
        if params.k > self.ntotal:
            raise ValueError(f"K={params.k} exceeds the {self.ntotal} stored vectors")
        nprobe = min(params.nprobe, self.nlist)
        luts = self.codebook.build_luts(q, self.metric)
        selected = self.quantizer.search(q, nprobe)
        return q, luts, selected

    def refine(self, q: np.ndarray, cand_ids: np.ndarray, k: int):
        """Exact re-ranking of candidate ids; returns (ids, distances) of length k."""
        out_ids = np.full(k, -1, dtype=np.int64)
        out_d = np.full(k, np.inf if self.metric == L2 else -np.inf)
        if cand_ids.shape[0] == 0:
            return out_ids, out_d
        rows = np.fromiter((self._row_of[v] for v in cand_ids.tolist()), dtype=np.int64,
                           count=cand_ids.shape[0])
        scores = pairwise_distances(self._vectors[rows], q, self.metric)
        sel = top_k(scores, cand_ids, k, self.metric)
        out_ids[:sel.shape[0]] = cand_ids[sel]
        out_d[:sel.shape[0]] = scores[sel]
        return out_ids, out_d

    def _collect(self, q, candidates, params):
        nq = q.shape[0]
        ids = np.empty((nq, params.k), dtype=np.int64)
        dist = np.empty((nq, params.k), dtype=np.float64)
        scan = np.empty(nq, dtype=np.int64)
        ref = np.empty(nq, dtype=np.int64)
        for i, res in enumerate(candidates):
            ids[i], dist[i] = self.refine(q[i], res.ids, params.k)
            scan[i] = res.scan_dco
            ref[i] = res.ids.shape[0]
        return ids, dist, scan, ref

    def search(self, queries, k: int = 10, nprobe: int = 1, k_factor: int = None,
               threads: int = 1) -> SearchOutput:
        """One query at a time: LUT, probe, list scan, exact refinement."""
        params = SearchParams(k, nprobe, k_factor)
        q, luts, selected = self._prepare(queries, params)

        def one(i):
            return self.lists.search(luts[i], selected[i], params.bigk)

        if threads > 1 and q.shape[0] > 1:
            with ThreadPoolExecutor(threads) as pool:
                candidates = list(pool.map(one, range(q.shape[0])))
        else:
            candidates = [one(i) for i in range(q.shape[0])]
        return SearchOutput(*self._collect(q, candidates, params))

    def search_grouped(self, queries, k: int = 10, nprobe: int = 1,
                       k_factor: int = None) -> SearchOutput:
        """Batch search with (query, list) tasks grouped by list.

        Lists are processed in ascending id order and each list serves all its
        queries back to back. Results equal :meth:`search`.
        ``list_switches`` counts how often the scanned list changed.
        """
        params = SearchParams(k, nprobe, k_factor)
        q, luts, selected = self._prepare(queries, params)
        nq = q.shape[0]
        visited = np.zeros((nq, self.nlist), dtype=np.uint8)
        out_d = [[] for _ in range(nq)]
        out_i = [[] for _ in range(nq)]
        dco = np.zeros(nq, dtype=np.int64)
        task_list = selected.ravel()
        task_query = np.repeat(np.arange(nq), selected.shape[1])
        order = np.lexsort((task_query, task_list))
        task_list, task_query = task_list[order], task_query[order]
        bounds = np.flatnonzero(np.diff(task_list)) + 1
        switches = 0
        for group in np.split(np.arange(task_list.shape[0]), bounds):
            if not group.size:
                continue
            lid = int(task_list[group[0]])
            switches += 1
            qs = task_query[group]
            for qi in qs.tolist():
                dco[qi] += self.lists.scan_list(lid, luts[qi], visited[qi], out_d[qi], out_i[qi])
            visited[qs, lid] = 1
        candidates = [finish_candidates(out_d[i], out_i[i], params.bigk, int(dco[i]))
                      for i in range(nq)]
        ids, dist, scan, ref = self._collect(q, candidates, params)
        return SearchOutput(ids, dist, scan, ref, switches)

    # -- reporting ----------------------------------------------------------

    def info(self) -> dict:
        out = {
            "dim": self.dim,
            "nlist": self.nlist,
            "metric": self.metric,
            "M_PQ": self.codebook.M,
            "nbits": self.codebook.nbits,
            "block_size": self.block_size,
            "layout": self.layout,
            "ntotal": self.ntotal,
            "strategy": asdict(self.strategy),
        }
        out.update(self.lists.storage())
        return out

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        header = {
            "dim": self.dim, "nlist": self.nlist, "block_size": self.block_size,
            "M_PQ": self.codebook.M, "nbits": self.codebook.nbits, "metric": self.metric,
            "layout": self.layout, "strategy": asdict(self.strategy),
        }
        arrays = {
            "centroids": self.quantizer.centroids,
            "codebook": self.codebook.sub_centroids,
            "vectors": self._vectors[:self._nrows],
            "row_ids": self._row_ids[:self._nrows],
            "alive": self._alive[:self._nrows].astype(np.uint8),
        }
        locs = [(vid, l.list_id, l.area, l.slot)
                for vid, entries in self.lists.locations.items() for l in entries]
        loc = np.array(locs, dtype=np.int64).reshape(-1, 4)
        arrays["loc_vid"] = loc[:, 0].astype(np.uint64)
        arrays["loc_entry"] = loc[:, 1:]
        for name, arr in self.lists.to_arrays().items():
            arrays["lists." + name] = arr
        _write_container(path, header, arrays)

    @classmethod
    def load(cls, path) -> "RairsIndex":
        header, arrays = _read_container(path)
        cq = CoarseQuantizer(arrays["centroids"], header["metric"])
        pq = PQCodebook(arrays["codebook"])
        strategy = StrategyConfig(**header["strategy"])
        self = cls(cq, pq, strategy, header["layout"], header["block_size"])
        locations = {}
        for vid, (lst, area, slot) in zip(arrays["loc_vid"].tolist(),
                                          arrays["loc_entry"].tolist()):
            locations.setdefault(vid, []).append(Location(lst, area, slot))
        list_arrays = {k[len("lists."):]: v for k, v in arrays.items() if k.startswith("lists.")}
        lists_cls = SeilLists if header["layout"] == "seil" else FlatLists
        self.lists = lists_cls.from_arrays(cq.nlist, pq.M, header["block_size"], list_arrays,
                                           locations)
        vectors = arrays["vectors"]
        self._vectors = vectors.copy()
        self._row_ids = arrays["row_ids"].copy()
        self._alive = arrays["alive"].astype(bool)
        self._nrows = vectors.shape[0]
        self._row_of = {int(v): r for r, v in enumerate(self._row_ids.tolist()) if self._alive[r]}
        return self


# -- binary container -------------------------------------------------------
# magic | u32 version | u32 header length | JSON header | u32 array count |
# per array: u16 name length, name, u8 dtype length, dtype str, u8 ndim,
# u64 shape[ndim], raw little-endian bytes.

def _write_container(path, header: dict, arrays: dict) -> None:
    hdr = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(hdr)))
        f.write(hdr)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr)
            dt = arr.dtype.newbyteorder("<") if arr.dtype.itemsize > 1 else arr.dtype
            arr = arr.astype(dt, copy=False)
            nb = name.encode()
            ds = dt.str.encode()
            f.write(struct.pack("<H", len(nb)) + nb)
            f.write(struct.pack("<B", len(ds)) + ds)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(arr.tobytes())


def _read_container(path):
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:8] != MAGIC:
        raise ValueError(f"{path}: not an index file (bad magic)")
    version, hlen = struct.unpack_from("<II", buf, 8)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    pos = 16
    header = json.loads(buf[pos:pos + hlen])
    pos += hlen
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    arrays = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + ln].decode()
        pos += ln
        (ld,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        dt = np.dtype(buf[pos:pos + ld].decode())
        pos += ld
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}Q", buf, pos)
        pos += 8 * ndim
        nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        if pos + nbytes > len(buf):
            raise ValueError(f"{path}: truncated array {name!r}")
        arrays[name] = np.frombuffer(buf, dtype=dt, count=int(np.prod(shape)), offset=pos
                                     ).reshape(shape).astype(dt.newbyteorder("="))
        pos += nbytes
    return header, arrays


__all__ = ["RairsIndex", "SearchParams", "SearchOutput", "default_nlist",
           "default_k_factor", "IP", "L2", "SINGLE"]
