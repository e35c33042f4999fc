"""Inverted-list storage: the shared-cell (SEIL) layout and the plain layout.

A *cell* ``(i, j)`` with ``i <= j`` is the set of vectors assigned to both
lists ``i`` and ``j``; singly assigned vectors form cell ``(i, i)``.

SEIL stores the ``nitems // B`` full blocks of each cell once, in list ``i``,
and gives list ``j`` a :class:`RefEntry` pointing at them. The ``nitems % B``
leftovers go to the misc area of both lists, with the other list id packed
into the high bits of the stored id (see :func:`encode_stored_id`).

During a query, lists are processed in ascending id order, which is what
makes a reference entry and the physical blocks it points at mutually
exclusive: by the time list ``j`` is reached, list ``i`` has already been
scanned and the entry is skipped.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple

import numpy as np

from . import kernels
from .kernels import ID_BITS, ID_MASK, INVALID_ID
from .pq import DEFAULT_BLOCK_SIZE, DcoCounter, PackedBlock

MAX_LISTS = (1 << 16) - 1
SHARED = 0
MISC = 1
_EMPTY_IDS = np.zeros(0, dtype=np.uint64)


def encode_stored_id(vec_id, other_list=None):
    """Pack a vector id with an optional other-list id (stored as ``other + 1``)."""
    vid = np.asarray(vec_id, dtype=np.uint64)
    if np.any(vid >= np.uint64(1 << ID_BITS)):
        raise ValueError("vector ids must be < 2**48")
    if other_list is None:
        return vid
    other = np.asarray(other_list, dtype=np.int64)
    if np.any((other < 0) | (other >= MAX_LISTS)):
        raise ValueError(f"list ids must be in [0, {MAX_LISTS})")
    return vid | ((other + 1).astype(np.uint64) << np.uint64(ID_BITS))


def decode_stored_id(stored):
    """Inverse of :func:`encode_stored_id`; other list is ``-1`` when absent."""
    s = np.asarray(stored, dtype=np.uint64)
    other = (s >> np.uint64(ID_BITS)).astype(np.int64) - 1
    return s & ID_MASK, other


@dataclass(frozen=True)
class RefEntry:
    other_list: int
    nblocks: int
    block_offset: int


class Location(NamedTuple):
    list_id: int
    area: int
    slot: int


class SearchResult(NamedTuple):
    ids: np.ndarray
    distances: np.ndarray
    scan_dco: int


def _select(dists: np.ndarray, ids: np.ndarray, k: int):
    """``k`` smallest distances, ties by smaller id, best first."""
    if dists.shape[0] > k:
        kth = np.partition(dists, k - 1)[k - 1]
        keep = np.flatnonzero(dists <= kth)
        dists, ids = dists[keep], ids[keep]
    order = np.lexsort((ids, dists))[:k]
    return ids[order], dists[order]


def _dedup_min(dists: np.ndarray, ids: np.ndarray):
    """Keep one entry per id, the one with the smallest distance."""
    if ids.shape[0] == 0:
        return dists, ids
    order = np.lexsort((dists, ids))
    ids, dists = ids[order], dists[order]
    first = np.ones(ids.shape[0], dtype=bool)
    first[1:] = ids[1:] != ids[:-1]
    return dists[first], ids[first]


def _blocks(codes, ids, block_size):
    out = []
    for lo in range(0, ids.shape[0], block_size):
        out.append(PackedBlock.pack(codes[lo:lo + block_size], ids[lo:lo + block_size],
                                    block_size))
    return out


def _normalize_assignments(assigns: np.ndarray) -> np.ndarray:
    a = np.asarray(assigns, dtype=np.int64)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[1] == 1:
        a = np.repeat(a, 2, axis=1)
    return np.sort(a, axis=1)


class _ListsBase:
    """Shared bookkeeping: location map and duplicate-id checks."""

    def __init__(self, nlist: int, M: int, block_size: int = DEFAULT_BLOCK_SIZE):
        if not 1 <= nlist <= MAX_LISTS:
            raise ValueError(f"nlist must be in [1, {MAX_LISTS}]")
        if block_size < 1:
            raise ValueError("block size must be positive")
        self.nlist = nlist
        self.M = M
        self.block_size = block_size
        self.locations: Dict[int, List[Location]] = {}

    @property
    def ntotal(self) -> int:
        return len(self.locations)

    def __contains__(self, vec_id) -> bool:
        return int(vec_id) in self.locations

    def _check_insert(self, assigns, ids, codes):
        ids = np.asarray(ids, dtype=np.uint64)
        codes = np.ascontiguousarray(codes, dtype=np.uint8)
        if assigns.shape[0] != ids.shape[0] or codes.shape[0] != ids.shape[0]:
            raise ValueError("assignments, ids and codes must be aligned")
        if codes.ndim != 2 or codes.shape[1] != self.M:
            raise ValueError(f"codes must have shape (n, {self.M})")
        if assigns.size and (assigns.min() < 0 or assigns.max() >= self.nlist):
            raise ValueError("assignment refers to a non-existent list")
        if np.any(ids >= np.uint64(1 << ID_BITS)):
            raise ValueError("vector ids must be < 2**48")
        uniq = np.unique(ids)
        if uniq.size != ids.size:
            raise ValueError("duplicate vector id within the batch")
        clash = [int(v) for v in uniq if int(v) in self.locations]
        if clash:
            raise ValueError(f"vector id {clash[0]} is already stored")
        return ids, codes

    def search_many(self, luts, selected, bigk):
        return [self.search(luts[i], selected[i], bigk) for i in range(len(luts))]

    def members(self) -> set:
        """Set of ``((i, j), vec_id)`` pairs derived from the stored layout."""
        raise NotImplementedError


class SeilLists(_ListsBase):
    """Per-list reference entries, shared-cell blocks and misc blocks.

    Block structure is implicit: the shared area of a list is a contiguous run
    of full blocks, the misc area a contiguous run of items whose last block may
    be partial.
    """

    layout = "seil"

    def __init__(self, nlist: int, M: int, block_size: int = DEFAULT_BLOCK_SIZE):
        super().__init__(nlist, M, block_size)
        self.refs: List[List[RefEntry]] = [[] for _ in range(nlist)]
        self.shared_codes = [np.zeros((0, M), np.uint8) for _ in range(nlist)]
        self.shared_ids = [_EMPTY_IDS for _ in range(nlist)]
        self.misc_codes = [np.zeros((0, M), np.uint8) for _ in range(nlist)]
        self.misc_ids = [_EMPTY_IDS for _ in range(nlist)]
        self.shared_valid = np.zeros(nlist, dtype=np.int64)

    # -- insertion ----------------------------------------------------------

    def insert(self, assigns, ids, codes) -> None:
        """Insert one batch; ``assigns`` is (n, 2) list pairs or (n,) single lists."""
        assigns = _normalize_assignments(assigns)
        if assigns.shape[1] != 2:
            raise ValueError("the shared-cell layout supports at most two lists per vector")
        ids, codes = self._check_insert(assigns, ids, codes)
        n = ids.shape[0]
        if n == 0:
            return
        B = self.block_size
        l1, l2 = assigns[:, 0], assigns[:, 1]
        order = np.lexsort((ids, l2, l1))
        l1, l2, ids, codes = l1[order], l2[order], ids[order], codes[order]
        change = np.flatnonzero((l1[1:] != l1[:-1]) | (l2[1:] != l2[:-1])) + 1
        starts = np.concatenate(([0], change))
        ends = np.concatenate((change, [n]))

        shared_new = defaultdict(list)   # list -> row index arrays
        misc_new = defaultdict(list)     # list -> (row index array, embedded other)
        nshared_blocks = {i: self.shared_ids[i].shape[0] // B for i in range(self.nlist)}
        nshared_items = {i: self.shared_ids[i].shape[0] for i in range(self.nlist)}
        nmisc_items = {i: self.misc_ids[i].shape[0] for i in range(self.nlist)}
        locs = defaultdict(list)

        for s, e in zip(starts.tolist(), ends.tolist()):
            i, j = int(l1[s]), int(l2[s])
            nblocks = (e - s) // B
            split = s + nblocks * B
            if nblocks:
                rows = np.arange(s, split)
                shared_new[i].append(rows)
                base = nshared_items[i]
                for k, r in enumerate(rows.tolist()):
                    locs[r].append(Location(i, SHARED, base + k))
                if i != j:
                    self.refs[j].append(RefEntry(i, nblocks, nshared_blocks[i]))
                nshared_blocks[i] += nblocks
                nshared_items[i] += nblocks * B
            if split < e:
                rows = np.arange(split, e)
                for lst, other in ((i, j), (j, i)) if i != j else ((i, i),):
                    misc_new[lst].append((rows, other))
                    base = nmisc_items[lst]
                    for k, r in enumerate(rows.tolist()):
                        locs[r].append(Location(lst, MISC, base + k))
                    nmisc_items[lst] += rows.shape[0]

        for lst, parts in shared_new.items():
            rows = np.concatenate(parts)
            self.shared_codes[lst] = np.concatenate((self.shared_codes[lst], codes[rows]))
            self.shared_ids[lst] = np.concatenate((self.shared_ids[lst], ids[rows]))
            self.shared_valid[lst] += rows.shape[0]
        for lst, parts in misc_new.items():
            rows = np.concatenate([p[0] for p in parts])
            other = np.concatenate([np.full(p[0].shape[0], p[1]) for p in parts])
            self.misc_codes[lst] = np.concatenate((self.misc_codes[lst], codes[rows]))
            self.misc_ids[lst] = np.concatenate(
                (self.misc_ids[lst], encode_stored_id(ids[rows], other)))
        id_list = ids.tolist()
        for r, entries in locs.items():
            self.locations[id_list[r]] = entries

    # -- search -------------------------------------------------------------

    def scan_list(self, list_id: int, lut: np.ndarray, visited: np.ndarray,
                  out_d: list, out_i: list) -> int:
        """Scan one list for one query; returns the DCO of this step.

        ``visited`` must not yet contain ``list_id``; the caller marks it.
        """
        B = self.block_size
        dco = 0
        for ref in self.refs[list_id]:
            if visited[ref.other_list]:
                continue
            lo = ref.block_offset * B
            hi = lo + ref.nblocks * B
            d, i = kernels.scan_codes(lut, self.shared_codes[ref.other_list][lo:hi],
                                      self.shared_ids[ref.other_list][lo:hi])
            dco += d.shape[0]
            out_d.append(d)
            out_i.append(i)
        if self.shared_ids[list_id].shape[0]:
            d, i = kernels.scan_codes(lut, self.shared_codes[list_id], self.shared_ids[list_id])
            dco += d.shape[0]
            out_d.append(d)
            out_i.append(i)
        if self.misc_ids[list_id].shape[0]:
            d, i, n = kernels.scan_misc(lut, self.misc_codes[list_id], self.misc_ids[list_id],
                                        visited)
            dco += n
            out_d.append(d)
            out_i.append(i)
        return dco

    def search(self, lut: np.ndarray, selected, bigk: int,
               counter: DcoCounter = None) -> SearchResult:
        """Top-``bigk`` distinct candidates over the selected lists.

        Lists are visited in ascending id order regardless of the order given.
        """
        lut = np.ascontiguousarray(lut, dtype=np.float32)
        sel = np.unique(np.asarray(selected, dtype=np.int64))
        visited = np.zeros(self.nlist, dtype=np.uint8)
        out_d, out_i = [], []
        dco = 0
        for lid in sel.tolist():
            dco += self.scan_list(lid, lut, visited, out_d, out_i)
            visited[lid] = 1
        if counter is not None:
            counter.add(dco)
        return finish_candidates(out_d, out_i, bigk, dco)

    # -- deletion -----------------------------------------------------------

    def delete(self, vec_ids) -> list:
        """Remove vectors; returns the ids that were not present.

        Shared-block copies become tombstones (invalid id, skipped by scans).
        Misc copies are overwritten by the list's last misc item.
        """
        missing = []
        for vid in (int(v) for v in np.atleast_1d(vec_ids)):
            entries = self.locations.pop(vid, None)
            if entries is None:
                missing.append(vid)
                continue
            for loc in entries:
                if loc.area == SHARED:
                    self.shared_ids[loc.list_id][loc.slot] = INVALID_ID
                    self.shared_valid[loc.list_id] -= 1
                else:
                    self._remove_misc(loc.list_id, loc.slot)
        return missing

    def _remove_misc(self, lst: int, slot: int) -> None:
        codes, ids = self.misc_codes[lst], self.misc_ids[lst]
        last = ids.shape[0] - 1
        if slot != last:
            codes[slot] = codes[last]
            ids[slot] = ids[last]
            moved = int(ids[slot] & ID_MASK)
            self.locations[moved] = [
                Location(lst, MISC, slot) if (l.list_id == lst and l.area == MISC) else l
                for l in self.locations[moved]
            ]
        self.misc_codes[lst] = codes[:last]
        self.misc_ids[lst] = ids[:last]

    # -- inspection ---------------------------------------------------------

    def shared_blocks(self, list_id: int) -> List[PackedBlock]:
        return _blocks(self.shared_codes[list_id], self.shared_ids[list_id], self.block_size)

    def misc_blocks(self, list_id: int) -> List[PackedBlock]:
        return _blocks(self.misc_codes[list_id], self.misc_ids[list_id], self.block_size)

    def shared_cell_of_blocks(self, list_id: int) -> np.ndarray:
        """Other list id of each physical shared block of ``list_id`` (self if unshared)."""
        nb = self.shared_ids[list_id].shape[0] // self.block_size
        owner = np.full(nb, list_id, dtype=np.int64)
        for j in range(self.nlist):
            for ref in self.refs[j]:
                if ref.other_list == list_id:
                    owner[ref.block_offset:ref.block_offset + ref.nblocks] = j
        return owner

    def members(self) -> set:
        B = self.block_size
        out = set()
        for i in range(self.nlist):
            owner = self.shared_cell_of_blocks(i)
            ids = self.shared_ids[i]
            for b, j in enumerate(owner.tolist()):
                for v in ids[b * B:(b + 1) * B].tolist():
                    if v != int(INVALID_ID):
                        out.add(((i, j), v))
            vids, other = decode_stored_id(self.misc_ids[i])
            for v, o in zip(vids.tolist(), other.tolist()):
                out.add(((min(i, o), max(i, o)), v))
        return out

    def shared_items_between(self, i: int, j: int) -> int:
        """Valid items in physical shared blocks of cell ``(i, j)``, ``i < j``."""
        B = self.block_size
        total = 0
        for ref in self.refs[j]:
            if ref.other_list == i:
                blk = self.shared_ids[i][ref.block_offset * B:(ref.block_offset + ref.nblocks) * B]
                total += int((blk != INVALID_ID).sum())
        return total

    def storage(self) -> dict:
        return {
            "shared_slots": int(sum(a.shape[0] for a in self.shared_ids)),
            "shared_valid": int(self.shared_valid.sum()),
            "misc_items": int(sum(a.shape[0] for a in self.misc_ids)),
            "ref_entries": int(sum(len(r) for r in self.refs)),
        }

    def list_sizes(self) -> np.ndarray:
        """Valid items reachable from each list (own + referenced + misc)."""
        B = self.block_size
        sizes = np.array([self.shared_valid[i] + self.misc_ids[i].shape[0]
                          for i in range(self.nlist)], dtype=np.int64)
        for j in range(self.nlist):
            for ref in self.refs[j]:
                blk = self.shared_ids[ref.other_list][ref.block_offset * B:
                                                      (ref.block_offset + ref.nblocks) * B]
                sizes[j] += int((blk != INVALID_ID).sum())
        return sizes

    # -- serialization ------------------------------------------------------

    def to_arrays(self) -> dict:
        refs = [(j, r.other_list, r.nblocks, r.block_offset)
                for j in range(self.nlist) for r in self.refs[j]]
        return {
            "refs": np.array(refs, dtype=np.int64).reshape(-1, 4),
            "shared_len": np.array([a.shape[0] for a in self.shared_ids], dtype=np.int64),
            "shared_codes": (np.concatenate(self.shared_codes) if self.nlist
                             else np.zeros((0, self.M), np.uint8)),
            "shared_ids": np.concatenate(self.shared_ids),
            "misc_len": np.array([a.shape[0] for a in self.misc_ids], dtype=np.int64),
            "misc_codes": np.concatenate(self.misc_codes),
            "misc_ids": np.concatenate(self.misc_ids),
        }

    @classmethod
    def from_arrays(cls, nlist, M, block_size, arrays, locations) -> "SeilLists":
        self = cls(nlist, M, block_size)
        for j, other, nb, off in arrays["refs"].tolist():
            self.refs[j].append(RefEntry(other, nb, off))
        bounds = np.concatenate(([0], np.cumsum(arrays["shared_len"])))
        for i in range(nlist):
            self.shared_codes[i] = arrays["shared_codes"][bounds[i]:bounds[i + 1]].copy()
            self.shared_ids[i] = arrays["shared_ids"][bounds[i]:bounds[i + 1]].copy()
            self.shared_valid[i] = int((self.shared_ids[i] != INVALID_ID).sum())
        bounds = np.concatenate(([0], np.cumsum(arrays["misc_len"])))
        for i in range(nlist):
            self.misc_codes[i] = arrays["misc_codes"][bounds[i]:bounds[i + 1]].copy()
            self.misc_ids[i] = arrays["misc_ids"][bounds[i]:bounds[i + 1]].copy()
        self.locations = locations
        return self


class FlatLists(_ListsBase):
    """Baseline layout: every assigned list holds its own copy of each item.

    Search deduplicates after scanning, so duplicates cost distance
    computations. Supports any number of lists per vector.
    """

    layout = "flat"

    def __init__(self, nlist: int, M: int, block_size: int = DEFAULT_BLOCK_SIZE):
        super().__init__(nlist, M, block_size)
        self.codes = [np.zeros((0, M), np.uint8) for _ in range(nlist)]
        self.ids = [_EMPTY_IDS for _ in range(nlist)]

    def insert(self, assigns, ids, codes) -> None:
        assigns = _normalize_assignments(assigns)
        ids, codes = self._check_insert(assigns, ids, codes)
        n = ids.shape[0]
        if n == 0:
            return
        rows = np.repeat(np.arange(n), assigns.shape[1])
        lists = assigns.ravel()
        # a vector assigned twice to the same list is stored once
        keep = np.ones(lists.shape[0], dtype=bool)
        if assigns.shape[1] > 1:
            dup = np.zeros(assigns.shape, dtype=bool)
            dup[:, 1:] = assigns[:, 1:] == assigns[:, :-1]
            keep = ~dup.ravel()
        rows, lists = rows[keep], lists[keep]
        order = np.lexsort((ids[rows], lists))
        rows, lists = rows[order], lists[order]
        change = np.flatnonzero(lists[1:] != lists[:-1]) + 1
        id_list = ids.tolist()
        for part_rows, lst in zip(np.split(rows, change), np.split(lists, change)):
            lid = int(lst[0])
            base = self.ids[lid].shape[0]
            self.codes[lid] = np.concatenate((self.codes[lid], codes[part_rows]))
            self.ids[lid] = np.concatenate((self.ids[lid], ids[part_rows]))
            for k, r in enumerate(part_rows.tolist()):
                self.locations.setdefault(id_list[r], []).append(Location(lid, MISC, base + k))

    def scan_list(self, list_id, lut, visited, out_d, out_i) -> int:
        if not self.ids[list_id].shape[0]:
            return 0
        d, i = kernels.scan_codes(lut, self.codes[list_id], self.ids[list_id])
        out_d.append(d)
        out_i.append(i)
        return d.shape[0]

    def search(self, lut, selected, bigk, counter: DcoCounter = None) -> SearchResult:
        lut = np.ascontiguousarray(lut, dtype=np.float32)
        sel = np.unique(np.asarray(selected, dtype=np.int64))
        out_d, out_i = [], []
        dco = 0
        for lid in sel.tolist():
            dco += self.scan_list(lid, lut, None, out_d, out_i)
        if counter is not None:
            counter.add(dco)
        return finish_candidates(out_d, out_i, bigk, dco)

    def delete(self, vec_ids) -> list:
        missing = []
        for vid in (int(v) for v in np.atleast_1d(vec_ids)):
            entries = self.locations.pop(vid, None)
            if entries is None:
                missing.append(vid)
                continue
            for loc in entries:
                lst, slot = loc.list_id, loc.slot
                codes, ids = self.codes[lst], self.ids[lst]
                last = ids.shape[0] - 1
                if slot != last:
                    codes[slot] = codes[last]
                    ids[slot] = ids[last]
                    moved = int(ids[slot])
                    self.locations[moved] = [Location(lst, MISC, slot) if l.list_id == lst else l
                                             for l in self.locations[moved]]
                self.codes[lst] = codes[:last]
                self.ids[lst] = ids[:last]
        return missing

    def blocks(self, list_id: int) -> List[PackedBlock]:
        return _blocks(self.codes[list_id], self.ids[list_id], self.block_size)

    def members(self) -> set:
        out = set()
        for vid, entries in self.locations.items():
            ls = sorted(l.list_id for l in entries)
            cell = (ls[0], ls[-1])
            out.add((cell, vid))
        return out

    def storage(self) -> dict:
        return {"items": int(sum(a.shape[0] for a in self.ids))}

    def list_sizes(self) -> np.ndarray:
        return np.array([a.shape[0] for a in self.ids], dtype=np.int64)

    def to_arrays(self) -> dict:
        return {
            "list_len": np.array([a.shape[0] for a in self.ids], dtype=np.int64),
            "codes": np.concatenate(self.codes),
            "ids": np.concatenate(self.ids),
        }

    @classmethod
    def from_arrays(cls, nlist, M, block_size, arrays, locations) -> "FlatLists":
        self = cls(nlist, M, block_size)
        bounds = np.concatenate(([0], np.cumsum(arrays["list_len"])))
        for i in range(nlist):
            self.codes[i] = arrays["codes"][bounds[i]:bounds[i + 1]].copy()
            self.ids[i] = arrays["ids"][bounds[i]:bounds[i + 1]].copy()
        self.locations = locations
        return self


def finish_candidates(out_d: list, out_i: list, bigk: int, dco: int) -> SearchResult:
    if out_d:
        d = np.concatenate(out_d)
        i = np.concatenate(out_i)
    else:
        d = np.zeros(0, np.float32)
        i = _EMPTY_IDS
    d, i = _dedup_min(d, i)
    ids, dists = _select(d, i, bigk)
    return SearchResult(ids, dists, dco)


def make_lists(layout: str, nlist: int, M: int, block_size: int = DEFAULT_BLOCK_SIZE):
    if layout == "seil":
        return SeilLists(nlist, M, block_size)
    if layout == "flat":
        return FlatLists(nlist, M, block_size)
    raise ValueError(f"unknown list layout {layout!r}")


# -- cell statistics --------------------------------------------------------

@dataclass
class CellStats:
    block_size: int
    size_histogram: Dict[int, int] = field(default_factory=dict)
    n_vectors: int = 0
    n_cells: int = 0
    n_pair_cells: int = 0
    large_cell_vectors: int = 0
    shared_block_vectors: int = 0
    misc_vectors: int = 0
    paired_vectors: int = 0
    paired_misc_vectors: int = 0

    @property
    def large_cell_fraction(self) -> float:
        return self.large_cell_vectors / self.n_vectors if self.n_vectors else 0.0

    @property
    def paired_fraction(self) -> float:
        """Fraction of vectors assigned to two distinct lists."""
        return self.paired_vectors / self.n_vectors if self.n_vectors else 0.0

    @property
    def stored_copies(self) -> int:
        """Item copies the SEIL layout stores (shared once, pair misc twice)."""
        return self.shared_block_vectors + self.misc_vectors + self.paired_misc_vectors

    def cdf(self):
        """(cell sizes ascending, cumulative fraction of vectors)."""
        sizes = np.array(sorted(self.size_histogram), dtype=np.int64)
        counts = np.array([self.size_histogram[s] for s in sizes], dtype=np.int64)
        cum = np.cumsum(sizes * counts)
        return sizes, cum / cum[-1] if cum.size else cum.astype(float)


def cell_stats(assigns, block_size: int = DEFAULT_BLOCK_SIZE) -> CellStats:
    a = _normalize_assignments(assigns)
    st = CellStats(block_size)
    st.n_vectors = a.shape[0]
    if not a.shape[0]:
        return st
    pairs, sizes = np.unique(a[:, [0, -1]], axis=0, return_counts=True)
    st.n_cells = pairs.shape[0]
    is_pair = pairs[:, 0] != pairs[:, 1]
    st.n_pair_cells = int(is_pair.sum())
    st.size_histogram = dict(Counter(sizes.tolist()))
    st.large_cell_vectors = int(sizes[sizes >= block_size].sum())
    st.shared_block_vectors = int((sizes // block_size * block_size).sum())
    st.misc_vectors = int((sizes % block_size).sum())
    st.paired_misc_vectors = int((sizes[is_pair] % block_size).sum())
    st.paired_vectors = int(sizes[is_pair].sum())
    return st
