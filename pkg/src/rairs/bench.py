"""Recall/DCO/latency measurement and the Monte Carlo check of the AIR loss."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .assignment import StrategyConfig, assign_pairs
from .coarse import CoarseQuantizer
from .dataset import GroundTruth, VectorSet
from .index import RairsIndex, SearchOutput

CSV_HEADER = ("strategy", "nprobe", "K", "recall", "scan_dco", "refine_dco", "qps",
              "lat_mean_us", "lat_p95_us", "lat_p99_us")
CDF_HEADER = ("query_id", "recall", "scan_dco")


# -- recall -----------------------------------------------------------------

def per_query_recall(results, gt: GroundTruth, K: int = None, k: int = None,
                     distances: np.ndarray = None) -> np.ndarray:
    """Fraction of each query's true top-K found among its first ``k`` results.

    When ``distances`` (exact, same scoring as the oracle) are given, a result
    whose distance equals the K-th true distance also counts as a hit, so
    equidistant neighbors are not penalized by the oracle's id tie-break.
    """
    res = np.asarray(results.ids if isinstance(results, SearchOutput) else results)
    if distances is None and isinstance(results, SearchOutput):
        distances = results.distances
    res = np.atleast_2d(res)
    if res.shape[0] != len(gt):
        raise ValueError(f"{res.shape[0]} result rows vs {len(gt)} ground-truth rows")
    K = K or gt.k
    k = k or K
    if K > gt.k:
        raise ValueError(f"K={K} exceeds ground-truth depth {gt.k}")
    if k > res.shape[1]:
        raise ValueError(f"k={k} exceeds result depth {res.shape[1]}")
    out = np.empty(res.shape[0])
    for i in range(res.shape[0]):
        row = res[i, :k]
        hit = np.isin(row, gt.ids[i, :K])
        if distances is not None:
            kth = gt.distances[i, K - 1]
            hit |= (np.asarray(distances)[i, :k] == kth) & (row >= 0)
        out[i] = min(int(hit.sum()), K) / K
    return out


def recall_at(results, gt: GroundTruth, k: int = None, K: int = None,
              distances: np.ndarray = None) -> float:
    """Mean recall k@K over queries (see :func:`per_query_recall`)."""
    r = per_query_recall(results, gt, K=K, k=k, distances=distances)
    return float(r.mean()) if r.size else 0.0


# -- sweeps -----------------------------------------------------------------

@dataclass
class SweepPoint:
    strategy: str
    nprobe: int
    K: int
    recall: float
    scan_dco: float
    refine_dco: float
    qps: float
    lat_mean_us: float
    lat_p95_us: float
    lat_p99_us: float

    def row(self) -> tuple:
        return tuple(getattr(self, name) for name in CSV_HEADER)


@dataclass
class BenchReport:
    points: List[SweepPoint] = field(default_factory=list)
    query_recall: List[np.ndarray] = field(default_factory=list)
    query_dco: List[np.ndarray] = field(default_factory=list)

    def first_reaching(self, target: float) -> Optional[SweepPoint]:
        """First sweep point (in sweep order) with recall >= ``target``."""
        for p in self.points:
            if p.recall >= target:
                return p
        return None

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow(_fmt_row(p.row()))
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def cdf_csv(self, point: int, path=None) -> str:
        """Per-query recall and scan DCO of one sweep point."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CDF_HEADER)
        for qid, (r, d) in enumerate(zip(self.query_recall[point], self.query_dco[point])):
            w.writerow([qid, repr(float(r)), int(d)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def merge(self, other: "BenchReport") -> "BenchReport":
        return BenchReport(self.points + other.points, self.query_recall + other.query_recall,
                           self.query_dco + other.query_dco)


def _fmt_row(row):
    return [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row]


def strategy_label(index: RairsIndex) -> str:
    s = index.strategy
    if s.kind == "single":
        return "single"
    label = s.kind + ("-strict" if s.strict else "")
    if s.multiplicity > 2:
        label += f"-m{s.m}"
    return label


def sweep(index: RairsIndex, queries, gt: GroundTruth, K: int = 10,
          nprobes: Sequence[int] = (1, 2, 4, 8, 16, 32), k_factor: int = None,
          one_at_a_time: bool = False, threads: int = 1, label: str = None) -> BenchReport:
    """Run the index once per nprobe value and collect recall/DCO/timing.

    Batch mode uses grouped search and reports the amortized per-query time
    as every latency column. ``one_at_a_time`` times each query separately,
    which gives meaningful percentiles.
    """
    qs = queries if isinstance(queries, VectorSet) else VectorSet(queries)
    label = label or strategy_label(index)
    report = BenchReport()
    nq = qs.count
    for nprobe in nprobes:
        if one_at_a_time:
            lat = np.empty(nq)
            parts = []
            for i in range(nq):
                t0 = time.perf_counter()
                parts.append(index.search(qs.data[i:i + 1], K, nprobe, k_factor))
                lat[i] = time.perf_counter() - t0
            out = SearchOutput(np.concatenate([p.ids for p in parts]),
                               np.concatenate([p.distances for p in parts]),
                               np.concatenate([p.scan_dco for p in parts]),
                               np.concatenate([p.refine_dco for p in parts]))
            total = float(lat.sum())
        else:
            t0 = time.perf_counter()
            if threads > 1:
                out = index.search(qs, K, nprobe, k_factor, threads=threads)
            else:
                out = index.search_grouped(qs, K, nprobe, k_factor)
            total = time.perf_counter() - t0
            lat = np.full(nq, total / max(nq, 1))
        rec = per_query_recall(out, gt, K=K)
        lat_us = lat * 1e6
        report.points.append(SweepPoint(
            strategy=label, nprobe=int(nprobe), K=int(K),
            recall=float(rec.mean()) if nq else 0.0,
            scan_dco=float(out.scan_dco.mean()) if nq else 0.0,
            refine_dco=float(out.refine_dco.mean()) if nq else 0.0,
            qps=nq / total if total > 0 else math.inf,
            lat_mean_us=float(lat_us.mean()) if nq else 0.0,
            lat_p95_us=float(np.percentile(lat_us, 95)) if nq else 0.0,
            lat_p99_us=float(np.percentile(lat_us, 99)) if nq else 0.0,
        ))
        report.query_recall.append(rec)
        report.query_dco.append(out.scan_dco.copy())
    return report


def rebuild_sweep(index: RairsIndex, base: VectorSet, queries, gt: GroundTruth,
                  K: int = 10, nprobes: Sequence[int] = (1, 2, 4, 8, 16, 32),
                  block_size: int = None, label: str = None, **strategy_overrides) -> BenchReport:
    """Sweep an index rebuilt from ``index``'s trained parts with changed settings.

    Parameter studies (lambda, candidate count, block size) go through here:
    the quantizer and codebook are reused, only assignment and layout change.
    """
    strategy = index.strategy.with_(**strategy_overrides) if strategy_overrides else index.strategy
    fresh = RairsIndex(index.quantizer, index.codebook, strategy,
                       block_size=block_size or index.block_size)
    fresh.add(base)
    return sweep(fresh, queries, gt, K, nprobes, label=label)


# -- AIR loss verification --------------------------------------------------

def sin_power_integral(D: int) -> float:
    """Integral of sin(a)**D over [0, pi] via the downward recurrence."""
    if D < 0:
        raise ValueError("D must be >= 0")
    val = math.pi if D % 2 == 0 else 2.0
    for d in range(2 + D % 2, D + 1, 2):
        val *= (d - 1) / d
    return val


def air_lambda(D: int, l_m: float, r_norm: float) -> float:
    """Per-vector lambda for which the expected query loss is AIR-shaped."""
    if r_norm <= 0:
        raise ValueError("residual norm must be positive")
    return D * sin_power_integral(D) * l_m / ((D + 1) * r_norm)


@dataclass
class AirVerifyResult:
    D: int
    l_m: float
    lam_theory: float
    samples: int
    seed: int
    mc_loss: np.ndarray
    closed_form: np.ndarray
    correlation: float
    ratios: np.ndarray
    fitted_ratio: float
    ratio_spread: float

    @property
    def pairs(self) -> np.ndarray:
        return np.stack([self.mc_loss, self.closed_form], axis=1)


def sample_ball(n: int, D: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform in the D-ball of ``radius`` around the origin."""
    u = rng.normal(size=(n, D))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u *= radius * rng.uniform(size=(n, 1)) ** (1.0 / D)
    return u


def verify_air(D: int, l_m: float, x, c, cands, samples: int = 100_000,
               seed: int = 0) -> AirVerifyResult:
    """Monte Carlo estimate of the expected query loss per candidate centroid.

    Queries q are uniform in the ball of radius ``l_m`` around ``x``. The loss
    of candidate c' is ``E[relu(-cos(q - x, c - x)) * (|q - c'|^2 - |q - x|^2)]``
    and is compared with ``|r'|^2 + lam * r.r'`` for ``lam`` from
    :func:`air_lambda`. All candidates share the same query sample.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    c = np.asarray(c, dtype=np.float64).ravel()
    cands = np.atleast_2d(np.asarray(cands, dtype=np.float64))
    if x.shape[0] != D or c.shape[0] != D or cands.shape[1] != D:
        raise ValueError(f"x, c and candidates must have dimension {D}")
    if samples < 10_000:
        raise ValueError("need at least 10^4 samples")
    if l_m <= 0:
        raise ValueError("l_m must be positive")
    r = c - x
    r_norm = float(np.linalg.norm(r))
    if r_norm == 0.0:
        raise ValueError("c coincides with x; the residual is zero")
    lam = air_lambda(D, l_m, r_norm)

    rng = np.random.default_rng(seed)
    u = sample_ball(samples, D, l_m, rng)
    unorm = np.linalg.norm(u, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(unorm > 0, (u @ r) / (unorm * r_norm), 0.0)
    w = np.maximum(-cos, 0.0)
    rp = cands - x
    # |q - c'|^2 - |q - x|^2 = |r'|^2 - 2 u.r'
    sq = np.einsum("cd,cd->c", rp, rp)
    mc = (w @ (sq[None, :] - 2.0 * (u @ rp.T))) / samples
    closed = sq + lam * (rp @ r)

    if mc.shape[0] > 1 and np.std(mc) > 0 and np.std(closed) > 0:
        corr = float(np.corrcoef(mc, closed)[0, 1])
    else:
        corr = float("nan")
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = mc / closed
    denom = float(closed @ closed)
    fitted = float(mc @ closed) / denom if denom > 0 else float("nan")
    finite = ratios[np.isfinite(ratios)]
    if finite.size and finite.min() > 0:
        spread = float(finite.max() / finite.min())
    else:
        spread = math.inf
    return AirVerifyResult(D, float(l_m), lam, int(samples), int(seed), mc, closed,
                           corr, ratios, fitted, spread)


def random_air_instance(D: int, l_m: float, ncands: int, seed: int):
    """Random x, c with |c - x| in [0.1, 1] and candidates farther than c by [l_m, 3 l_m]."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, D)
    d = rng.normal(size=D)
    r_norm = rng.uniform(0.1, 1.0)
    c = x + r_norm * d / np.linalg.norm(d)
    dirs = rng.normal(size=(ncands, D))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    norms = rng.uniform(r_norm + l_m, r_norm + 3 * l_m, size=(ncands, 1))
    return x, c, x + dirs * norms


def expected_relu_weight(D: int) -> float:
    """``E[relu(-cos)]`` for a uniform direction in D dimensions."""
    return 1.0 / (D * sin_power_integral(D))


# -- assignment comparison --------------------------------------------------

def assignment_overlap(cq: CoarseQuantizer, data, a: StrategyConfig,
                       b: StrategyConfig) -> float:
    """Fraction of vectors whose second list agrees under strategies ``a`` and ``b``."""
    for s in (a, b):
        if s.multiplicity != 2 or not s.strict:
            raise ValueError("assignment_overlap compares strict 2-assignment strategies")
    x = data.data if isinstance(data, VectorSet) else np.atleast_2d(np.asarray(data))
    if x.shape[0] == 0:
        return 1.0
    pa = assign_pairs(cq, x, a)
    pb = assign_pairs(cq, x, b)
    # the first list is the nearest one for both, so equal pairs <=> equal second lists
    return float(np.all(pa == pb, axis=1).mean())


__all__ = ["recall_at", "per_query_recall", "sweep", "rebuild_sweep", "BenchReport",
           "SweepPoint", "sin_power_integral", "air_lambda", "verify_air",
           "AirVerifyResult", "assignment_overlap", "expected_relu_weight",
           "random_air_instance", "CSV_HEADER", "CDF_HEADER"]
