"""List-selection strategies for (redundant) IVF assignment.

Residuals follow ``r = c - x``. Every strategy picks the nearest list first;
the redundant ones then choose a second list among the ``n_cands`` nearest:

==========  ==========================================
naive       ``|r'|^2``                     (2nd nearest)
soar        ``|r'|^2 + lam * (r.r' / |r|)^2``
air         ``|r'|^2 + lam * r.r'``
==========  ==========================================
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .coarse import CoarseQuantizer
from .dataset import L2

SINGLE = "single"
NAIVE = "naive"
SOAR = "soar"
AIR = "air"
KINDS = (SINGLE, NAIVE, SOAR, AIR)
AGGREGATES = ("max", "min", "avg")

# CLI strategy names -> config overrides
STRATEGY_PRESETS = {
    "single": dict(kind=SINGLE),
    "naive": dict(kind=NAIVE, strict=True),
    "soarl2": dict(kind=SOAR, strict=True),
    "soar-ip": dict(kind=SOAR, strict=True),
    "air": dict(kind=AIR, strict=False),
    "air-strict": dict(kind=AIR, strict=True),
    "air-m": dict(kind=AIR, strict=True, m=3),
}

_CHUNK = 4096


class SingularResidual(ValueError):
    """The primary residual is zero, so the SOAR projection is undefined."""


class Assignment(NamedTuple):
    list1: int
    list2: int
    vec_id: int = -1


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = AIR
    lam: float = 0.5
    n_cands: int = 10
    strict: bool = False
    m: int = 2
    aggr: str = "max"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.aggr not in AGGREGATES:
            raise ValueError(f"aggr must be one of {AGGREGATES}")
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.m > 2 and (self.kind != AIR or not self.strict):
            raise ValueError("m >= 3 assignment is defined for strict AIR only")
        if self.kind != SINGLE and self.n_cands < self.m:
            raise ValueError("n_cands must be >= m")

    @classmethod
    def from_name(cls, name: str, **overrides) -> "StrategyConfig":
        if name not in STRATEGY_PRESETS:
            raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGY_PRESETS)}")
        params = dict(STRATEGY_PRESETS[name])
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**params)

    @property
    def multiplicity(self) -> int:
        return 1 if self.kind == SINGLE else self.m

    def with_(self, **kw) -> "StrategyConfig":
        return replace(self, **kw)


# -- scalar loss functions --------------------------------------------------

def loss_naive(r_prime) -> float:
    r_prime = np.asarray(r_prime, dtype=np.float64)
    return float(r_prime @ r_prime)


def loss_soar(r, r_prime, lam: float) -> float:
    r = np.asarray(r, dtype=np.float64)
    r_prime = np.asarray(r_prime, dtype=np.float64)
    nr = np.sqrt(r @ r)
    if nr == 0.0:
        raise SingularResidual("SOAR loss undefined for a zero primary residual")
    proj = (r @ r_prime) / nr
    return float(r_prime @ r_prime + lam * proj * proj)


def loss_air(r, r_prime, lam: float) -> float:
    r = np.asarray(r, dtype=np.float64)
    r_prime = np.asarray(r_prime, dtype=np.float64)
    return float(r_prime @ r_prime + lam * (r @ r_prime))


# -- batched assignment -----------------------------------------------------

def _candidates(cq: CoarseQuantizer, x: np.ndarray, n_cands: int):
    """Candidate lists (nearest first), their residuals, and ``|r'|^2``."""
    scores = cq.scores(x)
    cands = cq.rank(scores, n_cands)
    resid = cq._c64[cands] - x.astype(np.float64)[:, None, :]
    if cq.metric == L2:
        # reuse the ranking distances so |r'|^2 orders exactly like the candidates
        sq = np.take_along_axis(scores, cands, 1)
    else:
        sq = np.einsum("ncd,ncd->nc", resid, resid)
    return cands, resid, sq


def _second_choice(cfg: StrategyConfig, resid: np.ndarray, sq: np.ndarray) -> np.ndarray:
    """Index into the candidate axis of the selected second list."""
    if cfg.kind == NAIVE:
        loss = sq
    else:
        primary = resid[np.arange(resid.shape[0]), 0]
        dots = np.einsum("nd,ncd->nc", primary, resid)
        if cfg.kind == AIR:
            loss = sq + cfg.lam * dots
        else:
            norm0 = np.sqrt(sq[:, :1])
            with np.errstate(divide="ignore", invalid="ignore"):
                proj = dots / norm0
                loss = sq + cfg.lam * proj * proj
            # zero primary residual: fall back to plain distance
            singular = norm0[:, 0] == 0.0
            loss[singular] = sq[singular]
    start = 1 if cfg.strict else 0
    # argmin keeps the first minimum, i.e. the nearer candidate wins ties
    return loss[:, start:].argmin(1) + start


def assign_pairs(cq: CoarseQuantizer, x: np.ndarray, cfg: StrategyConfig) -> np.ndarray:
    """(n, 2) ordered list pairs ``list1 <= list2`` for 2-assignment strategies."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float32))
    if cfg.multiplicity > 2:
        raise ValueError("use assign_multi for m >= 3")
    out = np.empty((x.shape[0], 2), dtype=np.int64)
    if cfg.kind == SINGLE:
        first = cq.search(x, 1)[:, 0] if x.shape[0] else np.empty(0, np.int64)
        out[:, 0] = first
        out[:, 1] = first
        return out
    if cfg.n_cands > cq.nlist:
        raise ValueError(f"n_cands={cfg.n_cands} exceeds nlist={cq.nlist}")
    for lo in range(0, x.shape[0], _CHUNK):
        xs = x[lo:lo + _CHUNK]
        cands, resid, sq = _candidates(cq, xs, cfg.n_cands)
        pick = _second_choice(cfg, resid, sq)
        a = cands[:, 0]
        b = cands[np.arange(cands.shape[0]), pick]
        out[lo:lo + xs.shape[0], 0] = np.minimum(a, b)
        out[lo:lo + xs.shape[0], 1] = np.maximum(a, b)
    return out


def _aggregate(dots: np.ndarray, aggr: str) -> np.ndarray:
    if aggr == "max":
        return dots.max(0)
    if aggr == "min":
        return dots.min(0)
    return dots.sum(0) / dots.shape[0]


def assign_multi(cq: CoarseQuantizer, x: np.ndarray, cfg: StrategyConfig) -> np.ndarray:
    """(n, m) ascending list ids chosen greedily by aggregated AIR loss."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float32))
    m = cfg.m
    if cfg.kind != AIR or not cfg.strict:
        raise ValueError("multi-assignment requires strict AIR")
    if cfg.n_cands > cq.nlist:
        raise ValueError(f"n_cands={cfg.n_cands} exceeds nlist={cq.nlist}")
    out = np.empty((x.shape[0], m), dtype=np.int64)
    for lo in range(0, x.shape[0], _CHUNK):
        xs = x[lo:lo + _CHUNK]
        n = xs.shape[0]
        rows = np.arange(n)
        cands, resid, sq = _candidates(cq, xs, cfg.n_cands)
        chosen = [np.zeros(n, dtype=np.int64)]
        taken = np.zeros(cands.shape, dtype=bool)
        taken[:, 0] = True
        dots = []
        for _ in range(1, m):
            last = resid[rows, chosen[-1]]
            dots.append(np.einsum("nd,ncd->nc", last, resid))
            loss = sq + cfg.lam * _aggregate(np.stack(dots), cfg.aggr)
            loss[taken] = np.inf
            pick = loss.argmin(1)
            taken[rows, pick] = True
            chosen.append(pick)
        ids = np.stack([cands[rows, c] for c in chosen], axis=1)
        out[lo:lo + n] = np.sort(ids, axis=1)
    return out


def assign(cq: CoarseQuantizer, x: np.ndarray, cfg: StrategyConfig) -> np.ndarray:
    """Dispatch to pair or multi assignment; returns (n, multiplicity)."""
    if cfg.multiplicity > 2:
        return assign_multi(cq, x, cfg)
    pairs = assign_pairs(cq, x, cfg)
    return pairs[:, :1] if cfg.kind == SINGLE else pairs


def rair_assign(cq: CoarseQuantizer, v, cfg: StrategyConfig, vec_id: int = -1) -> Assignment:
    a, b = assign_pairs(cq, np.asarray(v)[None, :], cfg)[0]
    return Assignment(int(a), int(b), vec_id)


def multi_assign(cq: CoarseQuantizer, v, cfg: StrategyConfig) -> list:
    return [int(i) for i in assign_multi(cq, np.asarray(v)[None, :], cfg)[0]]


def air_true_rank(cq: CoarseQuantizer, x: np.ndarray, lam: float = 0.5,
                  strict: bool = True) -> np.ndarray:
    """Rank (0-based, by centroid distance) of the exact AIR optimum per vector.

    With ``strict`` the primary list is excluded, so ranks start at 1.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float32))
    cfg = StrategyConfig(kind=AIR, lam=lam, n_cands=cq.nlist, strict=strict)
    out = np.empty(x.shape[0], dtype=np.int64)
    step = max(1, _CHUNK * 16 // max(cq.nlist, 1))
    for lo in range(0, x.shape[0], step):
        xs = x[lo:lo + step]
        _, resid, sq = _candidates(cq, xs, cq.nlist)
        out[lo:lo + xs.shape[0]] = _second_choice(cfg, resid, sq)
    return out


__all__ = ["Assignment", "StrategyConfig", "SingularResidual", "loss_naive",
           "loss_soar", "loss_air", "assign", "assign_pairs", "assign_multi",
           "rair_assign", "multi_assign", "air_true_rank", "STRATEGY_PRESETS",
           "SINGLE", "NAIVE", "SOAR", "AIR"]
