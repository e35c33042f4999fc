"""Command-line interface: build, search, bench, gt, stats, verify-air, insert, delete, info.

Every subcommand accepts ``--config FILE`` with ``key=value`` lines (keys are
flag names with or without the leading dashes; ``-`` and ``_`` are
interchangeable). Values from the file act as defaults, explicit flags win.

Exit status: 0 on success, 2 for invalid flags or parameters, 1 for I/O and
file-format failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

from .assignment import STRATEGY_PRESETS, StrategyConfig
from .bench import BenchReport, random_air_instance, sweep, verify_air
from .dataset import (IP, L2, FormatError, GroundTruth, VectorSet, exact_knn,
                      generate_synthetic, load_vectors, pairwise_distances, read_vecs,
                      synthetic_split, write_vecs)
from .index import RairsIndex
from .seil import cell_stats


class UsageError(Exception):
    """Invalid flag or parameter combination (exit 2)."""


class DataError(Exception):
    """Unreadable or malformed input/output file (exit 1)."""


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _int_list(text: str) -> List[int]:
    try:
        vals = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _str_list(text: str) -> List[str]:
    return [v for v in str(text).replace(" ", "").split(",") if v]


# -- argument groups --------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="key=value file merged under the flags")
    p.add_argument("--seed", type=int, default=0)


def _add_synthetic(p):
    g = p.add_argument_group("synthetic data (used when --base is omitted)")
    g.add_argument("--synthetic-n", type=_positive_int, default=10000)
    g.add_argument("--synthetic-queries", type=_positive_int, default=100)
    g.add_argument("--synthetic-dim", type=_positive_int, default=16)
    g.add_argument("--synthetic-clusters", type=_positive_int, default=64)
    g.add_argument("--synthetic-spread", type=float, default=0.05)


def _add_index_flags(p):
    g = p.add_argument_group("index")
    g.add_argument("--nlist", type=int, default=0, help="0 = power of two near sqrt(n)")
    g.add_argument("--M-pq", dest="M_pq", type=int, default=0, help="0 = dim/2")
    g.add_argument("--nbits", type=int, default=4)
    g.add_argument("--blk-sz", dest="blk_sz", type=_positive_int, default=32)
    g.add_argument("--metric", choices=(L2, IP), default=L2)
    g.add_argument("--layout", choices=("seil", "flat"), default=None)
    g.add_argument("--iters", type=_positive_int, default=25)


def _add_strategy_flags(p, multi=False):
    g = p.add_argument_group("assignment")
    if multi:
        g.add_argument("--strategy", type=_str_list, default=["air"],
                       help="comma-separated: " + ",".join(STRATEGY_PRESETS))
    else:
        g.add_argument("--strategy", choices=sorted(STRATEGY_PRESETS), default="air")
    g.add_argument("--lambda", dest="lam", type=float, default=0.5)
    g.add_argument("--n-cands", dest="n_cands", type=_positive_int, default=10)
    g.add_argument("--m", type=int, default=None)
    g.add_argument("--aggr", choices=("max", "min", "avg"), default="max")
    g.add_argument("--strict", choices=("true", "false"), default=None,
                   help="override the preset's strictness")


def _add_search_flags(p, nprobe_list=True):
    g = p.add_argument_group("search")
    g.add_argument("--k", type=_positive_int, default=10)
    g.add_argument("--k-factor", dest="k_factor", type=_positive_int, default=None,
                   help="default 10, or 4 when K >= 100")
    if nprobe_list:
        g.add_argument("--nprobe", type=_int_list, default=[1, 2, 4, 8, 16, 32])
    else:
        g.add_argument("--nprobe", type=_positive_int, default=1)
    g.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rairs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="train an index and add the base vectors")
    _add_common(p)
    p.add_argument("--base", help="fvecs/bvecs base file")
    p.add_argument("--train", help="optional training file (defaults to the base)")
    p.add_argument("--out", required=True, help="index file to write")
    _add_synthetic(p)
    _add_index_flags(p)
    _add_strategy_flags(p)

    p = sub.add_parser("search", help="query an index")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", help="ivecs file for result ids (default: print)")
    p.add_argument("--dist-out", help="fvecs file for result distances")
    _add_search_flags(p, nprobe_list=False)

    p = sub.add_parser("bench", help="recall/DCO/latency sweep over nprobe")
    _add_common(p)
    p.add_argument("--index", help="prebuilt index (else one is built per strategy)")
    p.add_argument("--base")
    p.add_argument("--queries")
    p.add_argument("--gt", help="ivecs ground truth (else computed exactly)")
    p.add_argument("--csv", help="write the sweep table here (default: stdout)")
    p.add_argument("--cdf-dir", help="write per-query recall/DCO CSVs here")
    p.add_argument("--one-at-a-time", dest="one_at_a_time", action="store_true")
    _add_synthetic(p)
    _add_index_flags(p)
    _add_strategy_flags(p, multi=True)
    _add_search_flags(p)

    p = sub.add_parser("gt", help="exact ground truth")
    _add_common(p)
    p.add_argument("--base", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=_positive_int, default=100)
    p.add_argument("--metric", choices=(L2, IP), default=L2)
    p.add_argument("--out", required=True, help="ivecs output")

    p = sub.add_parser("stats", help="cell size distribution of an index")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--cdf", help="write cell-size CDF as CSV")

    p = sub.add_parser("verify-air", help="Monte Carlo check of the AIR loss shape")
    _add_common(p)
    p.add_argument("--dim", type=_positive_int, default=8)
    p.add_argument("--l-m", dest="l_m", type=float, default=0.5)
    p.add_argument("--candidates", type=_positive_int, default=50)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--out", help="CSV of (mc_loss, closed_form) per candidate")

    p = sub.add_parser("insert", help="add vectors to an existing index")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--id-start", dest="id_start", type=int, default=None,
                   help="first id (default: one past the largest stored id)")
    p.add_argument("--out", help="index file to write (default: overwrite --index)")

    p = sub.add_parser("delete", help="remove ids from an existing index")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--ids", help="comma-separated ids")
    p.add_argument("--ids-file", dest="ids_file", help="text file, one id per line")
    p.add_argument("--out", help="index file to write (default: overwrite --index)")

    p = sub.add_parser("info", help="print the effective index configuration")
    _add_common(p)
    p.add_argument("--index", required=True)
    return parser


# -- config file ------------------------------------------------------------

def read_config(path) -> dict:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e.strerror}")
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = val
    return out


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def _apply_config(sub: argparse.ArgumentParser, cfg: dict) -> None:
    by_key = {}
    for action in sub._actions:
        for opt in action.option_strings:
            by_key[opt.lstrip("-").replace("-", "_")] = action
        by_key[action.dest] = action
    defaults = {}
    for key, val in cfg.items():
        action = by_key.get(key)
        if action is None or action.dest in ("help", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            low = val.lower()
            if low not in _BOOL_TRUE | _BOOL_FALSE:
                raise UsageError(f"config key {key!r} expects a boolean")
            defaults[action.dest] = low in _BOOL_TRUE
            continue
        try:
            conv = action.type(val) if action.type else val
        except (argparse.ArgumentTypeError, ValueError) as e:
            raise UsageError(f"config key {key!r}: {e}")
        if action.choices is not None and conv not in action.choices:
            raise UsageError(f"config key {key!r}: {val!r} not in {sorted(action.choices)}")
        defaults[action.dest] = conv
        # a config value satisfies a required flag
        action.required = False
    sub.set_defaults(**defaults)


def _config_path(argv: List[str]) -> Optional[str]:
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    path = _config_path(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    if path and command in COMMANDS:
        _apply_config(_subparser(parser, command), read_config(path))
    return parser.parse_args(argv)


# -- helpers ----------------------------------------------------------------

def _load_set(path) -> VectorSet:
    try:
        return load_vectors(path)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror or e}")
    except FormatError as e:
        raise DataError(str(e))
    except ValueError as e:
        raise DataError(f"{path}: {e}")


def _load_index(path) -> RairsIndex:
    try:
        return RairsIndex.load(path)
    except OSError as e:
        raise DataError(f"cannot read index {path}: {e.strerror or e}")
    except (ValueError, KeyError) as e:
        raise DataError(f"{path}: {e}")


def _save_index(index: RairsIndex, path) -> None:
    try:
        index.save(path)
    except OSError as e:
        raise DataError(f"cannot write index {path}: {e.strerror or e}")


def _write(path, array, fmt) -> None:
    try:
        write_vecs(path, array, fmt)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e.strerror or e}")


def _as_int32(ids: np.ndarray, what: str) -> np.ndarray:
    if ids.size and (ids.max() > np.iinfo(np.int32).max):
        raise UsageError(f"{what} ids exceed the int32 range of ivecs")
    return ids.astype(np.int32)


def strategy_from_args(args, name: str = None) -> StrategyConfig:
    overrides = dict(lam=args.lam, n_cands=args.n_cands, m=args.m, aggr=args.aggr)
    if args.strict is not None:
        overrides["strict"] = args.strict == "true"
    try:
        return StrategyConfig.from_name(name or args.strategy, **overrides)
    except ValueError as e:
        raise UsageError(str(e))


def _data_from_args(args, need_queries: bool):
    """Base (and queries) from files, or a seeded synthetic split."""
    if args.base:
        base = _load_set(args.base)
        queries = _load_set(args.queries) if getattr(args, "queries", None) else None
        if need_queries and queries is None:
            raise UsageError("--queries is required with --base")
        return base, queries
    try:
        if need_queries and not getattr(args, "queries", None):
            return synthetic_split(args.synthetic_n, args.synthetic_queries, args.synthetic_dim,
                                   args.synthetic_clusters, seed=args.seed,
                                   spread=args.synthetic_spread)
        base = generate_synthetic(args.synthetic_n, args.synthetic_dim, args.synthetic_clusters,
                                  seed=args.seed, spread=args.synthetic_spread)
    except ValueError as e:
        raise UsageError(str(e))
    queries = _load_set(args.queries) if getattr(args, "queries", None) else None
    return base, queries


def _train(args, base: VectorSet, strategy: StrategyConfig, train: VectorSet = None) -> RairsIndex:
    try:
        index = RairsIndex.train(train or base, nlist=args.nlist, M=args.M_pq, nbits=args.nbits,
                                 strategy=strategy, layout=args.layout, block_size=args.blk_sz,
                                 metric=args.metric, seed=args.seed, iters=args.iters)
    except ValueError as e:
        raise UsageError(str(e))
    return index


# -- subcommands ------------------------------------------------------------

def cmd_build(args, out) -> None:
    strategy = strategy_from_args(args)
    base, _ = _data_from_args(args, need_queries=False)
    train = _load_set(args.train) if args.train else None
    index = _train(args, base, strategy, train)
    index.add(base)
    _save_index(index, args.out)
    print(json.dumps(index.info(), sort_keys=True), file=out)


def cmd_search(args, out) -> None:
    index = _load_index(args.index)
    queries = _load_set(args.queries)
    try:
        res = index.search(queries, args.k, args.nprobe, args.k_factor, threads=args.threads)
    except ValueError as e:
        raise UsageError(str(e))
    if args.out:
        _write(args.out, _as_int32(res.ids, "result"), "ivecs")
    else:
        for row in res.ids:
            print(" ".join(str(int(v)) for v in row), file=out)
    if args.dist_out:
        _write(args.dist_out, res.distances.astype(np.float32), "fvecs")


def _ground_truth(args, base, queries):
    if args.gt:
        try:
            ids = read_vecs(args.gt, "ivecs").astype(np.int64)
        except OSError as e:
            raise DataError(f"cannot read {args.gt}: {e.strerror or e}")
        except ValueError as e:
            raise DataError(str(e))
        if ids.shape[0] != queries.count or ids.shape[1] < args.k:
            raise UsageError("ground truth does not match the queries or is shallower than --k")
        rows = {int(v): r for r, v in enumerate(base.ids.tolist())}
        dist = np.stack([pairwise_distances(base.data[[rows[int(v)] for v in ids[i]]],
                                            queries.data[i], args.metric)
                         for i in range(queries.count)])
        return GroundTruth(ids, dist, args.metric)
    return exact_knn(base, queries, args.k, args.metric)


def cmd_bench(args, out) -> None:
    if args.index:
        if not (args.base and args.queries):
            raise UsageError("--index needs --base (for ground truth) and --queries")
        indexes = [_load_index(args.index)]
        base, queries = _data_from_args(args, need_queries=True)
    else:
        base, queries = _data_from_args(args, need_queries=True)
        strategies = [strategy_from_args(args, name) for name in args.strategy]
        first = _train(args, base, strategies[0])
        indexes = []
        for s in strategies:
            idx = RairsIndex(first.quantizer, first.codebook, s, args.layout, args.blk_sz)
            idx.add(base)
            indexes.append(idx)
    gt = _ground_truth(args, base, queries)
    report = BenchReport()
    names = args.strategy if not args.index else [None]
    for name, idx in zip(names, indexes):
        try:
            report = report.merge(sweep(idx, queries, gt, args.k, args.nprobe, args.k_factor,
                                        one_at_a_time=args.one_at_a_time, threads=args.threads,
                                        label=name))
        except ValueError as e:
            raise UsageError(str(e))
    text = report.to_csv()
    if args.csv:
        try:
            report.to_csv(args.csv)
        except OSError as e:
            raise DataError(f"cannot write {args.csv}: {e.strerror or e}")
    else:
        out.write(text)
    if args.cdf_dir:
        try:
            os.makedirs(args.cdf_dir, exist_ok=True)
            for i, p in enumerate(report.points):
                fn = os.path.join(args.cdf_dir, f"cdf_{i:03d}_{p.strategy}_nprobe{p.nprobe}.csv")
                report.cdf_csv(i, fn)
        except OSError as e:
            raise DataError(f"cannot write CDF files: {e.strerror or e}")


def cmd_gt(args, out) -> None:
    base = _load_set(args.base)
    queries = _load_set(args.queries)
    try:
        gt = exact_knn(base, queries, args.k, args.metric)
    except ValueError as e:
        raise UsageError(str(e))
    _write(args.out, _as_int32(gt.ids, "ground-truth"), "ivecs")


def cmd_stats(args, out) -> None:
    index = _load_index(args.index)
    vs = index.stored_vectors()
    st = cell_stats(index.assign(vs.data) if vs.count else np.zeros((0, 2), np.int64),
                    index.block_size)
    summary = {
        "n_vectors": st.n_vectors, "n_cells": st.n_cells, "n_pair_cells": st.n_pair_cells,
        "block_size": st.block_size, "large_cell_fraction": st.large_cell_fraction,
        "paired_fraction": st.paired_fraction, "shared_block_vectors": st.shared_block_vectors,
        "misc_vectors": st.misc_vectors, "stored_copies": st.stored_copies,
    }
    print(json.dumps(summary, sort_keys=True), file=out)
    if args.cdf:
        sizes, frac = st.cdf()
        try:
            with open(args.cdf, "w") as fh:
                fh.write("cell_size,cum_fraction\n")
                for s, f in zip(sizes.tolist(), frac.tolist()):
                    fh.write(f"{s},{f!r}\n")
        except OSError as e:
            raise DataError(f"cannot write {args.cdf}: {e.strerror or e}")


def cmd_verify_air(args, out) -> None:
    if args.l_m <= 0:
        raise UsageError("--l-m must be positive")
    x, c, cands = random_air_instance(args.dim, args.l_m, args.candidates, args.seed)
    try:
        res = verify_air(args.dim, args.l_m, x, c, cands, args.samples, args.seed)
    except ValueError as e:
        raise UsageError(str(e))
    print(json.dumps({
        "D": res.D, "l_m": res.l_m, "lambda_theory": res.lam_theory, "samples": res.samples,
        "correlation": res.correlation, "fitted_ratio": res.fitted_ratio,
        "ratio_spread": res.ratio_spread,
    }, sort_keys=True), file=out)
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write("candidate,mc_loss,closed_form\n")
                for i, (a, b) in enumerate(res.pairs.tolist()):
                    fh.write(f"{i},{a!r},{b!r}\n")
        except OSError as e:
            raise DataError(f"cannot write {args.out}: {e.strerror or e}")


def cmd_insert(args, out) -> None:
    index = _load_index(args.index)
    vs = _load_set(args.vectors)
    if args.id_start is None:
        stored = index.stored_vectors().ids
        start = int(stored.max()) + 1 if stored.size else 0
    else:
        start = args.id_start
    try:
        index.add(vs.data, np.arange(start, start + vs.count, dtype=np.uint64))
    except ValueError as e:
        raise UsageError(str(e))
    _save_index(index, args.out or args.index)
    print(json.dumps({"inserted": vs.count, "first_id": start, "ntotal": index.ntotal}),
          file=out)


def cmd_delete(args, out) -> None:
    if bool(args.ids) == bool(args.ids_file):
        raise UsageError("give exactly one of --ids and --ids-file")
    if args.ids:
        try:
            ids = [int(v) for v in args.ids.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad --ids {args.ids!r}")
    else:
        try:
            with open(args.ids_file) as fh:
                ids = [int(line) for line in fh if line.strip()]
        except OSError as e:
            raise DataError(f"cannot read {args.ids_file}: {e.strerror or e}")
        except ValueError:
            raise DataError(f"{args.ids_file}: expected one integer id per line")
    index = _load_index(args.index)
    missing = index.delete(ids)
    _save_index(index, args.out or args.index)
    print(json.dumps({"deleted": len(ids) - len(missing), "missing": missing,
                      "ntotal": index.ntotal}), file=out)


def cmd_info(args, out) -> None:
    index = _load_index(args.index)
    print(json.dumps(index.info(), sort_keys=True), file=out)


COMMANDS = {
    "build": cmd_build, "search": cmd_search, "bench": cmd_bench, "gt": cmd_gt,
    "stats": cmd_stats, "verify-air": cmd_verify_air, "insert": cmd_insert,
    "delete": cmd_delete, "info": cmd_info,
}


def run(argv: Optional[List[str]] = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    except UsageError as e:
        print(f"rairs: error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"rairs: error: {e}", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args, out)
    except UsageError as e:
        print(f"rairs {args.command}: error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"rairs {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
