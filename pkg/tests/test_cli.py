import csv
import io
import json

import numpy as np
import pytest

from rairs import RairsIndex, exact_knn, load_vectors, read_vecs, synthetic_split, write_vecs
from rairs.bench import random_air_instance
from rairs.cli import build_parser, read_config, run

SMALL = ["--synthetic-n", "2000", "--synthetic-dim", "8", "--synthetic-clusters", "16",
         "--synthetic-spread", "0.1", "--nlist", "16", "--iters", "8"]


def _run(*argv):
    buf = io.StringIO()
    code = run([str(a) for a in argv], buf)
    return code, buf.getvalue()


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    base, queries = synthetic_split(2000, 30, 8, 16, seed=3, spread=0.1)
    write_vecs(d / "base.fvecs", base.data)
    write_vecs(d / "q.fvecs", queries.data)
    return d, base, queries


@pytest.fixture(scope="module")
def built(files):
    d, _, _ = files
    path = d / "idx.bin"
    code, text = _run("build", "--base", d / "base.fvecs", "--out", path, "--nlist", 16,
                      "--iters", 8, "--strategy", "air", "--lambda", 0.5, "--n-cands", 10)
    assert code == 0
    return path, json.loads(text)


def _bench_columns(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    return [(r["strategy"], r["nprobe"], r["recall"], r["scan_dco"], r["refine_dco"])
            for r in rows]


class TestGroundTruth:
    def test_matches_exact_knn(self, files):
        d, base, queries = files
        out = d / "gt.ivecs"
        assert _run("gt", "--base", d / "base.fvecs", "--queries", d / "q.fvecs",
                    "--k", 100, "--out", out)[0] == 0
        np.testing.assert_array_equal(read_vecs(out, "ivecs"),
                                      exact_knn(base, queries, 100).ids)


class TestBuildInfo:
    def test_info_reports_parameters(self, built):
        path, _ = built
        code, text = _run("info", "--index", path)
        info = json.loads(text)
        assert code == 0
        assert info["strategy"]["lam"] == 0.5 and info["strategy"]["n_cands"] == 10
        assert (info["nlist"], info["ntotal"], info["M_PQ"], info["nbits"]) == (16, 2000, 4, 4)
        assert info["block_size"] == 32

    def test_build_prints_same_info(self, built):
        path, printed = built
        assert printed == json.loads(_run("info", "--index", path)[1])

    def test_defaults(self):
        args = build_parser().parse_args(["build", "--out", "x"])
        assert (args.strategy, args.lam, args.n_cands, args.blk_sz, args.nbits) == \
            ("air", 0.5, 10, 32, 4)
        args = build_parser().parse_args(["bench"])
        assert args.k == 10 and args.k_factor is None and args.threads >= 1

    def test_synthetic_build(self, tmp_path):
        code, text = _run("build", "--out", tmp_path / "s.bin", "--strategy", "air-strict",
                          *SMALL)
        assert code == 0
        assert json.loads(text)["strategy"]["strict"] is True


class TestSearch:
    def test_matches_library(self, files, built):
        d, _, queries = files
        path, _ = built
        out, dist = d / "res.ivecs", d / "res.fvecs"
        assert _run("search", "--index", path, "--queries", d / "q.fvecs", "--k", 5,
                    "--nprobe", 3, "--out", out, "--dist-out", dist, "--threads", 1)[0] == 0
        ref = RairsIndex.load(path).search(queries, 5, 3)
        np.testing.assert_array_equal(read_vecs(out, "ivecs"), ref.ids)
        np.testing.assert_array_equal(load_vectors(dist).data, ref.distances.astype(np.float32))

    def test_prints_ids(self, files, built):
        d, _, queries = files
        code, text = _run("search", "--index", built[0], "--queries", d / "q.fvecs", "--k", 3)
        assert code == 0
        lines = text.strip().splitlines()
        assert len(lines) == queries.count and len(lines[0].split()) == 3


class TestBench:
    ARGS = ["bench", *SMALL, "--synthetic-queries", 40, "--nprobe", "1,2,4,8",
            "--strategy", "single,air", "--threads", 1, "--seed", 5]

    def test_deterministic_columns(self):
        code1, a = _run(*self.ARGS)
        code2, b = _run(*self.ARGS)
        assert code1 == code2 == 0
        cols = _bench_columns(a)
        assert cols == _bench_columns(b)
        assert [c[:2] for c in cols] == [(s, str(n)) for s in ("single", "air")
                                         for n in (1, 2, 4, 8)]

    def test_csv_and_cdf_files(self, tmp_path):
        code, text = _run(*self.ARGS, "--csv", tmp_path / "sweep.csv", "--cdf-dir",
                          tmp_path / "cdf")
        assert code == 0 and text == ""
        assert len(_bench_columns((tmp_path / "sweep.csv").read_text())) == 8
        assert len(list((tmp_path / "cdf").iterdir())) == 8

    def test_prebuilt_index_with_gt_file(self, files, built):
        d, base, queries = files
        gt = d / "gt10.ivecs"
        write_vecs(gt, exact_knn(base, queries, 10).ids.astype(np.int32))
        with_file = _run("bench", "--index", built[0], "--base", d / "base.fvecs", "--queries",
                         d / "q.fvecs", "--gt", gt, "--nprobe", "1,16", "--threads", 1)
        exact = _run("bench", "--index", built[0], "--base", d / "base.fvecs", "--queries",
                     d / "q.fvecs", "--nprobe", "1,16", "--threads", 1)
        assert with_file[0] == exact[0] == 0
        assert _bench_columns(with_file[1]) == _bench_columns(exact[1])
        assert _bench_columns(exact[1])[1][2] == "1.0"


class TestConfig:
    def test_read_config(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# recipe\nn-cands = 8\n\nlambda=0.25\n")
        assert read_config(p) == {"n_cands": "8", "lambda": "0.25"}

    def test_flags_win(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("lambda=0.25\nn_cands=8\nnlist=16\niters=8\nsynthetic_n=2000\n"
                       "synthetic_dim=8\n")
        code, text = _run("build", "--config", cfg, "--out", tmp_path / "i.bin",
                          "--n-cands", 12)
        info = json.loads(text)
        assert code == 0
        assert info["strategy"]["lam"] == 0.25 and info["strategy"]["n_cands"] == 12
        assert info["nlist"] == 16 and info["ntotal"] == 2000

    def test_required_from_config(self, tmp_path, built):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(f"index={built[0]}\n")
        assert _run("info", "--config", cfg)[0] == 0

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("bogus=1\n")
        assert _run("build", "--config", cfg, "--out", tmp_path / "i.bin")[0] == 2

    def test_bad_value(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("nlist=many\n")
        assert _run("build", "--config", cfg, "--out", tmp_path / "i.bin")[0] == 2

    def test_missing_config(self, tmp_path):
        assert _run("build", "--config", tmp_path / "nope", "--out", tmp_path / "i")[0] == 1


class TestExitCodes:
    def test_unknown_flag(self):
        assert _run("build", "--out", "x", "--bogus")[0] == 2

    def test_no_command(self):
        assert _run()[0] == 2

    def test_bad_strategy(self):
        assert _run("build", "--out", "x", "--strategy", "nope")[0] == 2

    def test_bad_nprobe_list(self):
        assert _run("bench", "--nprobe", "1,x")[0] == 2

    def test_missing_index(self, tmp_path):
        assert _run("info", "--index", tmp_path / "missing.bin")[0] == 1

    def test_corrupt_index(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"not an index")
        assert _run("info", "--index", p)[0] == 1

    def test_missing_base(self, tmp_path):
        assert _run("gt", "--base", tmp_path / "b.fvecs", "--queries", tmp_path / "q.fvecs",
                    "--out", tmp_path / "g.ivecs")[0] == 1

    def test_invalid_training_setup(self, tmp_path):
        # more lists than vectors
        assert _run("build", "--out", tmp_path / "i.bin", "--synthetic-n", 10,
                    "--nlist", 64)[0] == 2


class TestUpdates:
    def test_insert_then_delete(self, files, built, tmp_path):
        d, base, _ = files
        extra = tmp_path / "extra.fvecs"
        write_vecs(extra, base.data[:50] + np.float32(0.01))
        idx1 = tmp_path / "i1.bin"
        code, text = _run("insert", "--index", built[0], "--vectors", extra, "--out", idx1)
        assert code == 0
        assert json.loads(text) == {"inserted": 50, "first_id": 2000, "ntotal": 2050}
        ids_file = tmp_path / "ids.txt"
        ids_file.write_text("2000\n2001\n5\n")
        code, text = _run("delete", "--index", idx1, "--ids-file", ids_file)
        assert code == 0
        assert json.loads(text) == {"deleted": 3, "missing": [], "ntotal": 2047}
        code, text = _run("delete", "--index", idx1, "--ids", "6,99999")
        assert json.loads(text)["missing"] == [99999]
        stored = RairsIndex.load(idx1).stored_vectors().ids
        assert not {5, 6, 2000, 2001} & set(stored.tolist())

    def test_delete_needs_one_source(self, built):
        assert _run("delete", "--index", built[0])[0] == 2

    def test_insert_duplicate_ids(self, files, built, tmp_path):
        d, base, _ = files
        extra = tmp_path / "dup.fvecs"
        write_vecs(extra, base.data[:3])
        assert _run("insert", "--index", built[0], "--vectors", extra, "--id-start", 0,
                    "--out", tmp_path / "o.bin")[0] == 2


class TestStatsAndVerify:
    def test_stats(self, built, tmp_path):
        cdf = tmp_path / "cells.csv"
        code, text = _run("stats", "--index", built[0], "--cdf", cdf)
        st = json.loads(text)
        assert code == 0 and st["n_vectors"] == 2000
        assert st["shared_block_vectors"] + st["misc_vectors"] == 2000
        info = json.loads(_run("info", "--index", built[0])[1])
        assert st["stored_copies"] == info["shared_slots"] + info["misc_items"]
        rows = cdf.read_text().splitlines()
        assert rows[0] == "cell_size,cum_fraction" and float(rows[-1].split(",")[1]) == 1.0

    def test_verify_air(self, tmp_path):
        out = tmp_path / "air.csv"
        code, text = _run("verify-air", "--samples", 20000, "--candidates", 20, "--out", out)
        res = json.loads(text)
        assert code == 0
        assert res["correlation"] > 0.99
        assert len(out.read_text().splitlines()) == 21

    def test_verify_air_rejects_bad_radius(self):
        assert _run("verify-air", "--l-m", -1)[0] == 2

    def test_random_instance_ranges(self):
        x, c, cands = random_air_instance(8, 0.5, 50, 3)
        r = np.linalg.norm(c - x)
        assert 0.1 <= r <= 1.0
        norms = np.linalg.norm(cands - x, axis=1)
        assert np.all((norms >= r + 0.5 - 1e-12) & (norms <= r + 1.5 + 1e-12))
