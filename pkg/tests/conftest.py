import numpy as np
import pytest

from rairs import (CoarseQuantizer, PQCodebook, RairsIndex, StrategyConfig, exact_knn,
                   synthetic_split)


@pytest.fixture(scope="session")
def small_split():
    """2k x 8 base and 50 queries from 16 blobs."""
    return synthetic_split(2000, 50, 8, 16, seed=3, spread=0.1)


@pytest.fixture(scope="session")
def small_parts(small_split):
    base, _ = small_split
    cq = CoarseQuantizer.train(base, 16, seed=0)
    pq = PQCodebook.train(base, seed=0)
    return cq, pq


@pytest.fixture(scope="session")
def small_gt(small_split):
    base, queries = small_split
    return exact_knn(base, queries, 10)


def build_index(parts, base, strategy="air", layout=None, block_size=32, **kw):
    cq, pq = parts
    cfg = StrategyConfig.from_name(strategy, **kw) if isinstance(strategy, str) else strategy
    idx = RairsIndex(cq, pq, cfg, layout=layout, block_size=block_size)
    idx.add(base)
    return idx


@pytest.fixture(scope="session")
def seil_set():
    """10k x 16 set where RAIR shares many cells across 32 lists."""
    base, queries = synthetic_split(10000, 200, 16, 8, seed=1, spread=0.2)
    cq = CoarseQuantizer.train(base, 32, seed=0)
    pq = PQCodebook.train(base, seed=0)
    return base, queries, (cq, pq)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance criteria report ----------------------------------------------

_CRITERIA = []


@pytest.fixture
def measured(request):
    """Dict of values printed next to the criterion's pass/fail line."""
    values = {}
    request.node.user_properties.append(("measured", values))
    return values


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    failed_setup = rep.when == "setup" and not rep.passed
    if rep.when == "call" or failed_setup:
        values = dict(item.user_properties).get("measured", {})
        _CRITERIA.append((mark.args[0], mark.args[1], rep.passed, values))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, passed, values in sorted(_CRITERIA, key=lambda c: c[0]):
        detail = ", ".join(f"{k}={v}" for k, v in values.items())
        line = f"{'PASS' if passed else 'FAIL'}  {num:>2}. {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
