import pytest

from posbias.corpus_log import ClickLogRecord, Corpus, LogCollection, QueryRecord, RankingTable
from posbias.simulator import SimulationConfig, simulate


@pytest.fixture
def tiny_corpus():
    return Corpus((
        QueryRecord("q1", ("a", "b", "c"), {"a": 1, "b": 0, "c": 0}),
        QueryRecord("q2", ("x", "y"), {"x": 0, "y": 1}),
    ))


@pytest.fixture
def swap_rankings():
    return RankingTable({
        ("f1", "q1"): ("a", "b", "c"),
        ("f2", "q1"): ("b", "a", "c"),
    })


def make_logs(rows):
    """``rows`` is a list of (ranker, query, ranking, clicks) tuples."""
    return LogCollection(tuple(ClickLogRecord(r, q, tuple(rk), tuple(c)) for r, q, rk, c in rows))


@pytest.fixture(scope="session")
def small_sim():
    cfg = SimulationConfig(num_queries=120, candidates_per_query=8, M=6, sweeps=3,
                           overlap=0.5, seed=11)
    return simulate(cfg)


# one verdict line per acceptance criterion, printed after the test session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
