"""Synthetic corpora, correlated rankers and Position-Based-Model clicks.

Randomness is split by purpose. A caller passes one seeded
``numpy.random.Generator`` per operation; :func:`simulate` derives those from
a single integer seed so that, for instance, changing ``sweeps`` never
perturbs the corpus or the rankers. Click draws use one stream per
(ranker, query), so records are reproducible independently of the order in
which they are generated, and a run with more sweeps extends (rather than
reshuffles) the log of a run with fewer.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .corpus_log import ClickLogRecord, Corpus, LogCollection, QueryRecord, RankingTable
from .errors import InconsistencyError, ValidationError

RANKERS = ("A", "B")
MODES = ("sweep", "iid-sampling")

# stream tags for np.random.default_rng([seed, tag, ...])
_CORPUS, _RANKERS, _CLICKS, _QUERIES = 0, 1, 2, 3


@dataclass(frozen=True)
class SimulationConfig:
    eta: float = 1.0
    eps_minus: float = 0.1
    overlap: float = 0.8
    sweeps: int = 5
    M: int = 10
    num_queries: int = 1000
    candidates_per_query: int = 20
    relevant_fraction: float = 0.25
    seed: int = 0
    mode: str = "sweep"
    sigma: float = 1.0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValidationError("eta must be >= 0")
        if not 0 <= self.eps_minus <= 1:
            raise ValidationError("eps_minus must lie in [0, 1]")
        if not 0 <= self.overlap <= 1:
            raise ValidationError("overlap must lie in [0, 1]")
        if int(self.sweeps) != self.sweeps or self.sweeps < 1:
            raise ValidationError("sweeps must be a positive integer")
        if int(self.M) != self.M or self.M < 2:
            raise ValidationError("M must be an integer >= 2")
        if int(self.num_queries) != self.num_queries or self.num_queries < 1:
            raise ValidationError("num_queries must be a positive integer")
        if int(self.candidates_per_query) != self.candidates_per_query or (
            self.candidates_per_query < 2
        ):
            raise ValidationError("candidates_per_query must be an integer >= 2")
        if not 0 < self.relevant_fraction < 1:
            raise ValidationError("relevant_fraction must lie in (0, 1)")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if not self.sigma >= 0:
            raise ValidationError("sigma must be >= 0")

    def replace(self, **changes) -> "SimulationConfig":
        return SimulationConfig(**{**asdict(self), **changes})


def load_config(path, **overrides) -> SimulationConfig:
    """Read a flat JSON object of :class:`SimulationConfig` fields.

    Unknown keys are rejected; absent keys keep their defaults.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    known = {f.name for f in fields(SimulationConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {unknown}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SimulationConfig(**data)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def save_config(config: SimulationConfig, path) -> None:
    Path(path).write_text(json.dumps(asdict(config), indent=2) + "\n", encoding="utf-8")


def streams(seed):
    """Per-purpose generators ``(corpus, rankers, clicks)`` for one seed."""
    return tuple(np.random.default_rng([seed, tag]) for tag in (_CORPUS, _RANKERS, _CLICKS))


def true_propensities(eta: float, M: int) -> np.ndarray:
    """Examination probabilities ``(1/r) ** eta`` for ranks ``1..M``."""
    if not eta >= 0 or M < 1:
        raise ValidationError("need eta >= 0 and M >= 1")
    return (1.0 / np.arange(1, M + 1)) ** eta


def generate_corpus(config: SimulationConfig, rng: np.random.Generator) -> Corpus:
    n, c = config.num_queries, config.candidates_per_query
    labels = rng.random((n, c)) < config.relevant_fraction
    qw, dw = len(str(n - 1)), len(str(c - 1))
    queries = []
    for i in range(n):
        docs = tuple(f"d{j:0{dw}d}" for j in range(c))
        queries.append(
            QueryRecord(f"q{i:0{qw}d}", docs, {d: int(v) for d, v in zip(docs, labels[i])})
        )
    return Corpus(tuple(queries))


def generate_rankers(
    corpus: Corpus, overlap: float, rng: np.random.Generator, sigma: float = 1.0
) -> RankingTable:
    """Two rankers scoring ``relevance + noise`` with correlated noise.

    Noise for ranker ``i`` is ``sigma * (sqrt(overlap) * z_shared +
    sqrt(1 - overlap) * z_i)``, so ``overlap`` is the correlation between
    the two rankers' perturbations. Ties fall back to document id order.
    """
    if not 0 <= overlap <= 1:
        raise ValidationError("overlap must lie in [0, 1]")
    a, b = np.sqrt(overlap), np.sqrt(1.0 - overlap)
    entries = {}
    for q in corpus.queries:
        docs = np.array(q.candidates)
        rel = np.array([q.relevance[d] for d in q.candidates], dtype=float)
        z = rng.standard_normal((3, len(docs)))
        by_id = np.argsort(docs, kind="stable")
        for i, ranker in enumerate(RANKERS):
            score = rel + sigma * (a * z[0] + b * z[1 + i])
            # sort by id first, then a stable descending sort on score
            order = by_id[np.argsort(-score[by_id], kind="stable")]
            entries[(ranker, q.query_id)] = tuple(docs[order].tolist())
    return RankingTable(entries)


def click_probabilities(ranking, relevance, eta, eps_minus):
    p = true_propensities(eta, len(ranking))
    rel = np.array([relevance[d] for d in ranking], dtype=bool)
    return np.where(rel, p, p * eps_minus)


def _click_blocks(rankings, corpus, config, rng):
    """Yield ``(ranker, order, blocks)`` per ranker.

    ``order`` lists query indices in log order and ``blocks[qi]`` holds the
    ``(ranking, clicks)`` matrix with one row per occurrence of query ``qi``.
    """
    base = int(rng.integers(2**63))
    qids = corpus.query_ids
    n_per_ranker = config.sweeps * len(qids)
    for ri, ranker in enumerate(rankings.rankers):
        if config.mode == "sweep":
            order = np.tile(np.arange(len(qids)), config.sweeps)
        else:
            order = np.random.default_rng([base, _QUERIES, ri]).integers(
                len(qids), size=n_per_ranker
            )
        occurrences = np.bincount(order, minlength=len(qids))
        blocks = {}
        for qi in np.flatnonzero(occurrences):
            qid = qids[qi]
            key = (ranker, qid)
            if key not in rankings:
                raise InconsistencyError(f"no ranking for ranker {ranker!r} on query {qid!r}")
            ranking = rankings[key]
            probs = click_probabilities(
                ranking, corpus[qid].relevance, config.eta, config.eps_minus
            )
            u = np.random.default_rng([base, _CLICKS, ri, qi]).random(
                (occurrences[qi], len(ranking))
            )
            blocks[qi] = (ranking, (u < probs).astype(np.int8))
        yield ranker, order, blocks


def simulate_clicks(
    rankings: RankingTable,
    corpus: Corpus,
    config: SimulationConfig,
    rng: np.random.Generator,
) -> LogCollection:
    """Position-Based-Model click logs for every ranker in ``rankings``.

    A document at displayed rank ``r`` is clicked with probability
    ``(1/r)**eta`` if relevant and ``eps_minus * (1/r)**eta`` otherwise.
    In sweep mode every ranker logs every query ``sweeps`` times; in
    iid-sampling mode each ranker logs ``sweeps * num_queries`` queries drawn
    uniformly with replacement.
    """
    qids = corpus.query_ids
    records = []
    for ranker, order, blocks in _click_blocks(rankings, corpus, config, rng):
        rows = {qi: (ranking, clicks.tolist()) for qi, (ranking, clicks) in blocks.items()}
        seen = np.zeros(len(qids), dtype=np.int64)
        for qi in order:
            ranking, clicks = rows[qi]
            records.append(ClickLogRecord(ranker, qids[qi], ranking, tuple(clicks[seen[qi]])))
            seen[qi] += 1
    return LogCollection(tuple(records))


def simulate_counts(
    rankings: RankingTable,
    corpus: Corpus,
    config: SimulationConfig,
    rng: np.random.Generator,
):
    """Aggregate form of :func:`simulate_clicks` for large experiments.

    Uses the same random draws but skips building records. Returns
    ``(counts, log_sizes)`` where ``counts[(query, doc, k)] = [impressions,
    clicks]`` for ranks ``k <= config.M``, exactly what
    :func:`posbias.interventions.count_impressions` yields on the log.
    """
    qids = corpus.query_ids
    M = config.M
    counts: dict = {}
    log_sizes = {}
    for ranker, order, blocks in _click_blocks(rankings, corpus, config, rng):
        log_sizes[ranker] = len(order)
        for qi, (ranking, clicks) in blocks.items():
            n = clicks.shape[0]
            per_pos = clicks[:, :M].sum(axis=0).tolist()
            qid = qids[qi]
            for k, d in enumerate(ranking[:M], start=1):
                cell = counts.setdefault((qid, d, k), [0, 0])
                cell[0] += n
                cell[1] += per_pos[k - 1]
    return counts, log_sizes


@dataclass(frozen=True)
class Simulation:
    config: SimulationConfig
    corpus: Corpus
    rankings: RankingTable
    logs: LogCollection


def simulate(config: SimulationConfig, seed: int | None = None) -> Simulation:
    """Corpus, rankers and logs from one integer seed (default ``config.seed``)."""
    seed = config.seed if seed is None else seed
    corpus_rng, ranker_rng, click_rng = streams(seed)
    corpus = generate_corpus(config, corpus_rng)
    rankings = generate_rankers(corpus, config.overlap, ranker_rng, config.sigma)
    logs = simulate_clicks(rankings, corpus, config, click_rng)
    return Simulation(config, corpus, rankings, logs)
