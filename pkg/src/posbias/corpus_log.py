"""Relevance corpora, ranker outputs and click logs, plus their file formats.

All three file types are line-delimited JSON. The first line is a header
object naming the format and its version, every following non-blank line is
one self-contained record::

    {"format": "corpus", "version": 1}
    {"query_id": "q1", "candidates": ["a", "b"], "relevance": {"a": 1, "b": 0}}

    {"format": "clicklog", "version": 1}
    {"ranker_id": "A", "query_id": "q1", "ranking": ["b", "a"], "clicks": [0, 1]}

    {"format": "rankings", "version": 1}
    {"ranker_id": "A", "query_id": "q1", "ranking": ["b", "a"]}

Identifiers are opaque strings. Loaded values are never mutated afterwards.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import InconsistencyError, ParseError, ValidationError

FORMAT_VERSION = 1
_BINARY = frozenset((0, 1))


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    candidates: tuple[str, ...]
    relevance: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise ValidationError(f"query {self.query_id!r} has an empty candidate list")
        if len(set(self.candidates)) != len(self.candidates):
            dup = [d for d, n in Counter(self.candidates).items() if n > 1]
            raise ValidationError(f"query {self.query_id!r} has duplicate candidates {dup}")
        missing = [d for d in self.candidates if d not in self.relevance]
        if missing:
            raise ValidationError(f"query {self.query_id!r}: no relevance label for {missing}")
        extra = set(self.relevance) - set(self.candidates)
        if extra:
            raise ValidationError(
                f"query {self.query_id!r}: relevance given for non-candidates {sorted(extra)}"
            )
        for d in self.candidates:
            if self.relevance[d] not in (0, 1) or isinstance(self.relevance[d], bool):
                raise ValidationError(
                    f"query {self.query_id!r}: relevance of {d!r} must be 0 or 1"
                )


@dataclass(frozen=True)
class Corpus:
    """Queries with their ordered candidate lists and binary relevance."""

    queries: tuple[QueryRecord, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        index = {}
        for q in self.queries:
            if q.query_id in index:
                raise ValidationError(f"duplicate query_id {q.query_id!r}")
            index[q.query_id] = q
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.queries)

    def __getitem__(self, query_id) -> QueryRecord:
        return self._index[query_id]

    def __contains__(self, query_id):
        return query_id in self._index

    @property
    def query_ids(self) -> list[str]:
        return [q.query_id for q in self.queries]


@dataclass(frozen=True)
class RankingTable:
    """Deterministic ranker outputs: ``(ranker_id, query_id) -> ranking``."""

    entries: Mapping[tuple[str, str], tuple[str, ...]]

    def __post_init__(self):
        entries = {}
        for key, ranking in self.entries.items():
            ranking = tuple(ranking)
            if len(set(ranking)) != len(ranking):
                raise ValidationError(f"ranking for {key} contains duplicate documents")
            entries[tuple(key)] = ranking
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, key) -> tuple[str, ...]:
        return self.entries[key]

    def __contains__(self, key):
        return key in self.entries

    @property
    def rankers(self) -> list[str]:
        return sorted({r for r, _ in self.entries})

    def queries_of(self, ranker_id) -> list[str]:
        return [q for r, q in self.entries if r == ranker_id]

    def restrict(self, keys: Iterable[tuple[str, str]]) -> "RankingTable":
        return RankingTable({k: self.entries[k] for k in keys})

    def check_against(self, corpus: Corpus) -> None:
        """Raise unless every entry is a permutation of its query's candidates."""
        for (ranker, qid), ranking in self.entries.items():
            if qid not in corpus:
                raise ValidationError(f"ranker {ranker!r}: unknown query_id {qid!r}")
            if set(ranking) != set(corpus[qid].candidates) or len(ranking) != len(
                corpus[qid].candidates
            ):
                raise ValidationError(
                    f"ranking of ranker {ranker!r} for {qid!r} is not a permutation "
                    "of the candidate set"
                )


@dataclass(frozen=True)
class ClickLogRecord:
    ranker_id: str
    query_id: str
    ranking: tuple[str, ...]
    clicks: tuple[int, ...]

    def __post_init__(self):
        if len(self.clicks) != len(self.ranking):
            raise ValidationError(
                f"click vector of length {len(self.clicks)} does not match "
                f"ranking of length {len(self.ranking)} ({self.ranker_id!r}, {self.query_id!r})"
            )
        if not _BINARY.issuperset(self.clicks):
            raise ValidationError("click entries must be 0 or 1")


@dataclass(frozen=True)
class LogCollection:
    """Click logs of several rankers; ``log_sizes`` is recomputed, never trusted."""

    records: tuple[ClickLogRecord, ...]
    log_sizes: dict = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "log_sizes", dict(Counter(r.ranker_id for r in self.records)))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __add__(self, other: "LogCollection") -> "LogCollection":
        return LogCollection(self.records + other.records)

    def check_against(self, corpus: Corpus) -> None:
        for rec in self.records:
            if rec.query_id not in corpus:
                raise ValidationError(f"unknown query_id {rec.query_id!r}")
            cands = corpus[rec.query_id].candidates
            if len(rec.ranking) != len(cands) or set(rec.ranking) != set(cands):
                unknown = sorted(set(rec.ranking) - set(cands))
                detail = f" (unknown documents {unknown})" if unknown else ""
                raise ValidationError(
                    f"ranking for {rec.query_id!r} by {rec.ranker_id!r} is not a "
                    f"permutation of the candidate set{detail}"
                )


def derive_rankings(logs: LogCollection) -> RankingTable:
    """Recover each ranker's (deterministic) ranking per query from its log."""
    if not len(logs):
        raise ValidationError("cannot derive rankings from an empty log")
    entries: dict[tuple[str, str], tuple[str, ...]] = {}
    for rec in logs:
        key = (rec.ranker_id, rec.query_id)
        seen = entries.setdefault(key, rec.ranking)
        if seen != rec.ranking:
            raise InconsistencyError(
                f"ranker {rec.ranker_id!r} presented two different rankings for "
                f"query {rec.query_id!r}: {list(seen)} vs {list(rec.ranking)}"
            )
    return RankingTable(entries)


def cross_check_rankings(supplied: RankingTable, logs: LogCollection) -> None:
    """Raise if a supplied ranking table contradicts what the logs show."""
    for key, ranking in derive_rankings(logs).entries.items():
        if key not in supplied:
            raise InconsistencyError(f"logs contain {key} but the ranking table does not")
        if supplied[key] != ranking:
            raise InconsistencyError(f"ranking table and logs disagree for {key}")


# ---------------------------------------------------------------------------
# line-delimited JSON


def _read_records(path, expected_format):
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    lines_iter = ((i, ln) for i, ln in enumerate(lines, start=1) if ln.strip())
    first = next(lines_iter, None)
    if first is None:
        return
    lineno, text = first
    header = _parse_line(text, lineno)
    if header.get("format") != expected_format:
        raise ParseError(
            f"expected header with format {expected_format!r}, got {header!r}", lineno
        )
    if header.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported {expected_format} version {header.get('version')!r}", lineno)
    for lineno, text in lines_iter:
        yield lineno, _parse_line(text, lineno)


def _parse_line(text, lineno):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object", lineno)
    return obj


def _require(obj, key, kind, lineno):
    if key not in obj:
        raise ParseError(f"missing field {key!r}", lineno)
    value = obj[key]
    if not isinstance(value, kind):
        raise ParseError(f"field {key!r} has the wrong type", lineno)
    return value


def _write_lines(path, header, rows):
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for row in rows:
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def load_corpus(path) -> Corpus:
    queries = []
    seen = set()
    for lineno, obj in _read_records(path, "corpus"):
        qid = _require(obj, "query_id", str, lineno)
        cands = _require(obj, "candidates", list, lineno)
        rel = _require(obj, "relevance", dict, lineno)
        if qid in seen:
            raise ValidationError(f"line {lineno}: duplicate query_id {qid!r}")
        seen.add(qid)
        try:
            queries.append(QueryRecord(qid, tuple(cands), rel))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return Corpus(tuple(queries))


def save_corpus(corpus: Corpus, path) -> None:
    rows = (
        {
            "query_id": q.query_id,
            "candidates": list(q.candidates),
            "relevance": {d: int(q.relevance[d]) for d in q.candidates},
        }
        for q in corpus.queries
    )
    _write_lines(path, {"format": "corpus", "version": FORMAT_VERSION}, rows)


def load_logs(path, corpus: Corpus | None = None) -> LogCollection:
    """Load a click log; with ``corpus`` every record is resolved against it."""
    records = []
    for lineno, obj in _read_records(path, "clicklog"):
        ranker = _require(obj, "ranker_id", str, lineno)
        qid = _require(obj, "query_id", str, lineno)
        ranking = _require(obj, "ranking", list, lineno)
        clicks = _require(obj, "clicks", list, lineno)
        try:
            records.append(ClickLogRecord(ranker, qid, tuple(ranking), tuple(clicks)))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    logs = LogCollection(tuple(records))
    if corpus is not None:
        logs.check_against(corpus)
    return logs


def save_logs(logs: LogCollection, path) -> None:
    rows = (
        {
            "ranker_id": r.ranker_id,
            "query_id": r.query_id,
            "ranking": list(r.ranking),
            "clicks": list(r.clicks),
        }
        for r in logs.records
    )
    _write_lines(path, {"format": "clicklog", "version": FORMAT_VERSION}, rows)


def load_rankings(path, corpus: Corpus | None = None) -> RankingTable:
    entries = {}
    for lineno, obj in _read_records(path, "rankings"):
        key = (_require(obj, "ranker_id", str, lineno), _require(obj, "query_id", str, lineno))
        if key in entries:
            raise ValidationError(f"line {lineno}: second ranking for {key}")
        entries[key] = tuple(_require(obj, "ranking", list, lineno))
    table = RankingTable(entries)
    if corpus is not None:
        table.check_against(corpus)
    return table


def save_rankings(table: RankingTable, path) -> None:
    rows = (
        {"ranker_id": r, "query_id": q, "ranking": list(ranking)}
        for (r, q), ranking in table.entries.items()
    )
    _write_lines(path, {"format": "rankings", "version": FORMAT_VERSION}, rows)
