"""Interventional sets, log-size weights and weighted click statistics.

A (query, document) pair is *interventional* for positions ``{k, k'}`` when
one logged ranker shows the document at ``k`` and some ranker shows it at
``k'``. Restricting click-through rates to such pairs controls for relevance:
the same documents were seen at both positions.

Positions are 1-based throughout. Unordered position pairs are stored as
tuples ``(k, k')`` with ``k < k'``.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus_log import LogCollection, RankingTable
from .errors import InconsistencyError, ValidationError


def _pair(k, kp):
    if k == kp:
        raise ValidationError(f"a position pair needs two distinct positions, got {k} twice")
    return (k, kp) if k < kp else (kp, k)


def all_pairs(M):
    return list(combinations(range(1, M + 1), 2))


@dataclass(frozen=True)
class InterventionalSets:
    M: int
    sets: Mapping[tuple[int, int], frozenset]

    def __getitem__(self, pair) -> frozenset:
        return self.sets[_pair(*pair)]

    def memberships(self) -> dict:
        """Map each (query, document) to the pairs it belongs to."""
        out = defaultdict(list)
        for pair, members in self.sets.items():
            for qd in members:
                out[qd].append(pair)
        return out


@dataclass(frozen=True)
class WeightTable:
    M: int
    weights: Mapping[tuple[str, str, int], float]

    def __call__(self, query_id, doc_id, k) -> float:
        return self.weights.get((query_id, doc_id, k), 0)


@dataclass(frozen=True)
class PairStat:
    """Weighted click and no-click mass at both positions of one pair."""

    k: int
    k_prime: int
    c_at_k: float
    c_at_kprime: float
    notc_at_k: float
    notc_at_kprime: float
    impressions_k: int = 0
    impressions_kprime: int = 0

    def oriented(self, k):
        """``(clicks, no-clicks)`` at position ``k`` of this pair."""
        if k == self.k:
            return self.c_at_k, self.notc_at_k
        if k == self.k_prime:
            return self.c_at_kprime, self.notc_at_kprime
        raise KeyError(k)

    def mass(self, k) -> float:
        c, n = self.oriented(k)
        return c + n

    @property
    def total_mass(self) -> float:
        return self.c_at_k + self.notc_at_k + self.c_at_kprime + self.notc_at_kprime

    def swapped(self) -> "PairStat":
        return PairStat(
            self.k_prime, self.k, self.c_at_kprime, self.c_at_k,
            self.notc_at_kprime, self.notc_at_k,
            self.impressions_kprime, self.impressions_k,
        )


class PairStats:
    """Per-pair statistics for every unordered pair of positions in ``[M]``.

    Pairs may be given in either orientation; they are stored with the
    smaller position first. Pairs that were not supplied are filled with
    zero statistics so the full pair graph is always visible.
    """

    def __init__(self, M, pairs):
        if M < 2:
            raise ValidationError("M must be at least 2")
        self.M = M
        store = {p: PairStat(*p, 0.0, 0.0, 0.0, 0.0) for p in all_pairs(M)}
        for st in pairs:
            if st.k > st.k_prime:
                st = st.swapped()
            key = _pair(st.k, st.k_prime)
            if key[1] > M:
                raise ValidationError(f"pair {key} lies outside [1, {M}]")
            vals = (st.c_at_k, st.c_at_kprime, st.notc_at_k, st.notc_at_kprime)
            if not all(math.isfinite(v) and v >= 0 for v in vals):
                raise ValidationError(f"statistics of pair {key} must be finite and >= 0")
            store[key] = st
        self._pairs = store

    def __getitem__(self, pair) -> PairStat:
        return self._pairs[_pair(*pair)]

    def __iter__(self):
        return iter(self._pairs.values())

    def __len__(self):
        return len(self._pairs)

    def __eq__(self, other):
        return isinstance(other, PairStats) and self.M == other.M and self._pairs == other._pairs

    def __repr__(self):
        nz = sum(1 for st in self if st.total_mass > 0)
        return f"PairStats(M={self.M}, pairs={len(self)}, nonempty={nz})"

    def restrict(self, keep) -> "PairStats":
        """Copy keeping only the listed pairs (all others zeroed)."""
        keep = {_pair(*p) for p in keep}
        return PairStats(self.M, [st for st in self if (st.k, st.k_prime) in keep])

    def to_records(self) -> list[dict]:
        return [
            {
                "k": st.k, "k_prime": st.k_prime,
                "c_at_k": st.c_at_k, "c_at_kprime": st.c_at_kprime,
                "notc_at_k": st.notc_at_k, "notc_at_kprime": st.notc_at_kprime,
                "impressions_k": st.impressions_k, "impressions_kprime": st.impressions_kprime,
            }
            for st in self
        ]

    @classmethod
    def from_records(cls, M, records) -> "PairStats":
        return cls(M, [PairStat(**r) for r in records])


def save_pair_stats(stats: PairStats, path) -> None:
    """Diagnostic dump: a header line then one JSON object per pair."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": "pairstats", "version": 1, "M": stats.M}) + "\n")
        for rec in stats.to_records():
            fh.write(json.dumps(rec) + "\n")


def load_pair_stats(path) -> PairStats:
    with Path(path).open("r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    header = json.loads(lines[0])
    if header.get("format") != "pairstats":
        raise ValidationError(f"not a pairstats file: {header!r}")
    return PairStats.from_records(header["M"], [json.loads(ln) for ln in lines[1:]])


def _positions(rankings: RankingTable, M):
    """(query, doc) -> set of positions <= M at which some ranker shows it."""
    pos = defaultdict(set)
    for (_, qid), ranking in rankings.entries.items():
        for k, d in enumerate(ranking[:M], start=1):
            pos[(qid, d)].add(k)
    return pos


def build_interventional_sets(rankings: RankingTable, M: int) -> InterventionalSets:
    if M < 2:
        raise ValidationError(f"M must be at least 2, got {M}")
    if not len(rankings):
        raise ValidationError("rankings are empty")
    sets = {p: set() for p in all_pairs(M)}
    for qd, ks in _positions(rankings, M).items():
        for pair in combinations(sorted(ks), 2):
            sets[pair].add(qd)
    return InterventionalSets(M, {p: frozenset(s) for p, s in sets.items()})


def compute_weights(rankings: RankingTable, log_sizes: Mapping[str, int], M: int) -> WeightTable:
    """``w(q, d, k) = sum_i n_i * [ranker i shows d at k for q]``."""
    known = set(rankings.rankers)
    stray = sorted(set(log_sizes) - known)
    if stray:
        raise InconsistencyError(f"rankers {stray} have logs but no rankings")
    weights: dict[tuple[str, str, int], int] = defaultdict(int)
    for (ranker, qid), ranking in rankings.entries.items():
        n = log_sizes.get(ranker, 0)
        for k, d in enumerate(ranking[:M], start=1):
            weights[(qid, d, k)] += n
    return WeightTable(M, dict(weights))


def count_impressions(logs: LogCollection, M: int):
    """Integer impression and click counts per ``(query, doc, position)``.

    Counts add exactly, so partial counts from any chunking of the records
    merge to the same totals.
    """
    grouped = defaultdict(list)
    for rec in logs:
        grouped[(rec.query_id, rec.ranking[:M])].append(rec.clicks[:M])
    counts: dict[tuple[str, str, int], list[int]] = {}
    for (qid, ranking), rows in grouped.items():
        clicks = np.asarray(rows, dtype=np.int64).sum(axis=0)
        for k, d in enumerate(ranking, start=1):
            cell = counts.setdefault((qid, d, k), [0, 0])
            cell[0] += len(rows)
            cell[1] += int(clicks[k - 1])
    return counts


def merge_counts(*parts):
    out: dict = {}
    for part in parts:
        for key, (imp, clk) in part.items():
            cell = out.setdefault(key, [0, 0])
            cell[0] += imp
            cell[1] += clk
    return out


def stats_from_counts(counts, sets: InterventionalSets, weights: WeightTable) -> PairStats:
    pairs = []
    for (k, kp), members in sets.sets.items():
        sums = {}
        for pos in (k, kp):
            clicks, noclicks, imps = [], [], 0
            for qid, d in members:
                cell = counts.get((qid, d, pos))
                if cell is None:
                    continue
                w = weights(qid, d, pos)
                if w == 0:
                    raise InconsistencyError(
                        f"({qid!r}, {d!r}) shown at position {pos} but its weight is zero; "
                        "logs and rankings disagree"
                    )
                imps += cell[0]
                clicks.append(cell[1] / w)
                noclicks.append((cell[0] - cell[1]) / w)
            sums[pos] = (math.fsum(clicks), math.fsum(noclicks), imps)
        pairs.append(PairStat(
            k, kp, sums[k][0], sums[kp][0], sums[k][1], sums[kp][1], sums[k][2], sums[kp][2]
        ))
    return PairStats(sets.M, pairs)


def accumulate_pair_stats(
    logs: LogCollection, sets: InterventionalSets, weights: WeightTable
) -> PairStats:
    """Weighted click / no-click sums per pair and position.

    For pair ``{k, k'}`` and position ``pos`` in it, the click sum is the sum
    over every logged impression of a document at ``pos`` whose (query, doc)
    lies in the pair's interventional set, of ``click / w(q, d, pos)``; the
    no-click sum uses ``1 - click``. Positions beyond ``M`` are ignored.
    """
    return stats_from_counts(count_impressions(logs, sets.M), sets, weights)


def pair_stats_from_logs(logs: LogCollection, M: int, rankings: RankingTable | None = None):
    """Convenience pipeline: rankings (derived if absent), sets, weights, stats."""
    from .corpus_log import cross_check_rankings, derive_rankings

    if rankings is None:
        rankings = derive_rankings(logs)
    else:
        cross_check_rankings(rankings, logs)
    sets = build_interventional_sets(rankings, M)
    weights = compute_weights(rankings, logs.log_sizes, M)
    return accumulate_pair_stats(logs, sets, weights)
