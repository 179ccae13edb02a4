"""Experiment harness: error metric, sweeps over data volume and ranker overlap."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EstimationImpossibleError, MetricUndefinedError, ValidationError
from .estimators import FitOptions, PropensityEstimate, fit_mle, fit_pairwise
from .interventions import (
    PairStats,
    build_interventional_sets,
    compute_weights,
    stats_from_counts,
)
from .simulator import (
    SimulationConfig,
    generate_corpus,
    generate_rankers,
    simulate_counts,
    streams,
    true_propensities,
)


def mse(estimate: PropensityEstimate, truth) -> float:
    """Mean squared error of relative propensities over positions ``2..M``.

    Position 1 is left out because both sides equal 1 by construction.
    """
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (estimate.M,):
        raise ValidationError(f"truth must have length {estimate.M}, got {truth.shape}")
    if estimate.unidentifiable:
        raise MetricUndefinedError(
            f"positions {list(estimate.unidentifiable)} are not identifiable"
        )
    rel = np.asarray(estimate.rel_propensity, dtype=float)
    diff = rel[1:] - truth[1:] / truth[0]
    return float(np.mean(diff**2))


@dataclass
class ExperimentResultRow:
    x_value: float
    mse_mean: float
    mse_variance: float
    runs: int
    per_run_mse: list = field(default_factory=list)
    unidentifiable_runs: int = 0
    # filled only when an experiment is asked to keep them; never serialised
    estimates: list = field(default_factory=list, repr=False, compare=False)

    @classmethod
    def from_runs(cls, x_value, per_run_mse, unidentifiable_runs, estimates=()):
        per_run = [float(v) for v in per_run_mse]
        if per_run:
            mean, var = float(np.mean(per_run)), float(np.var(per_run))
        else:
            mean = var = float("nan")
        return cls(x_value, mean, var, len(per_run) + unidentifiable_runs, per_run,
                   unidentifiable_runs, list(estimates))

    def to_dict(self) -> dict:
        return {
            "x_value": self.x_value,
            "mse_mean": _json_float(self.mse_mean),
            "mse_variance": _json_float(self.mse_variance),
            "runs": self.runs,
            "per_run_mse": list(self.per_run_mse),
            "unidentifiable_runs": self.unidentifiable_runs,
        }


def run_seed(base_seed: int, run: int) -> int:
    """Seed of one run; identical for every x value of an experiment."""
    return int(np.random.SeedSequence([base_seed, run]).generate_state(1)[0])


def simulate_stats(config: SimulationConfig, seed: int) -> PairStats:
    """Pair statistics of one simulated run, without materialising the log."""
    corpus_rng, ranker_rng, click_rng = streams(seed)
    corpus = generate_corpus(config, corpus_rng)
    rankings = generate_rankers(corpus, config.overlap, ranker_rng, config.sigma)
    counts, log_sizes = simulate_counts(rankings, corpus, config, click_rng)
    sets = build_interventional_sets(rankings, config.M)
    weights = compute_weights(rankings, log_sizes, config.M)
    return stats_from_counts(counts, sets, weights)


def run_once(config: SimulationConfig, seed: int, method="mle", options=None):
    """Simulate, estimate and score one configuration.

    Returns ``(mse, estimate)``; raises :class:`EstimationImpossibleError` or
    :class:`MetricUndefinedError` when the logs cannot identify every position.
    """
    stats = simulate_stats(config, seed)
    est = fit_mle(stats, options) if method == "mle" else fit_pairwise(stats)
    return mse(est, true_propensities(config.eta, config.M)), est


def _experiment(config, field_name, values, runs, base_seed, method, options, keep):
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    if not values:
        raise ValidationError("no x values given")
    base_seed = config.seed if base_seed is None else base_seed
    rows = []
    for x in values:
        cfg = config.replace(**{field_name: x})
        errors, failed, estimates = [], 0, []
        for run in range(runs):
            try:
                err, est = run_once(cfg, run_seed(base_seed, run), method, options)
            except (EstimationImpossibleError, MetricUndefinedError):
                failed += 1
                continue
            errors.append(err)
            if keep:
                estimates.append(est)
        rows.append(ExperimentResultRow.from_runs(x, errors, failed, estimates))
    return rows


def run_sweep_experiment(config: SimulationConfig, sweep_values, runs=6, base_seed=None,
                         method="mle", options: FitOptions | None = None,
                         keep_estimates=False):
    """Error against the number of logging sweeps (Figure-1 style).

    Run ``i`` uses the seed ``run_seed(base_seed, i)`` for every x value, so
    the corpus and rankers are shared across x and only the amount of
    logged data changes.
    """
    return _experiment(config, "sweeps", [int(v) for v in sweep_values], runs, base_seed,
                       method, options, keep_estimates)


def run_overlap_experiment(config: SimulationConfig, overlap_values, runs=6, base_seed=None,
                           method="mle", options: FitOptions | None = None,
                           keep_estimates=False):
    """Error against ranker overlap (Figure-2 style).

    Runs at overlap 1 have identical rankers and are counted in
    ``unidentifiable_runs``.
    """
    return _experiment(config, "overlap", [float(v) for v in overlap_values], runs, base_seed,
                       method, options, keep_estimates)


# ---------------------------------------------------------------------------
# output

CSV_HEADER = ("x", "mse_mean", "mse_variance", "runs", "unidentifiable_runs")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v.is_integer() and math.isfinite(v) and abs(v) < 1e15:
        return str(int(v))
    return format(v, ".10g")


def _json_float(v):
    return float(v) if math.isfinite(v) else None


def emit_results(rows, path, format="csv") -> None:
    if not rows:
        raise ValidationError("no result rows to emit")
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow([_fmt(r.x_value), _fmt(r.mse_mean), _fmt(r.mse_variance),
                                 r.runs, r.unidentifiable_runs])
    elif format == "json":
        out = [r.to_dict() for r in rows]
        path.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    else:
        raise ValidationError(f"unknown format {format!r}; expected csv or json")


def load_results(path) -> list[ExperimentResultRow]:
    """Read rows written by :func:`emit_results` in json format."""
    rows = []
    for d in json.loads(Path(path).read_text(encoding="utf-8")):
        for key in ("mse_mean", "mse_variance"):
            if d[key] is None:
                d[key] = float("nan")
        rows.append(ExperimentResultRow(**d))
    return rows
