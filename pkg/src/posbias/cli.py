"""Command-line entry point.

Exit codes: 0 on success, 2 on invalid input, 3 when the logs cannot
identify any relative propensity.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus_log import load_corpus, load_logs, load_rankings, save_corpus, save_logs, save_rankings
from .errors import EstimationImpossibleError, PosBiasError
from .estimators import fit_mle, fit_pairwise
from .harness import emit_results, run_overlap_experiment, run_sweep_experiment
from .interventions import pair_stats_from_logs
from .simulator import SimulationConfig, load_config, simulate, true_propensities

EXIT_OK, EXIT_INVALID, EXIT_IMPOSSIBLE = 0, 2, 3


def _config(path, seed):
    if path is None:
        return SimulationConfig() if seed is None else SimulationConfig(seed=seed)
    return load_config(path, seed=seed)


def cmd_simulate(args):
    config = _config(args.config, args.seed)
    sim = simulate(config)
    save_logs(sim.logs, args.out_logs)
    if args.out_corpus:
        save_corpus(sim.corpus, args.out_corpus)
    if args.out_rankings:
        save_rankings(sim.rankings, args.out_rankings)
    sizes = ", ".join(f"{r}={n}" for r, n in sorted(sim.logs.log_sizes.items()))
    print(f"wrote {len(sim.logs)} records ({sizes}) to {args.out_logs}", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args):
    corpus = load_corpus(args.corpus) if args.corpus else None
    logs = load_logs(args.logs, corpus)
    rankings = load_rankings(args.rankings, corpus) if args.rankings else None
    stats = pair_stats_from_logs(logs, args.top_k, rankings)
    est = fit_mle(stats) if args.method == "mle" else fit_pairwise(stats)
    text = json.dumps(est.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if est.unidentifiable:
        print(f"warning: positions {list(est.unidentifiable)} are not identifiable",
              file=sys.stderr)
    if not est.converged:
        print("warning: optimizer stopped before reaching the gradient tolerance",
              file=sys.stderr)
    return EXIT_OK


def _values(text, kind):
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a list of {kind.__name__}")


def cmd_experiment(args):
    config = _config(args.config, args.seed)
    if args.kind == "sweep":
        rows = run_sweep_experiment(config, _values(args.values, int), args.runs)
    else:
        rows = run_overlap_experiment(config, _values(args.values, float), args.runs)
    emit_results(rows, args.out, args.format)
    return EXIT_OK


def cmd_truth(args):
    print(json.dumps(true_propensities(args.eta, args.top_k).tolist()))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="posbias",
        description="Position-bias estimation from multi-ranker click logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a corpus, two rankers and their click logs")
    p.add_argument("--config", help="JSON file of simulation settings")
    p.add_argument("--out-logs", required=True)
    p.add_argument("--out-corpus")
    p.add_argument("--out-rankings")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate relative propensities from click logs")
    p.add_argument("--logs", required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--method", choices=("mle", "pairwise"), default="mle")
    p.add_argument("--out")
    p.add_argument("--rankings", help="optional ranking table, cross-checked against the logs")
    p.add_argument("--corpus", help="optional corpus to validate the logs against")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", help="run a sweeps or overlap experiment")
    p.add_argument("kind", choices=("sweep", "overlap"))
    p.add_argument("--config")
    p.add_argument("--values", required=True, help="comma-separated x values")
    p.add_argument("--runs", type=int, default=6)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("truth", help="print the simulated propensities (1/r)**eta")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.set_defaults(func=cmd_truth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EstimationImpossibleError as exc:
        print(f"estimation impossible: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except (PosBiasError, argparse.ArgumentTypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
