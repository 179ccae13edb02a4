"""Consistent position-bias estimation from the click logs of several rankers."""

from .corpus_log import (
    ClickLogRecord,
    Corpus,
    LogCollection,
    QueryRecord,
    RankingTable,
    derive_rankings,
    load_corpus,
    load_logs,
    load_rankings,
    save_corpus,
    save_logs,
    save_rankings,
)
from .errors import (
    EstimationImpossibleError,
    InconsistencyError,
    MetricUndefinedError,
    ParseError,
    PosBiasError,
    UndefinedRatioError,
    ValidationError,
)
from .estimators import (
    FitOptions,
    IdentifiabilityReport,
    PropensityEstimate,
    check_identifiability,
    fit_mle,
    fit_pairwise,
    mle_gradient,
    mle_objective,
    pairwise_ratio,
)
from .harness import (
    ExperimentResultRow,
    emit_results,
    load_results,
    mse,
    run_once,
    run_overlap_experiment,
    run_sweep_experiment,
    simulate_stats,
)
from .interventions import (
    InterventionalSets,
    PairStat,
    PairStats,
    WeightTable,
    accumulate_pair_stats,
    build_interventional_sets,
    compute_weights,
    pair_stats_from_logs,
)
from .simulator import (
    SimulationConfig,
    generate_corpus,
    generate_rankers,
    simulate,
    simulate_clicks,
    true_propensities,
)

__version__ = "0.1.0"
