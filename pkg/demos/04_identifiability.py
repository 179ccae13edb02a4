"""
Which positions can be estimated?
=================================

A relative propensity p_k / p_1 is only estimable when position k is linked
to position 1 through a chain of intervened pairs. This demo builds the
statistics by hand for a log in which one ranker swaps ranks 1 and 2 and
another swaps ranks 3 and 4.
"""

from posbias import (
    EstimationImpossibleError,
    PairStat,
    PairStats,
    check_identifiability,
    fit_mle,
)

# (k, k', clicks at k, clicks at k', no-clicks at k, no-clicks at k')
stats = PairStats(4, [PairStat(1, 2, 0.30, 0.15, 0.70, 0.85),
                      PairStat(3, 4, 0.10, 0.08, 0.90, 0.92)])

report = check_identifiability(stats)
print("connected to position 1:", sorted(report.component_of_position_1))
print("not identifiable:       ", list(report.unidentifiable))

# the fit reports what it can and marks the rest as NaN instead of guessing
est = fit_mle(stats)
print("relative propensities:  ", est.rel_propensity.round(3))

# with only the {3, 4} pair there is nothing to anchor position 1 to
try:
    fit_mle(stats.restrict([(3, 4)]))
except EstimationImpossibleError as exc:
    print("restricted to {3, 4}:    ", exc)
