"""Relative propensity estimators built on :class:`~posbias.interventions.PairStats`.

Two estimators are provided:

* :func:`pairwise_ratio` divides the weighted click mass at ``k`` by that at
  ``k'`` within one interventional pair.
* :func:`fit_mle` maximises the Bernoulli log-likelihood

  .. math::

     \\sum_{k \\ne k'} c_k^{k,k'} \\log(p_k r_{k,k'})
         + \\bar c_k^{k,k'} \\log(1 - p_k r_{k,k'})

  jointly over examination parameters ``p`` (one per position) and one
  relevance parameter ``r`` per unordered pair, and reports ``p_k / p_1``.

Achievable ratios: every ``p`` lives in the open interval (0, 1), so any
ratio ``p_k / p_1`` in (0, inf) is representable, including ratios above 1
when the data say position ``k`` is examined more than position 1.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import EstimationImpossibleError, UndefinedRatioError, ValidationError
from .interventions import PairStats, _pair


def pairwise_ratio(stats: PairStats, k: int, k_prime: int) -> float:
    """Estimate ``p_k / p_k'`` from the clicks of a single pair."""
    st = stats[k, k_prime]
    num, _ = st.oriented(k)
    den, _ = st.oriented(k_prime)
    if den == 0:
        raise UndefinedRatioError(
            f"no clicks at position {k_prime} within the interventional set of {(k, k_prime)}"
        )
    return num / den


# ---------------------------------------------------------------------------
# identifiability


@dataclass(frozen=True)
class IdentifiabilityReport:
    M: int
    pair_graph: Mapping[int, frozenset]
    component_of_position_1: frozenset
    unidentifiable: tuple[int, ...]

    @property
    def fully_identifiable(self) -> bool:
        return not self.unidentifiable


def _informative(st, min_pair_mass):
    # Without any click the pair's supremum sits at r -> 0 whatever p is, so
    # it says nothing about p_k / p_k'.
    return st.c_at_k + st.c_at_kprime > 0 and st.total_mass > min_pair_mass


def _usable(st, min_pair_mass):
    # the shared relevance parameter only links k and k' if both sides saw data
    return st.mass(st.k) > 0 and st.mass(st.k_prime) > 0 and _informative(st, min_pair_mass)


def check_identifiability(stats: PairStats, min_pair_mass: float = 0.0) -> IdentifiabilityReport:
    adj = {k: set() for k in range(1, stats.M + 1)}
    for st in stats:
        if _usable(st, min_pair_mass):
            adj[st.k].add(st.k_prime)
            adj[st.k_prime].add(st.k)
    seen = {1}
    todo = deque([1])
    while todo:
        for nb in sorted(adj[todo.popleft()]):
            if nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return IdentifiabilityReport(
        M=stats.M,
        pair_graph={k: frozenset(v) for k, v in adj.items()},
        component_of_position_1=frozenset(seen),
        unidentifiable=tuple(k for k in range(1, stats.M + 1) if k not in seen),
    )


# ---------------------------------------------------------------------------
# objective


class _Problem:
    """Flattened view of the statistics used by the objective.

    Each included pair contributes two rows ("sides"), one per position.
    """

    def __init__(self, stats: PairStats, pairs=None):
        if pairs is None:
            pairs = [(st.k, st.k_prime) for st in stats if st.total_mass > 0]
        self.M = stats.M
        self.pairs = list(pairs)
        pos, pair_idx, c, n = [], [], [], []
        for j, (k, kp) in enumerate(self.pairs):
            st = stats[k, kp]
            for side in (k, kp):
                ci, ni = st.oriented(side)
                pos.append(side - 1)
                pair_idx.append(j)
                c.append(ci)
                n.append(ni)
        self.pos = np.asarray(pos, dtype=np.intp)
        self.pair_idx = np.asarray(pair_idx, dtype=np.intp)
        self.c = np.asarray(c, dtype=float)
        self.n = np.asarray(n, dtype=float)
        self.total_weight = float(np.sum(self.c) + np.sum(self.n))

    def value(self, p, r):
        x = p[self.pos] * r[self.pair_idx]
        with np.errstate(divide="ignore"):
            a = np.where(self.c > 0, self.c * np.log(x), 0.0)
            b = np.where(self.n > 0, self.n * np.log1p(-x), 0.0)
        return float(np.sum(a) + np.sum(b))

    def grad(self, p, r):
        pp = p[self.pos]
        rr = r[self.pair_idx]
        x = pp * rr
        # d/dx of c log x + n log(1 - x)
        dx = self.c / x - self.n / (1.0 - x)
        gp = np.bincount(self.pos, weights=dx * rr, minlength=self.M)
        gr = np.bincount(self.pair_idx, weights=dx * pp, minlength=len(self.pairs))
        return gp, gr

    # unconstrained parameterisation: p = sigmoid(theta)
    def value_theta(self, theta):
        lp = -np.logaddexp(0.0, -theta)
        lx = lp[: self.M][self.pos] + lp[self.M:][self.pair_idx]
        log1mx = _log1mexp(lx)
        with np.errstate(invalid="ignore"):
            a = np.where(self.c > 0, self.c * lx, 0.0)
            b = np.where(self.n > 0, self.n * log1mx, 0.0)
        return float(np.sum(a) + np.sum(b))

    def grad_theta(self, theta):
        s = _sigmoid(theta)
        lp = -np.logaddexp(0.0, -theta)
        lx = lp[: self.M][self.pos] + lp[self.M:][self.pair_idx]
        # d/dlog x of c log x + n log(1 - x); d log p / d theta = 1 - p
        with np.errstate(divide="ignore", invalid="ignore"):
            dlx = self.c - self.n * np.exp(lx) / -np.expm1(lx)
        dlx = np.where(self.n > 0, dlx, self.c)
        gp = np.bincount(self.pos, weights=dlx, minlength=self.M) * (1.0 - s[: self.M])
        gr = np.bincount(self.pair_idx, weights=dlx, minlength=len(self.pairs)) * (
            1.0 - s[self.M:]
        )
        return np.concatenate([gp, gr])


def _sigmoid(t):
    return np.exp(-np.logaddexp(0.0, -t))


def _log1mexp(lx):
    """log(1 - exp(lx)) for lx < 0, accurate on both ends."""
    lx = np.minimum(lx, -1e-300)
    with np.errstate(divide="ignore"):
        return np.where(lx > -0.6931471805599453, np.log(-np.expm1(lx)), np.log1p(-np.exp(lx)))


def _params(fitted_p, fitted_r: Mapping, stats: PairStats, prob: _Problem):
    p = np.asarray(fitted_p, dtype=float)
    if p.shape != (stats.M,):
        raise ValidationError(f"fitted_p must have length M={stats.M}, got shape {p.shape}")
    r_map = {_pair(*key): float(v) for key, v in fitted_r.items()}
    missing = [pr for pr in prob.pairs if pr not in r_map]
    if missing:
        raise ValidationError(f"no relevance parameter for pairs {missing}")
    r = np.array([r_map[pr] for pr in prob.pairs], dtype=float)
    for name, arr in (("p", p), ("r", r)):
        if np.any(~(arr > 0) | ~(arr < 1)):
            raise ValidationError(f"every {name} parameter must lie strictly inside (0, 1)")
    return p, r


def mle_objective(fitted_p, fitted_r: Mapping, stats: PairStats) -> float:
    """Log-likelihood at ``(p, r)``; pairs without mass contribute nothing."""
    prob = _Problem(stats)
    p, r = _params(fitted_p, fitted_r, stats, prob)
    return prob.value(p, r)


def mle_gradient(fitted_p, fitted_r: Mapping, stats: PairStats):
    """Analytic gradient ``(d/dp as array, {pair: d/dr})`` of :func:`mle_objective`."""
    prob = _Problem(stats)
    p, r = _params(fitted_p, fitted_r, stats, prob)
    gp, gr = prob.grad(p, r)
    grad_r = {pr: 0.0 for pr in (_pair(*key) for key in fitted_r)}
    grad_r.update({pr: float(g) for pr, g in zip(prob.pairs, gr)})
    return gp, grad_r


# ---------------------------------------------------------------------------
# fitting


STEP_RULES = ("bb-backtracking", "backtracking")


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    ``step_rule`` picks the trial step of each ascent iteration before
    Armijo backtracking: ``"bb-backtracking"`` uses a Barzilai-Borwein
    estimate, ``"backtracking"`` doubles the previously accepted step.
    Both only ever accept steps that increase the objective.

    ``gradient_tolerance`` bounds the infinity norm of the gradient of the
    objective divided by its total click plus no-click weight, so the point
    at which the ascent stops does not depend on how the weights are scaled.
    """

    max_iterations: int = 10_000
    gradient_tolerance: float = 1e-8
    step_rule: str = "bb-backtracking"
    min_pair_mass: float = 0.0
    armijo: float = 1e-4

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ValidationError("gradient_tolerance must be > 0")
        if self.step_rule not in STEP_RULES:
            raise ValidationError(f"step_rule must be one of {STEP_RULES}")
        if self.min_pair_mass < 0:
            raise ValidationError("min_pair_mass must be >= 0")


@dataclass
class PropensityEstimate:
    M: int
    rel_propensity: np.ndarray
    fitted_p: np.ndarray
    fitted_r: dict
    objective_value: float
    iterations: int
    converged: bool
    unidentifiable: tuple[int, ...] = ()
    method: str = "mle"
    history: list = field(default_factory=list, repr=False)

    @property
    def identifiable(self) -> bool:
        return not self.unidentifiable

    def to_dict(self) -> dict:
        rel = [None if not math.isfinite(v) else float(v) for v in self.rel_propensity]
        return {
            "method": self.method,
            "M": self.M,
            "rel_propensity": rel,
            "unidentifiable": list(self.unidentifiable),
            "objective_value": self.objective_value,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _ascend(prob: _Problem, theta, options: FitOptions):
    # ascend on the objective per unit of weight, so that the trajectory and
    # the stopping point are unchanged when all weights are scaled together
    scale = 1.0 / prob.total_weight if prob.total_weight > 0 else 1.0

    def value(th):
        return prob.value_theta(th) * scale

    def grad(th):
        return prob.grad_theta(th) * scale

    f = value(theta)
    g = grad(theta)
    history = [f / scale]
    step = 1.0
    prev = None
    it = 0
    converged = False
    while True:
        if np.max(np.abs(g)) <= options.gradient_tolerance:
            converged = True
            break
        if it >= options.max_iterations:
            break
        it += 1
        if options.step_rule == "bb-backtracking" and prev is not None:
            s_vec = theta - prev[0]
            y_vec = g - prev[1]
            sy = float(s_vec @ y_vec)
            # ascent: curvature along s is -sy / ss
            trial = float(s_vec @ s_vec) / -sy if sy < 0 else step * 2.0
        else:
            trial = step * 2.0 if prev is not None else 1.0
        t = min(max(trial, 1e-12), 1e6)
        gg = float(g @ g)
        while True:
            cand = theta + t * g
            fc = value(cand)
            if fc >= f + options.armijo * t * gg:
                break
            t *= 0.5
            if t < 1e-20:
                return theta, f / scale, it, False, history
        prev = (theta, g)
        theta, f = cand, fc
        g = grad(theta)
        step = t
        history.append(f / scale)
    return theta, f / scale, it, converged, history


def fit_mle(stats: PairStats, options: FitOptions | None = None) -> PropensityEstimate:
    """Maximum-likelihood relative propensities.

    Raises :class:`EstimationImpossibleError` when no pair links position 1
    to any other position. Positions outside the connected component of
    position 1 are listed in ``unidentifiable`` and reported as NaN.

    Pairs without a single click are left out of the fit: their likelihood
    is maximised as ``r -> 0`` for any ``p``, so dropping them leaves the
    maximiser over ``p`` unchanged while avoiding a parameter that runs off
    to the boundary.
    """
    options = options or FitOptions()
    report = check_identifiability(stats, options.min_pair_mass)
    if not any(_usable(st, options.min_pair_mass) for st in stats):
        raise EstimationImpossibleError("no position pair carries interventional click data")
    if len(report.component_of_position_1) < 2:
        raise EstimationImpossibleError(
            "position 1 shares no interventional pair with any other position"
        )
    prob = _Problem(
        stats, [(st.k, st.k_prime) for st in stats if _informative(st, options.min_pair_mass)]
    )
    theta0 = np.zeros(stats.M + len(prob.pairs))
    theta, f, it, converged, history = _ascend(prob, theta0, options)

    fitted_p = _sigmoid(theta[: stats.M])
    fitted_r = {pr: float(v) for pr, v in zip(prob.pairs, _sigmoid(theta[stats.M:]))}
    rel = fitted_p / fitted_p[0]
    rel[0] = 1.0
    for k in report.unidentifiable:
        rel[k - 1] = np.nan
    return PropensityEstimate(
        M=stats.M,
        rel_propensity=rel,
        fitted_p=fitted_p,
        fitted_r=fitted_r,
        objective_value=f,
        iterations=it,
        converged=converged,
        unidentifiable=report.unidentifiable,
        history=history,
    )


def fit_pairwise(stats: PairStats) -> PropensityEstimate:
    """Relative propensities from the ``{k, 1}`` pairs alone.

    Positions whose pair with position 1 has no clicks at position 1 (or no
    data at all) are reported as unidentifiable.
    """
    rel = np.full(stats.M, np.nan)
    rel[0] = 1.0
    missing = []
    for k in range(2, stats.M + 1):
        st = stats[1, k]
        if st.mass(1) == 0 or st.mass(k) == 0:
            missing.append(k)
            continue
        try:
            rel[k - 1] = pairwise_ratio(stats, k, 1)
        except UndefinedRatioError:
            missing.append(k)
    if len(missing) == stats.M - 1:
        raise EstimationImpossibleError("no {k, 1} pair carries clicks at position 1")
    return PropensityEstimate(
        M=stats.M,
        rel_propensity=rel,
        fitted_p=rel.copy(),
        fitted_r={},
        objective_value=float("nan"),
        iterations=0,
        converged=True,
        unidentifiable=tuple(missing),
        method="pairwise",
    )
