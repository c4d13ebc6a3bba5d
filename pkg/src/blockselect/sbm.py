"""Bernoulli block-model likelihoods, MLEs, merges, and their asymptotics.

Likelihood convention used everywhere in this package: the log-likelihood is
the halved sum over ordered block pairs,

    loglik = (1/2) * sum_{a,b} [ m_ab log(theta_ab) + (n_ab - m_ab) log(1 - theta_ab) ],

with ordered-pair counts from :func:`blockselect.graph_core.count_stats`.
This counts every unordered node pair exactly once (within-block pairs appear
twice in the ordered diagonal sums, hence the 1/2) and makes the profile
log-likelihood equal to (n^2/2) * profile_objective(m/n^2, n_pair/n^2).
All logs are natural.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph_core import Assignment, CountStats, ConfusionMatrix, Graph, count_stats

_BOUND_TOL = 0.0  # boundary checks are exact: theta in the open interval


class DegenerateParameterError(ValueError):
    """A fixed parameter sits on the boundary where observed counts demand log 0."""


def neg_bernoulli_entropy(x):
    """x log x + (1 - x) log(1 - x), with the limit convention 0 log 0 = 0.

    Accepts scalars or arrays with entries in [0, 1].
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("argument must lie in [0, 1]")
    out = np.zeros_like(x)
    inside = (x > 0) & (x < 1)
    xi = x[inside]
    out[inside] = xi * np.log(xi) + (1 - xi) * np.log1p(-xi)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SbmParams:
    """Symmetric k x k edge-probability matrix plus block proportions.

    NaN entries in ``theta`` mark probabilities that are undefined because the
    corresponding block pair is empty (see :func:`mle_theta`).
    """

    theta: np.ndarray
    proportions: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=np.float64)
        p = np.asarray(self.proportions, dtype=np.float64)
        if th.ndim != 2 or th.shape[0] != th.shape[1]:
            raise ValueError(f"theta must be square, got shape {th.shape}")
        if p.shape != (th.shape[0],):
            raise ValueError("proportions length must match theta")
        defined = ~np.isnan(th)
        if np.any(th[defined] < 0) or np.any(th[defined] > 1):
            raise ValueError("theta entries must lie in [0, 1]")
        if not np.array_equal(np.isnan(th), np.isnan(th.T)) or not np.allclose(
            np.where(defined, th, 0.0), np.where(defined, th, 0.0).T
        ):
            raise ValueError("theta must be symmetric")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("proportions must be nonnegative and sum to 1")
        th.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "proportions", p)

    @property
    def k(self) -> int:
        return self.theta.shape[0]


def log_likelihood(cs: CountStats, params: SbmParams) -> float:
    """Bernoulli log-likelihood of the counts at fixed theta.

    Raises :class:`DegenerateParameterError` when theta is 0 or 1 on a block
    pair whose counts require the opposite outcome.
    """
    th = params.theta
    if th.shape != cs.n_pair.shape:
        raise ValueError("theta dimensions do not match count statistics")
    m, n = cs.m_pair, cs.n_pair
    if np.any(np.isnan(th) & (n > 0)):
        raise DegenerateParameterError("theta undefined on a nonempty block pair")
    bad_zero = (th == 0) & (m > 0)
    bad_one = (th == 1) & (n - m > 0)
    if np.any(bad_zero) or np.any(bad_one):
        raise DegenerateParameterError("boundary theta contradicts observed counts")
    total = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(m > 0, m * np.log(th), 0.0)
        t2 = np.where(n - m > 0, (n - m) * np.log1p(-th), 0.0)
    total = 0.5 * float(np.sum(np.where(n > 0, t1 + t2, 0.0)))
    return total


def mle_theta(cs: CountStats) -> SbmParams:
    """Blockwise MLE m_ab / n_ab; empty block pairs get a NaN marker."""
    with np.errstate(divide="ignore", invalid="ignore"):
        th = np.where(cs.n_pair > 0, cs.m_pair / np.where(cs.n_pair > 0, cs.n_pair, 1.0), np.nan)
    return SbmParams(th, cs.n_block / cs.n_block.sum())


def profile_log_likelihood(cs: CountStats) -> float:
    """Log-likelihood at the blockwise MLE: (1/2) sum n_ab * negent(m_ab/n_ab)."""
    n, m = cs.n_pair, cs.m_pair
    pos = n > 0
    ratio = np.zeros_like(n)
    ratio[pos] = m[pos] / n[pos]
    return 0.5 * float(np.sum(n[pos] * neg_bernoulli_entropy(ratio[pos])))


def profile_objective(edge_fracs: np.ndarray, pair_fracs: np.ndarray) -> float:
    """sum_ab t_ab * negent(M_ab / t_ab) over block pairs, skipping t_ab = 0.

    With M = m/n^2 and t = n_pair/n^2 this equals (2/n^2) times the profile
    log-likelihood.
    """
    m = np.asarray(edge_fracs, dtype=np.float64)
    t = np.asarray(pair_fracs, dtype=np.float64)
    if m.shape != t.shape:
        raise ValueError("matrices must have equal shapes")
    pos = t > 0
    if np.any(m[~pos] > 0):
        raise ValueError("edge fraction positive where pair fraction is zero")
    ratio = m[pos] / t[pos]
    if np.any(ratio < 0) or np.any(ratio > 1):
        raise ValueError("edge/pair ratio outside [0, 1]")
    return float(np.sum(t[pos] * neg_bernoulli_entropy(ratio)))


def population_objective(r, params: SbmParams) -> float:
    """Population profile objective of a confusion matrix against true params.

    For R the k' x k matrix of joint label proportions, evaluates
    sum_ab N_ab * negent(T_ab / N_ab) with N = (R 1)(R 1)' and T = R theta R'.
    At R = diag(p) this is sum_ab p_a p_b negent(theta_ab).
    """
    table = r.table if isinstance(r, ConfusionMatrix) else np.asarray(r, dtype=np.float64)
    row = table.sum(axis=1)
    n_mat = np.outer(row, row)
    t_mat = table @ params.theta @ table.T
    pos = n_mat > 0
    if np.any(np.isnan(t_mat[pos])):
        raise ValueError("confusion matrix touches undefined theta entries")
    ratio = t_mat[pos] / n_mat[pos]
    ratio = np.clip(ratio, 0.0, 1.0)  # guard float round-off at the boundary
    return float(np.sum(n_mat[pos] * neg_bernoulli_entropy(ratio)))


@dataclass(frozen=True)
class MergeScheme:
    """Result of collapsing two blocks by proportion-weighted averaging.

    ``relabel`` maps each original 1-based block to its 1-based merged block:
    the pair (a, b) maps to a, and blocks above b shift down by one.
    """

    pair: tuple[int, int]
    relabel: np.ndarray
    merged_theta: np.ndarray
    merged_props: np.ndarray

    def apply(self, z: Assignment) -> Assignment:
        """Merged node labels."""
        return Assignment(self.relabel[z.zero_based()], k=len(self.merged_props))


def merge_blocks(params: SbmParams, a: int, b: int) -> MergeScheme:
    """Collapse blocks a < b of a k-block model into a (k-1)-block model.

    Untouched entries are copied; entries touching the merged pair are the
    proportion-weighted averages (weights p_a, p_b off the diagonal and
    p_a^2, 2 p_a p_b, p_b^2 on it).
    """
    k = params.k
    if k < 2:
        raise ValueError("merging needs at least two blocks")
    if not (1 <= a < b <= k):
        raise ValueError(f"merge pair must satisfy 1 <= a < b <= {k}, got ({a}, {b})")
    p = params.proportions
    if p[a - 1] + p[b - 1] <= 0:
        raise ValueError("cannot merge two empty blocks")
    relabel = np.empty(k, dtype=np.int64)
    for c in range(1, k + 1):
        if c in (a, b):
            relabel[c - 1] = a
        elif c > b:
            relabel[c - 1] = c - 1
        else:
            relabel[c - 1] = c
    pa, pb = p[a - 1], p[b - 1]
    untouched = [c for c in range(1, k + 1) if c not in (a, b)]
    merged = np.empty((k - 1, k - 1))
    for c in untouched:
        uc = relabel[c - 1] - 1
        for d in untouched:
            merged[uc, relabel[d - 1] - 1] = params.theta[c - 1, d - 1]
    t = a - 1
    for c in untouched:
        uc = relabel[c - 1] - 1
        if pb == 0:
            cross = params.theta[c - 1, a - 1]
        elif pa == 0:
            cross = params.theta[c - 1, b - 1]
        else:
            cross = (pa * params.theta[c - 1, a - 1] + pb * params.theta[c - 1, b - 1]) / (pa + pb)
        merged[uc, t] = cross
        merged[t, uc] = cross
    if pb == 0:
        merged[t, t] = params.theta[a - 1, a - 1]
    elif pa == 0:
        merged[t, t] = params.theta[b - 1, b - 1]
    else:
        merged[t, t] = (
            pa**2 * params.theta[a - 1, a - 1]
            + 2 * pa * pb * params.theta[a - 1, b - 1]
            + pb**2 * params.theta[b - 1, b - 1]
        ) / (pa + pb) ** 2
    props = np.zeros(k - 1)
    np.add.at(props, relabel - 1, p)
    return MergeScheme(pair=(a, b), relabel=relabel, merged_theta=merged, merged_props=props)


def _merge_confusion(params: SbmParams, scheme: MergeScheme) -> np.ndarray:
    """Limiting confusion matrix of merged true labels against the truth."""
    k = params.k
    r = np.zeros((k - 1, k))
    r[scheme.relabel - 1, np.arange(k)] = params.proportions
    return r


def best_merge(params: SbmParams) -> MergeScheme:
    """The pair merge maximizing the population objective.

    Ties break to the lexicographically smallest (a, b).
    """
    if params.k < 2:
        raise ValueError("merging needs at least two blocks")
    best = None
    best_val = -np.inf
    for a, b in itertools.combinations(range(1, params.k + 1), 2):
        scheme = merge_blocks(params, a, b)
        val = population_objective(_merge_confusion(params, scheme), params)
        if val > best_val + 1e-12:
            best, best_val = scheme, val
    return best


@dataclass(frozen=True)
class UnderfitAsymptotics:
    """Limiting mean/variance of the underfit log-likelihood ratio.

    ``per_pair_mean`` is normalized per n^2 ordered node pairs; the centering
    for the statistic (loglik ratio)/n is ``scaled_mean(n)`` = n * per_pair_mean.
    ``variance`` is the variance of the limiting normal distribution.
    """

    per_pair_mean: float
    variance: float
    pair_density: np.ndarray

    def scaled_mean(self, n: int) -> float:
        return n * self.per_pair_mean


def empirical_pair_density(cs: CountStats) -> np.ndarray:
    """Finite-n surrogate for the pair-density limit: n_pair / n^2."""
    return cs.n_pair / float(cs.n) ** 2


def underfit_asymptotics(
    params: SbmParams, scheme: MergeScheme, pair_density: np.ndarray
) -> UnderfitAsymptotics:
    """Mean and variance parameters for the best-merge log-likelihood ratio.

    The sums run over ordered block pairs touching the merged pair. The mean
    is the pair-density-weighted Bernoulli log-ratio cost of replacing the
    true probabilities with the merged ones; the variance is the exact
    variance of the matching centered linear statistic, which accounts for
    the ordered diagonal sums double-counting within-block pairs and for the
    two ordered copies of each off-diagonal pair moving together.
    """
    k = params.k
    c_ab = np.asarray(pair_density, dtype=np.float64)
    if c_ab.shape != (k, k):
        raise ValueError("pair density must be k x k")
    a, b = scheme.pair
    mean = 0.0
    var = 0.0
    for c in range(1, k + 1):
        for d in range(1, k + 1):
            if c not in (a, b) and d not in (a, b):
                continue
            ts = params.theta[c - 1, d - 1]
            tm = scheme.merged_theta[scheme.relabel[c - 1] - 1, scheme.relabel[d - 1] - 1]
            if not (0 < ts < 1) or not (0 < tm < 1):
                raise ValueError(
                    f"theta on the merged pair set must lie strictly in (0,1); "
                    f"block pair ({c},{d}) has true={ts} merged={tm}"
                )
            w = c_ab[c - 1, d - 1]
            mean += w * (ts * np.log(tm / ts) + (1 - ts) * np.log((1 - tm) / (1 - ts)))
            log_odds = np.log(tm * (1 - ts) / ((1 - tm) * ts))
            var += w * ts * (1 - ts) * log_odds**2
    return UnderfitAsymptotics(per_pair_mean=0.5 * mean, variance=0.5 * var, pair_density=c_ab)


def homogeneous_merge_mean(
    p_within: float, p_between: float, pair_density: float, merge_weight: float, n_nodes: int
) -> float:
    """n-scaled merge cost for a homogeneous model, in closed form.

    For equal within-block probability ``p_within`` and between-block
    probability ``p_between``, merging two blocks replaces both touched
    diagonal entries and the touched off-diagonal entry by the mixture
    ``merge_weight * p_within + (1 - merge_weight) * p_between``; the four
    contributing ordered block pairs collapse by symmetry to two diagonal
    and two off-diagonal terms, each weighted by ``pair_density``.
    """
    p, q, x1 = float(p_within), float(p_between), float(merge_weight)
    if not (0 < q <= p < 1):
        raise ValueError("need 0 < p_between <= p_within < 1")
    if not 0 < x1 < 1:
        raise ValueError("merge_weight must lie in (0, 1)")
    diag_term = p * np.log(x1 + (q / p) * (1 - x1)) + (1 - p) * np.log(
        x1 + ((1 - q) / (1 - p)) * (1 - x1)
    )
    cross_term = q * np.log((p / q) * x1 + (1 - x1)) + (1 - q) * np.log(
        ((1 - p) / (1 - q)) * x1 + (1 - x1)
    )
    return n_nodes * pair_density * (diag_term + cross_term)


def wilks_statistic(cs_hat: CountStats, params_star: SbmParams) -> float:
    """Twice the gap between the profile log-likelihood and the true one.

    Under the true model at the true labels this is asymptotically chi-square
    with k(k+1)/2 degrees of freedom.
    """
    return 2.0 * (profile_log_likelihood(cs_hat) - log_likelihood(cs_hat, params_star))


def wilks_quadratic_form(cs_hat: CountStats, params_star: SbmParams) -> float:
    """Quadratic approximation (1/2) sum n_ab (theta_hat - theta*)^2 / (theta*(1-theta*)).

    The 1/2 matches the halved ordered-pair likelihood convention, so this
    tracks :func:`wilks_statistic` up to higher-order terms.
    """
    th = params_star.theta
    if np.any((th <= 0) | (th >= 1)):
        raise ValueError("true theta must lie strictly in (0, 1)")
    pos = cs_hat.n_pair > 0
    th_hat = np.zeros_like(cs_hat.n_pair)
    th_hat[pos] = cs_hat.m_pair[pos] / cs_hat.n_pair[pos]
    num = cs_hat.n_pair[pos] * (th_hat[pos] - th[pos]) ** 2
    return 0.5 * float(np.sum(num / (th[pos] * (1 - th[pos]))))


def overfit_rate_bound(k_true: int, k_fit: int, n: int, c: float) -> float:
    """Upper bound on the overfit-rate exponent: 1 - C/log k+ + (2 log n + log k)/(n log k+).

    ``c`` is a caller-supplied diagnostic constant; the bound is reported,
    never asserted by the library.
    """
    if not (k_fit > k_true >= 1):
        raise ValueError("need k_fit > k_true >= 1")
    if n < 2:
        raise ValueError("need n >= 2")
    if c <= 0:
        raise ValueError("the constant must be positive")
    log_kp = np.log(k_fit)
    return float(1.0 - c / log_kp + (2 * np.log(n) + np.log(k_true)) / (n * log_kp))


def exhaustive_best_assignment(g: Graph, k: int) -> tuple[Assignment, float]:
    """Maximize the profile log-likelihood over all k^n assignments.

    Exponential cost; intended for oracle checks on tiny graphs.
    """
    n = g.n
    best_z = None
    best_val = -np.inf
    for labs in itertools.product(range(1, k + 1), repeat=n):
        z = Assignment(np.array(labs, dtype=np.int64), k=k)
        val = profile_log_likelihood(count_stats(g, z))
        if val > best_val:
            best_val, best_z = val, z
    return best_z, float(best_val)
