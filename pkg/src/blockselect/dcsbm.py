"""Poisson degree-corrected block model likelihood and plug-in MLEs.

Same halved ordered-pair convention as the Bernoulli module:

    loglik = sum_i d_i log(w_i) + (1/2) * sum_{a,b} [ m_ab log(theta_ab) - n_ab theta_ab ],

where d are degrees and w the per-node weights.  The Poisson normalizing
constants sum_{i<j} log(A_ij!) are omitted throughout: they do not depend on
(theta, w, z), so they cancel in every comparison across candidate block
counts.  The quadratic rate term is evaluated at the block level
(n_ab * theta_ab); with unit weights this equals the exact per-pair rate sum,
and under the identifiability constraint below it is what makes the plug-in
weight estimate the exact constrained maximizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_core import Assignment, CountStats, Graph, count_stats, degrees
from .sbm import DegenerateParameterError

IDENTIFIABILITY_RTOL = 1e-9


@dataclass(frozen=True)
class DcsbmParams:
    """Symmetric k x k rate matrix, per-node weights, and block proportions.

    Identifiability requires the weights to sum to the block size within each
    block; that constraint involves the assignment and is checked by
    :func:`check_identifiability` / :func:`log_likelihood_dcsbm`.
    """

    theta: np.ndarray
    node_weights: np.ndarray
    proportions: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=np.float64)
        w = np.asarray(self.node_weights, dtype=np.float64)
        p = np.asarray(self.proportions, dtype=np.float64)
        if th.ndim != 2 or th.shape[0] != th.shape[1]:
            raise ValueError(f"theta must be square, got shape {th.shape}")
        if not np.allclose(th, th.T, equal_nan=True):
            raise ValueError("theta must be symmetric")
        if np.any(th[~np.isnan(th)] < 0):
            raise ValueError("rate entries must be nonnegative")
        if np.any(w < 0):
            raise ValueError("node weights must be nonnegative")
        if p.shape != (th.shape[0],) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("proportions must be a simplex vector of length k")
        for arr in (th, w, p):
            arr.setflags(write=False)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "node_weights", w)
        object.__setattr__(self, "proportions", p)

    @property
    def k(self) -> int:
        return self.theta.shape[0]


def check_identifiability(params: DcsbmParams, z: Assignment) -> None:
    """Raise unless the weights sum to the block size in every block."""
    sums = np.bincount(z.zero_based(), weights=params.node_weights, minlength=z.k)
    sizes = z.block_sizes().astype(np.float64)
    bad = np.abs(sums - sizes) > IDENTIFIABILITY_RTOL * np.maximum(1.0, sizes)
    if np.any(bad):
        blocks = [int(a) + 1 for a in np.nonzero(bad)[0]]
        raise ValueError(f"node weights violate the block-sum constraint in blocks {blocks}")


def log_likelihood_dcsbm(g: Graph, params: DcsbmParams, z: Assignment) -> float:
    """Poisson log-likelihood at fixed (theta, weights), constants dropped."""
    if z.n != g.n:
        raise ValueError(f"assignment length {z.n} != node count {g.n}")
    if params.k != z.k:
        raise ValueError("theta dimensions do not match assignment")
    check_identifiability(params, z)
    d = degrees(g)
    w = params.node_weights
    if np.any((d > 0) & (w == 0)):
        raise DegenerateParameterError("zero weight on a node with positive degree")
    cs = count_stats(g, z)
    th = params.theta
    if np.any((cs.m_pair > 0) & (th == 0)):
        raise DegenerateParameterError("zero rate on a block pair with observed counts")
    pos = d > 0
    deg_term = float(np.sum(d[pos] * np.log(w[pos])))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_th = np.where(cs.m_pair > 0, np.log(np.where(th > 0, th, 1.0)), 0.0)
    block_term = 0.5 * float(np.sum(cs.m_pair * log_th - cs.n_pair * th))
    return deg_term + block_term


def mle_node_weights(d: np.ndarray, z: Assignment) -> tuple[np.ndarray, tuple[int, ...]]:
    """Plug-in weight MLE w_i = n_a d_i / (sum of degrees in block a).

    Blocks with zero total degree fall back to unit weights and are returned
    as the degenerate-block flags (1-based).  Zero-degree nodes in live
    blocks get weight 0.  The block-sum constraint holds exactly either way.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (z.n,):
        raise ValueError("degree vector length must match assignment")
    zb = z.zero_based()
    sizes = z.block_sizes().astype(np.float64)
    deg_sum = np.bincount(zb, weights=d, minlength=z.k)
    degenerate = tuple(
        int(a) + 1 for a in np.nonzero((deg_sum == 0) & (sizes > 0))[0]
    )
    scale = np.where(deg_sum > 0, sizes / np.where(deg_sum > 0, deg_sum, 1.0), np.nan)
    per_node = scale[zb]
    weights = np.where(np.isnan(per_node), 1.0, d * np.nan_to_num(per_node))
    return weights, degenerate


def mle_theta_poisson(cs: CountStats) -> np.ndarray:
    """Blockwise Poisson rate MLE m_ab / n_ab (0 where the pair set is empty)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(cs.n_pair > 0, cs.m_pair / np.where(cs.n_pair > 0, cs.n_pair, 1.0), 0.0)


def profile_log_likelihood_dcsbm(g: Graph, z: Assignment) -> float:
    """Log-likelihood at the plug-in weight MLE and blockwise rate MLE."""
    d = degrees(g)
    weights, _ = mle_node_weights(d, z)
    cs = count_stats(g, z)
    th = mle_theta_poisson(cs)
    sizes = cs.n_block
    params = DcsbmParams(th, weights, sizes / sizes.sum())
    return log_likelihood_dcsbm(g, params, z)
