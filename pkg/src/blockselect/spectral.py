"""Label estimation: spectral clustering, ratio-of-eigenvector clustering, k-means,
and a greedy profile-likelihood refiner.

Everything is deterministic given the seed carried in :class:`KMeansConfig`;
there is no global RNG state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._refine_fast import NUMBA_AVAILABLE, greedy_refine
from .graph_core import Assignment, Graph, degrees

EIGEN_RESIDUAL_TOL = 1e-8


class EigenConvergenceError(RuntimeError):
    """Eigensolver residuals exceeded the tolerance."""


@dataclass(frozen=True)
class KMeansConfig:
    """k-means++ seeding, best-of-restarts by within-cluster sum of squares."""

    seed: int = 0
    restarts: int = 20
    max_iter: int = 100


@dataclass(frozen=True)
class EigenPairs:
    """Top eigenpairs of a symmetric matrix, sorted by descending |value|."""

    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Per-node embedding rows fed to k-means.

    ``kind`` is "laplacian" (eigenvector rows) or "score-ratio" (leading-
    eigenvector ratios, first column identically one).  ``clamped`` counts
    ratio entries truncated to +-log(n).
    """

    rows: np.ndarray
    kind: str
    clamped: int = 0


def normalized_laplacian(g: Graph) -> np.ndarray:
    """D^(-1/2) A D^(-1/2); rows and columns of isolated nodes are zero."""
    d = degrees(g)
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    return g.entries * inv_sqrt[:, None] * inv_sqrt[None, :]


def top_eigenpairs(m: np.ndarray, k: int) -> EigenPairs:
    """k eigenpairs of a symmetric matrix, largest in magnitude first.

    Signs are canonicalized so each vector's largest-magnitude entry is
    positive.  Residuals ||Mv - lambda v|| are validated against
    1e-8 * ||M||; a violation raises with the worst residual reported.
    """
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ValueError("matrix must be square")
    if not np.allclose(m, m.T):
        raise ValueError("matrix must be symmetric")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got {k}")
    all_vals, all_vecs = scipy.linalg.eigh(m)
    matrix_norm = float(np.max(np.abs(all_vals))) if n else 0.0
    order = np.argsort(-np.abs(all_vals), kind="stable")[:k]
    vals = all_vals[order]
    vecs = all_vecs[:, order].copy()
    for j in range(k):
        lead = np.argmax(np.abs(vecs[:, j]))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    residual = np.linalg.norm(m @ vecs - vecs * vals[None, :], axis=0)
    worst = float(residual.max())
    if worst > EIGEN_RESIDUAL_TOL * max(matrix_norm, 1.0):
        raise EigenConvergenceError(
            f"eigen residual {worst:.3e} exceeds {EIGEN_RESIDUAL_TOL:.0e} * ||M||"
        )
    return EigenPairs(values=vals, vectors=vecs)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[j] = x[idx]
        np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1), out=d2)
    return centers


def _sq_distances(x: np.ndarray, centers: np.ndarray, x_sq: np.ndarray) -> np.ndarray:
    d2 = x_sq[:, None] - 2.0 * (x @ centers.T) + np.sum(centers * centers, axis=1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int) -> tuple[np.ndarray, float]:
    k = centers.shape[0]
    x_sq = np.sum(x * x, axis=1)
    labels = None
    for _ in range(max_iter):
        d2 = _sq_distances(x, centers, x_sq)
        new_labels = np.argmin(d2, axis=1)  # argmin ties go to the lowest index
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = x[labels == j]
            if members.size:
                centers[j] = members.mean(axis=0)
    d2 = _sq_distances(x, centers, x_sq)
    wcss = float(d2[np.arange(x.shape[0]), labels].sum())
    return labels, wcss


def kmeans(rows, k: int, cfg: KMeansConfig) -> Assignment:
    """Best-of-restarts Lloyd k-means; deterministic given cfg.seed.

    Clusters may come out empty when there are fewer than k distinct rows;
    the caller can detect that through ``Assignment.empty_blocks``.
    """
    x = rows.rows if isinstance(rows, EmbeddingMatrix) else np.asarray(rows, dtype=np.float64)
    n = x.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds number of rows {n}")
    if k == 1:
        return Assignment(np.ones(n, dtype=np.int64), k=1)
    rng = np.random.default_rng(cfg.seed)
    best_labels, best_wcss = None, np.inf
    for _ in range(cfg.restarts):
        centers = _kmeans_pp_init(x, k, rng)
        labels, wcss = _lloyd(x, centers, cfg.max_iter)
        if wcss < best_wcss:
            best_labels, best_wcss = labels, wcss
    return Assignment(best_labels + 1, k=k)


def cluster_rows(rows: np.ndarray, live: np.ndarray, k: int, cfg: KMeansConfig) -> Assignment:
    """k-means on live rows; dead (isolated) rows go to the nearest centroid.

    When there are fewer live rows than clusters, everything is clustered
    together instead; surplus clusters come out empty and can be detected
    through ``Assignment.empty_blocks``.
    """
    n = rows.shape[0]
    if np.all(live) or int(live.sum()) < k:
        return kmeans(rows, k, cfg)
    zk = kmeans(rows[live], k, cfg)
    labels = np.empty(n, dtype=np.int64)
    labels[live] = zk.labels
    centers = np.vstack([
        rows[live][zk.labels == j + 1].mean(axis=0)
        if np.any(zk.labels == j + 1)
        else np.full(rows.shape[1], np.inf)
        for j in range(k)
    ])
    for i in np.nonzero(~live)[0]:
        labels[i] = 1 + int(np.argmin(((rows[i] - centers) ** 2).sum(axis=1)))
    return Assignment(labels, k=k)


def spectral_clustering(g: Graph, k: int, cfg: KMeansConfig) -> Assignment:
    """k-means on rows of the top-k normalized-Laplacian eigenvectors.

    Isolated nodes are left out of the k-means run and assigned to the
    nearest centroid afterwards.
    """
    n = g.n
    if k > n:
        raise ValueError(f"k={k} exceeds node count {n}")
    if k == 1:
        return Assignment(np.ones(n, dtype=np.int64), k=1)
    lap = normalized_laplacian(g)
    pairs = top_eigenpairs(lap, k)
    return cluster_rows(pairs.vectors, degrees(g) > 0, k, cfg)


def score_embedding(g: Graph, k: int) -> EmbeddingMatrix:
    """Ratio embedding (1, v2/v1, ..., vk/v1) from adjacency eigenvectors.

    Ratios are clamped to +-log(n); nonfinite ratios (zero leading-vector
    entries) clamp too and are counted.
    """
    n = g.n
    pairs = top_eigenpairs(g.entries.astype(np.float64), k)
    v1 = pairs.vectors[:, 0]
    bound = np.log(n)
    rows = np.ones((n, k))
    clamped = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(1, k):
            ratio = pairs.vectors[:, j] / v1
            np.nan_to_num(ratio, copy=False, nan=0.0, posinf=np.inf, neginf=-np.inf)
            clamped += int(np.sum(np.abs(ratio) > bound))
            rows[:, j] = np.clip(ratio, -bound, bound)
    return EmbeddingMatrix(rows=rows, kind="score-ratio", clamped=clamped)


def _is_connected(g: Graph) -> bool:
    n = g.n
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in np.nonzero(g.entries[u])[0]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(int(v))
    return count == n


def score(g: Graph, k: int, cfg: KMeansConfig, binarize_counts: bool = True) -> Assignment:
    """k-means on the ratio embedding built from adjacency eigenvectors.

    For multigraphs (counts mode) the embedding is built from the 0/1
    skeleton by default, which gives noticeably cleaner leading eigenvectors;
    pass ``binarize_counts=False`` to embed the raw counts.  Likelihoods are
    unaffected either way; this only changes the estimated labels.
    """
    n = g.n
    if k > n:
        raise ValueError(f"k={k} exceeds node count {n}")
    if k == 1:
        return Assignment(np.ones(n, dtype=np.int64), k=1)
    if not _is_connected(g):
        warnings.warn(
            "graph is disconnected; ratio embedding entries off the dominant "
            "component are clamped (consider largest_connected_component)",
            stacklevel=2,
        )
    embed_graph = g.binarized() if (binarize_counts and g.mode == "counts") else g
    return kmeans(score_embedding(embed_graph, k), k, cfg)


class _RefineState:
    """Incremental sufficient statistics for greedy single-node moves."""

    def __init__(self, g: Graph, z0: Assignment, model: str):
        self.model = model
        self.a = g.entries.astype(np.float64)
        self.k = z0.k
        self.z = z0.zero_based().copy()
        self.n_a = np.bincount(self.z, minlength=self.k).astype(np.float64)
        onehot = np.zeros((g.n, self.k))
        onehot[np.arange(g.n), self.z] = 1.0
        self.s = self.a @ onehot  # s[i, a] = edge weight from i into block a
        self.m = onehot.T @ self.s  # ordered pair sums (diagonal double-counts)
        self.deg = self.a.sum(axis=1)
        self.deg_sum = np.bincount(self.z, weights=self.deg, minlength=self.k)

    def pair_counts(self) -> np.ndarray:
        return np.outer(self.n_a, self.n_a) - np.diag(self.n_a)

    def _block_value(self, n_ab, m_ab):
        """Per-entry likelihood contribution f(n_ab, m_ab) for the model."""
        n_ab = np.asarray(n_ab, dtype=np.float64)
        m_ab = np.asarray(m_ab, dtype=np.float64)
        out = np.zeros(np.broadcast(n_ab, m_ab).shape)
        if self.model == "sbm":
            pos = n_ab > 0
            ratio = np.clip(np.divide(m_ab, n_ab, out=np.zeros_like(out), where=pos), 0.0, 1.0)
            inside = pos & (ratio > 0) & (ratio < 1)
            r = ratio[inside]
            out[inside] = (np.broadcast_to(n_ab, out.shape)[inside]
                           * (r * np.log(r) + (1 - r) * np.log1p(-r)))
        else:
            pos = m_ab > 0
            mb = np.broadcast_to(m_ab, out.shape)[pos]
            nb = np.broadcast_to(n_ab, out.shape)[pos]
            out[pos] = mb * np.log(mb / nb) - mb
        return out

    def _weight_value(self, n_a, deg_sum):
        pos = np.asarray(deg_sum) > 0
        out = np.zeros(np.broadcast(np.asarray(n_a), np.asarray(deg_sum)).shape)
        ds = np.broadcast_to(deg_sum, out.shape)[pos]
        na = np.broadcast_to(n_a, out.shape)[pos]
        out[pos] = ds * (np.log(na) - np.log(ds))
        return out

    def move_deltas(self, i: int) -> np.ndarray:
        """Profile log-likelihood change for moving node i into each block."""
        c = self.z[i]
        k = self.k
        n_a = self.n_a
        m = self.m
        s = self.s[i]
        n_pair = self.pair_counts()
        f_old = self._block_value(n_pair, m)

        # row c after removing i (pairs (c, b), b outside {c, d})
        f_rem = self._block_value((n_a[c] - 1) * n_a, m[c] - s)
        rem_base = f_rem.sum() - f_rem[c]
        old_c = f_old[c].sum() - f_old[c, c]
        # insertion rows (pairs (d, b), b outside {c, d})
        f_ins = self._block_value(np.outer(n_a + 1, n_a), m + s[None, :])
        ins_rows = f_ins.sum(axis=1) - f_ins[:, c] - np.diag(f_ins)
        old_rows = f_old.sum(axis=1) - f_old[:, c] - np.diag(f_old)
        # diagonal and cross entries
        diag_c = 0.5 * (self._block_value((n_a[c] - 1) * (n_a[c] - 2), m[c, c] - 2 * s[c])
                        - f_old[c, c])
        diag_d = 0.5 * (self._block_value((n_a + 1) * n_a, np.diag(m) + 2 * s)
                        - np.diag(f_old))
        cross = (self._block_value((n_a[c] - 1) * (n_a + 1), m[c] + s[c] - s)
                 - f_old[c])

        deltas = (rem_base - f_rem - (old_c - f_old[c])) + (ins_rows - old_rows) \
            + diag_c + diag_d + cross
        if self.model == "dcsbm":
            d_i = self.deg[i]
            w_old = self._weight_value(n_a, self.deg_sum)
            w_c_new = self._weight_value(n_a[c] - 1, self.deg_sum[c] - d_i)
            w_d_new = self._weight_value(n_a + 1, self.deg_sum + d_i)
            deltas = deltas + (w_c_new - w_old[c]) + (w_d_new - w_old)
        deltas[c] = 0.0
        return deltas

    def apply_move(self, i: int, d: int) -> None:
        c = self.z[i]
        s = self.s[i].copy()
        self.m[c, :] -= s
        self.m[:, c] -= s
        self.m[d, :] += s
        self.m[:, d] += s
        self.n_a[c] -= 1
        self.n_a[d] += 1
        self.s[:, c] -= self.a[:, i]
        self.s[:, d] += self.a[:, i]
        self.deg_sum[c] -= self.deg[i]
        self.deg_sum[d] += self.deg[i]
        self.z[i] = d


def refine_labels(g: Graph, z0: Assignment, model: str = "sbm", max_sweeps: int = 25) -> Assignment:
    """Greedy single-node moves, accepted only on strict profile increase.

    Sweeps nodes in index order; a move that would empty a block is rejected.
    Stops after a sweep with no accepted move or after ``max_sweeps``.  The
    profile log-likelihood of the result is never below that of ``z0``.
    """
    if model not in ("sbm", "dcsbm"):
        raise ValueError(f"unknown model {model!r}")
    if model == "sbm" and g.mode != "binary":
        raise ValueError("sbm refinement needs a binary graph; binarize counts explicitly")
    if z0.n != g.n:
        raise ValueError("assignment length must match node count")
    if z0.k == 1:
        return z0
    tol = 1e-9
    if NUMBA_AVAILABLE:
        labels = greedy_refine(g.entries, z0.zero_based(), z0.k, model, max_sweeps, tol)
        return Assignment(labels + 1, k=z0.k)
    state = _RefineState(g, z0, model)
    for _ in range(max_sweeps):
        moved = False
        for i in range(g.n):
            c = state.z[i]
            if state.n_a[c] <= 1:
                continue  # never empty a block
            deltas = state.move_deltas(i)
            d = int(np.argmax(deltas))
            if deltas[d] > tol:
                state.apply_move(i, d)
                moved = True
        if not moved:
            break
    return Assignment(state.z + 1, k=z0.k)
