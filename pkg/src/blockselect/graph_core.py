"""Graph and label containers, sufficient statistics, and file ingestion.

Graphs are undirected, stored as dense symmetric integer matrices with a zero
diagonal (no self-loops anywhere in this package).  Community labels are
1-based both in memory and in files.  All containers are frozen after
construction, so every operation here is a pure function that is safe to call
concurrently.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

BINARY = "binary"
COUNTS = "counts"


class GraphFormatError(ValueError):
    """Raised when an input file cannot be parsed into a valid graph."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Graph:
    """Symmetric adjacency matrix with zero diagonal.

    ``mode`` is ``"binary"`` (0/1 entries, Bernoulli edges) or ``"counts"``
    (nonnegative integer multiplicities, Poisson edges).
    """

    entries: np.ndarray
    mode: str = BINARY

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency matrix must be square, got shape {a.shape}")
        if not np.issubdtype(a.dtype, np.integer):
            if not np.all(a == np.round(a)):
                raise ValueError("adjacency entries must be integers")
            a = a.astype(np.int64)
        if np.any(a < 0):
            raise ValueError("adjacency entries must be nonnegative")
        if np.any(np.diag(a) != 0):
            raise ValueError("self-loops are not allowed (nonzero diagonal)")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency matrix must be symmetric")
        if self.mode == BINARY:
            if np.any(a > 1):
                raise ValueError("binary graph has entries outside {0, 1}")
        elif self.mode != COUNTS:
            raise ValueError(f"unknown graph mode {self.mode!r}")
        object.__setattr__(self, "entries", _freeze(a))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def binarized(self) -> "Graph":
        """Explicit 0/1 view of a counts graph (A > 0)."""
        return Graph((self.entries > 0).astype(np.int64), mode=BINARY)


@dataclass(frozen=True)
class Assignment:
    """Length-n community label vector with values in 1..k."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        z = np.asarray(self.labels, dtype=np.int64)
        if z.ndim != 1:
            raise ValueError("labels must be a 1-d vector")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if z.size and (z.min() < 1 or z.max() > self.k):
            raise ValueError(f"labels must lie in 1..{self.k}")
        object.__setattr__(self, "labels", _freeze(z))

    @property
    def n(self) -> int:
        return self.labels.size

    def zero_based(self) -> np.ndarray:
        return self.labels - 1

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.zero_based(), minlength=self.k)

    def empty_blocks(self) -> tuple[int, ...]:
        """1-based indices of blocks with no members (possible on estimated labels)."""
        sizes = self.block_sizes()
        return tuple(int(a) + 1 for a in np.nonzero(sizes == 0)[0])


@dataclass(frozen=True)
class CountStats:
    """Sufficient statistics of a (graph, assignment) pair.

    ``n_pair[a, b]`` counts ordered node pairs (i, j), i != j, with labels
    (a+1, b+1); ``m_pair`` holds the matching ordered edge/count sums, so each
    unordered within-block edge is counted twice on the diagonal.
    """

    n_block: np.ndarray
    n_pair: np.ndarray
    m_pair: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "n_block", _freeze(np.asarray(self.n_block, dtype=np.float64)))
        object.__setattr__(self, "n_pair", _freeze(np.asarray(self.n_pair, dtype=np.float64)))
        object.__setattr__(self, "m_pair", _freeze(np.asarray(self.m_pair, dtype=np.float64)))

    @property
    def k(self) -> int:
        return self.n_block.size

    @property
    def n(self) -> int:
        return int(round(self.n_block.sum()))


@dataclass(frozen=True)
class ConfusionMatrix:
    """k' x k matrix of co-label proportions; entries sum to 1."""

    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "table", _freeze(np.asarray(self.table, dtype=np.float64)))


def count_stats(g: Graph, z: Assignment) -> CountStats:
    """Block sizes, ordered pair counts and ordered edge sums for (g, z)."""
    if z.n != g.n:
        raise ValueError(f"assignment length {z.n} != node count {g.n}")
    k = z.k
    zb = z.zero_based()
    n_block = np.bincount(zb, minlength=k).astype(np.float64)
    n_pair = np.outer(n_block, n_block) - np.diag(n_block)
    m_pair = np.zeros((k, k))
    ii, jj = np.nonzero(np.triu(g.entries, 1))
    if ii.size:
        w = g.entries[ii, jj].astype(np.float64)
        np.add.at(m_pair, (zb[ii], zb[jj]), w)
        np.add.at(m_pair, (zb[jj], zb[ii]), w)
    return CountStats(n_block, n_pair, m_pair)


def confusion(z_hat: Assignment, z_true: Assignment) -> ConfusionMatrix:
    """Joint label proportions: table[a, b] = #{i: z_hat=a+1, z_true=b+1} / n."""
    if z_hat.n != z_true.n:
        raise ValueError(f"assignment lengths differ: {z_hat.n} vs {z_true.n}")
    table = np.zeros((z_hat.k, z_true.k))
    np.add.at(table, (z_hat.zero_based(), z_true.zero_based()), 1.0)
    return ConfusionMatrix(table / z_hat.n)


def degrees(g: Graph) -> np.ndarray:
    """Row sums of the adjacency matrix (weighted in counts mode)."""
    return g.entries.sum(axis=1).astype(np.float64)


def symmetrize_sum(t: np.ndarray) -> np.ndarray:
    """Symmetric weight matrix W = T + T' from a directed weight matrix."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {t.shape}")
    return t + t.T


def threshold_quantile(w: np.ndarray, alpha: float) -> Graph:
    """Binary graph keeping entries at or above the alpha-quantile of W.

    The quantile is the order statistic W_(ceil(alpha*M)) over the M =
    n(n-1)/2 strict upper-triangle values, and the comparison is >=, so ties
    at the quantile become edges.  The diagonal is forced to zero.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {w.shape}")
    if not np.allclose(w, w.T):
        raise ValueError("weight matrix must be symmetric")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    n = w.shape[0]
    upper = w[np.triu_indices(n, k=1)]
    if upper.size == 0:
        raise ValueError("graph needs at least two nodes")
    order = np.sort(upper)
    rank = int(np.ceil(alpha * upper.size))
    cutoff = order[max(rank, 1) - 1]
    a = (w >= cutoff).astype(np.int64)
    np.fill_diagonal(a, 0)
    a = np.maximum(a, a.T)
    return Graph(a, mode=BINARY)


def largest_connected_component(g: Graph) -> tuple[Graph, dict[int, int]]:
    """Induced subgraph on the largest component, plus the old->new index map.

    Ties between equally sized components go to the one containing the
    smallest node index.
    """
    n = g.n
    if n == 0:
        raise ValueError("empty graph has no components")
    comp = np.full(n, -1, dtype=np.int64)
    n_comp = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        queue = deque([start])
        comp[start] = n_comp
        while queue:
            u = queue.popleft()
            for v in np.nonzero(g.entries[u])[0]:
                if comp[v] < 0:
                    comp[v] = n_comp
                    queue.append(int(v))
        n_comp += 1
    sizes = np.bincount(comp, minlength=n_comp)
    # components are discovered in order of their smallest node index,
    # so argmax breaks size ties toward the smallest minimum index
    keep = int(np.argmax(sizes))
    nodes = np.nonzero(comp == keep)[0]
    sub = g.entries[np.ix_(nodes, nodes)]
    mapping = {int(old): new for new, old in enumerate(nodes)}
    return Graph(sub, mode=g.mode), mapping


def _parse_edge_lines(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"{path}:{lineno}: expected 'i j [w]', got {raw.rstrip()!r}")
            try:
                i = int(parts[0])
                j = int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
            yield lineno, i, j, w


def load_edgelist(path: str, mode: str = BINARY, n: int | None = None) -> Graph:
    """Parse a 1-based `i j [w]` edge list into a Graph.

    Duplicate edges are collapsed in binary mode and summed in counts mode;
    self-loops are dropped.  Both situations are reported with a warning.
    """
    records = list(_parse_edge_lines(path))
    if n is None:
        n = max((max(i, j) for _, i, j, _ in records), default=0)
    a = np.zeros((n, n), dtype=np.int64)
    loops = 0
    duplicates = 0
    for lineno, i, j, w in records:
        if not (1 <= i <= n and 1 <= j <= n):
            raise GraphFormatError(f"{path}:{lineno}: node index out of range 1..{n}")
        if i == j:
            loops += 1
            continue
        wi = int(round(w))
        if mode == BINARY:
            if a[i - 1, j - 1]:
                duplicates += 1
            a[i - 1, j - 1] = 1
            a[j - 1, i - 1] = 1
        else:
            if a[i - 1, j - 1]:
                duplicates += 1
            a[i - 1, j - 1] += wi
            a[j - 1, i - 1] = a[i - 1, j - 1]
    if loops:
        warnings.warn(f"{path}: dropped {loops} self-loop(s)", stacklevel=2)
    if duplicates:
        action = "collapsed" if mode == BINARY else "summed"
        warnings.warn(f"{path}: {action} {duplicates} duplicate edge(s)", stacklevel=2)
    return Graph(a, mode=mode)


def load_dense_csv(path: str, mode: str = BINARY) -> Graph:
    """Parse a dense n x n matrix of numbers (CSV or whitespace) into a Graph."""
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        try:
            a = np.loadtxt(path, ndmin=2)
        except ValueError as exc:
            raise GraphFormatError(f"{path}: {exc}") from None
    if np.any(np.diag(a) != 0):
        warnings.warn(f"{path}: dropped nonzero diagonal entries", stacklevel=2)
        np.fill_diagonal(a, 0)
    if not np.allclose(a, a.T):
        raise GraphFormatError(f"{path}: dense matrix is not symmetric")
    a = np.maximum(a, a.T)
    return Graph(a.astype(np.int64), mode=mode)


def load_weighted_csv(path: str) -> np.ndarray:
    """Parse a dense square matrix of real weights (no Graph validation)."""
    try:
        w = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        try:
            w = np.loadtxt(path, ndmin=2)
        except ValueError as exc:
            raise GraphFormatError(f"{path}: {exc}") from None
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise GraphFormatError(f"{path}: matrix is not square, got shape {w.shape}")
    return w


def load_graph(path: str, format: str, mode: str = BINARY, n: int | None = None):
    """Dispatch on format: 'edgelist' / 'dense' -> Graph, 'weighted' -> ndarray."""
    if format == "edgelist":
        return load_edgelist(path, mode=mode, n=n)
    if format == "dense":
        return load_dense_csv(path, mode=mode)
    if format == "weighted":
        return load_weighted_csv(path)
    raise ValueError(f"unknown graph format {format!r}")


def save_edgelist(g: Graph, path: str) -> None:
    """Write 1-based `i j [w]` lines for the upper triangle of g."""
    ii, jj = np.nonzero(np.triu(g.entries, 1))
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in zip(ii, jj):
            w = int(g.entries[i, j])
            if g.mode == COUNTS and w != 1:
                fh.write(f"{i + 1} {j + 1} {w}\n")
            else:
                fh.write(f"{i + 1} {j + 1}\n")


def save_dense_csv(g: Graph, path: str) -> None:
    """Write the adjacency matrix as n rows of n comma-separated integers."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in g.entries:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def save_labels(z: Assignment, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lab in z.labels:
            fh.write(f"{int(lab)}\n")


def load_labels(path: str) -> Assignment:
    labs = np.loadtxt(path, dtype=np.int64, ndmin=1)
    return Assignment(labs, k=int(labs.max()))
