"""Random generation of block-model instances for the simulation designs.

Generation is deterministic given (design, rng state); the Monte-Carlo
drivers derive one independent stream per replication so runs are
order-independent and reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_core import Assignment, BINARY, COUNTS, Graph

# block sizes grow with k by extending this sequence: k=2 -> (60, 90), etc.
BLOCK_SIZE_SEQUENCE = (60, 90, 120, 150, 60, 90, 120, 150)

# non-homogeneous 4-block design; the upper triangle is mirrored
_NONHOMOGENEOUS_BASE = np.array(
    [
        [0.20, 0.04, 0.05, 0.03],
        [0.04, 0.20, 0.03, 0.05],
        [0.05, 0.03, 0.25, 0.04],
        [0.03, 0.05, 0.04, 0.25],
    ]
)


@dataclass(frozen=True)
class SbmDesign:
    """Fixed block sizes plus a symmetric probability (or rate) matrix."""

    block_sizes: tuple[int, ...]
    theta: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=np.float64)
        k = len(self.block_sizes)
        if th.shape != (k, k):
            raise ValueError("theta shape must match number of blocks")
        if not np.allclose(th, th.T):
            raise ValueError("theta must be symmetric")
        if any(s <= 0 for s in self.block_sizes):
            raise ValueError("block sizes must be positive")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "block_sizes", tuple(int(s) for s in self.block_sizes))

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @property
    def k(self) -> int:
        return len(self.block_sizes)

    def labels(self) -> Assignment:
        return Assignment(
            np.repeat(np.arange(1, self.k + 1), self.block_sizes), k=self.k
        )

    def min_block_fraction(self) -> float:
        """Smallest block share of n (the constant-fraction condition report)."""
        return min(self.block_sizes) / self.n


@dataclass(frozen=True)
class OmegaMixture:
    """Node-weight distribution: uniform body plus two atoms, mean one."""

    uniform_low: float = 3 / 5
    uniform_high: float = 7 / 5
    atom_low: float = 7 / 11
    atom_high: float = 15 / 11
    uniform_weight: float = 0.8
    atom_low_weight: float = 0.1
    atom_high_weight: float = 0.1

    def __post_init__(self):
        w = (self.uniform_weight, self.atom_low_weight, self.atom_high_weight)
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        mean = (
            self.uniform_weight * (self.uniform_low + self.uniform_high) / 2
            + self.atom_low_weight * self.atom_low
            + self.atom_high_weight * self.atom_high
        )
        if abs(mean - 1.0) > 1e-9:
            raise ValueError(f"mixture mean must be 1, got {mean}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        branch = rng.random(n)
        body = rng.uniform(self.uniform_low, self.uniform_high, size=n)
        return np.where(
            branch < self.uniform_weight,
            body,
            np.where(branch < self.uniform_weight + self.atom_low_weight,
                     self.atom_low, self.atom_high),
        )


def block_sizes_for(k: int) -> tuple[int, ...]:
    if not 1 <= k <= len(BLOCK_SIZE_SEQUENCE):
        raise ValueError(f"block-size sequence covers k in 1..{len(BLOCK_SIZE_SEQUENCE)}")
    return BLOCK_SIZE_SEQUENCE[:k]


def balanced_sizes(n: int, k: int) -> tuple[int, ...]:
    """n split into k blocks as evenly as possible, remainder on the first blocks."""
    base, rem = divmod(n, k)
    return tuple(base + (1 if a < rem else 0) for a in range(k))


def homogeneous_theta(k: int, base: float, r: float) -> np.ndarray:
    """base off the diagonal, base * (1 + r) on it."""
    if base < 0:
        raise ValueError("base probability must be nonnegative")
    th = np.full((k, k), base)
    np.fill_diagonal(th, base * (1 + r))
    if np.any(th > 1) or np.any(th < 0):
        raise ValueError("entries fall outside [0, 1]")
    return th


def nonhomogeneous_theta(rho: float) -> np.ndarray:
    """The fixed 4-block design scaled by rho."""
    th = rho * _NONHOMOGENEOUS_BASE
    if np.any(th > 1) or np.any(th < 0):
        raise ValueError("entries fall outside [0, 1]; need 0 < rho <= 1.2 here")
    return th


def sample_sbm(design: SbmDesign, rng: np.random.Generator) -> tuple[Graph, Assignment]:
    """Independent Bernoulli edges on the upper triangle, symmetrized."""
    z = design.labels()
    zb = z.zero_based()
    prob = design.theta[np.ix_(zb, zb)]
    n = design.n
    draws = rng.random((n, n))
    a = np.triu(draws < prob, 1).astype(np.int64)
    a = a + a.T
    return Graph(a, mode=BINARY), z


def sample_dcsbm(
    design: SbmDesign, mixture: OmegaMixture, rng: np.random.Generator
) -> tuple[Graph, Assignment, np.ndarray]:
    """Poisson counts with rates w_i * w_j * theta, no self-loops.

    Weights are drawn i.i.d. from the mixture and then rescaled within each
    block so they sum exactly to the block size, which keeps the plug-in
    weight MLE an exact round-trip.
    """
    z = design.labels()
    zb = z.zero_based()
    weights = mixture.sample(design.n, rng)
    sizes = np.asarray(design.block_sizes, dtype=np.float64)
    block_sums = np.bincount(zb, weights=weights, minlength=design.k)
    weights = weights * (sizes / block_sums)[zb]
    rate = np.outer(weights, weights) * design.theta[np.ix_(zb, zb)]
    upper = rng.poisson(np.triu(rate, 1))
    a = upper + upper.T
    return Graph(a, mode=COUNTS), z, weights


def sim1_design() -> SbmDesign:
    """n=500, three balanced blocks, within 0.18 / between 0.03."""
    return SbmDesign(balanced_sizes(500, 3), homogeneous_theta(3, 0.03, 5.0))


def homogeneous_design(k: int, r: float, base: float = 0.03) -> SbmDesign:
    """Sequence block sizes with the homogeneous probability matrix."""
    return SbmDesign(block_sizes_for(k), homogeneous_theta(k, base, r))


def nonhomogeneous_design(rho: float) -> SbmDesign:
    return SbmDesign(block_sizes_for(4), nonhomogeneous_theta(rho))
