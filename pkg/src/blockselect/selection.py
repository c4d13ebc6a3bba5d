"""Penalized-likelihood selection of the number of communities.

The criterion for k candidate blocks is

    criterion(k) = profile_loglik(k) - penalty(k, n),

maximized over a candidate range.  Three penalties are supported:

    cbic  ->  lambda * n * log(k) + k(k+1)/2 * log(n)
    bic   ->                        k(k+1)/2 * log(n)
    wb    ->  lambda * k(k+1)/2 * n * log(n)

The same estimated labels are reused for every penalty at a given k, so
comparisons between penalties isolate the penalty term exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dcsbm import profile_log_likelihood_dcsbm
from .graph_core import Assignment, Graph, count_stats, degrees
from .sbm import profile_log_likelihood
from .spectral import (
    KMeansConfig,
    cluster_rows,
    normalized_laplacian,
    refine_labels,
    score_embedding,
    top_eigenpairs,
)
from .output import atomic_write_text, format_float

PENALTY_KINDS = ("cbic", "bic", "wb")
MODELS = ("sbm", "dcsbm")
METHODS = ("spectral", "score")


@dataclass(frozen=True)
class Penalty:
    """Penalty specification; ``lam`` is ignored by the plain BIC."""

    kind: str = "cbic"
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValueError(f"penalty kind must be one of {PENALTY_KINDS}, got {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")


def penalty_value(p: Penalty, k: int, n: int) -> float:
    if k < 1 or n < 2:
        raise ValueError("need k >= 1 and n >= 2")
    params = k * (k + 1) / 2 * np.log(n)
    if p.kind == "cbic":
        return float(p.lam * n * np.log(k) + params)
    if p.kind == "bic":
        return float(params)
    return float(p.lam * k * (k + 1) / 2 * n * np.log(n))


def derived_seed(*parts: int) -> int:
    """Stable seed derivation so sub-tasks get independent, replayable streams."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


@dataclass
class PerKRecord:
    k: int
    labels: Assignment | None
    profile_loglik: float | None
    penalty_value: float | None
    criterion_value: float | None
    method: str
    refined: bool
    degenerate_blocks: int = 0
    error: str | None = None


@dataclass
class SelectionReport:
    n: int
    model: str
    method: str
    penalty: Penalty
    refine: bool
    seed: int
    score_binarize: bool = True
    per_k: list[PerKRecord] = field(default_factory=list)
    k_hat: int | None = None
    ties: list[int] = field(default_factory=list)
    failures: int = 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "model": self.model,
            "method": self.method,
            "penalty": {"kind": self.penalty.kind, "lambda": self.penalty.lam},
            "refine": self.refine,
            "score_binarize": self.score_binarize,
            "seed": self.seed,
            "k_hat": self.k_hat,
            "ties": self.ties,
            "failures": self.failures,
            "per_k": [
                {
                    "k": r.k,
                    "profile_loglik": r.profile_loglik,
                    "penalty_value": r.penalty_value,
                    "criterion_value": r.criterion_value,
                    "degenerate_blocks": r.degenerate_blocks,
                    "refined": r.refined,
                    "error": r.error,
                    "labels": None if r.labels is None else [int(v) for v in r.labels.labels],
                }
                for r in self.per_k
            ],
        }

    def write_json(self, path: str) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def write_csv(self, path: str) -> None:
        lines = ["k,profile_loglik,penalty_value,criterion_value,degenerate_blocks,refined,error"]
        for r in self.per_k:
            lines.append(
                ",".join(
                    [
                        str(r.k),
                        format_float(r.profile_loglik),
                        format_float(r.penalty_value),
                        format_float(r.criterion_value),
                        str(r.degenerate_blocks),
                        str(int(r.refined)),
                        "" if r.error is None else r.error.replace(",", ";"),
                    ]
                )
            )
        atomic_write_text(path, "\n".join(lines) + "\n")


def _profile_for(g: Graph, z: Assignment, model: str) -> float:
    if model == "sbm":
        return profile_log_likelihood(count_stats(g, z))
    return profile_log_likelihood_dcsbm(g, z)


@dataclass
class ScanEntry:
    k: int
    labels: Assignment | None
    profile: float | None
    degenerate_blocks: int
    error: str | None = None


def profile_scan(
    g: Graph,
    ks: list[int],
    model: str,
    method: str,
    refine: bool,
    seed: int,
    kmeans_restarts: int = 20,
    score_binarize: bool = True,
) -> list[ScanEntry]:
    """Estimated labels and profile log-likelihood for every candidate k.

    The spectral decomposition is computed once at max(ks) and shared, which
    gives results identical to running each candidate independently.  For
    counts graphs the ratio embedding is built from the 0/1 skeleton unless
    ``score_binarize`` is off; profiles always use the raw graph.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if model == "sbm" and g.mode != "binary":
        raise ValueError("sbm selection needs a binary graph; binarize counts explicitly")
    n = g.n
    ks = sorted(set(ks))
    if not ks or ks[0] < 1 or ks[-1] > n:
        raise ValueError(f"candidate range must be nonempty within [1, {n}]")
    kmax = ks[-1]
    embedding = None
    live = None
    if kmax > 1:
        if method == "spectral":
            pairs = top_eigenpairs(normalized_laplacian(g), kmax)
            embedding = pairs.vectors
            live = degrees(g) > 0
        else:
            embed_graph = g.binarized() if (score_binarize and g.mode == "counts") else g
            embedding = score_embedding(embed_graph, kmax).rows
            live = np.ones(n, dtype=bool)
    entries: list[ScanEntry] = []
    for k in ks:
        try:
            if k == 1:
                z = Assignment(np.ones(n, dtype=np.int64), k=1)
            else:
                cfg = KMeansConfig(seed=derived_seed(seed, k), restarts=kmeans_restarts)
                z = cluster_rows(embedding[:, :k], live, k, cfg)
                if refine:
                    z = refine_labels(g, z, model=model)
            prof = _profile_for(g, z, model)
            entries.append(ScanEntry(k, z, prof, len(z.empty_blocks())))
        except Exception as exc:  # per-k failures are recorded, not fatal
            entries.append(ScanEntry(k, None, None, 0, error=f"{type(exc).__name__}: {exc}"))
    return entries


def criterion(
    g: Graph,
    k: int,
    p: Penalty,
    model: str = "sbm",
    method: str = "spectral",
    refine: bool = False,
    seed: int = 0,
    score_binarize: bool = True,
) -> PerKRecord:
    """Estimated labels, profile log-likelihood, and penalized criterion at one k."""
    entry = profile_scan(g, [k], model, method, refine, seed, score_binarize=score_binarize)[0]
    if entry.error is not None:
        raise RuntimeError(f"estimation failed at k={k}: {entry.error}")
    pen = penalty_value(p, k, g.n)
    return PerKRecord(
        k=k,
        labels=entry.labels,
        profile_loglik=entry.profile,
        penalty_value=pen,
        criterion_value=entry.profile - pen,
        method=method,
        refined=refine,
        degenerate_blocks=entry.degenerate_blocks,
    )


def select_k(
    g: Graph,
    k_range: tuple[int, int],
    p: Penalty,
    model: str = "sbm",
    method: str = "spectral",
    refine: bool = False,
    seed: int = 0,
    score_binarize: bool = True,
) -> SelectionReport:
    """Scan candidate block counts and pick the criterion argmax.

    Ties break to the smallest k and are reported; per-k estimation failures
    are recorded and excluded from the argmax.
    """
    kmin, kmax = k_range
    ks = list(range(kmin, kmax + 1))
    entries = profile_scan(g, ks, model, method, refine, seed, score_binarize=score_binarize)
    report = SelectionReport(
        n=g.n, model=model, method=method, penalty=p, refine=refine, seed=seed,
        score_binarize=score_binarize,
    )
    for entry in entries:
        if entry.error is not None:
            report.per_k.append(
                PerKRecord(entry.k, None, None, None, None, method, refine, 0, entry.error)
            )
            report.failures += 1
            continue
        pen = penalty_value(p, entry.k, g.n)
        report.per_k.append(
            PerKRecord(
                k=entry.k,
                labels=entry.labels,
                profile_loglik=entry.profile,
                penalty_value=pen,
                criterion_value=entry.profile - pen,
                method=method,
                refined=refine,
                degenerate_blocks=entry.degenerate_blocks,
            )
        )
    scored = [r for r in report.per_k if r.criterion_value is not None]
    if not scored:
        raise RuntimeError("estimation failed at every candidate k")
    best = max(r.criterion_value for r in scored)
    tied = [r.k for r in scored if r.criterion_value >= best - 1e-9]
    report.k_hat = min(tied)
    report.ties = tied if len(tied) > 1 else []
    return report
