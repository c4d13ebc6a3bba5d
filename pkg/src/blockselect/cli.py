"""Command-line front end: selection, simulation, experiments, preprocessing.

Exit codes: 0 success, 2 usage/parse/validation error, 3 numerical failure.
Errors go to stderr as single-line JSON.  Every run writes a manifest
(resolved config + seed + version) next to its outputs; re-running with
``--from-manifest`` reproduces the outputs byte for byte.  All randomness
derives from --seed; the CLI never seeds from the clock.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .experiments import (
    OUTPUT_COLUMNS,
    EstimatorSpec,
    run_lambda_sweep,
    run_mu_curve,
    run_sim1_distributions,
    run_success_table,
    write_distribution_csv,
    write_histogram_csv,
    write_mu_curve_csv,
    write_table_csv,
)
from .graph_core import (
    GraphFormatError,
    largest_connected_component,
    load_graph,
    save_edgelist,
    save_labels,
    symmetrize_sum,
    threshold_quantile,
)
from .output import atomic_write_text, write_csv
from .sbm import DegenerateParameterError
from .selection import Penalty, select_k
from .simgen import (
    OmegaMixture,
    homogeneous_design,
    nonhomogeneous_design,
    sample_dcsbm,
    sample_sbm,
    sim1_design,
)
from .spectral import EigenConvergenceError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

DESIGNS = ("sim1", "sim2", "sim3", "sim4", "sim5", "lambda-sweep", "mu-curve")
DEFAULT_LAMBDA_GRID = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5)
MU_CURVE_GRID = tuple(np.round(np.arange(0.18, 0.5001, 0.04), 10))


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    format: str = "edgelist"
    mode: str = "binary"
    model: str = "sbm"
    method: str | None = None
    penalty: str = "cbic"
    lam: float = 1.0
    kmin: int = 1
    kmax: int = 18
    refine: bool = False
    seed: int | None = None
    reps: int = 50
    out_dir: str = "."
    design: str | None = None
    k: int | None = None
    r: float | None = None
    rho: float | None = None
    lambdas: tuple[float, ...] | None = None
    score_raw_counts: bool = False
    histogram: bool = False
    symmetrize: bool = False
    threshold: float | None = None
    largest_component: bool = False

    def resolved_method(self) -> str:
        if self.method is not None:
            return self.method
        return "score" if self.model == "dcsbm" else "spectral"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="blockselect", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, seed_required):
        p.add_argument("--out-dir", default=".")
        p.add_argument("--from-manifest", default=None, metavar="PATH")
        if seed_required:
            p.add_argument("--seed", type=int, default=None)

    p_sel = sub.add_parser("select", help="estimate the number of communities in a graph file")
    p_sel.add_argument("--input")
    p_sel.add_argument("--format", choices=("edgelist", "dense"), default="edgelist")
    p_sel.add_argument("--mode", choices=("binary", "counts"), default="binary")
    p_sel.add_argument("--model", choices=("sbm", "dcsbm"), default="sbm")
    p_sel.add_argument("--method", choices=("spectral", "score"), default=None)
    p_sel.add_argument("--penalty", choices=("cbic", "bic", "wb"), default="cbic")
    p_sel.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_sel.add_argument("--kmin", type=int, default=1)
    p_sel.add_argument("--kmax", type=int, default=18)
    p_sel.add_argument("--refine", action="store_true")
    p_sel.add_argument("--score-raw-counts", action="store_true",
                       help="build the ratio embedding from raw counts instead of the 0/1 skeleton")
    common(p_sel, seed_required=True)

    p_sim = sub.add_parser("simulate", help="write one synthetic graph + labels for a design")
    p_sim.add_argument("--design", choices=("sim1", "sim2", "sim3", "sim4", "sim5"))
    p_sim.add_argument("--k", type=int, default=None)
    p_sim.add_argument("--r", type=float, default=None)
    p_sim.add_argument("--rho", type=float, default=None)
    common(p_sim, seed_required=True)

    p_exp = sub.add_parser("experiment", help="run a Monte-Carlo table/figure reproduction")
    p_exp.add_argument("--design", choices=DESIGNS)
    p_exp.add_argument("--r", type=float, default=None)
    p_exp.add_argument("--rho", type=float, default=None)
    p_exp.add_argument("--k", type=int, default=None)
    p_exp.add_argument("--reps", type=int, default=50)
    p_exp.add_argument("--kmin", type=int, default=1)
    p_exp.add_argument("--kmax", type=int, default=18)
    p_exp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_exp.add_argument("--lambdas", default=None,
                       help="comma-separated grid for the lambda sweep")
    p_exp.add_argument("--refine", action="store_true")
    p_exp.add_argument("--score-raw-counts", action="store_true",
                       help="build the ratio embedding from raw counts instead of the 0/1 skeleton")
    p_exp.add_argument("--histogram", action="store_true")
    p_exp.add_argument("--model", choices=("sbm", "dcsbm"), default=None)
    p_exp.add_argument("--method", choices=("spectral", "score"), default=None)
    common(p_exp, seed_required=True)

    p_pre = sub.add_parser("preprocess", help="symmetrize/threshold/extract a component")
    p_pre.add_argument("--input")
    p_pre.add_argument("--format", choices=("edgelist", "dense", "weighted"), default="weighted")
    p_pre.add_argument("--symmetrize", action="store_true")
    p_pre.add_argument("--threshold", type=float, default=None)
    p_pre.add_argument("--largest-component", action="store_true")
    common(p_pre, seed_required=False)
    return parser


def parse_config(argv) -> RunConfig:
    args = _build_parser().parse_args(argv)
    manifest_path = getattr(args, "from_manifest", None)
    if manifest_path:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        cfg = RunConfig(**manifest["config"])
        if cfg.lambdas is not None:
            cfg.lambdas = tuple(cfg.lambdas)
        if cfg.subcommand != args.subcommand:
            raise UsageError(
                f"manifest is for subcommand {cfg.subcommand!r}, not {args.subcommand!r}"
            )
        return cfg
    fields = {f: getattr(args, f) for f in RunConfig.__dataclass_fields__ if hasattr(args, f)}
    if isinstance(fields.get("lambdas"), str):
        fields["lambdas"] = tuple(float(x) for x in fields["lambdas"].split(","))
    cfg = RunConfig(**fields)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.subcommand in ("select", "simulate", "experiment") and cfg.seed is None:
        raise UsageError(f"--seed is required for {cfg.subcommand}")
    if cfg.subcommand == "select":
        if not cfg.input:
            raise UsageError("select needs --input")
        if not 1 <= cfg.kmin <= cfg.kmax:
            raise UsageError("need 1 <= kmin <= kmax")
        if cfg.lam < 0:
            raise UsageError("lambda must be nonnegative")
    elif cfg.subcommand == "simulate":
        if not cfg.design:
            raise UsageError("simulate needs --design")
        if cfg.design in ("sim2", "sim3", "sim5") and cfg.k is None:
            raise UsageError(f"{cfg.design} needs --k")
        if cfg.design in ("sim3", "sim5") and cfg.r is None:
            raise UsageError(f"{cfg.design} needs --r")
        if cfg.design == "sim4" and cfg.rho is None:
            raise UsageError("sim4 needs --rho")
    elif cfg.subcommand == "experiment":
        if not cfg.design:
            raise UsageError("experiment needs --design")
        if cfg.design in ("sim3", "sim5") and cfg.r is None:
            raise UsageError(f"{cfg.design} needs --r")
        if cfg.reps < 1:
            raise UsageError("reps must be positive")
        if not 1 <= cfg.kmin <= cfg.kmax:
            raise UsageError("need 1 <= kmin <= kmax")
    elif cfg.subcommand == "preprocess":
        if not cfg.input:
            raise UsageError("preprocess needs --input")
        if cfg.format == "weighted" and cfg.threshold is None:
            raise UsageError("a weighted matrix needs --threshold to become a graph")
        if cfg.threshold is not None and not 0 < cfg.threshold < 1:
            raise UsageError("threshold must lie strictly between 0 and 1")


def _write_manifest(cfg: RunConfig, output_columns: dict | None = None) -> None:
    manifest = {
        "artifact": "blockselect",
        "version": __version__,
        "subcommand": cfg.subcommand,
        "config": asdict(cfg),
    }
    if output_columns:
        manifest["output_columns"] = output_columns
    path = os.path.join(cfg.out_dir, "manifest.json")
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_select(cfg: RunConfig) -> int:
    g = load_graph(cfg.input, cfg.format, mode=cfg.mode)
    if cfg.kmax > g.n:
        raise UsageError(f"kmax {cfg.kmax} exceeds node count {g.n}")
    report = select_k(
        g,
        (cfg.kmin, cfg.kmax),
        Penalty(cfg.penalty, cfg.lam),
        model=cfg.model,
        method=cfg.resolved_method(),
        refine=cfg.refine,
        seed=cfg.seed,
        score_binarize=not cfg.score_raw_counts,
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    report.write_json(os.path.join(cfg.out_dir, "report.json"))
    report.write_csv(os.path.join(cfg.out_dir, "per_k.csv"))
    _write_manifest(cfg)
    print(f"k_hat = {report.k_hat}")
    print("k,criterion")
    for rec in report.per_k:
        value = "" if rec.criterion_value is None else f"{rec.criterion_value:.6f}"
        print(f"{rec.k},{value}")
    if report.ties:
        print(f"ties: {report.ties}")
    return EXIT_OK


def _design_for(cfg: RunConfig):
    if cfg.design == "sim1":
        return sim1_design()
    if cfg.design == "sim2":
        return homogeneous_design(cfg.k, 5.0)
    if cfg.design in ("sim3", "sim5"):
        return homogeneous_design(cfg.k, cfg.r)
    if cfg.design == "sim4":
        return nonhomogeneous_design(cfg.rho)
    raise UsageError(f"cannot simulate design {cfg.design!r}")


def cmd_simulate(cfg: RunConfig) -> int:
    design = _design_for(cfg)
    rng = np.random.default_rng(cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    if cfg.design == "sim5":
        g, z, weights = sample_dcsbm(design, OmegaMixture(), rng)
        atomic_write_text(
            os.path.join(cfg.out_dir, "node_weights.txt"),
            "".join(f"{float(w)!r}\n" for w in weights),
        )
    else:
        g, z = sample_sbm(design, rng)
    save_edgelist(g, os.path.join(cfg.out_dir, "edges.txt"))
    save_labels(z, os.path.join(cfg.out_dir, "labels.txt"))
    _write_manifest(cfg)
    print(f"wrote edges.txt and labels.txt for {cfg.design} (n={g.n}) in {cfg.out_dir}")
    return EXIT_OK


def cmd_experiment(cfg: RunConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    if cfg.design == "mu-curve":
        curve = run_mu_curve(q=0.03, c3=0.2, n=500, x1=0.5, p_grid=MU_CURVE_GRID)
        write_mu_curve_csv(curve, os.path.join(cfg.out_dir, "mu_curve.csv"))
        columns = {"mu_curve.csv": OUTPUT_COLUMNS["mu_curve"]}
        print(f"wrote mu_curve.csv ({len(curve)} grid points)")
    elif cfg.design == "sim1":
        samples = run_sim1_distributions(
            n=500, k=3, theta=sim1_design().theta, reps=cfg.reps, seed=cfg.seed
        )
        write_distribution_csv(samples, os.path.join(cfg.out_dir, "sim1_distributions.csv"))
        if cfg.histogram:
            for name in ("underfit", "wilks", "overfit"):
                write_histogram_csv(
                    samples[name], os.path.join(cfg.out_dir, f"sim1_{name}_hist.csv")
                )
        theory = {name: s.theory for name, s in samples.items()}
        atomic_write_text(
            os.path.join(cfg.out_dir, "sim1_theory.json"),
            json.dumps(theory, indent=2, sort_keys=True) + "\n",
        )
        columns = {"sim1_distributions.csv": OUTPUT_COLUMNS["distributions"]}
        if cfg.histogram:
            columns["sim1_*_hist.csv"] = OUTPUT_COLUMNS["histogram"]
        print(f"wrote sim1_distributions.csv ({cfg.reps} replications)")
    elif cfg.design == "lambda-sweep":
        grid = cfg.lambdas if cfg.lambdas else DEFAULT_LAMBDA_GRID
        rows = run_lambda_sweep(
            grid,
            reps=cfg.reps,
            seed=cfg.seed,
            k_values=(cfg.k,) if cfg.k else (3,),
            refine=cfg.refine,
            k_range=(cfg.kmin, cfg.kmax),
        )
        write_table_csv(rows, os.path.join(cfg.out_dir, "lambda_sweep.csv"))
        columns = {"lambda_sweep.csv": OUTPUT_COLUMNS["table"]}
        print(f"wrote lambda_sweep.csv ({len(rows)} cells)")
    else:
        model = cfg.model or ("dcsbm" if cfg.design == "sim5" else "sbm")
        method = cfg.method or ("score" if model == "dcsbm" else "spectral")
        estimators = [
            EstimatorSpec(f"cbic(lambda={cfg.lam})", Penalty("cbic", cfg.lam),
                          model, method, cfg.refine, not cfg.score_raw_counts),
            EstimatorSpec("bic", Penalty("bic", 0.0), model, method, cfg.refine,
                          not cfg.score_raw_counts),
        ]
        rows = (cfg.k,) if cfg.k else None
        if cfg.design == "sim4" and cfg.rho is not None:
            rows = (cfg.rho,)
        summaries = run_success_table(
            cfg.design,
            estimators,
            reps=cfg.reps,
            seed=cfg.seed,
            rows=rows,
            r=cfg.r,
            k_range=(cfg.kmin, cfg.kmax),
        )
        write_table_csv(summaries, os.path.join(cfg.out_dir, f"{cfg.design}_table.csv"))
        columns = {f"{cfg.design}_table.csv": OUTPUT_COLUMNS["table"]}
        for s in summaries:
            print(
                f"{s.row_label} {s.estimator}: success={s.success_prob:.3f} "
                f"mean={s.mean_k:.3f} var={s.var_k:.3f} reps={s.reps}"
            )
    _write_manifest(cfg, columns)
    return EXIT_OK


def cmd_preprocess(cfg: RunConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    loaded = load_graph(cfg.input, cfg.format, mode=cfg.mode)
    if cfg.format == "weighted":
        w = symmetrize_sum(loaded) if cfg.symmetrize else np.asarray(loaded, dtype=np.float64)
        g = threshold_quantile(w, cfg.threshold)
    else:
        if cfg.threshold is not None:
            raise UsageError("--threshold applies only to weighted input")
        g = loaded
    if cfg.largest_component:
        g, mapping = largest_connected_component(g)
        write_csv(
            os.path.join(cfg.out_dir, "index_map.csv"),
            ["old", "new"],
            [[old + 1, new + 1] for old, new in sorted(mapping.items())],
        )
    save_edgelist(g, os.path.join(cfg.out_dir, "edges.txt"))
    _write_manifest(cfg)
    print(f"wrote edges.txt (n={g.n}, edges={int(np.triu(g.entries, 1).sum())})")
    return EXIT_OK


_COMMANDS = {
    "select": cmd_select,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "preprocess": cmd_preprocess,
}

_NUMERICAL_ERRORS = (
    EigenConvergenceError,
    DegenerateParameterError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def run_config(cfg: RunConfig) -> int:
    return _COMMANDS[cfg.subcommand](cfg)


def run_from_manifest(path: str) -> int:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg = RunConfig(**manifest["config"])
    if cfg.lambdas is not None:
        cfg.lambdas = tuple(cfg.lambdas)
    return run_config(cfg)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    try:
        return run_config(cfg)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        _emit_error("numerical", str(exc))
        return EXIT_NUMERICAL
    except RuntimeError as exc:
        _emit_error("numerical", str(exc))
        return EXIT_NUMERICAL
    except (GraphFormatError, FileNotFoundError, ValueError, KeyError) as exc:
        _emit_error("validation", str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
