"""
Command-line front end: fit on a task directory, simulate data, or run the benchmark.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from app import __version__
from app.core.exceptions import MTLRRCError
from app.core.logging import setup_logging
from app.models.data import DataSplits, MultiTaskData, Standardization
from app.models.enums import GLMFamily, Method, OutlierCase, PenaltyFamily, RunMode, SolverKind
from app.models.params import TaskCoef
from app.models.run import RunConfig
from app.services import evaluate, glm
from app.services.bench import bench, replicate_seeds
from app.services.simulate import dump_dataset, generate, prepare_splits
from app.services.taskgraph import graph_to_frame
from app.services.tuning import GridSearchResult, grid_search
from app.utils import io

logger = logging.getLogger("mtlrrc.cli")

SIM_FLAGS = {
    "tasks": "n_tasks",
    "features": "n_features",
    "clusters": "n_clusters",
    "samples": "n_samples",
    "sigma2": "sigma2",
    "case": "case",
    "sigma_o2": "sigma_o2",
}


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtlrrc",
        description="Multi-task learning via robust regularized clustering",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--mode", choices=[m.value for m in RunMode], help="Run mode (default: fit)")
    parser.add_argument("--config", type=Path, help="JSON config file; its values override flags")
    parser.add_argument("--data-dir", type=Path, help="Directory with one CSV per task (fit mode)")
    parser.add_argument("--family", choices=[f.value for f in GLMFamily], help="GLM family of the tasks")
    parser.add_argument("--penalty", choices=[f.code for f in PenaltyFamily], help="Outlier penalty")
    parser.add_argument("--lambda1", type=_float_list, help="Comma-separated lambda1 grid")
    parser.add_argument("--lambda2", type=_float_list, help="Comma-separated lambda2 grid")
    parser.add_argument("--lambda3", type=_float_list, help="Comma-separated lambda3 grid ('inf' allowed)")
    parser.add_argument("--gamma", type=float, help="Shape parameter of group SCAD / MCP")
    parser.add_argument("--k", type=int, help="Neighbours per task in the task graph")
    parser.add_argument("--nu", type=float, help="ADMM parameter nu")
    parser.add_argument("--solver", choices=[s.value for s in SolverKind], help="Estimation algorithm")
    parser.add_argument("--stl-penalty", type=float, help="Ridge penalty of the single-task learner")
    parser.add_argument("--split", type=_float_list, help="Train,validation,test fractions or per-task counts")
    parser.add_argument("--seed", type=int, help="Random seed")
    parser.add_argument("--replicates", type=int, help="Number of replicates / random splits")
    parser.add_argument("--workers", type=int, help="Worker threads (0 = one per core, capped at 8)")
    parser.add_argument("--methods", help="Comma-separated benchmark methods, e.g. MTLRRC-GS,MTLCVX")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--log-level", help="Logging level (DEBUG, INFO, WARNING, ...)")
    parser.add_argument("--solver-log-level", help="Level of the per-fit and per-sweep solver logs")

    sim = parser.add_argument_group("simulation")
    sim.add_argument("--tasks", type=int, help="Number of tasks T")
    sim.add_argument("--features", type=int, help="Number of features p")
    sim.add_argument("--clusters", type=int, help="Number of clusters C")
    sim.add_argument("--samples", type=int, help="Samples per task")
    sim.add_argument("--sigma2", type=float, help="Noise variance")
    sim.add_argument("--kappa", type=_float_list, help="Outlier probability (comma list for bench)")
    sim.add_argument("--case", choices=[c.value for c in OutlierCase], help="Outlier regime")
    sim.add_argument("--sigma-o2", type=float, help="Variance of the truncated-normal outlier draws")
    return parser


def _flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Explicitly given flags as a RunConfig-shaped dict."""
    given = {k: v for k, v in vars(args).items() if v is not None}
    data: dict[str, Any] = {}
    direct = {
        "mode": "mode",
        "data_dir": "data_dir",
        "family": "family",
        "gamma": "gamma",
        "k": "k",
        "nu": "nu",
        "solver": "solver",
        "stl_penalty": "stl_penalty",
        "seed": "seed",
        "replicates": "replicates",
        "workers": "workers",
        "out": "output_dir",
        "lambda1": "lambda1_grid",
        "lambda2": "lambda2_grid",
        "lambda3": "lambda3_grid",
        "split": "split",
    }
    for flag, key in direct.items():
        if flag in given:
            data[key] = given[flag]
    if "penalty" in given:
        data["penalty"] = PenaltyFamily.from_code(given["penalty"])
    if "methods" in given:
        data["methods"] = [Method(m.strip()) for m in given["methods"].split(",") if m.strip()]

    sim = {key: given[flag] for flag, key in SIM_FLAGS.items() if flag in given}
    if "kappa" in given:
        kappas = given["kappa"]
        sim["kappa"] = kappas[0]
        if len(kappas) > 1:
            data["kappas"] = kappas
    if "seed" in given:
        sim["seed"] = given["seed"]
    if sim:
        data["sim"] = sim
    return data


def load_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags with the JSON config file (file wins) and validate."""
    data = _flag_overrides(args)
    if args.config is not None:
        file_data = io.read_json(args.config)
        if not isinstance(file_data, dict):
            raise MTLRRCError(f"config file {args.config} must hold a JSON object")
        if "penalty" in file_data and isinstance(file_data["penalty"], str):
            file_data["penalty"] = PenaltyFamily.from_code(file_data["penalty"])
        sim = {**data.get("sim", {}), **file_data.pop("sim", {})}
        data.update(file_data)
        if sim:
            data["sim"] = sim
    return RunConfig.model_validate(data)


def run_directory(cfg: RunConfig) -> Path:
    """Slugified run directory under the output directory."""
    if cfg.mode == RunMode.FIT:
        name = f"fit-{cfg.data_dir.name}-{cfg.penalty.code}-seed-{cfg.seed}"
    elif cfg.mode == RunMode.SIMULATE:
        name = f"sim-{cfg.sim.case.value}-kappa-{cfg.sim.kappa}-seed-{cfg.sim.seed}"
    else:
        name = f"bench-{cfg.sim.case.value}-seed-{cfg.seed}"
    return io.ensure_dir(Path(cfg.output_dir) / io.slug(name))


def holdout_metrics(splits: DataSplits, result: GridSearchResult) -> dict[str, Any]:
    """Test-split NMSE (Gaussian) or pooled AUC (Bernoulli)."""
    test = splits.test
    if test is None:
        return {}
    params = result.fit.params
    if test.family == GLMFamily.GAUSSIAN:
        tasks = [(m, t) for m, t in enumerate(test) if t.n_samples > 0 and not evaluate.is_constant_response(t.y)]
        if not tasks:
            return {}
        idx = [m for m, _ in tasks]
        return {
            "test_nmse": evaluate.nmse([t.y for _, t in tasks], [t.X for _, t in tasks], params.W[idx]),
        }

    scores, labels = [], []
    for m, task in enumerate(test):
        scores.append(glm.predict(task, TaskCoef(intercept=params.w0[m], coef=params.W[m])))
        labels.append(task.y.astype(int))
    scores_all, labels_all = np.concatenate(scores), np.concatenate(labels)
    if np.unique(labels_all).size < 2:
        logger.warning("Test split holds a single class; AUC skipped")
        return {}
    return {"test_auc": evaluate.auc(scores_all, labels_all)}


def write_fit_outputs(out_dir: Path, result: GridSearchResult, stats: Standardization, metrics: dict[str, Any]) -> None:
    fit = result.fit
    params = fit.params
    io.write_json(fit.to_json_dict(), out_dir / "fit_result.json")
    io.write_matrix(params.W, out_dir / "W.csv")
    io.write_matrix(params.U, out_dir / "U.csv")
    io.write_matrix(params.O, out_dir / "O.csv")
    io.write_frame(result.table, out_dir / "grid.csv")
    io.write_frame(graph_to_frame(result.graph), out_dir / "graph_edges.csv")
    io.write_json(
        {
            "feature_mean": stats.feature_mean.tolist(),
            "feature_scale": stats.feature_scale.tolist(),
            "response_mean": stats.response_mean.tolist(),
            "W_original": stats.coef_to_original(params.W).tolist(),
            "w0_original": stats.intercept_to_original(params.w0, params.W).tolist(),
        },
        out_dir / "standardization.json",
    )
    io.write_json(metrics, out_dir / "metrics.json")


def run_fit(cfg: RunConfig, out_dir: Path) -> None:
    data: MultiTaskData = io.ingest(cfg.data_dir, cfg.family)
    if cfg.replicates == 1:
        splits, stats = prepare_splits(data, cfg.split, cfg.seed)
        result = grid_search(splits, cfg)
        write_fit_outputs(out_dir, result, stats, holdout_metrics(splits, result))
        return

    outliers, Ws, Us, metrics = [], [], [], []
    for r, seed in enumerate(replicate_seeds(cfg.seed, cfg.replicates)):
        splits, stats = prepare_splits(data, cfg.split, seed)
        result = grid_search(splits, cfg)
        params = result.fit.params
        outliers.append(params.O)
        Ws.append(params.W)
        Us.append(params.U)
        lambda1, lambda2, lambda3 = result.best.key()
        metrics.append(
            {
                "replicate": r,
                "seed": seed,
                "lambda1": lambda1,
                "lambda2": lambda2,
                "lambda3": lambda3,
                **holdout_metrics(splits, result),
            }
        )
        logger.info(f"Replicate {r}: selected lambda={result.best.key()}")

    frequency = evaluate.outlier_frequency(outliers)
    io.write_frame(
        io.frame_from_rows({"task": m, "outlier_frequency": f} for m, f in enumerate(frequency)),
        out_dir / "outlier_frequency.csv",
    )
    io.write_matrix(np.mean(Ws, axis=0), out_dir / "mean_W.csv")
    io.write_matrix(np.mean(Us, axis=0), out_dir / "mean_U.csv")
    io.write_matrix(np.mean(outliers, axis=0), out_dir / "mean_O.csv")
    io.write_json(metrics, out_dir / "metrics.json")


def run_simulate(cfg: RunConfig, out_dir: Path) -> None:
    data, truth = generate(cfg.sim)
    dump_dataset(data, truth, out_dir)
    io.write_json(cfg.sim.model_dump(mode="json"), out_dir / "config.json")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI.

    Returns:
        Exit code: 0 on success, 1 with a JSON error object on stderr otherwise
    """
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.log_level or args.solver_log_level:
            setup_logging(args.log_level, args.solver_log_level)
        out_dir = run_directory(cfg)
        logger.info(f"Running {cfg.mode.value} into {out_dir}")
        if cfg.mode == RunMode.FIT:
            run_fit(cfg, out_dir)
        elif cfg.mode == RunMode.SIMULATE:
            run_simulate(cfg, out_dir)
        else:
            bench(cfg, out_dir)
    except MTLRRCError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return 1
    except ValidationError as e:
        print(json.dumps({"error": "ValidationError", "message": str(e)}), file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1

    print(json.dumps({"output_dir": str(out_dir)}))
    return 0
