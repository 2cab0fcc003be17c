"""Command-line entry point: ``mfalloc {generate,select,sweep,verify,oracle}``.

Indices are 1-based on the command line and in every printed report. Exit codes:
0 success, 1 verify conditions failed, 2 input or data error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

from pydantic import ValidationError

from .bifidelity import Ensemble, sweep
from .config import RunConfig, load_run_config, parse_index_list
from .ensemble_io import load_ensemble, save_ensemble
from .linalg import rank_k_error
from .models import (
    DEFAULT_GRIDS,
    Fidelity,
    GridAxis,
    ModelName,
    ParameterGrid,
    SolverFailure,
    build_ensemble,
    synthetic_recovery_instance,
)
from .selectors import SelectorConfig, parse_method, select
from .theory import brute_force_cssp, diagnose

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONDITION_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_SOLVER_FAILURE = 3


def _emit(text: str, out: Optional[str]):
    if out:
        directory = os.path.dirname(os.path.abspath(out))
        os.makedirs(directory, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as file:
            file.write(text)
    else:
        sys.stdout.write(text)


def _to_json(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _key_value_csv(pairs) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row in pairs:
        writer.writerow(row)
    return buffer.getvalue()


def _run_config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(args.config) if args.config else RunConfig()


def _grid_for(model: ModelName, config: RunConfig, counts: Optional[Sequence[int]]) -> ParameterGrid:
    grid = config.grid or DEFAULT_GRIDS[model]()
    if counts is None:
        return grid
    if len(counts) != len(grid.axes):
        raise ValueError(f"--counts takes {len(grid.axes)} values for {model.value}, got {len(counts)}")
    axes = tuple(GridAxis(**{**axis.model_dump(), "count": count}) for axis, count in zip(grid.axes, counts))
    return ParameterGrid(axes=axes)


def cmd_generate(args: argparse.Namespace) -> int:
    config = _run_config(args)
    out_dir = args.out or "."

    if args.model == "synthetic":
        instance = synthetic_recovery_instance(
            args.d, args.basis_size, args.n, args.coeff_bound, args.sigma, args.seed
        )
        ensemble = Ensemble(
            snapshots=instance.matrix,
            parameters=[[float(j)] for j in range(args.n)],
            fidelity_label="synthetic",
            model_id="synthetic",
        )
        path = os.path.join(out_dir, "synthetic.mfa")
        save_ensemble(
            path,
            ensemble,
            grid={"d": args.d, "basis_size": args.basis_size, "n": args.n,
                  "coeff_bound": args.coeff_bound, "sigma": args.sigma},
            seed=args.seed,
            planted_basis=[i + 1 for i in instance.basis],
        )
        _emit(_to_json({"files": [path], "planted_basis": [i + 1 for i in instance.basis]}), None)
        return EXIT_OK

    model = ModelName(args.model or (config.model.value if config.model else "burgers"))
    grid = _grid_for(model, config, args.counts)
    workers = args.workers or config.workers
    written = []
    for fidelity in (Fidelity.LOW, Fidelity.HIGH):
        ensemble = build_ensemble(model, grid, fidelity, workers=workers)
        path = os.path.join(out_dir, f"{model.value}_{fidelity.value}.mfa")
        save_ensemble(path, ensemble, grid=grid.model_dump(), seed=args.seed)
        written.append(path)
    _emit(_to_json({"files": written, "columns": grid.size}), None)
    return EXIT_OK


def cmd_select(args: argparse.Namespace) -> int:
    low = load_ensemble(args.low_file).ensemble
    config = SelectorConfig(
        method=parse_method(args.method),
        target_size=args.size,
        gomp_lambda=args.gomp_lambda,
        gomp_epsilon=args.epsilon,
        leverage_rank=args.leverage_rank,
        rng_seed=args.seed,
        normalize_columns=args.normalize,
    )
    result = select(config, ensemble=low.snapshots)
    payload = result.to_dict(one_based=True)
    if args.format == "csv":
        rows = [("step", "index", "score")]
        rows += [(step, index, repr(score)) for step, (index, score) in enumerate(zip(payload["indices"], payload["scores"]), 1)]
        rows.append(("termination", payload["termination"], ""))
        text = _key_value_csv(rows)
    else:
        text = _to_json(payload)
    _emit(text, args.out)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _run_config(args)
    low_path = args.low_file or config.low_path
    high_path = args.high_file or config.high_path
    if not low_path or not high_path:
        raise ValueError("sweep needs a low and a high ensemble file, as arguments or as low_path/high_path in --config")
    low = load_ensemble(low_path).ensemble
    high = load_ensemble(high_path).ensemble
    if not low.same_points(high):
        raise ValueError(f"{low_path} and {high_path} are not defined on the same parameter grid")

    if args.methods:
        methods = [SelectorConfig(method=parse_method(name)) for name in args.methods.split(",")]
    else:
        methods = config.methods
    if args.sizes:
        sizes = [int(token) for token in args.sizes.replace(",", " ").split()]
    elif "sizes" in config.model_fields_set:
        sizes = config.sizes
    else:
        sizes = [size for size in config.sizes if size <= low.n_points]

    report = sweep(
        low,
        high,
        methods,
        sizes,
        random_trials=args.trials or config.random_trials,
        seed=args.seed if args.seed is not None else config.seed,
        scoring=args.scoring or config.scoring,
        workers=args.workers or config.workers,
        include_rank_k=args.rank_k or config.include_rank_k,
    )
    if args.format == "json":
        text = _to_json([row.__dict__ for row in report.rows])
    else:
        text = report.to_csv()
    _emit(text, args.out or config.out)

    plot_path = args.plot_data or config.plot_data
    if plot_path:
        _emit(report.to_plot_table(), plot_path)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    loaded = load_ensemble(args.matrix_file)
    A = loaded.ensemble.snapshots
    if args.basis is not None:
        basis = parse_index_list(args.basis, A.shape[1])
    elif loaded.planted_basis:
        basis = [index - 1 for index in loaded.planted_basis]
    else:
        raise ValueError("no basis set given (--basis) and the file records no planted basis")

    diagnostics = diagnose(A, basis, sigma=args.sigma, eta=args.eta)
    if args.format == "csv":
        fields = diagnostics.model_dump()
        conditions = fields.pop("conditions_met")
        rows = [("field", "value")] + [(key, repr(value)) for key, value in fields.items()]
        rows += [(key, str(value).lower()) for key, value in conditions.items()]
        text = _key_value_csv(rows)
    else:
        text = diagnostics.to_json() + "\n"
    _emit(text, args.out)
    return EXIT_OK if diagnostics.all_met else EXIT_CONDITION_FAILED


def cmd_oracle(args: argparse.Namespace) -> int:
    A = load_ensemble(args.matrix_file).ensemble.snapshots
    result = brute_force_cssp(A, args.size, workers=args.workers)
    payload = {
        "indices": [index + 1 for index in result.indices],
        "residual": result.residual,
        "subsets_evaluated": result.evaluated,
        "rank_k_error": rank_k_error(A, args.size) if args.size <= min(A.shape) else None,
    }
    if args.format == "csv":
        text = _key_value_csv([(key, json.dumps(value)) for key, value in payload.items()])
    else:
        text = _to_json(payload)
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    common.add_argument("--out", default=None, help="output path (directory for generate)")
    common.add_argument("--format", choices=["json", "csv"], default=None)

    parser = argparse.ArgumentParser(prog="mfalloc", description="Multifidelity simulation allocation toolkit")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="Build low/high-fidelity ensemble files")
    gen.add_argument("--model", choices=[m.value for m in ModelName] + ["synthetic"], default=None)
    gen.add_argument("--config", default=None, help="JSON run configuration")
    gen.add_argument("--counts", type=int, nargs="+", default=None, help="grid points per axis")
    gen.add_argument("--workers", type=int, default=None)
    gen.add_argument("--d", type=int, default=10, help="synthetic: rows")
    gen.add_argument("--basis-size", type=int, default=5, help="synthetic: planted basis size")
    gen.add_argument("--n", type=int, default=40, help="synthetic: columns")
    gen.add_argument("--coeff-bound", type=float, default=0.7, help="synthetic: l1 bound on expansions")
    gen.add_argument("--sigma", type=float, default=0.0, help="synthetic: noise level")
    gen.set_defaults(func=cmd_generate)

    sel = sub.add_parser("select", parents=[common], help="Run one subset selector")
    sel.add_argument("low_file")
    sel.add_argument("--method", required=True, help="gomp, chol, qr, lu, lev or rand")
    sel.add_argument("-m", "--size", type=int, required=True, help="subset size")
    sel.add_argument("--lambda", dest="gomp_lambda", type=float, default=None, help="gomp sparsity parameter")
    sel.add_argument("--epsilon", type=float, default=0.0, help="gomp stopping tolerance")
    sel.add_argument("--leverage-rank", type=int, default=None)
    sel.add_argument("--normalize", action="store_true", help="unit-normalize columns first")
    sel.set_defaults(func=cmd_select)

    swp = sub.add_parser("sweep", parents=[common], help="Error versus subset size for several selectors")
    swp.add_argument("low_file", nargs="?", default=None)
    swp.add_argument("high_file", nargs="?", default=None)
    swp.add_argument("--config", default=None, help="JSON run configuration")
    swp.add_argument("--methods", default=None, help="comma-separated selector names")
    swp.add_argument("--sizes", default=None, help="subset sizes, ascending")
    swp.add_argument("--trials", type=int, default=None, help="random-selection trials")
    swp.add_argument("--scoring", choices=["held_out", "all"], default=None)
    swp.add_argument("--workers", type=int, default=None)
    swp.add_argument("--rank-k", action="store_true", help="add best rank-k reference rows")
    swp.add_argument("--plot-data", default=None, help="also write a whitespace-separated plot table")
    swp.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", parents=[common], help="Check the GOMP recovery conditions for a basis set")
    ver.add_argument("matrix_file")
    ver.add_argument("--basis", default=None, help="1-based basis indices (default: planted basis in the file)")
    ver.add_argument("--sigma", type=float, default=0.0)
    ver.add_argument("--eta", type=float, default=0.1)
    ver.set_defaults(func=cmd_verify)

    orc = sub.add_parser("oracle", parents=[common], help="Exhaustive best column subset")
    orc.add_argument("matrix_file")
    orc.add_argument("-m", "--size", type=int, required=True)
    orc.add_argument("--workers", type=int, default=1)
    orc.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT_ERROR if exc.code else EXIT_OK

    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    if args.command != "sweep" and args.seed is None:
        args.seed = 0

    try:
        return args.func(args)
    except SolverFailure as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    except (ValueError, ValidationError, OSError) as exc:
        logger.debug("input error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
