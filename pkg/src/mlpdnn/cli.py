"""Command-line driver.

Exit codes: 0 success, 2 validation error, 3 resource cap exceeded,
4 failed check in ``verify``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import experiments as ex
from .compiler import DEFAULT_MAX_PARAMS, compile_mlp, verify_equivalence
from .exceptions import CapabilityError, ParseError, ResourceError, ShapeError
from .network import encode
from .problems import PROBLEM_NAMES, check_theorem_conditions, make_problem, smallest_passing_c
from .randomness import RandomRealization
from .solver import (
    DEFAULT_MAX_EVALS,
    MlpConfig,
    mlp_estimate,
    reference_solution,
    uniform_points,
    weighted_l2_distance,
)

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE, EXIT_CHECK = 0, 2, 3, 4


class ValidationError(Exception):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _flag(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--problem", choices=PROBLEM_NAMES, default="transport")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--coupling", type=float, default=1.0)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--out", default=None)
    p.add_argument("--max-params", type=int, default=DEFAULT_MAX_PARAMS)
    p.add_argument("--max-evals", type=int, default=DEFAULT_MAX_EVALS)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", type=_flag, nargs="?", const=True, default=False)
    p.add_argument("--config", default=None, help="key = value file overriding flags")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="mlpdnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="single MLP estimate")
    p.add_argument("--x", type=_float_list, default=None, help="comma-separated point")

    sub.add_parser("compile", parents=[common], help="emit the compiled network as JSON")
    p = sub.add_parser("verify", parents=[common], help="compile and check against the estimator")
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("convergence", parents=[common], help="error table over n = m")
    p.add_argument("--levels", type=_int_list, default=(1, 2, 3, 4, 5))
    p.add_argument("--reference-level", type=int, default=None)

    p = sub.add_parser("scaling", parents=[common], help="parameter counts vs d and 1/eps")
    p.add_argument("--d-values", type=_int_list, default=(1, 2, 4, 8))
    p.add_argument("--eps-values", type=_float_list, default=(0.2, 0.1, 0.05))

    p = sub.add_parser("perturb", parents=[common], help="deviation between inner accuracies")
    p.add_argument("--eps-values", type=_float_list, default=(0.2, 0.1))

    p = sub.add_parser("check-conditions", parents=[common], help="audit the growth/Lipschitz conditions")
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--q", type=float, default=1.5)
    p.add_argument("--beta", type=float, default=2.0)

    p = sub.add_parser("choose-level", parents=[common], help="calibrated level selection")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--levels", type=_int_list, default=(1, 2, 3, 4))
    p.add_argument("--n-cap", type=int, default=8)

    p = sub.add_parser("plot", parents=[common], help="SVG line chart of a table")
    p.add_argument("--input", required=True)
    p.add_argument("--x-col", default=None)
    p.add_argument("--y-col", default=None)
    return parser


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if not args.config:
        return
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
    path = Path(args.config)
    if not path.is_file():
        raise ValidationError(f"config file {path} not found")
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        if sep not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split(sep, 1))
        dest = key.lstrip("-").replace("-", "_")
        if dest not in actions or dest in ("config", "help"):
            raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
        action = actions[dest]
        try:
            converted = action.type(value) if action.type else value
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
        if action.choices is not None and converted not in action.choices:
            raise ValidationError(f"{path}:{lineno}: {key!r} must be one of {list(action.choices)}")
        setattr(args, dest, converted)


def _experiment_config(args) -> ex.ExperimentConfig:
    fields = {k: getattr(args, k) for k in (
        "problem", "d", "T", "t", "eps", "coupling", "n", "m", "seed", "samples",
        "max_evals", "max_params", "workers", "timing") if hasattr(args, k)}
    for k in ("levels", "d_values", "eps_values", "reference_level"):
        if hasattr(args, k):
            fields[k] = getattr(args, k)
    return ex.ExperimentConfig(**fields)


def _problem(args):
    return make_problem(args.problem, args.d, args.T, args.eps, args.coupling)


def _mlp_config(args) -> MlpConfig:
    return MlpConfig(args.n, args.m, args.t, args.seed, max_evals=args.max_evals)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def cmd_solve(args) -> int:
    problem = _problem(args)
    cfg = _mlp_config(args)
    x = np.zeros(problem.d) if args.x is None else np.asarray(args.x)
    if x.shape != (problem.d,):
        raise ValidationError(f"--x needs {problem.d} coordinates, got {len(x)}")
    start = time.perf_counter()
    estimate = mlp_estimate(problem, cfg, x)
    record = {"problem": args.problem, "n": cfg.n, "m": cfg.m, "d": problem.d, "seed": cfg.seed,
              "t": cfg.t, "x": x.tolist(), "estimate": estimate.tolist()}
    if problem.exact is not None:
        record["reference"] = reference_solution(problem, cfg.t, x).tolist()
        points = uniform_points(problem.d, args.samples, cfg.seed)
        err, se = weighted_l2_distance(mlp_estimate(problem, cfg, points),
                                       reference_solution(problem, cfg.t, points), problem.T - cfg.t)
        record.update(error=err, std_err=se)
    if args.timing:
        record["wall_time_ms"] = round((time.perf_counter() - start) * 1e3, 3)
    ex.write_text(_json(record), args.out)
    return EXIT_OK


def cmd_compile(args) -> int:
    problem = _problem(args)
    net = compile_mlp(problem, _mlp_config(args), max_params=args.max_params)
    ex.write_text(encode(net).decode(), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    problem = _problem(args)
    cfg = _mlp_config(args)
    real = RandomRealization(cfg.seed, problem.d)
    net = compile_mlp(problem, cfg, real, max_params=args.max_params)
    grid = uniform_points(problem.d, args.samples, cfg.seed)
    report = verify_equivalence(net, problem, cfg, real, grid, tolerance=args.tol)
    ex.write_text(report.to_json(), args.out)
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_convergence(args) -> int:
    rows = ex.run_convergence(_experiment_config(args))
    ex.write_text(ex.rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_scaling(args) -> int:
    if args.problem != "sine":
        raise ValidationError("scaling needs --problem sine")
    rows, summary = ex.run_scaling(_experiment_config(args))
    slopes = [{"sweep": f"slope:{k}", "value": v} for k, v in summary.items() if k.startswith("slope")]
    slopes.append({"sweep": "kappa", "value": summary["kappa"]})
    ex.write_text(ex.rows_to_csv(rows + slopes), args.out)
    return EXIT_OK


def cmd_perturb(args) -> int:
    if args.problem != "sine":
        raise ValidationError("perturb needs --problem sine")
    ex.write_text(ex.rows_to_csv(ex.run_perturbation(_experiment_config(args))), args.out)
    return EXIT_OK


def cmd_check_conditions(args) -> int:
    problem = _problem(args)
    report = check_theorem_conditions(problem, args.c, args.q, args.beta, seed=args.seed)
    report = {k: v for k, v in report.items()}
    report.update(problem=args.problem, d=problem.d, c=args.c, q=args.q, beta=args.beta,
                  smallest_passing_c=smallest_passing_c(problem, args.q, args.beta, seed=args.seed))
    ex.write_text(_json(report), args.out)
    return EXIT_OK


def cmd_choose_level(args) -> int:
    cfg = _experiment_config(args)
    rows = ex.run_convergence(cfg)
    model = ex.calibrate(rows)
    choice = ex.choose_level(args.d, args.target, model, n_cap=args.n_cap)
    choice.update(target=args.target, d=args.d, model={
        "log_k": model.log_k, "log_a": model.log_a, "kappa": model.kappa, "c": model.c, "q": model.q})
    ex.write_text(_json(choice), args.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    import csv

    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "mlpdnn"
    with open(args.input, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{args.input} has no rows")
    if args.x_col and args.y_col:
        x_col, y_col = args.x_col, args.y_col
    elif "error" in rows[0]:
        x_col, y_col = "n", "error"
    elif "param_compiled" in rows[0]:
        rows = [r for r in rows if r["sweep"] == "d"]
        x_col, y_col = "d", "param_compiled"
    else:
        raise ValidationError("cannot infer plot columns; pass --x-col and --y-col")
    xs = [float(r[x_col]) for r in rows]
    ys = [float(r[y_col]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel(x_col)
    ax.set_ylabel(y_col)
    if y_col != "error":
        ax.set_xscale("log")
    ax.set_yscale("log")
    fig.tight_layout()
    out = args.out or Path(args.input).with_suffix(".svg")
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "compile": cmd_compile,
    "verify": cmd_verify,
    "convergence": cmd_convergence,
    "scaling": cmd_scaling,
    "perturb": cmd_perturb,
    "check-conditions": cmd_check_conditions,
    "choose-level": cmd_choose_level,
    "plot": cmd_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(parser, args)
        return COMMANDS[args.command](args)
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValidationError, ValueError, ShapeError, ParseError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
