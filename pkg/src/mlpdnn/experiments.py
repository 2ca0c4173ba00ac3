"""Batch experiments: convergence tables, size scaling, level selection and
perturbation studies.  Every table row carries provenance so identical
configs reproduce byte-identical output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import beta as beta_fn

from .compiler import (
    DEFAULT_MAX_PARAMS,
    compiled_dims,
    predicted_depth,
    width_bound,
    width_constant,
)
from .exceptions import CapabilityError, ResourceError
from .problems import construction_kappa, make_problem, sin_approx_network
from .network import param_count
from .solver import (
    DEFAULT_MAX_EVALS,
    MlpConfig,
    mlp_estimate,
    reference_solution,
    uniform_points,
    weighted_l2_distance,
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "transport"
    d: int = 2
    T: float = 1.0
    t: float = 0.0
    eps: float = 0.1
    coupling: float = 1.0
    n: int = 2
    m: int = 2
    seed: int = 0
    samples: int = 256
    levels: tuple[int, ...] = (1, 2, 3, 4, 5)
    d_values: tuple[int, ...] = (1, 2, 4, 8)
    eps_values: tuple[float, ...] = (0.2, 0.1, 0.05)
    reference_level: Optional[int] = None
    max_evals: int = DEFAULT_MAX_EVALS
    max_params: int = DEFAULT_MAX_PARAMS
    workers: int = 1
    timing: bool = False

    def config_hash(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k not in ("workers", "timing")}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def make_problem(self, d: Optional[int] = None, eps: Optional[float] = None):
        return make_problem(self.problem, self.d if d is None else d, self.T,
                            self.eps if eps is None else eps, self.coupling)


def build_id() -> str:
    """``git describe`` of the source tree, or the package version outside git."""
    from . import __version__

    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _provenance(cfg: ExperimentConfig) -> dict:
    return {"schema": SCHEMA_VERSION, "config_hash": cfg.config_hash(), "seed": cfg.seed,
            "build": build_id()}


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- convergence -----------------------------------------------------------


def _reference_values(cfg: ExperimentConfig, problem, points):
    if problem.exact is not None:
        return reference_solution(problem, cfg.t, points)
    if cfg.reference_level is None:
        raise CapabilityError(
            f"problem {problem.name!r} has no closed form; set reference_level for an MLP oracle"
        )
    # oracle run on a disjoint node subtree
    oracle = MlpConfig(cfg.reference_level, cfg.reference_level, cfg.t, cfg.seed,
                       theta_root=(1,), max_evals=cfg.max_evals)
    return mlp_estimate(problem, oracle, points)


def _convergence_point(args) -> dict:
    cfg, level = args
    problem = cfg.make_problem()
    points = uniform_points(problem.d, cfg.samples, cfg.seed)
    ref = _reference_values(cfg, problem, points)
    start = time.perf_counter()
    if level == 0:
        est = np.zeros_like(ref)
    else:
        est = mlp_estimate(problem, MlpConfig(level, level, cfg.t, cfg.seed, max_evals=cfg.max_evals),
                           points)
    elapsed = (time.perf_counter() - start) * 1e3
    error, std_err = weighted_l2_distance(est, ref, problem.T - cfg.t)
    row = {"problem": cfg.problem, "d": problem.d, "n": level, "m": level, "seed": cfg.seed,
           "samples": cfg.samples, "error": error, "std_err": std_err}
    if cfg.timing:
        row["wall_time_ms"] = round(elapsed, 3)
    return row


def run_convergence(cfg: ExperimentConfig) -> list[dict]:
    """Weighted L2 error of ``U_{n,n}`` against the reference for each level."""
    problem = cfg.make_problem()
    if problem.exact is None and cfg.reference_level is None:
        raise CapabilityError(
            f"problem {problem.name!r} has no closed form; set reference_level for an MLP oracle"
        )
    for level in cfg.levels:
        if level:
            MlpConfig(level, level, cfg.t, cfg.seed, max_evals=cfg.max_evals).check_budget()
    rows = _map(_convergence_point, [(cfg, level) for level in cfg.levels], cfg.workers)
    prov = _provenance(cfg)
    return [{**row, **prov} for row in rows]


def decreasing_steps(errors: Sequence[float]) -> int:
    return sum(b < a for a, b in zip(errors, errors[1:]))


# --- scaling ---------------------------------------------------------------


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope)


def sine_param_envelope(d: int, eps: float, kappa: float) -> float:
    return 640.0 * kappa**2 * d**2 * eps ** (-6)


def _scaling_row(cfg: ExperimentConfig, d: int, eps: float, sweep: str, kappa: float) -> dict:
    problem = make_problem("sine", d, cfg.T, eps)
    df, dg = problem.phi_f.dims, problem.phi_g.dims
    dims = compiled_dims(cfg.n, cfg.m, d, df, dg)
    p_compiled = sum(dims[k] * (dims[k - 1] + 1) for k in range(1, len(dims)))
    if p_compiled > cfg.max_params:
        raise ResourceError(
            f"scaling sweep point d={d}, eps={eps}, n={cfg.n}, m={cfg.m}: compiled network has "
            f"{p_compiled} parameters, cap is {cfg.max_params}"
        )
    p_f, p_g = param_count(problem.phi_f), param_count(problem.phi_g)
    envelope = sine_param_envelope(d, eps, kappa)
    wb = width_bound(cfg.n, cfg.m, width_constant(d, df, dg))
    depth = predicted_depth(cfg.n, df, dg)
    return {
        "sweep": sweep, "d": d, "eps": eps, "n": cfg.n, "m": cfg.m,
        "param_f": p_f, "param_g": p_g, "param_compiled": p_compiled,
        "depth": len(dims), "depth_predicted": depth,
        "width": max(dims), "width_bound": wb,
        "envelope_f": envelope, "within_envelope": int(max(p_f, p_g) <= envelope),
        "compiled_envelope": 2 * depth * wb**2,
        "within_compiled_envelope": int(p_compiled <= 2 * depth * wb**2),
    }


def run_scaling(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    """Parameter counts of the sine networks against ``d`` and ``1/eps``.

    Returns the table and a summary with log-log slopes.
    """
    kappa = construction_kappa()
    rows = [_scaling_row(cfg, d, cfg.eps, "d", kappa) for d in cfg.d_values]
    rows += [_scaling_row(cfg, cfg.d, eps, "eps", kappa) for eps in cfg.eps_values]
    by_d = [r for r in rows if r["sweep"] == "d"]
    by_eps = [r for r in rows if r["sweep"] == "eps"]
    summary = {
        "kappa": kappa,
        "slope_param_f_vs_d": loglog_slope([r["d"] for r in by_d], [r["param_f"] for r in by_d]),
        "slope_compiled_vs_d": loglog_slope([r["d"] for r in by_d], [r["param_compiled"] for r in by_d]),
        "slope_param_f_vs_inv_eps": loglog_slope([1 / r["eps"] for r in by_eps], [r["param_f"] for r in by_eps]),
        "slope_compiled_vs_inv_eps": loglog_slope(
            [1 / r["eps"] for r in by_eps], [r["param_compiled"] for r in by_eps]
        ),
        "all_within_envelope": all(r["within_envelope"] for r in rows),
        **_provenance(cfg),
    }
    prov = _provenance(cfg)
    return [{**row, **prov} for row in rows], summary


# --- level selection -------------------------------------------------------


@dataclass(frozen=True)
class ErrorModel:
    """Calibrated ``log err(n) = log_k + log_a * n - (n / 2) log n + kappa log d``.

    ``c``, ``kappa`` and ``q`` also feed the inner-accuracy rule.
    """

    log_k: float
    log_a: float
    kappa: float = 0.0
    c: float = 2.0
    q: float = 1.5

    def predict(self, n: int, d: int) -> float:
        return math.exp(self.log_k + self.log_a * n - 0.5 * n * math.log(n) + self.kappa * math.log(d))


def calibrate(rows: Sequence[dict], c: float = 2.0, q: float = 1.5) -> ErrorModel:
    """Least-squares fit of the error model to convergence rows with ``n >= 1``."""
    pts = [(r["n"], r["d"], r["error"]) for r in rows if r["n"] >= 1 and r["error"] > 0]
    if len(pts) < 2:
        raise ValueError("calibration needs at least two convergence rows with n >= 1")
    n = np.array([p[0] for p in pts], float)
    d = np.array([p[1] for p in pts], float)
    y = np.log([p[2] for p in pts]) + 0.5 * n * np.log(n)
    cols = [np.ones_like(n), n]
    if len(set(d)) > 1:
        cols.append(np.log(d))
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)
    kappa = float(coef[2]) if len(coef) > 2 else 0.0
    return ErrorModel(log_k=float(coef[0]), log_a=float(coef[1]), kappa=kappa, c=c, q=q)


def inner_accuracy(epsilon: float, d: int, model: ErrorModel) -> float:
    """``eps / (10 c^2 d^(2c) B(1 - q/2, 1/2) kappa' d^kappa')`` with ``kappa' = max(1, kappa)``."""
    kap = max(1.0, model.kappa)
    denom = 10 * model.c**2 * d ** (2 * model.c) * beta_fn(1 - model.q / 2, 0.5) * kap * d**kap
    return float(epsilon / denom)


def proof_level(d: int, epsilon: float, c: float, kappa: float, T: float, n_cap: int = 50) -> Optional[int]:
    """The infimum rule evaluated with the proof's error majorant (diagnostic only)."""
    for n in range(2, n_cap + 1):
        log_bound = n**3 / 6 - 0.5 * n * math.log(n) + n * math.log(8) + n * c**2 * T + math.log(kappa) + kappa * math.log(d)
        if log_bound <= math.log(epsilon / 2):
            return n
    return None


def choose_level(d: int, epsilon: float, model: ErrorModel, n_cap: int = 8) -> dict:
    """Smallest ``n >= 2`` whose calibrated error is at most ``eps / 2``."""
    for n in range(2, n_cap + 1):
        predicted = model.predict(n, d)
        if predicted <= epsilon / 2:
            return {"n": n, "m": n, "predicted_error": predicted,
                    "eps_inner": inner_accuracy(epsilon, d, model),
                    "proof_level": proof_level(d, epsilon, model.c, max(1.0, model.kappa), 1.0)}
    raise ResourceError(f"no level n <= {n_cap} reaches error {epsilon / 2} for d={d}")


# --- perturbation ----------------------------------------------------------


def gamma_sup_error(eps: float, radius: float = 4.0, n_grid: int = 20001) -> float:
    """``sup |sin - gamma_eps|`` on ``[-radius, radius]``."""
    gamma = sin_approx_network(eps)
    x = np.linspace(-radius, radius, n_grid)
    return float(np.max(np.abs(np.sin(x) - gamma(x))))


def _sine_solution(cfg: ExperimentConfig, eps: float, points) -> np.ndarray:
    problem = make_problem("sine", cfg.d, cfg.T, eps)
    return mlp_estimate(problem, MlpConfig(cfg.n, cfg.m, cfg.t, cfg.seed, max_evals=cfg.max_evals), points)


def run_perturbation(cfg: ExperimentConfig) -> list[dict]:
    """Distance between shared-seed MLP solutions at accuracies ``eps`` and ``eps/2``.

    One control row per ``eps`` compares the solution with a fresh
    recomputation from the same seed.
    """
    points = uniform_points(cfg.d, cfg.samples, cfg.seed)
    horizon = cfg.T - cfg.t
    cache: dict[float, np.ndarray] = {}

    def solution(eps):
        if eps not in cache:
            cache[eps] = _sine_solution(cfg, eps, points)
        return cache[eps]

    rows = []
    for eps in cfg.eps_values:
        dev, se = weighted_l2_distance(solution(eps), solution(eps / 2), horizon)
        gap = gamma_sup_error(eps) + gamma_sup_error(eps / 2)
        rows.append({"eps1": eps, "eps2": eps / 2, "deviation": dev, "std_err": se,
                     "gamma_error_sum": gap, "constant": dev / gap})
        # independent recomputation with the shared seed
        ctrl, _ = weighted_l2_distance(solution(eps), _sine_solution(cfg, eps, points), horizon)
        rows.append({"eps1": eps, "eps2": eps, "deviation": ctrl, "std_err": 0.0,
                     "gamma_error_sum": 2 * gamma_sup_error(eps), "constant": 0.0})
    pairs = [r for r in rows if r["eps1"] != r["eps2"]]
    for row in rows:
        row["ratio"] = ""
    for a, b in zip(pairs, pairs[1:]):
        a["ratio"] = a["deviation"] / b["deviation"] if b["deviation"] > 0 else math.inf
    prov = _provenance(cfg)
    return [{"d": cfg.d, "n": cfg.n, "m": cfg.m, **row, **prov} for row in rows]


# --- output ----------------------------------------------------------------


def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    fields: list[str] = []
    for row in rows:
        fields += [k for k in row if k not in fields]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(v) for k, v in row.items()})
    return buf.getvalue()


def _cell(value):
    # repr of a Python float round-trips; numpy scalars would print their type
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_text(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        print(text, end="" if text.endswith("\n") else "\n")
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
