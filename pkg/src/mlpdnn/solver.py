"""Full-history multilevel Picard estimator for value and gradient.

For a semilinear heat equation ``v_t + (1/2) lap v + f(v, grad v) = 0`` with
terminal condition ``v(T) = g`` the estimator ``U_{n,m}(t, x)`` approximates
``(v(t, x), grad v(t, x))``.  Terminal and level samples carry the weight
``(1, dW / dt)``, level times follow the arcsine law on ``(t, T)`` and level
sums telescope ``f(U_l) - f(U_{l-1})`` over independent child nodes.

Evaluation is vectorized over a batch of spatial points: randomness depends
only on the node index, never on ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import CapabilityError, ResourceError
from .randomness import RandomRealization, ThetaIndex

__all__ = [
    "MlpConfig",
    "LevelSample",
    "level_sample",
    "terminal_sample",
    "mlp_estimate",
    "scaling_vector",
    "reference_solution",
    "weighted_l2_distance",
    "weighted_l2_error",
    "f_eval_count",
    "node_count",
    "EvalCounter",
    "uniform_points",
]

DEFAULT_MAX_EVALS = 10**8
TIME_GUARD = 1e-12


@dataclass(frozen=True)
class MlpConfig:
    """Level ``n``, basis ``m``, start time ``t``, seed and root node index."""

    n: int
    m: int
    t: float = 0.0
    seed: int = 0
    theta_root: ThetaIndex = (0,)
    max_evals: int = DEFAULT_MAX_EVALS

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"level n must be >= 0, got {self.n}")
        if self.m < 1:
            raise ValueError(f"basis m must be >= 1, got {self.m}")
        if not self.theta_root:
            raise ValueError("theta_root must be nonempty")
        object.__setattr__(self, "theta_root", tuple(int(k) for k in self.theta_root))

    def check_budget(self) -> None:
        if self.m ** (2 * self.n) > self.max_evals:
            raise ResourceError(
                f"n={self.n}, m={self.m}: m^(2n) = {self.m ** (2 * self.n)} "
                f"exceeds the evaluation budget {self.max_evals}"
            )


def scaling_vector(d: int, t: float) -> np.ndarray:
    """``(1, sqrt(t), ..., sqrt(t))`` of length ``d + 1``."""
    lam = np.full(d + 1, math.sqrt(t))
    lam[0] = 1.0
    return lam


def _check_time(t: float, T: float) -> None:
    if not t <= T - TIME_GUARD * T:
        raise ValueError(f"start time t={t} must lie strictly below the horizon T={T}")


@dataclass(frozen=True)
class LevelSample:
    time: float
    increment: np.ndarray
    weight: np.ndarray  # (1, dW / (s - t))
    inv_rho: float  # 1 / rho(t, s)


def level_sample(real: RandomRealization, theta: ThetaIndex, t: float, T: float) -> LevelSample:
    """Sampled time, Brownian increment and weights of a level node.

    The gaps ``s - t`` and ``T - s`` are formed from the uniform directly, so
    ``1 / rho`` stays accurate when the fraction is extremely close to 0 or 1.
    """
    u, xi = real.draws(theta)
    half = 0.5 * math.pi * u
    tau = T - t
    gap = tau * math.sin(half) ** 2
    s = min(t + gap, T - TIME_GUARD * T)
    inv_rho = math.pi * tau * math.sin(half) * math.cos(half)
    dW = math.sqrt(gap) * xi
    weight = np.empty(len(xi) + 1)
    weight[0] = 1.0
    weight[1:] = dW / gap
    return LevelSample(s, dW, weight, inv_rho)


def terminal_sample(real: RandomRealization, theta: ThetaIndex, t: float, T: float):
    """Increment ``W_T - W_t`` of a terminal node and its weight ``dW / (T - t)``."""
    tau = T - t
    dW = math.sqrt(tau) * real.gaussian(theta)
    return dW, dW / tau


@dataclass
class EvalCounter:
    """Counts batched calls of ``f`` and ``g``."""

    f_calls: int = 0
    g_calls: int = 0


class _Recursion:
    def __init__(self, problem, m: int, real: RandomRealization, counter: Optional[EvalCounter]):
        self.f = problem.f
        self.g = problem.g
        self.T = float(problem.T)
        self.d = int(problem.d)
        self.m = m
        self.real = real
        self.counter = counter

    def _f(self, w: np.ndarray) -> np.ndarray:
        if self.counter is not None:
            self.counter.f_calls += 1
        return np.asarray(self.f(w), dtype=np.float64).reshape(-1)

    def _g(self, x: np.ndarray) -> np.ndarray:
        if self.counter is not None:
            self.counter.g_calls += 1
        return np.asarray(self.g(x), dtype=np.float64).reshape(-1)

    def __call__(self, n: int, t: float, X: np.ndarray, theta: ThetaIndex) -> np.ndarray:
        N, d = X.shape
        out = np.zeros((N, d + 1))
        if n <= 0:
            return out
        m, T = self.m, self.T

        n_term = m**n
        incs = np.empty((n_term, d))
        weights = np.empty((n_term, d))
        for i in range(1, n_term + 1):
            incs[i - 1], weights[i - 1] = terminal_sample(self.real, theta + (0, -i), t, T)
        gx = self._g(X)
        shifted = (X[None, :, :] + incs[:, None, :]).reshape(-1, d)
        diff = self._g(shifted).reshape(n_term, N) - gx[None, :]
        out[:, 0] = gx + diff.sum(axis=0) / n_term
        out[:, 1:] = diff.T @ weights / n_term

        for level in range(n):
            n_samples = m ** (n - level)
            for i in range(1, n_samples + 1):
                node = theta + (level, i)
                smp = level_sample(self.real, node, t, T)
                Y = X + smp.increment
                vals = self._f(self(level, smp.time, Y, node))
                if level > 0:
                    vals = vals - self._f(self(level - 1, smp.time, Y, theta + (-level, i)))
                coef = smp.inv_rho / n_samples
                out += coef * vals[:, None] * smp.weight[None, :]
        return out


def mlp_estimate(
    problem,
    cfg: MlpConfig,
    x,
    realization: Optional[RandomRealization] = None,
    counter: Optional[EvalCounter] = None,
) -> np.ndarray:
    """``U_{n,m}(t, x)`` for one point (shape ``(d,)``) or a batch ``(N, d)``.

    Returns shape ``(d + 1,)`` or ``(N, d + 1)``: value then gradient.
    """
    _check_time(cfg.t, problem.T)
    cfg.check_budget()
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != problem.d:
        raise ValueError(f"points have {X.shape[1]} coordinates, problem dimension is {problem.d}")
    real = realization if realization is not None else RandomRealization(cfg.seed, problem.d)
    if real.seed != cfg.seed or real.d != problem.d:
        raise ValueError("realization does not match the config seed / problem dimension")
    out = _Recursion(problem, cfg.m, real, counter)(cfg.n, float(cfg.t), X, cfg.theta_root)
    return out[0] if single else out


def f_eval_count(n: int, m: int) -> int:
    """Number of batched ``f`` calls made by ``U_{n,m}``, from the recursion."""
    if n <= 0:
        return 0
    total = 0
    for level in range(n):
        per_sample = 1 + f_eval_count(level, m)
        if level > 0:
            per_sample += 1 + f_eval_count(level - 1, m)
        total += m ** (n - level) * per_sample
    return total


def node_count(n: int, m: int) -> int:
    """Number of random nodes whose draws ``U_{n,m}`` consumes."""
    if n <= 0:
        return 0
    total = m**n
    for level in range(n):
        total += m ** (n - level) * (1 + node_count(level, m) + node_count(level - 1, m))
    return total


def reference_solution(problem, t: float, x) -> np.ndarray:
    """Closed-form ``(v(t, x), grad v(t, x))``; batch-aware like ``mlp_estimate``."""
    if problem.exact is None:
        raise CapabilityError(f"problem {problem.name!r} has no closed-form solution")
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    out = np.asarray(problem.exact(float(t), np.atleast_2d(X)), dtype=np.float64)
    return out[0] if single else out


def weighted_l2_distance(
    estimate: np.ndarray, reference: np.ndarray, horizon: float
) -> tuple[float, float]:
    """Root of the point-averaged, scaling-weighted squared deviation.

    Gradient components are weighted by ``sqrt(horizon)``.  Returns the
    estimate and its delta-method standard error.
    """
    estimate = np.atleast_2d(estimate)
    reference = np.atleast_2d(reference)
    lam = scaling_vector(estimate.shape[1] - 1, horizon)
    per_point = np.sum((lam * (estimate - reference)) ** 2, axis=1)
    mean_sq = float(per_point.mean())
    if len(per_point) < 2 or mean_sq == 0.0:
        return math.sqrt(mean_sq), 0.0
    se_sq = float(per_point.std(ddof=1)) / math.sqrt(len(per_point))
    return math.sqrt(mean_sq), se_sq / (2.0 * math.sqrt(mean_sq))


def uniform_points(d: int, n_points: int, seed: int) -> np.ndarray:
    """Evaluation points, uniform on the unit cube, independent of MLP draws."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    return rng.random((n_points, d))


def weighted_l2_error(
    problem,
    cfg: MlpConfig,
    reference: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    n_points: int = 256,
    estimator: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    points: Optional[np.ndarray] = None,
) -> tuple[float, float]:
    """Monte Carlo L2 error over ``[0, 1]^d`` of the estimator against a reference.

    ``reference`` defaults to the closed form at ``cfg.t``; ``estimator``
    defaults to ``mlp_estimate`` with ``cfg``.
    """
    if points is None:
        points = uniform_points(problem.d, n_points, cfg.seed)
    if reference is None:
        ref = reference_solution(problem, cfg.t, points)
    else:
        ref = np.asarray(reference(points), dtype=np.float64)
    if estimator is None:
        est = mlp_estimate(problem, cfg, points)
    else:
        est = np.asarray(estimator(points), dtype=np.float64)
    return weighted_l2_distance(est, ref, problem.T - cfg.t)
