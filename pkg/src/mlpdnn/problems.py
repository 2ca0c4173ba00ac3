"""PDE instances: manufactured closed-form problems and the sine example.

All callables are vectorized: ``f`` maps an ``(N, d + 1)`` array of
``(v, grad v)`` rows to ``(N,)``, ``g`` maps ``(N, d)`` to ``(N,)`` and
``exact(t, X)`` returns ``(N, d + 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .calculus import affine_wrap, compose_networks, mean_network, zero_network
from .network import Network, param_count
from .solver import scaling_vector

__all__ = [
    "Problem",
    "SineApproximant",
    "make_transport_problem",
    "make_linear_heat_problem",
    "sin_approx_network",
    "make_sine_problem",
    "make_problem",
    "PROBLEM_NAMES",
    "check_theorem_conditions",
    "smallest_passing_c",
    "pde_residual",
]

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class Problem:
    name: str
    d: int
    T: float
    f: Callable[[Array], Array]
    g: Callable[[Array], Array]
    phi_f: Optional[Network] = None
    phi_g: Optional[Network] = None
    lipschitz_weights: Optional[Array] = None
    exact: Optional[Callable[[float, Array], Array]] = None
    # unapproximated coefficients and the accuracy of (f, g) against them
    f_target: Optional[Callable[[Array], Array]] = None
    g_target: Optional[Callable[[Array], Array]] = None
    epsilon: Optional[float] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got {self.T}")
        if self.phi_f is not None and (self.phi_f.input_dim, self.phi_f.output_dim) != (self.d + 1, 1):
            raise ValueError(f"phi_f must map R^{self.d + 1} -> R, has dims {self.phi_f.dims}")
        if self.phi_g is not None and (self.phi_g.input_dim, self.phi_g.output_dim) != (self.d, 1):
            raise ValueError(f"phi_g must map R^{self.d} -> R, has dims {self.phi_g.dims}")

    @property
    def has_networks(self) -> bool:
        return self.phi_f is not None and self.phi_g is not None


def _selector(n_in: int, index: int) -> Network:
    """Dims ``(n_in, 2, 1)`` network returning coordinate ``index`` exactly."""
    w1 = np.zeros((2, n_in))
    w1[0, index], w1[1, index] = 1.0, -1.0
    return Network([(w1, np.zeros(2)), (np.array([[1.0, -1.0]]), np.zeros(1))])


def make_transport_problem(d: int, T: float = 1.0, coupling: float = 1.0) -> Problem:
    """``f(w) = a * w_1``, ``g(x) = x_1``; solution ``v = x_1 + a (T - t)``, ``grad v = e_1``.

    ``a`` is ``coupling``.  The estimator's variance contracts across levels
    only when ``a`` is small relative to the basis ``m``.
    """

    def exact(t, X):
        out = np.zeros((len(X), d + 1))
        out[:, 0] = X[:, 0] + coupling * (T - t)
        out[:, 1] = 1.0
        return out

    weights = np.zeros(d + 1)
    weights[1] = abs(coupling) / math.sqrt(T)
    phi_f = _selector(d + 1, 1)
    if coupling != 1.0:
        phi_f = affine_wrap(phi_f, coupling, np.zeros(d + 1), np.zeros(1))
    return Problem(
        name="transport",
        d=d,
        T=T,
        f=lambda w: coupling * w[:, 1],
        g=lambda x: x[:, 0],
        phi_f=phi_f,
        phi_g=_selector(d, 0),
        lipschitz_weights=weights,
        exact=exact,
        params={"d": d, "T": T, "coupling": coupling},
    )


def make_linear_heat_problem(d: int, T: float = 1.0, g_kind: str = "affine") -> Problem:
    """``f = 0`` with ``g(x) = sum(x)`` (affine) or ``g(x) = |x|^2`` (quadratic)."""
    if g_kind == "affine":

        def exact(t, X):
            return np.column_stack([X.sum(axis=1), np.ones_like(X)])

        g = lambda x: x.sum(axis=1)  # noqa: E731
        phi_g = affine_wrap(mean_network(d), float(d), np.zeros(d), np.zeros(1))
    elif g_kind == "quadratic":

        def exact(t, X):
            return np.column_stack([np.sum(X**2, axis=1) + d * (T - t), 2.0 * X])

        g = lambda x: np.sum(x**2, axis=1)  # noqa: E731
        phi_g = None
    else:
        raise ValueError(f"g_kind must be 'affine' or 'quadratic', got {g_kind!r}")
    return Problem(
        name=f"linear-{g_kind}",
        d=d,
        T=T,
        f=lambda w: np.zeros(len(w)),
        g=g,
        phi_f=zero_network(d + 1, 1, 3),
        phi_g=phi_g,
        lipschitz_weights=np.zeros(d + 1),
        exact=exact,
        params={"d": d, "T": T, "g_kind": g_kind},
    )


@dataclass(frozen=True, eq=False)
class SineApproximant:
    """Clamped piecewise-linear interpolant of ``sin`` and its ReLU network."""

    epsilon: float
    knots: Array
    values: Array
    network: Network

    @property
    def valid_range(self) -> float:
        return float(self.knots[-1])

    def __call__(self, x) -> Array:
        return np.interp(x, self.knots, self.values)

    @staticmethod
    def layout(epsilon: float) -> tuple[float, int]:
        """Half-range ``R`` and (even) number of intervals for accuracy ``epsilon``."""
        R = max(math.pi * math.ceil(epsilon ** (-1.0 / 1.5)), 2.0 * math.pi)
        # interpolation error of sin is at most h^2 / 8
        n_intervals = 2 * math.ceil(R / math.sqrt(8.0 * epsilon))
        return R, n_intervals

    @classmethod
    def width(cls, epsilon: float) -> int:
        return cls.layout(epsilon)[1] + 1


def sin_approx_network(epsilon: float) -> SineApproximant:
    """One-hidden-layer ReLU approximant with ``|sin - gamma| <= eps (1 + |x|^1.5)``.

    Uniform knots on ``[-R, R]`` include 0; outside the range the network is
    constant.  All slopes are chords of ``sin`` so the result is 1-Lipschitz.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    R, n_intervals = SineApproximant.layout(epsilon)
    knots = np.linspace(-R, R, n_intervals + 1)
    knots[n_intervals // 2] = 0.0
    values = np.sin(knots)
    slopes = np.diff(values) / np.diff(knots)
    # relu(x - x_j) units; output weights are slope changes, closing with slope 0
    out_w = np.diff(np.concatenate([[0.0], slopes, [0.0]]))
    net = Network(
        [
            (np.ones((n_intervals + 1, 1)), -knots),
            (out_w[None, :], np.array([values[0]])),
        ]
    )
    return SineApproximant(epsilon, knots, values, net)


def construction_kappa(n_grid: int = 20001) -> float:
    """``max(1, sup_eps width(eps) * eps^3)`` for the approximant family.

    The width is a step function of ``eps``; its supremum times ``eps^3`` is
    approached just below the step points, which a dense grid up to
    ``1 - 1e-12`` reaches to within the grid resolution.
    """
    eps = np.concatenate([np.geomspace(1e-3, 1.0 - 1e-12, n_grid), [1.0 - 1e-12]])
    return float(max(1.0, max(SineApproximant.width(e) * e**3 for e in eps)))


def make_sine_problem(d: int, epsilon: float, T: float = 1.0) -> Problem:
    """``f_eps(w) = gamma(mean(w))``, ``g_eps(x) = gamma(mean(x))`` with networks."""
    gamma = sin_approx_network(epsilon)
    phi_f = compose_networks(gamma.network, mean_network(d + 1))
    phi_g = compose_networks(gamma.network, mean_network(d))
    lam = scaling_vector(d, T)
    return Problem(
        name="sine",
        d=d,
        T=T,
        f=lambda w: gamma(w.mean(axis=1)),
        g=lambda x: gamma(x.mean(axis=1)),
        phi_f=phi_f,
        phi_g=phi_g,
        lipschitz_weights=1.0 / ((d + 1) * lam),
        f_target=lambda w: np.sin(w.mean(axis=1)),
        g_target=lambda x: np.sin(x.mean(axis=1)),
        epsilon=epsilon,
        params={"d": d, "T": T, "eps": epsilon, "approximant": gamma},
    )


PROBLEM_NAMES = ("transport", "linear-affine", "linear-quadratic", "sine")


def make_problem(name: str, d: int, T: float = 1.0, eps: float = 0.1, coupling: float = 1.0) -> Problem:
    if name == "transport":
        return make_transport_problem(d, T, coupling)
    if name == "linear-affine":
        return make_linear_heat_problem(d, T, "affine")
    if name == "linear-quadratic":
        return make_linear_heat_problem(d, T, "quadratic")
    if name == "sine":
        return make_sine_problem(d, eps, T)
    raise ValueError(f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}")


def _ratio(lhs: Array, rhs: Array) -> float:
    lhs, rhs = np.abs(np.asarray(lhs)), np.asarray(rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    return float(np.max(r))


def check_theorem_conditions(
    problem: Problem,
    c: float,
    q: float,
    beta: float,
    n_samples: int = 1000,
    box: float = 10.0,
    seed: int = 0,
) -> dict:
    """Largest ``lhs / rhs`` ratio of each growth, Lipschitz, approximation and size condition.

    Ratios ``<= 1`` mean the condition held on the random grid over
    ``[-box, box]``.  Conditions needing data the problem lacks map to ``None``.
    """
    d, T = problem.d, problem.T
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, (n_samples, d))
    y = rng.uniform(-box, box, (n_samples, d))
    w1 = rng.uniform(-box, box, (n_samples, d + 1))
    w2 = rng.uniform(-box, box, (n_samples, d + 1))
    lam = scaling_vector(d, T)
    dc = float(d) ** c
    sq = np.sum(x**2, axis=1)
    report: dict = {}

    f0 = float(problem.f(np.zeros((1, d + 1)))[0])
    report["growth"] = _ratio(np.abs(problem.g(x)) + abs(T * f0), c * np.sqrt(dc + sq))

    if problem.lipschitz_weights is not None:
        L = np.asarray(problem.lipschitz_weights, dtype=np.float64)
        report["lipschitz_sum"] = float(L.sum()) / c
        report["f_lipschitz"] = _ratio(
            problem.f(w1) - problem.f(w2), np.abs(w1 - w2) @ (L * lam)
        )
    else:
        report["lipschitz_sum"] = report["f_lipschitz"] = None

    report["g_lipschitz"] = _ratio(
        problem.g(x) - problem.g(y), c * dc * np.linalg.norm(x - y, axis=1) / math.sqrt(T)
    )

    eps = problem.epsilon
    if problem.f_target is not None and eps is not None:
        report["f_approximation"] = _ratio(
            problem.f(w1) - problem.f_target(w1),
            eps * c * dc / T * (1.0 + np.sum((lam * np.abs(w1)) ** q, axis=1)),
        )
    else:
        report["f_approximation"] = None
    if problem.g_target is not None and eps is not None:
        report["g_approximation"] = _ratio(
            problem.g_target(x) - problem.g(x), eps * c * dc * (dc + sq) ** beta
        )
    else:
        report["g_approximation"] = None

    if problem.has_networks and eps is not None:
        size = max(param_count(problem.phi_f), param_count(problem.phi_g))
        report["param_bound"] = size / (c * dc * eps ** (-c))
    else:
        report["param_bound"] = None
    return report


def conditions_hold(report: dict) -> bool:
    return all(v <= 1.0 for v in report.values() if v is not None)


def smallest_passing_c(
    problem: Problem, q: float, beta: float, c_max: float = 64.0, tol: float = 1e-3, **grid
) -> Optional[float]:
    """Smallest ``c >= 2`` (to ``tol``) at which every audited condition holds."""
    if conditions_hold(check_theorem_conditions(problem, 2.0, q, beta, **grid)):
        return 2.0
    if not conditions_hold(check_theorem_conditions(problem, c_max, q, beta, **grid)):
        return None
    lo, hi = 2.0, c_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if conditions_hold(check_theorem_conditions(problem, mid, q, beta, **grid)):
            hi = mid
        else:
            lo = mid
    return hi


def pde_residual(problem: Problem, t: float, x: Array, h: float = 1e-4) -> float:
    """``v_t + (1/2) lap v + f(v, grad v)`` by central differences of the closed form."""
    x = np.asarray(x, dtype=np.float64)
    d = problem.d

    def v(tt, xx):
        return problem.exact(tt, xx[None, :])[0, 0]

    dt = (v(t + h, x) - v(t - h, x)) / (2 * h)
    lap = 0.0
    grad = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        lap += (v(t, x + e) - 2 * v(t, x) + v(t, x - e)) / h**2
        grad[i] = (v(t, x + e) - v(t, x - e)) / (2 * h)
    w = np.concatenate([[v(t, x)], grad])
    return float(dt + 0.5 * lap + problem.f(w[None, :])[0])
