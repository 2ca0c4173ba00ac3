"""Compile a sampled multilevel Picard estimator into one ReLU network.

For a fixed realization of all node draws, ``x -> U_{n,m}(t, x)`` is built
from the networks of ``f`` and ``g`` by shifting inputs, composing, padding
with identity layers, multiplying by the ``(1, dW/dt)`` weight vectors and
summing.  Every summand is padded to the common depth
``n * (len(dims_f) - 1) + len(dims_g)`` before the final parallel sum.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .calculus import (
    compose_dims,
    compose_networks,
    extend_depth,
    identity_dims,
    retarget_dims,
    sum_dims,
    sum_networks,
    vector_scale,
    zero_network,
)
from .exceptions import ResourceError, ShapeError
from .network import LayerDims, Network, check_dims, param_count
from .randomness import RandomRealization, ThetaIndex
from .solver import MlpConfig, _check_time, level_sample, mlp_estimate, terminal_sample

__all__ = [
    "predicted_depth",
    "width_bound",
    "width_constant",
    "compiled_dims",
    "compile_mlp",
    "CompileReport",
    "verify_equivalence",
    "DEFAULT_MAX_PARAMS",
]

DEFAULT_MAX_PARAMS = 10**7


def predicted_depth(n: int, dims_f: Sequence[int], dims_g: Sequence[int]) -> int:
    """Length of the dims vector of the level-``n`` network."""
    if n < 0:
        raise ValueError(f"level must be >= 0, got {n}")
    return n * (len(dims_f) - 1) + len(dims_g)


def width_bound(n: int, m: int, c: int) -> int:
    """``c * (4m)^n``."""
    return c * (4 * m) ** n


def width_constant(d: int, dims_f: Sequence[int], dims_g: Sequence[int]) -> int:
    """Smallest admissible ``c``: ``max(d + 1, |dims_f|_inf, |dims_g|_inf)``."""
    return max(d + 1, max(dims_f), max(dims_g))


def _zero_dims(d: int, length: int) -> LayerDims:
    return (d,) + (1,) * (length - 2) + (d + 1,)


def compiled_dims(n: int, m: int, d: int, dims_f: Sequence[int], dims_g: Sequence[int]) -> LayerDims:
    """Dims of the compiled network, computed with the dimension algebra only."""
    dims_f, dims_g = check_dims(dims_f), check_dims(dims_g)
    return _dims_rec(n, m, d, dims_f, dims_g, {})


def _dims_rec(n, m, d, dims_f, dims_g, memo) -> LayerDims:
    if n in memo:
        return memo[n]
    if n == 0:
        out = _zero_dims(d, len(dims_g))
    else:
        depth = predicted_depth(n, dims_f, dims_g)
        g_term = retarget_dims(compose_dims(identity_dims(depth - len(dims_g) + 1), dims_g), d + 1)
        terms = [g_term] * (2 * m**n)
        for level in range(n):
            for lvl, count in ((level, m ** (n - level)), (level - 1, m ** (n - level) if level else 0)):
                if not count:
                    continue
                inner = compose_dims(dims_f, _dims_rec(lvl, m, d, dims_f, dims_g, memo))
                if len(inner) < depth:
                    inner = compose_dims(identity_dims(depth - len(inner) + 1), inner)
                terms += [retarget_dims(inner, d + 1)] * count
        out = terms[0]
        for term in terms[1:]:
            out = sum_dims(out, term)
    memo[n] = out
    return out


class _Compiler:
    def __init__(self, problem, m: int, real: RandomRealization):
        self.phi_f = problem.phi_f
        self.phi_g = problem.phi_g
        self.T = float(problem.T)
        self.d = int(problem.d)
        self.m = m
        self.real = real
        self._padded_g: dict[int, Network] = {}

    def padded_g(self, depth: int) -> Network:
        if depth not in self._padded_g:
            self._padded_g[depth] = extend_depth(self.phi_g, depth)
        return self._padded_g[depth]

    def __call__(self, n: int, t: float, theta: ThetaIndex) -> Network:
        d, m, T = self.d, self.m, self.T
        if n == 0:
            return zero_network(d, d + 1, len(self.phi_g.dims))
        depth = predicted_depth(n, self.phi_f.dims, self.phi_g.dims)
        n_term = m**n
        g_net = self.padded_g(depth)
        zero_shift = np.zeros(d)
        plus_terms, minus_terms = [], []
        for i in range(1, n_term + 1):
            dW, z = terminal_sample(self.real, theta + (0, -i), t, T)
            plus_terms.append(vector_scale(g_net, np.concatenate([[1.0], z]) / n_term, dW))
            minus_terms.append(vector_scale(g_net, -np.concatenate([[0.0], z]) / n_term, zero_shift))
        terms = plus_terms + minus_terms

        for level in range(n):
            n_samples = m ** (n - level)
            for i in range(1, n_samples + 1):
                node = theta + (level, i)
                smp = level_sample(self.real, node, t, T)
                lam = smp.inv_rho / n_samples * smp.weight
                branches = [(self(level, smp.time, node), lam)]
                if level > 0:
                    branches.append((self(level - 1, smp.time, theta + (-level, i)), -lam))
                for sub, coef in branches:
                    inner = extend_depth(compose_networks(self.phi_f, sub), depth)
                    terms.append(vector_scale(inner, coef, smp.increment))
        for term in terms:
            if term.depth != depth:
                raise AssertionError(f"summand depth {term.depth} != common depth {depth}")
        return sum_networks(terms)


def compile_mlp(
    problem,
    cfg: MlpConfig,
    realization: Optional[RandomRealization] = None,
    max_params: int = DEFAULT_MAX_PARAMS,
) -> Network:
    """Network over ``R^d -> R^{d+1}`` realizing ``x -> U_{n,m}(t, x)`` for fixed draws."""
    if problem.phi_f is None or problem.phi_g is None:
        raise ShapeError(f"problem {problem.name!r} carries no networks for f and g")
    d = problem.d
    if (problem.phi_f.input_dim, problem.phi_f.output_dim) != (d + 1, 1):
        raise ShapeError(f"phi_f must map R^{d + 1} -> R, has dims {problem.phi_f.dims}")
    if (problem.phi_g.input_dim, problem.phi_g.output_dim) != (d, 1):
        raise ShapeError(f"phi_g must map R^{d} -> R, has dims {problem.phi_g.dims}")
    _check_time(cfg.t, problem.T)
    cfg.check_budget()
    target = compiled_dims(cfg.n, cfg.m, d, problem.phi_f.dims, problem.phi_g.dims)
    n_params = sum(target[k] * (target[k - 1] + 1) for k in range(1, len(target)))
    if n_params > max_params:
        raise ResourceError(
            f"compiled network would have {n_params} parameters (n={cfg.n}, m={cfg.m}, d={d}), "
            f"cap is {max_params}"
        )
    real = realization if realization is not None else RandomRealization(cfg.seed, d)
    if real.seed != cfg.seed or real.d != d:
        raise ValueError("realization does not match the config seed / problem dimension")
    net = _Compiler(problem, cfg.m, real)(cfg.n, float(cfg.t), cfg.theta_root)
    assert net.dims == target
    return net


@dataclass
class CompileReport:
    depth_predicted: int
    depth_actual: int
    width_bound: int
    width_actual: int
    param_count: int
    max_abs_deviation: float
    max_rel_deviation: float
    tolerance: float
    n_points: int

    @property
    def depth_ok(self) -> bool:
        return self.depth_actual == self.depth_predicted

    @property
    def width_ok(self) -> bool:
        return self.width_actual <= self.width_bound

    @property
    def equivalent(self) -> bool:
        return self.max_rel_deviation <= self.tolerance

    @property
    def passed(self) -> bool:
        return self.depth_ok and self.width_ok and self.equivalent

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(depth_ok=self.depth_ok, width_ok=self.width_ok,
                   equivalent=self.equivalent, passed=self.passed)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def verify_equivalence(
    compiled: Network,
    problem,
    cfg: MlpConfig,
    realization: Optional[RandomRealization],
    grid,
    tolerance: float = 1e-8,
) -> CompileReport:
    """Compare the compiled network with the direct estimator on ``grid``.

    The relative deviation is the largest absolute componentwise gap divided
    by the sup norm of the direct estimates over the grid.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    if len(grid) == 0:
        raise ValueError("verification grid is empty")
    direct = mlp_estimate(problem, cfg, grid, realization=realization)
    via_net = compiled(grid)
    gap = float(np.max(np.abs(via_net - direct)))
    scale = float(np.max(np.abs(direct)))
    rel = gap if scale == 0.0 else gap / scale
    c = width_constant(problem.d, problem.phi_f.dims, problem.phi_g.dims)
    return CompileReport(
        depth_predicted=predicted_depth(cfg.n, problem.phi_f.dims, problem.phi_g.dims),
        depth_actual=compiled.depth,
        width_bound=width_bound(cfg.n, cfg.m, c),
        width_actual=compiled.width,
        param_count=param_count(compiled),
        max_abs_deviation=gap,
        max_rel_deviation=rel if math.isfinite(rel) else math.inf,
        tolerance=tolerance,
        n_points=len(grid),
    )
