"""Network construction calculus.

Dimension-level operators (composition, parallel sum, output retargeting,
identity shapes) and the realization-preserving constructors built on them.
Every constructor returns a network whose dims follow the corresponding
dimension operator exactly.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .exceptions import ShapeError
from .network import LayerDims, Network, check_dims

__all__ = [
    "compose_dims",
    "sum_dims",
    "retarget_dims",
    "identity_dims",
    "sup_norm",
    "identity_network",
    "zero_network",
    "affine_wrap",
    "vector_scale",
    "compose_networks",
    "sum_networks",
    "extend_depth",
    "mean_network",
]


def sup_norm(alpha: Sequence[int]) -> int:
    return max(alpha)


def compose_dims(alpha: Sequence[int], beta: Sequence[int]) -> LayerDims:
    """Dims of ``phi after psi`` for ``dims(phi) = alpha``, ``dims(psi) = beta``.

    The output layer of ``beta`` and the input layer of ``alpha`` merge into a
    single hidden layer of width ``beta[-1] + alpha[0]``.
    """
    alpha, beta = check_dims(alpha), check_dims(beta)
    return beta[:-1] + (beta[-1] + alpha[0],) + alpha[1:]


def sum_dims(alpha: Sequence[int], beta: Sequence[int]) -> LayerDims:
    alpha, beta = check_dims(alpha), check_dims(beta)
    if len(alpha) != len(beta):
        raise ShapeError(f"cannot sum dims of different length: {alpha} vs {beta}")
    if alpha[0] != beta[0] or alpha[-1] != beta[-1]:
        raise ShapeError(f"input/output widths differ: {alpha} vs {beta}")
    return (alpha[0],) + tuple(a + b for a, b in zip(alpha[1:-1], beta[1:-1])) + (beta[-1],)


def retarget_dims(alpha: Sequence[int], n: int) -> LayerDims:
    if n < 1:
        raise ShapeError(f"output width must be positive, got {n}")
    return check_dims(alpha)[:-1] + (int(n),)


def identity_dims(length: int) -> LayerDims:
    """``(1, 2, ..., 2, 1)`` of the given length (>= 3)."""
    if length < 3:
        raise ShapeError(f"identity shape needs length >= 3, got {length}")
    return (1,) + (2,) * (length - 2) + (1,)


def identity_network(H: int) -> Network:
    """Exact identity on R with ``H`` hidden layers, using x = relu(x) - relu(-x)."""
    if H < 1:
        raise ShapeError(f"need at least one hidden layer, got H={H}")
    layers = [(np.array([[1.0], [-1.0]]), np.zeros(2))]
    layers += [(np.eye(2), np.zeros(2)) for _ in range(H - 1)]
    layers.append((np.array([[1.0, -1.0]]), np.zeros(1)))
    return Network(layers)


def zero_network(input_dim: int, output_dim: int, length: int) -> Network:
    """Network of the given dims length realizing the zero map, hidden widths 1."""
    shape = (input_dim,) + (1,) * (length - 2) + (output_dim,)
    check_dims(shape)
    return Network(
        [(np.zeros((shape[n], shape[n - 1])), np.zeros(shape[n])) for n in range(1, len(shape))]
    )


def _shifted_first_layer(psi: Network, b) -> list:
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if b.shape[0] != psi.input_dim:
        raise ShapeError(f"shift has length {b.shape[0]}, network input width is {psi.input_dim}")
    (w1, b1), *rest = psi.layers
    return [(w1, b1 + w1 @ b)] + list(rest)


def affine_wrap(psi: Network, lam: float, b, a) -> Network:
    """Network with ``dims(psi)`` realizing ``x -> lam * (psi(x + b) + a)``."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape[0] != psi.output_dim:
        raise ShapeError(f"offset has length {a.shape[0]}, network output width is {psi.output_dim}")
    layers = _shifted_first_layer(psi, b)
    w, bias = layers[-1]
    layers[-1] = (lam * w, lam * bias + lam * a)
    return Network(layers)


def vector_scale(psi: Network, lam, b, a: float = 0.0) -> Network:
    """Network realizing ``x -> lam * (psi(x + b) + a)`` for scalar-output ``psi``.

    ``lam`` is a vector of length ``m``; the result has dims
    ``retarget_dims(dims(psi), m)``.
    """
    if psi.output_dim != 1:
        raise ShapeError(f"vector_scale needs a scalar-output network, got output width {psi.output_dim}")
    lam = np.asarray(lam, dtype=np.float64).reshape(-1, 1)
    layers = _shifted_first_layer(psi, b)
    w, bias = layers[-1]
    layers[-1] = (lam @ w, (lam * (bias + a)).reshape(-1))
    return Network(layers)


def compose_networks(phi: Network, psi: Network) -> Network:
    """Network realizing ``phi(psi(x))`` with dims ``compose_dims(dims(phi), dims(psi))``."""
    if psi.output_dim != phi.input_dim:
        raise ShapeError(
            f"cannot compose: inner output width {psi.output_dim} != outer input width {phi.input_dim}"
        )
    w_out, b_out = psi.layers[-1]
    w_in, b_in = phi.layers[0]
    # inner output y is carried through the ReLU as (relu(y), relu(-y))
    junction = (np.vstack([w_out, -w_out]), np.concatenate([b_out, -b_out]))
    entry = (np.hstack([w_in, -w_in]), b_in)
    return Network(list(psi.layers[:-1]) + [junction, entry] + list(phi.layers[1:]))


def sum_networks(nets: Sequence[Network], coeffs: Sequence[float] | None = None) -> Network:
    """Network realizing ``sum_i coeffs[i] * nets[i](x)`` for same-depth networks.

    Hidden layers are stacked block-diagonally, the inputs are shared and the
    coefficients are folded into the concatenated output layer.
    """
    nets = list(nets)
    if not nets:
        raise ShapeError("sum_networks needs at least one network")
    if coeffs is None:
        coeffs = [1.0] * len(nets)
    if len(coeffs) != len(nets):
        raise ShapeError(f"{len(nets)} networks but {len(coeffs)} coefficients")
    target = reduce(sum_dims, [net.dims for net in nets])
    if len(nets) == 1:
        return affine_wrap(nets[0], float(coeffs[0]), np.zeros(nets[0].input_dim), np.zeros(nets[0].output_dim))
    n_layers = len(nets[0].layers)
    layers = [
        (
            np.vstack([net.layers[0][0] for net in nets]),
            np.concatenate([net.layers[0][1] for net in nets]),
        )
    ]
    for k in range(1, n_layers - 1):
        layers.append(
            (
                block_diag(*[net.layers[k][0] for net in nets]),
                np.concatenate([net.layers[k][1] for net in nets]),
            )
        )
    layers.append(
        (
            np.hstack([h * net.layers[-1][0] for h, net in zip(coeffs, nets)]),
            sum(h * net.layers[-1][1] for h, net in zip(coeffs, nets)),
        )
    )
    out = Network(layers)
    assert out.dims == target
    return out


def extend_depth(psi: Network, target_depth: int) -> Network:
    """Pad a scalar-output network with identity layers up to ``target_depth``.

    Identity shapes have length >= 3, so the depth grows by 0 or by at least 2.
    """
    if psi.output_dim != 1:
        raise ShapeError(f"extend_depth needs a scalar-output network, got output width {psi.output_dim}")
    gap = target_depth - psi.depth
    if gap < 0:
        raise ValueError(f"target depth {target_depth} is below current depth {psi.depth}")
    if gap == 0:
        return psi
    if gap == 1:
        raise ValueError("identity padding cannot add exactly one layer")
    return compose_networks(identity_network(gap - 1), psi)


def mean_network(d: int) -> Network:
    """Dims ``(d, 2d, 1)`` network computing the arithmetic mean of its inputs."""
    if d < 1:
        raise ShapeError(f"dimension must be positive, got {d}")
    w1 = np.kron(np.eye(d), np.array([[1.0], [-1.0]]))
    w2 = np.tile([1.0, -1.0], d)[None, :] / d
    return Network([(w1, np.zeros(2 * d)), (w2, np.zeros(1))])
