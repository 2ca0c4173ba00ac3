"""Feed-forward ReLU networks: storage, realization, dimensions, JSON I/O.

A network is a sequence of affine layers ``(W_n, B_n)``, ``n = 1..H+1``.
Hidden layers apply the componentwise ReLU after the affine map, the output
layer is affine only.  Networks are immutable once constructed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .exceptions import ParseError, ShapeError

__all__ = [
    "LayerDims",
    "Network",
    "check_dims",
    "realize",
    "param_count",
    "dims",
    "encode",
    "decode",
]

LayerDims = tuple[int, ...]


def check_dims(widths: Sequence[int]) -> LayerDims:
    """Validate a width vector ``(k_0, ..., k_{H+1})`` with ``H >= 1``."""
    widths = tuple(int(k) for k in widths)
    if len(widths) < 3:
        raise ShapeError(f"layer dims need length >= 3, got {widths}")
    if any(k < 1 for k in widths):
        raise ShapeError(f"layer widths must be positive, got {widths}")
    return widths


def _frozen(a: Any, ndim: int, what: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ShapeError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains NaN or Inf")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Network:
    """ReLU network given by its list of ``(weights, bias)`` pairs."""

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __init__(self, layers: Sequence[tuple[Any, Any]]):
        frozen = []
        for n, (w, b) in enumerate(layers):
            w = _frozen(w, 2, f"layers[{n}].w")
            b = _frozen(b, 1, f"layers[{n}].b")
            if w.shape[0] != b.shape[0]:
                raise ShapeError(
                    f"layers[{n}]: weight rows {w.shape[0]} != bias length {b.shape[0]}"
                )
            if frozen and frozen[-1][0].shape[0] != w.shape[1]:
                raise ShapeError(
                    f"layers[{n}]: expects {w.shape[1]} inputs, "
                    f"previous layer emits {frozen[-1][0].shape[0]}"
                )
            frozen.append((w, b))
        if len(frozen) < 2:
            raise ShapeError("a network needs at least one hidden layer")
        object.__setattr__(self, "layers", tuple(frozen))
        check_dims(self.dims)

    @property
    def dims(self) -> LayerDims:
        return (self.layers[0][0].shape[1],) + tuple(w.shape[0] for w, _ in self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def depth(self) -> int:
        """Length of the dims vector, i.e. number of layers + 1."""
        return len(self.layers) + 1

    @property
    def width(self) -> int:
        """Sup norm of the dims vector."""
        return max(self.dims)

    @property
    def n_params(self) -> int:
        return param_count(self)

    def __call__(self, x: Any) -> np.ndarray:
        return realize(self, x)

    def __repr__(self) -> str:
        return f"Network(dims={self.dims})"


def realize(net: Network, x: Any) -> np.ndarray:
    """Evaluate the function computed by ``net``.

    ``x`` is a single input of length ``k_0`` or a batch of shape ``(N, k_0)``;
    the result has matching leading shape.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError(f"input has shape {x.shape}, network expects {net.input_dim} features")
    h = batch
    last = len(net.layers) - 1
    for n, (w, b) in enumerate(net.layers):
        h = h @ w.T + b
        if n < last:
            np.maximum(h, 0.0, out=h)
    return h[0] if single else h


def param_count(net: Network) -> int:
    """Total number of weights and biases, ``sum_n k_n (k_{n-1} + 1)``."""
    k = net.dims
    return sum(k[n] * (k[n - 1] + 1) for n in range(1, len(k)))


def dims(net: Network) -> LayerDims:
    return net.dims


def _to_payload(net: Network) -> dict:
    return {
        "dims": list(net.dims),
        "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in net.layers],
    }


def encode(net: Network) -> bytes:
    """Serialize to the JSON network format (UTF-8 bytes)."""
    # float repr is the shortest string that round-trips, so decode is bit-exact
    return json.dumps(_to_payload(net), separators=(",", ":"), allow_nan=False).encode()


def _number_array(obj: Any, ndim: int, field: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{field}: not a numeric array ({exc})") from None
    if arr.ndim != ndim:
        raise ParseError(f"{field}: expected a {ndim}-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{field}: non-finite entry")
    return arr


def decode(data: bytes | str) -> Network:
    """Parse the JSON network format; errors name the first offending field."""
    try:
        payload = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"payload: invalid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise ParseError("payload: expected a JSON object")
    if "dims" not in payload:
        raise ParseError("dims: missing")
    declared = payload["dims"]
    if not isinstance(declared, list) or not all(
        isinstance(k, int) and not isinstance(k, bool) for k in declared
    ):
        raise ParseError("dims: expected an integer array")
    try:
        declared = check_dims(declared)
    except ShapeError as exc:
        raise ParseError(f"dims: {exc}") from None
    if "layers" not in payload:
        raise ParseError("layers: missing")
    layers = payload["layers"]
    if not isinstance(layers, list):
        raise ParseError("layers: expected an array")
    if len(layers) != len(declared) - 1:
        raise ParseError(
            f"layers: {len(layers)} layers but dims declare {len(declared) - 1}"
        )
    parsed = []
    for n, layer in enumerate(layers):
        if not isinstance(layer, dict):
            raise ParseError(f"layers[{n}]: expected an object")
        for key in ("w", "b"):
            if key not in layer:
                raise ParseError(f"layers[{n}].{key}: missing")
        w = _number_array(layer["w"], 2, f"layers[{n}].w")
        b = _number_array(layer["b"], 1, f"layers[{n}].b")
        if w.shape != (declared[n + 1], declared[n]):
            raise ParseError(
                f"layers[{n}].w: shape {w.shape} does not match dims "
                f"({declared[n + 1]}, {declared[n]})"
            )
        if b.shape != (declared[n + 1],):
            raise ParseError(f"layers[{n}].b: length {b.shape[0]} != {declared[n + 1]}")
        parsed.append((w, b))
    return Network(parsed)
