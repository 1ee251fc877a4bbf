"""MLP parameters, forward pass and hand-written backprop.

Rows of an input matrix are datapoints, and a layer computes
``phi(h @ W + b)``. Every routine here also accepts *stacked* parameters,
where each weight has a leading sample axis ``(S, D_in, D_out)`` and each
bias ``(S, D_out)``; outputs then gain the same leading axis. That is how
Monte Carlo samples of a Bayesian network are pushed through in one go.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .core_math import ShapeError
from .masks import Architecture, LayerMask

POLICIES = ("prune", "signed_constant", "map", "none")


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return expit(z)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def activation_grad(name: str, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation written in terms of its output ``a``."""
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "identity":
        return np.ones_like(a)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class MlpParams:
    arch: Architecture
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for w, b, shape in zip(self.weights, self.biases, self.arch.weight_shapes):
            if w.shape[-2:] != shape or b.shape[-1] != shape[1]:
                raise ShapeError(f"parameter shapes {w.shape}/{b.shape} do not match {shape}")

    @property
    def n_stacked(self) -> int | None:
        return self.weights[0].shape[0] if self.weights[0].ndim == 3 else None

    def copy(self) -> "MlpParams":
        return MlpParams(self.arch, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order (weights then biases, per layer)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            if self.arch.bias:
                out.append(b)
        return out


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    c: float | None = None

    def arrays(self, bias: bool = True) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            if bias:
                out.append(b)
        return out


@dataclass
class FixedAssignment:
    """A mask together with the value held at every fixed position.

    For the ``signed_constant`` policy the values are ``signs * c`` and stay
    in sync with ``c`` through :meth:`with_c`. ``values`` is zero wherever the
    mask is free.
    """

    mask: LayerMask
    policy: str
    values: list[np.ndarray]
    signs: list[np.ndarray] | None = None
    c: float | None = None
    learn_c: bool = False

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown fixing policy {self.policy!r}")
        self.values = [np.where(m, np.asarray(v, dtype=np.float64), 0.0)
                       for m, v in zip(self.mask.matrices, self.values)]
        if self.policy == "signed_constant" and (self.signs is None or self.c is None):
            raise ValueError("signed_constant needs signs and c")

    @property
    def arch(self) -> Architecture:
        return self.mask.arch

    @property
    def has_c(self) -> bool:
        return self.policy == "signed_constant"

    def with_c(self, c: float) -> "FixedAssignment":
        if not self.has_c:
            raise ValueError(f"policy {self.policy!r} has no shared constant")
        values = [s * c for s in self.signs]
        return FixedAssignment(self.mask, self.policy, values, self.signs, float(c), self.learn_c)

    def fixed_values(self, layer: int) -> np.ndarray:
        m = self.mask.matrices[layer - 1]
        return self.values[layer - 1][m]


def init_params(arch: Architecture, rng: np.random.Generator) -> MlpParams:
    """i.i.d. N(0, 1/fan_in) for every weight and bias."""
    weights, biases = [], []
    for fan_in, fan_out in arch.weight_shapes:
        scale = 1.0 / np.sqrt(fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        b = rng.normal(0.0, scale, size=fan_out)
        biases.append(b if arch.bias else np.zeros(fan_out))
    return MlpParams(arch, weights, biases)


def _check_input(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[-1] != params.arch.dims[0]:
        raise ShapeError(f"input has {x.shape[-1]} columns, expected {params.arch.dims[0]}")
    return x


def forward_all(params: MlpParams, x: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer, input first."""
    h = _check_input(params, x)
    hs = [h]
    for w, b, act in zip(params.weights, params.biases, params.arch.activations):
        h = activate(act, h @ w + b[..., None, :])
        hs.append(h)
    return hs


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    return forward_all(params, x)[-1]


def backward(params: MlpParams, x: np.ndarray, upstream: np.ndarray,
             hs: list[np.ndarray] | None = None) -> Gradients:
    """Gradients of ``sum(upstream * forward(params, x))`` w.r.t. all parameters.

    ``hs`` may carry the cached activations from :func:`forward_all`.
    """
    if hs is None:
        hs = forward_all(params, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != hs[-1].shape:
        raise ShapeError(f"upstream shape {upstream.shape} != output shape {hs[-1].shape}")
    n = params.arch.n_layers
    gw: list[np.ndarray] = [None] * n
    gb: list[np.ndarray] = [None] * n
    delta = upstream
    for i in reversed(range(n)):
        delta = delta * activation_grad(params.arch.activations[i], hs[i + 1])
        gw[i] = np.swapaxes(hs[i], -1, -2) @ delta
        if gw[i].shape != params.weights[i].shape:
            gw[i] = np.broadcast_to(gw[i], params.weights[i].shape).copy()
        gb[i] = delta.sum(axis=-2) if params.arch.bias else np.zeros_like(params.biases[i])
        if i > 0:
            delta = delta @ np.swapaxes(params.weights[i], -1, -2)
    return Gradients(gw, gb)


def apply_fixed(params: MlpParams, assignment: FixedAssignment) -> MlpParams:
    if assignment.arch.weight_shapes != params.arch.weight_shapes:
        raise ShapeError("assignment does not match the parameter shapes")
    weights = [np.where(m, v, w) for w, m, v in
               zip(params.weights, assignment.mask.matrices, assignment.values)]
    return MlpParams(params.arch, weights, [b.copy() for b in params.biases])


# -- text checkpoint ---------------------------------------------------------

_HEADER = "# partialbnn params v1"


def save_params(params: MlpParams, path) -> None:
    """Row-major text dump with 17 significant digits (exact float64 round trip)."""
    arch = params.arch
    lines = [
        _HEADER,
        "dims " + " ".join(map(str, arch.dims)),
        "activations " + " ".join(arch.activations),
        f"bias {int(arch.bias)}",
    ]
    for i, (w, b) in enumerate(zip(params.weights, params.biases), start=1):
        lines.append(f"W{i} {w.shape[0]} {w.shape[1]}")
        lines.append(" ".join(repr(float(v)) for v in w.ravel()))
        lines.append(f"b{i} {b.shape[0]}")
        lines.append(" ".join(repr(float(v)) for v in b.ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path) -> MlpParams:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _HEADER:
        raise ValueError(f"{path} is not a partialbnn parameter file")
    dims = tuple(int(v) for v in lines[1].split()[1:])
    acts = tuple(lines[2].split()[1:])
    bias = bool(int(lines[3].split()[1]))
    arch = Architecture(dims, acts, bias)
    weights, biases = [], []
    pos = 4
    for _ in range(arch.n_layers):
        _, r, c = lines[pos].split()
        weights.append(np.array([float(v) for v in lines[pos + 1].split()]).reshape(int(r), int(c)))
        _, n = lines[pos + 2].split()
        biases.append(np.array([float(v) for v in lines[pos + 3].split()]).reshape(int(n)))
        pos += 4
    return MlpParams(arch, weights, biases)
