"""Symmetry-breaking masks for MLP weight matrices.

Layer indices follow the usual MLP convention: weight matrix ``W_l`` (1-based
``l``) has shape ``(dims[l-1], dims[l])`` and hidden layers are ``1..L-1``.
Arrays are stored 0-based, so ``W_l`` lives at ``matrices[l - 1]``.

A ``True`` entry in a mask marks a fixed (deterministic) weight. Biases are
never masked.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("sigmoid", "tanh", "identity")
SCHEMES = ("light", "heavy", "random", "none")


class MaskWarning(UserWarning):
    """A hidden layer keeps more than one fully connected neuron."""


@dataclass(frozen=True)
class Architecture:
    dims: tuple[int, ...]
    activations: tuple[str, ...]
    bias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.dims) < 2:
            raise ValueError("an architecture needs at least input and output widths")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"all widths must be >= 1, got {self.dims}")
        if len(self.activations) != len(self.dims) - 1:
            raise ValueError("need one activation per weight layer")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")

    @classmethod
    def mlp(cls, dims, hidden: str = "tanh", bias: bool = True) -> "Architecture":
        """Hidden layers share one activation; the output layer is linear."""
        n = len(dims) - 1
        return cls(tuple(dims), (hidden,) * (n - 1) + ("identity",), bias)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    @property
    def hidden_layers(self) -> range:
        return range(1, self.n_layers)

    @property
    def weight_shapes(self) -> list[tuple[int, int]]:
        return [(self.dims[i], self.dims[i + 1]) for i in range(self.n_layers)]

    @property
    def n_weights(self) -> int:
        return sum(r * c for r, c in self.weight_shapes)

    @property
    def n_biases(self) -> int:
        return sum(self.dims[1:]) if self.bias else 0


@dataclass
class LayerMask:
    arch: Architecture
    matrices: list[np.ndarray]
    scheme: str = "none"
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.matrices = [np.asarray(m, dtype=bool) for m in self.matrices]
        shapes = [m.shape for m in self.matrices]
        if shapes != self.arch.weight_shapes:
            raise ValueError(f"mask shapes {shapes} do not match {self.arch.weight_shapes}")

    @classmethod
    def empty(cls, arch: Architecture) -> "LayerMask":
        return cls(arch, [np.zeros(s, dtype=bool) for s in arch.weight_shapes], "none")

    def fixed_positions(self, layer: int) -> list[tuple[int, int]]:
        """1-based (row, col) coordinates of fixed entries in ``W_layer``."""
        rows, cols = np.nonzero(self.matrices[layer - 1])
        return [(int(r) + 1, int(c) + 1) for r, c in zip(rows, cols)]

    def __eq__(self, other):
        if not isinstance(other, LayerMask):
            return NotImplemented
        return self.arch == other.arch and all(
            np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices)
        )


def fully_connected_count(arch: Architecture, layer: int) -> int:
    """Neurons of hidden ``layer`` with no fixed connection on either side."""
    if layer not in arch.hidden_layers:
        raise IndexError(f"layer {layer} is not a hidden layer of {arch.dims}")
    d = arch.dims
    return max(0, d[layer] - d[layer - 1] - d[layer + 1] + 2)


def top_block(shape: tuple[int, int], m: int, scheme: str) -> np.ndarray:
    block = np.zeros(shape, dtype=bool)
    if scheme == "light":
        idx = np.arange(m)
        block[idx, idx] = True
    elif scheme == "heavy":
        # row i fixes columns i..m-1 (upper triangle of the leading m x m block)
        block[:m, :m] = np.triu(np.ones((m, m), dtype=bool))
    else:
        raise ValueError(f"no structured block for scheme {scheme!r}")
    return block


def bottom_block(shape: tuple[int, int], m: int, scheme: str) -> np.ndarray:
    return top_block(shape, m, scheme)[::-1, ::-1].copy()


def generate_mask(arch: Architecture, scheme: str, layout: str = "alternating") -> LayerMask:
    """Structured light or heavy mask; ``none`` gives an all-free mask.

    With the default ``alternating`` layout, ``W_k`` gets a top-anchored block
    for odd ``k`` and a bottom-anchored block for even ``k``, each of extent
    ``min(D_{k-1} - 1, D_k - 1)``. Every hidden layer then sees one block on
    each side, so the fully-connected count is the same as for a single
    hidden layer.

    ``layout="union"`` instead gives each hidden layer ``l`` its own top block
    in ``W_l`` and bottom block in ``W_{l+1}``, unioning blocks that share a
    matrix. For heavy masks this can make rows of an interior matrix
    structurally identical and leave residual symmetries (see
    ``residual_permutations``); it is kept for comparison only.

    If a hidden layer keeps more than one fully connected neuron the mask is
    still returned, with a warning recorded on it.
    """
    if scheme == "none":
        return LayerMask.empty(arch)
    if scheme not in ("light", "heavy"):
        raise ValueError(f"unknown structured scheme {scheme!r}")
    shapes = arch.weight_shapes
    mats = [np.zeros(s, dtype=bool) for s in shapes]
    if layout == "alternating":
        for k, shape in enumerate(shapes, start=1):
            m = min(shape[0] - 1, shape[1] - 1)
            mats[k - 1] = top_block(shape, m, scheme) if k % 2 else bottom_block(shape, m, scheme)
    elif layout == "union":
        d = arch.dims
        for layer in arch.hidden_layers:
            m_top = min(d[layer - 1] - 1, d[layer] - 1)
            m_bottom = min(d[layer] - 1, d[layer + 1] - 1)
            mats[layer - 1] |= top_block(shapes[layer - 1], m_top, scheme)
            mats[layer] |= bottom_block(shapes[layer], m_bottom, scheme)
    else:
        raise ValueError(f"unknown layout {layout!r}")
    notes = []
    for layer in arch.hidden_layers:
        fc = fully_connected_count(arch, layer)
        if fc > 1:
            msg = (f"hidden layer {layer} keeps {fc} fully connected neurons; "
                   "permutation symmetry is not fully removed")
            notes.append(msg)
            warnings.warn(msg, MaskWarning, stacklevel=2)
    return LayerMask(arch, mats, scheme, notes)


def count_fixed(mask: LayerMask) -> int:
    return int(sum(m.sum() for m in mask.matrices))


def generate_random_mask(arch: Architecture, n_fixed: int, rng: np.random.Generator) -> LayerMask:
    """Fix ``n_fixed`` weight positions drawn uniformly without replacement."""
    total = arch.n_weights
    if not 0 <= n_fixed <= total:
        raise ValueError(f"n_fixed must be in [0, {total}], got {n_fixed}")
    flat = np.zeros(total, dtype=bool)
    flat[rng.choice(total, size=n_fixed, replace=False)] = True
    mats, start = [], 0
    for r, c in arch.weight_shapes:
        mats.append(flat[start:start + r * c].reshape(r, c))
        start += r * c
    return LayerMask(arch, mats, "random")


# -- text format -------------------------------------------------------------

_HEADER = "# partialbnn mask v1"


def format_mask(mask: LayerMask) -> str:
    arch = mask.arch
    lines = [
        _HEADER,
        "dims " + " ".join(str(d) for d in arch.dims),
        "activations " + " ".join(arch.activations),
        f"bias {int(arch.bias)}",
        f"scheme {mask.scheme}",
    ]
    for layer in range(1, arch.n_layers + 1):
        coords = " ".join(f"({r},{c})" for r, c in mask.fixed_positions(layer))
        lines.append(f"W{layer}: {coords}".rstrip())
    return "\n".join(lines) + "\n"


def parse_mask(text: str) -> LayerMask:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise ValueError("not a partialbnn mask file")
    header = {}
    body = []
    for ln in lines[1:]:
        if ln.startswith("W"):
            body.append(ln)
        else:
            key, _, value = ln.partition(" ")
            header[key] = value.split()
    arch = Architecture(
        tuple(int(v) for v in header["dims"]),
        tuple(header["activations"]),
        bool(int(header.get("bias", ["1"])[0])),
    )
    mats = [np.zeros(s, dtype=bool) for s in arch.weight_shapes]
    for ln in body:
        name, _, coords = ln.partition(":")
        layer = int(name[1:])
        for r, c in re.findall(r"\((\d+),(\d+)\)", coords):
            mats[layer - 1][int(r) - 1, int(c) - 1] = True
    return LayerMask(arch, mats, header["scheme"][0])


def save_mask(mask: LayerMask, path) -> None:
    Path(path).write_text(format_mask(mask))


def load_mask(path) -> LayerMask:
    return parse_mask(Path(path).read_text())
