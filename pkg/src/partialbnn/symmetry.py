"""Brute-force check of which hidden-neuron permutations survive fixing.

Permuting the neurons of hidden layer ``l`` by ``perm`` reorders the columns
of ``W_l``, the entries of ``b_l`` and the rows of ``W_{l+1}``; the network
function is unchanged. A permutation is *residual* for a fixed assignment
when it maps the fixed entries (positions and values) of both matrices onto
themselves, i.e. the variational problem still contains that symmetry.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core_math import ShapeError
from .network import FixedAssignment, MlpParams, forward

MAX_ENUMERATION_WIDTH = 8


class EnumerationBoundError(ValueError):
    pass


@dataclass(frozen=True)
class Permutation:
    layer: int
    mapping: tuple[int, ...]  # 0-based: new position k takes old neuron mapping[k]

    def __post_init__(self):
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ValueError(f"{self.mapping} is not a permutation")

    @property
    def is_identity(self) -> bool:
        return self.mapping == tuple(range(len(self.mapping)))

    def compose(self, other: "Permutation") -> "Permutation":
        """Apply ``other`` first, then ``self``."""
        return Permutation(self.layer, tuple(other.mapping[k] for k in self.mapping))


def permute_hidden(params: MlpParams, perm: Permutation, permute_next: bool = True) -> MlpParams:
    """Reorder hidden layer ``perm.layer``; ``permute_next=False`` skips ``W_{l+1}``."""
    layer = perm.layer
    if layer not in params.arch.hidden_layers:
        raise ShapeError(f"layer {layer} is not hidden")
    if len(perm.mapping) != params.arch.dims[layer]:
        raise ShapeError("permutation length does not match the layer width")
    p = np.asarray(perm.mapping)
    out = params.copy()
    out.weights[layer - 1] = out.weights[layer - 1][..., :, p]
    out.biases[layer - 1] = out.biases[layer - 1][..., p]
    if permute_next:
        out.weights[layer] = out.weights[layer][..., p, :]
    return out


def functional_equivalence_check(params: MlpParams, perm: Permutation,
                                 probe_inputs: np.ndarray, tol: float = 1e-9) -> bool:
    before = forward(params, probe_inputs)
    after = forward(permute_hidden(params, perm), probe_inputs)
    return bool(np.max(np.abs(before - after)) <= tol)


def _invariant(mask: np.ndarray, values: np.ndarray, permuted_mask: np.ndarray,
               permuted_values: np.ndarray, tol: float) -> bool:
    if not np.array_equal(mask, permuted_mask):
        return False
    return bool(np.all(np.abs(values[mask] - permuted_values[mask]) <= tol))


def residual_permutations(assignment: FixedAssignment, layer: int,
                          tol: float = 1e-12) -> list[Permutation]:
    arch = assignment.arch
    if layer not in arch.hidden_layers:
        raise IndexError(f"layer {layer} is not a hidden layer of {arch.dims}")
    width = arch.dims[layer]
    if width > MAX_ENUMERATION_WIDTH:
        raise EnumerationBoundError(
            f"layer {layer} has {width} neurons; enumeration is capped at {MAX_ENUMERATION_WIDTH}")
    m_in = assignment.mask.matrices[layer - 1]
    v_in = assignment.values[layer - 1]
    m_out = assignment.mask.matrices[layer]
    v_out = assignment.values[layer]
    found = []
    for mapping in itertools.permutations(range(width)):
        p = list(mapping)
        if not _invariant(m_in, v_in, m_in[:, p], v_in[:, p], tol):
            continue
        if not _invariant(m_out, v_out, m_out[p, :], v_out[p, :], tol):
            continue
        found.append(Permutation(layer, tuple(mapping)))
    return found
