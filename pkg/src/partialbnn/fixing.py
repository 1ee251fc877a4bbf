"""Fixing policies: what value each masked weight is held at."""

from __future__ import annotations

import numpy as np

from .masks import Architecture, LayerMask
from .network import FixedAssignment


def no_fixing(arch: Architecture) -> FixedAssignment:
    mask = LayerMask.empty(arch)
    return FixedAssignment(mask, "none", [np.zeros(s) for s in arch.weight_shapes])


def prune(mask: LayerMask) -> FixedAssignment:
    return FixedAssignment(mask, "prune", [np.zeros(m.shape) for m in mask.matrices])


def signed_constant(mask: LayerMask, c: float, rng: np.random.Generator,
                    learn_c: bool = False) -> FixedAssignment:
    """Hold each fixed weight at ``+c`` or ``-c`` with equal probability.

    The sign pattern is drawn once here and never redrawn; only ``c`` may
    change afterwards (when ``learn_c`` is set).
    """
    signs = []
    for m in mask.matrices:
        s = np.where(rng.random(m.shape) < 0.5, -1.0, 1.0)
        signs.append(np.where(m, s, 0.0))
    values = [s * c for s in signs]
    return FixedAssignment(mask, "signed_constant", values, signs, float(c), learn_c)


def from_values(mask: LayerMask, source_weights: list[np.ndarray]) -> FixedAssignment:
    """Hold each fixed weight at the matching entry of ``source_weights``."""
    shapes = [np.shape(w) for w in source_weights]
    if shapes != [m.shape for m in mask.matrices]:
        raise ValueError(f"weight shapes {shapes} do not match the mask")
    return FixedAssignment(mask, "map", [np.array(w, dtype=np.float64) for w in source_weights])
