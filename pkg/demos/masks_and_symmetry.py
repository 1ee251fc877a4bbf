"""
Structured masks and the permutations they leave behind
=======================================================

Build light and heavy masks, look at their text form, then count the
hidden-unit permutations that survive each choice on a small network.
"""

import math
import warnings

from partialbnn.core_math import seeded_rng
from partialbnn.fixing import no_fixing, prune, signed_constant
from partialbnn.masks import (Architecture, MaskWarning, count_fixed, format_mask,
                              fully_connected_count, generate_mask)
from partialbnn.symmetry import residual_permutations

# the UCI-sized network: every hidden unit ends up with a fixed connection
arch = Architecture.mlp((8, 50, 50, 2), "tanh")
for scheme in ("light", "heavy"):
    mask = generate_mask(arch, scheme)
    print(f"{scheme:>5}: {count_fixed(mask)} of {arch.n_weights} weights fixed")
print("fully connected units per hidden layer:",
      [fully_connected_count(arch, l) for l in arch.hidden_layers])

# the file format is one line per weight matrix
print(format_mask(generate_mask(Architecture.mlp((2, 3, 2)), "light")))

# brute force on a narrow network
small = Architecture.mlp((3, 5, 5, 3), "tanh")
print("unconstrained:", [len(residual_permutations(no_fixing(small), l)) for l in small.hidden_layers],
      "=", math.factorial(5), "per layer")
for layout in ("alternating", "union"):
    mask = generate_mask(small, "heavy", layout=layout)
    counts = [len(residual_permutations(prune(mask), l)) for l in small.hidden_layers]
    print(f"heavy + prune, {layout} layout:", counts)

# +-c values keep the structure; only the identity remains
mask = generate_mask(small, "heavy")
signed = signed_constant(mask, 5.0, seeded_rng(0))
print("heavy + signed constant:", [len(residual_permutations(signed, l)) for l in small.hidden_layers])

# a wide (2,4,2) network breaks the inequality and keeps one swap
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always", MaskWarning)
    wide = generate_mask(Architecture.mlp((2, 4, 2)), "light")
print(caught[0].message)
print("light + prune on (2,4,2):", len(residual_permutations(prune(wide), 1)), "permutations")
