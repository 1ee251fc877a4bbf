import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partialbnn.core_math import seeded_rng
from partialbnn.masks import (Architecture, LayerMask, MaskWarning, bottom_block, count_fixed,
                              format_mask, fully_connected_count, generate_mask,
                              generate_random_mask, load_mask, parse_mask, save_mask, top_block)

REFERENCE_LIGHT = {(1, 1), (2, 2), (3, 3), (4, 4)}
REFERENCE_HEAVY = {(1, 1), (1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4), (3, 3), (3, 4), (4, 4)}


def fixed_set(block):
    return {(int(r) + 1, int(c) + 1) for r, c in zip(*np.nonzero(block))}


def quiet_mask(arch, scheme, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaskWarning)
        return generate_mask(arch, scheme, **kw)


class TestFullyConnectedCount:
    @pytest.mark.parametrize("dims, layer, expected", [
        ((1, 50, 50, 1), 1, 1),
        ((1, 50, 50, 1), 2, 1),
        ((8, 50, 50, 2), 1, 0),
        ((8, 50, 50, 2), 2, 0),
        ((2, 4, 2), 1, 2),
    ])
    def test_values(self, dims, layer, expected):
        assert fully_connected_count(Architecture.mlp(dims), layer) == expected

    def test_non_hidden_index(self):
        with pytest.raises(IndexError):
            fully_connected_count(Architecture.mlp((2, 3, 2)), 2)


class TestBlocks:
    def test_reference_light(self):
        assert fixed_set(top_block((5, 7), 4, "light")) == REFERENCE_LIGHT

    def test_reference_heavy(self):
        assert fixed_set(top_block((5, 7), 4, "heavy")) == REFERENCE_HEAVY

    @pytest.mark.parametrize("m", range(0, 7))
    def test_heavy_triangle_count(self, m):
        block = top_block((7, 9), m, "heavy")
        brute = sum(1 for i, j in itertools.product(range(1, 8), range(1, 10)) if i <= j <= m)
        assert block.sum() == brute == m * (m + 1) // 2

    def test_bottom_is_rotation(self):
        top = top_block((5, 7), 4, "heavy")
        bottom = bottom_block((5, 7), 4, "heavy")
        assert fixed_set(bottom) == {(6 - i, 8 - j) for i, j in fixed_set(top)}


class TestGenerateMask:
    def test_single_hidden_light(self):
        mask = generate_mask(Architecture.mlp((2, 3, 2)), "light")
        assert mask.fixed_positions(1) == [(1, 1)]
        assert mask.fixed_positions(2) == [(3, 2)]

    def test_none_is_empty(self):
        assert count_fixed(generate_mask(Architecture.mlp((4, 5, 3)), "none")) == 0

    def test_deterministic(self):
        arch = Architecture.mlp((8, 50, 50, 2))
        assert generate_mask(arch, "heavy") == generate_mask(arch, "heavy")

    def test_alternating_layout(self):
        arch = Architecture.mlp((3, 5, 5, 3))
        mask = generate_mask(arch, "light")
        assert mask.fixed_positions(1) == [(1, 1), (2, 2)]
        assert mask.fixed_positions(2) == [(2, 2), (3, 3), (4, 4), (5, 5)]
        assert mask.fixed_positions(3) == [(1, 1), (2, 2)]

    @pytest.mark.parametrize("dims", [(8, 50, 50, 2), (1, 50, 50, 1), (3, 5, 5, 3), (2, 6, 4, 3, 2)])
    def test_block_counts(self, dims):
        arch = Architecture.mlp(dims)
        light, heavy = quiet_mask(arch, "light"), quiet_mask(arch, "heavy")
        for k, (r, c) in enumerate(arch.weight_shapes, start=1):
            m = min(r - 1, c - 1)
            assert light.matrices[k - 1].sum() == m
            assert heavy.matrices[k - 1].sum() == m * (m + 1) // 2

    @pytest.mark.parametrize("dims", [(8, 50, 50, 2), (2, 4, 2), (3, 6, 6, 3), (5, 7, 4)])
    def test_light_subset_of_heavy(self, dims):
        arch = Architecture.mlp(dims)
        light, heavy = quiet_mask(arch, "light"), quiet_mask(arch, "heavy")
        for a, b in zip(light.matrices, heavy.matrices):
            assert not np.any(a & ~b)

    def test_warning_when_inequality_fails(self):
        with pytest.warns(MaskWarning):
            mask = generate_mask(Architecture.mlp((2, 4, 2)), "light")
        assert mask.warnings

    def test_no_warning_when_inequality_holds(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", MaskWarning)
            assert not generate_mask(Architecture.mlp((8, 50, 50, 2)), "heavy").warnings

    def test_union_layout_shares_interior_matrix(self):
        arch = Architecture.mlp((3, 5, 5, 3))
        union = generate_mask(arch, "light", layout="union")
        assert union.fixed_positions(2) == [(i, i) for i in range(1, 6)]


class TestCountAndRandom:
    def test_empty(self):
        assert count_fixed(LayerMask.empty(Architecture.mlp((3, 4, 2)))) == 0

    def test_reference_heavy_count(self):
        arch = Architecture((5, 7), ("identity",))
        mask = LayerMask(arch, [top_block((5, 7), 4, "heavy")])
        assert count_fixed(mask) == 10

    def test_random_zero_and_full(self):
        arch = Architecture.mlp((3, 4, 2))
        assert count_fixed(generate_random_mask(arch, 0, seeded_rng(0))) == 0
        full = generate_random_mask(arch, arch.n_weights, seeded_rng(0))
        assert all(m.all() for m in full.matrices)

    def test_random_matches_heavy_count(self):
        arch = Architecture.mlp((8, 50, 50, 2))
        n = count_fixed(generate_mask(arch, "heavy"))
        assert count_fixed(generate_random_mask(arch, n, seeded_rng(1))) == n

    def test_random_too_many(self):
        arch = Architecture.mlp((3, 4, 2))
        with pytest.raises(ValueError):
            generate_random_mask(arch, arch.n_weights + 1, seeded_rng(0))

    def test_random_is_roughly_uniform(self):
        arch = Architecture.mlp((2, 3, 2))
        hits = np.zeros(arch.n_weights)
        for s in range(4000):
            m = generate_random_mask(arch, 3, seeded_rng(s))
            hits += np.concatenate([x.ravel() for x in m.matrices])
        expected = 4000 * 3 / arch.n_weights
        assert np.all(np.abs(hits - expected) < 5 * np.sqrt(expected))


class TestTextFormat:
    @given(st.sampled_from([(2, 3, 2), (3, 5, 5, 3), (8, 50, 50, 2)]),
           st.sampled_from(["light", "heavy", "none"]))
    @settings(max_examples=12, deadline=None)
    def test_round_trip(self, dims, scheme):
        mask = generate_mask(Architecture.mlp(dims), scheme)
        back = parse_mask(format_mask(mask))
        assert back == mask and back.scheme == scheme

    def test_file_round_trip(self, tmp_path):
        mask = generate_random_mask(Architecture.mlp((4, 6, 3), "sigmoid"), 7, seeded_rng(2))
        save_mask(mask, tmp_path / "m.txt")
        back = load_mask(tmp_path / "m.txt")
        assert back == mask and back.arch.activations == ("sigmoid", "identity")

    def test_layout_of_file(self):
        text = format_mask(generate_mask(Architecture.mlp((2, 3, 2)), "light"))
        assert "dims 2 3 2" in text
        assert "scheme light" in text
        assert "W1: (1,1)" in text and "W2: (3,2)" in text
