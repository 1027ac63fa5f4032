"""Tests for cyclic family construction and its group structure."""

import numpy as np
import pytest

from clusterperm.exceptions import DimensionError
from clusterperm.permgroup import (
    CyclicFamilySpec,
    _blockwise_shift,
    build_cyclic_family,
    build_two_way_group,
    composition_law_holds,
    default_num_perms,
    fixed_point_free,
    verify_group,
)


def _cycle_type(perm):
    n = perm.shape[0]
    seen = np.zeros(n, dtype=bool)
    lengths = []
    for start in range(n):
        if seen[start]:
            continue
        length, cur = 0, start
        while not seen[cur]:
            seen[cur] = True
            cur = perm[cur]
            length += 1
        lengths.append(length)
    return tuple(sorted(lengths))


class TestBlockwiseShift:
    def test_frozen_six_with_two_perms(self):
        # n = 6, K = 2, k = 1: 1-based images (2, 3, 1, 5, 6, 4)
        assert _blockwise_shift(6, 2, 1).tolist() == [1, 2, 0, 4, 5, 3]

    def test_frozen_six_second_member(self):
        # k = 2 is the square of k = 1: 1-based images (3, 1, 2, 6, 4, 5)
        assert _blockwise_shift(6, 2, 2).tolist() == [2, 0, 1, 5, 3, 4]

    def test_tail_is_fixed(self):
        # n = 7 leaves one index beyond the last complete block of 3
        assert _blockwise_shift(7, 2, 1).tolist() == [1, 2, 0, 4, 5, 3, 6]

    def test_short_vector_is_identity(self):
        # no complete block when n < K + 1
        assert _blockwise_shift(3, 4, 2).tolist() == [0, 1, 2]

    def test_members_are_powers_of_the_first(self):
        for n, num_perms in ((12, 3), (10, 4), (9, 2)):
            first = _blockwise_shift(n, num_perms, 1)
            power = np.arange(n)
            for k in range(1, num_perms + 1):
                power = first[power]
                assert np.array_equal(_blockwise_shift(n, num_perms, k), power)


class TestBuildCyclicFamily:
    def test_shape_and_identity_member(self):
        family = build_cyclic_family(10, 4, seed=0)
        assert family.shape == (5, 10)
        assert np.array_equal(family[0], np.arange(10))

    def test_members_are_bijections(self):
        family = build_cyclic_family(11, 3, seed=1)
        for member in family:
            assert np.array_equal(np.sort(member), np.arange(11))

    def test_conjugation_preserves_cycle_type(self):
        for seed in range(5):
            family = build_cyclic_family(12, 2, seed=seed)
            for k in (1, 2):
                raw = _blockwise_shift(12, 2, k)
                assert _cycle_type(family[k]) == _cycle_type(raw)

    def test_family_is_cyclic_in_k(self):
        family = build_cyclic_family(15, 4, seed=7)
        power = np.arange(15)
        for k in range(1, 5):
            power = family[1][power]
            assert np.array_equal(family[k], power)

    def test_seed_independent_structure(self):
        a = build_cyclic_family(20, 4, seed=0)
        b = build_cyclic_family(20, 4, seed=99)
        assert not np.array_equal(a[1], b[1])
        assert _cycle_type(a[1]) == _cycle_type(b[1])

    def test_spec_wrapper(self):
        spec = CyclicFamilySpec(n_indices=8, num_perms=3, seed=5)
        assert np.array_equal(spec.build(), build_cyclic_family(8, 3, 5))

    def test_validation(self):
        with pytest.raises(DimensionError):
            build_cyclic_family(0, 2, seed=0)
        with pytest.raises(DimensionError):
            build_cyclic_family(5, 0, seed=0)
        with pytest.raises(DimensionError):
            CyclicFamilySpec(n_indices=5, num_perms=0, seed=0)


class TestGroupStructure:
    @pytest.mark.parametrize("n,num_perms", [(6, 2), (8, 3), (12, 5), (7, 2), (30, 9)])
    def test_closure(self, n, num_perms):
        family = build_cyclic_family(n, num_perms, seed=n + num_perms)
        assert verify_group(family)

    @pytest.mark.parametrize("n,num_perms", [(6, 2), (12, 3), (30, 9), (25, 4)])
    def test_composition_law_exhaustive(self, n, num_perms):
        family = build_cyclic_family(n, num_perms, seed=3)
        assert composition_law_holds(family)

    def test_two_way_group_structure(self):
        family = build_two_way_group(6, 9, 2, seed=4)
        assert verify_group(family)
        assert composition_law_holds(family)
        assert family.num_perms == 2
        assert family[0].is_identity()

    def test_fixed_point_free_when_size_divides(self):
        family = build_cyclic_family(12, 3, seed=0)
        assert fixed_point_free(family)
        two_way = build_two_way_group(12, 8, 3, seed=0)
        assert fixed_point_free(two_way)

    def test_fixed_points_when_tail_exists(self):
        family = build_cyclic_family(13, 3, seed=0)
        assert not fixed_point_free(family)

    def test_broken_family_fails_closure(self):
        family = build_cyclic_family(8, 3, seed=0).copy()
        family[2] = np.roll(np.arange(8), 1)
        assert not verify_group(family)


class TestDefaultNumPerms:
    def test_divisor_within_range(self):
        # 25 is divisible by 25 in [20, 100] -> K = 24
        assert default_num_perms(25) == 24
        assert default_num_perms(50) == 49
        assert default_num_perms(100) == 99

    def test_two_extents(self):
        assert default_num_perms(40, 60) == 19
        assert default_num_perms(25, 50) == 24

    def test_prime_extent_divides_itself(self):
        assert default_num_perms(23) == 22

    def test_fallback(self):
        # no size in [20, 100] divides 19, nor both of 21 and 22
        assert default_num_perms(19) == 99
        assert default_num_perms(21, 22) == 99

    def test_validation(self):
        with pytest.raises(DimensionError):
            default_num_perms(0)
