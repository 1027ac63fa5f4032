"""Tests for the dyadic data model: stacking, permutations, diagnostics."""

import numpy as np
import pytest

from clusterperm.exceptions import (
    DegenerateInputError,
    DimensionError,
    MissingDataError,
)
from clusterperm.model import (
    DyadArray,
    PermutationFamily,
    StackedDesign,
    TwoWayPermutation,
    apply_two_way,
    compose,
    effective_variance,
    row_index,
    stack,
    stacked_position,
    unstack,
)


def _grid_array(n_rows=3, n_cols=4, d_dim=1, p=2, seed=0):
    rng = np.random.default_rng(seed)
    return DyadArray(
        y=rng.standard_normal((n_rows, n_cols)),
        d=rng.standard_normal((n_rows, n_cols, d_dim)),
        x=rng.standard_normal((n_rows, n_cols, p)),
    )


class TestRowIndex:
    def test_two_by_two_corner(self):
        # cell (2, 1) of a 2-column grid lands at stacked row 3
        assert row_index(2, 1, 2) == 3

    def test_first_cell(self):
        assert row_index(1, 1, 5) == 1

    def test_general_formula(self):
        for n_cols in (1, 2, 7):
            for i in range(1, 4):
                for j in range(1, n_cols + 1):
                    assert row_index(i, j, n_cols) == (i - 1) * n_cols + j

    def test_zero_based_counterpart(self):
        assert stacked_position(0, 0, 4) == 0
        assert stacked_position(2, 3, 4) == 11

    def test_out_of_range(self):
        with pytest.raises(DimensionError):
            row_index(1, 3, 2)
        with pytest.raises(DimensionError):
            row_index(0, 1, 2)


class TestStacking:
    def test_frozen_three_by_three_order(self):
        # y_ij = 10 i + j stacks to (11, 12, 13, 21, 22, 23, 31, 32, 33)
        grid = np.array([[10 * i + j for j in (1, 2, 3)] for i in (1, 2, 3)], dtype=float)
        array = DyadArray(y=grid, d=np.ones((3, 3, 1)), x=np.ones((3, 3, 1)))
        expected = np.array([11, 12, 13, 21, 22, 23, 31, 32, 33], dtype=float)
        assert np.array_equal(stack(array, "outcome"), expected)

    def test_round_trip_all_fields(self):
        array = _grid_array(4, 5, d_dim=2, p=3, seed=1)
        assert np.array_equal(unstack(stack(array, "outcome"), 4, 5), array.y)
        assert np.array_equal(unstack(stack(array, "treatment"), 4, 5), array.d)
        assert np.array_equal(unstack(stack(array, "covariates"), 4, 5), array.x)

    def test_incomplete_array_refuses_to_stack(self):
        observed = np.ones((3, 4), dtype=bool)
        observed[1, 2] = False
        array = DyadArray(
            y=np.zeros((3, 4)), d=np.zeros((3, 4, 1)), x=np.zeros((3, 4, 1)),
            observed=observed,
        )
        with pytest.raises(MissingDataError):
            stack(array, "outcome")

    def test_unstack_length_check(self):
        with pytest.raises(DimensionError):
            unstack(np.zeros(7), 2, 3)

    def test_stacked_design(self):
        array = _grid_array(3, 3, seed=2)
        design = StackedDesign.from_array(array)
        assert design.n == 9
        assert design.y.shape == (9,)
        assert design.d.shape == (9, 1)
        assert design.x.shape == (9, 2)


class TestDyadArray:
    def test_two_d_treatment_promoted(self):
        array = DyadArray(y=np.zeros((2, 2)), d=np.ones((2, 2)), x=np.ones((2, 2)))
        assert array.d.shape == (2, 2, 1)
        assert array.x.shape == (2, 2, 1)
        assert array.d_dim == 1 and array.p == 1

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            DyadArray(y=np.zeros((2, 2)), d=np.ones((3, 2, 1)), x=np.ones((2, 2, 1)))

    def test_default_observed_is_complete(self):
        array = _grid_array()
        assert array.is_complete()
        assert array.n_cells == 12


class TestTwoWayPermutation:
    def test_identity_stacked_is_arange(self):
        perm = TwoWayPermutation.identity(3, 4)
        assert perm.is_identity()
        assert np.array_equal(perm.stacked(), np.arange(12))

    def test_stacked_source_map(self):
        # pi swaps the two rows, sigma reverses three columns
        perm = TwoWayPermutation(pi=[1, 0], sigma=[2, 1, 0])
        values = np.arange(6, dtype=float)
        moved = apply_two_way(values, perm)
        # cell (0, 0) reads from (pi(0), sigma(0)) = (1, 2), stacked row 5
        assert moved[0] == values[5]
        assert np.array_equal(np.sort(moved), values)

    def test_rejects_non_bijection(self):
        with pytest.raises(DimensionError):
            TwoWayPermutation(pi=[0, 0], sigma=[0, 1])
        with pytest.raises(DimensionError):
            TwoWayPermutation(pi=[0, 2], sigma=[0, 1])

    def test_compose_action_law(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            g = TwoWayPermutation(rng.permutation(4), rng.permutation(5))
            h = TwoWayPermutation(rng.permutation(4), rng.permutation(5))
            values = rng.standard_normal(20)
            via_compose = apply_two_way(values, compose(g, h))
            stepwise = apply_two_way(apply_two_way(values, g), h)
            assert np.array_equal(via_compose, stepwise)

    def test_apply_preserves_multiset(self):
        rng = np.random.default_rng(4)
        perm = TwoWayPermutation(rng.permutation(6), rng.permutation(3))
        values = rng.standard_normal(18)
        assert np.array_equal(np.sort(apply_two_way(values, perm)), np.sort(values))

    def test_apply_checks_length(self):
        perm = TwoWayPermutation.identity(2, 3)
        with pytest.raises(DimensionError):
            apply_two_way(np.zeros(5), perm)


class TestPermutationFamily:
    def test_member_zero_must_be_identity(self):
        swap = TwoWayPermutation(pi=[1, 0], sigma=[0, 1])
        with pytest.raises(DimensionError):
            PermutationFamily((swap,))

    def test_stacked_shape(self):
        identity = TwoWayPermutation.identity(2, 3)
        swap = TwoWayPermutation(pi=[1, 0], sigma=[1, 2, 0])
        family = PermutationFamily((identity, swap))
        stacked = family.stacked()
        assert stacked.shape == (2, 6)
        assert np.array_equal(stacked[0], np.arange(6))
        assert family.num_perms == 1

    def test_mixed_grids_rejected(self):
        with pytest.raises(DimensionError):
            PermutationFamily(
                (TwoWayPermutation.identity(2, 3), TwoWayPermutation.identity(3, 2))
            )


class TestEffectiveVariance:
    def test_frozen_node_example(self):
        # population variance of (0, 2) is 1; node level scales by n = 2
        assert effective_variance([0.0, 2.0], "node", 2) == pytest.approx(2.0)

    def test_dyad_is_n_times_node(self):
        rng = np.random.default_rng(5)
        values = rng.standard_normal(40)
        for n in (2, 7, 25):
            node = effective_variance(values, "node", n)
            dyad = effective_variance(values, "dyad", n)
            assert dyad == pytest.approx(n * node)

    def test_needs_two_values(self):
        with pytest.raises(DegenerateInputError):
            effective_variance([1.0], "node", 2)

    def test_unknown_level(self):
        with pytest.raises(ValueError):
            effective_variance([0.0, 1.0], "edge", 2)
