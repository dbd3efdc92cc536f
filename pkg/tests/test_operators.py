"""Measurement operators: oracles, adjoints, maps, cost accounting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import spcsim.operators as ops
from spcsim.imaging import Image, macro_upsample
from spcsim.operators import (SCHEME_BINARY01, SCHEME_RADEMACHER,
                              DenseOperator, GridSystem, MaskEnsemble,
                              StackedOperator, WalshSamplingMap,
                              WalshSubsetOperator, build_macro_mask_operator,
                              build_walsh_operator, cycle_cost,
                              default_level_fractions, design_sampling_map,
                              stack, stack_all, substream,
                              walsh_level_operator)
from spcsim.transforms import walsh2d


def _dense_matrix(op):
    """Columns of op.matvec on the native grid, as an explicit matrix."""
    side = op.window_side
    out = np.empty((op.rows, side * side))
    for i in range(side * side):
        e = np.zeros(side * side)
        e[i] = 1.0
        out[:, i] = op.matvec(e.reshape(side, side))
    return out


def _adjoint_gap(op, grid_side, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(grid_side, grid_side))
    y = rng.normal(size=op.rows)
    ax = op.matvec_grid(x, grid_side)
    aty = op.rmatvec_grid(y, grid_side)
    lhs = float(ax @ y)
    rhs = float((x * aty).sum())
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-30)


# --- substreams -------------------------------------------------------------

def test_substream_is_deterministic_and_tag_sensitive():
    a = substream(7, "x", 1).integers(0, 1 << 30, size=4)
    b = substream(7, "x", 1).integers(0, 1 << 30, size=4)
    c = substream(7, "x", 2).integers(0, 1 << 30, size=4)
    d = substream(8, "x", 1).integers(0, 1 << 30, size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


# --- mask ensembles ---------------------------------------------------------

class TestMaskEnsemble:
    def test_reproducible_bits(self):
        e1 = MaskEnsemble(16, 2, SCHEME_BINARY01, 9, seed=5)
        e2 = MaskEnsemble(16, 2, SCHEME_BINARY01, 9, seed=5)
        e3 = MaskEnsemble(16, 2, SCHEME_BINARY01, 9, seed=6)
        assert np.array_equal(e1.packed, e2.packed)
        assert not np.array_equal(e1.packed, e3.packed)

    def test_tail_bits_cleared(self):
        e = MaskEnsemble(8, 4, SCHEME_BINARY01, 100, seed=0)  # 4 cells
        assert e.cells == 4
        assert np.all(e.packed & 0xF0 == 0)

    def test_values_match_scheme(self):
        e = MaskEnsemble(8, 2, SCHEME_BINARY01, 20, seed=1)
        assert set(np.unique(e.values())) <= {0.0, 1.0}
        r = MaskEnsemble(8, 2, SCHEME_RADEMACHER, 20, seed=1)
        assert set(np.unique(r.values())) <= {-1.0, 1.0}
        # the scheme is part of the stream identity, so the bit patterns
        # of the two schemes are independent draws
        assert not np.array_equal((r.values() + 1) / 2, e.values())

    def test_validation(self):
        with pytest.raises(ValueError):
            MaskEnsemble(8, 3, SCHEME_BINARY01, 4, 0)
        with pytest.raises(ValueError):
            MaskEnsemble(8, 2, "Gaussian", 4, 0)
        with pytest.raises(ValueError):
            MaskEnsemble(8, 2, SCHEME_BINARY01, 0, 0)

    def test_capacity_cap(self):
        with pytest.raises(ValueError):
            MaskEnsemble(4096, 1, SCHEME_BINARY01, 200_000, 0)


# --- macro mask operators ---------------------------------------------------

class TestMacroMaskOperator:
    def test_matvec_matches_explicit_matrix(self):
        op = build_macro_mask_operator(8, 2, SCHEME_BINARY01, 5, seed=3)
        vals = op.ensemble.values()
        side, g = 8, 4
        M = np.zeros((5, side * side))
        for r in range(5):
            for i in range(side):
                for j in range(side):
                    M[r, i * side + j] = vals[r, (i // 2) * g + (j // 2)]
        M *= op.column_scale
        rng = np.random.default_rng(0)
        x = rng.normal(size=(side, side))
        assert np.allclose(op.matvec(x), M @ x.ravel(), atol=1e-12)
        y = rng.normal(size=5)
        assert np.allclose(op.rmatvec(y).ravel(), M.T @ y, atol=1e-12)

    def test_column_scales(self):
        b = build_macro_mask_operator(16, 2, SCHEME_BINARY01, 40, seed=0)
        r = build_macro_mask_operator(16, 2, SCHEME_RADEMACHER, 40, seed=0)
        assert b.column_scale == pytest.approx(np.sqrt(2.0 / 40))
        assert r.column_scale == pytest.approx(np.sqrt(1.0 / 40))
        # expected squared column norm is one; check the empirical mean
        for op in (b, r):
            M = _dense_matrix(op)
            assert float((M * M).sum(axis=0).mean()) == pytest.approx(1.0, rel=0.15)

    def test_solve_grid_composition_matches_lift(self):
        op = build_macro_mask_operator(16, 4, SCHEME_RADEMACHER, 7, seed=2)
        rng = np.random.default_rng(1)
        for g in (4, 8, 16):
            xg = rng.normal(size=(g, g))
            lifted = macro_upsample(Image(xg), 16 // g)
            direct = op.matvec(lifted.data)
            composed = op.matvec_grid(xg, g)
            assert np.allclose(composed, direct, atol=1e-10)
            assert op.grid_gain(g) == pytest.approx((16 // g) ** 2)

    def test_adjoint_on_all_grids(self):
        op = build_macro_mask_operator(16, 4, SCHEME_BINARY01, 11, seed=4)
        for g in (4, 8, 16):
            assert _adjoint_gap(op, g) <= 1e-12

    def test_grid_coarser_than_masks_rejected(self):
        op = build_macro_mask_operator(16, 4, SCHEME_BINARY01, 3, seed=0)
        with pytest.raises(ValueError):
            op.matvec_grid(np.zeros((2, 2)), 2)
        with pytest.raises(ValueError):
            op.matvec_grid(np.zeros((5, 5)), 5)

    def test_packed_path_agrees_with_dense(self, monkeypatch):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(16, 16))
        y = rng.normal(size=13)
        results = {}
        for label, cap in (("dense", ops.DENSE_VALUE_CACHE_MAX), ("packed", 0)):
            monkeypatch.setattr(ops, "DENSE_VALUE_CACHE_MAX", cap)
            for scheme in (SCHEME_BINARY01, SCHEME_RADEMACHER):
                op = build_macro_mask_operator(16, 2, scheme, 13, seed=6)
                assert op.ensemble.has_dense == (label == "dense")
                results[label, scheme, "f"] = op.matvec(x)
                results[label, scheme, "a"] = op.rmatvec(y)
        for scheme in (SCHEME_BINARY01, SCHEME_RADEMACHER):
            for kind in ("f", "a"):
                assert np.allclose(results["dense", scheme, kind],
                                   results["packed", scheme, kind], atol=1e-10)

    @settings(deadline=None, max_examples=25)
    @given(st.sampled_from([(8, 1), (8, 2), (16, 4), (32, 8)]),
           st.sampled_from([SCHEME_BINARY01, SCHEME_RADEMACHER]),
           st.integers(1, 20), st.integers(0, 2 ** 16))
    def test_adjoint_property(self, dims, scheme, rows, seed):
        side, macro = dims
        op = build_macro_mask_operator(side, macro, scheme, rows, seed)
        assert _adjoint_gap(op, side, seed) <= 1e-12


# --- Walsh subset operators -------------------------------------------------

class TestWalshSubsetOperator:
    def test_matvec_picks_scaled_coefficients(self):
        idx = [(0, 0), (1, 3), (7, 7), (2, 5)]
        op = WalshSubsetOperator(8, idx)
        rng = np.random.default_rng(0)
        x = rng.normal(size=(8, 8))
        c = walsh2d(x)
        expect = op.column_scale * np.array([c[u, v] for u, v in idx])
        assert np.allclose(op.matvec(x), expect, atol=1e-12)
        assert op.column_scale == pytest.approx(np.sqrt(64 / 4))

    def test_adjoint(self):
        idx = [(0, 0), (3, 1), (2, 2)]
        op = WalshSubsetOperator(8, idx)
        assert _adjoint_gap(op, 8) <= 1e-12

    def test_full_selection_is_orthogonal(self):
        side = 4
        idx = [(u, v) for u in range(side) for v in range(side)]
        op = WalshSubsetOperator(side, idx)
        rng = np.random.default_rng(1)
        x = rng.normal(size=(side, side))
        back = op.rmatvec(op.matvec(x)) / op.column_scale ** 2
        assert np.allclose(back, x, atol=1e-12)

    def test_native_resolution_only(self):
        op = WalshSubsetOperator(8, [(0, 0)])
        with pytest.raises(ValueError):
            op.matvec_grid(np.zeros((4, 4)), 4)

    def test_validation(self):
        with pytest.raises(ValueError):
            WalshSubsetOperator(8, np.empty((0, 2)))
        with pytest.raises(ValueError):
            WalshSubsetOperator(8, [(0, 8)])
        with pytest.raises(ValueError):
            WalshSubsetOperator(8, [(-1, 0)])


def test_walsh_level_operator_blocks_match_full_map():
    smap = design_sampling_map(16, 64, seed=3)
    full = build_walsh_operator(smap)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(16, 16))
    y_full = full.matvec(x) / full.column_scale
    lo, mi, hi = smap.level_slices()
    for levels, sl in ((("low",), lo), (("mid",), mi), (("high",), hi)):
        if smap.counts[("low", "mid", "high").index(levels[0])] == 0:
            continue
        part = walsh_level_operator(smap, levels)
        assert np.allclose(part.matvec(x) / part.column_scale, y_full[sl],
                           atol=1e-12)
    union = walsh_level_operator(smap, ("low", "mid", "high"))
    assert np.allclose(union.matvec(x) / union.column_scale, y_full,
                       atol=1e-12)
    assert union.rows == smap.rows


def test_walsh_level_operator_validation():
    smap = design_sampling_map(16, 20, seed=0)
    with pytest.raises(ValueError):
        walsh_level_operator(smap, ("ultra",))
    empty = WalshSamplingMap(8, 2, 4,
                             [(0, 0), (0, 1), (1, 0), (1, 1)],
                             [(2, 2)], np.empty((0, 2)))
    with pytest.raises(ValueError):
        walsh_level_operator(empty, ("high",))


# --- stacking ---------------------------------------------------------------

class TestStacking:
    def test_forward_concatenates_adjoint_sums(self):
        a = build_macro_mask_operator(8, 2, SCHEME_BINARY01, 4, seed=0)
        b = build_macro_mask_operator(8, 1, SCHEME_RADEMACHER, 3, seed=1)
        s = stack(a, b)
        assert s.rows == 7
        rng = np.random.default_rng(0)
        x = rng.normal(size=(8, 8))
        assert np.allclose(s.matvec(x),
                           np.concatenate([a.matvec(x), b.matvec(x)]))
        y = rng.normal(size=7)
        assert np.allclose(s.rmatvec(y),
                           a.rmatvec(y[:4]) + b.rmatvec(y[4:]))
        assert _adjoint_gap(s, 8) <= 1e-12

    def test_stack_flattens_nested(self):
        a = build_macro_mask_operator(8, 2, SCHEME_BINARY01, 2, seed=0)
        b = build_macro_mask_operator(8, 2, SCHEME_BINARY01, 3, seed=1)
        c = build_macro_mask_operator(8, 2, SCHEME_BINARY01, 5, seed=2)
        s = stack(stack(a, b), c)
        assert len(s.parts) == 3
        s2 = stack_all([a, stack(b, c)])
        assert len(s2.parts) == 3
        assert s2.rows == 10

    def test_gram_of_stack_is_sum_of_grams(self):
        # the identity the refinement analysis rests on, checked densely
        rng = np.random.default_rng(3)
        A = DenseOperator(rng.normal(size=(6, 256)))
        B = DenseOperator(rng.normal(size=(4, 256)))
        S = stack(A, B)
        x = rng.normal(size=(16, 16))
        lhs = S.rmatvec(S.matvec(x))
        rhs = A.rmatvec(A.matvec(x)) + B.rmatvec(B.matvec(x))
        denom = max(float(np.abs(rhs).max()), 1e-30)
        assert float(np.abs(lhs - rhs).max()) / denom <= 1e-10

    def test_dimension_mismatch_rejected(self):
        a = build_macro_mask_operator(8, 2, SCHEME_BINARY01, 2, seed=0)
        b = build_macro_mask_operator(16, 2, SCHEME_BINARY01, 2, seed=0)
        with pytest.raises(ValueError):
            stack(a, b)
        with pytest.raises(ValueError):
            StackedOperator([])

    def test_mixed_kind_stack_adjoint(self):
        a = build_macro_mask_operator(16, 2, SCHEME_BINARY01, 6, seed=0)
        w = WalshSubsetOperator(16, [(0, 0), (1, 1), (5, 3)])
        s = stack(a, w)
        assert _adjoint_gap(s, 16) <= 1e-12


# --- dense operators --------------------------------------------------------

class TestDenseOperator:
    def test_square_shape_inferred(self):
        op = DenseOperator(np.eye(16))
        assert op.x_shape == (4, 4)
        with pytest.raises(ValueError):
            DenseOperator(np.zeros((2, 12)))

    def test_explicit_shape_and_scale(self):
        op = DenseOperator(np.ones((2, 6)), x_shape=(6,), column_scale=0.5)
        out = op.matvec(np.arange(6.0))
        assert np.allclose(out, [7.5, 7.5])
        back = op.rmatvec(np.array([1.0, 1.0]))
        assert back.shape == (6,)
        assert np.allclose(back, 1.0)

    def test_native_only(self):
        op = DenseOperator(np.eye(16))
        with pytest.raises(ValueError):
            op.matvec_grid(np.zeros((2, 2)), 2)


# --- cost accounting --------------------------------------------------------

def test_cycle_cost_by_scheme():
    b = build_macro_mask_operator(8, 2, SCHEME_BINARY01, 10, seed=0)
    r = build_macro_mask_operator(8, 2, SCHEME_RADEMACHER, 10, seed=0)
    w = WalshSubsetOperator(8, [(0, 0), (1, 2)])
    d = DenseOperator(np.eye(16))
    assert cycle_cost(b) == (10, 10)
    assert cycle_cost(r) == (10, 20)
    assert cycle_cost(w) == (2, 4)
    assert cycle_cost(d) == (16, 16)
    assert cycle_cost(stack(b, r)) == (20, 30)


# --- sampling maps ----------------------------------------------------------

class TestSamplingMapDesign:
    def test_budget_is_spent_exactly(self):
        for side, budget in ((32, 204), (64, 819), (128, 3276), (16, 50)):
            smap = design_sampling_map(side, budget)
            assert smap.rows == budget
            assert sum(smap.counts) == budget

    def test_low_level_is_a_full_square(self):
        smap = design_sampling_map(64, 819)
        n_low = smap.counts[0]
        assert n_low == smap.s_low ** 2
        assert smap.s_mid == min(2 * smap.s_low, 64)
        # every index with max(u,v) < s_low is selected exactly once
        low = {(int(u), int(v)) for u, v in smap.low_indices}
        assert low == {(u, v) for u in range(smap.s_low)
                       for v in range(smap.s_low)}

    def test_levels_live_in_their_regions(self):
        smap = design_sampling_map(32, 204, seed=9)
        assert np.all(smap.low_indices.max(axis=1) < smap.s_low)
        mids = smap.mid_indices.max(axis=1)
        assert np.all((mids >= smap.s_low) & (mids < smap.s_mid))
        assert np.all(smap.high_indices.max(axis=1) >= smap.s_mid)

    def test_seed_changes_random_levels_only(self):
        a = design_sampling_map(32, 204, seed=1)
        b = design_sampling_map(32, 204, seed=2)
        assert np.array_equal(a.low_indices, b.low_indices)
        assert not np.array_equal(a.mid_indices, b.mid_indices)
        c = design_sampling_map(32, 204, seed=1)
        assert np.array_equal(a.mid_indices, c.mid_indices)
        assert np.array_equal(a.high_indices, c.high_indices)

    def test_fraction_validation(self):
        with pytest.raises(ValueError):
            design_sampling_map(32, 100, (0.5, 0.6, -0.1))
        with pytest.raises(ValueError):
            design_sampling_map(32, 100, (0.5, 0.2, 0.2))
        with pytest.raises(ValueError):
            design_sampling_map(32, 2000)
        with pytest.raises(ValueError):
            design_sampling_map(32, 0)
        with pytest.raises(ValueError):
            design_sampling_map(24, 100)

    def test_two_fractions_imply_the_third(self):
        a = design_sampling_map(32, 100, (0.6, 0.3))
        b = design_sampling_map(32, 100, (0.6, 0.3, 0.1))
        assert np.array_equal(a.selected_indices(), b.selected_indices())

    def test_full_budget_low_only(self):
        smap = design_sampling_map(8, 64, (1.0, 0.0, 0.0))
        assert smap.counts == (64, 0, 0)
        assert smap.s_low == 8

    def test_default_fractions_table(self):
        assert default_level_fractions(128) == (0.63, 0.2104, 0.1596)
        assert default_level_fractions(64) == (0.85, 0.097, 0.053)
        assert default_level_fractions(32) == (0.65, 0.33, 0.02)
        assert default_level_fractions(16) == (0.7, 0.2, 0.1)


class TestSamplingMapType:
    def test_json_round_trip(self):
        smap = design_sampling_map(32, 204, seed=4)
        back = WalshSamplingMap.from_json(smap.to_json())
        assert back.window_side == smap.window_side
        assert back.level_bounds == smap.level_bounds
        assert back.counts == smap.counts
        assert (sorted(map(tuple, back.selected_indices()))
                == sorted(map(tuple, smap.selected_indices())))

    def test_level_slices_partition_rows(self):
        smap = design_sampling_map(32, 204, seed=4)
        lo, mi, hi = smap.level_slices()
        assert (lo.stop - lo.start, mi.stop - mi.start,
                hi.stop - hi.start) == smap.counts
        assert lo.start == 0 and hi.stop == smap.rows

    def test_misplaced_indices_rejected(self):
        with pytest.raises(ValueError):
            WalshSamplingMap(8, 2, 4, [(0, 0), (3, 3)], np.empty((0, 2)),
                             np.empty((0, 2)))
        with pytest.raises(ValueError):
            WalshSamplingMap(8, 2, 4, [(0, 0)], [(1, 1)], np.empty((0, 2)))

    def test_duplicates_and_missing_dc_rejected(self):
        with pytest.raises(ValueError):
            WalshSamplingMap(8, 2, 4, [(0, 0), (0, 0)], np.empty((0, 2)),
                             np.empty((0, 2)))
        with pytest.raises(ValueError):
            WalshSamplingMap(8, 2, 4, [(0, 1), (1, 0)], np.empty((0, 2)),
                             np.empty((0, 2)))

    def test_from_json_checks_counts(self):
        smap = design_sampling_map(16, 30, seed=0)
        import json
        doc = json.loads(smap.to_json())
        doc["counts"][0] += 1
        with pytest.raises(ValueError):
            WalshSamplingMap.from_json(json.dumps(doc))


# --- grid systems -----------------------------------------------------------

class TestGridSystem:
    def test_kappa_and_scaling(self):
        a = build_macro_mask_operator(16, 4, SCHEME_BINARY01, 5, seed=0)
        b = build_macro_mask_operator(16, 8, SCHEME_BINARY01, 3, seed=1)
        ya = np.ones(5)
        yb = np.ones(3)
        sys_ = GridSystem([(a, ya), (b, yb)], 8)
        expect = np.sqrt(a.grid_gain(8) ** 2 + b.grid_gain(8) ** 2)
        assert sys_.kappa == pytest.approx(expect)
        assert np.array_equal(sys_.y, np.ones(8))
        rng = np.random.default_rng(0)
        z = rng.normal(size=(8, 8))
        direct = np.concatenate([a.matvec_grid(z, 8), b.matvec_grid(z, 8)])
        assert np.allclose(sys_.matvec(z), direct / sys_.kappa)
        assert np.allclose(sys_.image_from(z), z / sys_.kappa)

    def test_system_adjoint(self):
        a = build_macro_mask_operator(16, 2, SCHEME_RADEMACHER, 6, seed=2)
        b = build_macro_mask_operator(16, 4, SCHEME_BINARY01, 4, seed=3)
        sys_ = GridSystem([(a, np.zeros(6)), (b, np.zeros(4))], 16)
        rng = np.random.default_rng(1)
        x = rng.normal(size=(16, 16))
        y = rng.normal(size=10)
        lhs = float(sys_.matvec(x) @ y)
        rhs = float((x * sys_.rmatvec(y)).sum())
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))

    def test_normalized_columns_have_unit_gain(self):
        op = build_macro_mask_operator(16, 4, SCHEME_BINARY01, 8, seed=4)
        sys_ = GridSystem([(op, np.zeros(8))], 4)
        # kappa folds the lift gain back out, so the composed system has
        # expected unit column norms on the solve grid
        M = np.empty((8, 16))
        for i in range(16):
            e = np.zeros(16)
            e[i] = 1.0
            M[:, i] = sys_.matvec(e.reshape(4, 4))
        assert float((M * M).sum(axis=0).mean()) == pytest.approx(1.0, rel=0.2)

    def test_validation(self):
        op = build_macro_mask_operator(16, 4, SCHEME_BINARY01, 8, seed=4)
        with pytest.raises(ValueError):
            GridSystem([], 4)
        with pytest.raises(ValueError):
            GridSystem([(op, np.zeros(7))], 4)
        other = build_macro_mask_operator(8, 4, SCHEME_BINARY01, 8, seed=4)
        with pytest.raises(ValueError):
            GridSystem([(op, np.zeros(8)), (other, np.zeros(8))], 4)
