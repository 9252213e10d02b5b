import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monarchcim.crossbar import (
    ActivationMask,
    ADCConfig,
    CrossbarArray,
    adc_convert,
    full_mask,
    mvm_step,
    program_array,
)


class TestProgram:
    def test_empty_placement_list(self):
        arr = program_array(CrossbarArray(4), [])
        assert not arr.cells.any()

    def test_single_cell(self):
        arr = program_array(CrossbarArray(4), [(0, 0, 3.5)])
        e0 = np.zeros(4)
        e0[0] = 1.0
        out = mvm_step(arr, e0, full_mask(4))
        np.testing.assert_array_equal(out, [3.5, 0.0, 0.0, 0.0])

    def test_full_random_matches_dense(self):
        rng = np.random.default_rng(0)
        w = rng.standard_normal((4, 4))
        arr = program_array(
            CrossbarArray(4),
            [(r, c, w[r, c]) for r in range(4) for c in range(4)],
        )
        x = rng.standard_normal(4)
        np.testing.assert_allclose(mvm_step(arr, x, full_mask(4)), w.T @ x, rtol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            program_array(CrossbarArray(4), [(4, 0, 1.0)])

    def test_duplicate_cell(self):
        with pytest.raises(ValueError):
            program_array(CrossbarArray(4), [(1, 1, 1.0), (1, 1, 2.0)])


class TestMvmStep:
    def test_single_row_mask(self):
        rng = np.random.default_rng(1)
        arr = CrossbarArray(4)
        arr.cells[:] = rng.standard_normal((4, 4))
        x = rng.standard_normal(4)
        out = mvm_step(arr, x, ActivationMask([0], np.arange(4)))
        np.testing.assert_allclose(out, x[0] * arr.cells[0])

    def test_disjoint_masks_superpose(self):
        rng = np.random.default_rng(2)
        arr = CrossbarArray(6)
        arr.cells[:] = rng.standard_normal((6, 6))
        x = rng.standard_normal(6)
        full = mvm_step(arr, x, full_mask(6))
        a = mvm_step(arr, x, ActivationMask([0, 1, 2], np.arange(6)))
        b = mvm_step(arr, x, ActivationMask([3, 4, 5], np.arange(6)))
        np.testing.assert_allclose(a + b, full, rtol=1e-12)

    def test_masked_out_columns_are_zero(self):
        arr = CrossbarArray(4)
        arr.cells[:] = 1.0
        out = mvm_step(arr, np.ones(4), ActivationMask(np.arange(4), [1]))
        assert out[0] == out[2] == out[3] == 0.0
        assert out[1] == 4.0

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            mvm_step(CrossbarArray(4), np.zeros(4), ActivationMask([], []))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        arr = CrossbarArray(5)
        arr.cells[:] = rng.standard_normal((5, 5))
        x, y = rng.standard_normal(5), rng.standard_normal(5)
        mask = ActivationMask([0, 2, 4], [1, 3])
        lhs = mvm_step(arr, x + y, mask)
        rhs = mvm_step(arr, x, mask) + mvm_step(arr, y, mask)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_explicit_zeros_equal_unprogrammed(self):
        rng = np.random.default_rng(3)
        w = rng.standard_normal((2, 2))
        a = CrossbarArray(4).program_block(0, 0, w)
        b = CrossbarArray(4).program_block(0, 0, w)
        b.program([(2, 2, 0.0), (3, 3, 0.0)])
        x = rng.standard_normal(4)
        np.testing.assert_array_equal(
            mvm_step(a, x, full_mask(4)), mvm_step(b, x, full_mask(4))
        )


class TestAdcConvert:
    def test_ideal_identity(self):
        vals = np.array([0.1, -0.7, 3.0])
        out, count = adc_convert(vals, ADCConfig(mode="ideal"))
        np.testing.assert_array_equal(out, vals)
        assert count == 3

    def test_quantized_zero_fixed_point(self):
        cfg = ADCConfig(bits=1, mode="quantized", full_scale=1.0)
        out, _ = adc_convert(np.array([0.0]), cfg)
        assert out[0] == 0.0

    def test_quantized_1bit_boundary(self):
        cfg = ADCConfig(bits=1, mode="quantized", full_scale=1.0)
        out, _ = adc_convert(np.array([0.7]), cfg)  # delta = 1.0
        assert out[0] == 1.0

    def test_quantized_8bit_error_bound(self):
        cfg = ADCConfig(bits=8, mode="quantized", full_scale=1.0)
        delta = 2.0 / 256
        grid = np.linspace(-1.0, 1.0, 2001)
        out, _ = adc_convert(grid, cfg)
        assert np.max(np.abs(out - grid)) <= delta / 2 + 1e-15

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            adc_convert(np.array([np.inf]), ADCConfig())
