"""Functional crossbar array model: programmable cells, masked MVM steps, and
an optional quantizing ADC. Correctness runs use the ideal ADC; the quantized
mode only demonstrates resolution behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

IDEAL = "ideal"
QUANTIZED = "quantized"


@dataclass(frozen=True)
class ADCConfig:
    adcs_per_array: int = 1
    bits: int = 8
    mode: str = IDEAL
    full_scale: float = 1.0

    def __post_init__(self):
        if self.adcs_per_array < 1:
            raise ValueError("adcs_per_array must be >= 1")
        if not 1 <= self.bits <= 8:
            raise ValueError("bits must be in 1..8 (SAR baseline is 8b)")
        if self.mode not in (IDEAL, QUANTIZED):
            raise ValueError(f"unknown ADC mode {self.mode!r}")
        if self.mode == QUANTIZED and self.full_scale <= 0:
            raise ValueError("quantized mode needs a positive full_scale")


@dataclass(frozen=True)
class ActivationMask:
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", np.asarray(self.rows, dtype=np.int64))
        object.__setattr__(self, "cols", np.asarray(self.cols, dtype=np.int64))


class CrossbarArray:
    """m x m cell grid; unprogrammed cells are exactly 0."""

    def __init__(self, m: int, array_id: int = 0):
        if m <= 0:
            raise ValueError("array dimension must be positive")
        self.m = m
        self.id = array_id
        self.cells = np.zeros((m, m))

    def program(self, placements) -> "CrossbarArray":
        """Write (row, col, value) triples; rejects duplicates and range errors."""
        seen = set()
        for row, col, value in placements:
            if not (0 <= row < self.m and 0 <= col < self.m):
                raise IndexError(f"cell ({row}, {col}) outside {self.m}x{self.m} array")
            if (row, col) in seen:
                raise ValueError(f"cell ({row}, {col}) written twice")
            seen.add((row, col))
            self.cells[row, col] = value
        return self

    def program_block(self, row_off: int, col_off: int, block: np.ndarray):
        """Bulk write of a dense block (no overlap check against prior writes
        is needed by callers, which place non-overlapping regions)."""
        h, w = block.shape
        if row_off < 0 or col_off < 0 or row_off + h > self.m or col_off + w > self.m:
            raise IndexError("block does not fit within the array")
        self.cells[row_off:row_off + h, col_off:col_off + w] = block
        return self

    def mvm_step(self, x: np.ndarray, mask: ActivationMask) -> np.ndarray:
        """Per-column analog sums over the masked rows; unmasked columns read 0.

        x may carry a trailing batch axis. Output shape (m,) or (m, k).
        """
        if x.shape[0] != self.m:
            raise DimensionError(f"input length {x.shape[0]} != m={self.m}")
        if mask.rows.size == 0 or mask.cols.size == 0:
            raise ValueError("activation mask must be nonempty")
        sub = self.cells[np.ix_(mask.rows, mask.cols)]
        partial = sub.T @ x[mask.rows]
        out = np.zeros((self.m,) + x.shape[1:])
        out[mask.cols] = partial
        return out


def program_array(array: CrossbarArray, placements) -> CrossbarArray:
    return array.program(placements)


def mvm_step(array: CrossbarArray, x, mask: ActivationMask):
    return array.mvm_step(np.asarray(x, dtype=np.float64), mask)


def full_mask(m: int) -> ActivationMask:
    idx = np.arange(m)
    return ActivationMask(idx, idx)


def adc_convert(values: np.ndarray, cfg: ADCConfig):
    """Convert analog column values; returns (converted, conversion_count).

    Ideal mode is the identity. Quantized mode rounds to the LSB step
    delta = 2*full_scale / 2**bits and clamps to +-full_scale.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite analog value reached the ADC")
    count = values.shape[0]
    if cfg.mode == IDEAL:
        return values.copy(), count
    delta = 2.0 * cfg.full_scale / (2 ** cfg.bits)
    clamped = np.clip(values, -cfg.full_scale, cfg.full_scale)
    return np.round(clamped / delta) * delta, count
