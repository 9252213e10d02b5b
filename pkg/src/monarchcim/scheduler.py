"""Mapping-aware scheduling and functional execution.

build_schedule turns a single-matmul MappingPlan into a CommandStream of
per-array activation steps (with ADC conversion grouping); program_plan loads
weights into crossbar arrays; execute runs the stream and combines partial
results into the final matvec. Monarch plans run as two array stages with the
outer permutations absorbed into input/output wiring and exactly one explicit
digital permutation between the stages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crossbar import ADCConfig, CrossbarArray, adc_convert
from .errors import DimensionError, MappingError
from .mapping import DENSE, LINEAR, SPARSE, MappingPlan
from .monarch import MonarchMatrix, PermutationSpec, permutation_indices, permute
from .workload import monarch_dims


@dataclass(frozen=True)
class StepCommand:
    array_id: int
    timestamp: int
    stage: str  # "R", "L" or "dense"
    rows: np.ndarray  # array-local active rows
    cols: np.ndarray  # array-local active cols
    in_index: np.ndarray  # global stage-input index per active row
    route: np.ndarray  # global stage-output index per active col
    n_adc: int
    # cell-aligned readout: rows[k] pairs 1:1 with cols[k], so each conversion
    # samples a single cell. Used by the DenseMap walk, where a whole-row
    # readout would pick up cells of the other diagonals packed in the array.
    aligned: bool = False

    @property
    def adc_rounds(self) -> int:
        return -(-len(self.cols) // self.n_adc)

    @property
    def adc_groups(self):
        """Column groups converted sequentially, one column per ADC per round."""
        return [
            self.cols[i:i + self.n_adc] for i in range(0, len(self.cols), self.n_adc)
        ]


@dataclass(frozen=True)
class ScheduleMeta:
    total_steps: int
    conversions_per_array: dict[int, int]
    total_conversions: int
    adc_rounds_per_array: dict[int, int]
    max_active_rows: int
    p_max: int


@dataclass(frozen=True)
class CommandStream:
    plan: MappingPlan
    adc: ADCConfig
    steps: tuple[StepCommand, ...]
    meta: ScheduleMeta


def rotate_blocks(v: np.ndarray, i: int, b: int) -> np.ndarray:
    """Left block-rotation: output block j is input block (j + i) mod d."""
    if v.shape[0] % b:
        raise DimensionError(f"length {v.shape[0]} not divisible by block {b}")
    d = v.shape[0] // b
    blocks = v.reshape(d, b, *v.shape[1:])
    return np.roll(blocks, -i, axis=0).reshape(v.shape)


def _single_matmul(plan: MappingPlan):
    if len(plan.matmuls) != 1:
        raise MappingError("scheduling operates on single-matmul plans")
    return plan.matmuls[0]


def build_schedule(plan: MappingPlan, adc: ADCConfig) -> CommandStream:
    """Emit the per-array command stream and its conversion accounting."""
    mm = _single_matmul(plan)
    m = plan.m
    n_adc = adc.adcs_per_array
    steps: list[StepCommand] = []

    if plan.strategy == LINEAR:
        for p in plan.placements:
            ti, tj = divmod(p.source.index, -(-mm.cols // m))
            # cells hold the tile transposed: array rows are driven by inputs
            steps.append(
                StepCommand(
                    array_id=p.array_id,
                    timestamp=0,
                    stage="dense",
                    rows=np.arange(p.cols),
                    cols=np.arange(p.rows),
                    in_index=tj * m + np.arange(p.cols),
                    route=ti * m + np.arange(p.rows),
                    n_adc=n_adc,
                )
            )
        max_rows = max(len(s.rows) for s in steps)
    elif plan.strategy == SPARSE:
        for p in plan.placements:
            base = p.source.index * m
            steps.append(
                StepCommand(
                    array_id=p.array_id,
                    timestamp=0,
                    stage=p.source.factor,
                    rows=np.arange(p.rows),
                    cols=np.arange(p.rows),
                    in_index=base + np.arange(p.rows),
                    route=base + np.arange(p.rows),
                    n_adc=n_adc,
                )
            )
        # per conversion, only the b rows of the converted column's block sum in
        max_rows = plan.placements[0].block_size
    elif plan.strategy == DENSE:
        by_array: dict[int, list] = {}
        for p in plan.placements:
            by_array.setdefault(p.array_id, []).append(p)
        for aid in sorted(by_array):
            t = 0
            for p in sorted(by_array[aid], key=lambda q: q.diagonal_index):
                b = p.block_size
                s = m // b
                base = p.source.index * m
                k = np.arange(p.num_blocks)
                col_band = ((k + p.diagonal_index) % s) * b
                # walk the diagonal: one active cell per block per step
                for j in range(b):
                    for l in range(b):
                        r = (l + j) % b
                        steps.append(
                            StepCommand(
                                array_id=aid,
                                timestamp=t,
                                stage=p.source.factor,
                                rows=k * b + r,
                                cols=col_band + l,
                                in_index=base + k * b + r,
                                route=base + k * b + l,
                                n_adc=n_adc,
                                aligned=True,
                            )
                        )
                        t += 1
        max_rows = max(len(s.rows) for s in steps)
    else:
        raise MappingError(f"unknown strategy {plan.strategy!r}")

    conv: dict[int, int] = {}
    rounds: dict[int, int] = {}
    for s in steps:
        conv[s.array_id] = conv.get(s.array_id, 0) + len(s.cols)
        rounds[s.array_id] = rounds.get(s.array_id, 0) + s.adc_rounds
    meta = ScheduleMeta(
        total_steps=len(steps),
        conversions_per_array=conv,
        total_conversions=sum(conv.values()),
        adc_rounds_per_array=rounds,
        max_active_rows=max_rows,
        p_max=max(len(s.cols) for s in steps),
    )
    return CommandStream(plan, adc, tuple(steps), meta)


def program_plan(plan: MappingPlan, weight) -> dict[int, CrossbarArray]:
    """Program arrays for a single-matmul plan.

    weight is the dense matrix (Linear) or the MonarchMatrix (Sparse/DenseMap).
    Cells store blocks transposed so array rows are driven by inputs.
    """
    mm = _single_matmul(plan)
    m = plan.m
    arrays: dict[int, CrossbarArray] = {}

    def arr(aid):
        if aid not in arrays:
            arrays[aid] = CrossbarArray(m, aid)
        return arrays[aid]

    if plan.strategy == LINEAR:
        w = np.asarray(weight, dtype=np.float64)
        if w.shape != (mm.rows, mm.cols):
            raise DimensionError(f"weight shape {w.shape} != {(mm.rows, mm.cols)}")
        tiles_c = -(-mm.cols // m)
        for p in plan.placements:
            ti, tj = divmod(p.source.index, tiles_c)
            tile = w[ti * m:ti * m + p.rows, tj * m:tj * m + p.cols]
            arr(p.array_id).program_block(0, 0, tile.T)
        return arrays

    if not isinstance(weight, MonarchMatrix):
        raise TypeError("sparse/dense plans need a MonarchMatrix weight")
    n, b = monarch_dims(mm.rows, mm.cols)
    if weight.n != n or weight.b != b:
        raise DimensionError(f"Monarch dims {(weight.n, weight.b)} != {(n, b)}")
    if m % b:
        raise MappingError(f"block size {b} does not divide array dim {m}")
    for p in plan.placements:
        factor = weight.L if p.source.factor == "L" else weight.R
        s = m // b
        for k in range(p.num_blocks):
            block = factor.blocks[p.source.index * s + k]
            if p.diagonal_index is None:
                col = k * b
            else:
                col = ((k + p.diagonal_index) % s) * b
            arr(p.array_id).program_block(k * b, col, block.T)
    return arrays


def _run_stage(stream, arrays, stage, stage_input, out_len, stats):
    x = stage_input
    out = np.zeros((out_len,) + x.shape[1:])
    cmds = [s for s in stream.steps if s.stage == stage]
    # fixed ascending (array, time) order keeps the shift-add reduction
    # bit-reproducible regardless of array-level parallelism
    for cmd in sorted(cmds, key=lambda c: (c.array_id, c.timestamp)):
        cells = arrays[cmd.array_id].cells
        if cmd.aligned:
            weights = cells[cmd.rows, cmd.cols]
            vals = weights.reshape(weights.shape + (1,) * (x.ndim - 1)) * x[cmd.in_index]
        else:
            vals = cells[np.ix_(cmd.rows, cmd.cols)].T @ x[cmd.in_index]
        converted, count = adc_convert(vals, stream.adc)
        if stats is not None:
            stats["conversions"] = stats.get("conversions", 0) + count
        out[cmd.route] += converted
    return out


def execute(stream: CommandStream, arrays, x, stats: dict | None = None):
    """Run the stream on programmed arrays; x may carry a batch axis.

    Returns the matvec result (dense matvec for Linear plans, the Monarch
    supermatrix matvec for Sparse/DenseMap plans). Records per-input-vector
    ADC conversions into stats when given.
    """
    plan = stream.plan
    mm = _single_matmul(plan)
    x = np.asarray(x, dtype=np.float64)
    if plan.strategy == LINEAR:
        if x.shape[0] != mm.cols:
            raise DimensionError(f"input length {x.shape[0]} != {mm.cols}")
        return _run_stage(stream, arrays, "dense", x, mm.rows, stats)
    n, b = monarch_dims(mm.rows, mm.cols)
    if x.shape[0] != n:
        raise DimensionError(f"input length {x.shape[0]} != supermatrix n={n}")
    spec = PermutationSpec(n, b)
    p = permutation_indices(spec)
    u = x[p]  # outer P folded into input wiring
    out_r = _run_stage(stream, arrays, "R", u, n, stats)
    w = permute(out_r, spec)  # the single explicit runtime permutation
    out_l = _run_stage(stream, arrays, "L", w, n, stats)
    return out_l[p]  # outer P folded into output wiring


def trace_to_text(stream: CommandStream) -> str:
    """Line-oriented trace: timestamp, array, row-mask, col-mask, route."""
    lines = []
    for s in sorted(stream.steps, key=lambda c: (c.timestamp, c.array_id)):
        rows = ",".join(map(str, s.rows.tolist()))
        cols = ",".join(map(str, s.cols.tolist()))
        route = ",".join(map(str, s.route.tolist()))
        lines.append(f"{s.timestamp} {s.array_id} [{rows}] [{cols}] [{route}]")
    return "\n".join(lines) + "\n"
