"""Mapping strategies: Linear (dense tiling), SparseMap (one block-diagonal
partition per array), DenseMap (multiple partition-diagonals packed into
shared arrays at distinct diagonal slots with rotation pairing).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MappingError
from .workload import MatmulLayer, monarch_dims

LINEAR = "linear"
SPARSE = "sparse"
DENSE = "dense"
STRATEGIES = (LINEAR, SPARSE, DENSE)


@dataclass(frozen=True)
class Source:
    matmul: int
    factor: str  # "L", "R" or "dense"
    index: int  # tile index (linear) or diagonal-partition index (sparse/dense)


@dataclass(frozen=True)
class Placement:
    array_id: int
    row_offset: int
    col_offset: int
    rows: int
    cols: int
    source: Source
    nnz: int
    block_size: int = 0  # 0 for dense tiles
    num_blocks: int = 0
    diagonal_index: int | None = None  # DenseMap slot
    needs_correction: bool = False


@dataclass(frozen=True)
class MappingPlan:
    strategy: str
    m: int
    matmuls: tuple[MatmulLayer, ...]
    placements: tuple[Placement, ...]
    pairings: tuple[tuple[int, int], ...] = ()  # placement indices (L, R)

    @property
    def num_arrays(self) -> int:
        return len({p.array_id for p in self.placements})

    @property
    def nnz_total(self) -> int:
        return sum(p.nnz for p in self.placements)


@dataclass(frozen=True)
class UtilizationReport:
    num_arrays: int
    nnz_total: int
    per_array: dict[int, float]
    aggregate: float
    empty: bool


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def map_linear(matmuls, m: int) -> MappingPlan:
    """Tile each dense matrix into ceil(rows/m) * ceil(cols/m) arrays."""
    placements = []
    array_id = 0
    for mi, mm in enumerate(matmuls):
        tiles_r, tiles_c = _ceil_div(mm.rows, m), _ceil_div(mm.cols, m)
        for ti in range(tiles_r):
            for tj in range(tiles_c):
                h = min(m, mm.rows - ti * m)
                w = min(m, mm.cols - tj * m)
                placements.append(
                    Placement(
                        array_id=array_id,
                        row_offset=0,
                        col_offset=0,
                        rows=h,
                        cols=w,
                        source=Source(mi, "dense", ti * tiles_c + tj),
                        nnz=h * w,
                    )
                )
                array_id += 1
    return MappingPlan(LINEAR, m, tuple(matmuls), tuple(placements))


def _diagonal_partitions(n: int, b: int, m: int):
    """Yield (partition_index, size, num_blocks) along the factor diagonal."""
    for i in range(_ceil_div(n, m)):
        size = min(m, n - i * m)
        yield i, size, _ceil_div(size, b)


def map_sparse(matmuls, m: int) -> MappingPlan:
    """One diagonal partition per array; off-diagonal partitions are all-zero
    and never materialized. Per-array utilization is b/m for square factors."""
    placements = []
    array_id = 0
    for mi, mm in enumerate(matmuls):
        n, b = monarch_dims(mm.rows, mm.cols)
        if b > m:
            raise MappingError(f"block size {b} exceeds array dimension {m}")
        for factor in ("L", "R"):
            for pi, size, blocks in _diagonal_partitions(n, b, m):
                placements.append(
                    Placement(
                        array_id=array_id,
                        row_offset=0,
                        col_offset=0,
                        rows=size,
                        cols=size,
                        source=Source(mi, factor, pi),
                        nnz=blocks * b * b,
                        block_size=b,
                        num_blocks=blocks,
                    )
                )
                array_id += 1
    return MappingPlan(SPARSE, m, tuple(matmuls), tuple(placements))


def _slot_order(d_slots: int) -> tuple[list[int], list[int]]:
    """(paired slots, self-inverse slots) for one array.

    Self-inverse slots (i == -i mod d_slots, i.e. 0 and d_slots/2) rotate onto
    themselves; only ONE of them is populated per array so the per-array
    rotation-correction unit is never oversubscribed. The other stays empty.
    """
    if d_slots == 1:
        return [], [0]
    paired = [i for i in range(1, d_slots) if (2 * i) % d_slots != 0]
    return paired, [0]


def map_dense(matmuls, m: int) -> MappingPlan:
    """Pack partition-diagonals into shared arrays, one per diagonal slot.

    L and R diagonals of each Monarch matrix go to mirrored array pairs with
    slot_R = (d_slots - slot_L) mod d_slots, so stage-L rotations cancel in
    stage R. Arrays are homogeneous in block size (slot pitch is fixed).
    """
    placements: list[Placement] = []
    pairings: list[tuple[int, int]] = []
    # queue diagonals grouped by block size; L/R kept synchronized per matmul
    groups: dict[int, list] = {}
    for mi, mm in enumerate(matmuls):
        n, b = monarch_dims(mm.rows, mm.cols)
        if b > m:
            raise MappingError(f"block size {b} exceeds array dimension {m}")
        if m % b:
            raise MappingError(f"block size {b} does not divide array dim {m}")
        for pi, size, blocks in _diagonal_partitions(n, b, m):
            groups.setdefault(b, []).append((mi, pi, size, blocks))

    array_id = 0
    for b in sorted(groups):
        d_slots = m // b
        paired, self_inv = _slot_order(d_slots)
        per_array = paired + self_inv
        queue = groups[b]
        for start in range(0, len(queue), len(per_array)):
            chunk = queue[start:start + len(per_array)]
            l_array, r_array = array_id, array_id + 1
            array_id += 2
            for slot, (mi, pi, size, blocks) in zip(per_array, chunk):
                mirror = (d_slots - slot) % d_slots
                correction = slot == mirror  # self-inverse slot, flagged
                for factor, aid, s in (("L", l_array, slot), ("R", r_array, mirror)):
                    placements.append(
                        Placement(
                            array_id=aid,
                            row_offset=0,
                            col_offset=s * b,
                            rows=size,
                            cols=size,
                            source=Source(mi, factor, pi),
                            nnz=blocks * b * b,
                            block_size=b,
                            num_blocks=blocks,
                            diagonal_index=s,
                            needs_correction=correction,
                        )
                    )
                pairings.append((len(placements) - 2, len(placements) - 1))
    return MappingPlan(DENSE, m, tuple(matmuls), tuple(placements), tuple(pairings))


def build_plan(strategy: str, matmuls, m: int) -> MappingPlan:
    if strategy == LINEAR:
        return map_linear(matmuls, m)
    if strategy == SPARSE:
        return map_sparse(matmuls, m)
    if strategy == DENSE:
        return map_dense(matmuls, m)
    raise MappingError(f"unknown strategy {strategy!r}")


def utilization(plan: MappingPlan) -> UtilizationReport:
    """Exact nonzero accounting per array and in aggregate."""
    cap = plan.m * plan.m
    per_array: dict[int, int] = {}
    for p in plan.placements:
        per_array[p.array_id] = per_array.get(p.array_id, 0) + p.nnz
    if not per_array:
        return UtilizationReport(0, 0, {}, 0.0, True)
    util = {aid: nnz / cap for aid, nnz in sorted(per_array.items())}
    aggregate = sum(util.values()) / len(util)
    return UtilizationReport(len(util), plan.nnz_total, util, aggregate, False)


def placement_regions(p: Placement, m: int):
    """Concrete (row_offset, col_offset, height, width) cell regions.

    Dense tiles are one rectangle; sparse partitions put block k at
    (k*b, k*b); DenseMap diagonals shift block k cyclically to column band
    (k + slot) mod d_slots within the array.
    """
    if p.block_size == 0:
        return [(p.row_offset, p.col_offset, p.rows, p.cols)]
    b = p.block_size
    out = []
    for k in range(p.num_blocks):
        h = min(b, p.rows - k * b)
        if p.diagonal_index is None:
            col = k * b
        else:
            col = ((k + p.diagonal_index) % (m // b)) * b
        out.append((k * b, col, h, h))
    return out


def plan_to_text(plan: MappingPlan) -> str:
    """Line-oriented placement dump for inspection and golden-file tests."""
    lines = [f"# strategy={plan.strategy} m={plan.m} arrays={plan.num_arrays}"]
    for p in plan.placements:
        diag = "-" if p.diagonal_index is None else str(p.diagonal_index)
        lines.append(
            f"{p.array_id} {p.row_offset} {p.col_offset} "
            f"{p.source.matmul} {p.source.factor} {p.source.index} {diag}"
        )
    return "\n".join(lines) + "\n"
