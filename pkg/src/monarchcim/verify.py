"""Functional-equivalence property suite at configurable toy scale.

Each property compares the pipeline against an independent oracle and reports
the worst observed error. The suite is what `monarchcim verify` runs and what
gates the exit status of the end-to-end pipeline. The optional fault mode
deliberately breaks DenseMap rotation pairing to prove the rotation-
cancellation check has teeth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crossbar import ADCConfig, CrossbarArray, full_mask, mvm_step
from .mapping import map_dense, map_linear, map_sparse
from .monarch import (
    counters,
    d2s_project,
    expand_to_dense,
    fold_permutations,
    monarch_mvm,
    random_monarch,
)
from .scheduler import build_schedule, execute, program_plan, rotate_blocks
from .workload import MatmulLayer

BREAK_PAIRING = "break_pairing"
FAULTS = (BREAK_PAIRING,)


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    max_error: float
    detail: str = ""


def _rel_error(got: np.ndarray, want: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(want))), 1e-300)
    return float(np.max(np.abs(got - want))) / scale


def _execute_plan(plan, weight, x):
    stream = build_schedule(plan, ADCConfig(adcs_per_array=1))
    return execute(stream, program_plan(plan, weight), x)


def _scheduled_equivalence(n, m, trials, rng):
    mm = [MatmulLayer(n, n, "Q")]
    x = rng.standard_normal((n, trials))
    out = []

    w = rng.standard_normal((n, n))
    err = _rel_error(_execute_plan(map_linear(mm, m), w, x), w @ x)
    out.append(PropertyResult("linear-vs-dense-matvec", err <= 1e-10, err))

    mon = random_monarch(n, rng)
    want = monarch_mvm(mon, x)
    for name, plan in (
        ("sparse-vs-monarch-mvm", map_sparse(mm, m)),
        ("dense-vs-monarch-mvm", map_dense(mm, m)),
    ):
        err = _rel_error(_execute_plan(plan, mon, x), want)
        out.append(PropertyResult(name, err <= 1e-10, err))
    return out


def _fold_identity(n, trials, rng):
    mon = random_monarch(n, rng)
    folded = fold_permutations(mon)
    x = rng.standard_normal((n, trials))
    counters.reset()
    y_unfolded = monarch_mvm(mon, x)
    unfolded_permutes = counters.permutes
    counters.reset()
    y_folded = monarch_mvm(folded, x)
    folded_permutes = counters.permutes
    err = _rel_error(y_folded, y_unfolded)
    ok = err <= 1e-12 and (unfolded_permutes, folded_permutes) == (3, 1)
    return PropertyResult(
        "fold-identity",
        ok,
        err,
        f"permutes unfolded={unfolded_permutes} folded={folded_permutes}",
    )


def _diag_array(blocks, b, slot, m):
    s = m // b
    arr = CrossbarArray(m)
    for k in range(s):
        arr.program_block(k * b, ((k + slot) % s) * b, blocks[k].T)
    return arr


def _rotation_cancellation(n, m, rng, fault):
    plan = map_dense([MatmulLayer(n, n, "Q")], m)
    for li, ri in plan.pairings:
        lp, rp = plan.placements[li], plan.placements[ri]
        s = plan.m // lp.block_size
        if (lp.diagonal_index + rp.diagonal_index) % s != 0:
            return PropertyResult(
                "rotation-cancellation", False, float("inf"), "unpaired slots"
            )

    # paired two-stage execution on crossbar primitives vs the oracle that
    # applies an explicit inverse block-rotation between un-shifted stages
    b, s = 4, 4
    mprim = b * s
    worst = 0.0
    for i in range(1, s):
        bl = rng.standard_normal((s, b, b))
        br = rng.standard_normal((s, b, b))
        x = rng.standard_normal(mprim)
        stage1 = mvm_step(_diag_array(bl, b, i, mprim), x, full_mask(mprim))
        shift = 0 if fault == BREAK_PAIRING else i
        br_stage = br[(np.arange(s) - shift) % s]
        paired = mvm_step(
            _diag_array(br_stage, b, (s - i) % s, mprim), stage1, full_mask(mprim)
        )
        oracle = mvm_step(
            _diag_array(br, b, 0, mprim),
            rotate_blocks(stage1, i, b),
            full_mask(mprim),
        )
        worst = max(worst, float(np.max(np.abs(paired - oracle))))
    return PropertyResult("rotation-cancellation", worst == 0.0, worst)


def _projection_losslessness(n, rng):
    mon = random_monarch(n, rng)
    _, err = d2s_project(expand_to_dense(mon), mon.b)
    return PropertyResult("projection-losslessness", err <= 1e-8, err)


def run_suite(
    n: int = 64,
    m: int | None = None,
    trials: int = 20,
    seed: int = 0,
    fault: str | None = None,
) -> list[PropertyResult]:
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; available: {FAULTS}")
    if m is None:
        m = n // 2 if n >= 16 else n
    rng = np.random.default_rng(seed)
    results = _scheduled_equivalence(n, m, trials, rng)
    results.append(_fold_identity(n, trials, rng))
    results.append(_rotation_cancellation(n, m, rng, fault))
    results.append(_projection_losslessness(n, rng))
    return results


def suite_passed(results) -> bool:
    return all(r.passed for r in results)


def report_text(results) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        detail = f" ({r.detail})" if r.detail else ""
        lines.append(f"{status} {r.name} max_error={r.max_error:.3e}{detail}")
    lines.append(f"overall: {'PASS' if suite_passed(results) else 'FAIL'}")
    return "\n".join(lines) + "\n"
