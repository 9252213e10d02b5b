"""Command-line driver.

Subcommands: project, map, schedule, simulate, cost, dse, verify, repro.
All artifacts are CSV or plain text, written atomically. CSV schemas:

  arrays.csv  model,strategy,arrays,utilization
  cost.csv    model,strategy,n_adc,adc_bits,latency_us,energy_uJ,conversions,arrays
  dse.csv     model,strategy,n_adc,adc_bits,latency_us,energy_uJ,conversions,arrays
  counts.csv  model,params_dense,params_monarch,param_ratio,flops_dense,flops_monarch,flop_ratio

Exit status: 0 success, 1 verification/tolerance failure, 2 configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import cost as cost_mod
from . import verify as verify_mod
from .crossbar import ADCConfig
from .errors import CalibrationError, ConfigError, DimensionError, MappingError
from .io import atomic_write_text, load_config, read_matrix, write_matrix
from .mapping import STRATEGIES, build_plan, utilization
from .monarch import d2s_project, pad_to_square
from .reference import (
    REFERENCE_ARRAYS,
    REFERENCE_DSE,
    REFERENCE_ENERGY_UJ,
    REFERENCE_LATENCY_US,
    REFERENCE_UTILIZATION,
)
from .scheduler import build_schedule, execute, program_plan, trace_to_text
from .verify import report_text, run_suite, suite_passed
from .workload import (
    ModelSpec,
    builtin_model,
    builtin_names,
    count_params_flops,
    enumerate_matmuls,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_IO = 3

BASELINE_ADC_COUNTS = (1, 4, 8, 16, 32)
DSE_ADC_COUNTS = (4, 8, 16, 32)


@dataclass(frozen=True)
class RunConfig:
    model: str = "bert-large"
    strategy: str = "all"
    m: int = 256
    adc_counts: tuple[int, ...] = BASELINE_ADC_COUNTS
    adc_mode: str = "ideal"
    seed: int = 0
    out: Path = Path("out")
    verify_n: int = 64
    verify_trials: int = 20
    fault: str | None = None
    project_n: int = 256
    weights: str | None = None
    custom_model: ModelSpec | None = None


def thread_cap() -> int | None:
    """CIM_MONARCH_THREADS caps internal parallelism (the implementation is
    sequential, so the cap is validated and recorded, never exceeded)."""
    raw = os.environ.get("CIM_MONARCH_THREADS")
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"CIM_MONARCH_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError("CIM_MONARCH_THREADS must be >= 1")
    return value


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected integer, got {raw!r}")


def _parse_adc_list(raw: str, key: str) -> tuple[int, ...]:
    try:
        counts = tuple(int(tok) for tok in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"key {key!r}: expected integer list, got {raw!r}")
    if not counts or any(c < 1 for c in counts):
        raise ConfigError(f"key {key!r}: ADC counts must be positive")
    return counts


def _custom_model(entries: dict[str, str]) -> ModelSpec | None:
    keys = {k[len("model."):]: v for k, v in entries.items()
            if k.startswith("model.")}
    if not keys:
        return None
    required = ("name", "num_layers", "d_model", "d_ff", "seq_len")
    missing = [k for k in required if k not in keys]
    if missing:
        raise ConfigError(f"custom model: missing keys {missing}")
    try:
        return ModelSpec(
            name=keys["name"],
            num_layers=int(keys["num_layers"]),
            d_model=int(keys["d_model"]),
            d_ff=int(keys["d_ff"]),
            seq_len=int(keys["seq_len"]),
            cross_attention_layers=int(keys.get("cross_attention_layers", "0")),
            fused_qkv=keys.get("fused_qkv", "false").lower() == "true",
        )
    except ValueError as exc:
        raise ConfigError(f"custom model: {exc}")


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        entries = load_config(args.config)
        known = {
            "model": str,
            "strategy": str,
            "m": "int",
            "adcs": "adcs",
            "adc_mode": str,
            "seed": "int",
            "out": "path",
            "verify_n": "int",
            "verify_trials": "int",
            "fault": str,
            "project_n": "int",
            "weights": str,
        }
        updates = {}
        for key, raw in entries.items():
            if key.startswith("model."):
                continue
            if key not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            kind = known[key]
            if kind == "int":
                updates[key] = _parse_int(raw, key)
            elif kind == "adcs":
                updates["adc_counts"] = _parse_adc_list(raw, key)
            elif kind == "path":
                updates[key] = Path(raw)
            else:
                updates[key] = raw
        cfg = replace(cfg, **updates)
        custom = _custom_model(entries)
        if custom is not None:
            cfg = replace(cfg, custom_model=custom, model=custom.name)
    if getattr(args, "paper_repro", False):
        cfg = replace(
            cfg, model="all", strategy="all", m=256, adc_counts=BASELINE_ADC_COUNTS
        )
    if args.model:
        cfg = replace(cfg, model=args.model)
    if args.strategy:
        cfg = replace(cfg, strategy=args.strategy)
    if args.m:
        cfg = replace(cfg, m=args.m)
    if args.adcs:
        cfg = replace(cfg, adc_counts=_parse_adc_list(args.adcs, "--adcs"))
    if args.out:
        cfg = replace(cfg, out=Path(args.out))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if cfg.strategy not in STRATEGIES + ("all",):
        raise ConfigError(f"unknown strategy {cfg.strategy!r}")
    if cfg.adc_mode not in ("ideal", "quantized"):
        raise ConfigError(f"key 'adc_mode': expected ideal|quantized, got {cfg.adc_mode!r}")
    if cfg.fault is not None and cfg.fault not in verify_mod.FAULTS:
        raise ConfigError(f"key 'fault': unknown fault {cfg.fault!r}")
    if cfg.m < 1:
        raise ConfigError("key 'm': array dimension must be positive")
    return cfg


def _models(cfg: RunConfig) -> list[ModelSpec]:
    if cfg.custom_model is not None:
        return [cfg.custom_model]
    if cfg.model == "all":
        return [builtin_model(n) for n in builtin_names()]
    try:
        return [builtin_model(cfg.model)]
    except ValueError as exc:
        raise ConfigError(str(exc))


def _strategies(cfg: RunConfig) -> list[str]:
    return list(STRATEGIES) if cfg.strategy == "all" else [cfg.strategy]


def _write_csv(path: Path, header: str, rows) -> None:
    atomic_write_text(path, "\n".join([header, *rows]) + "\n")


def _plan_stats(cfg: RunConfig):
    """(model, strategy) -> (arrays, utilization) for the requested grid."""
    stats = {}
    for spec in _models(cfg):
        matmuls = enumerate_matmuls(spec)
        for strategy in _strategies(cfg):
            plan = build_plan(strategy, matmuls, cfg.m)
            stats[(spec.name, strategy)] = (
                plan.num_arrays, utilization(plan).aggregate
            )
    return stats


def cmd_map(cfg: RunConfig) -> int:
    stats = _plan_stats(cfg)
    rows = [
        f"{model},{strategy},{arrays},{util:.3f}"
        for (model, strategy), (arrays, util) in sorted(stats.items())
    ]
    _write_csv(cfg.out / "arrays.csv", "model,strategy,arrays,utilization", rows)
    return EXIT_OK


def _bert_baseline_arrays(strategy: str, m: int) -> int:
    plan = build_plan(strategy, enumerate_matmuls(builtin_model("bert-large")), m)
    return plan.num_arrays


def _cost_rows(cfg: RunConfig, adc_counts) -> list[str]:
    calibs = cost_mod.load_calibration()
    rows = []
    for spec in _models(cfg):
        matmuls = enumerate_matmuls(spec)
        for strategy in _strategies(cfg):
            plan = build_plan(strategy, matmuls, cfg.m)
            # workload scale relative to the BERT calibration baseline
            scale = plan.num_arrays / _bert_baseline_arrays(strategy, cfg.m)
            for n_adc in adc_counts:
                est = cost_mod.estimate(calibs[strategy], n_adc, scale=scale)
                rows.append(
                    f"{spec.name},{strategy},{n_adc},{est.bits},"
                    f"{est.latency_us:.3f},{est.energy_uJ:.3f},"
                    f"{est.conversions},{plan.num_arrays}"
                )
    return rows


_COST_HEADER = "model,strategy,n_adc,adc_bits,latency_us,energy_uJ,conversions,arrays"


def cmd_cost(cfg: RunConfig) -> int:
    _write_csv(cfg.out / "cost.csv", _COST_HEADER, _cost_rows(cfg, (1,)))
    return EXIT_OK


def cmd_dse(cfg: RunConfig) -> int:
    _write_csv(cfg.out / "dse.csv", _COST_HEADER, _cost_rows(cfg, cfg.adc_counts))
    return EXIT_OK


def cmd_project(cfg: RunConfig) -> int:
    if cfg.weights:
        w = read_matrix(cfg.weights)
        source = cfg.weights
    else:
        rng = np.random.default_rng(cfg.seed)
        w = rng.standard_normal((cfg.project_n, cfg.project_n))
        source = f"synthetic {cfg.project_n}x{cfg.project_n} (seed={cfg.seed})"
    rows, cols = w.shape
    padded, n, b = pad_to_square(w)
    mon, err = d2s_project(padded, b)
    denom = float(np.linalg.norm(w)) or 1.0
    dense_params = rows * cols
    monarch_params = 2 * n * b
    report = "\n".join(
        [
            f"source: {source}",
            f"input: {rows}x{cols}",
            f"supermatrix: n={n} b={b}",
            f"params dense={dense_params} monarch={monarch_params} "
            f"ratio={dense_params / monarch_params:.3f}",
            f"relative_frobenius_error: {err / denom:.6e}",
        ]
    ) + "\n"
    atomic_write_text(cfg.out / "project.txt", report)
    write_matrix(cfg.out / "factor_L.bin", mon.L.blocks.reshape(n, b))
    write_matrix(cfg.out / "factor_R.bin", mon.R.blocks.reshape(n, b))
    return EXIT_OK


def cmd_schedule(cfg: RunConfig) -> int:
    from .workload import MatmulLayer

    n = cfg.verify_n
    m = min(cfg.m, n)
    adc = ADCConfig(adcs_per_array=cfg.adc_counts[0], mode="ideal")
    sections = []
    for strategy in _strategies(cfg):
        plan = build_plan(strategy, [MatmulLayer(n, n, "Q")], m)
        stream = build_schedule(plan, adc)
        meta = stream.meta
        sections.append(
            "\n".join(
                [
                    f"# strategy={strategy} n={n} m={m} arrays={plan.num_arrays}",
                    f"# steps={meta.total_steps} conversions={meta.total_conversions} "
                    f"max_active_rows={meta.max_active_rows} p_max={meta.p_max}",
                    trace_to_text(stream).rstrip("\n"),
                ]
            )
        )
    atomic_write_text(cfg.out / "schedule.txt", "\n".join(sections) + "\n")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    from .mapping import map_linear
    from .monarch import monarch_mvm, random_monarch
    from .workload import MatmulLayer

    n = cfg.verify_n
    m = min(cfg.m, n)
    rng = np.random.default_rng(cfg.seed)
    adc = ADCConfig(adcs_per_array=cfg.adc_counts[0], mode=cfg.adc_mode)
    x = rng.standard_normal((n, cfg.verify_trials))
    lines, ok = [], True
    for strategy in _strategies(cfg):
        plan = build_plan(strategy, [MatmulLayer(n, n, "Q")], m)
        if strategy == "linear":
            weight = rng.standard_normal((n, n))
            want = weight @ x
        else:
            weight = random_monarch(n, rng)
            want = monarch_mvm(weight, x)
        stats = {}
        got = execute(build_schedule(plan, adc), program_plan(plan, weight), x,
                      stats=stats)
        err = float(np.max(np.abs(got - want))) / max(float(np.max(np.abs(want))),
                                                      1e-300)
        passed = cfg.adc_mode != "ideal" or err <= 1e-10
        ok = ok and passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'} {strategy} adc_mode={cfg.adc_mode} "
            f"max_rel_error={err:.3e} conversions={stats['conversions']}"
        )
    atomic_write_text(cfg.out / "simulate.txt", "\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_verify(cfg: RunConfig) -> int:
    results = run_suite(
        n=cfg.verify_n,
        trials=cfg.verify_trials,
        seed=cfg.seed,
        fault=cfg.fault,
    )
    atomic_write_text(cfg.out / "verify.txt", report_text(results))
    return EXIT_OK if suite_passed(results) else EXIT_VERIFY


def cmd_counts(cfg: RunConfig) -> int:
    rows = []
    for spec in _models(cfg):
        rep = count_params_flops(spec, "monarch")
        rows.append(
            f"{spec.name},{rep.params_dense},{rep.params_monarch},"
            f"{rep.param_ratio:.3f},{rep.flops_dense},{rep.flops_monarch},"
            f"{rep.flop_ratio:.3f}"
        )
    _write_csv(
        cfg.out / "counts.csv",
        "model,params_dense,params_monarch,param_ratio,"
        "flops_dense,flops_monarch,flop_ratio",
        rows,
    )
    return EXIT_OK


def _within(got: float, want: float, rel: float) -> bool:
    return abs(got - want) <= rel * abs(want)


def _repro_tolerance_checks(cfg: RunConfig) -> list[str]:
    """Compare achieved numbers against the baseline reference targets."""
    failures = []
    stats = _plan_stats(replace(cfg, model="all", strategy="all"))
    arrays = {k: v[0] for k, v in stats.items()}
    utils = {k: v[1] for k, v in stats.items()}

    def check(name, ok):
        if not ok:
            failures.append(name)

    check("bert linear arrays == 4608", arrays[("bert-large", "linear")] == 4608)
    check("bert sparse arrays == 2304", arrays[("bert-large", "sparse")] == 2304)
    check(
        "bert dense arrays in [480, 640]",
        480 <= arrays[("bert-large", "dense")] <= 640,
    )
    check(
        "bart linear arrays == 5376",
        arrays[("bart-large", "linear")] == REFERENCE_ARRAYS["bart-large"]["linear"],
    )
    check(
        "gpt sparse arrays within 10%",
        _within(
            arrays[("gpt2-medium", "sparse")],
            REFERENCE_ARRAYS["gpt2-medium"]["sparse"],
            0.10,
        ),
    )
    check("linear utilization == 1.0", utils[("bert-large", "linear")] == 1.0)
    check(
        "bert sparse utilization 20.8 +- 0.5pp",
        abs(utils[("bert-large", "sparse")] - 0.208) <= 0.005,
    )
    check(
        "bert dense utilization in [75%, 80%]",
        0.75 <= utils[("bert-large", "dense")] <= 0.80,
    )

    calibs = cost_mod.load_calibration()
    for strategy in STRATEGIES:
        lat_ref = REFERENCE_LATENCY_US["bert-large"][strategy]
        e_ref = REFERENCE_ENERGY_UJ["bert-large"][strategy]
        est = cost_mod.estimate(calibs[strategy], 1)
        check(
            f"bert {strategy} 1-ADC latency within 2%",
            _within(est.latency_us, lat_ref, 0.02),
        )
        check(
            f"bert {strategy} 1-ADC energy within 2%",
            _within(est.energy_uJ, e_ref, 0.02),
        )
        for n_adc, (lat, energy) in REFERENCE_DSE[strategy].items():
            est = cost_mod.estimate(calibs[strategy], n_adc)
            check(
                f"bert {strategy} {n_adc}-ADC sweep point within 2%",
                _within(est.latency_us, lat, 0.02)
                and _within(est.energy_uJ, energy, 0.02),
            )
    return failures


def _golden_diff(cfg: RunConfig) -> list[str]:
    """Byte-compare the freshly written CSVs against the committed goldens."""
    mismatches = []
    golden_root = resources.files("monarchcim").joinpath("data/golden")
    for name in ("arrays.csv", "cost.csv", "dse.csv", "counts.csv"):
        ref = golden_root.joinpath(name)
        try:
            want = ref.read_text()
        except FileNotFoundError:
            mismatches.append(f"{name}: golden file missing")
            continue
        got = (cfg.out / name).read_text()
        if got != want:
            mismatches.append(f"{name}: differs from committed golden")
    return mismatches


def cmd_repro(cfg: RunConfig) -> int:
    base = replace(
        cfg, model="all", strategy="all", m=256, adc_counts=BASELINE_ADC_COUNTS
    )
    cmd_map(base)
    cmd_counts(base)
    cmd_cost(base)
    # the ADC-sharing sweep is a BERT study
    _write_csv(
        base.out / "dse.csv",
        _COST_HEADER,
        _cost_rows(replace(base, model="bert-large"), DSE_ADC_COUNTS),
    )
    verify_status = cmd_verify(base)

    failures = _repro_tolerance_checks(base)
    mismatches = _golden_diff(base)
    lines = ["# achieved-vs-reference tolerance checks and golden CSV diff"]
    lines += [f"FAIL {f}" for f in failures]
    lines += [f"FAIL {m}" for m in mismatches]
    if verify_status != EXIT_OK:
        lines.append("FAIL functional verification suite")
    ok = len(lines) == 1
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    atomic_write_text(base.out / "repro.txt", "\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_VERIFY


_COMMANDS = {
    "project": cmd_project,
    "map": cmd_map,
    "schedule": cmd_schedule,
    "simulate": cmd_simulate,
    "cost": cmd_cost,
    "dse": cmd_dse,
    "verify": cmd_verify,
    "repro": cmd_repro,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="run configuration file (key = value)")
    shared.add_argument("--model", help="built-in model name or 'all'")
    shared.add_argument(
        "--strategy", choices=STRATEGIES + ("all",), help="mapping strategy"
    )
    shared.add_argument("--m", type=int, help="crossbar array dimension")
    shared.add_argument("--adcs", help="comma-separated ADC counts per array")
    shared.add_argument("--out", help="output directory")
    shared.add_argument("--seed", type=int, help="seed for randomized fixtures")
    shared.add_argument(
        "--paper-repro",
        action="store_true",
        help="use the published baseline configuration and diff against goldens",
    )
    parser = argparse.ArgumentParser(
        prog="monarchcim", description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub.add_parser(name, parents=[shared])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        thread_cap()
        cfg = resolve_config(args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CalibrationError, MappingError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (OSError, ValueError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
