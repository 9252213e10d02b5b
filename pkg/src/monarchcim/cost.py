"""Latency/energy estimation under ADC sharing.

The ADC is the serialization bottleneck: per-array latency is the time to run
all column conversions of the schedule through min(n_adc, p_max) converters,
where p_max is the widest conversion group the schedule ever issues (DenseMap
walks only m/b columns at a time, so extra ADCs beyond that are idle).
Conversion time scales linearly with ADC resolution relative to the 8b SAR
baseline. End-to-end latency is cps * per-array conversion time, where cps
(critical-path scale, the number of serialized array activations end to end)
and the fixed energy offset are calibrated once against baseline reference
measurements; energy is affine in latency with a constant conversion power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .crossbar import ADCConfig
from .errors import CalibrationError
from .mapping import STRATEGIES, build_plan
from .scheduler import CommandStream, build_schedule
from .workload import MatmulLayer


@dataclass(frozen=True)
class CostParams:
    """Baseline CIM device/digital parameters (256x256 PCM, d_model=1024)."""

    t_mvm_ns: float = 100.0
    e_mvm_nJ: float = 10.0
    t_adc_8b_ns: float = 0.833
    e_adc_8b_nJ: float = 13.33e-3
    t_comm_ns: float = 48.0
    e_comm_nJ: float = 51.7
    t_layernorm_ns: float = 100.0
    e_layernorm_nJ: float = 42.0
    t_relu_ns: float = 1.0
    e_relu_nJ: float = 0.06
    t_gelu_ns: float = 70.0
    e_gelu_nJ: float = 38.5
    t_add_ns: float = 36.0
    e_add_nJ: float = 37.7


DEFAULT_PARAMS = CostParams()

REFERENCE_D_MODEL = 1024
REFERENCE_M = 256


@dataclass(frozen=True)
class CalibrationConstants:
    strategy: str
    cps: float  # serialized array activations on the critical path
    e_fixed_uJ: float  # latency-independent energy
    p_conv_uJ_per_us: float  # conversion power (energy slope vs latency)
    p_max: int  # widest conversion group the schedule issues
    conv_per_array: int  # conversions per array in the reference schedule
    bits: int  # ADC resolution at the reference geometry


@dataclass(frozen=True)
class CostEstimate:
    strategy: str
    n_adc: int
    bits: int
    conversions: int
    latency_us: float
    energy_uJ: float
    # components sum exactly to the totals above
    latency_breakdown_us: dict[str, float] | None = None
    energy_breakdown_uJ: dict[str, float] | None = None


def adc_bits_required(max_active_rows: int) -> int:
    """Resolution needed to separate the analog sum of max_active_rows cells,
    clamped to the 1..8 range of the SAR baseline."""
    if max_active_rows < 1:
        raise ValueError("max_active_rows must be >= 1")
    return min(8, max(1, math.ceil(math.log2(max_active_rows))))


def conversion_latency_us(
    n_conversions: int,
    bits: int,
    n_adc: int,
    p_max: int,
    params: CostParams = DEFAULT_PARAMS,
) -> float:
    """Time to push n_conversions through min(n_adc, p_max) ADCs at `bits`."""
    if n_adc < 1:
        raise ValueError("n_adc must be >= 1")
    t_per = params.t_adc_8b_ns * 1e-3 * (bits / 8.0)
    return n_conversions * t_per / min(n_adc, p_max)


def reference_stream(strategy: str, m: int = REFERENCE_M) -> CommandStream:
    """Schedule of one reference attention projection (d_model x d_model)."""
    mm = MatmulLayer(REFERENCE_D_MODEL, REFERENCE_D_MODEL, "Q")
    plan = build_plan(strategy, [mm], m)
    return build_schedule(plan, ADCConfig(adcs_per_array=1))


def fit_calibration(
    strategy: str,
    points: dict[int, tuple[float, float]],
    params: CostParams = DEFAULT_PARAMS,
) -> tuple[CalibrationConstants, dict[str, float]]:
    """Least-squares fit of (cps, e_fixed, p_conv) to {n_adc: (lat_us, e_uJ)}.

    Returns the constants and the maximum relative residuals. Raises
    CalibrationError when the system is rank-deficient (all latencies equal,
    leaving the energy intercept/slope split unidentifiable).
    """
    if len(points) < 3:
        raise CalibrationError("need at least three (n_adc, latency, energy) points")
    meta = reference_stream(strategy).meta
    conv = max(meta.conversions_per_array.values())
    bits = adc_bits_required(meta.max_active_rows)
    n_adcs = sorted(points)
    lats = np.array([points[n][0] for n in n_adcs])
    energies = np.array([points[n][1] for n in n_adcs])

    base = np.array(
        [conversion_latency_us(conv, bits, n, meta.p_max, params) for n in n_adcs]
    )
    cps = float(np.dot(base, lats) / np.dot(base, base))
    if np.ptp(lats) == 0:
        raise CalibrationError(
            "energy fit is rank-deficient: latencies are all identical"
        )
    p_conv, e_fixed = np.polyfit(lats, energies, 1)

    lat_fit = cps * base
    e_fit = e_fixed + p_conv * lats
    residuals = {
        "latency": float(np.max(np.abs(lat_fit - lats) / lats)),
        "energy": float(np.max(np.abs(e_fit - energies) / energies)),
    }
    calib = CalibrationConstants(
        strategy=strategy,
        cps=cps,
        e_fixed_uJ=float(e_fixed),
        p_conv_uJ_per_us=float(p_conv),
        p_max=meta.p_max,
        conv_per_array=conv,
        bits=bits,
    )
    return calib, residuals


def estimate(
    calib: CalibrationConstants,
    n_adc: int,
    params: CostParams = DEFAULT_PARAMS,
    scale: float = 1.0,
    include_aux_latency: bool = False,
) -> CostEstimate:
    """Latency/energy at n_adc ADCs per array; scale rescales the workload
    relative to the calibration reference (ratio of arrays required).

    The critical path is conversion-dominated by default; include_aux_latency
    adds the MVM + communication time of the serialized array activations
    (carried in the breakdown either way).
    """
    t_conv = scale * calib.cps * conversion_latency_us(
        calib.conv_per_array, calib.bits, n_adc, calib.p_max, params
    )
    t_aux = scale * calib.cps * (params.t_mvm_ns + params.t_comm_ns) * 1e-3
    latency = t_conv + (t_aux if include_aux_latency else 0.0)
    e_fixed = scale * calib.e_fixed_uJ
    e_conv = calib.p_conv_uJ_per_us * t_conv
    conversions = int(round(scale * calib.cps * calib.conv_per_array))
    return CostEstimate(
        strategy=calib.strategy,
        n_adc=n_adc,
        bits=calib.bits,
        conversions=conversions,
        latency_us=latency,
        energy_uJ=e_fixed + e_conv,
        latency_breakdown_us={
            "conversion": t_conv,
            "mvm_comm": t_aux if include_aux_latency else 0.0,
        },
        energy_breakdown_uJ={"fixed": e_fixed, "conversion": e_conv},
    )


def dse_sweep(
    calibrations: dict[str, CalibrationConstants],
    adc_counts,
    params: CostParams = DEFAULT_PARAMS,
    scale: float = 1.0,
) -> list[CostEstimate]:
    out = []
    for strategy in STRATEGIES:
        if strategy not in calibrations:
            continue
        for n in adc_counts:
            out.append(estimate(calibrations[strategy], n, params, scale))
    return out


# sweep-oriented alias for the calibration fit
dse_fit = fit_calibration


_FIELDS = {
    "cps": float,
    "e_fixed_uJ": float,
    "p_conv_uJ_per_us": float,
    "p_max": int,
    "conv_per_array": int,
    "bits": int,
}


def calibration_to_text(calibs, residuals=None) -> str:
    lines = ["# fitted cost-model constants; regenerate with scripts/fit_calibration.py"]
    for strategy in sorted(calibs):
        c = calibs[strategy]
        if residuals and strategy in residuals:
            r = residuals[strategy]
            lines.append(
                f"# {strategy}: max rel residual latency={r['latency']:.3e} "
                f"energy={r['energy']:.3e}"
            )
        for name, typ in _FIELDS.items():
            value = getattr(c, name)
            lines.append(f"{strategy}.{name} = {value!r}")
    return "\n".join(lines) + "\n"


def calibration_from_text(text: str) -> dict[str, CalibrationConstants]:
    raw: dict[str, dict[str, object]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line or "." not in line.split("=", 1)[0]:
            raise CalibrationError(f"malformed calibration line {lineno}: {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        strategy, name = key.split(".", 1)
        if name not in _FIELDS:
            raise CalibrationError(f"unknown calibration field {key!r}")
        try:
            raw.setdefault(strategy, {})[name] = _FIELDS[name](value)
        except ValueError as exc:
            raise CalibrationError(f"bad value on line {lineno}: {line!r}") from exc
    out = {}
    for strategy, fields in raw.items():
        missing = set(_FIELDS) - set(fields)
        if missing:
            raise CalibrationError(f"{strategy}: missing fields {sorted(missing)}")
        out[strategy] = CalibrationConstants(strategy=strategy, **fields)
    return out


def load_calibration() -> dict[str, CalibrationConstants]:
    """Load the packaged fitted constants."""
    ref = resources.files("monarchcim").joinpath("data/calibration.txt")
    try:
        text = ref.read_text()
    except FileNotFoundError as exc:
        raise CalibrationError("packaged calibration.txt is missing") from exc
    return calibration_from_text(text)
