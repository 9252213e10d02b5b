"""Baseline reference targets for the d_model=1024 transformer suite.

These are the published measurements the calibrated cost model is fitted
against and that `monarchcim repro` compares fresh runs to: array counts and
aggregate utilization per mapping strategy, end-to-end latency/energy at one
ADC per array, and the BERT ADC-sharing sweep. Latencies in microseconds,
energies in microjoules.
"""

from __future__ import annotations

MODELS = ("bert-large", "bart-large", "gpt2-medium")
STRATEGIES = ("linear", "sparse", "dense")

# arrays required at m=256
REFERENCE_ARRAYS = {
    "bert-large": {"linear": 4608, "sparse": 2304, "dense": 608},
    "bart-large": {"linear": 5376, "sparse": 2304, "dense": 608},
    "gpt2-medium": {"linear": 4608, "sparse": 2688, "dense": 672},
}

# aggregate array utilization (fraction of cells holding nonzeros)
REFERENCE_UTILIZATION = {
    "bert-large": {"linear": 1.0, "sparse": 0.208, "dense": 0.789},
    "bart-large": {"linear": 1.0, "sparse": 0.196, "dense": 0.789},
    "gpt2-medium": {"linear": 1.0, "sparse": 0.208, "dense": 0.789},
}

# end-to-end inference latency (us) at one ADC per array
REFERENCE_LATENCY_US = {
    "bert-large": {"linear": 310.400, "sparse": 194.145, "dense": 174.362},
    "bart-large": {"linear": 380.800, "sparse": 238.178, "dense": 230.880},
    "gpt2-medium": {"linear": 310.400, "sparse": 194.145, "dense": 174.362},
}

# end-to-end inference energy (uJ) at one ADC per array
REFERENCE_ENERGY_UJ = {
    "bert-large": {"linear": 1575.08, "sparse": 974.3525, "dense": 880.4675},
    "bart-large": {"linear": 1941.44, "sparse": 1198.9925, "dense": 1168.44},
    "gpt2-medium": {"linear": 1579.84, "sparse": 977.3275, "dense": 882.2525},
}

# BERT ADC-sharing sweep: n_adc -> (latency_us, energy_uJ)
REFERENCE_DSE = {
    "linear": {
        4: (77.600, 411.080),
        8: (38.800, 217.080),
        16: (19.400, 120.080),
        32: (9.700, 71.580),
    },
    "sparse": {
        4: (48.536, 246.306),
        8: (24.268, 124.965),
        16: (12.134, 64.295),
        32: (6.067, 33.960),
    },
    "dense": {
        4: (43.590, 226.608),
        8: (21.795, 117.631),
        16: (21.795, 117.631),
        32: (21.795, 117.631),
    },
}

# ADC resolution (bits) required per strategy at the reference geometry
REFERENCE_ADC_BITS = {"linear": 8, "sparse": 5, "dense": 3}
