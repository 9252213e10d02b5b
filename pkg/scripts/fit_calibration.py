#!/usr/bin/env python3
"""Regenerate src/monarchcim/data/calibration.txt from the baseline reference
measurements (BERT-large, one reference attention projection geometry)."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from monarchcim.cost import calibration_to_text, fit_calibration
from monarchcim.reference import (
    REFERENCE_DSE,
    REFERENCE_ENERGY_UJ,
    REFERENCE_LATENCY_US,
    STRATEGIES,
)


def main():
    calibs, residuals = {}, {}
    for strategy in STRATEGIES:
        points = dict(REFERENCE_DSE[strategy])
        points[1] = (
            REFERENCE_LATENCY_US["bert-large"][strategy],
            REFERENCE_ENERGY_UJ["bert-large"][strategy],
        )
        calibs[strategy], residuals[strategy] = fit_calibration(strategy, points)
    out = pathlib.Path(__file__).resolve().parents[1] / (
        "src/monarchcim/data/calibration.txt"
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(calibration_to_text(calibs, residuals))
    print(f"wrote {out}")
    for s in STRATEGIES:
        r = residuals[s]
        print(f"{s}: latency residual {r['latency']:.3e}, "
              f"energy residual {r['energy']:.3e}")


if __name__ == "__main__":
    main()
