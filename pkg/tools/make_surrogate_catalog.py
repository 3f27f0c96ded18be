#!/usr/bin/env python3
"""Regenerate the shipped surrogate catalog (ids 97..116).

The original GTOC 2 competition element snapshot is not redistributable here,
so the package ships a deterministic stand-in: 20 main-belt-like objects with
the same file schema and id range as the GTOC 2 asteroids 97-116 subset.
Absolute delta-V values therefore differ from runs on the real snapshot; see
README "Shipped catalog". Seed and distributions are fixed so the file is
reproducible bit-for-bit.
"""

import pathlib

import numpy as np

SEED = 20260810
OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "dvplan" / "data" / "catalog_97_116.csv"


def main() -> None:
    rng = np.random.default_rng(SEED)
    rows = []
    for oid in range(97, 117):
        a = rng.uniform(2.0, 3.2)
        e = rng.uniform(0.0, 0.25)
        inc = rng.uniform(0.0, 12.0)
        raan = rng.uniform(0.0, 360.0)
        argp = rng.uniform(0.0, 360.0)
        m0 = rng.uniform(0.0, 360.0)
        rows.append(f"{oid},{a:.10f},{e:.10f},{inc:.10f},{raan:.10f},{argp:.10f},{m0:.10f},0.0")
    header = (
        "# Surrogate main-belt catalog, ids 97..116 (deterministic stand-in for the\n"
        "# GTOC 2 asteroids 97-116 subset; the original competition snapshot is not\n"
        "# redistributable here -- see README 'Shipped catalog').\n"
        "# Angles in degrees, semi-major axis in AU, epoch0 in days MJD2000.\n"
        "id,a,e,i,raan,argp,M0,epoch0\n"
    )
    OUT.write_text(header + "\n".join(rows) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
