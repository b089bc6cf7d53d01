"""Scatterer imprint on the hologram as the bucket wall grows toward the full plane.

Prints the interference and scatterer-only terms relative to the direct term.
The single-scattering model does not deplete the direct path, so the effective
source-to-wall system is not unitary and the imprint stays finite even with a
full wall.

Usage: python scripts/wall_coverage.py
"""

import argparse
from dataclasses import replace

import numpy as np

from qholo.config import build, preset
from qholo.scene import hologram_decomposition


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="fig1")
    args = ap.parse_args()

    base = preset(args.preset)
    half = base.wall_grid.extent[0] / 2
    print("wall fraction   max|interference|/max p0   max scattered/max p0")
    for frac in (0.05, 0.1, 0.25, 0.5, 0.75, 1.0):
        edge = frac * half
        lo = (-edge,) * base.wall_grid.ndim
        hi = (edge,) * base.wall_grid.ndim
        cfg = replace(base, wall_mask=("full",) if frac == 1.0 else ("box", lo, hi))
        scene, pump, h2 = build(cfg)
        d = hologram_decomposition(scene, pump, h2)
        p0 = d.direct.values.max()
        print(f"{frac:13.2f}   {np.abs(d.interference).max() / p0:24.3e}   {d.scattered.values.max() / p0:20.3e}")


if __name__ == "__main__":
    main()
