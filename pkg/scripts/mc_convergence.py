"""L1 distance between sampled and analytic bucket marginals as the event count grows.

Usage: python scripts/mc_convergence.py [--seeds 5] [--max-exp 7]
"""

import argparse

import numpy as np

from qholo.biphoton import biphoton_amplitude, coincidence_rate, marginal_hologram
from qholo.config import build, preset
from qholo.montecarlo import bucket_histogram, convergence_report, sample_pairs
from qholo.scene import effective_h1


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="fig1")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--max-exp", type=int, default=7)
    args = ap.parse_args()

    scene, pump, h2 = build(preset(args.preset))
    p = coincidence_rate(biphoton_amplitude(pump, effective_h1(scene), h2))
    truth = marginal_hologram(p, scene.wall)
    print("n          mean L1    std L1     L1*sqrt(n)")
    for e in range(3, args.max_exp + 1):
        n = 10**e
        l1 = [convergence_report(bucket_histogram(sample_pairs(p, scene.wall, n, s)), truth).l1 for s in range(args.seeds)]
        print(f"{n:<10d} {np.mean(l1):.5f}    {np.std(l1):.5f}    {np.mean(l1) * np.sqrt(n):.2f}")


if __name__ == "__main__":
    main()
