"""Distribution of the log-power count over small diagrams.

Compares 2-connected subdivergences with the variant that also admits
bridged ones, split by tree family and by the sign of the overall degree.
"""

from __future__ import annotations

import argparse
from collections import Counter

from corpus import distinct_diagrams
from fracphi3.diagrams import diagram_degree_form
from fracphi3.hepp import zeta
from fracphi3.trees import ModelParams

GRID = ((3, 1.05), (3, 1.2), (4, 1.6), (5, 1.7), (5, 2.0), (2, 0.8))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-k", type=int, default=3)
    args = ap.parse_args()
    corpus = distinct_diagrams(args.max_k)
    print("d,rho,family,divergent,bridges,zeta,count")
    for d, rho in GRID:
        pm = ModelParams(d=d, rho=rho)
        counts: Counter = Counter()
        for g, full in corpus:
            div = diagram_degree_form(g).at(pm) <= 0
            for bridged in (False, True):
                z = zeta(g, pm, allow_bridges=bridged)
                key = ("full" if full else "almost", div, bridged, z)
                counts[key] += 1
        for key in sorted(counts):
            print(f"{d},{rho},{key[0]},{key[1]},{key[2]},{key[3]},{counts[key]}")


if __name__ == "__main__":
    main()
