"""Exhaustive check of the sector exponent lemma over small diagrams."""

from __future__ import annotations

import argparse
import time

from corpus import distinct_diagrams
from fracphi3.hepp import sweep_eta_lemma
from fracphi3.trees import ModelParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--rho", type=float, default=1.05)
    ap.add_argument("--max-k", type=int, default=3)
    ap.add_argument("--max-vertices", type=int, default=6)
    args = ap.parse_args()

    diagrams = [g for g, _ in distinct_diagrams(args.max_k, args.max_vertices)]
    start = time.perf_counter()
    sweep = sweep_eta_lemma(diagrams, ModelParams(d=args.d, rho=args.rho))
    print(f"diagrams {len(diagrams)}  contexts {sweep.contexts}  time {time.perf_counter() - start:.1f}s")
    if sweep.ok:
        print("all checks hold")
    for name, count in sorted(sweep.failures.items()):
        print(f"FAIL {name}: {count}  e.g. {sweep.examples[name]}")


if __name__ == "__main__":
    main()
