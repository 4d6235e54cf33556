"""Counting data: tree enumeration, pairing reductions, weights and the log coefficients r(k)."""

from __future__ import annotations

import argparse
from collections import Counter
from math import comb

from corpus import paired
from fracphi3.asymptotics import combinatorial_weight, fit_r_constant
from fracphi3.trees import TreeClass, classify, enumerate_full, wedderburn_etherington


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-k", type=int, default=6)
    ap.add_argument("--pairing-k", type=int, default=3)
    args = ap.parse_args()

    print("k,full_trees,WE(2k+2),tree_sum,catalan(2k+1),WE*2^(2k+1)")
    for k in range(args.max_k + 1):
        w = combinatorial_weight(k)
        catalan = comb(4 * k + 2, 2 * k + 1) // (2 * k + 2)
        print(f"{k},{len(enumerate_full(k))},{wedderburn_etherington(2 * k + 2)},{w.tree_sum},{catalan},"
              f"{w.wedderburn_etherington * w.per_tree_bound}")

    print("\nfamily,p,vertices_minus_(q-p),prefactor,count")
    stats: Counter = Counter()
    for t, _, g, pref in paired(args.pairing_k):
        fam = "full" if classify(t) is TreeClass.FULL else "almost"
        stats[(fam, t.p, len(g.vertices) - (t.q - t.p), pref)] += 1
    for key in sorted(stats):
        fam, p, dv, pref = key
        print(f"{fam},{p},{dv},{pref},{stats[key]}")

    print("\nk_max,r_constant")
    for km in range(3, 32, 4):
        print(f"{km},{fit_r_constant(km):.6f}")



if __name__ == "__main__":
    main()
