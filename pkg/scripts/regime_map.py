"""Regime map over (rho, eps) and the approach of the threshold to zero near criticality."""

from __future__ import annotations

import argparse
import math

import numpy as np

from fracphi3.asymptotics import BoundConfig, log_eps_c, regime_map
from fracphi3.trees import ModelParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--points", type=int, default=12)
    args = ap.parse_args()
    rho_c = args.d / 3
    rhos = [rho_c + s for s in np.linspace(0.02, 0.45, args.points) * rho_c]
    epss = list(np.geomspace(1e-1, 1e-12, args.points))
    print(regime_map(args.d, rhos, epss, BoundConfig()), end="")

    print("\ns,log_eps_c,-s*log_eps_c-log(1/s)")
    for s in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        le = log_eps_c(ModelParams(d=args.d, rho=rho_c + s))
        print(f"{s:g},{le:.6g},{-s * le - math.log(1 / s):.6g}")


if __name__ == "__main__":
    main()
