"""Bound-recursion tables for the nested-bubble diagram in three sectors.

Prints the near-critical table in d/3 units, the effect of the unsafe
correction, and the degenerate sector at (d, rho) = (5, 2).
"""

from __future__ import annotations

from fractions import Fraction

from corpus import gamma2_pieces
from fracphi3.hepp import SectorContext, Units, bound_recursion, eta_geq, eta_profiles, parse_hepp, unsafe_corrections
from fracphi3.trees import ModelParams

ORDER = ("e", "d", "c", "b", "a")


def main() -> None:
    g, inner, outer = gamma2_pieces()

    print("# near-critical sector, d/3 units")
    near = ModelParams(d=3, rho=Fraction("1.0000001"))
    ctx = SectorContext(g, frozenset([inner, outer]), parse_hepp("((((1 2)#d 3)#c (4 6)#e)#b 5)#a"), near,
                        Units.THIRDS_OF_D)
    profile = bound_recursion(ctx)
    print(profile.to_csv(ORDER), end="")
    print(f"eps exponent {profile.eps_exponent}, log power {profile.log_power}\n")

    print("# sector with an unsafe inner bubble, rho = 1.15")
    h = parse_hepp("((((4 5)#d (1 2)#e)#c 6)#b 3)#a")
    ctx = SectorContext(g, frozenset([outer]), h, ModelParams(d=3, rho=1.15))
    for c in unsafe_corrections(ctx):
        print(f"correction: up={h.name(c.up)} upup={h.name(c.upup)} n={c.n}")
    c0, e0 = eta_profiles(ctx, hatted=False)
    c1, e1 = eta_profiles(ctx, hatted=True)
    print("node,eta,eta_hat")
    for u in h.inner:
        print(f"{h.name(u)},{c0[u] + e0[u]},{c1[u] + e1[u]}")
    print()

    print("# degenerate sector, (d, rho) = (5, 2)")
    h = parse_hepp("(((1 2)#c 3)#b ((4 6)#e 5)#d)#a")
    ctx = SectorContext(g, frozenset([outer]), h, ModelParams(d=5, rho=2))
    print("node,eta_geq")
    for u in h.inner:
        print(f"{h.name(u)},{eta_geq(ctx, u)}")


if __name__ == "__main__":
    main()
