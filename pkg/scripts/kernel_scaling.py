"""Mollified kernel diagnostics: Riesz constants, A0 routes, scaling fits and the Abar0 estimate."""

from __future__ import annotations

from fracphi3.kerneleval import (
    a0_fourier,
    a0_value,
    abar0_estimate,
    abar0_quadrature,
    default_mollifier,
    geometric_grid,
    green_scaling,
    riesz_constant,
    riesz_constant_numeric,
)


def main() -> None:
    print("d,rho,riesz_closed,riesz_adaptive,riesz_gl")
    for d, rho in ((3, 2.0), (3, 1.0), (2, 1.0), (3, 1.2), (5, 1.7)):
        print(f"{d},{rho},{riesz_constant(d, rho):.12g},{riesz_constant_numeric(d, rho):.12g},"
              f"{riesz_constant_numeric(d, rho, method='gauss_legendre'):.12g}")

    print("\nd,rho,a0_adaptive,a0_gauss_legendre,a0_fourier")
    for d, rho in ((3, 1.2), (2, 0.8), (3, 1.05)):
        m = default_mollifier(d)
        print(f"{d},{rho},{a0_value(m, rho):.10g},{a0_value(m, rho, method='gauss_legendre'):.10g},"
              f"{a0_fourier(m, rho):.10g}")

    print("\nd,rho,fitted_exponent,expected,r2")
    for d, rho in ((2, 0.8), (3, 1.2), (3, 1.05)):
        _, fit = green_scaling(geometric_grid(1e-1, 1e-4, 8), rho, default_mollifier(d))
        print(f"{d},{rho},{fit.exponent:.6f},{-(d - rho):.6f},{fit.r2:.8f}")

    m = default_mollifier(3)
    est = abar0_estimate(0.1, 1.2, m)
    print(f"\nAbar0 at (3, 1.2): quadrature {abar0_quadrature(m, 1.2):.6g}, "
          f"Monte Carlo {est.value:.6g} +- {est.stderr:.2g}")


if __name__ == "__main__":
    main()
