"""Numerical checks of the simplest renormalisation constants and their eps-scaling.

All kernels are radial.  Spatial integrals against the Riesz kernel are done
either in real space (radial quadrature) or in Fourier space using the radial
Fourier transform of the mollifier; the two routes are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate, interpolate, special


class QuadratureError(RuntimeError):
    """Raised when a quadrature does not reach its tolerance."""


class FitError(ValueError):
    """Raised for ill-conditioned scaling fits."""


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def _gauss_panels(a: float, b: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _check_range(d: int, rho: float) -> None:
    if not (0 < rho < d):
        raise ValueError(f"need 0 < rho < d, got d={d}, rho={rho}")


# ---------------------------------------------------------------- Riesz kernel


def riesz_constant(d: int, rho: float) -> float:
    """c with (Delta^{rho/2})^{-1}(x) = c |x|^{rho-d} on R^d."""
    _check_range(d, rho)
    return math.gamma((d - rho) / 2) / (2 ** rho * math.pi ** (d / 2) * math.gamma(rho / 2))


def _subordination_integrand(t: np.ndarray | float, d: int, rho: float):
    # |k|^{-rho} = Gamma(rho/2)^{-1} int t^{rho/2-1} e^{-t|k|^2} dt, inverted at |x| = 1
    return t ** (rho / 2 - 1) * (4 * math.pi * t) ** (-d / 2) * np.exp(-1 / (4 * t)) / math.gamma(rho / 2)


def riesz_constant_numeric(d: int, rho: float, method: str = "adaptive") -> float:
    """The same constant from the heat-kernel representation of |k|^{-rho}.

    ``adaptive`` uses scipy's adaptive quadrature on (0, inf); ``gauss_legendre``
    uses fixed panels in log t up to t = 1e40, whose truncation error is of order
    1e40^{-(d-rho)/2} and so needs d - rho >= 1/2 for 1e-8 accuracy.
    """
    _check_range(d, rho)
    if method == "adaptive":
        f = lambda t: _subordination_integrand(t, d, rho)
        lo, err1 = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13, limit=400)
        hi, err2 = integrate.quad(f, 1, np.inf, epsabs=0, epsrel=1e-13, limit=400)
        if err1 + err2 > 1e-9 * abs(lo + hi):
            raise QuadratureError("subordination integral did not converge")
        return lo + hi
    if method == "gauss_legendre":
        s, w = _gauss_panels(-8 * math.log(10), 40 * math.log(10), 480, 16)
        t = np.exp(s)
        return float(np.sum(w * t * _subordination_integrand(t, d, rho)))
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------- mollifiers


def _bump(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(-1 / (1 - r[inside] ** 2))
    return out


def _quartic(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.where(np.abs(r) < 1, (1 - r ** 2) ** 4, 0.0)


PROFILES = {"bump": _bump, "quartic": _quartic}


def _bessel_kernel(nu: float, kr: np.ndarray) -> np.ndarray:
    """Gamma(nu+1) J_nu(z) (z/2)^{-nu}, the angular average of e^{ik.x}."""
    if nu == -0.5:
        return np.cos(kr)
    if nu == 0:
        return special.j0(kr)
    if nu == 0.5:
        return np.sinc(kr / math.pi)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = special.gamma(nu + 1) * special.jv(nu, kr) * (kr / 2) ** (-nu)
    out[kr == 0] = 1.0
    return out


@dataclass(frozen=True)
class Mollifier:
    """Radial spatial profile on |x| < scale (scale <= 1) and an even temporal profile."""

    d: int
    spatial: str = "bump"
    scale: float = 1.0
    temporal: str = "bump"
    fourier_max: float = 800.0
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self) -> None:
        if self.spatial not in PROFILES or self.temporal not in PROFILES:
            raise ValueError(f"unknown profile preset; choose from {sorted(PROFILES)}")
        if not (0 < self.scale <= 1):
            raise ValueError("support radius must lie in (0, 1]")

    @cached_property
    def _radial_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return _gauss_panels(0.0, self.scale, 64, 32)

    @cached_property
    def norm(self) -> float:
        """Constant making the spatial profile integrate to one."""
        r, w = self._radial_nodes
        mass = sphere_area(self.d) * np.sum(w * PROFILES[self.spatial](r / self.scale) * r ** (self.d - 1))
        return 1.0 / float(mass)

    @cached_property
    def temporal_norm(self) -> float:
        t, w = _gauss_panels(-1.0, 1.0, 64, 32)
        return 1.0 / float(np.sum(w * PROFILES[self.temporal](t)))

    def profile(self, r: np.ndarray | float) -> np.ndarray:
        """Spatial density at radius r."""
        return self.norm * PROFILES[self.spatial](np.asarray(r, dtype=float) / self.scale)

    def temporal_profile(self, t: np.ndarray | float) -> np.ndarray:
        return self.temporal_norm * PROFILES[self.temporal](np.asarray(t, dtype=float))

    def mass(self) -> float:
        r, w = self._radial_nodes
        return float(sphere_area(self.d) * np.sum(w * self.profile(r) * r ** (self.d - 1)))

    def fourier(self, k: np.ndarray | float) -> np.ndarray:
        """Radial Fourier transform, by Gauss-Legendre panels against a Bessel kernel."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        r, w = self._radial_nodes
        nu = self.d / 2 - 1
        f = w * self.profile(r) * r ** (self.d - 1)
        out = np.empty_like(k)
        for i in range(0, k.size, 512):
            kernel = _bessel_kernel(nu, np.outer(k[i:i + 512], r))
            out[i:i + 512] = sphere_area(self.d) * kernel @ f
        return out

    def fourier_table(self) -> interpolate.CubicSpline:
        """Cubic spline of the Fourier transform on [0, fourier_max]; zero beyond."""
        if "table" not in self._cache:
            u = np.linspace(0.0, self.fourier_max, 24001)
            self._cache["table"] = interpolate.CubicSpline(u, self.fourier(u))
        return self._cache["table"]

    def fourier_fast(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        out = np.zeros_like(k)
        m = k <= self.fourier_max
        out[m] = self.fourier_table()(k[m])
        return out


@lru_cache(maxsize=None)
def default_mollifier(d: int) -> Mollifier:
    return Mollifier(d)


# ---------------------------------------------------------------- A0 and the cherry value


def _real_moment(mollifier: Mollifier, power: float, method: str = "adaptive") -> float:
    """int rho_1(x) |x|^{power} dx by radial quadrature."""
    d, R = mollifier.d, mollifier.scale
    if method == "adaptive":
        s = power + d - 1
        f = lambda r: float(mollifier.profile(r))
        val, err = integrate.quad(f, 0, R, weight="alg", wvar=(s, 0), epsabs=0, epsrel=1e-12, limit=400)
        if err > 1e-9 * abs(val):
            raise QuadratureError("radial moment did not converge")
        return sphere_area(d) * val
    if method == "gauss_legendre":
        # r = R u^{1/m} with m = power + d removes the endpoint singularity
        m = power + d
        u, w = _gauss_panels(0.0, 1.0, 200, 16)
        r = R * u ** (1 / m)
        return float(sphere_area(d) * R ** m / m * np.sum(w * mollifier.profile(r)))
    raise ValueError(f"unknown method {method!r}")


def _fourier_moment(mollifier: Mollifier, power: float, cube: bool = False) -> float:
    """(2 pi)^{-d} int |k|^{power} rho_1^(k) (or its cube) dk, by panels in log k."""
    d = mollifier.d
    s, w = _gauss_panels(math.log(1e-12), math.log(mollifier.fourier_max), 600, 16)
    k = np.exp(s)
    f = mollifier.fourier(k)
    if cube:
        f = f ** 3
    return float(sphere_area(d) * np.sum(w * k ** (power + d) * f) / (2 * math.pi) ** d)


def a0_value(mollifier: Mollifier, rho: float, method: str = "adaptive") -> float:
    """-1/2 c(d, rho) int rho_1(x) |x|^{rho-d} dx, the eps -> 0 limit of the normalized cherry value."""
    d = mollifier.d
    _check_range(d, rho)
    return -0.5 * riesz_constant(d, rho) * _real_moment(mollifier, rho - d, method)


def a0_fourier(mollifier: Mollifier, rho: float) -> float:
    """Same constant evaluated in Fourier space: -1/2 (2 pi)^{-d} int |k|^{-rho} rho_1^(k) dk."""
    _check_range(mollifier.d, rho)
    return -0.5 * _fourier_moment(mollifier, -rho)


def green_mollified_at_zero(eps: float, rho: float, mollifier: Mollifier) -> float:
    """(rho_1^eps *_x G_rho)(0) by Fourier quadrature of |k|^{-rho} rho_1^(eps k) on an eps-independent grid."""
    d = mollifier.d
    _check_range(d, rho)
    if eps <= 0:
        raise ValueError("eps must be positive")
    s, w = _gauss_panels(math.log(1e-6), math.log(mollifier.fourier_max * 1e5), 2000, 8)
    k = np.exp(s)
    f = mollifier.fourier_fast(eps * k)
    return float(sphere_area(d) * np.sum(w * k ** (d - rho) * f) / (2 * math.pi) ** d)


def green_mollified_real(eps: float, rho: float, mollifier: Mollifier) -> float:
    """Same value in real space: c eps^{rho-d} int rho_1(x) |x|^{rho-d} dx."""
    d = mollifier.d
    return riesz_constant(d, rho) * eps ** (rho - d) * _real_moment(mollifier, rho - d)


# ---------------------------------------------------------------- scaling fits


def geometric_grid(start: float, stop: float, n: int) -> np.ndarray:
    if n < 2 or start <= 0 or stop <= 0:
        raise ValueError("geometric grid needs n >= 2 and positive endpoints")
    return np.geomspace(start, stop, n)


def parse_grid(text: str) -> np.ndarray:
    """'1e-1:1e-4:8' -> 8 geometrically spaced points."""
    try:
        a, b, n = text.split(":")
        return geometric_grid(float(a), float(b), int(n))
    except ValueError as exc:
        raise ValueError(f"bad grid {text!r}: expected start:stop:count") from exc


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    r2: float


def scaling_fit(eps_grid: np.ndarray, values: np.ndarray) -> ScalingFit:
    """Least-squares slope of log|value| against log eps."""
    x = np.log(np.asarray(eps_grid, dtype=float))
    y = np.log(np.abs(np.asarray(values, dtype=float)))
    if x.size < 5:
        raise FitError("need at least 5 grid points")
    ratios = np.diff(x)
    if not np.allclose(ratios, ratios[0], rtol=1e-6, atol=0) or ratios[0] == 0:
        raise FitError("grid must be geometric")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2) / ss) if ss > 0 else 1.0
    return ScalingFit(float(slope), float(math.exp(intercept)), r2)


@dataclass(frozen=True)
class ScalingRow:
    eps: float
    value: float
    normalized: float


def green_scaling(eps_grid: np.ndarray, rho: float, mollifier: Mollifier) -> tuple[list[ScalingRow], ScalingFit]:
    d = mollifier.d
    rows = []
    for eps in eps_grid:
        v = green_mollified_at_zero(float(eps), rho, mollifier)
        rows.append(ScalingRow(float(eps), v, v * float(eps) ** (d - rho)))
    fit = scaling_fit(eps_grid, [r.value for r in rows])
    return rows, fit


# ---------------------------------------------------------------- Abar0


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    stderr: float
    samples: int
    reliable: bool


def abar0_quadrature(mollifier: Mollifier, rho: float) -> float:
    """-(2 pi)^{-d} int |k|^{-2 rho} rho_1^(k)^3 dk (spatial mollification only)."""
    d = mollifier.d
    if not (0 < 2 * rho < d):
        raise ValueError("the almost-full constant diverges only for rho < d/2")
    return -_fourier_moment(mollifier, -2 * rho, cube=True)


def abar0_estimate(eps: float, rho: float, mollifier: Mollifier, samples: int = 200_000,
                   seed: int = 0, max_rel_stderr: float = 0.1, normalized: bool = True) -> MonteCarloEstimate:
    """Importance-sampled -2 int P(t,x) (G^eps *_x P~^eps)(|t|,x) dt dx.

    In Fourier variables the integrand is e^{-2t|k|^rho} |k|^{-rho} rho_1^(eps k)^3;
    t ~ Exp(2|k|^rho) given |k| and |k| has density proportional to
    |k|^{d-2rho-1} on [0, K/eps], so only the mollifier factor fluctuates.
    ``normalized`` multiplies by eps^{d-2rho}.
    """
    d = mollifier.d
    m = d - 2 * rho
    if m <= 0:
        raise ValueError("the almost-full constant diverges only for rho < d/2")
    if eps <= 0 or samples < 100:
        raise ValueError("need eps > 0 and at least 100 samples")
    rng = np.random.default_rng(seed)
    kmax = mollifier.fourier_max / eps
    k = kmax * rng.random(samples) ** (1 / m)
    t = rng.exponential(1.0 / (2 * k ** rho))
    # integrand / (density of k) / (density of t given k)
    integrand = np.exp(-2 * t * k ** rho) * k ** (d - 1 - rho) * mollifier.fourier_fast(eps * k) ** 3
    dens_k = m * k ** (m - 1) / kmax ** m
    dens_t = 2 * k ** rho * np.exp(-2 * t * k ** rho)
    weights = -2 * sphere_area(d) / (2 * math.pi) ** d * integrand / (dens_k * dens_t)
    scale = eps ** m if normalized else 1.0
    value = float(weights.mean()) * scale
    stderr = float(weights.std(ddof=1) / math.sqrt(samples)) * scale
    return MonteCarloEstimate(value, stderr, samples, stderr <= max_rel_stderr * abs(value))
