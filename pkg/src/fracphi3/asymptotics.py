"""Counterterm envelopes: thresholds, the per-k envelope F(k), regimes and weights.

The constants ``a``, ``M`` and ``A0`` are existential in the analysis and are
therefore configuration inputs.  Everything here is plain float arithmetic on
the closed-form expressions, except the double-factorial ratio which is exact.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .trees import (
    DEFAULT_ENUMERATION_CAP,
    ModelParams,
    enumerate_full,
    n_inner,
    n_sym,
    wedderburn_etherington,
)

# Documented only; the bounds keep ``a`` free.
BETA2 = 0.4026975


class ParameterRangeError(ValueError):
    """Raised outside the subcritical range where the envelopes are defined."""


class Regime(enum.Enum):
    POWER_LAW = "PowerLaw"
    LOGARITHMIC = "Logarithmic"
    ABSENT = "Absent"


class TreeFamily(enum.Enum):
    FULL = "full"
    ALMOST_FULL = "almost_full"


# ---------------------------------------------------------------- thresholds


def gap(params: ModelParams) -> float:
    """rho - rho_c."""
    return float(params.rho_exact - params.rho_c)


def _offset(params: ModelParams, bar: bool) -> Fraction:
    """d - rho for the full family, d - 2 rho for the almost-full one."""
    return params.d - (2 if bar else 1) * params.rho_exact


def k_max(params: ModelParams) -> float:
    return float(_offset(params, False) / (3 * (params.rho_exact - params.rho_c)))


def k_bar_max(params: ModelParams) -> float:
    return float(_offset(params, True) / (3 * (params.rho_exact - params.rho_c)))


def k_max_exact(params: ModelParams, bar: bool = False) -> Fraction:
    return _offset(params, bar) / (3 * (params.rho_exact - params.rho_c))


def alpha_k_exact(k: int | Fraction, params: ModelParams, bar: bool = False) -> Fraction:
    """Degree of the k-th family member: -(d - rho) + k (3 rho - d) (or d - 2 rho)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return -_offset(params, bar) + k * (3 * params.rho_exact - params.d)


def alpha_k(k: float, params: ModelParams) -> float:
    """-(d - rho)(1 - k / k_max)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return -float(_offset(params, False)) * (1 - k / k_max(params))


def alpha_bar_k(k: float, params: ModelParams) -> float:
    """-(d - 2 rho)(1 - k / kbar_max); requires rho < d/2."""
    if k < 0:
        raise ValueError("k must be non-negative")
    kb = k_bar_max(params)
    if kb <= 0:
        raise ParameterRangeError("the almost-full family is empty for rho >= d/2")
    return -float(_offset(params, True)) * (1 - k / kb)


def threshold_exponent(k: float, a: float = 0.0) -> float:
    """log k + a - log(k+1)/(2k), strictly increasing in k > 0."""
    if k <= 0:
        raise ParameterRangeError(f"threshold needs k > 0, got {k}")
    return math.log(k) + a - math.log(k + 1) / (2 * k)


def eps_threshold(k: float, params: ModelParams, a: float = 0.0) -> float:
    """exp{-(rho - rho_c)^{-1} [log k + a - log(k+1)/(2k)]}."""
    return math.exp(-threshold_exponent(k, a) / gap(params))


def log_eps_c(params: ModelParams, a: float = 0.0, bar: bool = False) -> float:
    """log eps_c (or log eps_bar_c), finite even where the threshold itself underflows."""
    km = k_bar_max(params) if bar else k_max(params)
    return -threshold_exponent(km, a) / gap(params)


def eps_c(params: ModelParams, a: float = 0.0) -> float:
    return eps_threshold(k_max(params), params, a)


def eps_bar_c(params: ModelParams, a: float = 0.0) -> float:
    return eps_threshold(k_bar_max(params), params, a)


# ---------------------------------------------------------------- envelope


def _xlogx(k: float) -> float:
    return 0.0 if k == 0 else k * math.log(k)


def b_eps(eps: float, params: ModelParams) -> float:
    return gap(params) * math.log(1.0 / eps)


def envelope_F(k: float, eps: float, params: ModelParams, a: float = 0.0,
               bar: bool = False, delta: float = 1.0) -> float:
    """k log k + (a - b_eps) k + b_eps k_max - log(k+1)/2, plus k log(delta)/3.

    ``bar`` uses kbar_max.  ``delta`` is the per-k parameter ratio g^2 sigma^2 / gamma^3.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    b = b_eps(eps, params)
    km = k_bar_max(params) if bar else k_max(params)
    return _xlogx(k) + (a - b) * k + b * km - 0.5 * math.log(k + 1) + k * math.log(delta) / 3


def H(eps: float, params: ModelParams, a: float = 0.0, bar: bool = False, delta: float = 1.0) -> float:
    """(F(k_max) - F(0)) / k_max; its sign decides the dominant end of the envelope."""
    km = k_bar_max(params) if bar else k_max(params)
    if km <= 0:
        raise ParameterRangeError("no divergent family member")
    F = envelope_F
    return (F(km, eps, params, a, bar, delta) - F(0, eps, params, a, bar, delta)) / km


def H_closed_form(eps: float, params: ModelParams, a: float = 0.0, bar: bool = False) -> float:
    """(rho - rho_c) log(eps / eps_c)."""
    return gap(params) * (math.log(eps) - log_eps_c(params, a, bar))


# ---------------------------------------------------------------- r(k), geometric sums


def double_factorial(n: int) -> int:
    """n!! with (-1)!! = 0!! = 1."""
    if n < -1:
        raise ValueError("double factorial needs n >= -1")
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def r(k: int, kmax: int | float) -> Fraction | None:
    """k_max!! (2k - k_max)!! / (2k + 1)!!, defined for odd integer k_max and k_max - 1 <= 2k <= 2 k_max.

    The lowest index 2k = k_max - 1 (where the ratio is 1) is the first term of the
    odd-k_max log correction; ``None`` outside the defined range.
    """
    if not float(kmax).is_integer():
        return None
    km = int(kmax)
    if km % 2 == 0 or km < 1 or not (km - 1 <= 2 * k <= 2 * km):
        return None
    return Fraction(double_factorial(km) * double_factorial(2 * k - km), double_factorial(2 * k + 1))


def fit_r_constant(kmax: int) -> float:
    """Smallest M with r(k) <= M 2^{-(2k - k_max)} for (k_max+1)/2 <= k <= k_max."""
    ks = range((kmax + 1) // 2, kmax + 1)
    vals = [float(r(k, kmax)) * 2.0 ** (2 * k - kmax) for k in ks if r(k, kmax) is not None]
    if not vals:
        raise ValueError(f"r(k) undefined for k_max={kmax}")
    return max(vals)


def geom_sum(beta: float, N: int, k0: int) -> float:
    """sum_{k=k0}^{N-1} e^{beta k} by direct summation."""
    return math.fsum(math.exp(beta * k) for k in range(k0, N))


def geom_sum_bound(beta: float, N: int, k0: int) -> float:
    """Upper bound: count of terms, or 1 + 1/|beta|, times the largest term.

    The three cases beta > 0, = 0, < 0 select the largest term e^{beta(N-1)},
    1 or e^{beta k0}.  The factor 1 + 1/|beta| (rather than 1/|beta|) makes the
    bound hold without hidden constants since 1/(1 - e^{-|beta|}) <= 1 + 1/|beta|.
    """
    n = max(N - k0, 0)
    if n == 0:
        return 0.0
    if beta == 0:
        return float(n)
    factor = min(n, 1.0 + 1.0 / abs(beta))
    top = beta * (N - 1) if beta > 0 else beta * k0
    return factor * math.exp(top)


# ---------------------------------------------------------------- combinatorics


@dataclass(frozen=True)
class CombinatorialWeight:
    k: int
    pairings: int
    hepp_bound: int | None
    forest_bound: int
    tree_sum: int
    tree_sum_exact: bool
    per_tree_bound: int
    wedderburn_etherington: int

    def to_json(self) -> dict:
        return asdict(self)


def combinatorial_weight(k: int, cap: int = DEFAULT_ENUMERATION_CAP) -> CombinatorialWeight:
    """Counting factors of the k-th full family (2k+2 leaves).

    ``tree_sum`` is sum over full trees of 2^{n_inner - n_sym}; above ``cap`` it
    is replaced by WE(2k+2) * 2^{2k+1} and flagged inexact.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    p = 2 * k + 2
    we = wedderburn_etherington(p)
    per_tree = 2 ** (2 * k + 1)
    if k <= cap:
        total = sum(2 ** (n_inner(t) - n_sym(t)) for t in enumerate_full(k, cap))
        exact_sum = True
    else:
        total, exact_sum = we * per_tree, False
    return CombinatorialWeight(
        k=k,
        pairings=double_factorial(2 * k + 1),
        hepp_bound=math.factorial(2 * k - 1) if k >= 1 else None,
        forest_bound=2 ** k,
        tree_sum=total,
        tree_sum_exact=exact_sum,
        per_tree_bound=per_tree,
        wedderburn_etherington=we,
    )


# ---------------------------------------------------------------- parameter extension


def parameter_prefactor(k: int, gamma: float, g: float, sigma: float,
                        family: TreeFamily = TreeFamily.FULL) -> float:
    """g^{p-1} sigma^p / gamma^{3p/2-2} (full) or g^p sigma^p / gamma^{3p/2-1}, p = 2k+2."""
    p = 2 * k + 2
    if family is TreeFamily.FULL:
        return g ** (p - 1) * sigma ** p / gamma ** (1.5 * p - 2)
    return g ** p * sigma ** p / gamma ** (1.5 * p - 1)


def delta_ratio(gamma: float, g: float, sigma: float) -> float:
    """g^2 sigma^2 / gamma^3, the ratio of consecutive prefactors."""
    return g * g * sigma * sigma / gamma ** 3


def scaling_parameters(alpha: float, beta: float, lam: float, params: ModelParams) -> tuple[float, float, float]:
    """(gamma, g, sigma) produced by rescaling u -> lam^alpha u, t -> lam^beta t, x -> lam x."""
    rho = float(params.rho_exact)
    return lam ** (beta - rho), lam ** (beta - alpha), lam ** (alpha + beta / 2 - params.d / 2)


def scaling_prediction(k: int, alpha: float, beta: float, lam: float, params: ModelParams,
                       family: TreeFamily = TreeFamily.FULL) -> float:
    """lam^{alpha+beta} lam^{deg} (full) or lam^{beta} lam^{deg} (almost-full), deg the family degree."""
    p = 2 * k + 2
    rho = float(params.rho_exact)
    deg = 1.5 * p * gap(params) - (2 * rho if family is TreeFamily.FULL else rho)
    outer = alpha + beta if family is TreeFamily.FULL else beta
    return lam ** (outer + deg)


def scaling_self_test(k: int, alpha: float, beta: float, lam: float, params: ModelParams,
                      family: TreeFamily = TreeFamily.FULL) -> float:
    """Relative deviation between the prefactor at rescaled parameters and the direct scaling."""
    gamma, g, sigma = scaling_parameters(alpha, beta, lam, params)
    lhs = parameter_prefactor(k, gamma, g, sigma, family)
    rhs = scaling_prediction(k, alpha, beta, lam, params, family)
    return abs(lhs / rhs - 1.0)


# ---------------------------------------------------------------- bounds


@dataclass(frozen=True)
class BoundConfig:
    """Existential constants and the optional (gamma, g, sigma) extension."""

    a: float = 0.0
    M: float = 1.0
    A0: float = 1.0
    A0_bar: float = 1.0
    gamma: float = 1.0
    g: float = 1.0
    sigma: float = 1.0

    @property
    def delta(self) -> float:
        return delta_ratio(self.gamma, self.g, self.sigma)


@dataclass(frozen=True)
class BoundValue:
    value: float
    regime: Regime
    relative_error: float | None = None


def _check_eps(eps: float) -> None:
    if not (0 < eps < 1):
        raise ParameterRangeError(f"eps must lie in (0, 1), got {eps}")


def _bound(eps: float, params: ModelParams, cfg: BoundConfig, bar: bool) -> BoundValue:
    _check_eps(eps)
    km = k_bar_max(params) if bar else k_max(params)
    off = float(_offset(params, bar))
    A = cfg.A0_bar if bar else cfg.A0
    delta = cfg.delta
    if bar:
        lead = cfg.g ** 2 * cfg.sigma ** 2 / cfg.gamma ** 2
    else:
        lead = cfg.g * cfg.sigma ** 2 / cfg.gamma
    if km <= 0:
        return BoundValue(0.0, Regime.ABSENT, 0.0)
    if km < 1:
        # only k = 0 diverges: the family is a single tree
        return BoundValue(lead * abs(A) * eps ** -off, Regime.POWER_LAW, 0.0)
    s = gap(params)
    ec = eps_threshold(km, params, cfg.a)
    if H(eps, params, cfg.a, bar) >= 0:
        value = cfg.M * ec ** -off * (math.log(1 / eps) + (ec / eps) ** (3 * s) / s)
        return BoundValue(lead * delta ** km * value, Regime.LOGARITHMIC)
    rel = cfg.M / s * (eps / ec) ** (3 * s) * delta
    return BoundValue(lead * abs(A) * eps ** -off * (1 + rel), Regime.POWER_LAW, rel)


def bound_C0(eps: float, params: ModelParams, cfg: BoundConfig = BoundConfig()) -> BoundValue:
    """Upper bound on |C0|: logarithmic form for eps >= eps_c, A0 eps^{-(d-rho)} (1 + rel) below."""
    return _bound(eps, params, cfg, bar=False)


def bound_C1(eps: float, params: ModelParams, cfg: BoundConfig = BoundConfig()) -> BoundValue:
    """Upper bound on |C1| with d - 2 rho and eps_bar_c; absent for rho >= d/2."""
    return _bound(eps, params, cfg, bar=True)


def envelope_terms(eps: float, params: ModelParams, a: float = 0.0, bar: bool = False,
                   delta: float = 1.0) -> list[tuple[int, float]]:
    """(k, e^{3F(k)}) for every divergent family member k < k_max, plus k_max when integral."""
    _check_eps(eps)
    km = k_bar_max(params) if bar else k_max(params)
    if km <= 0:
        return []
    top = math.floor(km) if float(km).is_integer() else math.ceil(km) - 1
    return [(k, math.exp(3 * envelope_F(k, eps, params, a, bar, delta))) for k in range(top + 1)]


def dominant_regime(eps: float, params: ModelParams, a: float = 0.0, bar: bool = False) -> Regime:
    """LOGARITHMIC when e^{3F(k_max)} >= e^{3F(0)}, i.e. H >= 0."""
    km = k_bar_max(params) if bar else k_max(params)
    if km <= 0:
        return Regime.ABSENT
    if km < 1:
        return Regime.POWER_LAW
    return Regime.LOGARITHMIC if H(eps, params, a, bar) >= 0 else Regime.POWER_LAW


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class EnvelopeTerm:
    k: int
    alpha_k: float
    weight: int
    envelope: float


@dataclass(frozen=True)
class LogTerm:
    k: int
    log_power: int
    r: float


@dataclass(frozen=True)
class CountertermProfile:
    eps: float
    k_max: float
    k_bar_max: float
    terms: tuple[EnvelopeTerm, ...]
    eps_c: float | None
    eps_bar_c: float | None
    regime: Regime
    value_bound: float
    log_terms: tuple[LogTerm, ...] = field(default=())

    def to_json(self) -> str:
        data = asdict(self)
        data["regime"] = self.regime.value
        return json.dumps(data, indent=2, sort_keys=True)


def log_terms(params: ModelParams) -> list[LogTerm]:
    """Logarithmic corrections: log^1 at integral k_max, plus the r(k) terms when k_max is odd."""
    km = k_max_exact(params)
    if km.denominator != 1 or km < 1:
        return []
    kmi = int(km)
    out = [LogTerm(kmi, 1, 1.0)]
    if kmi % 2:
        for k in range((kmi - 1) // 2, kmi):
            out.append(LogTerm(k, 1, float(r(k, kmi))))
        out.append(LogTerm(kmi, 2, float(r(kmi, kmi))))
    return out


def counterterm_profile(eps: float, params: ModelParams, cfg: BoundConfig = BoundConfig(),
                        cap: int = DEFAULT_ENUMERATION_CAP) -> CountertermProfile:
    km, kb = k_max(params), k_bar_max(params)
    terms = []
    for k, env in envelope_terms(eps, params, cfg.a, delta=cfg.delta):
        weight = combinatorial_weight(k, cap).tree_sum
        terms.append(EnvelopeTerm(k, alpha_k(k, params), weight, cfg.M * env))
    b = bound_C0(eps, params, cfg)
    return CountertermProfile(
        eps=eps,
        k_max=km,
        k_bar_max=kb,
        terms=tuple(terms),
        eps_c=eps_c(params, cfg.a) if km >= 1 else None,
        eps_bar_c=eps_bar_c(params, cfg.a) if kb >= 1 else None,
        regime=b.regime,
        value_bound=b.value,
        log_terms=tuple(log_terms(params)),
    )


REGIME_COLUMNS = ("rho_minus_rho_c", "eps", "eps_c", "eps_bar_c",
                  "regime_C0", "regime_C1", "bound_C0", "bound_C1")


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.12g}"


def regime_rows(d: int, rhos: Iterable[float], epss: Sequence[float],
                cfg: BoundConfig = BoundConfig()) -> list[tuple]:
    rows = []
    for rho in rhos:
        params = ModelParams(d, rho)
        ec = eps_c(params, cfg.a) if k_max(params) >= 1 else None
        eb = eps_bar_c(params, cfg.a) if k_bar_max(params) >= 1 else None
        for eps in epss:
            b0, b1 = bound_C0(eps, params, cfg), bound_C1(eps, params, cfg)
            rows.append((gap(params), eps, ec, eb, b0.regime.value, b1.regime.value, b0.value, b1.value))
    return rows


def regime_map(d: int, rhos: Iterable[float], epss: Sequence[float],
               cfg: BoundConfig = BoundConfig()) -> str:
    """CSV over a (rho, eps) grid with both thresholds, regimes and bound values."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REGIME_COLUMNS)
    for row in regime_rows(d, rhos, epss, cfg):
        w.writerow([_fmt(x) if isinstance(x, float) or x is None else x for x in row])
    return buf.getvalue()
