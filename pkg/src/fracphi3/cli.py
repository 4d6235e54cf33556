"""Command-line front end: enumeration, antipodes, diagrams, Hepp tables, envelopes, kernels."""

from __future__ import annotations

import csv
import enum
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable

import click
import numpy as np

from . import asymptotics as asy
from . import kerneleval as ke
from .antipode import twisted_antipode
from .diagrams import (
    diagram_degree_form,
    diagram_of,
    pairings,
    parse_diagram,
    subdiagram,
)
from .forests import antipode_diagrams, cross_check_tree_vs_diagram, zimmermann
from .hepp import (
    BoundNotDerivable,
    DepthOrderError,
    HeppSyntaxError,
    SectorContext,
    Units,
    bound_recursion,
    parse_hepp,
)
from .trees import (
    ModelParams,
    ResourceLimitError,
    TreeSyntaxError,
    classify,
    degree_exact,
    enumerate_almost_full,
    enumerate_full,
    in_kernel_of_E,
    parse_tree,
    symmetry_factor,
    upsilon,
    wedderburn_etherington,
)


class OutputFormat(enum.Enum):
    JSON = "json"
    CSV = "csv"
    DOT = "dot"


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    max_k: int = 6
    max_vertices: int = 6
    out: str | None = None
    fmt: OutputFormat = OutputFormat.JSON
    seed: int = 0
    a: float = 0.0
    M: float = 1.0

    def __post_init__(self) -> None:
        if self.max_k <= 0 or self.max_vertices <= 0:
            raise ValueError("caps must be positive")

    @property
    def bounds(self) -> asy.BoundConfig:
        p = self.params
        return asy.BoundConfig(a=self.a, M=self.M, gamma=p.gamma_c, g=p.g_c, sigma=p.sigma_c)


# Exit codes and tags for contract violations; one line on stderr.
ERRORS: tuple[tuple[type[BaseException], str, int], ...] = (
    (TreeSyntaxError, "E_PARSE", 3),
    (HeppSyntaxError, "E_PARSE", 3),
    (ResourceLimitError, "E_RESOURCE", 4),
    (BoundNotDerivable, "E_NOT_DERIVABLE", 5),
    (DepthOrderError, "E_DEPTH_ORDER", 5),
    (asy.ParameterRangeError, "E_RANGE", 6),
    (ke.QuadratureError, "E_NUMERIC", 7),
    (ke.FitError, "E_NUMERIC", 7),
    (OSError, "E_IO", 8),
    (ValueError, "E_DOMAIN", 2),
)


def fmt_value(x: Any) -> Any:
    """Floats with 12 significant digits; exact rationals as strings."""
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.12g}")
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, dict):
        return {k: fmt_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [fmt_value(v) for v in x]
    return x


def _cell(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    if x is None:
        return ""
    return str(fmt_value(x))


def to_csv(header: tuple[str, ...], rows: list[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def to_json(data: Any) -> str:
    return json.dumps(fmt_value(data), indent=2, sort_keys=True) + "\n"


def emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def run_guarded(fn: Callable[[], None]) -> None:
    try:
        fn()
    except click.exceptions.Exit:
        raise
    except click.ClickException:
        raise
    except Exception as exc:  # mapped to a single-line code
        for kind, code, status in ERRORS:
            if isinstance(exc, kind):
                msg = str(exc).replace("\n", " ")
                click.echo(f"error {code}: {msg}", err=True)
                sys.exit(status)
        raise


# ---------------------------------------------------------------- commands


ENUMERATE_COLUMNS = ("family", "k", "p", "tree", "degree", "marginal", "S", "upsilon_kind",
                     "upsilon_coeff", "class", "count", "we_count")


def cmd_enumerate(cfg: RunConfig) -> str:
    """Counterterm trees (non-positive degree, outside the kernel of E) up to ``max_k``."""
    rows = []
    p_ = cfg.params
    for family, gen in (("full", enumerate_full), ("almost_full", enumerate_almost_full)):
        for k in range(cfg.max_k + 1):
            p = 2 * k + 2
            # every tree of the family shares one degree, increasing in k
            if family == "full" and asy.alpha_k_exact(k, p_) > 0:
                break
            if family == "almost_full" and asy.alpha_k_exact(k, p_, bar=True) > 0:
                break
            trees = gen(k, cap=cfg.max_k)
            if family == "full" and len(trees) != wedderburn_etherington(p):
                raise ValueError("full-tree count disagrees with the Wedderburn-Etherington number")
            alive = [t for t in trees if not in_kernel_of_E(t) and degree_exact(t, p_) <= 0]
            for t in alive:
                deg = degree_exact(t, p_)
                u = upsilon(t)
                rows.append((family, k, t.p, t.key, deg, deg == 0, symmetry_factor(t), u.kind.value,
                             u.coefficient, classify(t).value, len(trees),
                             wedderburn_etherington(p)))
    if cfg.fmt is OutputFormat.CSV:
        return to_csv(ENUMERATE_COLUMNS, rows)
    return to_json([dict(zip(ENUMERATE_COLUMNS, r)) for r in rows])


def cmd_antipode(cfg: RunConfig, expr: str) -> str:
    tree = parse_tree(expr)
    terms = twisted_antipode(tree, cfg.params)
    if cfg.fmt is OutputFormat.CSV:
        return to_csv(("coeff", "factors", "contracted"),
                      [(t.coefficient, " ".join(f.key for f in t.factors), t.contracted.key) for t in terms])
    return to_json({"tree": tree.key, "terms": [t.to_json() for t in terms]})


def _pairing_diagrams(tree_expr: str):
    tree = parse_tree(tree_expr)
    for P in pairings(tree):
        g, pref = diagram_of(tree, P)
        yield tree, P, g, pref


def cmd_diagram(cfg: RunConfig, expr: str) -> str:
    out = []
    for tree, P, g, pref in _pairing_diagrams(expr):
        if cfg.fmt is OutputFormat.DOT:
            out.append(f"// pairing {list(P)} prefactor {pref}\n{g.to_dot()}\n")
            continue
        out.append({"pairing": [list(x) for x in P], "prefactor": pref, "diagram": str(g),
                    "degree": diagram_degree_form(g).at(cfg.params), "graph": g.to_json()})
    if cfg.fmt is OutputFormat.DOT:
        return "".join(out)
    if cfg.fmt is OutputFormat.CSV:
        return to_csv(("pairing", "prefactor", "degree", "diagram"),
                      [(str(o["pairing"]), o["prefactor"], o["degree"], o["diagram"]) for o in out])
    return to_json(out)


def cmd_zimmermann(cfg: RunConfig, expr: str, cross_check: bool = False) -> str:
    per_pairing = []
    for tree, P, g, pref in _pairing_diagrams(expr):
        if pref == 0:
            continue
        z = zimmermann(g, cfg.params)
        per_pairing.append({"pairing": [list(x) for x in P], "prefactor": pref, "diagram": str(g),
                            "terms": z.to_json(), "matches_antipode": z == antipode_diagrams(g, cfg.params)})
    data: dict[str, Any] = {"tree": parse_tree(expr).key, "pairings": per_pairing}
    if cross_check:
        data["cross_check_tree_vs_diagram"] = cross_check_tree_vs_diagram(parse_tree(expr), cfg.params)
    return to_json(data)


def parse_forest(diagram, text: str):
    """'0,1;0,1,2,6,8' -> subdiagrams given by edge ids."""
    text = text.strip()
    if not text:
        return frozenset()
    members = []
    for part in text.split(";"):
        ids = [int(x) for x in part.split(",") if x.strip()]
        if not ids or any(not (0 <= i < len(diagram.edges)) for i in ids):
            raise ValueError(f"bad forest member {part!r}")
        members.append(subdiagram(diagram, ids))
    return frozenset(members)


def cmd_hepp_table(cfg: RunConfig, diagram_text: str, hepp_text: str, forest_text: str,
                   units: str, order: str | None) -> str:
    g = parse_diagram(diagram_text)
    h = parse_hepp(hepp_text)
    if h.vertices != frozenset(g.vertices):
        raise ValueError("Hepp tree leaves do not match the diagram vertices")
    u = Units.THIRDS_OF_D if units == "thirds" else Units.PARAMS
    ctx = SectorContext(g, parse_forest(g, forest_text), h, cfg.params, u)
    prof = bound_recursion(ctx)
    return prof.to_csv(order.split(",") if order else None)


def cmd_counterterm(cfg: RunConfig, eps: float) -> str:
    prof = asy.counterterm_profile(eps, cfg.params, cfg.bounds, cap=cfg.max_k)
    if cfg.fmt is OutputFormat.CSV:
        return to_csv(("k", "alpha_k", "weight", "envelope"),
                      [(t.k, t.alpha_k, t.weight, t.envelope) for t in prof.terms])
    return to_json(json.loads(prof.to_json()))


def cmd_regime_map(cfg: RunConfig, rho_grid: str, eps_grid: str) -> str:
    lo, hi, n = rho_grid.split(":")
    rhos = np.linspace(float(lo), float(hi), int(n))
    epss = ke.parse_grid(eps_grid)
    rows = asy.regime_rows(cfg.params.d, [float(r) for r in rhos], [float(e) for e in epss], cfg.bounds)
    return to_csv(asy.REGIME_COLUMNS, rows)


def cmd_kernel_scaling(cfg: RunConfig, mollifier: str, eps_grid: str) -> str:
    d, rho = cfg.params.d, float(cfg.params.rho_exact)
    moll = ke.Mollifier(d, spatial=mollifier)
    grid = ke.parse_grid(eps_grid)
    rows, fit = ke.green_scaling(grid, rho, moll)
    return to_csv(("eps", "value", "normalized", "fit"),
                  [(r.eps, r.value, r.normalized, fit.exponent) for r in rows])


# ---------------------------------------------------------------- click wiring


def _rho(value: str) -> Fraction:
    return Fraction(value)


@click.group()
@click.option("--d", "d", type=int, default=3, show_default=True, help="Space dimension.")
@click.option("--rho", default="1.2", show_default=True, help="Fractional order (decimal or p/q).")
@click.option("--kappa", default="0", show_default=True)
@click.option("--a", "a", type=float, default=0.0, show_default=True, help="Envelope constant a.")
@click.option("--M", "M", type=float, default=1.0, show_default=True, help="Envelope constant M.")
@click.option("--gamma", type=float, default=1.0, show_default=True)
@click.option("--g", "g", type=float, default=1.0, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--format", "fmt", type=click.Choice([f.value for f in OutputFormat]), default="json",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-k", type=int, default=6, show_default=True)
@click.option("--max-vertices", type=int, default=6, show_default=True)
@click.pass_context
def main(ctx: click.Context, d, rho, kappa, a, M, gamma, g, sigma, out, fmt, seed, max_k, max_vertices) -> None:
    """Renormalisation bookkeeping for the fractional Phi^3 equation."""

    def build() -> None:
        params = ModelParams(d, _rho(rho), _rho(kappa), gamma, g, sigma)
        ctx.obj = RunConfig(params, max_k, max_vertices, out, OutputFormat(fmt), seed, a, M)

    run_guarded(build)


def _run(fn: Callable[[RunConfig], str]) -> Callable[[click.Context], None]:
    def go(ctx: click.Context) -> None:
        cfg: RunConfig = ctx.obj
        run_guarded(lambda: emit(cfg, fn(cfg)))
    return go


@main.command("enumerate")
@click.pass_context
def enumerate_cmd(ctx: click.Context) -> None:
    """List counterterm trees up to --max-k."""
    _run(cmd_enumerate)(ctx)


@main.command("antipode")
@click.argument("tree")
@click.pass_context
def antipode_cmd(ctx: click.Context, tree: str) -> None:
    """Twisted antipode of TREE."""
    _run(lambda c: cmd_antipode(c, tree))(ctx)


@main.command("diagram")
@click.argument("tree")
@click.pass_context
def diagram_cmd(ctx: click.Context, tree: str) -> None:
    """Reduced Feynman diagram of TREE for every pairing."""
    _run(lambda c: cmd_diagram(c, tree))(ctx)


@main.command("zimmermann")
@click.argument("tree")
@click.option("--cross-check", is_flag=True, help="Compare tree-level and diagram-level antipodes.")
@click.pass_context
def zimmermann_cmd(ctx: click.Context, tree: str, cross_check: bool) -> None:
    """Forest formula for every pairing of TREE."""
    _run(lambda c: cmd_zimmermann(c, tree, cross_check))(ctx)


@main.command("hepp-table")
@click.option("--diagram", "diagram_text", required=True, help="Diagram text, e.g. 'root=1; 1>2:K 1-2:GKeps'.")
@click.option("--hepp", "hepp_text", required=True, help="Hepp tree, e.g. '((1 2)@1#b 3)@0#a'.")
@click.option("--forest", "forest_text", default="", help="Safe forest as edge-id lists: '0,1;0,1,2'.")
@click.option("--units", type=click.Choice(["params", "thirds"]), default="params", show_default=True)
@click.option("--order", default=None, help="Comma-separated node names fixing the row order.")
@click.pass_context
def hepp_table_cmd(ctx: click.Context, diagram_text, hepp_text, forest_text, units, order) -> None:
    """Exponent recursion of one Hepp sector as CSV."""
    _run(lambda c: cmd_hepp_table(c, diagram_text, hepp_text, forest_text, units, order))(ctx)


@main.command("counterterm")
@click.option("--eps", type=float, required=True)
@click.pass_context
def counterterm_cmd(ctx: click.Context, eps: float) -> None:
    """Envelope profile of the full-tree counterterm at EPS."""
    _run(lambda c: cmd_counterterm(c, eps))(ctx)


@main.command("regime-map")
@click.option("--grid", "rho_grid", default="1.02:1.4:20", show_default=True, help="rho start:stop:count.")
@click.option("--eps-grid", default="1e-1:1e-12:12", show_default=True)
@click.pass_context
def regime_map_cmd(ctx: click.Context, rho_grid: str, eps_grid: str) -> None:
    """Thresholds, regimes and bounds over a (rho, eps) grid as CSV."""
    _run(lambda c: cmd_regime_map(c, rho_grid, eps_grid))(ctx)


@main.command("kernel-scaling")
@click.option("--mollifier", type=click.Choice(sorted(ke.PROFILES)), default="bump", show_default=True)
@click.option("--eps-grid", default="1e-1:1e-4:8", show_default=True)
@click.pass_context
def kernel_scaling_cmd(ctx: click.Context, mollifier: str, eps_grid: str) -> None:
    """Mollified Green function at the origin and its eps-scaling fit as CSV."""
    _run(lambda c: cmd_kernel_scaling(c, mollifier, eps_grid))(ctx)

