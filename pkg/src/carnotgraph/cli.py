"""``carnotgraph`` command-line tool.

Reports are ``key = value`` lines; tables are written as ``name[i] = ...``
rows after a ``name = <column names>`` header.  Exit codes: 0 success,
1 a mathematical check failed, 2 the scenario is semantically invalid,
64 parse or usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import validate_algebra
from .calculus import DEFAULT_TOL, intrinsic_diff
from .exceptions import (
    DimensionError,
    DomainError,
    EstimationError,
    HomomorphismError,
    NotDifferentiableError,
    ParseError,
    PreconditionError,
)
from .graph import BoxDomain, GraphFunction, HomogeneousHom, intrinsic_lip_constant
from .group import CarnotGroup, exact, quasi_triangle_constant, to_float
from .groupfile import catalog_dir, catalog_names, load_group
from .measure import DEFAULT_DELTAS, DEFAULT_MC_SAMPLES, AreaConfig, area_check, classical_area_oracle, curve_length, jacobian
from .scenario import Scenario, load_scenario, parse_ladder
from .splitting import make_splitting, splitting_from_definition

EXIT_OK, EXIT_FAIL, EXIT_SEMANTIC, EXIT_USAGE = 0, 1, 2, 64
AREA_THRESHOLD = 0.05
COUNTEREXAMPLE_LADDER = tuple(2.0 ** -k for k in range(1, 15))
CLOSED_FORM_TOL = 1e-12

log = logging.getLogger("carnotgraph")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower()
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(fmt(x) for x in v)
    return str(v)


class Report:
    def __init__(self):
        self.lines: list[str] = []

    def __setitem__(self, key, value):
        self.lines.append(f"{key} = {fmt(value)}")

    def table(self, name: str, columns: str, rows):
        self.lines.append(f"{name} = {columns}")
        for i, row in enumerate(rows):
            self.lines.append(f"{name}[{i}] = {fmt(list(row))}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


# ---------------------------------------------------------------------------
# the non-normal counterexample in the second Heisenberg group


@dataclass
class CounterexampleResult:
    eps: np.ndarray
    values: np.ndarray
    closed_form_error: float
    r: np.ndarray
    s: np.ndarray
    slope_r: float
    slope_s: float
    lipschitz: float

    @property
    def ok(self) -> bool:
        return (
            self.closed_form_error <= CLOSED_FORM_TOL
            and abs(self.slope_r - 0.5) <= 0.05
            and abs(self.slope_s - 1.0) <= 0.01
        )


def counterexample(ladder=COUNTEREXAMPLE_LADDER) -> CounterexampleResult:
    """ℍ² with L = span{X1} (not normal), W = span{X2..X5}, φ ≡ X1.

    Φ(0,0,ε,0,0) = (1,0,ε,0,-ε/2) and ‖Φ(0)⁻¹Φ(0,0,ε,0,0)‖ ~ ε^{1/2}, so Φ is
    not Lipschitz although φ passes the pairwise intrinsic test.
    """
    G = CarnotGroup.from_definition(load_group("H2"))
    eye = np.eye(5, dtype=int)
    S = make_splitting(G, eye[1:].tolist(), eye[:1].tolist(), require_normal=False)
    dom = BoxDomain.single(S, [-1] * 4, [1] * 4)
    phi = GraphFunction.constant(S, [1], dom)
    eps = np.asarray(ladder, dtype=float)
    w = np.zeros((len(eps), 5))
    w[:, 2] = eps
    values = phi.graph_map(w)
    closed = np.zeros_like(w)
    closed[:, 0] = 1
    closed[:, 2] = eps
    closed[:, 4] = -eps / 2
    err = float(np.max(np.abs(values - closed)))
    base = phi.graph_map(np.zeros((1, 5)))[0]
    r = np.asarray(G.hnorm(G.mul(G.inv(base), values)))
    s = np.asarray(G.hnorm(w))
    le = np.log(eps)
    slope_r = float(np.polyfit(le, np.log(r), 1)[0])
    slope_s = float(np.polyfit(le, np.log(s), 1)[0])
    lip = intrinsic_lip_constant(phi, points=np.vstack([np.zeros((1, 5)), w])).value
    return CounterexampleResult(eps, values, err, r, s, slope_r, slope_s, lip)


# ---------------------------------------------------------------------------
# commands


def _scenario(args) -> Scenario:
    if not args.scenario:
        raise UsageError("this command needs --scenario")
    return load_scenario(args.scenario)


def _ladder(args, sc: Scenario | None):
    if args.ladder:
        return parse_ladder(args.ladder)
    if sc is not None and sc.ladder:
        return sc.ladder
    return None


def _tol(args, sc: Scenario | None) -> float:
    if args.tol is not None:
        return args.tol
    if sc is not None and sc.tol is not None:
        return sc.tol
    return DEFAULT_TOL


def _seed(args, sc: Scenario | None) -> int:
    if args.seed is not None:
        return args.seed
    if sc is not None and sc.seed is not None:
        return sc.seed
    return 0


def cmd_catalog(args, rep: Report) -> int:
    rep["catalog_dir"] = str(catalog_dir())
    names = catalog_names()
    rep["groups"] = names
    for name in names:
        d = load_group(name)
        A = d.algebra
        rep[f"{name}.layer_dims"] = list(A.layer_dims)
        rep[f"{name}.homogeneous_dimension"] = A.homogeneous_dimension
        rep[f"{name}.subgroups"] = sorted(d.subgroups) or "none"
        rep[f"{name}.quasi_triangle_constant"] = quasi_triangle_constant(CarnotGroup.from_definition(d))
    return EXIT_OK


def cmd_validate(args, rep: Report) -> int:
    sc = load_scenario(args.scenario) if args.scenario else None
    if sc is None and not args.group:
        raise UsageError("validate needs --group or --scenario")
    d = load_group(args.group) if args.group else sc.definition()
    A = d.algebra
    rep["group"] = A.name
    rep["dimension"] = A.n
    rep["layer_dims"] = list(A.layer_dims)
    vr = validate_algebra(A)
    rep["algebra_ok"] = vr.ok
    for axiom, witness in vr.violations:
        rep[f"violation.{axiom}"] = list(witness)
    if not vr.ok:
        return EXIT_SEMANTIC
    subs = {**d.subgroups, **(sc.subgroups if sc else {})}
    if "W" in subs and "L" in subs:
        S = sc.splitting(d) if sc else splitting_from_definition(d)
        rep["splitting_ok"] = True
        rep["L_normal"] = S.normal
        rep["W_carnot"] = S.carnot
        rep["k"] = S.k
        if sc and sc.domain:
            S_dom = sc.domain_for(S)
            rep["domain_boxes"] = len(S_dom.boxes)
            if sc.phi:
                sc.function(S)
                rep["phi_ok"] = True
            if sc.base is not None:
                inside = float(S_dom.interior_margin(sc.base_point(S)[None, :])[0]) > 0
                rep["base_interior"] = inside
                if not inside:
                    return EXIT_SEMANTIC
    return EXIT_OK


def cmd_counterexample(args, rep: Report) -> int:
    ladder = parse_ladder(args.ladder) if args.ladder else COUNTEREXAMPLE_LADDER
    res = counterexample(ladder)
    rep["group"] = "H2"
    rep["W"] = "span{X2,X3,X4,X5}"
    rep["L"] = "span{X1} (not normal)"
    rep["phi"] = "constant X1"
    rep.table("values", "eps Phi(0,0,eps,0,0)", ([e, *v] for e, v in zip(res.eps, res.values)))
    rep["closed_form_max_error"] = res.closed_form_error
    rep.table("norms", "eps r(eps) |(0,0,eps,0,0)|", zip(res.eps, res.r, res.s))
    rep["slope_r"] = res.slope_r
    rep["slope_point"] = res.slope_s
    rep["intrinsic_lipschitz_estimate"] = res.lipschitz
    rep["graph_map_lipschitz"] = res.slope_r >= 0.95
    rep["ok"] = res.ok
    return EXIT_OK if res.ok else EXIT_FAIL


def cmd_differentiate(args, rep: Report) -> int:
    sc = _scenario(args)
    S = sc.splitting()
    phi = sc.function(S)
    if args.base:
        sc.base = [Fraction(t) for t in args.base.split()]
    a0 = sc.base_point(S)
    if args.float:
        a0 = to_float(a0)
    tol = _tol(args, sc)
    _, r = intrinsic_diff(phi, a0, _ladder(args, sc), tol, strict=False)
    rep["base"] = to_float(a0)
    rep["exact"] = r.exact
    rep["tol"] = tol
    rep["converged"] = r.converged
    rep["final_residual"] = r.final_residual
    rep["validation_residual"] = r.validation_residual
    rep["bracket_residual"] = r.bracket_residual
    rep["projection_residual"] = r.projection_residual
    rep.table("residuals", "t residual cauchy", zip(r.scales, r.residuals, r.cauchy))
    if r.hom is not None:
        rep.table("matrix", "image of W basis vector", to_float(r.matrix))
    if r.message:
        rep["message"] = r.message
    return EXIT_OK if r.converged else EXIT_FAIL


def _deltas(args, sc):
    if args.deltas:
        return tuple(float(Fraction(t)) for t in args.deltas.split())
    return tuple(sc.deltas) if sc and sc.deltas else DEFAULT_DELTAS


def cmd_area(args, rep: Report) -> int:
    sc = _scenario(args)
    S = sc.splitting()
    phi = sc.function(S)
    V = sc.region_for(S)
    if not np.all(phi.domain.contains(V.sample(256, 0))):
        raise DomainError("region must lie inside the domain")
    cfg = AreaConfig(
        deltas=_deltas(args, sc),
        mc_samples=args.samples or sc.samples or DEFAULT_MC_SAMPLES,
        seed=_seed(args, sc),
        tol=_tol(args, sc),
        scales=_ladder(args, sc),
    )
    r = area_check(phi, V, cfg)
    rep["seed"] = r.seed
    rep["mc_samples"] = r.mc_samples
    rep["k"] = r.k
    rep["failures"] = r.failures
    if r.aborted:
        rep["aborted"] = True
        rep["message"] = r.message
        return EXIT_FAIL
    rep["lhs"] = r.lhs
    rep["rhs"] = r.rhs
    rep["lhs_err"] = r.lhs_err
    rep["rhs_err"] = r.rhs_err
    rep["rel_discrepancy"] = r.rel_discrepancy
    rep["mean_jacobian"] = r.mean_jacobian
    rep["domain_content"] = r.domain_content.value
    rep.table("lhs_table", "delta count content", r.lhs_table)
    rep.table("domain_table", "delta count content", r.domain_table)
    checks = [r.rel_discrepancy]
    G = S.group
    if G.algebra.is_abelian:
        oracle = classical_area_oracle(phi, V)
        rep["classical_oracle"] = oracle
        checks += [abs(r.lhs - oracle) / oracle, abs(r.rhs - oracle) / oracle]
    if S.dim_W == 1 and len(V.boxes) == 1:
        lo, hi = V.boxes[0]
        t = np.linspace(lo[0], hi[0], 20001)[:, None]
        cl = curve_length(G, phi.graph_map(S.w_point(t), check=False)).value
        rep["curve_length"] = cl
        checks += [abs(r.lhs - cl) / cl, abs(r.rhs - cl) / cl]
    worst = max(checks)
    rep["worst_pairwise"] = worst
    rep["threshold"] = args.threshold
    rep["ok"] = worst <= args.threshold
    return EXIT_OK if worst <= args.threshold else EXIT_FAIL


def cmd_jacobian(args, rep: Report) -> int:
    sc = load_scenario(args.scenario) if args.scenario else None
    if sc is None and not args.group:
        raise UsageError("jacobian needs --group or --scenario")
    if sc is not None:
        S = sc.splitting()
    else:
        S = splitting_from_definition(load_group(args.group))
    G = S.group
    if sc is not None and sc.hom is not None:
        M = exact(sc.hom)
        if M.shape != (S.dim_W, G.n):
            raise DimensionError(f"hom needs {S.dim_W} rows of length {G.n}")
        F = HomogeneousHom(G, S.W, M)
        rep["map"] = "scenario hom"
    elif sc is not None and sc.phi and sc.base is not None:
        _, r = intrinsic_diff(sc.function(S), sc.base_point(S), _ladder(args, sc), _tol(args, sc))
        F = r.hom
        rep["map"] = "differential of the graph map at base"
    else:
        F = HomogeneousHom.inclusion(G, S.W)
        rep["map"] = "identity embedding of W"
    lam = sc.lam if sc is not None and sc.lam is not None else None
    if args.lam:
        lam = Fraction(args.lam)
    if lam is not None:
        F = F.compose_dilation(lam)
        rep["lambda"] = lam
    est = jacobian(F, deltas=_deltas(args, sc))
    rep["k"] = S.k
    rep["jacobian"] = est.value
    rep["error"] = est.error
    rep["raw"] = est.raw
    rep["extrapolated"] = est.extrapolated
    rep["samples"] = est.samples
    rep.table("table", "delta count ratio", est.table)
    return EXIT_OK


COMMANDS = {
    "catalog": cmd_catalog,
    "validate": cmd_validate,
    "counterexample": cmd_counterexample,
    "differentiate": cmd_differentiate,
    "area-check": cmd_area,
    "jacobian": cmd_jacobian,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="carnotgraph", description="Intrinsic graphs in Carnot groups: checks and estimates.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scenario=True, group=False):
        if scenario:
            sp.add_argument("--scenario", help="scenario file")
        if group:
            sp.add_argument("--group", help="group file or catalog name")
        sp.add_argument("--out", help="write the report here instead of stdout")

    common(sub.add_parser("catalog", help="list the shipped groups"), scenario=False)
    common(sub.add_parser("validate", help="check a group file or scenario"), group=True)
    sp = sub.add_parser("counterexample", help="non-normal complement: Φ is not Lipschitz")
    sp.add_argument("--ladder", help="ε ladder, e.g. '2^-1 .. 2^-14'")
    common(sp, scenario=False)
    sp = sub.add_parser("differentiate", help="intrinsic differential at the base point")
    sp.add_argument("--base", help="W parameters of the base point (overrides the scenario)")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--ladder", help="scale ladder, e.g. '2^-3 .. 2^-12'")
    sp.add_argument("--float", action="store_true", help="use floating point even for rational base points")
    common(sp)
    sp = sub.add_parser("area-check", help="compare both sides of the area formula")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--ladder")
    sp.add_argument("--samples", type=int, help="Monte-Carlo sample count")
    sp.add_argument("--deltas", help="covering scales, e.g. '0.2 0.1 0.05'")
    sp.add_argument("--threshold", type=float, default=AREA_THRESHOLD)
    common(sp)
    sp = sub.add_parser("jacobian", help="Jacobian of a homogeneous homomorphism on W")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--ladder")
    sp.add_argument("--deltas")
    sp.add_argument("--lambda", dest="lam", help="precompose with the dilation δ_λ")
    common(sp, group=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    for name in ("seed", "ladder", "tol", "deltas", "samples", "lam", "base", "group", "scenario"):
        if not hasattr(args, name):
            setattr(args, name, None)
    rep = Report()
    rep["command"] = args.command
    try:
        code = COMMANDS[args.command](args, rep)
    except (ParseError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PreconditionError, DomainError, DimensionError, HomomorphismError) as e:
        rep["error"] = str(e)
        code = EXIT_SEMANTIC
    except (NotDifferentiableError, EstimationError) as e:
        rep["error"] = str(e)
        code = EXIT_FAIL
    rep["exit_code"] = code
    text = rep.text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
