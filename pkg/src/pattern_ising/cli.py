"""Command-line interface: generate, validate, verify, correlate, scan-beta, svg."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import kacward as kw
from . import observables as obs
from . import oracle
from . import report
from . import sholo
from .pattern import (GENERATORS, PatternError, generate_acute_triangulation,
                      generate_isoradial_square, generate_stretched_square,
                      half_edge_extension, load_pattern, validate)
from .svg import OVERLAYS, render_svg
from .weights import beta_deformed_weights, critical_couplings, critical_directed_weights

log = logging.getLogger("pattern_ising")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SKIPPED = 0, 1, 2, 3
SUITES = ("kacward", "eigenvector", "observable", "norm", "switching", "sholo", "bounds",
          "diffineq")
SEED_ENV = "PATTERN_ISING_SEED"


class UsageError(Exception):
    pass


class SuiteSkipped(Exception):
    pass


@dataclass
class Check:
    name: str
    passed: bool
    residual: float
    limit: float
    detail: str = ""

    def __post_init__(self):
        self.passed, self.residual = bool(self.passed), float(self.residual)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{tag}  {self.name}  residual={self.residual:.3e}  limit={self.limit:.1e}{extra}"


# -- argument helpers --------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    """'a:b:step' (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, b, step = (float(t) for t in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(np.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 10) for i in range(n)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse beta grid {text!r}") from None


def parse_pairs(text: str) -> list[tuple[int, int]]:
    try:
        return [tuple(int(t) for t in p.split(":")) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse pairs {text!r}; use u:v,u:v") from None


def parse_ints(text: str | None):
    if text is None:
        return None
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse vertex list {text!r}") from None


def resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _write_manifest(prefix, command, args, fingerprint, outputs):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    # only .json is stripped, so a drawing never shares a manifest with its pattern
    if prefix.endswith(".json"):
        prefix = prefix[:-5]
    path = f"{prefix}.manifest.json"
    report.write_json(path, report.manifest(command, cfg, fingerprint, outputs))
    return path


def _load(args):
    try:
        return load_pattern(args.pattern)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load pattern {args.pattern!r}: {exc}") from None


# -- generate / validate -----------------------------------------------------

def cmd_generate(args) -> int:
    try:
        if args.kind == "isoradial-square":
            p = generate_isoradial_square(args.width, args.height, args.radius)
        elif args.kind == "stretched-square":
            if not args.heights:
                raise UsageError("stretched-square needs --heights")
            heights = [float(h) for h in args.heights.split(",")]
            p = generate_stretched_square(heights, args.rows)
        else:
            p = generate_acute_triangulation(resolve_seed(args.seed), args.width, args.height,
                                             args.jitter, args.spacing)
    except (PatternError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rep = validate(p)
    p.to_json(args.out)
    _write_manifest(args.out, "generate", args, p.fingerprint(), [args.out])
    print(f"wrote {args.out}: {p.n_vertices} vertices, {p.n_edges} edges")
    print(rep.summary())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_validate(args) -> int:
    p = _load(args)
    rep = validate(p, epsilon=args.epsilon, tol=args.tol)
    print(rep.summary())
    if args.json:
        report.write_json(args.json, rep.to_dict())
        _write_manifest(args.json, "validate", args, p.fingerprint(), [args.json])
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- verification suites -----------------------------------------------------

def suite_kacward(p, args):
    if p.n_edges > oracle.MAX_SUBGRAPH_EDGES:
        raise SuiteSkipped(f"{p.n_edges} edges exceeds {oracle.MAX_SUBGRAPH_EDGES}")
    sg = oracle.SmallGraph.from_pattern(p)
    checks = []
    for beta in args.betas:
        w = beta_deformed_weights(p, beta)
        s = kw.build_system(p, w)
        z = oracle.even_subgraph_partition(sg, w.undirected(p.graph))
        det = s.det()
        rel = abs(z * z - det) / abs(det)
        checks.append(Check(f"Z^2 = det T (beta={beta:g})", rel <= 1e-9, rel, 1e-9))
        JL = s.conjugated()
        herm = float(np.max(np.abs(JL - JL.conj().T)))
        checks.append(Check(f"J Lambda Hermitian (beta={beta:g})", herm <= 1e-14, herm, 1e-14))
    return checks


def suite_eigenvector(p, args):
    _, res = kw.critical_eigenvector(p)
    return [Check("Lambda rho = rho on interior", res <= 1e-11, res, 1e-11)]


def suite_observable(p, args):
    if p.n_edges > oracle.MAX_OBSERVABLE_EDGES:
        raise SuiteSkipped(f"{p.n_edges} edges exceeds {oracle.MAX_OBSERVABLE_EDGES}")
    checks = []
    for beta in args.betas:
        w = beta_deformed_weights(p, beta)
        F = oracle.fermionic_observable_matrix(p.graph, w.values)
        err = float(np.max(np.abs(F.conj() - kw.build_system(p, w).inverse())))
        checks.append(Check(f"conj(F) = T^-1 (beta={beta:g})", err <= 1e-9, err, 1e-9))
    return checks


def suite_norm(p, args):
    w = critical_directed_weights(p)
    s = kw.build_system(p, w)
    worst_one = worst_svd = 0.0
    for v in p.interior:
        out = p.graph.out_edges[v]
        b = kw.block_norm_bisection(w.values[out] ** 2)
        worst_one = max(worst_one, abs(b - 1.0))
        worst_svd = max(worst_svd, abs(b - kw.block_norm_svd(kw.vertex_block(s, v))))
    checks = [Check("critical block norm = 1", worst_one <= 1e-10, worst_one, 1e-10),
              Check("bisection = SVD", worst_svd <= 1e-9, worst_svd, 1e-9)]
    c = kw.decay_constant(p)
    for beta in (0.5, 0.8, 0.95):
        try:
            nrm = kw.global_norm_bound(p, beta)
            gap = nrm - (1 - c * (1 - beta))
            checks.append(Check(f"norm <= 1 - c(1-beta) (beta={beta:g})", True, max(gap, 0.0), 1e-9))
        except kw.BoundViolation as exc:
            checks.append(Check(f"norm <= 1 - c(1-beta) (beta={beta:g})", False, np.inf, 1e-9,
                                str(exc)))
    return checks


def suite_switching(p, args):
    if p.n_edges > oracle.MAX_SWITCHING_EDGES:
        raise SuiteSkipped(f"{p.n_edges} edges exceeds {oracle.MAX_SWITCHING_EDGES}")
    sg = oracle.SmallGraph.from_pattern(p)
    checks = []
    for beta in args.betas:
        K = beta * sg.J
        worst = 0.0
        for u in range(p.n_vertices):
            for v in range(u + 1, p.n_vertices):
                for A in ((), (u, v)):
                    worst = max(worst, oracle.switching_lemma_check(sg, K, A, u, v).rel_error)
        checks.append(Check(f"switching lemma (beta={beta:g})", worst <= 1e-12, worst, 1e-12))
        spins = oracle.spin_enumeration(sg, beta=beta)
        err = max(abs(oracle.current_two_point(sg, K, u, v) - spins.two_point(u, v))
                  for u in range(p.n_vertices) for v in range(u + 1, p.n_vertices))
        checks.append(Check(f"current ratio = spin two-point (beta={beta:g})", err <= 1e-12,
                            err, 1e-12))
    return checks


def _region(p, args):
    region = parse_ints(getattr(args, "region", None))
    return list(p.interior) if region is None else region


def suite_sholo(p, args):
    region = _region(p, args)
    if not region:
        raise SuiteSkipped("pattern has no interior vertices")
    bar = half_edge_extension(p, region)
    d = sholo.Domain.of(bar)
    sol = sholo.solve_bvp(bar, sholo.admissible_boundary(bar, seed=resolve_seed(args.seed)))
    f = sol.f
    sc = sholo.scale_of(f)
    hol = max(sholo.is_sholomorphic(bar, f, v)[1] for v in bar.interior)
    ctr = max(abs(sholo.contour_check_f(bar, f, v)) for v in bar.interior) / sc
    c2 = [sholo.contour_check_f2(bar, f, v) for v in bar.interior]
    re = max(abs(c.real) for c in c2) / sc**2
    im = min(c.imag for c in c2) / sc**2
    ident = max(c.identity_error for c in c2)
    bnd = float(np.max(np.abs(sholo.s_operator(bar, f)[d.outward] - sol.boundary_data[d.outward])))
    zeta = sholo.solve_bvp(bar, sholo.zeta_boundary(bar), check_lines=False)
    rec = float(np.max(np.abs(zeta.phi - d.rho)))
    return [Check("s-holomorphic at interior vertices", hol <= 1e-9, hol, 1e-9),
            Check("Sf matches boundary datum", bnd <= 1e-9, bnd, 1e-9),
            Check("contour sum of f", ctr <= 1e-9, ctr, 1e-9),
            Check("Re contour sum of f^2", re <= 1e-9, re, 1e-9),
            Check("Im contour sum of f^2 >= 0", im >= -1e-9, max(-im, 0.0), 1e-9),
            Check("Im = |phi_out|^2 - |phi_in|^2", ident <= 1e-10, ident, 1e-10),
            Check("T^-1 zeta = rho", rec <= 1e-9, rec, 1e-9)]


def suite_bounds(p, args):
    if p.n_vertices > 64:
        raise SuiteSkipped(f"{p.n_vertices} vertices; all-pairs sweep is limited to 64")
    checks = []
    for beta in args.betas:
        lo = hi = np.inf
        for u in range(p.n_vertices):
            for v in range(p.n_vertices):
                if u != v:
                    b = obs.correlation_bounds(p, beta, u, v)
                    lo, hi = min(lo, b.lower_slack), min(hi, b.upper_slack)
        checks.append(Check(f"lower bound (beta={beta:g})", lo >= -1e-10, max(-lo, 0.0), 1e-10))
        checks.append(Check(f"upper bound (beta={beta:g})", hi >= -1e-10, max(-hi, 0.0), 1e-10))
    return checks


def suite_diffineq(p, args):
    region = _region(p, args)
    if len(region) > 10:
        raise SuiteSkipped(f"region has {len(region)} vertices; exhaustive infimum needs <= 10")
    v = args.vertex if args.vertex is not None else region[0]
    rep = obs.differential_inequality_check(p, v, args.betas, region)
    checks = []
    for r in rep.rows:
        extra = "" if r.gronwall is None else f"m={r.magnetization:.6f} vs 1-beta^-t={r.gronwall:.6f}"
        checks.append(Check(f"d m/d beta >= inf phi (1-m^2)/beta (beta={r.beta:g})",
                            r.slack >= -1e-6, max(-r.slack, 0.0), 1e-6, extra))
    return checks


SUITE_FUNCS = {name: globals()[f"suite_{name}"] for name in SUITES}


def cmd_verify(args) -> int:
    p = _load(args)
    if args.betas is None:
        args.betas = [0.5, 1.0, 1.5] if args.suite == "diffineq" else [1.0]
    try:
        checks = SUITE_FUNCS[args.suite](p, args)
    except SuiteSkipped as exc:
        print(f"SKIPPED  {args.suite}: {exc}")
        return EXIT_SKIPPED
    if args.tol is not None:
        for c in checks:
            c.limit, c.passed = args.tol, c.residual <= args.tol
    for c in checks:
        print(c.line())
    if args.json:
        report.write_json(args.json, {"suite": args.suite, "pattern": p.fingerprint(),
                                      "checks": [c.__dict__ for c in checks]})
        _write_manifest(args.json, "verify", args, p.fingerprint(), [args.json])
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


# -- correlations ------------------------------------------------------------

def _correlation_rows(p, pairs, betas, method):
    rows = []
    for beta in betas:
        for u, v in pairs:
            d = int(p.graph.bfs_distances(u)[v])
            row = {"beta": beta, "d": d, "u": u, "v": v, "method": method}
            try:
                row["value"] = obs.two_point(p, beta, u, v, method).value
            except (kw.KacWardError, np.linalg.LinAlgError, ValueError) as exc:
                log.warning("beta=%g (%d, %d): %s", beta, u, v, exc)
                row["value"], row["error"] = None, str(exc)
            rows.append(row)
    return rows


def _check_vertices(p, pairs):
    for u, v in pairs:
        for a in (u, v):
            if not 0 <= a < p.n_vertices:
                raise UsageError(f"vertex {a} is not in the pattern")


def _emit(p, args, rows, command, figures=False):
    prefix = args.out
    outputs = [f"{prefix}.csv", f"{prefix}.json"]
    report.write_csv(outputs[0], rows)
    report.write_json(outputs[1], {"pattern": p.fingerprint(), "rows": rows})
    if figures:
        outputs += [f"{prefix}_decay.svg", f"{prefix}_beta.svg"]
        report.plot_correlation_decay(outputs[2], rows)
        report.plot_correlation_vs_beta(outputs[3], rows)
    outputs.append(_write_manifest(prefix, command, args, p.fingerprint(), outputs))
    return outputs


def cmd_correlate(args) -> int:
    p = _load(args)
    pairs = [(args.u, args.v)]
    _check_vertices(p, pairs)
    rows = _correlation_rows(p, pairs, args.betas or [1.0], args.method)
    for r in rows:
        val = "nan" if r["value"] is None else f"{r['value']:.12g}"
        print(f"beta={r['beta']:g} u={r['u']} v={r['v']} d={r['d']} value={val}")
    if args.out:
        _emit(p, args, rows, "correlate")
    return EXIT_OK if all(r["value"] is not None for r in rows) else EXIT_FAIL


def cmd_scan_beta(args) -> int:
    p = _load(args)
    if args.pairs:
        pairs = parse_pairs(args.pairs)
    elif args.source is not None:
        pairs = [(u, args.source) for u in range(p.n_vertices) if u != args.source]
    else:
        raise UsageError("scan-beta needs --pairs or --source")
    _check_vertices(p, pairs)
    rows = _correlation_rows(p, pairs, args.betas or parse_grid("0.6:1.2:0.1"), args.method)
    outputs = _emit(p, args, rows, "scan-beta", figures=True)
    print(f"{len(rows)} rows; wrote " + ", ".join(outputs))
    return EXIT_OK


def cmd_svg(args) -> int:
    p = _load(args)
    values = None
    if args.overlay == "couplings":
        values = critical_couplings(p)
    elif args.overlay == "correlations":
        if args.source is None:
            raise UsageError("correlations overlay needs --source")
        values = obs.correlation_row(p, args.beta, args.source)
    elif args.overlay == "observable":
        bar = half_edge_extension(p, _region(p, args))
        sol = sholo.solve_bvp(bar, sholo.admissible_boundary(bar, seed=resolve_seed(args.seed)))
        values = np.zeros(p.n_edges)
        und = p.graph.undirected[bar.parent[bar.graph.forward]]
        values[und] = np.abs(sol.f[bar.graph.undirected[bar.graph.forward]])
    text = render_svg(p, args.overlay, values)
    with open(args.out, "w") as fh:
        fh.write(text)
    _write_manifest(args.out, "svg", args, p.fingerprint(), [args.out])
    print(f"wrote {args.out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="JSON file of option defaults; flags override")
    common.add_argument("--threads", type=int, default=1,
                        help="BLAS/LAPACK threads (1 is the deterministic reference)")
    common.add_argument("--seed", type=int, default=None,
                        help=f"random seed (falls back to ${SEED_ENV}, then 0)")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="pattern-ising", parents=[common], allow_abbrev=False,
                                 description="Critical Ising models on circle patterns.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, allow_abbrev=False, **kw)
    sub.add_parser = add_parser

    g = sub.add_parser("generate", parents=[common], help="write a generated pattern")
    g.add_argument("kind", choices=GENERATORS)
    g.add_argument("-o", "--out", required=True)
    g.add_argument("--width", type=int, default=4)
    g.add_argument("--height", type=int, default=4)
    g.add_argument("--radius", type=float, default=1.0)
    g.add_argument("--heights", help="comma-separated column widths (stretched-square)")
    g.add_argument("--rows", type=int, default=None)
    g.add_argument("--jitter", type=float, default=0.05)
    g.add_argument("--spacing", type=float, default=1.0)
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", parents=[common], help="check pattern conditions")
    v.add_argument("pattern")
    v.add_argument("--epsilon", type=float, default=None)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--json")
    v.set_defaults(func=cmd_validate)

    f = sub.add_parser("verify", parents=[common], help="run a verification suite")
    f.add_argument("pattern")
    f.add_argument("--suite", choices=SUITES, required=True)
    f.add_argument("--betas", type=parse_grid, default=None)
    f.add_argument("--region", help="comma-separated region vertices (sholo, diffineq)")
    f.add_argument("--vertex", type=int, default=None, help="vertex for diffineq")
    f.add_argument("--tol", type=float, default=None,
                   help="replace every check's limit (defaults are per identity)")
    f.add_argument("--json")
    f.set_defaults(func=cmd_verify)

    c = sub.add_parser("correlate", parents=[common], help="two-point function of one pair")
    c.add_argument("pattern")
    c.add_argument("--u", type=int, required=True)
    c.add_argument("--v", type=int, required=True)
    c.add_argument("--betas", type=parse_grid, default=None)
    c.add_argument("--method", choices=obs.METHODS, default="kacward")
    c.add_argument("-o", "--out", help="output prefix for CSV/JSON/manifest")
    c.set_defaults(func=cmd_correlate)

    s = sub.add_parser("scan-beta", parents=[common], help="correlations over a beta grid")
    s.add_argument("pattern")
    s.add_argument("--betas", type=parse_grid, default=None)
    s.add_argument("--pairs")
    s.add_argument("--source", type=int, default=None)
    s.add_argument("--method", choices=obs.METHODS, default="kacward")
    s.add_argument("-o", "--out", required=True, help="output prefix")
    s.set_defaults(func=cmd_scan_beta)

    d = sub.add_parser("svg", parents=[common], help="draw a pattern")
    d.add_argument("pattern")
    d.add_argument("--overlay", choices=OVERLAYS, default="none")
    d.add_argument("--beta", type=float, default=1.0)
    d.add_argument("--source", type=int, default=None)
    d.add_argument("--region")
    d.add_argument("-o", "--out", required=True)
    d.set_defaults(func=cmd_svg)
    return ap


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config!r}: {exc}") from None
    for action in parser._subparsers._group_actions[0].choices.values():
        dests = {a.dest for a in action._actions}
        action.set_defaults(**{k: v for k, v in cfg.items() if k in dests})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        for key in ("betas",):
            val = getattr(args, key, None)
            if isinstance(val, str):
                setattr(args, key, parse_grid(val))
        try:
            from threadpoolctl import threadpool_limits
            ctx = threadpool_limits(limits=args.threads)
        except ImportError:
            ctx = nullcontext()
        t0 = time.perf_counter()
        with ctx:
            code = args.func(args)
        log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
