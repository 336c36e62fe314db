"""Command-line entry point.

Exit status: 0 on success, 2 on invalid input, 3 on numerical failure or a
missed acceptance tolerance. Numbers are written with 17 significant digits
and ``\\n`` line endings, so identical invocations give identical files.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import KECollapseError, NumericalError, ValidationError

FMT = "%.17g"
WORKERS_ENV = "KECOLLAPSE_MAX_WORKERS"


def max_workers() -> int:
    """Worker cap from the environment (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"{WORKERS_ENV} must be >= 1")
    return n


def fmt(x) -> str:
    return FMT % float(x)


def write_rows(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def parse_t(token: str) -> float:
    """``e-5`` means ``exp(-5)``; anything else is a plain float."""
    token = token.strip()
    try:
        if token.startswith("e"):
            return math.exp(float(token[1:]))
        return float(token)
    except ValueError:
        raise ValidationError(f"cannot parse t value {token!r}") from None


def parse_region(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"cannot parse region {text!r}") from None
    if len(vals) not in (2, 4):
        raise ValidationError("region is lo,hi or lo1,hi1,lo2,hi2")
    return vals


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_solve_ma(args) -> int:
    from .mongeampere import ma_residual, solve_real_ma
    from .toric import SimplexDomain

    if not 1 <= args.dim <= 3:
        raise ValidationError("dim must be 1..3")
    sol = solve_real_ma(SimplexDomain(args.dim), args.kappa, args.resolution, args.tol, args.mode)
    res = ma_residual(sol).field
    header = [f"x{j + 1}" for j in range(sol.dim)] + ["phi", "res"]
    rows = np.column_stack([sol.points, sol.values, res])
    out = Path(args.out)
    write_rows(out, header, rows)
    summary = {
        "dim": sol.dim, "kappa": fmt(sol.kappa), "resolution": sol.grid.resolution,
        "mode": sol.mode, "nodes": len(sol.grid), "newton_iterations": sol.newton_iters,
        "residual_sup": fmt(sol.residual_sup),
    }
    bary = sol.grid.domain.barycenter
    try:
        summary["phi_at_barycenter"] = fmt(sol.value_at(bary))
    except ValidationError:
        pass
    text = "".join(f"{k} = {v}\n" for k, v in summary.items())
    out.with_suffix(".summary.txt").write_text(text, newline="\n")
    sys.stdout.write(text)
    return 0


def cmd_collapse_report(args) -> int:
    from .acceptance import gh_pairs
    from .mongeampere import solve_real_ma
    from .semiflat import BaseGraph, fiber_diameter, gh_discrepancy, ricci_residual, semiflat_metric
    from .toric import SimplexDomain

    if not 1 <= args.dim <= 3:
        raise ValidationError("dim must be 1..3")
    ts = [parse_t(tok) for tok in args.t_list.split(",")]
    sol = solve_real_ma(SimplexDomain(args.dim), args.kappa, args.resolution)
    grid = sol.grid
    centre = grid.points[grid.nearest_node(grid.domain.barycenter)]
    samples = grid.points[grid.slack >= 0.1 - 1e-12]
    ricci = ricci_residual(sol, samples)
    pairs = gh_pairs(sol, args.pairs, args.seed)
    graph = BaseGraph(sol)
    rows = []
    for t in ts:
        m = semiflat_metric(sol, t)
        diam = fiber_diameter(m, centre)
        sup, _ = gh_discrepancy(m, pairs, graph)
        rows.append((t, diam, diam * -math.log(t), sup))
    out = Path(args.out)
    lines = [f"dim = {args.dim}", f"kappa = {fmt(args.kappa)}", f"resolution = {args.resolution}",
             f"seed = {args.seed}", f"pairs = {args.pairs}",
             "base_point = " + ",".join(fmt(c) for c in centre),
             f"ricci_residual = {fmt(ricci)}", "# t, fiber_diameter, diameter_times_minus_log_t, gh_discrepancy"]
    lines += [", ".join(fmt(v) for v in r) for r in rows]
    out.write_text("\n".join(lines) + "\n", newline="\n")
    stem = out.with_suffix("")
    for col, name in ((1, "diameter"), (2, "diameter_scaled"), (3, "gh_discrepancy")):
        Path(f"{stem}_{name}.dat").write_text(
            "".join(f"{k} {fmt(r[col])}\n" for k, r in enumerate(rows)), newline="\n")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_amoeba(args) -> int:
    from .tropical import TropicalPolynomial, amoeba_sample

    p = TropicalPolynomial.from_file(args.poly)
    region = parse_region(args.region)
    cloud = amoeba_sample(p, args.t, region, args.res, args.angles)
    header = [f"x{j + 1}" for j in range(p.nvars)] + ["witness_residual"]
    write_rows(Path(args.out), header, np.column_stack([cloud.points, cloud.residuals]))
    print(f"points = {len(cloud.points)}")
    print(f"max_witness_residual = {fmt(cloud.residuals.max())}")
    return 0


def cmd_tropical(args) -> int:
    from .tropical import TropicalPolynomial, corner_locus, tropicalize

    p = TropicalPolynomial.from_file(args.poly)
    f = tropicalize(p)
    locus = corner_locus(f, parse_region(args.region), args.res)
    header = [f"x{j + 1}" for j in range(p.nvars)]
    write_rows(Path(args.out), header, locus.points)
    for piece in locus.pieces:
        lo = "-inf" if piece.lo is None else str(piece.lo)
        hi = "inf" if piece.hi is None else str(piece.hi)
        base = ",".join(map(str, piece.base))
        direction = ",".join(map(str, piece.direction))
        print(f"{piece.kind} terms={piece.terms[0]},{piece.terms[1]} {piece.equality(f)} "
              f"base=({base}) dir=({direction}) s in [{lo}, {hi}]")
    for v in locus.vertices:
        print("vertex (" + ",".join(map(str, v)) + ")")
    return 0


def cmd_dual_complex(args) -> int:
    from .degeneration import (PolyDecomposition, dual_complex, format_dual_complex,
                               mumford_degeneration, verify_duality)

    d = mumford_degeneration(PolyDecomposition.from_fixture(args.fixture))
    dc = dual_complex(d)
    text = format_dual_complex(dc)
    rep = verify_duality(dc, d)
    text += "f_vector = " + ",".join(map(str, dc.f_vector())) + "\n"
    text += f"duality = {'pass' if rep.passed else 'fail'}\n"
    for kind, msg in rep.violations:
        text += f"violation {kind}: {msg}\n"
    Path(args.out).write_text(text, newline="\n")
    sys.stdout.write(text)
    return 0 if rep.passed else 3


def cmd_accept(args) -> int:
    from .acceptance import run_suite

    only = [int(k) for k in args.only.split(",")] if args.only else None
    results = run_suite(Path(args.out_dir), only=only, determinism=not args.skip_determinism,
                        workers=max_workers(), seed=args.seed)
    for r in results:
        print(r.line())
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 3 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kecollapse",
                                     description="Collapsing Kahler-Einstein model computations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for any sampling (default 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-ma", parents=[common], help="solve det D^2 phi = kappa e^{2 phi} on the standard simplex")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--mode", choices=("barrier", "exhaustion"), default="barrier")
    p.add_argument("--out", default="solution.csv")
    p.set_defaults(func=cmd_solve_ma)

    p = sub.add_parser("collapse-report", parents=[common], help="fibre diameters, GH discrepancies, Ricci residual")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--t-list", default="e-5,e-10,e-20")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--out", default="report.txt")
    p.set_defaults(func=cmd_collapse_report)

    p = sub.add_parser("amoeba", parents=[common], help="sample the amoeba of a polynomial")
    p.add_argument("--poly", required=True)
    p.add_argument("--t", type=parse_t, required=True)
    p.add_argument("--region", required=True)
    p.add_argument("--res", type=int, default=400)
    p.add_argument("--angles", type=int, default=16)
    p.add_argument("--out", default="cloud.csv")
    p.set_defaults(func=cmd_amoeba)

    p = sub.add_parser("tropical", parents=[common], help="corner locus of the tropicalization")
    p.add_argument("--poly", required=True)
    p.add_argument("--region", required=True)
    p.add_argument("--res", type=int, default=400)
    p.add_argument("--out", default="locus.csv")
    p.set_defaults(func=cmd_tropical)

    p = sub.add_parser("dual-complex", parents=[common], help="dual intersection complex of a Mumford degeneration")
    p.add_argument("--fixture", required=True)
    p.add_argument("--out", default="complex.txt")
    p.set_defaults(func=cmd_dual_complex)

    p = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    p.add_argument("--out-dir", default="acceptance_artifacts")
    p.add_argument("--only", default="", help="comma-separated criterion numbers")
    p.add_argument("--skip-determinism", action="store_true")
    p.set_defaults(func=cmd_accept)
    return parser


def _attach_values(argv: list[str]) -> list[str]:
    # "--region -2,2,-2,2" would otherwise read the value as an option
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--region", "--t", "--t-list") and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _attach_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    try:
        max_workers()
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except KECollapseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
