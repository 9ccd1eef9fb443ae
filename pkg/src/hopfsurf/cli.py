"""Command-line interface: verification tables, solves and mesh export."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import groups as G
from . import skeleton as S
from .export import export_mesh, frame_avoiding
from .hopf import conjugator_to, lift_displacement
from .plateau import DEFAULT_BUDGET, SolverOptions, quotient_genus, solver_report
from .sphere2 import GeodesicPolygon2, E_I, E_J, E_K, polygon_area

PUBLISHED_GENUS = {"T2": 25, "T3": 9, "O2": 121, "O3": 49, "O4": 25, "I2": 841, "I3": 361, "I5": 121}
PUBLISHED_ORDER = {"T2": 144, "T3": 96, "O2": 576, "O3": 384, "O4": 288, "I2": 3600, "I3": 2400, "I5": 1440}
POINCARE_GENUS = {"I5": 2, "I3": 4, "I2": 8}


def expected_order(spec: G.GroupSpec) -> int:
    if spec.family == "C":
        return 2 * spec.m * spec.n
    if spec.family == "D":
        return 8 * spec.l
    if spec.family == "Dh":
        return 4 * spec.l**2
    return PUBLISHED_ORDER[spec.family]


def expected_genus(spec: G.GroupSpec) -> int:
    if spec.family == "C":
        return (spec.m - 1) * (spec.n - 1)
    if spec.family == "D":
        return 1
    if spec.family == "Dh":
        return (spec.l - 1) ** 2
    return PUBLISHED_GENUS[spec.family]


# ---------------------------------------------------------------- commands


def cmd_verify_groups(args) -> tuple[dict, bool]:
    rng = range(1, 7)
    specs = [G.C(m, n) for m in rng for n in rng] + [G.D(l) for l in rng] + [G.D(l, True) for l in rng]
    specs += list(G.SPECIAL_SPECS)
    rows = []
    for spec in specs:
        grp = G.build_group(spec)
        rows.append(
            {
                "spec": spec.name,
                "expected": expected_order(spec),
                "computed": grp.order,
                "kernel": len(grp.kernel_rows()),
                "pass": grp.order == expected_order(spec),
            }
        )
    ok = all(r["pass"] for r in rows)
    return {"command": "verify-groups", "rows": rows, "pass": ok}, ok


def cmd_verify_quads(args) -> tuple[dict, bool]:
    rows = []
    for spec in G.representative_specs():
        q = S.fundamental_quadrilateral(spec)
        lengths, angles = S.quad_metrics(q)
        tl, ta = S.table_lengths(spec), S.table_angles(spec)
        err = max(max(abs(a - b) for a, b in zip(lengths, tl)), max(abs(a - b) for a, b in zip(angles, ta)))
        rows.append(
            {
                "spec": spec.name,
                "lengths": lengths,
                "expected_lengths": list(tl),
                "angles": angles,
                "expected_angles": list(ta),
                "max_error": err,
                "pass": err <= args.tol,
            }
        )
    ok = all(r["pass"] for r in rows)
    return {"command": "verify-quads", "tol": args.tol, "rows": rows, "pass": ok}, ok


def cmd_genus(args) -> tuple[dict, bool]:
    specs = [G.parse_spec(args.spec)] if args.spec else G.all_specs()
    rows = []
    for spec in specs:
        m, n = G.angle_labels(spec)
        if m < 2 or n < 2:
            rows.append({"spec": spec.name, "skipped": "angle labels below 2", "pass": True})
            continue
        cc = S.complex_counts(spec)
        g = S.genus(spec)
        rows.append(
            {
                "spec": spec.name,
                "genus": g,
                "combinatorial_genus": cc.genus,
                "expected": expected_genus(spec),
                "V": cc.V,
                "E": cc.E,
                "F": cc.F,
                "pass": g == cc.genus == expected_genus(spec),
            }
        )
    ok = all(r["pass"] for r in rows)
    return {"command": "genus", "rows": rows, "pass": ok}, ok


def _random_triangle(rng) -> np.ndarray:
    c = rng.normal(size=3)
    c /= np.linalg.norm(c)
    pts = []
    for _ in range(3):
        p = c + 0.6 * rng.normal(size=3)
        pts.append(p / np.linalg.norm(p))
    return np.array(pts)


def cmd_lift(args) -> tuple[dict, bool]:
    rng = np.random.default_rng(args.seed)
    demos = [("octant", np.array([E_I, E_J, E_K]))]
    demos += [(f"random-{k}", _random_triangle(rng)) for k in range(args.count)]
    rows = []
    for name, tri in demos:
        poly = GeodesicPolygon2.from_vertices(list(tri))
        area = polygon_area(poly, "left")
        if area > 2 * math.pi:
            poly = GeodesicPolygon2.from_vertices(list(tri[::-1]))
            area = polygon_area(poly, "left")
        start = 2 * conjugator_to(poly.arcs[0].start)
        disp = lift_displacement(poly, start)
        rows.append({"name": name, "area": area, "displacement": disp, "error": abs(abs(disp) - area), "pass": abs(abs(disp) - area) <= 1e-8})
    ok = all(r["pass"] for r in rows)
    return {"command": "lift", "rows": rows, "pass": ok}, ok


def _strip_private(report: dict) -> dict:
    return {k: v for k, v in report.items() if not k.startswith("_") and k != "seconds"}


def cmd_solve(args) -> tuple[dict, bool]:
    spec = G.parse_spec(args.spec)
    opts = SolverOptions(refinement=args.refinement)
    rep = solver_report(spec, opts, budget=args.budget)
    mesh = rep["_mesh"]
    out = _strip_private(rep)
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        frame = frame_avoiding(mesh.vertices, seed=args.seed)
        export_mesh(mesh, d / f"{spec.slug}.obj", frame)
        out["mesh_file"] = f"{spec.slug}.obj"
    if spec.family == "C" and spec.m == spec.n == 2:
        target = 8 * math.pi**2
        out["clifford_area"] = target
        out["clifford_relative_error"] = abs(out["closed_area"] - target) / target
    ok = bool(out["closed"] and out["genus"] == expected_genus(spec))
    out["pass"] = ok
    if args.out_dir:
        (Path(args.out_dir) / f"{spec.slug}.report.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return out, ok


def cmd_quotient(args) -> tuple[dict, bool]:
    spec = G.parse_spec(args.spec)
    if args.subgroup != "poincare":
        raise SystemExit(f"unknown subgroup {args.subgroup!r}")
    gp = G.poincare_subgroup()
    g = quotient_genus(spec, gp)
    exp = POINCARE_GENUS.get(spec.family)
    ok = exp is None or g == exp
    return {"command": "quotient", "spec": spec.name, "subgroup_order": gp.order, "genus": g, "expected": exp, "pass": ok}, ok


def cmd_report_all(args) -> tuple[dict, bool]:
    parts = {}
    ok = True
    for name, fn in (("groups", cmd_verify_groups), ("quads", cmd_verify_quads), ("genus", cmd_genus), ("lift", cmd_lift)):
        sub = argparse.Namespace(**{**vars(args), "spec": None})
        res, good = fn(sub)
        parts[name] = res
        ok &= good
    iso = []
    for spec in G.SPECIAL_SPECS:
        try:
            iso.append({"spec": spec.name, "order": G.isometry_group_order(spec)})
        except G.OutOfTableDomain:
            iso.append({"spec": spec.name, "order": None})
    parts["isometry_orders"] = iso
    quot = []
    for fam in ("I5", "I3", "I2"):
        res, good = cmd_quotient(argparse.Namespace(spec=G.GroupSpec(fam).name, subgroup="poincare"))
        quot.append(res)
        ok &= good
    parts["quotients"] = quot
    proper = []
    for spec in G.representative_specs():
        proper.append({"spec": spec.name, "proper": S.is_proper(S.fundamental_quadrilateral(spec))})
    ok &= all(p["proper"] for p in proper)
    parts["properness"] = proper
    return {"command": "report-all", "sections": parts, "pass": ok}, ok


# ---------------------------------------------------------------- plumbing


def _text(result: dict) -> str:
    lines = []
    rows = result.get("rows")
    if rows:
        for r in rows:
            flag = "PASS" if r.get("pass") else "FAIL"
            body = ", ".join(f"{k}={_fmt(v)}" for k, v in r.items() if k not in ("pass", "spec", "name"))
            lines.append(f"{flag} {r.get('spec', r.get('name', ''))}: {body}")
    else:
        for k, v in result.items():
            if k == "sections":
                for name, sec in v.items():
                    lines.append(f"[{name}] " + ("PASS" if isinstance(sec, dict) and sec.get("pass") else json.dumps(sec, sort_keys=True) if not isinstance(sec, dict) else "FAIL"))
            else:
                lines.append(f"{k}: {_fmt(v)}")
    lines.append("OVERALL " + ("PASS" if result.get("pass") else "FAIL"))
    return "\n".join(lines)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _add_common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def d(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--tol", type=float, default=d(1e-9), help="comparison tolerance for table checks")
    parser.add_argument("--refinement", type=int, default=d(16), help="grid density per quadrilateral")
    parser.add_argument("--budget", type=int, default=d(DEFAULT_BUDGET), help="triangle budget for closed meshes")
    parser.add_argument("--seed", type=int, default=d(0))
    parser.add_argument("--out-dir", default=d(None), help="directory for reports and meshes")
    parser.add_argument("--format", choices=("json", "text"), default=d("text"))


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, suppress=True)

    p = argparse.ArgumentParser(prog="hopfsurf", description=__doc__)
    _add_common(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify-groups", parents=[common], help="closure orders against the closed forms")
    sub.add_parser("verify-quads", parents=[common], help="quadrilateral lengths and angles against the table")
    sp = sub.add_parser("genus", parents=[common], help="genus table")
    sp.add_argument("--spec", default=None)
    sp = sub.add_parser("lift", parents=[common], help="holonomy of lifted triangles")
    sp.add_argument("--count", type=int, default=5)
    sp = sub.add_parser("solve", parents=[common], help="solve the Plateau problem and extend")
    sp.add_argument("spec")
    sp = sub.add_parser("quotient", parents=[common], help="genus in a quotient space")
    sp.add_argument("spec")
    sp.add_argument("subgroup", choices=("poincare",))
    sub.add_parser("report-all", parents=[common], help="full verification suite")
    return p


COMMANDS = {
    "verify-groups": cmd_verify_groups,
    "verify-quads": cmd_verify_quads,
    "genus": cmd_genus,
    "lift": cmd_lift,
    "solve": cmd_solve,
    "quotient": cmd_quotient,
    "report-all": cmd_report_all,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "count"):
        args.count = 5
    try:
        result, ok = COMMANDS[args.command](args)
    except ValueError as exc:
        parser.error(str(exc))
    if args.format == "json":
        sys.stdout.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(_text(result) + "\n")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
