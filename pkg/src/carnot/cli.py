"""Command-line front end: validate / classify / decompose / forms / lift /
verify-pullback / mollify / report.

Exit codes: 0 success, 1 domain error with diagnostic, 2 usage error.  All
numeric configuration comes from flags with environment fallbacks, and the
effective values are recorded in every report for provenance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import algebra as A
from . import classify as C
from . import forms as F
from . import group as G
from . import io_schemas as IO
from . import smoothing as S
from .pansu_lab import dsl, experiments as E, maps


def _env_default(name, cast, fallback):
    raw = os.environ.get(name)
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        return fallback


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="carnot",
                                description="Carnot group calculus toolkit")
    p.add_argument("--out", default=_env_default("CARNOT_OUT", str, "."),
                   help="output directory for artifacts")
    p.add_argument("--threads", type=int,
                   default=_env_default("CARNOT_THREADS", int, 1),
                   help="cap on internal parallelism")
    p.add_argument("--eps", type=float,
                   default=_env_default("CARNOT_EPS", float, 1e-9),
                   help="float comparison epsilon")
    p.add_argument("--seed", type=int,
                   default=_env_default("CARNOT_SEED", int, 0),
                   help="seed for randomized searches")
    p.add_argument("--format", choices=("json", "csv"),
                   default=_env_default("CARNOT_FORMAT", str, "json"))
    sub = p.add_subparsers(dest="verb", required=True)

    v = sub.add_parser("validate", help="validate an algebra JSON file")
    v.add_argument("file")

    c = sub.add_parser("classify", help="StructureReport for an algebra or product quotient")
    c.add_argument("file")

    d = sub.add_parser("decompose", help="step-2 decomposition into Heisenberg factors")
    d.add_argument("file")

    f = sub.add_parser("forms", help="evaluate a standard form on a built-in algebra")
    f.add_argument("algebra", help="builtin algebra spec, e.g. heisenberg(1)")
    f.add_argument("name", help="catalog name, e.g. theta, volume, zeta")
    f.add_argument("params", nargs="*", type=int)

    l = sub.add_parser("lift", help="lift a polynomial symplectomorphism")
    l.add_argument("file", help="DSL map source file for phi on R^{2n}")
    l.add_argument("--field", choices=("R", "C"), default="R")

    vp = sub.add_parser("verify-pullback", help="run a pullback-theorem experiment spec")
    vp.add_argument("file")
    vp.add_argument("--svg", action="store_true", help="also write a convergence SVG")

    m = sub.add_parser("mollify", help="mollify a sampled map")
    m.add_argument("file", help="SampledMap JSON")
    m.add_argument("--algebra", required=True, help="builtin algebra spec")
    m.add_argument("--rho", type=float, required=True)
    m.add_argument("--kernel-resolution", type=int, default=3)

    r = sub.add_parser("report", help="bundle validation + classification reports")
    r.add_argument("files", nargs="+")
    return p


def _provenance(args) -> dict:
    return {"eps": args.eps, "seed": args.seed, "threads": args.threads,
            "format": args.format}


def _write(args, name: str, payload: dict) -> Path:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    payload = dict(payload)
    payload["config"] = _provenance(args)
    path.write_text(IO.dump_canonical(payload))
    return path


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _residual_csv(rep) -> str:
    lines = ["resolution,residual,tolerance,passed"]
    for res, r, t in zip(rep.resolutions, rep.residuals, rep.tolerances):
        lines.append(f"{res},{r!r},{t!r},{abs(r) <= t}")
    return "\n".join(lines) + "\n"


def _svg_polyline(xs, ys, width=420, height=300) -> str:
    """Minimal deterministic SVG log-log convergence plot."""
    import math

    pts = [(math.log10(x), math.log10(max(abs(y), 1e-18))) for x, y in zip(xs, ys)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    dx = (x1 - x0) or 1.0
    dy = (y1 - y0) or 1.0
    path = " ".join(
        f"{40 + 360 * (px - x0) / dx:.1f},{260 - 220 * (py - y0) / dy:.1f}"
        for px, py in pts)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
        '<rect width="100%" height="100%" fill="white"/>'
        f'<polyline points="{path}" fill="none" stroke="black" stroke-width="1.5"/>'
        '<text x="10" y="16" font-size="12">|residual| vs resolution (log-log)</text>'
        "</svg>\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0,) else 0
    try:
        return _dispatch(args)
    except (IO.SchemaError, A.StructuralError, C.ClassifyError, F.FormError,
            dsl.ParseError, maps.MapCompileError, maps.SymplecticDefect,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.verb == "validate":
        g = IO.algebra_from_json(_load_json(args.file))
        rep = A.validate_algebra(g)
        _write(args, "validate.json", {"algebra": g.name, **rep.to_json()})
        print("valid" if rep.valid else "INVALID")
        return 0 if rep.valid else 1

    if args.verb == "classify":
        obj = _load_json(args.file)
        if obj.get("type") == "product_quotient":
            pq = IO.pq_from_json(obj)
            g = pq.algebra
            extra = {"certificate": pq.certificate.to_json(),
                     "finest_partition": C.finest_partition(pq).to_json()}
        else:
            g = IO.algebra_from_json(obj)
            extra = {}
        rep = C.structure_trichotomy(g, seed=args.seed)
        _write(args, "classify.json", {**rep.to_json(), **extra})
        print(rep.verdict)
        return 0

    if args.verb == "decompose":
        g = IO.algebra_from_json(_load_json(args.file))
        dec = C.step2_decompose(g, seed=args.seed)
        payload = {
            "field": dec.field,
            "factors": [
                {"m": f["m"],
                 "first_layer": [[str(x) for x in v] for v in f["first_layer"]],
                 "second_layer": [[str(x) for x in v] for v in f["second_layer"]]}
                for f in dec.factors],
        }
        _write(args, "decompose.json", payload)
        print(f"{len(dec.factors)} factors over {dec.field}")
        return 0

    if args.verb == "forms":
        g = IO.builtin_algebra(args.algebra)
        if args.name in ("zeta", "zeta_bar", "zeta_top", "zeta_bar_top"):
            g = A.complexify(g).algebra
        form = F.standard_form(g, args.name, *args.params)
        payload = IO.form_to_json(form)
        payload["weight"] = form.weight() if not form.is_zero() else None
        _write(args, "form.json", payload)
        print(form)
        return 0

    if args.verb == "lift":
        src = Path(args.file).read_text()
        lit = dsl.parse_map(src)
        if not isinstance(lit, dsl.MapLiteral):
            raise maps.MapCompileError("lift expects a plain map literal")
        lifted, cert = maps.lift_symplectomorphism(list(lit.polys), field=args.field)
        payload = {
            "contact_exact": cert.contact_exact,
            "central_polynomial": str(cert.central),
            "lift": [str(p) for p in lifted.polys],
        }
        _write(args, "lift.json", payload)
        print("contact certificate:", cert.contact_exact)
        return 0

    if args.verb == "verify-pullback":
        spec = IO.experiment_from_json(_load_json(args.file))
        g = spec["algebra"]
        cm = maps.compile_map(spec["map_source"], g)
        bump = E.bump_polynomial(g, spec["box_radius"], spec["box_center"])
        eta = E.PolyForm.from_invariant(spec["eta_beta"], bump=bump)
        rep = E.pullback_theorem_residual(cm, g, spec["omega"], eta,
                                          spec["box_radius"], spec["resolutions"],
                                          center=spec["box_center"])
        payload = rep.to_json()
        if spec["rhos"]:
            import numpy as _np

            res = min(min(spec["resolutions"]), 6)
            lat = G.sample_box(g, spec["box_center"] or _np.zeros(g.dim),
                               spec["box_radius"], res)
            approx = E.approximation_residual(cm, g, spec["omega"], eta,
                                              spec["rhos"], lat)
            payload["approximation"] = {
                "pansu_integral": approx["pansu_integral"],
                "rows": approx["rows"],
                "decreasing": approx["decreasing"],
            }
        _write(args, "pullback.json", payload)
        if args.format == "csv":
            Path(args.out, "pullback.csv").write_text(_residual_csv(rep))
        if getattr(args, "svg", False):
            Path(args.out, "pullback.svg").write_text(
                _svg_polyline(rep.resolutions, rep.residuals))
        print("residuals:", rep.residuals)
        return 0 if rep.passed else 1

    if args.verb == "mollify":
        g = IO.builtin_algebra(args.algebra)
        sm = IO.sampled_map_from_json(g, g, _load_json(args.file))
        kern = S.default_kernel(g, args.kernel_resolution)
        # shrink the query box so rho-neighborhoods stay inside the domain
        lat = sm.lattice
        inner = G.sample_box(g, lat.center, lat.radius - args.rho, lat.resolution)
        out = S.mollify_to_sampled(sm, kern, args.rho, inner, g)
        _write(args, "mollified.json", IO.sampled_map_to_json(out))
        print(f"mollified {inner.size} samples at rho={args.rho}")
        return 0

    if args.verb == "report":
        summary = []
        for path in args.files:
            obj = _load_json(path)
            if obj.get("type") == "product_quotient":
                pq = IO.pq_from_json(obj)
                rep = A.validate_algebra(pq.algebra)
                summary.append({"file": path, "valid": rep.valid,
                                "certificate": pq.certificate.to_json()})
            else:
                g = IO.algebra_from_json(obj)
                rep = A.validate_algebra(g)
                summary.append({"file": path, "valid": rep.valid})
        _write(args, "report.json", {"reports": summary})
        print(f"{len(summary)} files")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
