"""JSON schemas for algebras, forms, homs, product quotients, sampled maps,
and experiment specs.  All schemas are versioned; loads validate and report
the offending JSON path; saves are canonical (sorted keys) so round-trips are
byte-identical.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from . import forms, group, scalars, smoothing
from .algebra import (GradedLieAlgebra, ProductQuotient, StructuralError,
                      product_quotient)

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{message} (at {path})")
        self.path = path


class SchemaVersionError(SchemaError):
    pass


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"missing field {key!r}", path)
    return obj[key]


def _check_version(obj: dict, path: str):
    v = obj.get("schema_version", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise SchemaVersionError(f"schema_version {v} != supported {SCHEMA_VERSION}", path)


def dump_canonical(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


# -- algebra ------------------------------------------------------------------------


def algebra_to_json(g: GradedLieAlgebra) -> dict:
    brackets = []
    for (i, j), terms in sorted(g.table.items()):
        if i >= j:
            continue
        row = [i + 1, j + 1,
               [[k + 1, scalars.format_scalar(c)] for k, c in sorted(terms.items())]]
        brackets.append(row)
    out = {
        "schema_version": SCHEMA_VERSION,
        "name": g.name,
        "scalar": g.scalar,
        "layers": list(g.layer_dims),
        "brackets": brackets,
    }
    if g.J is not None:
        out["J"] = [[scalars.format_scalar(x) for x in row] for row in g.J]
    return out


def algebra_from_json(obj: dict, path: str = "$") -> GradedLieAlgebra:
    _check_version(obj, path)
    tag = _need(obj, "scalar", path)
    if tag not in scalars.ALL_TAGS:
        raise SchemaError(f"unknown scalar tag {tag!r}", path + ".scalar")
    layers = _need(obj, "layers", path)
    if not isinstance(layers, list) or not all(isinstance(x, int) for x in layers):
        raise SchemaError("layers must be a list of integers", path + ".layers")
    br = {}
    for t, row in enumerate(_need(obj, "brackets", path)):
        p = f"{path}.brackets[{t}]"
        if not (isinstance(row, list) and len(row) == 3):
            raise SchemaError("bracket rows are [i, j, [[k, coeff]...]]", p)
        i, j, terms = row
        if not (isinstance(i, int) and isinstance(j, int) and i < j):
            raise SchemaError("only i < j pairs are stored", p)
        entry = {}
        for s, term in enumerate(terms):
            pp = f"{p}[{s}]"
            if not (isinstance(term, list) and len(term) == 2):
                raise SchemaError("bracket terms are [k, coeff]", pp)
            k, c = term
            try:
                entry[k - 1] = scalars.parse_scalar(tag, c)
            except (ValueError, ZeroDivisionError) as exc:
                raise SchemaError(f"bad coefficient: {exc}", pp)
        br[(i - 1, j - 1)] = entry
    J = None
    if "J" in obj:
        J = [[scalars.parse_scalar(tag, x) for x in row] for row in obj["J"]]
    try:
        return GradedLieAlgebra(layers, br, scalar=tag, name=obj.get("name", ""), J=J)
    except StructuralError as exc:
        raise SchemaError(str(exc), path)


# -- forms --------------------------------------------------------------------------


def form_to_json(a: forms.KForm) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "degree": a.degree,
        "terms": [[[i + 1 for i in idx], scalars.format_scalar(c)]
                  for idx, c in sorted(a.terms.items())],
    }


def form_from_json(g: GradedLieAlgebra, obj: dict, path: str = "$") -> forms.KForm:
    _check_version(obj, path)
    degree = _need(obj, "degree", path)
    terms = {}
    for t, row in enumerate(_need(obj, "terms", path)):
        p = f"{path}.terms[{t}]"
        if not (isinstance(row, list) and len(row) == 2):
            raise SchemaError("form terms are [[i...], coeff]", p)
        idx, c = row
        terms[tuple(i - 1 for i in idx)] = scalars.parse_scalar(g.scalar, c)
    return forms.KForm(g, degree, terms)


# -- homs ---------------------------------------------------------------------------


def hom_to_json(phi) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "layers": [[[scalars.format_scalar(x) for x in row] for row in blk]
                   for blk in phi.blocks],
    }


def hom_from_json(domain: GradedLieAlgebra, codomain: GradedLieAlgebra,
                  obj: dict, path: str = "$"):
    from .homs import GradedHom

    _check_version(obj, path)
    blocks = []
    for t, blk in enumerate(_need(obj, "layers", path)):
        blocks.append([[scalars.parse_scalar(codomain.scalar, x) for x in row]
                       for row in blk])
    return GradedHom(domain, codomain, blocks)


# -- product quotients -----------------------------------------------------------------


def pq_to_json(pq: ProductQuotient) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "product_quotient",
        "n": pq.n,
        "field": pq.field,
        "m": pq.m,
        "K_basis": [[scalars.format_scalar(x) for x in v] for v in pq.K_basis],
    }


def pq_from_json(obj: dict, path: str = "$") -> ProductQuotient:
    _check_version(obj, path)
    if obj.get("type") != "product_quotient":
        raise SchemaError("expected type 'product_quotient'", path + ".type")
    K = [[scalars.parse_scalar("Q", x) for x in v] for v in _need(obj, "K_basis", path)]
    return product_quotient(_need(obj, "field", path), _need(obj, "m", path),
                            _need(obj, "n", path), K)


# -- sampled maps and kernels ------------------------------------------------------------


def sampled_map_to_json(sm: smoothing.SampledMap) -> dict:
    lat = sm.lattice
    return {
        "schema_version": SCHEMA_VERSION,
        "domain": {
            "center": [float(x) for x in lat.center],
            "radius": [float(x) for x in lat.radius],
        },
        "resolution": [int(r) for r in lat.resolution],
        "values": [float(v) for v in sm.values.reshape(-1)],
    }


def sampled_map_from_json(domain: GradedLieAlgebra, codomain: GradedLieAlgebra,
                          obj: dict, path: str = "$") -> smoothing.SampledMap:
    _check_version(obj, path)
    dom = _need(obj, "domain", path)
    lat = group.sample_box(domain, dom["center"], np.asarray(dom["radius"]),
                           np.asarray(_need(obj, "resolution", path)))
    vals = np.asarray(_need(obj, "values", path), dtype=float)
    return smoothing.SampledMap(lat, vals.reshape(lat.size, codomain.dim), codomain)


def kernel_from_json(g: GradedLieAlgebra, obj: dict, path: str = "$"):
    _check_version(obj, path)
    if obj.get("type") != "lattice-ball":
        raise SchemaError("kernel type must be 'lattice-ball'", path + ".type")
    return smoothing.default_kernel(g, int(obj.get("resolution", 3)))


# -- experiment specs ---------------------------------------------------------------------


def experiment_from_json(obj: dict, path: str = "$") -> dict:
    """Parse {"algebra", "map", "omega", "eta", "box", "resolutions", "rhos"}."""
    _check_version(obj, path)
    out = {}
    alg = _need(obj, "algebra", path)
    if isinstance(alg, dict):
        out["algebra"] = algebra_from_json(alg, path + ".algebra")
    else:
        out["algebra"] = builtin_algebra(alg)
    out["map_source"] = _need(obj, "map", path)
    out["omega"] = form_from_json(out["algebra"], _need(obj, "omega", path),
                                  path + ".omega")
    eta = _need(obj, "eta", path)
    out["eta_beta"] = form_from_json(out["algebra"], eta, path + ".eta")
    out["eta_bump"] = eta.get("bump", "box")
    box = _need(obj, "box", path)
    out["box_radius"] = box["radius"] if isinstance(box, dict) else box
    out["box_center"] = box.get("center") if isinstance(box, dict) else None
    out["resolutions"] = list(_need(obj, "resolutions", path))
    out["rhos"] = list(obj.get("rhos", []))
    return out


def builtin_algebra(name: str) -> GradedLieAlgebra:
    """Algebra shorthand: heisenberg(m), complex_heisenberg(m), abelian(n),
    free_step2(n), sum(name, k)."""
    from . import algebra as A

    name = name.strip()
    if name.startswith("sum(") and name.endswith(")"):
        inner, k = name[4:-1].rsplit(",", 1)
        return A.direct_sum([builtin_algebra(inner.strip())] * int(k))
    for fam, fn in (("heisenberg", A.heisenberg),
                    ("complex_heisenberg", A.complex_heisenberg),
                    ("abelian", A.abelian), ("free_step2", A.free_step2)):
        if name.startswith(fam + "(") and name.endswith(")"):
            return fn(int(name[len(fam) + 1:-1]))
    raise SchemaError(f"unknown builtin algebra {name!r}")
