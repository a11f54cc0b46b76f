"""Graded (Carnot) Lie algebras: exact representation, validation, constructors.

Basis vectors are indexed 0..N-1 internally (JSON uses 1-based indices), ordered
layer by layer.  Structure constants are stored sparsely for *both* orderings
(i, j) and (j, i) so that antisymmetry is a checkable axiom, not a storage
artifact.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import linalg, scalars
from .scalars import DEFAULT_EPS, GaussianRational

Vector = List[object]


class StructuralError(ValueError):
    """Malformed input (bad indices, shape mismatch), distinct from axiom failure."""


class UnsupportedStepError(ValueError):
    pass


@dataclass(frozen=True)
class AxiomFailure:
    axiom: str          # "antisymmetry" | "jacobi" | "grading" | "generation"
    witness: tuple
    detail: str = ""


@dataclass
class ValidationReport:
    failures: List[AxiomFailure] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.failures

    def by_axiom(self, axiom: str) -> List[AxiomFailure]:
        return [f for f in self.failures if f.axiom == axiom]

    def to_json(self) -> dict:
        return {
            "valid": self.valid,
            "failures": [
                {"axiom": f.axiom, "witness": list(f.witness), "detail": f.detail}
                for f in self.failures
            ],
        }


class GradedLieAlgebra:
    """A stratified Lie algebra V_1 + ... + V_s over one of the scalar fields.

    Immutable after construction; all derived data is precomputed.
    """

    def __init__(self, layer_dims: Sequence[int], brackets, scalar: str = "Q",
                 name: str = "", labels: Optional[Sequence[str]] = None,
                 J: Optional[Sequence[Sequence]] = None, eps: float = DEFAULT_EPS,
                 meta: Optional[dict] = None):
        if scalar not in scalars.ALL_TAGS:
            raise StructuralError(f"unknown scalar tag {scalar!r}")
        if not layer_dims or any(d <= 0 for d in layer_dims):
            raise StructuralError("layer_dims must be positive integers")
        self.scalar = scalar
        self.eps = eps
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self.dim = sum(self.layer_dims)
        self.step = len(self.layer_dims)
        self.name = name or f"graded({','.join(map(str, self.layer_dims))})"
        self.meta = dict(meta or {})

        starts = []
        acc = 0
        for d in self.layer_dims:
            starts.append(acc)
            acc += d
        self.layer_starts = tuple(starts)
        lay = []
        for j, d in enumerate(self.layer_dims):
            lay.extend([j + 1] * d)
        self.layer_of = tuple(lay)  # 1-based layer number per basis index

        if labels is None:
            labels = [f"X{i + 1}" for i in range(self.dim)]
        if len(labels) != self.dim:
            raise StructuralError("labels length mismatch")
        self.labels = tuple(labels)

        # normalize brackets into dict[(i, j)] -> dict[k] -> coeff, both orderings
        table: Dict[Tuple[int, int], Dict[int, object]] = {}
        seen = set()
        for (i, j), terms in dict(brackets).items():
            if not (0 <= i < self.dim and 0 <= j < self.dim):
                raise StructuralError(f"bracket index out of range: ({i}, {j})")
            if i == j:
                raise StructuralError(f"bracket ({i}, {i}) must not be stored")
            entry = {}
            for k, c in dict(terms).items():
                if not (0 <= k < self.dim):
                    raise StructuralError(f"bracket target out of range: {k}")
                c = scalars.coerce(scalar, c)
                if not scalars.is_zero(scalar, c, eps):
                    entry[k] = c
            if entry:
                table[(i, j)] = entry
            seen.add((i, j))
        # fill the unseen opposite orderings antisymmetrically
        for (i, j) in list(table.keys()):
            if (j, i) not in seen:
                table[(j, i)] = {k: -c for k, c in table[(i, j)].items()}
        self.table = table

        if J is not None:
            J = [ [scalars.coerce(scalar, x) for x in row] for row in J ]
            if len(J) != self.dim or any(len(r) != self.dim for r in J):
                raise StructuralError("J must be an N x N matrix")
        self.J = J

        self.nu = sum((j + 1) * d for j, d in enumerate(self.layer_dims))

        self._dtheta_cache = None
        self._left_field_cache = None

    # -- basic queries ------------------------------------------------------

    def layer_indices(self, j: int) -> range:
        """Basis index range of layer j (1-based layer number)."""
        s = self.layer_starts[j - 1]
        return range(s, s + self.layer_dims[j - 1])

    def bracket_basis(self, i: int, j: int) -> Dict[int, object]:
        return self.table.get((i, j), {})

    def zero_vector(self) -> Vector:
        return [scalars.zero(self.scalar)] * self.dim

    def basis_vector(self, i: int) -> Vector:
        v = self.zero_vector()
        v[i] = scalars.one(self.scalar)
        return v

    def coerce_vector(self, v: Sequence) -> Vector:
        if len(v) != self.dim:
            raise StructuralError(f"vector length {len(v)} != dim {self.dim}")
        return [scalars.coerce(self.scalar, x) for x in v]

    def bracket(self, a: Sequence, b: Sequence) -> Vector:
        """[a, b] by bilinear extension of the structure constants."""
        if len(a) != self.dim or len(b) != self.dim:
            raise StructuralError("element dimension mismatch")
        out = self.zero_vector()
        exact = scalars.is_exact(self.scalar)
        for (i, j), terms in self.table.items():
            if i > j:
                continue
            ci = a[i] * b[j] - a[j] * b[i]
            if exact and not ci:
                continue
            for k, c in terms.items():
                out[k] = out[k] + ci * c
        return out

    def ad_matrix(self, x: Sequence) -> linalg.Matrix:
        """Matrix of ad_x acting on the whole algebra (columns = images of basis)."""
        cols = [self.bracket(x, self.basis_vector(j)) for j in range(self.dim)]
        return linalg.transpose(cols)

    def layer_component(self, v: Sequence, j: int) -> Vector:
        out = [scalars.zero(self.scalar)] * self.dim
        for i in self.layer_indices(j):
            out[i] = v[i]
        return out

    def is_abelian(self) -> bool:
        return not self.table

    def with_scalar(self, tag: str) -> "GradedLieAlgebra":
        """Same structure constants over another field (used for float views)."""
        br = {(i, j): dict(t) for (i, j), t in self.table.items() if i < j}
        return GradedLieAlgebra(self.layer_dims, br, scalar=tag, name=self.name,
                                labels=self.labels, J=self.J, eps=self.eps,
                                meta=self.meta)

    def __repr__(self):
        return f"GradedLieAlgebra({self.name}, layers={self.layer_dims}, {self.scalar})"


# -- validation --------------------------------------------------------------


def validate_algebra(g: GradedLieAlgebra) -> ValidationReport:
    """Check antisymmetry, Jacobi, grading, and V1-generation; list every failure."""
    rep = ValidationReport()
    tag, eps = g.scalar, g.eps

    # antisymmetry (storage keeps both orderings, so this is a real check)
    for (i, j), terms in g.table.items():
        if i > j:
            continue
        opp = g.table.get((j, i), {})
        for k in set(terms) | set(opp):
            lhs = terms.get(k, scalars.zero(tag))
            rhs = opp.get(k, scalars.zero(tag))
            if not scalars.is_zero(tag, lhs + rhs, eps):
                rep.failures.append(AxiomFailure("antisymmetry", (i + 1, j + 1, k + 1)))

    # grading
    for (i, j), terms in g.table.items():
        tgt = g.layer_of[i] + g.layer_of[j]
        for k, c in terms.items():
            if g.layer_of[k] != tgt:
                rep.failures.append(AxiomFailure(
                    "grading", (i + 1, j + 1, k + 1),
                    f"[V{g.layer_of[i]}, V{g.layer_of[j]}] hit V{g.layer_of[k]}"))

    # Jacobi on basis triples
    for a, b, c in itertools.combinations(range(g.dim), 3):
        ea, eb, ec = (g.basis_vector(a), g.basis_vector(b), g.basis_vector(c))
        s = g.bracket(g.bracket(ea, eb), ec)
        s2 = g.bracket(g.bracket(eb, ec), ea)
        s3 = g.bracket(g.bracket(ec, ea), eb)
        total = [x + y + z for x, y, z in zip(s, s2, s3)]
        if any(not scalars.is_zero(tag, x, eps) for x in total):
            rep.failures.append(AxiomFailure("jacobi", (a + 1, b + 1, c + 1)))

    # generation: V_{j+1} = [V_1, V_j]
    for j in range(1, g.step):
        span = []
        for i1 in g.layer_indices(1):
            for i2 in g.layer_indices(j):
                w = g.bracket(g.basis_vector(i1), g.basis_vector(i2))
                span.append([w[k] for k in g.layer_indices(j + 1)])
        want = g.layer_dims[j]
        got = linalg.rank(tag, span, eps) if span else 0
        if got < want:
            rep.failures.append(AxiomFailure(
                "generation", (j + 1,),
                f"[V1, V{j}] has rank {got} < dim V{j + 1} = {want}"))
    return rep


def bracket(g: GradedLieAlgebra, a: Sequence, b: Sequence) -> Vector:
    return g.bracket(a, b)


def adjoint_rank(g: GradedLieAlgebra, x: Sequence, eps: Optional[float] = None) -> int:
    """rank ad_x = dim [x, g], exact over exact scalars."""
    m = g.ad_matrix(g.coerce_vector(x))
    return linalg.rank(g.scalar, m, g.eps if eps is None else eps)


# -- constructors -------------------------------------------------------------


def heisenberg(m: int) -> GradedLieAlgebra:
    """The m-th real Heisenberg algebra, [X_{2i-1}, X_{2i}] = -X_{2m+1}."""
    if m < 1:
        raise StructuralError("m must be >= 1")
    br = {}
    for i in range(m):
        br[(2 * i, 2 * i + 1)] = {2 * m: Fraction(-1)}
    g = GradedLieAlgebra((2 * m, 1), br, scalar="Q", name=f"heisenberg({m})",
                         meta={"family": "heisenberg", "m": m})
    return g


def abelian(n: int) -> GradedLieAlgebra:
    if n < 1:
        raise StructuralError("n must be >= 1")
    return GradedLieAlgebra((n,), {}, scalar="Q", name=f"abelian({n})",
                            meta={"family": "abelian"})


def free_step2(n: int) -> GradedLieAlgebra:
    """Free nilpotent algebra of step 2 on n generators."""
    if n < 2:
        raise StructuralError("n must be >= 2")
    pairs = list(itertools.combinations(range(n), 2))
    br = {}
    for idx, (i, j) in enumerate(pairs):
        br[(i, j)] = {n + idx: Fraction(1)}
    return GradedLieAlgebra((n, len(pairs)), br, scalar="Q",
                            name=f"free_step2({n})", meta={"family": "free_step2"})


def complex_heisenberg(m: int) -> GradedLieAlgebra:
    """The m-th complex Heisenberg algebra as a real algebra of dimension 4m+2.

    Basis order: X_1, Y_1=J X_1, ..., X_{2m}, Y_{2m} (first layer), then
    X_z, Y_z = J X_z (second layer).  Brackets extend [X_{2i-1}, X_{2i}] = -X_z
    C-bilinearly, so e.g. [Y_{2i-1}, X_{2i}] = -Y_z and [Y_{2i-1}, Y_{2i}] = X_z.
    """
    if m < 1:
        raise StructuralError("m must be >= 1")
    n1 = 4 * m
    xz, yz = n1, n1 + 1

    def X(i):  # real part of complex basis vector i (0-based)
        return 2 * i

    def Y(i):
        return 2 * i + 1

    br: Dict[Tuple[int, int], Dict[int, object]] = {}

    def add(i, j, k, c):
        br.setdefault((i, j), {})[k] = br.get((i, j), {}).get(k, Fraction(0)) + c

    for i in range(m):
        a, b = 2 * i, 2 * i + 1      # complex indices of the symplectic pair
        # [A_a, A_b] = -Z over C; expand with A in {X, Y}
        add(X(a), X(b), xz, Fraction(-1))
        add(Y(a), X(b), yz, Fraction(-1))
        add(X(a), Y(b), yz, Fraction(-1))
        add(Y(a), Y(b), xz, Fraction(1))
    labels = []
    for i in range(2 * m):
        labels += [f"X{i + 1}", f"Y{i + 1}"]
    labels += ["Xz", "Yz"]
    J = [[Fraction(0)] * (n1 + 2) for _ in range(n1 + 2)]
    for i in range(2 * m + 1):
        J[2 * i + 1][2 * i] = Fraction(1)
        J[2 * i][2 * i + 1] = Fraction(-1)
    return GradedLieAlgebra((n1, 2), br, scalar="Q", name=f"complex_heisenberg({m})",
                            labels=labels, J=J,
                            meta={"family": "complex_heisenberg", "m": m})


def direct_sum(parts: Sequence[GradedLieAlgebra], name: str = "") -> GradedLieAlgebra:
    """Graded direct sum; records per-factor index ranges in meta."""
    if not parts:
        raise StructuralError("direct_sum of nothing")
    tag = parts[0].scalar
    if any(p.scalar != tag for p in parts):
        raise StructuralError("mixed scalar fields in direct_sum")
    step = max(p.step for p in parts)
    dims = [sum(p.layer_dims[j] if j < p.step else 0 for p in parts)
            for j in range(step)]
    # offsets[f][j] = index of factor f's layer-j block in the sum
    offsets = []
    acc = [0] * step
    starts = []
    run = 0
    for j in range(step):
        starts.append(run)
        run += dims[j]
    for p in parts:
        offs = []
        for j in range(step):
            offs.append(starts[j] + acc[j])
            if j < p.step:
                acc[j] += p.layer_dims[j]
        offsets.append(offs)

    def embed(p_idx: int, i: int) -> int:
        p = parts[p_idx]
        lay = p.layer_of[i] - 1
        return offsets[p_idx][lay] + (i - p.layer_starts[lay])

    br: Dict[Tuple[int, int], Dict[int, object]] = {}
    for f, p in enumerate(parts):
        for (i, j), terms in p.table.items():
            if i > j:
                continue
            br[(embed(f, i), embed(f, j))] = {embed(f, k): c for k, c in terms.items()}
    total = sum(dims)
    J = None
    if all(p.J is not None for p in parts):
        J = [[Fraction(0)] * total for _ in range(total)]
        for f, p in enumerate(parts):
            for i in range(p.dim):
                for j in range(p.dim):
                    c = p.J[i][j]
                    if c:
                        J[embed(f, i)][embed(f, j)] = c
    factors = []
    for f, p in enumerate(parts):
        factors.append({
            "layers": [list(range(offsets[f][j], offsets[f][j] + (p.layer_dims[j] if j < p.step else 0)))
                       for j in range(step)],
            "name": p.name,
            "meta": dict(p.meta),
        })
    meta = {"family": "direct_sum", "factors": factors}
    return GradedLieAlgebra(dims, br, scalar=tag,
                            name=name or ("+".join(p.name for p in parts)),
                            J=J, meta=meta)


# -- complexification ---------------------------------------------------------


@dataclass
class Complexification:
    algebra: GradedLieAlgebra                      # over Qi (or c64)
    plus_basis: Optional[List[Vector]] = None      # basis of g^C_{+i} = {X - iJX}
    minus_basis: Optional[List[Vector]] = None     # basis of g^C_{-i}
    commute_certificate: Optional[bool] = None     # [g_i, g_{-i}] == 0


def complexify(g: GradedLieAlgebra) -> Complexification:
    """Extend scalars to C; with a complex structure J, also split into the
    +-i eigen-subalgebras {X -+ i J X} and certify that they commute."""
    tag = scalars.complex_tag(g.scalar)
    br = {(i, j): dict(t) for (i, j), t in g.table.items() if i < j}
    gc = GradedLieAlgebra(g.layer_dims, br, scalar=tag, name=g.name + "^C",
                          labels=g.labels, eps=g.eps,
                          meta=dict(g.meta, real_form=g.name))
    if g.J is None:
        return Complexification(gc)
    # J must be an algebra map commuting with brackets: [JX, Y] = J[X, Y]
    for i in range(g.dim):
        for j in range(i + 1, g.dim):
            ji = linalg.mat_vec(g.scalar, g.J, g.basis_vector(i))
            lhs = g.bracket(ji, g.basis_vector(j))
            rhs = linalg.mat_vec(g.scalar, g.J,
                                 g.bracket(g.basis_vector(i), g.basis_vector(j)))
            if any(not scalars.is_zero(g.scalar, a - b, g.eps) for a, b in zip(lhs, rhs)):
                raise StructuralError(f"J is not an algebra map (witness ({i + 1}, {j + 1}))")
    iu = GaussianRational(0, 1) if tag == "Qi" else 1j
    plus, minus = [], []
    for i in range(g.dim):
        e = g.basis_vector(i)
        je = linalg.mat_vec(g.scalar, g.J, e)
        plus.append([scalars.coerce(tag, a) - iu * scalars.coerce(tag, b)
                     for a, b in zip(e, je)])
        minus.append([scalars.coerce(tag, a) + iu * scalars.coerce(tag, b)
                      for a, b in zip(e, je)])
    # prune to half dimension (X and JX give the same lines)
    plus = linalg._independent_subset(tag, plus, g.eps)
    minus = linalg._independent_subset(tag, minus, g.eps)
    cert = True
    for u in plus:
        for v in minus:
            w = gc.bracket(u, v)
            if any(not scalars.is_zero(tag, x, g.eps) for x in w):
                cert = False
    return Complexification(gc, plus, minus, cert)


# -- central quotients and product quotients ----------------------------------


@dataclass
class CentralQuotient:
    algebra: GradedLieAlgebra        # the quotient g~/K
    parent: GradedLieAlgebra
    K_basis: List[Vector]            # vectors in the parent's V2 coordinates
    section: List[Vector]            # basis of K-perp inside V2 (parent coords)
    projection: linalg.Matrix        # dim V2(parent) -> dim V2(quotient)

    def project_vector(self, v: Sequence) -> Vector:
        """Project a parent algebra vector to quotient coordinates."""
        g, q = self.parent, self.algebra
        tagq = q.scalar
        n1 = sum(1 for i in range(g.dim) if g.layer_of[i] == 1)
        out = [scalars.zero(tagq)] * q.dim
        for i in range(n1):
            out[i] = scalars.coerce(tagq, v[i])
        v2 = [v[i] for i in g.layer_indices(2)]
        pv = linalg.mat_vec(g.scalar, self.projection, v2)
        for t, x in enumerate(pv):
            out[n1 + t] = scalars.coerce(tagq, x)
        return out


def central_quotient(g: GradedLieAlgebra, K_basis: Sequence[Sequence]) -> CentralQuotient:
    """Quotient of a step-2 algebra by a central subspace K of V2.

    The quotient's V2 is identified with the orthogonal complement of K inside
    V2 (orthogonal rational basis; normalization is deferred since it would
    leave the rationals).
    """
    if g.step != 2:
        raise StructuralError("central_quotient requires a step-2 algebra")
    tag = g.scalar
    n1, n2 = g.layer_dims
    K = []
    for v in K_basis:
        if len(v) == n2:
            w = [scalars.coerce(tag, x) for x in v]
        elif len(v) == g.dim:
            if any(not scalars.is_zero(tag, scalars.coerce(tag, v[i]), g.eps)
                   for i in range(n1)):
                raise StructuralError("K_basis vector not inside V2")
            w = [scalars.coerce(tag, v[n1 + t]) for t in range(n2)]
        else:
            raise StructuralError("K_basis vector has wrong length")
        K.append(w)
    K = linalg._independent_subset(tag, K, g.eps)
    k = len(K)
    if k >= n2 and n2 - k <= 0 and k > 0:
        raise StructuralError("K exhausts V2; quotient would not be stratified")

    # orthogonal complement of K in V2 (exact, unnormalized)
    comp = []
    for cand in linalg.complement_basis(tag, K, n2, g.eps):
        comp.append(cand)
    basis = linalg.gram_schmidt_orthogonal(tag, K + comp)
    section = basis[k:]
    # projection matrix: coordinates of orthogonal projection onto K-perp
    # solve v = K a + section b; rows of P give b
    cols = linalg.transpose(K + section) if K else linalg.transpose(section)
    proj_rows = []
    for i in range(n2):
        e = [scalars.zero(tag)] * n2
        e[i] = scalars.one(tag)
        sol = linalg.solve(tag, cols, e, g.eps)
        proj_rows.append(sol[k:])
    projection = linalg.transpose(proj_rows)  # (n2-k) x n2

    br: Dict[Tuple[int, int], Dict[int, object]] = {}
    for (i, j), terms in g.table.items():
        if i > j or g.layer_of[i] != 1 or g.layer_of[j] != 1:
            continue
        v2 = [scalars.zero(tag)] * n2
        for kk, c in terms.items():
            v2[kk - n1] = c
        pv = linalg.mat_vec(tag, projection, v2)
        entry = {}
        for t, c in enumerate(pv):
            if not scalars.is_zero(tag, c, g.eps):
                entry[n1 + t] = c
        if entry:
            br[(i, j)] = entry
    meta = {"family": "central_quotient", "quotient_of": g.name,
            "parent_meta": dict(g.meta)}
    quo = GradedLieAlgebra((n1, n2 - k) if k < n2 else (n1,), br, scalar=tag,
                           name=f"{g.name}/K", eps=g.eps, meta=meta)
    return CentralQuotient(quo, g, K, section, projection)


@dataclass
class ProductQuotientCertificate:
    cond_a: bool
    cond_b: bool
    witnesses: dict

    @property
    def valid(self) -> bool:
        return self.cond_a and self.cond_b

    def to_json(self) -> dict:
        return {"cond_a": self.cond_a, "cond_b": self.cond_b,
                "witnesses": {k: str(v) for k, v in self.witnesses.items()}}


@dataclass
class ProductQuotient:
    """A quotient of a sum of identical Heisenberg factors by K in V2~."""

    n: int
    field: str                     # "R" or "C"
    m: int
    parent: GradedLieAlgebra       # the product, with factor metadata
    K_basis: List[Vector]          # real coordinates in V2~ (dim n resp. 2n)
    quotient: CentralQuotient
    certificate: ProductQuotientCertificate

    @property
    def algebra(self) -> GradedLieAlgebra:
        return self.quotient.algebra

    def factor_first_layer(self, i: int) -> List[int]:
        return list(self.parent.meta["factors"][i]["layers"][0])

    def factor_second_layer(self, i: int) -> List[int]:
        return list(self.parent.meta["factors"][i]["layers"][1])


def _factor_info(g: GradedLieAlgebra):
    """(field, m, n) if g is a direct sum of identical Heisenberg factors."""
    meta = g.meta
    if meta.get("family") == "heisenberg":
        return ("R", meta["m"], 1)
    if meta.get("family") == "complex_heisenberg":
        return ("C", meta["m"], 1)
    if meta.get("family") != "direct_sum":
        return None
    fams = [f["meta"].get("family") for f in meta["factors"]]
    ms = [f["meta"].get("m") for f in meta["factors"]]
    if len(set(fams)) != 1 or len(set(ms)) != 1:
        return None
    if fams[0] == "heisenberg":
        return ("R", ms[0], len(fams))
    if fams[0] == "complex_heisenberg":
        return ("C", ms[0], len(fams))
    return None


def check_product_quotient(g_tilde: GradedLieAlgebra,
                           K_basis: Sequence[Sequence]) -> ProductQuotientCertificate:
    """Conditions (a) K meet g~_k = 0 and (b) distinct second layers, with witnesses."""
    info = _factor_info(g_tilde)
    if info is None:
        raise StructuralError("parent is not a sum of identical Heisenberg factors")
    fieldF, m, n = info
    tag = g_tilde.scalar
    n1, n2 = g_tilde.layer_dims[0], g_tilde.layer_dims[1]
    K = [[scalars.coerce(tag, x) for x in v] for v in K_basis]
    witnesses = {}

    factors = (g_tilde.meta.get("factors")
               or [{"layers": [list(g_tilde.layer_indices(1)), list(g_tilde.layer_indices(2))]}])
    sec = [[i - n1 for i in f["layers"][1]] for f in factors]  # V2-relative indices

    cond_a = True
    for k in range(n):
        fac = []
        for i in sec[k]:
            e = [scalars.zero(tag)] * n2
            e[i] = scalars.one(tag)
            fac.append(e)
        inter = linalg.intersect_spans(tag, K, fac, n2, g_tilde.eps)
        if inter:
            cond_a = False
            witnesses["cond_a"] = (k + 1, inter[0])
            break

    cond_b = True
    if fieldF == "R":
        for j in range(n):
            for k in range(j + 1, n):
                bj = K + [_unit(tag, n2, i) for i in sec[j]]
                bk = K + [_unit(tag, n2, i) for i in sec[k]]
                if linalg.same_span(tag, bj, bk, g_tilde.eps):
                    cond_b = False
                    witnesses["cond_b"] = (j + 1, k + 1)
                    break
            if not cond_b:
                break
    else:
        # complexify V2~ and compare the pairs pi((V2_j^C)_{+-i})
        ctag = scalars.complex_tag(tag)
        iu = GaussianRational(0, 1) if ctag == "Qi" else 1j
        Kc = [[scalars.coerce(ctag, x) for x in v] for v in K]
        Jmat = g_tilde.J
        pairs = []
        for j in range(n):
            plus, minus = [], []
            for i in sec[j]:
                e = g_tilde.basis_vector(n1 + i)
                je = linalg.mat_vec(tag, Jmat, e)
                zp = [scalars.coerce(ctag, e[n1 + t]) - iu * scalars.coerce(ctag, je[n1 + t])
                      for t in range(n2)]
                zm = [scalars.coerce(ctag, e[n1 + t]) + iu * scalars.coerce(ctag, je[n1 + t])
                      for t in range(n2)]
                plus.append(zp)
                minus.append(zm)
            plus = linalg._independent_subset(ctag, plus, g_tilde.eps)
            minus = linalg._independent_subset(ctag, minus, g_tilde.eps)
            pairs.append((plus, minus))

        def proj_equal(a, b):
            return linalg.same_span(ctag, Kc + a, Kc + b, g_tilde.eps)

        for j in range(n):
            if proj_equal(pairs[j][0], pairs[j][1]):
                cond_b = False
                witnesses["cond_b"] = (j + 1, j + 1)
                break
        if cond_b:
            for j in range(n):
                for k in range(j + 1, n):
                    same = (proj_equal(pairs[j][0], pairs[k][0])
                            and proj_equal(pairs[j][1], pairs[k][1]))
                    swapped = (proj_equal(pairs[j][0], pairs[k][1])
                               and proj_equal(pairs[j][1], pairs[k][0]))
                    if same or swapped:
                        cond_b = False
                        witnesses["cond_b"] = (j + 1, k + 1)
                        break
                if not cond_b:
                    break
    return ProductQuotientCertificate(cond_a, cond_b, witnesses)


def _unit(tag, n, i):
    e = [scalars.zero(tag)] * n
    e[i] = scalars.one(tag)
    return e


def product_quotient(field: str, m: int, n: int,
                     K_basis: Sequence[Sequence]) -> ProductQuotient:
    """Build g~ = n identical Heisenberg factors over the field, quotient by K."""
    if field not in ("R", "C"):
        raise StructuralError("field must be 'R' or 'C'")
    factor = heisenberg(m) if field == "R" else complex_heisenberg(m)
    parts = [factor] * n
    g_tilde = direct_sum(parts, name=f"sum_{n}x{factor.name}")
    cert = check_product_quotient(g_tilde, K_basis)
    quo = central_quotient(g_tilde, K_basis)
    return ProductQuotient(n=n, field=field, m=m, parent=g_tilde,
                           K_basis=quo.K_basis, quotient=quo, certificate=cert)


def diagonal_K(n: int, d2: int = 1) -> List[List[Fraction]]:
    """Basis of the diagonal subspace of V2~ = (R^{d2})^n (d2=2 for complex)."""
    out = []
    for t in range(d2):
        v = [Fraction(0)] * (n * d2)
        for i in range(n):
            v[i * d2 + t] = Fraction(1)
        out.append(v)
    return out


def random_rational_vector(dim: int, rng: random.Random, num=2, den=2) -> List[Fraction]:
    return [Fraction(rng.randint(-num, num), rng.randint(1, den)) for _ in range(dim)]
