"""Graded homomorphisms, automorphism structure, and Pansu pullback at a point.

A GradedHom stores one matrix per layer (block-diagonal overall).  Validity is
checked on V1 x V1 basis brackets plus layer consistency, which suffices since
V1 generates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import forms, linalg, scalars
from .algebra import GradedLieAlgebra, ProductQuotient, StructuralError


class HomError(ValueError):
    pass


@dataclass(frozen=True)
class IncompatibilityWitness:
    """A basis pair (i, j) whose bracket image admits no consistent extension."""
    pair: Tuple[int, int]
    detail: str = ""


class GradedHom:
    def __init__(self, domain: GradedLieAlgebra, codomain: GradedLieAlgebra,
                 blocks: Sequence[Sequence[Sequence]]):
        if len(blocks) != domain.step:
            raise HomError("one block per layer required")
        if domain.step != codomain.step and any(
                blocks[j] for j in range(codomain.step, domain.step)):
            raise HomError("layer count mismatch")
        self.domain = domain
        self.codomain = codomain
        tag = codomain.scalar
        self.blocks = []
        for j, blk in enumerate(blocks):
            rows = codomain.layer_dims[j] if j < codomain.step else 0
            cols = domain.layer_dims[j]
            blk = [[scalars.coerce(tag, x) for x in row] for row in blk]
            if len(blk) != rows or any(len(r) != cols for r in blk):
                raise HomError(f"layer {j + 1} block must be {rows} x {cols}")
            self.blocks.append(blk)
        self._full = None

    @property
    def scalar(self):
        return self.codomain.scalar

    def full_matrix(self) -> linalg.Matrix:
        if self._full is None:
            dom, cod = self.domain, self.codomain
            m = linalg.zeros(cod.scalar, cod.dim, dom.dim)
            for j, blk in enumerate(self.blocks):
                roff = cod.layer_starts[j]
                coff = dom.layer_starts[j]
                for r, row in enumerate(blk):
                    for c, x in enumerate(row):
                        m[roff + r][coff + c] = x
            self._full = m
        return self._full

    def apply(self, v: Sequence) -> list:
        return linalg.mat_vec(self.scalar, self.full_matrix(), list(v))

    def compose(self, other: "GradedHom") -> "GradedHom":
        """self after other: x -> self(other(x))."""
        if other.codomain.dim != self.domain.dim:
            raise HomError("composition dimension mismatch")
        blocks = []
        for j in range(other.domain.step):
            a = self.blocks[j] if j < len(self.blocks) else []
            b = other.blocks[j]
            blocks.append(linalg.mat_mul(self.scalar, a, b) if a and b else [])
        return GradedHom(other.domain, self.codomain, blocks)

    def det(self):
        if self.domain.dim != self.codomain.dim:
            raise HomError("determinant of a non-square hom")
        d = scalars.one(self.scalar)
        for blk in self.blocks:
            if blk:
                d = d * linalg.det(self.scalar, blk)
        return d

    def is_automorphism(self, eps: Optional[float] = None) -> bool:
        e = self.codomain.eps if eps is None else eps
        if self.domain.dim != self.codomain.dim:
            return False
        return not scalars.is_zero(self.scalar, self.det(), e) and validate_hom(self) is None

    def __repr__(self):
        return f"GradedHom({self.domain.name} -> {self.codomain.name})"


def identity_hom(g: GradedLieAlgebra) -> GradedHom:
    return GradedHom(g, g, [linalg.identity(g.scalar, d) for d in g.layer_dims])


def dilation_hom(g: GradedLieAlgebra, r) -> GradedHom:
    blocks = []
    for j, d in enumerate(g.layer_dims):
        rj = scalars.coerce(g.scalar, r) ** (j + 1) if scalars.is_exact(g.scalar) \
            else float(r) ** (j + 1)
        m = linalg.identity(g.scalar, d)
        blocks.append([[x * rj for x in row] for row in m])
    return GradedHom(g, g, blocks)


def validate_hom(phi: GradedHom, eps: Optional[float] = None):
    """None if phi respects brackets on V1 x V1; else a witness pair (1-based)."""
    dom, cod = phi.domain, phi.codomain
    e = cod.eps if eps is None else eps
    tag = cod.scalar
    for i in dom.layer_indices(1):
        for j in dom.layer_indices(1):
            if i >= j:
                continue
            lhs = phi.apply(dom.bracket(dom.basis_vector(i), dom.basis_vector(j)))
            rhs = cod.bracket(phi.apply(dom.basis_vector(i)),
                              phi.apply(dom.basis_vector(j)))
            if any(not scalars.is_zero(tag, a - b, e) for a, b in zip(lhs, rhs)):
                return IncompatibilityWitness((i + 1, j + 1), "bracket not respected")
    return None


def extend_first_layer(domain: GradedLieAlgebra, codomain: GradedLieAlgebra,
                       A: Sequence[Sequence], eps: Optional[float] = None):
    """Extend a first-layer map to a graded homomorphism, or return a witness.

    Solves layer by layer: the layer-(j+1) block B must satisfy
    B L(X ^ Y) = L'(A X ^ B_j Y) for X in V1, Y in V_j; inconsistency yields
    the offending pair.
    """
    tag = codomain.scalar
    e = codomain.eps if eps is None else eps
    A = [[scalars.coerce(tag, x) for x in row] for row in A]
    if len(A) != codomain.layer_dims[0] or any(len(r) != domain.layer_dims[0] for r in A):
        raise HomError("first-layer block has wrong shape")
    blocks = [A]
    prev = {1: A}
    for j in range(1, domain.step):
        if j >= codomain.step:
            # images must vanish; check brackets land at zero
            blocks.append([])
            prev[j + 1] = []
            continue
        rows_out = codomain.layer_dims[j]
        cols_out = domain.layer_dims[j]
        # unknown B: rows_out x cols_out; equations from pairs (x in V1, y in V_j)
        eqs: List[list] = []
        rhs: List[list] = []
        pair_meta = []
        for i1 in domain.layer_indices(1):
            for i2 in domain.layer_indices(j):
                w = domain.bracket(domain.basis_vector(i1), domain.basis_vector(i2))
                wloc = [w[k] for k in domain.layer_indices(j + 1)]
                # image side: [A e_{i1}, B_j e_{i2}]'
                img1 = _embed_layer(codomain, 1, _col(A, i1 - domain.layer_starts[0]))
                bj = blocks[j - 1]
                img2 = _embed_layer(codomain, j, _col(bj, i2 - domain.layer_starts[j - 1])) \
                    if bj else codomain.zero_vector()
                img = codomain.bracket(img1, img2)
                imgloc = [img[k] for k in codomain.layer_indices(j + 1)]
                eqs.append(wloc)
                rhs.append(imgloc)
                pair_meta.append((i1 + 1, i2 + 1))
        # solve B wloc = imgloc for all pairs: B is determined column-space-wise
        # build stacked system over entries of B
        nunk = rows_out * cols_out
        sys_rows = []
        sys_rhs = []
        for wloc, imgloc in zip(eqs, rhs):
            for r in range(rows_out):
                row = [scalars.zero(tag)] * nunk
                for c in range(cols_out):
                    row[r * cols_out + c] = scalars.coerce(tag, wloc[c])
                sys_rows.append(row)
                sys_rhs.append(imgloc[r])
        sol = linalg.solve(tag, sys_rows, sys_rhs, e)
        if sol is None:
            # find a concrete witness pair
            wit = _find_witness(domain, codomain, blocks, j, e)
            return IncompatibilityWitness(wit, f"no consistent layer-{j + 1} block")
        B = [[sol[r * cols_out + c] for c in range(cols_out)] for r in range(rows_out)]
        # consistency re-check on every pair (solve() only finds one solution)
        for (wloc, imgloc, meta) in zip(eqs, rhs, pair_meta):
            got = linalg.mat_vec(tag, B, [scalars.coerce(tag, x) for x in wloc])
            if any(not scalars.is_zero(tag, a - b, e) for a, b in zip(got, imgloc)):
                return IncompatibilityWitness(meta, f"inconsistent image in layer {j + 1}")
        blocks.append(B)
    phi = GradedHom(domain, codomain, blocks)
    wit = validate_hom(phi, e)
    if wit is not None:
        return wit
    return phi


def _col(matrix, j):
    return [row[j] for row in matrix]


def _embed_layer(g: GradedLieAlgebra, layer: int, local: Sequence) -> list:
    v = g.zero_vector()
    for t, i in enumerate(g.layer_indices(layer)):
        v[i] = scalars.coerce(g.scalar, local[t])
    return v


def _find_witness(domain, codomain, blocks, j, eps):
    A = blocks[0]
    for i1 in domain.layer_indices(1):
        for i2 in domain.layer_indices(1):
            if i1 >= i2:
                continue
            lhs = domain.bracket(domain.basis_vector(i1), domain.basis_vector(i2))
            if all(scalars.is_zero(domain.scalar, x, eps) for x in lhs):
                img1 = _embed_layer(codomain, 1, _col(A, i1))
                img2 = _embed_layer(codomain, 1, _col(A, i2))
                img = codomain.bracket(img1, img2)
                if any(not scalars.is_zero(codomain.scalar, x, eps) for x in img):
                    return (i1 + 1, i2 + 1)
    return (1, 2)


# -- product-quotient machinery -------------------------------------------------


def lift_to_stabilizer(pq: ProductQuotient, phi: GradedHom) -> GradedHom:
    """The unique lift of an automorphism of g~/K to Aut(g~) preserving K."""
    if phi.domain is not pq.algebra or phi.codomain is not pq.algebra:
        raise HomError("phi must be an endomorphism of the quotient algebra")
    if not phi.is_automorphism():
        raise HomError("phi is not an automorphism of the quotient")
    par = pq.parent
    A = phi.blocks[0]  # quotient V1 == parent V1
    lifted = extend_first_layer(par, par, A)
    if isinstance(lifted, IncompatibilityWitness):
        raise HomError(f"first layer does not extend over the product: {lifted}")
    # check K preservation exactly
    tag = par.scalar
    n1 = par.layer_dims[0]
    B = lifted.blocks[1]
    kimgs = [linalg.mat_vec(tag, B, kv) for kv in pq.K_basis]
    for v in kimgs:
        if not linalg.span_contains(tag, pq.K_basis, v, par.eps):
            raise HomError("lift does not preserve K")
    # projection compatibility: pi o lift == phi o pi on V2
    proj = pq.quotient.projection
    lhs = linalg.mat_mul(tag, proj, B)
    rhs = linalg.mat_mul(tag, phi.blocks[1], proj)
    for r1, r2 in zip(lhs, rhs):
        for a, b in zip(r1, r2):
            if not scalars.is_zero(tag, a - b, par.eps):
                raise HomError("lift does not project back to phi")
    return lifted


@dataclass
class MonomialAut:
    """Second-layer action lam * S * P of a lifted automorphism on the Y~ basis."""
    lam: object                      # positive scalar
    signs: List[int]                 # diagonal of S
    perm: List[int]                  # sigma as a list: j -> sigma(j), 0-based
    hom: Optional[GradedHom] = None  # underlying map on g~, when available

    def matrix(self, tag: str) -> linalg.Matrix:
        n = len(self.perm)
        m = linalg.zeros(tag, n, n)
        for j in range(n):
            i = self.perm[j]
            m[i][j] = scalars.coerce(tag, self.lam) * scalars.coerce(tag, self.signs[i])
        return m


def lambda_SP_decompose(pq: ProductQuotient, phi_tilde: GradedHom) -> MonomialAut:
    """Split the second-layer action into lam S P; errors when not monomial.

    Requires the quotient to be conformally normalized (standard scalar product),
    i.e. all nonzero entries must share one modulus.
    """
    par = pq.parent
    tag = par.scalar
    if phi_tilde.domain is not par or phi_tilde.codomain is not par:
        raise HomError("expected an endomorphism of the product algebra")
    B = phi_tilde.blocks[1]
    n2 = par.layer_dims[1]
    d2 = n2 // pq.n
    # per-factor blocks must be scalar multiples of isometries of the factor line/plane
    perm = [-1] * pq.n
    signs = [0] * pq.n
    lam = None
    for j in range(pq.n):
        jcols = [pq.factor_second_layer(j)[t] - par.layer_starts[1] for t in range(d2)]
        target = None
        for i in range(pq.n):
            irows = [pq.factor_second_layer(i)[t] - par.layer_starts[1] for t in range(d2)]
            sub = [[B[r][c] for c in jcols] for r in irows]
            if any(not scalars.is_zero(tag, x, par.eps) for row in sub for x in row):
                if target is not None:
                    raise HomError("second-layer action is not monomial "
                                   "(apply conformal normalization first)")
                target = i
                block = sub
        if target is None:
            raise HomError("second-layer block has a zero column group")
        perm[j] = target
        if d2 == 1:
            entry = block[0][0]
            mag = abs(entry) if scalars.is_exact(tag) else abs(entry)
            sgn = 1 if scalars.to_float(entry) > 0 else -1
        else:
            raise HomError("lambda-S-P decomposition implemented for real factors only")
        if lam is None:
            lam = mag
        elif not scalars.is_zero(tag, lam - mag, par.eps):
            raise HomError("second-layer moduli differ "
                           "(apply conformal normalization first)")
        signs[target] = sgn
    return MonomialAut(lam, signs, perm, phi_tilde)


def classify_complex_linearity(phi: GradedHom, eps: Optional[float] = None) -> Tuple[str, int]:
    """('C-linear', +1) iff phi J = J phi, ('C-antilinear', -1) iff phi J = -J phi.

    The sign is the sign of det of the second-layer block, which the dichotomy
    for graded automorphisms of complex Heisenberg algebras forces to match.
    """
    g = phi.domain
    if g.J is None:
        raise HomError("domain carries no complex structure")
    e = g.eps if eps is None else eps
    tag = phi.scalar
    M = phi.full_matrix()
    JM = linalg.mat_mul(tag, [[scalars.coerce(tag, x) for x in row] for row in g.J], M)
    MJ = linalg.mat_mul(tag, M, [[scalars.coerce(tag, x) for x in row] for row in g.J])
    lin = all(scalars.is_zero(tag, a - b, e) for r1, r2 in zip(JM, MJ) for a, b in zip(r1, r2))
    antilin = all(scalars.is_zero(tag, a + b, e) for r1, r2 in zip(JM, MJ) for a, b in zip(r1, r2))
    if lin == antilin:
        raise HomError("map is neither Complex-linear nor antilinear "
                       "(not a graded automorphism of a complex Heisenberg algebra?)")
    d2 = linalg.det(tag, phi.blocks[1])
    sgn = 1 if scalars.to_float(d2) > 0 else -1
    if lin and sgn != 1:
        raise HomError("C-linear map with nonpositive V2 determinant")
    if antilin and sgn != -1:
        raise HomError("C-antilinear map with nonnegative V2 determinant")
    return ("C-linear", sgn) if lin else ("C-antilinear", sgn)


def bracket_map_and_kernel(g: GradedLieAlgebra, factor) -> Tuple[linalg.Matrix, List[forms.KVector]]:
    """Matrix of L(X ^ Y) = [X, Y] on Lambda_2 V1, and a basis of
    ker L intersected with Lambda_2 of the factor's first layer.

    `factor` is a 1-based factor index (for algebras with factor metadata) or an
    explicit list of 0-based first-layer indices.
    """
    if g.step != 2:
        raise StructuralError("bracket map analysis requires step 2")
    tag = g.scalar
    n1, n2 = g.layer_dims
    pairs = list(itertools.combinations(range(n1), 2))
    L = linalg.zeros(tag, n2, len(pairs))
    for c, (i, j) in enumerate(pairs):
        w = g.bracket(g.basis_vector(i), g.basis_vector(j))
        for t in range(n2):
            L[t][c] = w[n1 + t]
    if isinstance(factor, int):
        facs = g.meta.get("factors")
        if facs is None:
            idxs = list(g.layer_indices(1))
        else:
            idxs = list(facs[factor - 1]["layers"][0])
    else:
        idxs = list(factor)
    sub_cols = [c for c, (i, j) in enumerate(pairs) if i in idxs and j in idxs]
    sub = [[L[t][c] for c in sub_cols] for t in range(n2)]
    ker = linalg.kernel_basis(tag, sub, len(sub_cols), g.eps)
    out = []
    for kv in ker:
        terms = {}
        for t, c in enumerate(kv):
            if not scalars.is_zero(tag, c, g.eps):
                terms[pairs[sub_cols[t]]] = c
        out.append(forms.KVector(g, 2, terms))
    return L, out


def pansu_pullback(phi: GradedHom, a: forms.KForm,
                   coefficients: Optional[Dict[tuple, object]] = None) -> forms.KForm:
    """Pointwise Pansu pullback sum_I a_I(f(x)) phi^* theta_I for one point.

    `coefficients` maps each monomial of `a` (1-based index tuples) to the value
    of its coefficient function at the point; omitted means left-invariant.
    """
    if coefficients is None:
        return forms.pullback_form(phi, a)
    tag = phi.domain.scalar
    acc = forms.KForm(phi.domain, a.degree, {})
    for idx, c in a.terms.items():
        key = tuple(i + 1 for i in idx)
        val = coefficients.get(key, scalars.one(tag))
        mono = forms.KForm(phi.codomain, a.degree, {idx: c})
        acc = acc + forms.pullback_form(phi, mono).scale(val)
    return acc
