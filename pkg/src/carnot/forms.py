"""Weight-graded exterior algebra over a graded Lie algebra.

KForm / KVector are sparse alternating tensors keyed by strictly increasing
index tuples over the (dual) graded basis.  The differential is the
Chevalley-Eilenberg operator on left-invariant forms; contraction inserts in
the leading slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import linalg, scalars
from .algebra import GradedLieAlgebra, StructuralError

Index = Tuple[int, ...]


class WeightUndefinedError(ValueError):
    """The zero form has no well-defined weight."""


class FormError(ValueError):
    pass


def _merge_sorted(a: Index, b: Index) -> Optional[Tuple[Index, int]]:
    """Merge two strictly increasing tuples; None if they collide.

    Returns (merged, sign) where sign counts transpositions mod 2.
    """
    out = []
    sign = 1
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            return None
        if a[i] < b[j]:
            out.append(a[i])
            i += 1
        else:
            # b[j] jumps over the remaining len(a)-i entries of a
            if (len(a) - i) % 2:
                sign = -sign
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out), sign


class _Alternating:
    """Shared implementation of sparse alternating tensors."""

    covariant: bool = True  # forms; vectors override

    def __init__(self, algebra: GradedLieAlgebra, degree: int,
                 terms: Optional[Dict[Index, object]] = None, _clean: bool = False):
        self.algebra = algebra
        self.degree = int(degree)
        if terms is None:
            terms = {}
        if not _clean:
            tag, eps = algebra.scalar, algebra.eps
            clean: Dict[Index, object] = {}
            for idx, c in terms.items():
                idx = tuple(idx)
                if len(idx) != self.degree:
                    raise FormError(f"monomial {idx} has degree {len(idx)}, expected {self.degree}")
                if any(not (0 <= i < algebra.dim) for i in idx):
                    raise FormError(f"index out of range in {idx}")
                if list(idx) != sorted(set(idx)):
                    raise FormError(f"monomial indices must be strictly increasing: {idx}")
                c = scalars.coerce(tag, c)
                if not scalars.is_zero(tag, c, eps):
                    clean[idx] = c
            terms = clean
        self.terms: Dict[Index, object] = terms

    # -- ring-ish operations --

    def _reduce(self, terms: Dict[Index, object]) -> Dict[Index, object]:
        tag, eps = self.algebra.scalar, self.algebra.eps
        return {i: c for i, c in terms.items() if not scalars.is_zero(tag, c, eps)}

    def _new(self, degree: int, terms: Dict[Index, object]):
        return type(self)(self.algebra, degree, self._reduce(terms), _clean=True)

    def __add__(self, other):
        self._check(other)
        if self.degree != other.degree:
            raise FormError("degree mismatch in addition")
        out = dict(self.terms)
        for idx, c in other.terms.items():
            out[idx] = out.get(idx, scalars.zero(self.algebra.scalar)) + c
        return self._new(self.degree, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self._new(self.degree, {i: -c for i, c in self.terms.items()})

    def scale(self, c):
        c = scalars.coerce(self.algebra.scalar, c)
        return self._new(self.degree, {i: c * v for i, v in self.terms.items()})

    __rmul__ = scale
    __mul__ = scale

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, _Alternating):
            return NotImplemented
        if self.covariant != other.covariant or self.degree != other.degree:
            return False
        tag, eps = self.algebra.scalar, self.algebra.eps
        keys = set(self.terms) | set(other.terms)
        z = scalars.zero(tag)
        return all(scalars.is_zero(tag, self.terms.get(k, z) - other.terms.get(k, z), eps)
                   for k in keys)

    def __hash__(self):
        return hash((self.covariant, self.degree, frozenset(self.terms.items())))

    def _check(self, other):
        if other.algebra is not self.algebra and other.algebra.name != self.algebra.name:
            raise FormError("mixed algebras")
        if self.covariant != other.covariant:
            raise FormError("cannot mix forms and vectors")

    # -- weights --

    def monomial_weight(self, idx: Index) -> int:
        w = sum(self.algebra.layer_of[i] for i in idx)
        return -w if self.covariant else w

    def weight_decompose(self) -> List[Tuple[int, "_Alternating"]]:
        buckets: Dict[int, Dict[Index, object]] = {}
        for idx, c in self.terms.items():
            buckets.setdefault(self.monomial_weight(idx), {})[idx] = c
        return [(w, self._new(self.degree, t)) for w, t in sorted(buckets.items())]

    def weight(self) -> int:
        if not self.terms:
            raise WeightUndefinedError("the zero form/vector has no well-defined weight")
        return max(self.monomial_weight(i) for i in self.terms)

    def conjugate(self):
        tag = self.algebra.scalar
        return self._new(self.degree, {i: scalars.conj(tag, c) for i, c in self.terms.items()})

    def __repr__(self):
        kind = "Form" if self.covariant else "Vector"
        if not self.terms:
            return f"K{kind}(0, deg={self.degree})"
        sym = "theta" if self.covariant else "X"
        parts = []
        for idx in sorted(self.terms):
            mono = "^".join(f"{sym}{i + 1}" for i in idx) or "1"
            parts.append(f"({self.terms[idx]!r})*{mono}")
        return f"K{kind}[" + " + ".join(parts) + "]"


class KForm(_Alternating):
    covariant = True

    def __call__(self, *vectors):
        """Evaluate on degree-many KVectors of degree 1 (or one KVector of full degree)."""
        if len(vectors) == 1 and isinstance(vectors[0], KVector) \
                and vectors[0].degree == self.degree:
            X = vectors[0]
        else:
            X = None
            for v in vectors:
                v = v if isinstance(v, KVector) else KVector.from_coords(self.algebra, v)
                X = v if X is None else wedge(X, v)
        if X.degree != self.degree:
            raise FormError("evaluation degree mismatch")
        tag = self.algebra.scalar
        acc = scalars.zero(tag)
        for idx, c in X.terms.items():
            acc = acc + self.terms.get(idx, scalars.zero(tag)) * c
        return acc


class KVector(_Alternating):
    covariant = False

    @classmethod
    def from_coords(cls, algebra: GradedLieAlgebra, coords: Sequence) -> "KVector":
        terms = {}
        for i, c in enumerate(coords):
            terms[(i,)] = c
        return cls(algebra, 1, terms)

    def to_coords(self) -> list:
        if self.degree != 1:
            raise FormError("only degree-1 vectors have coordinates")
        out = [scalars.zero(self.algebra.scalar)] * self.algebra.dim
        for (i,), c in self.terms.items():
            out[i] = c
        return out


def theta(algebra: GradedLieAlgebra, *indices: int) -> KForm:
    """theta_I for 1-based indices."""
    idx = tuple(i - 1 for i in indices)
    if list(idx) != sorted(set(idx)):
        raise FormError("theta indices must be strictly increasing and distinct")
    return KForm(algebra, len(idx), {idx: scalars.one(algebra.scalar)})


def x_vector(algebra: GradedLieAlgebra, *indices: int) -> KVector:
    idx = tuple(i - 1 for i in indices)
    return KVector(algebra, len(idx), {idx: scalars.one(algebra.scalar)})


def wedge(a: _Alternating, b: _Alternating) -> _Alternating:
    """Graded-commutative product of two forms (or two multivectors)."""
    a._check(b)
    out: Dict[Index, object] = {}
    tag, eps = a.algebra.scalar, a.algebra.eps
    for ia, ca in a.terms.items():
        for ib, cb in b.terms.items():
            merged = _merge_sorted(ia, ib)
            if merged is None:
                continue
            idx, sign = merged
            c = ca * cb
            if sign < 0:
                c = -c
            out[idx] = out.get(idx, scalars.zero(tag)) + c
    cls = type(a)
    return cls(a.algebra, a.degree + b.degree,
               {i: c for i, c in out.items() if not scalars.is_zero(tag, c, eps)},
               _clean=True)


def interior_product(X: KVector, a: KForm) -> KForm:
    """(i_X a)(Z) = a(X wedge Z); inserts X in the leading slots."""
    if not isinstance(X, KVector) or not isinstance(a, KForm):
        raise FormError("interior_product takes (KVector, KForm)")
    if X.degree > a.degree:
        raise FormError(f"cannot contract a degree-{a.degree} form by a degree-{X.degree} vector")
    tag, eps = a.algebra.scalar, a.algebra.eps
    out: Dict[Index, object] = {}
    for jx, cx in X.terms.items():
        for ia, ca in a.terms.items():
            # contract indices of jx one by one, leading slot first
            idx = list(ia)
            sign = 1
            ok = True
            for j in jx:
                try:
                    pos = idx.index(j)
                except ValueError:
                    ok = False
                    break
                if pos % 2:
                    sign = -sign
                idx.pop(pos)
            if not ok:
                continue
            c = cx * ca
            if sign < 0:
                c = -c
            key = tuple(idx)
            out[key] = out.get(key, scalars.zero(tag)) + c
    return KForm(a.algebra, a.degree - X.degree,
                 {i: c for i, c in out.items() if not scalars.is_zero(tag, c, eps)},
                 _clean=True)


def _dtheta_table(g: GradedLieAlgebra) -> List[KForm]:
    """d(theta_k) = -sum_{i<j} c_ij^k theta_i ^ theta_j, cached on the algebra."""
    if g._dtheta_cache is None:
        tag = g.scalar
        table = []
        for k in range(g.dim):
            terms: Dict[Index, object] = {}
            for (i, j), tt in g.table.items():
                if i >= j:
                    continue
                c = tt.get(k)
                if c is not None:
                    terms[(i, j)] = -c
            table.append(KForm(g, 2, terms, _clean=True))
        g._dtheta_cache = table
    return g._dtheta_cache


def ce_differential(a: KForm) -> KForm:
    """Chevalley-Eilenberg differential of a left-invariant form; d o d = 0."""
    g = a.algebra
    dth = _dtheta_table(g)
    tag, eps = g.scalar, g.eps
    acc: Dict[Index, object] = {}
    for idx, c in a.terms.items():
        for pos, i in enumerate(idx):
            di = dth[i]
            if not di.terms:
                continue
            rest = idx[:pos] + idx[pos + 1:]
            for didx, dc in di.terms.items():
                merged = _merge_sorted(didx, rest)
                if merged is None:
                    continue
                key, sign = merged
                if pos % 2:
                    sign = -sign
                v = c * dc
                if sign < 0:
                    v = -v
                acc[key] = acc.get(key, scalars.zero(tag)) + v
    return KForm(g, a.degree + 1,
                 {i: c for i, c in acc.items() if not scalars.is_zero(tag, c, eps)},
                 _clean=True)


def closed_forms(g: GradedLieAlgebra, degree: int) -> List[KForm]:
    """Exact basis of the closed left-invariant forms of the given degree."""
    import itertools as it

    monos = list(it.combinations(range(g.dim), degree))
    out_monos = list(it.combinations(range(g.dim), degree + 1))
    col_of = {m: i for i, m in enumerate(monos)}
    row_of = {m: i for i, m in enumerate(out_monos)}
    tag = g.scalar
    mat = linalg.zeros(tag, len(out_monos), len(monos))
    for m in monos:
        dm = ce_differential(KForm(g, degree, {m: scalars.one(tag)}))
        for idx, c in dm.terms.items():
            mat[row_of[idx]][col_of[m]] = c
    ker = linalg.kernel_basis(tag, mat, len(monos), g.eps)
    return [KForm(g, degree, {monos[i]: c for i, c in enumerate(v)
                              if not scalars.is_zero(tag, c, g.eps)})
            for v in ker]


def weight_decompose(a: _Alternating):
    return a.weight_decompose()


def weight_of(a: _Alternating) -> int:
    return a.weight()


def _pullback_one_forms(phi_matrix: linalg.Matrix, codomain_dim: int,
                        domain: GradedLieAlgebra) -> List[KForm]:
    """Phi^* theta'_i = sum_j M[i][j] theta_j (row i of the matrix)."""
    out = []
    for i in range(codomain_dim):
        terms = {}
        for j in range(domain.dim):
            c = phi_matrix[i][j]
            if not scalars.is_zero(domain.scalar, scalars.coerce(domain.scalar, c), domain.eps):
                terms[(j,)] = c
        out.append(KForm(domain, 1, terms))
    return out


def pullback_form(phi, a: KForm) -> KForm:
    """Pull a form on the codomain back through a graded homomorphism."""
    dom = phi.domain
    m = phi.full_matrix()
    ones = _pullback_one_forms(m, phi.codomain.dim, dom)
    tag = dom.scalar
    acc = KForm(dom, a.degree, {})
    for idx, c in a.terms.items():
        w = None
        for i in idx:
            w = ones[i] if w is None else wedge(w, ones[i])
            if w.is_zero():
                break
        if w is None:
            w = KForm(dom, 0, {(): scalars.one(tag)})
        if not w.is_zero():
            acc = acc + w.scale(c)
    return acc


def pushforward_vector(phi, X: KVector) -> KVector:
    """Phi_* on multivectors: wedge of image columns."""
    cod = phi.codomain
    m = phi.full_matrix()
    cols = []
    for j in range(phi.domain.dim):
        terms = {}
        for i in range(cod.dim):
            c = m[i][j]
            if not scalars.is_zero(cod.scalar, scalars.coerce(cod.scalar, c), cod.eps):
                terms[(i,)] = c
        cols.append(KVector(cod, 1, terms))
    acc = KVector(cod, X.degree, {})
    for idx, c in X.terms.items():
        w = None
        for j in idx:
            w = cols[j] if w is None else wedge(w, cols[j])
            if w.is_zero():
                break
        if w is not None and not w.is_zero():
            acc = acc + w.scale(c)
    return acc


def volume_form(g: GradedLieAlgebra) -> KForm:
    return KForm(g, g.dim, {tuple(range(g.dim)): scalars.one(g.scalar)})


# -- the standard-form catalog -------------------------------------------------


def _require_h1_factors(g: GradedLieAlgebra) -> List[dict]:
    facs = g.meta.get("factors")
    if facs is None and g.meta.get("family") == "heisenberg" and g.meta.get("m") == 1:
        facs = [{"layers": [list(g.layer_indices(1)), list(g.layer_indices(2))],
                 "meta": {"family": "heisenberg", "m": 1}}]
    if not facs or any(f["meta"].get("family") != "heisenberg" or f["meta"].get("m") != 1
                       for f in facs):
        raise FormError("this standard form needs a sum of first Heisenberg factors")
    return facs


def _quotient_context(obj):
    """Accept a CentralQuotient/ProductQuotient or a plain product algebra."""
    from .algebra import CentralQuotient, ProductQuotient
    if isinstance(obj, ProductQuotient):
        return obj.quotient
    if isinstance(obj, CentralQuotient):
        return obj
    return None


def standard_form(obj, name: str, *params):
    """Catalog of the named forms/vectors used by the rigidity arguments.

    `obj` is a GradedLieAlgebra for forms on a plain algebra, or a
    CentralQuotient/ProductQuotient for quotient forms (tau_ij, omega, omega_ij,
    beta, i_Z_omega, ...).  Unknown or inapplicable names raise FormError.
    """
    quo = _quotient_context(obj)
    g = quo.algebra if quo is not None else obj
    tag = g.scalar

    if name == "theta":
        return theta(g, *params)

    if name == "gamma":
        src = quo.parent if quo is not None else g
        facs = _require_h1_factors(src)
        i = params[0] - 1
        a, b = facs[i]["layers"][0]
        return theta(g, a + 1, b + 1)

    if name == "tau_tilde":
        if quo is not None:
            raise FormError("tau_tilde lives on the product, not the quotient")
        facs = _require_h1_factors(g)
        i = params[0] - 1
        (y,) = facs[i]["layers"][1]
        return theta(g, y + 1)

    if name == "tau_ij":
        if quo is None:
            raise FormError("tau_ij needs a quotient")
        return _tau_ij(quo, params[0], params[1])

    if name == "volume":
        return volume_form(g)

    if name == "omega":
        # gamma_1 ^ ... ^ gamma_n ^ tau; equals basis-order volume here
        return volume_form(g)

    if name == "omega_ij":
        if quo is None:
            raise FormError("omega_ij needs a quotient")
        i, j = params
        gi = standard_form(obj, "gamma", i)
        gj = standard_form(obj, "gamma", j)
        return wedge(gi + gj, _tau_ij(quo, i, j))

    if name == "Y":
        if quo is None:
            facs = _require_h1_factors(g)
            (y,) = facs[params[0] - 1]["layers"][1]
            return x_vector(g, y + 1)
        return _projected_Y(quo, params[0])

    if name == "Z":
        src = quo.parent if quo is not None else g
        facs = _require_h1_factors(src)
        a, b = facs[params[0] - 1]["layers"][0]
        return x_vector(g, a + 1, b + 1)

    if name == "beta":
        if quo is None:
            raise FormError("beta needs a quotient")
        m = params[0]
        facs = _require_h1_factors(quo.parent)
        a, b = facs[m - 1]["layers"][0]
        om = volume_form(g)
        ym = _projected_Y(quo, m)
        return interior_product(ym, interior_product(
            x_vector(g, a + 1), interior_product(x_vector(g, b + 1), om)))

    if name == "i_Z_omega":
        (Z,) = params
        return interior_product(Z, volume_form(g))

    if name == "i_X_i_Z_omega":
        X, Z = params
        return interior_product(X, interior_product(Z, volume_form(g)))

    if name in ("zeta", "zeta_bar"):
        return _zeta(g, params[0], bar=(name == "zeta_bar"))

    if name in ("zeta_top", "zeta_bar_top"):
        mm = g.meta.get("m")
        if g.meta.get("family") != "complex_heisenberg":
            raise FormError("zeta_top needs a complex Heisenberg algebra")
        acc = None
        for j in range(1, 2 * mm + 2):
            zj = _zeta(g, j, bar=(name == "zeta_bar_top"))
            acc = zj if acc is None else wedge(acc, zj)
        return acc

    raise FormError(f"unknown standard form {name!r}")


def _tau_ij(quo, i: int, j: int) -> KForm:
    """tau_i~ - tau_j~ pushed to the quotient; errors if it does not descend."""
    g = quo.algebra
    par = quo.parent
    tag = g.scalar
    facs = _require_h1_factors(par)
    n1 = par.layer_dims[0]
    (yi,) = facs[i - 1]["layers"][1]
    (yj,) = facs[j - 1]["layers"][1]
    # functional on parent V2: e_yi* - e_yj*; must annihilate K
    for kvec in quo.K_basis:
        val = kvec[yi - n1] - kvec[yj - n1]
        if not scalars.is_zero(par.scalar, val, par.eps):
            raise FormError(f"tau_{i},{j} does not descend: K not annihilated")
    # express on quotient V2 basis (the section vectors)
    terms = {}
    for t, w in enumerate(quo.section):
        c = w[yi - n1] - w[yj - n1]
        if not scalars.is_zero(tag, scalars.coerce(tag, c), g.eps):
            terms[(n1 + t,)] = c
    return KForm(g, 1, terms)


def _projected_Y(quo, m: int) -> KVector:
    par, g = quo.parent, quo.algebra
    facs = _require_h1_factors(par)
    (ym,) = facs[m - 1]["layers"][1]
    v = par.basis_vector(ym)
    pv = quo.project_vector(v)
    return KVector.from_coords(g, pv)


def _zeta(g: GradedLieAlgebra, j: int, bar: bool) -> KForm:
    """zeta_j = theta_{Xj} + i theta_{Yj} on a complex Heisenberg algebra."""
    if g.meta.get("family") != "complex_heisenberg" and g.J is None:
        raise FormError("zeta forms need a complex structure")
    tag = scalars.complex_tag(g.scalar)
    if tag != g.scalar:
        raise FormError("build zeta on the Qi/c64 view: use complexify or with_scalar('Qi')")
    iu = scalars.GQ_I if tag == "Qi" else 1j
    xj, yj = 2 * (j - 1), 2 * (j - 1) + 1
    one = scalars.one(tag)
    im = -iu if bar else iu
    return KForm(g, 1, {(xj,): one, (yj,): im})


def kernel_dual_forms(g: GradedLieAlgebra, factor: int) -> List[KForm]:
    """2-forms on factor k whose restrictions to ker_k give the dual basis."""
    from . import homs as _homs
    Lmat, ker = _homs.bracket_map_and_kernel(g, factor)
    if not ker:
        return []
    tag = g.scalar
    # ker vectors are degree-2 KVectors supported on the factor's pairs
    pairs = sorted({idx for kv in ker for idx in kv.terms})
    # matrix of pairings <theta_pair, ker_m>
    mat = [[kv.terms.get(p, scalars.zero(tag)) for kv in ker] for p in pairs]
    forms = []
    for mprime in range(len(ker)):
        rhs = [scalars.one(tag) if t == mprime else scalars.zero(tag)
               for t in range(len(ker))]
        # solve mat^T a = rhs for coefficients a over the pair monomials
        sol = linalg.solve(tag, linalg.transpose(mat), rhs, g.eps)
        if sol is None:
            raise FormError("degenerate pairing while building kernel duals")
        forms.append(KForm(g, 2, {p: c for p, c in zip(pairs, sol)}))
    return forms
