"""Compiling map expressions against an algebra, and contact lifts.

A CompiledMap holds one polynomial per codomain coordinate (exponential
coordinates); evaluation is numpy-vectorized.  lift_symplectomorphism lifts a
polynomial symplectomorphism of R^{2n} (or a holomorphic one of C^{2n}) to the
(complex) Heisenberg group, with an exact symbolic contact certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .. import group, scalars
from ..algebra import GradedLieAlgebra, StructuralError, complex_heisenberg, heisenberg
from ..scalars import GaussianRational
from .dsl import (ArityError, Compose, Conj, Dilate, LTrans, LiftSymplectic,
                  MapExpr, MapLiteral, Polynomial, parse_map)


class MapCompileError(ValueError):
    pass


@dataclass
class CompiledMap:
    domain: GradedLieAlgebra
    codomain: GradedLieAlgebra
    polys: Tuple[Polynomial, ...]     # one per codomain coordinate, over domain vars

    def _tables(self):
        # (coeff float, exps tuple) per poly, plus per-variable max exponent
        tabs = []
        nv = self.polys[0].nvars if self.polys else 0
        maxe = [0] * nv
        for p in self.polys:
            rows = []
            for k, v in p.coeffs.items():
                fv = complex(v) if isinstance(v, GaussianRational) else float(v)
                if isinstance(fv, complex) and fv.imag == 0:
                    fv = fv.real
                rows.append((fv, k))
                for i, e in enumerate(k):
                    maxe[i] = max(maxe[i], e)
            tabs.append(rows)
        return tabs, maxe

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if not hasattr(self, "_tabs"):
            object.__setattr__(self, "_tabs", self._tables())
        tabs, maxe = self._tabs
        # shared power cache over the chunk
        pows = []
        for i, me in enumerate(maxe):
            col = [None, pts[:, i]] if me >= 1 else [None]
            for e in range(2, me + 1):
                col.append(col[-1] * pts[:, i])
            pows.append(col)
        out = np.empty((pts.shape[0], len(self.polys)))
        for t, rows in enumerate(tabs):
            acc = np.zeros(pts.shape[0])
            for c, k in rows:
                term = None
                for i, e in enumerate(k):
                    if e:
                        term = pows[i][e] if term is None else term * pows[i][e]
                if term is None:
                    acc += c if not isinstance(c, complex) else c.real
                else:
                    acc += (c if not isinstance(c, complex) else c.real) * term
            out[:, t] = acc
        return out

    def compose_with(self, inner: "CompiledMap") -> "CompiledMap":
        if inner.codomain.dim != self.domain.dim:
            raise MapCompileError("composition dimension mismatch")
        polys = tuple(p.subs(list(inner.polys)) for p in self.polys)
        return CompiledMap(inner.domain, self.codomain, polys)

    def max_degree(self) -> int:
        return max((p.degree() for p in self.polys), default=0)


def _coordinate_polys(g: GradedLieAlgebra) -> List[Polynomial]:
    return [Polynomial.variable(g.dim, i) for i in range(g.dim)]


def _bch_polys(g: GradedLieAlgebra, a: Sequence[Polynomial],
               b: Sequence[Polynomial]) -> List[Polynomial]:
    """BCH product with polynomial entries (exact rational coefficients)."""
    n = g.dim

    def bracket(u, v):
        out = [Polynomial(u[0].nvars) for _ in range(n)]
        for (i, j), terms in g.table.items():
            if i > j:
                continue
            cij = u[i] * v[j] - u[j] * v[i]
            for k, c in terms.items():
                out[k] = out[k] + cij * Fraction(c) if isinstance(c, Fraction) \
                    else out[k] + cij * c
        return out

    out = [x + y for x, y in zip(a, b)]
    if g.step == 1:
        return out
    if g.step == 2:
        w = bracket(a, b)
        return [o + wi * Fraction(1, 2) for o, wi in zip(out, w)]
    for word, coeff in group.bch_word_table(g.step):
        if len(word) < 2:
            continue
        pick = (a, b)
        acc = list(pick[word[-1]])
        for idx in reversed(word[:-1]):
            acc = bracket(pick[idx], acc)
        out = [o + x * coeff for o, x in zip(out, acc)]
    return out


def compile_map(expr, algebra: GradedLieAlgebra,
                codomain: Optional[GradedLieAlgebra] = None) -> CompiledMap:
    """Resolve a MapExpr (or DSL source text) against concrete algebras."""
    if isinstance(expr, str):
        expr = parse_map(expr)
    cod = codomain or algebra
    if isinstance(expr, MapLiteral):
        if len(expr.variables) != algebra.dim:
            raise MapCompileError(
                f"map has {len(expr.variables)} variables, algebra dimension is {algebra.dim}")
        if len(expr.polys) != cod.dim:
            raise MapCompileError(
                f"map has {len(expr.polys)} outputs, codomain dimension is {cod.dim}")
        return CompiledMap(algebra, cod, tuple(expr.polys))
    if isinstance(expr, Compose):
        inner = compile_map(expr.inner, algebra)
        outer = compile_map(expr.outer, inner.codomain, cod)
        return outer.compose_with(inner)
    if isinstance(expr, Dilate):
        xs = _coordinate_polys(algebra)
        polys = tuple(xs[i] * (expr.factor ** algebra.layer_of[i])
                      for i in range(algebra.dim))
        return CompiledMap(algebra, algebra, polys)
    if isinstance(expr, LTrans):
        if len(expr.point) != algebra.dim:
            raise MapCompileError("ltrans point has wrong dimension")
        consts = [Polynomial.constant(algebra.dim, c) for c in expr.point]
        polys = tuple(_bch_polys(algebra, consts, _coordinate_polys(algebra)))
        return CompiledMap(algebra, algebra, polys)
    if isinstance(expr, Conj):
        if algebra.J is None:
            raise MapCompileError("conj() needs an algebra with a complex structure")
        xs = _coordinate_polys(algebra)
        # complex conjugation negates the J-odd half: in our bases, the
        # imaginary partners are the odd positions of each (X, Y=JX) pair
        polys = []
        for i in range(algebra.dim):
            polys.append(xs[i] * (Fraction(-1) if i % 2 else Fraction(1)))
        return CompiledMap(algebra, algebra, tuple(polys))
    if isinstance(expr, LiftSymplectic):
        h1 = heisenberg(1)
        if algebra.layer_dims != h1.layer_dims:
            raise MapCompileError("lift_symplectic shorthand targets the first "
                                  "Heisenberg group")
        u = expr.shear
        phi = [Polynomial.variable(2, 0),
               Polynomial.variable(2, 1) + u.subs([Polynomial.variable(2, 0)])]
        lift, _cert = lift_symplectomorphism(phi, field="R")
        return CompiledMap(algebra, algebra, tuple(lift.polys))
    raise MapCompileError(f"cannot compile {expr!r}")


# -- symplectic lifts ----------------------------------------------------------------


@dataclass
class SymplecticDefect(ValueError):
    """phi*omega - omega as a matrix of polynomials (the failing 2-form)."""
    defect: List[List[Polynomial]]

    def __str__(self):
        entries = [(i + 1, j + 1, str(p)) for i, row in enumerate(self.defect)
                   for j, p in enumerate(row) if not p.is_zero()]
        return f"symplectic defect: {entries}"


@dataclass
class LiftCertificate:
    contact_exact: bool              # phi-hat * theta_{2n+1} == theta_{2n+1}, symbolic
    central: Polynomial              # the integrated central coordinate F


def _symplectic_pairs(n: int) -> List[Tuple[int, int]]:
    return [(2 * i, 2 * i + 1) for i in range(n)]


def _check_symplectic(phi: Sequence[Polynomial], n: int) -> Optional[List[List[Polynomial]]]:
    """None if phi* omega_n == omega_n exactly; else the defect matrix."""
    dim = 2 * n
    jac = [[phi[r].partial(c) for c in range(dim)] for r in range(dim)]
    defect = [[Polynomial(dim) for _ in range(dim)] for _ in range(dim)]
    bad = False
    for p in range(dim):
        for q in range(p + 1, dim):
            acc = Polynomial(dim)
            for (a, b) in _symplectic_pairs(n):
                acc = acc + jac[a][p] * jac[b][q] - jac[a][q] * jac[b][p]
            want = Fraction(1) if (p, q) in _symplectic_pairs(n) else Fraction(0)
            diff = acc - Polynomial.constant(dim, want)
            if not diff.is_zero():
                bad = True
                defect[p][q] = diff
                defect[q][p] = -diff
    return defect if bad else None


def _alpha_coeffs(n: int) -> List[Polynomial]:
    """alpha = (1/2) sum_i (x_{2i-1} dx_{2i} - x_{2i} dx_{2i-1}), as coefficient list."""
    dim = 2 * n
    out = [Polynomial(dim) for _ in range(dim)]
    for (a, b) in _symplectic_pairs(n):
        out[b] = out[b] + Polynomial.variable(dim, a) * Fraction(1, 2)
        out[a] = out[a] - Polynomial.variable(dim, b) * Fraction(1, 2)
    return out


def _pullback_one_form(coeffs: Sequence[Polynomial],
                       phi: Sequence[Polynomial]) -> List[Polynomial]:
    """(phi^* (sum_k coeffs_k dx_k))_j = sum_k coeffs_k(phi) dphi_k/dx_j."""
    dim = len(phi)
    moved = [c.subs(list(phi)) for c in coeffs]
    out = []
    for j in range(dim):
        acc = Polynomial(dim)
        for k in range(dim):
            acc = acc + moved[k] * phi[k].partial(j)
        out.append(acc)
    return out


def _potential_from_closed(coeffs: Sequence[Polynomial],
                           base: Sequence[Fraction]) -> Polynomial:
    """F with dF = the given closed polynomial 1-form, F(base) = 0.

    Axis-parallel path integration: integrate variable j with later variables
    frozen at the base point.
    """
    dim = len(coeffs)
    F = Polynomial(dim)
    for j in range(dim):
        # rho_j with variables j+1..dim-1 frozen at base
        sub = [Polynomial.variable(dim, t) if t <= j else
               Polynomial.constant(dim, base[t]) for t in range(dim)]
        rho = coeffs[j].subs(sub)
        anti = rho.integrate(j)
        # F_j(x) = anti(x) - anti(x with x_j = base_j)
        at_base = anti.subs([Polynomial.variable(dim, t) if t != j else
                             Polynomial.constant(dim, base[j]) for t in range(dim)])
        F = F + anti - at_base
    return F


def lift_symplectomorphism(phi, field: str = "R",
                           base_point: Optional[Sequence] = None
                           ) -> Tuple[CompiledMap, LiftCertificate]:
    """Lift a polynomial symplectomorphism of R^{2n} (or C^{2n}) to a contact
    diffeomorphism of the (complex) Heisenberg group.

    The central coordinate is F with dF = alpha - phi^* alpha (exact line
    integration from the base point); the returned certificate confirms
    phi-hat^* theta_{2n+1} = theta_{2n+1} symbolically.  Non-symplectic input
    raises SymplecticDefect carrying phi^* omega - omega.
    """
    if isinstance(phi, str):
        lit = parse_map(phi)
        if not isinstance(lit, MapLiteral):
            raise MapCompileError("lift input must be a plain map literal")
        phi = list(lit.polys)
    phi = list(phi)
    dim = len(phi)
    if dim % 2:
        raise MapCompileError("symplectomorphism must act on an even-dimensional space")
    n = dim // 2
    if any(p.nvars != dim for p in phi):
        raise MapCompileError("component polynomial has wrong variable count")

    defect = _check_symplectic(phi, n)
    if defect is not None:
        raise SymplecticDefect(defect)

    base = [Fraction(0)] * dim if base_point is None else [Fraction(b) for b in base_point]
    alpha = _alpha_coeffs(n)
    pull = _pullback_one_form(alpha, phi)
    rho = [a - b for a, b in zip(alpha, pull)]
    F = _potential_from_closed(rho, base)

    if field == "R":
        g = heisenberg(n)
        lift_polys = _embed_polys(phi + [F], dim, g.dim)
        lifted = CompiledMap(g, g, tuple(lift_polys))
        cert = LiftCertificate(_verify_contact(lifted, n), F)
        if not cert.contact_exact:
            raise MapCompileError("internal: lift failed its contact certificate")
        return lifted, cert
    if field == "C":
        g = complex_heisenberg(n)
        real_polys = _realify(phi + [F], dim)
        lifted = CompiledMap(g, g, tuple(real_polys))
        cert = LiftCertificate(_verify_contact_complex(lifted, n), F)
        if not cert.contact_exact:
            raise MapCompileError("internal: complex lift failed its contact certificate")
        return lifted, cert
    raise MapCompileError("field must be 'R' or 'C'")


def _embed_polys(polys: Sequence[Polynomial], nv_old: int, nv_new: int) -> List[Polynomial]:
    """Re-key polynomials in nv_old variables as polynomials in nv_new >= nv_old
    variables (the extra variables pass through for the central slot)."""
    out = []
    for t, p in enumerate(polys):
        coeffs = {}
        for k, v in p.coeffs.items():
            coeffs[tuple(k) + (0,) * (nv_new - nv_old)] = v
        q = Polynomial(nv_new, coeffs)
        if t == nv_old:  # central coordinate: add c itself
            q = q + Polynomial.variable(nv_new, nv_new - 1)
        out.append(q)
    return out


def theta_center_coeffs(n: int) -> List[Polynomial]:
    """theta_{2n+1} = dc + alpha on heisenberg(n), as dim-(2n+1) coefficient list."""
    dim = 2 * n + 1
    out = [Polynomial(dim) for _ in range(dim)]
    for (a, b) in _symplectic_pairs(n):
        out[b] = out[b] + Polynomial.variable(dim, a) * Fraction(1, 2)
        out[a] = out[a] - Polynomial.variable(dim, b) * Fraction(1, 2)
    out[dim - 1] = Polynomial.constant(dim, Fraction(1))
    return out


def _verify_contact(lifted: CompiledMap, n: int) -> bool:
    dim = 2 * n + 1
    theta = theta_center_coeffs(n)
    moved = [c.subs(list(lifted.polys)) for c in theta]
    for j in range(dim):
        acc = Polynomial(dim)
        for k in range(dim):
            acc = acc + moved[k] * lifted.polys[k].partial(j)
        if not (acc - theta[j]).is_zero():
            return False
    return True


# -- complex case helpers -------------------------------------------------------------


def _realify(polys: Sequence[Polynomial], nv: int) -> List[Polynomial]:
    """Turn complex polynomials in z_1..z_nv into real polynomials in
    (u_1, v_1, ..., u_nv, v_nv) plus the central pair; outputs interleave
    (Re, Im) per complex component."""
    nreal = 2 * (nv + 1)
    i_gq = GaussianRational(0, 1)
    zvars = []
    for t in range(nv):
        u = Polynomial.variable(nreal, 2 * t)
        v = Polynomial.variable(nreal, 2 * t + 1)
        zvars.append(u + v * i_gq)
    out = []
    for t, p in enumerate(polys):
        q = p.subs(zvars)
        if t == nv:  # central coordinate passes through
            q = q + (Polynomial.variable(nreal, nreal - 2)
                     + Polynomial.variable(nreal, nreal - 1) * i_gq)
        re, im = _split_re_im(q)
        out.append(re)
        out.append(im)
    return out


def _split_re_im(p: Polynomial) -> Tuple[Polynomial, Polynomial]:
    re, im = {}, {}
    for k, v in p.coeffs.items():
        if isinstance(v, GaussianRational):
            if v.re:
                re[k] = v.re
            if v.im:
                im[k] = v.im
        else:
            re[k] = v
    return Polynomial(p.nvars, re), Polynomial(p.nvars, im)


def _verify_contact_complex(lifted: CompiledMap, n: int) -> bool:
    """Check phi-hat^* zeta_{2n+1} = zeta_{2n+1} via real and imaginary parts.

    zeta = dz_c + (1/2) sum (z_{2i-1} dz_{2i} - z_{2i} dz_{2i-1}) with complex
    coefficients; on real coordinates this is two real 1-forms checked exactly.
    """
    dim = lifted.domain.dim            # 4n + 2
    i_gq = GaussianRational(0, 1)
    z = []
    for t in range(2 * n + 1):
        z.append(Polynomial.variable(dim, 2 * t) + Polynomial.variable(dim, 2 * t + 1) * i_gq)
    # complex coefficient list over the REAL coordinates: zeta = sum_k c_k dx_k
    coeffs = [Polynomial(dim) for _ in range(dim)]
    # dz_c = du_c + i dv_c
    coeffs[dim - 2] = coeffs[dim - 2] + Polynomial.constant(dim, Fraction(1))
    coeffs[dim - 1] = coeffs[dim - 1] + Polynomial.constant(dim, Fraction(1)) * i_gq
    for (a, b) in _symplectic_pairs(n):
        za, zb = z[a], z[b]
        # (1/2) za dzb: dzb = du_b + i dv_b
        coeffs[2 * b] = coeffs[2 * b] + za * Fraction(1, 2)
        coeffs[2 * b + 1] = coeffs[2 * b + 1] + za * Fraction(1, 2) * i_gq
        coeffs[2 * a] = coeffs[2 * a] - zb * Fraction(1, 2)
        coeffs[2 * a + 1] = coeffs[2 * a + 1] - zb * Fraction(1, 2) * i_gq
    moved = [c.subs(list(lifted.polys)) for c in coeffs]
    for j in range(dim):
        acc = Polynomial(dim)
        for k in range(dim):
            acc = acc + moved[k] * lifted.polys[k].partial(j)
        if not (acc - coeffs[j]).is_zero():
            return False
    return True


# -- built-in non-DSL maps -------------------------------------------------------------


@dataclass
class NativeMap:
    """A non-polynomial map given by a vectorized evaluator."""
    domain: GradedLieAlgebra
    codomain: GradedLieAlgebra
    fn: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.fn(np.atleast_2d(np.asarray(pts, dtype=float)))


def folding_map(n: int = 1) -> NativeMap:
    """The piecewise holomorphic/antiholomorphic fold on the complex Heisenberg
    group: f = gamma o g o pi_1 with g(x + iy) = |x| + iy.

    Holomorphic on {Re z_1 > 0}, antiholomorphic on {Re z_1 < 0}; its Pansu
    differential is degenerate but everywhere J-linear or J-antilinear.
    """
    g = complex_heisenberg(n)

    def fn(pts):
        out = np.zeros_like(pts)
        out[:, 0] = np.abs(pts[:, 0])
        out[:, 1] = pts[:, 1]
        return out

    return NativeMap(g, g, fn, name="folding")


def product_map(summands: Sequence[CompiledMap], g_sum: GradedLieAlgebra) -> CompiledMap:
    """Assemble factor maps into a map of the direct sum, routing coordinates
    through the sum's layer-blocked layout."""
    facs = g_sum.meta.get("factors")
    if facs is None or len(facs) != len(summands):
        raise MapCompileError("direct-sum algebra with matching factor count required")
    n = g_sum.dim
    polys: List[Optional[Polynomial]] = [None] * n
    for f_idx, cm in enumerate(summands):
        idxs = [i for layer in facs[f_idx]["layers"] for i in layer]
        if len(idxs) != cm.domain.dim:
            raise MapCompileError("factor dimension mismatch")
        vars_in = [Polynomial.variable(n, i) for i in idxs]
        for local, out_idx in enumerate(idxs):
            polys[out_idx] = cm.polys[local].subs(vars_in)
    return CompiledMap(g_sum, g_sum, tuple(polys))


def vertical_mixing_contact_map() -> CompiledMap:
    """A polynomial contact diffeomorphism of the first Heisenberg group whose
    contact factor lambda = 1 + a varies, so it does NOT preserve the center
    cosets (the first-layer image depends on the central coordinate).

    In Darboux coordinates (x, y, z) with theta = dz - y dx it is
    (x, y, z) -> (x, z + y(1+x), z(1+x)); here it is conjugated back to
    exponential coordinates.
    """
    g = heisenberg(1)
    a = Polynomial.variable(3, 0)
    b = Polynomial.variable(3, 1)
    c = Polynomial.variable(3, 2)
    one = Polynomial.constant(3, Fraction(1))
    half = Fraction(1, 2)
    # Darboux chart: x = a, y = b, z = c + ab/2
    z = c + a * b * half
    xp = a
    yp = z + b * (one + a)
    zp = z * (one + a)
    # back: a' = x', b' = y', c' = z' - x'y'/2
    polys = (xp, yp, zp - xp * yp * half)
    return CompiledMap(g, g, polys)
