"""Pullback fields, deterministic grid integration, and the verification
experiments for the pullback and approximation theorems.

Test forms eta = psi * beta use polynomial bumps, so d(eta) is computed exactly
against the left-invariant coframe (no numerical differentiation of test
data); integration is midpoint-rule with a fixed-order pairwise reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import forms, group, scalars, smoothing
from ..algebra import GradedLieAlgebra
from ..forms import KForm
from ..group import Lattice
from .dsl import Polynomial
from .maps import CompiledMap
from .pansu import NonContactError, full_blocks, pansu_field

DEFAULT_CHUNK = 1 << 17


# -- polynomial-coefficient forms -----------------------------------------------------


def left_field_polys(g: GradedLieAlgebra) -> List[List[Polynomial]]:
    """Components of the left-invariant fields X_j as polynomials in x.

    X_j(x) = d/dt BCH(x, t e_j) at t = 0; for step 2 this is e_j + (1/2)[x, e_j].
    """
    from .maps import _bch_polys

    n = g.dim
    out = []
    xs = [Polynomial.variable(n + 1, i) for i in range(n)]
    t = Polynomial.variable(n + 1, n)
    for j in range(n):
        b = [Polynomial(n + 1) for _ in range(n)]
        b[j] = t
        z = _bch_polys(g, xs, b)
        col = []
        for comp in z:
            lin = comp.partial(n)  # coefficient of t, still in n+1 vars
            # drop the t variable (set exponent slot to zero)
            coeffs = {}
            for k, v in lin.coeffs.items():
                if k[n] != 0:
                    continue
                coeffs[k[:n]] = v
            col.append(Polynomial(n, coeffs))
        out.append(col)
    return out


class PolyForm:
    """A differential form with polynomial coefficient functions over the
    left-invariant coframe: sum_I a_I(x) theta_I."""

    def __init__(self, algebra: GradedLieAlgebra, degree: int,
                 terms: Dict[Tuple[int, ...], Polynomial]):
        self.algebra = algebra
        self.degree = degree
        self.terms = {tuple(k): v for k, v in terms.items() if not v.is_zero()}

    @classmethod
    def from_invariant(cls, a: KForm, bump: Optional[Polynomial] = None) -> "PolyForm":
        g = a.algebra
        n = g.dim
        terms = {}
        for idx, c in a.terms.items():
            p = Polynomial.constant(n, Fraction(scalars.to_float(c))
                                    if not isinstance(c, (Fraction,)) else c)
            if isinstance(c, Fraction):
                p = Polynomial.constant(n, c)
            terms[idx] = p * bump if bump is not None else p
        return cls(g, a.degree, terms)

    def d_exact(self) -> "PolyForm":
        """d(sum a_I theta_I) = sum (X_j a_I) theta_j ^ theta_I + a_I d theta_I."""
        g = self.algebra
        n = g.dim
        fields = left_field_polys(g)
        out: Dict[Tuple[int, ...], Polynomial] = {}

        def add(idx, poly):
            if idx in out:
                out[idx] = out[idx] + poly
            else:
                out[idx] = poly

        dth = forms._dtheta_table(g)
        for idx, a in self.terms.items():
            # directional derivatives: X_j a = sum_i (X_j)_i da/dx_i
            for j in range(n):
                xa = Polynomial(n)
                for i in range(n):
                    pj = fields[j][i]
                    if pj.is_zero():
                        continue
                    pa = a.partial(i)
                    if pa.is_zero():
                        continue
                    xa = xa + pj * pa
                if xa.is_zero():
                    continue
                merged = forms._merge_sorted((j,), idx)
                if merged is None:
                    continue
                key, sign = merged
                add(key, xa if sign > 0 else -xa)
            # invariant part
            for pos, i in enumerate(idx):
                di = dth[i]
                rest = idx[:pos] + idx[pos + 1:]
                for didx, dc in di.terms.items():
                    merged = forms._merge_sorted(didx, rest)
                    if merged is None:
                        continue
                    key, sign = merged
                    if pos % 2:
                        sign = -sign
                    coeff = Fraction(dc) if isinstance(dc, Fraction) else Fraction(float(dc))
                    add(key, a * (coeff if sign > 0 else -coeff))
        return PolyForm(g, self.degree + 1, out)

    def eval(self, pts: np.ndarray) -> Dict[Tuple[int, ...], np.ndarray]:
        return {idx: p.eval(pts) for idx, p in self.terms.items()}

    def max_weight(self) -> int:
        if not self.terms:
            raise forms.WeightUndefinedError("zero form")
        g = self.algebra
        return max(-sum(g.layer_of[i] for i in idx) for idx in self.terms)


# -- Pansu pullback fields -------------------------------------------------------------


def _pullback_minors(g: GradedLieAlgebra, gp: GradedLieAlgebra,
                     blocks: List[np.ndarray], idx: Tuple[int, ...]
                     ) -> Dict[Tuple[int, ...], np.ndarray]:
    """Coefficients of Phi^* theta_idx over domain monomials, vectorized.

    blocks are per-layer (M, n_out, n_in) arrays; the pullback of a codomain
    monomial is a sum over domain monomials with matching layer profile, with
    minor determinants as coefficients.
    """
    import itertools as it

    M = blocks[0].shape[0]
    by_layer: Dict[int, List[int]] = {}
    for i in idx:
        by_layer.setdefault(gp.layer_of[i], []).append(i)
    layer_choices = []
    for lay, rows in sorted(by_layer.items()):
        cols_all = list(g.layer_indices(lay))
        layer_choices.append((lay, rows, list(it.combinations(cols_all, len(rows)))))
    out: Dict[Tuple[int, ...], np.ndarray] = {}
    for combo in it.product(*[c[2] for c in layer_choices]):
        coeff = np.ones(M)
        key: List[int] = []
        for (lay, rows, _), cols in zip(layer_choices, combo):
            blk = blocks[lay - 1]
            roff = gp.layer_starts[lay - 1]
            coff = g.layer_starts[lay - 1]
            sub = blk[:, [r - roff for r in rows], :][:, :, [c - coff for c in cols]]
            k = len(rows)
            if k == 1:
                coeff = coeff * sub[:, 0, 0]
            elif k == 2:
                coeff = coeff * (sub[:, 0, 0] * sub[:, 1, 1] - sub[:, 0, 1] * sub[:, 1, 0])
            else:
                coeff = coeff * np.linalg.det(sub)
            key.extend(cols)
        key_t = tuple(sorted(key))
        # sign: columns per layer are already sorted; concatenation across layers
        # preserves order because layer index ranges are increasing
        if np.any(coeff):
            out[key_t] = out.get(key_t, 0) + coeff
    return {k: v for k, v in out.items() if np.max(np.abs(v)) > 0}


def pansu_pullback_field(f, g: GradedLieAlgebra, omega, pts: np.ndarray,
                         fd_radius: float = 1e-3,
                         codomain: Optional[GradedLieAlgebra] = None
                         ) -> Dict[Tuple[int, ...], np.ndarray]:
    """(f_P^* omega)(x) over the points: sum_I a_I(f(x)) (D_P f(x))^* theta_I.

    `omega` is a KForm (left-invariant) or PolyForm (polynomial coefficients).
    Returns sparse monomial -> coefficient-array data.
    """
    gp = codomain or getattr(f, "codomain", None) or g
    pf = pansu_field(f, g, pts, fd_radius, gp)
    if not np.all(pf.validity):
        bad = int(np.argmin(pf.validity))
        raise NonContactError(f"Pansu field invalid at point {pts[bad].tolist()}")
    gf = g.with_scalar("f64") if scalars.is_exact(g.scalar) else g
    gpf = gp.with_scalar("f64") if scalars.is_exact(gp.scalar) else gp
    blocks = [pf.first_layer] if pf.second_layer is None \
        else [pf.first_layer, pf.second_layer]
    if isinstance(omega, KForm):
        omega = PolyForm.from_invariant(omega)
    fx = f(pts) if callable(f) else None
    out: Dict[Tuple[int, ...], np.ndarray] = {}
    for idx, a in omega.terms.items():
        avals = a.eval(fx) if fx is not None else a.eval(pts)
        if np.iscomplexobj(avals):
            avals = avals.real
        minors = _pullback_minors(gf, gpf, blocks, idx)
        for key, m in minors.items():
            cur = out.get(key)
            contrib = avals * m
            out[key] = contrib if cur is None else cur + contrib
    return out


# -- integration -------------------------------------------------------------------------


def _wedge_volume_coeff(g: GradedLieAlgebra,
                        fa: Dict[Tuple[int, ...], np.ndarray],
                        fb: Dict[Tuple[int, ...], np.ndarray]) -> np.ndarray:
    """Coefficient of the volume form in (A ^ B) pointwise."""
    n = g.dim
    some = next(iter(fa.values()), None)
    M = len(some) if some is not None else 0
    out = np.zeros(M)
    for ia, va in fa.items():
        rest = tuple(sorted(set(range(n)) - set(ia)))
        vb = fb.get(rest)
        if vb is None:
            continue
        merged = forms._merge_sorted(ia, rest)
        _, sign = merged
        out += sign * va * vb
    return out


def integrate_wedge(fieldA, fieldB, lattice: Lattice,
                    chunk_eval: Optional[Callable[[np.ndarray], Tuple[dict, dict]]] = None,
                    chunk_size: int = DEFAULT_CHUNK) -> float:
    """Midpoint-rule integral of (A ^ B) over the lattice box.

    Either pass precomputed fields (dict monomial -> (size,) arrays) or a
    `chunk_eval(points) -> (fieldA, fieldB)` to stream.  The reduction is a
    fixed-order pairwise sum per chunk followed by math.fsum across chunks, so
    results are bit-reproducible for a fixed chunk size.
    """
    g = lattice.algebra
    degA = len(next(iter(fieldA))) if isinstance(fieldA, dict) and fieldA else None
    if isinstance(fieldA, dict) and isinstance(fieldB, dict):
        degB = len(next(iter(fieldB))) if fieldB else None
        if degA is not None and degB is not None and degA + degB != g.dim:
            raise ValueError("degrees do not wedge to the volume form")
        coeff = _wedge_volume_coeff(g, fieldA, fieldB)
        return float(np.sum(coeff)) * lattice.cell_volume
    parts = []
    for pts in lattice.chunks(chunk_size):
        fa, fb = chunk_eval(pts)
        coeff = _wedge_volume_coeff(g, fa, fb)
        parts.append(float(np.sum(coeff)))
    return math.fsum(parts) * lattice.cell_volume


def _grid_moments(lat: Lattice, values: np.ndarray, max_exp: Sequence[int]) -> np.ndarray:
    """Moment tensor M[e] = sum_x values(x) * prod_i axis_i(x)^{e_i} over the grid.

    Contracts the reshaped value grid against per-axis Vandermonde matrices,
    last axis first, so the cost is a few passes over the data.
    """
    n = lat.algebra.dim
    T = values.reshape(tuple(lat.resolution))
    for i in range(n - 1, -1, -1):
        ax = lat.axis_coords(i)
        V = np.vander(ax, N=max_exp[i] + 1, increasing=True)  # (res_i, E_i)
        T = np.tensordot(T, V, axes=([i], [0]))
        # contracted axis moves to the end; restore ordering by moving it back
        T = np.moveaxis(T, -1, i)
    return T


def _poly_moment_sum(p: Polynomial, moments: np.ndarray) -> float:
    acc = 0.0
    for k, v in p.coeffs.items():
        acc += float(v) * float(moments[k])
    return acc


def _integrate_field_against_polyform(lat: Lattice, afield: Dict[Tuple[int, ...], np.ndarray],
                                      b: "PolyForm") -> float:
    """int (A ^ B) for a sampled field A and polynomial-coefficient form B."""
    g = lat.algebra
    n = g.dim
    parts = []
    for ia, avals in afield.items():
        rest = tuple(sorted(set(range(n)) - set(ia)))
        bp = b.terms.get(rest)
        if bp is None:
            continue
        _, sign = forms._merge_sorted(ia, rest)
        max_exp = [0] * n
        for k in bp.coeffs:
            for i in range(n):
                max_exp[i] = max(max_exp[i], k[i])
        moments = _grid_moments(lat, avals, max_exp)
        parts.append(sign * _poly_moment_sum(bp, moments))
    return math.fsum(parts) * lat.cell_volume


def _fill_field(f, g: GradedLieAlgebra, omega, lat: Lattice, fd_radius: float,
                chunk_size: int) -> Tuple[Dict[Tuple[int, ...], np.ndarray], float, float]:
    """Full-grid pullback field, filled chunk by chunk; also returns the max
    finite-difference gradient of the field along the fastest axis and the
    max field magnitude."""
    fields: Dict[Tuple[int, ...], np.ndarray] = {}
    grad_max = 0.0
    field_max = 0.0
    pos = 0
    for pts in lat.chunks(chunk_size):
        fa = pansu_pullback_field(f, g, omega, pts, fd_radius)
        m = len(pts)
        for key, vals in fa.items():
            if key not in fields:
                fields[key] = np.zeros(lat.size)
            fields[key][pos:pos + m] = vals
            field_max = max(field_max, float(np.max(np.abs(vals))))
            if m > 1:
                d = np.abs(np.diff(vals)) / lat.spacing[-1]
                grad_max = max(grad_max, float(np.max(d)))
        pos += m
    return fields, grad_max, field_max


def bump_polynomial(g: GradedLieAlgebra, radius, center: Optional[Sequence] = None
                    ) -> Polynomial:
    """Product bump prod_i (1 - ((x_i - c_i)/R_i)^2)^2, vanishing to order 2 at
    the box boundary; exact rational coefficients."""
    n = g.dim
    rad = np.broadcast_to(np.asarray(radius, dtype=object), (n,))
    cen = [Fraction(0)] * n if center is None else [Fraction(c) for c in center]
    acc = Polynomial.constant(n, Fraction(1))
    one = Polynomial.constant(n, Fraction(1))
    for i in range(n):
        Ri = Fraction(rad[i]) if not isinstance(rad[i], float) else Fraction(rad[i]).limit_denominator(10**6)
        xi = Polynomial.variable(n, i) - Polynomial.constant(n, cen[i])
        t = xi * (1 / Ri)
        acc = acc * (one - t * t) ** 2
    return acc


@dataclass
class ResidualReport:
    residuals: List[float]
    tolerances: List[float]
    resolutions: List[int]
    weight_check: bool
    weight_sum: int
    nu: int
    calibration: float

    @property
    def passed(self) -> bool:
        return all(abs(r) <= t for r, t in zip(self.residuals, self.tolerances))

    def ratio(self) -> Optional[float]:
        if len(self.residuals) < 2 or self.residuals[1] == 0:
            return None
        return abs(self.residuals[0]) / abs(self.residuals[1])

    def to_json(self) -> dict:
        return {
            "resolutions": self.resolutions,
            "residuals": self.residuals,
            "tolerances": self.tolerances,
            "weight_check": self.weight_check,
            "weight_sum": self.weight_sum,
            "nu": self.nu,
            "calibration": self.calibration,
            "passed": self.passed,
        }


def pullback_theorem_residual(f, g: GradedLieAlgebra, omega: KForm, eta,
                              box_radius, resolutions: Sequence[int],
                              center: Optional[Sequence] = None,
                              fd_radius: float = 1e-3,
                              chunk_size: int = DEFAULT_CHUNK) -> ResidualReport:
    """Residuals of int f_P^* omega ^ d(eta) over a box at several resolutions.

    `omega` must be closed (verified).  `eta` is a PolyForm or a pair
    (bump Polynomial, KForm beta) meaning psi * beta; d(eta) is exact symbolic.
    The weight gate wt(omega) + wt(d eta) <= -nu is reported, not enforced.
    """
    if not forms.ce_differential(omega).is_zero():
        raise ValueError("omega is not closed")
    if isinstance(eta, tuple):
        psi, beta = eta
        eta = PolyForm.from_invariant(beta, bump=psi)
    deta = eta.d_exact()
    wsum = omega.weight() + deta.max_weight()
    weight_ok = wsum <= -g.nu
    center = np.zeros(g.dim) if center is None else np.asarray(center, dtype=float)

    # test-form bounds for the tolerance calibration: max value and max
    # gradient over a deterministic point cloud in the box
    b_max, b_grad = _estimate_polyform_bounds(deta, g, box_radius, center)

    residuals, tols, cal = [], [], 0.0
    for res in resolutions:
        lat = group.sample_box(g, center, box_radius, res)
        fields, grad_max, field_max = _fill_field(f, g, omega, lat, fd_radius,
                                                  chunk_size)
        residual = _integrate_field_against_polyform(lat, fields, deta)
        h = float(np.max(lat.spacing))
        volume = lat.cell_volume * lat.size
        c_form = max((grad_max * b_max + field_max * b_grad) * math.sqrt(g.dim), 1e-9)
        cal = c_form
        residuals.append(residual)
        tols.append(c_form * h * volume)
    return ResidualReport(residuals, tols, list(resolutions), weight_ok, wsum,
                          g.nu, cal)


def _estimate_polyform_bounds(pf: "PolyForm", g: GradedLieAlgebra, radius,
                              center: np.ndarray, samples: int = 1024
                              ) -> Tuple[float, float]:
    rng = np.random.default_rng(20240)
    rad = np.broadcast_to(np.asarray(radius, dtype=float), (g.dim,))
    pts = center + rad * rng.uniform(-1.0, 1.0, size=(samples, g.dim))
    vmax, gmax = 0.0, 0.0
    for p in pf.terms.values():
        vals = p.eval(pts)
        vmax = max(vmax, float(np.max(np.abs(vals))))
        for i in range(g.dim):
            d = p.partial(i).eval(pts)
            gmax = max(gmax, float(np.max(np.abs(d))))
    return vmax, gmax


def pointwise_commutator_discrepancy(f, g: GradedLieAlgebra, omega: KForm,
                                     lattice: Lattice, fd_radius: float = 1e-3,
                                     fd_scale: float = 1e-3) -> float:
    """max |d(f_P^* omega) - f_P^*(d omega)| over the lattice, coefficient-wise.

    The outer d of the (non-invariant) pulled-back field is estimated by
    horizontal finite differences of its coefficient functions.
    """
    pts = lattice.points()
    base = pansu_pullback_field(f, g, omega, pts, fd_radius)
    domega = forms.ce_differential(omega)
    target = pansu_pullback_field(f, g, domega, pts, fd_radius) if not domega.is_zero() \
        else {}
    n = g.dim
    # d(field) = sum_j (X_j a_I) theta_j ^ theta_I + a_I d(theta_I)
    acc: Dict[Tuple[int, ...], np.ndarray] = {}

    def add(idx, arr):
        acc[idx] = acc.get(idx, 0) + arr

    # directional derivatives via group-structured central differences
    for j in range(n):
        e = np.zeros(n)
        e[j] = fd_scale
        plus_pts = group.bch_np(g, pts, e[None, :])
        minus_pts = group.bch_np(g, pts, -e[None, :])
        fp = pansu_pullback_field(f, g, omega, plus_pts, fd_radius)
        fm = pansu_pullback_field(f, g, omega, minus_pts, fd_radius)
        for idx in set(fp) | set(fm) | set(base):
            da = (fp.get(idx, 0.0) - fm.get(idx, 0.0)) / (2 * fd_scale)
            if np.max(np.abs(da)) < 1e-12:
                continue
            merged = forms._merge_sorted((j,), idx)
            if merged is None:
                continue
            key, sign = merged
            add(key, sign * da)
    dth = forms._dtheta_table(g)
    for idx, arr in base.items():
        for pos, i in enumerate(idx):
            rest = idx[:pos] + idx[pos + 1:]
            for didx, dc in dth[i].terms.items():
                merged = forms._merge_sorted(didx, rest)
                if merged is None:
                    continue
                key, sign = merged
                if pos % 2:
                    sign = -sign
                add(key, sign * float(scalars.to_float(dc)) * arr)
    worst = 0.0
    for idx in set(acc) | set(target):
        diff = acc.get(idx, 0.0) - target.get(idx, 0.0)
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def approximation_residual(f, g: GradedLieAlgebra, omega: KForm, eta,
                           rho_list: Sequence[float], lattice: Lattice,
                           kernel: Optional[smoothing.DiscreteMeasure] = None,
                           fd_radius: float = 1e-3) -> dict:
    """|int f_rho^* omega ^ eta - int f_P^* omega ^ eta| per rho.

    f_rho comes from center-of-mass mollification; its pullback field uses
    finite-difference first-layer Jacobians of the mollified map.
    """
    if isinstance(eta, tuple):
        psi, beta = eta
        eta = PolyForm.from_invariant(beta, bump=psi)
    kernel = kernel or smoothing.default_kernel(g, 3)
    pts = lattice.points()
    etav = {k: (v.real if np.iscomplexobj(v) else v) for k, v in eta.eval(pts).items()}
    base_field = pansu_pullback_field(f, g, omega, pts, fd_radius)
    base = integrate_wedge(base_field, etav, lattice)
    gp = getattr(f, "codomain", None) or g

    rows = []
    for rho in rho_list:
        def f_rho(q, _rho=rho):
            return smoothing.mollify_map(f, kernel, _rho, q, domain=g, codomain=gp)

        fld = pansu_pullback_field(f_rho, g, omega, pts, fd_radius=min(fd_radius, rho / 8))
        val = integrate_wedge(fld, etav, lattice)
        rows.append({"rho": rho, "integral": val, "residual": abs(val - base)})
    return {"pansu_integral": base, "rows": rows,
            "decreasing": all(rows[i]["residual"] >= rows[i + 1]["residual"] - 1e-14
                              for i in range(len(rows) - 1))}


# -- holomorphy classifier ----------------------------------------------------------------


def holomorphy_classifier(f, g: GradedLieAlgebra, lattice_or_points,
                          fd_radius: float = 1e-4, tol: float = 1e-6) -> dict:
    """Classify D_P f(x) as J-linear / J-antilinear / neither per point, with a
    global verdict: holomorphic-type, antiholomorphic-type, or mixed."""
    if g.J is None:
        raise ValueError("holomorphy classification needs a complex structure")
    pts = lattice_or_points.points() if isinstance(lattice_or_points, Lattice) \
        else np.atleast_2d(np.asarray(lattice_or_points, dtype=float))
    pf = pansu_field(f, g, pts, fd_radius)
    n1 = g.layer_dims[0]
    J1 = np.array([[float(scalars.to_float(g.J[i][j])) for j in range(n1)]
                   for i in range(n1)])
    A = pf.first_layer
    comm = np.abs(np.einsum("mij,jk->mik", A, J1) - np.einsum("ij,mjk->mik", J1, A))
    anti = np.abs(np.einsum("mij,jk->mik", A, J1) + np.einsum("ij,mjk->mik", J1, A))
    scale = np.maximum(np.max(np.abs(A), axis=(1, 2)), 1e-30)
    is_lin = np.max(comm, axis=(1, 2)) <= tol * scale
    is_anti = np.max(anti, axis=(1, 2)) <= tol * scale
    labels = np.where(is_lin & ~is_anti, "J-linear",
                      np.where(is_anti & ~is_lin, "J-antilinear", "neither"))
    nlin = int(np.sum(labels == "J-linear"))
    nanti = int(np.sum(labels == "J-antilinear"))
    nn = int(np.sum(labels == "neither"))
    if nn == 0 and nanti == 0 and nlin > 0:
        verdict = "holomorphic-type"
    elif nn == 0 and nlin == 0 and nanti > 0:
        verdict = "antiholomorphic-type"
    else:
        verdict = "mixed"
    return {"labels": labels, "verdict": verdict,
            "counts": {"J-linear": nlin, "J-antilinear": nanti, "neither": nn}}
