from fractions import Fraction

import numpy as np
import pytest

from carnot import algebra as A
from carnot import forms as F
from carnot import group as G
from carnot.pansu_lab import dsl, maps, pansu
from carnot.pansu_lab import experiments as E


def test_pansu_differential_of_translation_and_dilation(h1):
    lt = maps.compile_map("ltrans(1/2, -1/3, 2)", h1)
    for x in ([0.0, 0.0, 0.0], [0.3, -0.4, 0.2]):
        phi, diag = pansu.pansu_differential(lt, h1, x)
        assert np.allclose(phi.blocks[0], np.eye(2), atol=1e-8)
        assert phi.blocks[1][0][0] == pytest.approx(1.0, abs=1e-8)
    dl = maps.compile_map("dilate(3/2)", h1)
    phi2, _ = pansu.pansu_differential(dl, h1, [0.1, 0.2, 0.3])
    assert np.allclose(phi2.blocks[0], 1.5 * np.eye(2), atol=1e-8)
    assert phi2.blocks[1][0][0] == pytest.approx(2.25, abs=1e-8)


def test_pansu_differential_of_lifted_shear(h1):
    lift = maps.compile_map("lift_symplectic(x^2)", h1)
    a = 0.7
    phi, diag = pansu.pansu_differential(lift, h1, [a, -0.1, 0.4])
    assert np.allclose(phi.blocks[0], [[1.0, 0.0], [2 * a, 1.0]], atol=1e-7)
    assert diag.cauchy_deltas[-1] < 1e-9


def test_pansu_differential_homomorphic_constant(h1):
    src = "compose(dilate(2), ltrans(1/4, 0, -1/2))"
    cm = maps.compile_map(src, h1)
    rng = np.random.default_rng(0)
    ref = None
    for _ in range(5):
        x = rng.uniform(-1, 1, 3)
        phi, _ = pansu.pansu_differential(cm, h1, x)
        blk = np.array(phi.blocks[0])
        if ref is None:
            ref = blk
        assert np.allclose(blk, ref, atol=1e-8)


def test_non_contact_map_raises(h1):
    bad = maps.compile_map("map(a,b,c)->(a, b, c + a*b)", h1)
    with pytest.raises(pansu.NonContactError):
        pansu.pansu_differential(bad, h1, [0.4, 0.3, 0.0])


def test_chain_rule(h1):
    inner = maps.compile_map("lift_symplectic(x^2)", h1)
    outer = maps.vertical_mixing_contact_map()
    comp = maps.CompiledMap(h1, h1, tuple(p.subs(list(inner.polys))
                                          for p in outer.polys))
    x = np.array([0.2, -0.1, 0.3])
    phi_comp, _ = pansu.pansu_differential(comp, h1, x)
    phi_in, _ = pansu.pansu_differential(inner, h1, x)
    phi_out, _ = pansu.pansu_differential(outer, h1, inner(x[None, :])[0])
    prod = np.array(phi_out.blocks[0]) @ np.array(phi_in.blocks[0])
    assert np.allclose(prod, phi_comp.blocks[0], atol=1e-6)


def test_pansu_field_validity_and_blocks(h1):
    lift = maps.compile_map("lift_symplectic(x^2)", h1)
    pts = np.random.default_rng(1).uniform(-1, 1, (64, 3))
    pf = pansu.pansu_field(lift, h1, pts, 1e-3)
    assert np.all(pf.validity)
    assert np.allclose(pf.second_layer[:, 0, 0], 1.0, atol=1e-7)


def test_pullback_field_examples(h1):
    ident = maps.compile_map("map(a,b,c)->(a, b, c)", h1)
    pts = np.random.default_rng(2).uniform(-1, 1, (10, 3))
    fld = E.pansu_pullback_field(ident, h1, F.theta(h1, 3), pts)
    assert set(fld) == {(2,)}
    assert np.allclose(fld[(2,)], 1.0, atol=1e-9)
    dil = maps.compile_map("dilate(2)", h1)
    fld2 = E.pansu_pullback_field(dil, h1, F.theta(h1, 3), pts)
    assert np.allclose(fld2[(2,)], 4.0, atol=1e-8)
    # shear-x lift: f_P^*(theta1^theta3) = theta13 + u'(b) theta23
    x, y = dsl.Polynomial.variable(2, 0), dsl.Polynomial.variable(2, 1)
    lift_x, _ = maps.lift_symplectomorphism([x + y ** 2, y], "R")
    om = F.wedge(F.theta(h1, 1), F.theta(h1, 3))
    fld3 = E.pansu_pullback_field(lift_x, h1, om, pts)
    assert np.allclose(fld3[(0, 2)], 1.0, atol=1e-7)
    assert np.allclose(fld3[(1, 2)], 2 * pts[:, 1], atol=1e-7)


def test_pullback_field_product_span(sum2h1, h1):
    """Product automorphism pair: theta_123-type pullback stays in the span
    {theta_123, theta_456} (paper numbering)."""
    f1 = maps.compile_map("lift_symplectic(x^2)", h1)
    f2 = maps.compile_map("lift_symplectic(2*x)", h1)
    pm = maps.product_map([f1, f2], sum2h1)
    pts = np.random.default_rng(3).uniform(-0.5, 0.5, (20, 6))
    om = F.theta(sum2h1, 1, 2, 5)   # gamma_1 ^ tau~_1
    fld = E.pansu_pullback_field(pm, sum2h1, om, pts)
    allowed = {(0, 1, 4), (2, 3, 5)}
    live = {k for k, v in fld.items() if np.max(np.abs(v)) > 1e-8}
    assert live <= allowed


def test_integrate_wedge_examples(h1):
    lat = G.sample_box(h1, np.zeros(3), 1.0, 6)
    vol_field = {(0, 1, 2): np.ones(lat.size)}
    unit = {(): np.ones(lat.size)}
    val = E.integrate_wedge(vol_field, unit, lat)
    assert val == pytest.approx(8.0)  # box volume, radius 1 per axis
    # odd-symmetric integrand integrates to ~0
    pts = lat.points()
    odd = {(0, 1, 2): pts[:, 0]}
    assert E.integrate_wedge(odd, unit, lat) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        E.integrate_wedge({(0, 1): np.ones(lat.size)}, unit, lat)


def test_pullback_residual_weight_gate_and_closedness(h1):
    lift = maps.compile_map("lift_symplectic(x^2)", h1)
    bump = E.bump_polynomial(h1, 1)
    eta = E.PolyForm(h1, 0, {(): bump})
    with pytest.raises(ValueError):
        E.pullback_theorem_residual(lift, h1, F.theta(h1, 3), eta, 1.0, [8])
    om = F.wedge(F.theta(h1, 1), F.theta(h1, 3))
    rep = E.pullback_theorem_residual(lift, h1, om, eta, 1.0, [8])
    assert rep.weight_check and rep.weight_sum == -4
    # weight violation is an experiment, not an error
    om2 = F.wedge(F.theta(h1, 1), F.theta(h1, 2))
    rep2 = E.pullback_theorem_residual(lift, h1, om2, eta, 1.0, [8])
    assert not rep2.weight_check


def test_negative_control_discrepancy(h1):
    vm = maps.vertical_mixing_contact_map()
    lat = G.sample_box(h1, np.zeros(3), 0.6, 4)
    disc = E.pointwise_commutator_discrepancy(vm, h1, F.theta(h1, 3), lat)
    assert disc > 0.3
    lift = maps.compile_map("lift_symplectic(x^2)", h1)
    disc2 = E.pointwise_commutator_discrepancy(lift, h1, F.theta(h1, 3), lat)
    assert disc2 < 1e-7


def test_approximation_residual_homomorphism(h1):
    hom = maps.compile_map("dilate(3/4)", h1)
    lat = G.sample_box(h1, np.zeros(3), 0.4, 3)
    om = F.wedge(F.theta(h1, 1), F.theta(h1, 3))
    bump = E.bump_polynomial(h1, Fraction(2, 5))
    eta = E.PolyForm(h1, 1, {(1,): bump})
    out = E.approximation_residual(hom, h1, om, eta, [0.3, 0.15], lat)
    for row in out["rows"]:
        assert row["residual"] < 1e-6


def test_approximation_residual_decreasing_trend(h1):
    lift = maps.compile_map("lift_symplectic(x^2)", h1)
    lat = G.sample_box(h1, np.zeros(3), 0.4, 3)
    om = F.wedge(F.theta(h1, 1), F.theta(h1, 3))
    bump = E.bump_polynomial(h1, Fraction(2, 5))
    eta = E.PolyForm(h1, 1, {(1,): bump})
    out = E.approximation_residual(lift, h1, om, eta, [0.4, 0.2, 0.1], lat)
    res = [row["residual"] for row in out["rows"]]
    assert out["decreasing"] or res[0] < 1e-9


def test_strict_weight_case_vanishes(h1):
    """wt(omega) + wt(eta) < -nu: the Pansu-pullback integral itself vanishes."""
    lift = maps.compile_map("lift_symplectic(x^2)", h1)
    lat = G.sample_box(h1, np.zeros(3), 0.5, 6)
    om = F.wedge(F.theta(h1, 2), F.theta(h1, 3))  # weight -3
    bump = E.bump_polynomial(h1, Fraction(1, 2))
    eta = E.PolyForm(h1, 1, {(2,): bump})         # theta3 coefficient: weight -2
    # wt sum = -5 < -4 = -nu: integrand has weight below -nu, so the
    # volume coefficient of the wedge vanishes identically
    pts = lat.points()
    fld = E.pansu_pullback_field(lift, h1, om, pts)
    etav = {k: v.real if np.iscomplexobj(v) else v for k, v in eta.eval(pts).items()}
    val = E.integrate_wedge(fld, etav, lat)
    assert abs(val) < 1e-10


def test_holomorphy_classifier_verdicts(ch1):
    z1, z2 = dsl.Polynomial.variable(2, 0), dsl.Polynomial.variable(2, 1)
    lift, _ = maps.lift_symplectomorphism([z1, z2 + z1 ** 2], "C")
    pts = np.random.default_rng(4).uniform(-1, 1, (30, 6))
    assert E.holomorphy_classifier(lift, ch1, pts)["verdict"] == "holomorphic-type"
    conj = maps.compile_map("conj()", ch1)

    class Comp:
        codomain = ch1

        def __call__(self, p):
            return conj(lift(p))

    assert E.holomorphy_classifier(Comp(), ch1, pts)["verdict"] == "antiholomorphic-type"
    fold = maps.folding_map(1)
    pts2 = pts.copy()
    pts2[:, 0] = np.sign(pts2[:, 0]) * (np.abs(pts2[:, 0]) + 0.3)
    out = E.holomorphy_classifier(fold, ch1, pts2)
    assert out["verdict"] == "mixed"
    assert out["counts"]["neither"] == 0


def test_left_field_polys_step2(h1):
    cols = E.left_field_polys(h1)
    # X1 = d/da + (b/2) d/dc; X2 = d/db - (a/2) d/dc
    assert cols[0][0] == dsl.Polynomial.constant(3, Fraction(1))
    assert cols[0][2] == dsl.Polynomial.variable(3, 1) * Fraction(1, 2)
    assert cols[1][2] == dsl.Polynomial.variable(3, 0) * Fraction(-1, 2)
    # X3 is just d/dc (central)
    assert cols[2][2] == dsl.Polynomial.constant(3, Fraction(1))


def test_polyform_exact_d_vs_invariant(h1):
    # with constant coefficients, d_exact reduces to the CE differential
    a = F.theta(h1, 3)
    pf = E.PolyForm.from_invariant(a)
    d = pf.d_exact()
    assert set(d.terms) == {(0, 1)}
    assert d.terms[(0, 1)] == dsl.Polynomial.constant(3, Fraction(1))
