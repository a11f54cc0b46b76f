from fractions import Fraction

import numpy as np
import pytest

from carnot import algebra as A
from carnot import group as G
from carnot.pansu_lab import dsl, maps


def test_parse_identity():
    m = dsl.parse_map("map(a,b,c)->(a, b, c)")
    assert isinstance(m, dsl.MapLiteral)
    assert m.variables == ("a", "b", "c")
    assert m.polys[0] == dsl.Polynomial.variable(3, 0)


def test_parse_polynomials_with_rationals():
    m = dsl.parse_map("map(x,y)->(x + 1/2*y^2 - 3, y)")
    p = m.polys[0]
    vals = p.eval(np.array([[2.0, 4.0]]))
    assert vals[0] == pytest.approx(2 + 0.5 * 16 - 3)


def test_parse_errors_have_positions():
    with pytest.raises(dsl.ArityError):
        dsl.parse_map("map(a,b)->(a, b, a)")
    with pytest.raises(dsl.UnknownIdentifierError) as exc:
        dsl.parse_map("map(a,b)->(a, b + q)")
    assert exc.value.line == 1 and exc.value.col > 10
    with pytest.raises(dsl.ParseError):
        dsl.parse_map("map(a,b)->(a, b$)")
    with pytest.raises(dsl.ParseError):
        dsl.parse_map("map(a,b)->(a, b) extra")
    with pytest.raises(dsl.ParseError) as exc2:
        dsl.parse_map("map(a,\nb)->(a,\n b +)")
    assert exc2.value.line == 3


def test_polynomial_algebra():
    x = dsl.Polynomial.variable(2, 0)
    y = dsl.Polynomial.variable(2, 1)
    p = (x + y) ** 2
    assert p == x * x + x * y * 2 + y * y
    assert p.partial(0) == x * 2 + y * 2
    assert p.partial(0).integrate(0) == x * x + x * y * 2
    q = p.subs([y, x])  # swap variables
    assert q == p
    assert (x * y).degree() == 2


def test_combinators_compile(h1):
    cm = maps.compile_map("compose(dilate(2), ltrans(1, 0, 0))", h1)
    pt = np.array([[0.5, 0.5, 0.25]])
    direct = G.dilate_np(h1, 2.0, G.bch_np(h1, np.array([1.0, 0, 0]), pt))
    assert np.allclose(cm(pt), direct)
    ch = A.complex_heisenberg(1)
    cj = maps.compile_map("conj()", ch)
    out = cj(np.array([[1.0, 2, 3, 4, 5, 6]]))
    assert np.allclose(out, [[1, -2, 3, -4, 5, -6]])
    with pytest.raises(maps.MapCompileError):
        maps.compile_map("conj()", h1)
    with pytest.raises(maps.MapCompileError):
        maps.compile_map("map(a,b)->(a,b)", h1)


def test_lift_symplectic_keyword(h1):
    cm = maps.compile_map("lift_symplectic(x^2)", h1)
    assert [str(p) for p in cm.polys] == \
        ["(1)*x1", "(1)*x2 + (1)*x1^2", "(1)*x3 + (-1/6)*x1^3"]
    with pytest.raises(dsl.ArityError):
        dsl.parse_map("lift_symplectic(x + y)")


def test_lift_shear_and_rotation_certificates():
    x, y = dsl.Polynomial.variable(2, 0), dsl.Polynomial.variable(2, 1)
    lift, cert = maps.lift_symplectomorphism([x, y + x ** 3], "R")
    assert cert.contact_exact
    c, s = Fraction(3, 5), Fraction(4, 5)
    liftr, certr = maps.lift_symplectomorphism([x * c - y * s, x * s + y * c], "R")
    assert certr.contact_exact
    # identity lifts with F = 0
    lifti, certi = maps.lift_symplectomorphism([x, y], "R")
    assert certi.central.is_zero()


def test_lift_rejects_non_symplectic():
    x, y = dsl.Polynomial.variable(2, 0), dsl.Polynomial.variable(2, 1)
    with pytest.raises(maps.SymplecticDefect) as exc:
        maps.lift_symplectomorphism([x * 2, y], "R")
    defect = exc.value.defect
    assert not defect[0][1].is_zero()  # phi^* omega - omega = omega


def test_lift_base_point():
    x, y = dsl.Polynomial.variable(2, 0), dsl.Polynomial.variable(2, 1)
    lift, cert = maps.lift_symplectomorphism([x, y + x ** 2], "R",
                                             base_point=[1, 0])
    assert cert.contact_exact
    # F vanishes at the base point
    assert cert.central.eval_exact([Fraction(1), Fraction(0)]) == 0


def test_complex_lift_certificate():
    z1, z2 = dsl.Polynomial.variable(2, 0), dsl.Polynomial.variable(2, 1)
    lift, cert = maps.lift_symplectomorphism([z1, z2 + z1 ** 2], "C")
    assert cert.contact_exact
    assert lift.domain.dim == 6


def test_product_map_layout(sum2h1, h1):
    f1 = maps.compile_map("lift_symplectic(x^2)", h1)
    f2 = maps.compile_map("map(a,b,c)->(a, b, c)", h1)
    pm = maps.product_map([f1, f2], sum2h1)
    pt = np.array([[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]])
    out = pm(pt)
    # factor 1 coordinates in layer-blocked layout: (0, 1, 4)
    f1pt = np.array([[0.1, 0.2, 0.5]])
    f1out = f1(f1pt)[0]
    assert out[0, 0] == pytest.approx(f1out[0])
    assert out[0, 1] == pytest.approx(f1out[1])
    assert out[0, 4] == pytest.approx(f1out[2])
    # factor 2 is the identity
    assert out[0, 2] == pytest.approx(0.3)
    assert out[0, 3] == pytest.approx(0.4)
    assert out[0, 5] == pytest.approx(0.6)


def test_vertical_mixing_contact_map_properties(h1):
    vm = maps.vertical_mixing_contact_map()
    # numerically verify f^* theta3 = (1 + a) theta3 at a sample point via the
    # frame Jacobian
    from carnot.pansu_lab.pansu import frame_jacobian_fd
    x = np.array([0.3, -0.2, 0.1])
    T = frame_jacobian_fd(vm, h1, h1, x)
    # theta3 row: f^*theta3 coefficients = T[2, :]; expected (0, 0, 1 + a)
    assert T[2, 0] == pytest.approx(0.0, abs=1e-6)
    assert T[2, 1] == pytest.approx(0.0, abs=1e-6)
    assert T[2, 2] == pytest.approx(1.3, abs=1e-6)
