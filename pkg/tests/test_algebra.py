import random
from fractions import Fraction

import pytest

from carnot import algebra as A
from carnot import linalg
from carnot.scalars import GaussianRational

from conftest import filiform, rand_vec


def test_constructed_algebras_validate():
    for g in (A.heisenberg(1), A.heisenberg(3), A.abelian(4), A.free_step2(3),
              A.complex_heisenberg(1), A.complex_heisenberg(2),
              A.direct_sum([A.heisenberg(1)] * 3), filiform(3)):
        assert A.validate_algebra(g).valid, g.name


def test_heisenberg_dims_and_nu():
    h1 = A.heisenberg(1)
    assert h1.dim == 3 and h1.nu == 4
    assert A.free_step2(3).nu == 9
    s = A.direct_sum([A.heisenberg(1)] * 2)
    assert s.dim == 6 and s.nu == 8
    # complexification doubles both dimensions
    ch = A.complex_heisenberg(2)
    assert ch.dim == 2 * (2 * 2 + 1)
    assert ch.nu == 2 * (2 * 2 + 2)


def test_antisymmetry_witness():
    # flip c_12^3 on one side only
    g = A.heisenberg(1)
    br = {(0, 1): {2: Fraction(-1)}, (1, 0): {2: Fraction(-1)}}
    bad = A.GradedLieAlgebra((2, 1), br, name="broken")
    rep = A.validate_algebra(bad)
    wits = [f.witness for f in rep.by_axiom("antisymmetry")]
    assert (1, 2, 3) in wits


def test_grading_and_generation_failures():
    # [X1, X2] = X1 breaks grading
    g = A.GradedLieAlgebra((2, 1), {(0, 1): {0: 1}})
    rep = A.validate_algebra(g)
    assert rep.by_axiom("grading")
    # V2 not generated: no brackets at all but two layers
    g2 = A.GradedLieAlgebra((2, 1), {})
    rep2 = A.validate_algebra(g2)
    assert rep2.by_axiom("generation")


def test_malformed_indices_raise_structural_error():
    with pytest.raises(A.StructuralError):
        A.GradedLieAlgebra((2, 1), {(0, 5): {2: 1}})
    with pytest.raises(A.StructuralError):
        A.GradedLieAlgebra((2, 1), {(0, 1): {9: 1}})


def test_bracket_examples(h1, h2):
    assert h1.bracket(h1.basis_vector(0), h1.basis_vector(1)) == \
        [Fraction(0), Fraction(0), Fraction(-1)]
    x = rand_vec(h1, random.Random(1))
    assert all(c == 0 for c in h1.bracket(x, x))
    # H2: [X1, X4] = 0 (not a symplectic pair)
    assert all(c == 0 for c in h2.bracket(h2.basis_vector(0), h2.basis_vector(3)))
    with pytest.raises(A.StructuralError):
        h1.bracket([1, 2], [0, 0, 0])


def test_bracket_bilinearity_random(h1, sum3h1):
    rng = random.Random(7)
    for g in (h1, sum3h1):
        for _ in range(200):
            a, b, c = (rand_vec(g, rng) for _ in range(3))
            s = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
            lhs = g.bracket([s * ai + bi for ai, bi in zip(a, b)], c)
            rhs = [s * x + y for x, y in
                   zip(g.bracket(a, c), g.bracket(b, c))]
            assert lhs == rhs


def test_jacobi_and_antisymmetry_random_samples(h2, ch1):
    rng = random.Random(3)
    for g in (h2, ch1):
        for _ in range(1000):
            a, b, c = (rand_vec(g, rng, num=2, den=2) for _ in range(3))
            ab = g.bracket(a, b)
            ba = g.bracket(b, a)
            assert all(x == -y for x, y in zip(ab, ba))
            jac = [x + y + z for x, y, z in zip(
                g.bracket(ab, c), g.bracket(g.bracket(b, c), a),
                g.bracket(g.bracket(c, a), b))]
            assert all(x == 0 for x in jac)


def test_adjoint_rank_examples(h1, h2):
    assert A.adjoint_rank(h1, h1.basis_vector(0)) == 1
    ab = A.abelian(4)
    assert A.adjoint_rank(ab, ab.basis_vector(2)) == 0
    # H2: rank(X1 + X3) = 1 (image is the center line)
    v = h2.zero_vector()
    v[0] = Fraction(1)
    v[2] = Fraction(1)
    assert A.adjoint_rank(h2, v) == 1


def test_complex_heisenberg_ranks(ch1):
    rng = random.Random(11)
    cx = A.complexify(ch1)
    gc = cx.algebra
    # any nonzero first-layer element of g^C_{+-i} has C-rank 1
    for basis in (cx.plus_basis, cx.minus_basis):
        first = [v for v in basis
                 if any(v[i] for i in gc.layer_indices(1))]
        for _ in range(5):
            coef = [GaussianRational(rng.randint(-2, 2), rng.randint(-2, 2))
                    for _ in first]
            if all(not c for c in coef):
                continue
            z = gc.zero_vector()
            for c, v in zip(coef, first):
                z = [zi + c * vi for zi, vi in zip(z, v)]
            if all(not x for x in z):
                continue
            assert linalg.rank("Qi", gc.ad_matrix(z)) <= 1
    # real nonzero first-layer elements have real rank 2
    for _ in range(10):
        v = ch1.zero_vector()
        for i in ch1.layer_indices(1):
            v[i] = Fraction(rng.randint(-2, 2))
        if all(not x for x in v):
            continue
        assert A.adjoint_rank(ch1, v) == 2


def test_complexify_splitting_certificate(ch1):
    cx = A.complexify(ch1)
    assert cx.commute_certificate is True
    assert len(cx.plus_basis) == len(cx.minus_basis) == 3
    # conjugation swaps the split bases
    for v in cx.plus_basis:
        w = [c.conjugate() for c in v]
        assert linalg.span_contains("Qi", cx.minus_basis, w)


def test_complexify_restriction_roundtrip(h2):
    gc = A.complexify(h2).algebra
    for (i, j), terms in h2.table.items():
        ct = gc.table.get((i, j), {})
        assert {k: GaussianRational(c) for k, c in terms.items()} == ct


def test_complexify_rejects_bad_J(h1):
    J = [[0, -1, 0], [1, 0, 0], [0, 0, 1]]  # J^2 != -id on center; not algebra map
    g = A.GradedLieAlgebra((2, 1), {(0, 1): {2: Fraction(-1)}}, J=J)
    with pytest.raises(A.StructuralError):
        A.complexify(g)


def test_central_quotient_examples(sum3h1):
    # K = 0: isomorphic copy
    q0 = A.central_quotient(sum3h1, [])
    assert q0.algebra.layer_dims == sum3h1.layer_dims
    # diagonal: N = 8, nu = 10
    q = A.central_quotient(sum3h1, [[1, 1, 1]])
    assert q.algebra.dim == 8 and q.algebra.nu == 10
    assert A.validate_algebra(q.algebra).valid
    with pytest.raises(A.StructuralError):
        A.central_quotient(sum3h1, [[1, 0, 0, 0, 0, 0, 1, 0, 0]])  # not inside V2


def test_nonexample_quotient_is_h2c():
    """The complex-diagonal quotient of two complex Heisenberg factors is
    graded isomorphic to the second complex Heisenberg algebra."""
    from carnot.classify import recognize_heisenberg
    parent = A.direct_sum([A.complex_heisenberg(1)] * 2)
    K = A.diagonal_K(2, d2=2)
    quo = A.central_quotient(parent, K).algebra
    assert quo.layer_dims == (8, 2)
    assert A.validate_algebra(quo).valid
    # complexified quotient splits into two h2-over-C copies; verify one
    cx = A.complexify(quo)
    assert cx.algebra.dim == 10


def test_check_product_quotient_conditions():
    diag = A.product_quotient("R", 1, 3, [[1, 1, 1]])
    assert diag.certificate.cond_a and diag.certificate.cond_b
    bad = A.check_product_quotient(A.direct_sum([A.complex_heisenberg(1)] * 2),
                                   A.diagonal_K(2, d2=2))
    assert bad.cond_a and not bad.cond_b
    # whole factor second layer violates (a)
    whole = A.check_product_quotient(A.direct_sum([A.heisenberg(1)] * 3),
                                     [[1, 0, 0]])
    assert not whole.cond_a
    assert whole.witnesses["cond_a"][0] == 1
    with pytest.raises(A.StructuralError):
        A.check_product_quotient(A.direct_sum([A.heisenberg(1), A.heisenberg(2)]),
                                 [[1, 1]])


def test_certificate_invariant_under_anisotropic_rescaling():
    rng = random.Random(5)
    for _ in range(5):
        K = [[Fraction(rng.randint(-2, 2)) for _ in range(3)] for _ in range(1)]
        if not any(any(v) for v in K):
            continue
        base = A.check_product_quotient(A.direct_sum([A.heisenberg(1)] * 3), K)
        mu = [Fraction(rng.randint(1, 4)) for _ in range(3)]
        scaled = [[mu[i] * v[i] for i in range(3)] for v in K]
        res = A.check_product_quotient(A.direct_sum([A.heisenberg(1)] * 3), scaled)
        assert (base.cond_a, base.cond_b) == (res.cond_a, res.cond_b)
