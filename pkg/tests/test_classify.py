import random
from fractions import Fraction

import pytest

from carnot import algebra as A
from carnot import classify as C
from carnot import linalg

from conftest import filiform, graded_basis_change


def test_rank_search_families(h1, ch1):
    res = C.rank_le1_search(h1, "R")
    assert res.found is not None and res.found.rank <= 1
    resc = C.rank_le1_search(ch1, "C")
    assert resc.found is not None and resc.found.rank <= 1
    # free_step2(3) over C: every nonzero element has rank 2
    f3 = A.free_step2(3)
    r3 = C.rank_le1_search(f3, "C", starts=4)
    assert r3.found is None and r3.inconclusive


def test_rank_search_verifies_witnesses(sum3h1):
    res = C.rank_le1_search(sum3h1, "R")
    assert res.found is not None
    assert A.adjoint_rank(sum3h1, res.found.vector) <= 1


def test_recognize_heisenberg_shuffled(h2):
    rng = random.Random(20)
    for _ in range(5):
        g, _ = graded_basis_change(h2, rng)
        rec = C.recognize_heisenberg(g)
        assert rec.success and rec.m == 2
        assert isinstance(rec.iso, object)
        # iso validates as a graded hom onto g
        from carnot.homs import validate_hom
        assert validate_hom(rec.iso) is None


def test_recognize_heisenberg_failures():
    # central line added to V1: degenerate form -> witness
    g = A.GradedLieAlgebra((3, 1), {(0, 1): {3: Fraction(-1)}})
    rec = C.recognize_heisenberg(g)
    assert not rec.success
    assert rec.central_witness is not None
    # odd-dimensional V1 cannot carry a nondegenerate skew form
    g2 = A.GradedLieAlgebra((3, 1), {(0, 1): {3: Fraction(-1)},
                                     (0, 2): {3: Fraction(1)}})
    assert not C.recognize_heisenberg(g2).success
    with pytest.raises(C.ClassifyError):
        C.recognize_heisenberg(A.free_step2(3))


def test_step2_decompose_examples(h2, sum3h1):
    dec = C.step2_decompose(sum3h1)
    assert len(dec.factors) == 3 and dec.field == "R"
    dec2 = C.step2_decompose(h2)
    assert len(dec2.factors) == 1 and dec2.factors[0]["m"] == 2
    # the n=2 diagonal quotient is graded isomorphic to heisenberg(2), so the
    # unique decomposition has a single factor with m = 2
    q2 = A.central_quotient(A.direct_sum([A.heisenberg(1)] * 2), [[1, 1]])
    dec3 = C.step2_decompose(q2.algebra)
    assert len(dec3.factors) == 1 and dec3.factors[0]["m"] == 2
    # the n=3 diagonal quotient keeps three distinct factors
    pq3 = A.product_quotient("R", 1, 3, [[1, 1, 1]])
    dec4 = C.step2_decompose(pq3.algebra)
    assert len(dec4.factors) == 3 and all(f["m"] == 1 for f in dec4.factors)


def test_step2_decompose_invariance_under_basis_change(sum3h1):
    rng = random.Random(21)
    canonical = [set(range(2 * f, 2 * f + 2)) for f in range(3)]
    for _ in range(6):
        g, full = graded_basis_change(sum3h1, rng)
        dec = C.step2_decompose(g)
        assert len(dec.factors) == 3
        # map recovered first layers back through the basis change and compare
        # to the canonical factor planes
        recovered = []
        for f in dec.factors:
            vecs = [linalg.mat_vec("Q", full, v) for v in f["first_layer"]]
            v1 = [[v[i] for i in range(6)] for v in vecs]
            recovered.append(v1)
        matched = 0
        for plane in recovered:
            for fidx in range(3):
                basis = [[Fraction(1 if i == 2 * fidx else 0) for i in range(6)],
                         [Fraction(1 if i == 2 * fidx + 1 else 0) for i in range(6)]]
                if linalg.same_span("Q", plane, basis):
                    matched += 1
        assert matched == 3


def test_step2_decompose_rejects_rank0():
    g = A.GradedLieAlgebra((3, 1), {(0, 1): {3: Fraction(-1)}})
    with pytest.raises(C.ClassifyError):
        C.step2_decompose(g)


def test_trichotomy_cases(h1, diag3):
    assert C.structure_trichotomy(A.abelian(5)).verdict == "abelian"
    rep = C.structure_trichotomy(diag3.algebra)
    assert rep.verdict == "heisenberg-like"
    assert (rep.field, rep.m, rep.n) == ("R", 1, 3)
    repf = C.structure_trichotomy(filiform(3))
    assert repf.verdict == "invariant-subspace"
    # W = span(X2), commutes with higher layers
    assert repf.certificates.get("W_commutes_with_higher_layers") is True
    W = repf.W_basis
    assert len(W) == 1 and W[0][0] == 0
    # free_step2(3) stays inconclusive (it is rigid)
    assert C.structure_trichotomy(A.free_step2(3)).verdict == "inconclusive"


def test_trichotomy_complex_case():
    pqc = A.product_quotient("C", 1, 2, [[1, 0, 1, 0]])
    assert pqc.certificate.valid
    rep = C.structure_trichotomy(pqc.algebra)
    assert rep.verdict == "heisenberg-like"
    assert (rep.field, rep.n, rep.m) == ("C", 2, 1)


def test_finest_partition_examples():
    pq = A.product_quotient("R", 1, 3, [[1, 1, 1]])
    assert C.finest_partition(pq).blocks == [[1, 2, 3]]
    pq2 = A.product_quotient("R", 1, 3, [[1, 1, 0]])
    assert C.finest_partition(pq2).blocks == [[1, 2], [3]]
    pq3 = A.product_quotient("R", 1, 4, [[1, 1, 0, 0], [0, 0, 1, 1]])
    assert C.finest_partition(pq3).blocks == [[1, 2], [3, 4]]


def test_finest_partition_matches_bruteforce_random():
    rng = random.Random(22)
    cases = 0
    while cases < 12:
        n = rng.randint(2, 6)
        dimk = rng.randint(1, n - 1)
        K = [[Fraction(rng.randint(-2, 2)) for _ in range(n)] for _ in range(dimk)]
        K = linalg._independent_subset("Q", [v for v in K if any(v)], 1e-9)
        if not K:
            continue
        try:
            pq = A.product_quotient("R", 1, n, K)
        except A.StructuralError:
            continue
        assert C.finest_partition(pq).blocks == \
            C.brute_force_finest_partition(pq).blocks
        cases += 1


def test_conformal_normalize():
    pq = A.product_quotient("R", 1, 2, [[2, 1]])
    b = [[Fraction(4), 0], [0, Fraction(1)]]
    res = C.conformal_normalize(pq, b)
    assert res.exact
    assert res.mu == [Fraction(2), Fraction(1)]
    assert res.normalized.K_basis == [[Fraction(1), Fraction(1)]]
    # already standard: identity dilation
    pq2 = A.product_quotient("R", 1, 2, [[1, 1]])
    res2 = C.conformal_normalize(pq2, linalg.identity("Q", 2))
    assert res2.mu == [Fraction(1), Fraction(1)]
    with pytest.raises(C.ClassifyError):
        C.conformal_normalize(pq2, [[Fraction(-1), 0], [0, Fraction(1)]])
    # non-square diagonal falls back to floats with a warning
    res3 = C.conformal_normalize(pq2, [[Fraction(2), 0], [0, Fraction(1)]])
    assert not res3.exact and res3.warnings


def test_monomial_stabilizer_examples(diag3):
    ms = C.monomial_stabilizer(diag3)
    # all 6 permutations with S = I, and all with S = -I
    assert len(ms.elements) == 12
    plain_sign_perms = {p for p, s in ms.elements if s == (1, 1, 1)}
    assert len(plain_sign_perms) == 6
    assert ms.orbit_partition.blocks == [[1, 2, 3]]
    assert ms.orbit_projection_dims == [1]
    pq = A.product_quotient("R", 1, 2, [[1, -1]])
    ms2 = C.monomial_stabilizer(pq)
    assert sorted(ms2.elements) == [((0, 1), (-1, -1)), ((0, 1), (1, 1)),
                                    ((1, 0), (-1, -1)), ((1, 0), (1, 1))]


def test_monomial_stabilizer_lifts_validate(diag3):
    from carnot.homs import validate_hom
    ms = C.monomial_stabilizer(diag3)
    for perm, signs in ms.elements:
        phi = C.monomial_hom(diag3, perm, signs)
        assert validate_hom(phi) is None


def test_trichotomy_roundtrip_on_builtin_quotients():
    # valid product quotients round-trip their construction data
    for field, m, n, K in (("R", 1, 3, A.diagonal_K(3)),
                           ("R", 2, 3, A.diagonal_K(3)),
                           ("R", 1, 4, [[1, 1, 1, 1], [0, 1, 2, 3]])):
        pq = A.product_quotient(field, m, n, K)
        assert pq.certificate.valid
        rep = C.structure_trichotomy(pq.algebra)
        assert rep.verdict == "heisenberg-like"
        assert (rep.field, rep.m, rep.n) == (field, m, n)
    # the two-plane quotient is really a sum of two second Heisenberg algebras
    # (each diagonal pair collapses), and the decomposition sees through it
    pq2 = A.product_quotient("R", 1, 4, [[1, 1, 0, 0], [0, 0, 1, 1]])
    assert not pq2.certificate.cond_b
    rep2 = C.structure_trichotomy(pq2.algebra)
    assert (rep2.field, rep2.m, rep2.n) == ("R", 2, 2)


def test_stabilizer_lifts_descend_to_quotient_automorphisms(diag3):
    from carnot import linalg as L
    from carnot.homs import GradedHom, validate_hom
    ms = C.monomial_stabilizer(diag3)
    quo = diag3.quotient
    sec = L.transpose(quo.section)
    for perm, signs in ms.elements:
        phi = C.monomial_hom(diag3, perm, signs)
        PB = L.mat_mul("Q", quo.projection, L.mat_mul("Q", phi.blocks[1], sec))
        q = GradedHom(diag3.algebra, diag3.algebra, [phi.blocks[0], PB])
        assert validate_hom(q) is None
        assert q.det() != 0
