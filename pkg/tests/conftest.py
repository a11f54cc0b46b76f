import random
from fractions import Fraction

import pytest

from carnot import algebra as A
from carnot import linalg
from carnot.scalars import GaussianRational


@pytest.fixture
def h1():
    return A.heisenberg(1)


@pytest.fixture
def h2():
    return A.heisenberg(2)


@pytest.fixture
def ch1():
    return A.complex_heisenberg(1)


@pytest.fixture
def sum2h1():
    return A.direct_sum([A.heisenberg(1)] * 2)


@pytest.fixture
def sum3h1():
    return A.direct_sum([A.heisenberg(1)] * 3)


@pytest.fixture
def diag3():
    return A.product_quotient("R", 1, 3, [[1, 1, 1]])


def filiform(step):
    """Model filiform algebra of the given step: [X1, Xj] = X_{j+1}, dim step+1."""
    br = {(0, j): {j + 1: Fraction(1)} for j in range(1, step)}
    return A.GradedLieAlgebra((2,) + (1,) * (step - 1), br, name=f"filiform({step})")


def rand_vec(g, rng, num=3, den=2):
    return [Fraction(rng.randint(-num, num), rng.randint(1, den))
            for _ in range(g.dim)]


def graded_basis_change(g, rng, bound=2):
    """A random invertible layer-respecting change of basis; returns the
    transformed algebra and the full change-of-basis matrix (new -> old)."""
    while True:
        blocks = []
        ok = True
        for d in g.layer_dims:
            m = [[Fraction(rng.randint(-bound, bound)) for _ in range(d)]
                 for _ in range(d)]
            if linalg.rank("Q", m) != d:
                ok = False
                break
            blocks.append(m)
        if ok:
            break
    full = linalg.zeros("Q", g.dim, g.dim)
    for li, blk in enumerate(blocks):
        off = g.layer_starts[li]
        for r in range(len(blk)):
            for c in range(len(blk)):
                full[off + r][off + c] = blk[r][c]
    inv = linalg.inverse("Q", full)
    br = {}
    for i in range(g.dim):
        for j in range(i + 1, g.dim):
            ei = [full[r][i] for r in range(g.dim)]
            ej = [full[r][j] for r in range(g.dim)]
            w = g.bracket(ei, ej)
            wk = linalg.mat_vec("Q", inv, w)
            entry = {k: c for k, c in enumerate(wk) if c}
            if entry:
                br[(i, j)] = entry
    return A.GradedLieAlgebra(g.layer_dims, br, scalar="Q", name=g.name + "'"), full


def symplectic_transvections(n_pairs, rng, count=3, tag="Q"):
    """Random element of Sp(2n) as a product of symplectic transvections,
    exact over Q (or Qi): x -> x + t * omega(x, v) * v."""
    dim = 2 * n_pairs

    def omega(u, w):
        acc = Fraction(0) if tag == "Q" else GaussianRational(0)
        for i in range(n_pairs):
            acc = acc + u[2 * i] * w[2 * i + 1] - u[2 * i + 1] * w[2 * i]
        return acc

    m = linalg.identity(tag, dim)
    for _ in range(count):
        if tag == "Q":
            v = [Fraction(rng.randint(-1, 1)) for _ in range(dim)]
            t = Fraction(rng.randint(-1, 1), rng.randint(1, 2))
        else:
            v = [GaussianRational(rng.randint(-1, 1), rng.randint(-1, 1))
                 for _ in range(dim)]
            t = GaussianRational(Fraction(rng.randint(-1, 1), rng.randint(1, 2)),
                                 Fraction(rng.randint(-1, 1), 2))
        if all(not x for x in v):
            continue
        cols = []
        for j in range(dim):
            e = [linalg.scalars.zero(tag)] * dim
            e[j] = linalg.scalars.one(tag)
            w = omega(e, v)
            cols.append([e[i] + t * w * v[i] for i in range(dim)])
        m = linalg.mat_mul(tag, linalg.transpose(cols), m)
    return m
