"""Dense linear algebra over the four scalar fields.

Matrices are lists of row lists.  Exact fields use fraction-free-ish Gaussian
elimination with exact pivot tests; float fields use an epsilon pivot test
(and numpy SVD for numerical rank).
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import scalars
from .scalars import DEFAULT_EPS

Matrix = List[List[object]]


def mat_copy(m: Sequence[Sequence]) -> Matrix:
    return [list(row) for row in m]


def zeros(tag: str, r: int, c: int) -> Matrix:
    z = scalars.zero(tag)
    return [[z] * c for _ in range(r)]


def identity(tag: str, n: int) -> Matrix:
    m = zeros(tag, n, n)
    o = scalars.one(tag)
    for i in range(n):
        m[i][i] = o
    return m


def mat_mul(tag: str, a: Sequence[Sequence], b: Sequence[Sequence]) -> Matrix:
    rows, inner, cols = len(a), len(b), len(b[0]) if b else 0
    z = scalars.zero(tag)
    out = [[z] * cols for _ in range(rows)]
    for i in range(rows):
        ai = a[i]
        oi = out[i]
        for k in range(inner):
            aik = ai[k]
            if scalars.is_exact(tag) and not aik:
                continue
            bk = b[k]
            for j in range(cols):
                oi[j] = oi[j] + aik * bk[j]
    return out


def mat_vec(tag: str, a: Sequence[Sequence], v: Sequence) -> list:
    z = scalars.zero(tag)
    out = [z] * len(a)
    for i, row in enumerate(a):
        acc = z
        for j, x in enumerate(row):
            if scalars.is_exact(tag) and not x:
                continue
            acc = acc + x * v[j]
        out[i] = acc
    return out


def transpose(m: Sequence[Sequence]) -> Matrix:
    return [list(col) for col in zip(*m)] if m else []


def _row_echelon(tag: str, m: Matrix, eps: float) -> Tuple[Matrix, List[int]]:
    """In-place forward elimination; returns (matrix, pivot column list)."""
    if not m:
        return m, []
    rows, cols = len(m), len(m[0])
    pivots = []
    r = 0
    for c in range(cols):
        # choose pivot
        best = None
        if scalars.is_exact(tag):
            for i in range(r, rows):
                if m[i][c]:
                    best = i
                    break
        else:
            mags = [(abs(m[i][c]), i) for i in range(r, rows)]
            if mags:
                mag, i = max(mags)
                if mag > eps:
                    best = i
        if best is None:
            continue
        m[r], m[best] = m[best], m[r]
        piv = m[r][c]
        inv = scalars.one(tag) / piv if scalars.is_exact(tag) else 1.0 / piv
        m[r] = [x * inv for x in m[r]]
        for i in range(rows):
            if i == r:
                continue
            f = m[i][c]
            if scalars.is_zero(tag, f, eps):
                continue
            m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def rref(tag: str, m: Sequence[Sequence], eps: float = DEFAULT_EPS) -> Tuple[Matrix, List[int]]:
    return _row_echelon(tag, mat_copy(m), eps)


def rank(tag: str, m: Sequence[Sequence], eps: float = DEFAULT_EPS) -> int:
    if not m or not m[0]:
        return 0
    if not scalars.is_exact(tag):
        arr = np.array([[scalars.to_float(x) for x in row] for row in m],
                       dtype=complex if tag == "c64" else float)
        if arr.size == 0:
            return 0
        s = np.linalg.svd(arr, compute_uv=False)
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > eps * s[0]))
    _, pivots = rref(tag, m, eps)
    return len(pivots)


def kernel_basis(tag: str, m: Sequence[Sequence], ncols: Optional[int] = None,
                 eps: float = DEFAULT_EPS) -> List[list]:
    """Basis of the right kernel {v : m v = 0}."""
    if ncols is None:
        ncols = len(m[0]) if m else 0
    if not m:
        return [ [scalars.one(tag) if i == j else scalars.zero(tag) for i in range(ncols)]
                 for j in range(ncols) ]
    red, pivots = rref(tag, m, eps)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [scalars.zero(tag)] * ncols
        v[fc] = scalars.one(tag)
        for r, pc in enumerate(pivots):
            v[pc] = -red[r][fc]
        basis.append(v)
    return basis


def solve(tag: str, a: Sequence[Sequence], b: Sequence, eps: float = DEFAULT_EPS):
    """One solution of a x = b, or None if inconsistent."""
    rows = len(a)
    cols = len(a[0]) if rows else 0
    aug = [list(a[i]) + [b[i]] for i in range(rows)]
    red, pivots = _row_echelon(tag, aug, eps)
    for r in range(len(pivots), rows):
        if not scalars.is_zero(tag, red[r][cols], eps):
            return None
    x = [scalars.zero(tag)] * cols
    for r, pc in enumerate(pivots):
        if pc == cols:
            return None
        x[pc] = red[r][cols]
    return x


def det(tag: str, m: Sequence[Sequence]):
    n = len(m)
    if n == 0:
        return scalars.one(tag)
    a = mat_copy(m)
    d = scalars.one(tag)
    for c in range(n):
        piv = None
        for r in range(c, n):
            if not scalars.is_zero(tag, a[r][c], 0.0 if scalars.is_exact(tag) else 1e-300):
                piv = r
                break
        if piv is None:
            return scalars.zero(tag)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            d = -d
        d = d * a[c][c]
        inv = scalars.one(tag) / a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] * inv
            if scalars.is_exact(tag) and not f:
                continue
            a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return d


def inverse(tag: str, m: Sequence[Sequence], eps: float = DEFAULT_EPS) -> Optional[Matrix]:
    n = len(m)
    aug = [list(m[i]) + list(identity(tag, n)[i]) for i in range(n)]
    red, pivots = _row_echelon(tag, aug, eps)
    if pivots != list(range(n)):
        return None
    return [row[n:] for row in red]


def span_contains(tag: str, basis: Sequence[Sequence], v: Sequence,
                  eps: float = DEFAULT_EPS) -> bool:
    if not basis:
        return all(scalars.is_zero(tag, x, eps) for x in v)
    a = transpose(basis)
    return solve(tag, a, list(v), eps) is not None


def same_span(tag: str, b1: Sequence[Sequence], b2: Sequence[Sequence],
              eps: float = DEFAULT_EPS) -> bool:
    r1 = rank(tag, list(b1), eps)
    r2 = rank(tag, list(b2), eps)
    if r1 != r2:
        return False
    return rank(tag, list(b1) + list(b2), eps) == r1


def intersect_spans(tag: str, b1: Sequence[Sequence], b2: Sequence[Sequence],
                    dim: int, eps: float = DEFAULT_EPS) -> List[list]:
    """Basis of span(b1) meet span(b2) in ambient dimension dim."""
    if not b1 or not b2:
        return []
    # Zassenhaus: kernel of [b1^T b2^T] stacked as columns
    cols = len(b1) + len(b2)
    m = [[scalars.zero(tag)] * cols for _ in range(dim)]
    for j, v in enumerate(b1):
        for i in range(dim):
            m[i][j] = v[i]
    for j, v in enumerate(b2):
        for i in range(dim):
            m[i][len(b1) + j] = -v[i]
    ker = kernel_basis(tag, m, cols, eps)
    out = []
    for k in ker:
        vec = [scalars.zero(tag)] * dim
        for j, v in enumerate(b1):
            c = k[j]
            if scalars.is_zero(tag, c, eps):
                continue
            vec = [x + c * y for x, y in zip(vec, v)]
        if any(not scalars.is_zero(tag, x, eps) for x in vec):
            out.append(vec)
    # prune to independent set
    return _independent_subset(tag, out, eps)


def _independent_subset(tag: str, vecs: List[list], eps: float) -> List[list]:
    picked: List[list] = []
    for v in vecs:
        if rank(tag, picked + [v], eps) > len(picked):
            picked.append(v)
    return picked


def gram_schmidt_orthogonal(tag: str, vecs: Sequence[Sequence]) -> List[list]:
    """Orthogonal (not normalized) basis wrt the standard dot product.

    Exact over Q/Qi (conjugate-linear in the first slot for Qi), so no square
    roots are introduced.
    """
    out: List[list] = []
    for v in vecs:
        w = list(v)
        for u in out:
            num = _dot(tag, u, w)
            den = _dot(tag, u, u)
            f = num / den
            w = [a - f * b for a, b in zip(w, u)]
        if any(not scalars.is_zero(tag, x) for x in w):
            out.append(w)
    return out


def _dot(tag: str, u: Sequence, v: Sequence):
    acc = scalars.zero(tag)
    for a, b in zip(u, v):
        acc = acc + scalars.conj(tag, a) * b
    return acc


def complement_basis(tag: str, basis: Sequence[Sequence], dim: int,
                     eps: float = DEFAULT_EPS) -> List[list]:
    """Coordinate vectors extending `basis` to a basis of the ambient space."""
    cur = [list(v) for v in basis]
    out = []
    for i in range(dim):
        e = [scalars.zero(tag)] * dim
        e[i] = scalars.one(tag)
        if rank(tag, cur + [e], eps) > len(cur):
            cur.append(e)
            out.append(e)
    return out


def to_numpy(m: Sequence[Sequence], tag: str) -> np.ndarray:
    dt = complex if tag in ("Qi", "c64") else float
    return np.array([[scalars.to_float(x) for x in row] for row in m], dtype=dt)
