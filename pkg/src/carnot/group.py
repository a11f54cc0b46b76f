"""Group law and homogeneous geometry in exponential coordinates of the first kind.

A group point is just its coordinate vector in the graded basis; Haar measure
is Lebesgue measure in these coordinates.  The BCH product is evaluated from an
exactly precomputed word table (Dynkin-Specht-Wever form), truncated at the
algebra's step; steps above 6 are rejected.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import scalars
from .algebra import GradedLieAlgebra, StructuralError, UnsupportedStepError

MAX_STEP = 6


@lru_cache(maxsize=None)
def bch_word_table(max_len: int) -> Tuple[Tuple[Tuple[int, ...], Fraction], ...]:
    """Coefficients c_w of log(e^x e^y) on words w in {0:x, 1:y}, divided by |w|.

    Evaluating sum_w (c_w/|w|) [w_1,[w_2,[...,w_k]...]] gives the BCH series
    (Dynkin-Specht-Wever projection).  Exact rational arithmetic throughout.
    """
    if max_len > MAX_STEP:
        raise UnsupportedStepError(f"BCH table capped at step {MAX_STEP}")

    def word_coeff(w: Tuple[int, ...]) -> Fraction:
        L = len(w)
        total = Fraction(0)
        # split positions: each subset of the L-1 gaps
        for split_bits in range(1 << (L - 1)):
            cuts = [0]
            for p in range(L - 1):
                if split_bits >> p & 1:
                    cuts.append(p + 1)
            cuts.append(L)
            blocks = [w[cuts[t]:cuts[t + 1]] for t in range(len(cuts) - 1)]
            term = Fraction(1)
            ok = True
            for b in blocks:
                # block must be x^i y^j, (i, j) != (0, 0)
                i = 0
                while i < len(b) and b[i] == 0:
                    i += 1
                if any(ch == 0 for ch in b[i:]):
                    ok = False
                    break
                j = len(b) - i
                term /= factorial(i) * factorial(j)
            if not ok:
                continue
            mlen = len(blocks)
            total += Fraction((-1) ** (mlen + 1), mlen) * term
        return total

    out = []
    for L in range(1, max_len + 1):
        for w in itertools.product((0, 1), repeat=L):
            c = word_coeff(w)
            if c:
                out.append((w, c / L))
    return tuple(out)


def _nested_bracket(g: GradedLieAlgebra, word: Sequence[int], x, y):
    """[w1, [w2, [..., wk]...]] evaluated on concrete vectors."""
    pick = (x, y)
    acc = pick[word[-1]]
    for idx in reversed(word[:-1]):
        acc = g.bracket(pick[idx], acc)
    return acc


def bch_multiply(g: GradedLieAlgebra, x: Sequence, y: Sequence) -> list:
    """log(exp x * exp y) truncated at the algebra's step, exact coefficients."""
    if g.step > MAX_STEP:
        raise UnsupportedStepError(f"step {g.step} > {MAX_STEP} not supported")
    x = g.coerce_vector(x)
    y = g.coerce_vector(y)
    if g.step == 1:
        return [a + b for a, b in zip(x, y)]
    if g.step == 2:
        w = g.bracket(x, y)
        half = scalars.coerce(g.scalar, Fraction(1, 2))
        return [a + b + half * c for a, b, c in zip(x, y, w)]
    out = [a + b for a, b in zip(x, y)]
    for word, coeff in bch_word_table(g.step):
        if len(word) < 2:
            continue
        v = _nested_bracket(g, word, x, y)
        c = scalars.coerce(g.scalar, coeff) if scalars.is_exact(g.scalar) else float(coeff)
        out = [a + c * b for a, b in zip(out, v)]
    return out


def invert(g: GradedLieAlgebra, x: Sequence) -> list:
    return [-a for a in g.coerce_vector(x)]


def dilate(g: GradedLieAlgebra, r, x: Sequence) -> list:
    """Carnot dilation: layer j scales by r^j."""
    if scalars.to_float(r) <= 0:
        raise StructuralError("dilation factor must be positive")
    x = g.coerce_vector(x)
    rr = scalars.coerce(g.scalar, r) if scalars.is_exact(g.scalar) else float(r)
    return [x[i] * rr ** g.layer_of[i] for i in range(g.dim)]


def left_translate(g: GradedLieAlgebra, h: Sequence, x: Sequence) -> list:
    return bch_multiply(g, h, x)


def quasinorm(g: GradedLieAlgebra, x: Sequence) -> float:
    """max_j |x_j|^(1/j) with the Euclidean norm on each layer block."""
    best = 0.0
    for j in range(1, g.step + 1):
        block = [scalars.to_float(x[i]) for i in g.layer_indices(j)]
        nrm = float(np.linalg.norm(np.asarray(block, dtype=complex if g.scalar in ("Qi", "c64") else float)))
        if nrm > 0:
            best = max(best, nrm ** (1.0 / j))
    return best


# -- numpy-vectorized group ops (float, hot paths) ----------------------------


def bracket_np(g: GradedLieAlgebra, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized bracket on arrays of shape (..., N)."""
    out = np.zeros(np.broadcast(a, b).shape, dtype=np.result_type(a, b, float))
    for (i, j), terms in g.table.items():
        if i > j:
            continue
        ci = a[..., i] * b[..., j] - a[..., j] * b[..., i]
        for k, c in terms.items():
            out[..., k] += float(scalars.to_float(c).real if isinstance(scalars.to_float(c), complex) else scalars.to_float(c)) * ci
    return out


def bch_np(g: GradedLieAlgebra, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized BCH product on arrays of shape (..., N)."""
    if g.step == 1:
        return x + y
    if g.step == 2:
        return x + y + 0.5 * bracket_np(g, x, y)
    out = x + y
    for word, coeff in bch_word_table(g.step):
        if len(word) < 2:
            continue
        pick = (x, y)
        acc = pick[word[-1]]
        for idx in reversed(word[:-1]):
            acc = bracket_np(g, pick[idx], acc)
        out = out + float(coeff) * acc
    return out


def dilate_np(g: GradedLieAlgebra, r: float, x: np.ndarray) -> np.ndarray:
    w = np.array([float(r) ** j for j in g.layer_of])
    return x * w


def quasinorm_np(g: GradedLieAlgebra, x: np.ndarray) -> np.ndarray:
    best = np.zeros(x.shape[:-1])
    for j in range(1, g.step + 1):
        idx = list(g.layer_indices(j))
        nrm = np.linalg.norm(x[..., idx], axis=-1)
        best = np.maximum(best, nrm ** (1.0 / j))
    return best


# -- lattices ------------------------------------------------------------------


class Lattice:
    """Uniform midpoint lattice over a coordinate box, streamable in chunks."""

    def __init__(self, g: GradedLieAlgebra, center: Sequence[float],
                 radius, resolution):
        if g.dim != len(center):
            raise StructuralError("center has wrong dimension")
        res = np.broadcast_to(np.asarray(resolution, dtype=int), (g.dim,)).copy()
        if np.any(res < 2):
            raise StructuralError("resolution must be >= 2 per axis")
        rad = np.broadcast_to(np.asarray(radius, dtype=float), (g.dim,)).copy()
        self.algebra = g
        self.center = np.asarray(center, dtype=float)
        self.radius = rad
        self.resolution = res
        self.spacing = 2.0 * rad / res
        self.cell_volume = float(np.prod(self.spacing))
        self.size = int(np.prod(res))

    def axis_coords(self, i: int) -> np.ndarray:
        lo = self.center[i] - self.radius[i]
        return lo + (np.arange(self.resolution[i]) + 0.5) * self.spacing[i]

    def points(self) -> np.ndarray:
        """All lattice points, shape (size, N).  Prefer chunks() at scale."""
        axes = [self.axis_coords(i) for i in range(self.algebra.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def chunks(self, chunk_size: int = 1 << 18):
        """Yield point blocks of shape (<=chunk_size, N) in a fixed order."""
        res = self.resolution
        n = self.algebra.dim
        axes = [self.axis_coords(i) for i in range(n)]
        strides = np.ones(n, dtype=np.int64)
        for i in range(n - 2, -1, -1):
            strides[i] = strides[i + 1] * res[i + 1]
        for start in range(0, self.size, chunk_size):
            stop = min(start + chunk_size, self.size)
            flat = np.arange(start, stop, dtype=np.int64)
            pts = np.empty((stop - start, n))
            rem = flat
            for i in range(n):
                idx = rem // strides[i]
                rem = rem - idx * strides[i]
                pts[:, i] = axes[i][idx]
            yield pts


def sample_box(g: GradedLieAlgebra, center: Sequence[float], radius,
               resolution) -> Lattice:
    return Lattice(g, center, radius, resolution)
