"""Numerical Pansu differentials from horizontal finite differences.

The first-layer block of D_P f(x) is estimated by central differences of
f_{x,r} along horizontal directions over a geometric radii ladder, then
extended algebraically to a graded homomorphism (V1 generates, so this is the
well-conditioned route).  Everything is numpy-vectorized over point sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .. import group, linalg, scalars
from ..algebra import GradedLieAlgebra
from ..homs import GradedHom, IncompatibilityWitness, extend_first_layer

DEFAULT_RADII = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
EXTENSION_TOL = 1e-4


class NonContactError(RuntimeError):
    """The first-layer estimate does not extend to a graded homomorphism."""


@dataclass
class PansuDiagnostics:
    radii: Tuple[float, ...]
    cauchy_deltas: List[float]
    chosen_level: int
    vertical_drift: float = 0.0


def _first_layer_blocks(f, g: GradedLieAlgebra, gp: GradedLieAlgebra,
                        pts: np.ndarray, r: float) -> Tuple[np.ndarray, np.ndarray]:
    """Central-difference estimate of the V1 block at every point.

    Returns (blocks (M, n1', n1), vertical (M,)): `vertical` is the magnitude
    of the non-horizontal component of the frame derivative along horizontal
    probes; it vanishes (to O(r)) exactly for contact maps, so a large value
    flags non-Pansu-differentiable behavior that the first layer alone cannot
    see.
    """
    n1 = g.layer_dims[0]
    n1p = gp.layer_dims[0]
    M = len(pts)
    out = np.empty((M, n1p, n1))
    vert = np.zeros(M)
    higher = [i for i in range(gp.dim)
              if i < gp.layer_starts[0] or i >= gp.layer_starts[0] + n1p]
    for j in range(n1):
        e = np.zeros(g.dim)
        e[g.layer_starts[0] + j] = r
        plus = f(group.bch_np(g, pts, e[None, :]))
        minus = f(group.bch_np(g, pts, -e[None, :]))
        # first-layer part of log(f(x-)^{-1} f(x+)) is the plain difference
        d = (plus[:, gp.layer_starts[0]:gp.layer_starts[0] + n1p]
             - minus[:, gp.layer_starts[0]:gp.layer_starts[0] + n1p])
        out[:, :, j] = d / (2.0 * r)
        if higher:
            full = group.bch_np(gp, -minus, plus)
            vert = np.maximum(vert, np.max(np.abs(full[:, higher]), axis=-1) / (2.0 * r))
    return out, vert


def pansu_differential(f, g: GradedLieAlgebra, x: Sequence,
                       radii: Sequence[float] = DEFAULT_RADII,
                       codomain: Optional[GradedLieAlgebra] = None,
                       extension_tol: float = EXTENSION_TOL
                       ) -> Tuple[GradedHom, PansuDiagnostics]:
    """Estimate D_P f(x) for a map given by a vectorized evaluator.

    Returns the graded-hom extension of the first-layer block at the smallest
    stable radius, with Cauchy diagnostics across the ladder.  Raises
    NonContactError when no consistent extension exists within tolerance.
    """
    gp = codomain or getattr(f, "codomain", None) or g
    gf = g.with_scalar("f64") if scalars.is_exact(g.scalar) else g
    gpf = gp.with_scalar("f64") if scalars.is_exact(gp.scalar) else gp
    x = np.asarray(x, dtype=float)[None, :]
    radii = tuple(sorted(radii, reverse=True))
    ladder = [_first_layer_blocks(f, gf, gpf, x, r) for r in radii]
    blocks = [b[0][0] for b in ladder]
    verticals = [float(b[1][0]) for b in ladder]
    deltas = [float(np.max(np.abs(b2 - b1))) for b1, b2 in zip(blocks, blocks[1:])]
    # smallest stable level: last level whose delta did not blow up
    chosen = len(blocks) - 1
    for t in range(len(deltas) - 1):
        if deltas[t + 1] > 4.0 * deltas[t] + 1e-14:
            chosen = t + 1
            break
    scale = max(1.0, float(np.max(np.abs(blocks[chosen]))))
    if verticals[chosen] > max(1e-2, 50.0 * radii[chosen]) * scale:
        raise NonContactError(
            f"vertical drift {verticals[chosen]:.3e} at x={x[0].tolist()}: "
            "frame derivative leaves the horizontal bundle")
    A = blocks[chosen]
    phi = extend_first_layer(gf, gpf, A.tolist(), eps=extension_tol)
    if isinstance(phi, IncompatibilityWitness):
        raise NonContactError(
            f"no graded extension at x={x[0].tolist()}: witness {phi.pair}")
    diag = PansuDiagnostics(radii, deltas, chosen, verticals[chosen])
    return phi, diag


@dataclass
class PansuField:
    """Per-point first-layer blocks (and derived layer blocks) over a lattice."""

    algebra: GradedLieAlgebra
    codomain: GradedLieAlgebra
    points: np.ndarray                 # (M, N)
    first_layer: np.ndarray            # (M, n1', n1)
    validity: np.ndarray               # (M,) bool: graded-hom check at tolerance
    second_layer: Optional[np.ndarray] = None   # (M, n2', n2) when step 2

    def hom_at(self, i: int) -> GradedHom:
        gf = self.algebra.with_scalar("f64") if scalars.is_exact(self.algebra.scalar) \
            else self.algebra
        gpf = self.codomain.with_scalar("f64") if scalars.is_exact(self.codomain.scalar) \
            else self.codomain
        phi = extend_first_layer(gf, gpf, self.first_layer[i].tolist())
        if isinstance(phi, IncompatibilityWitness):
            raise NonContactError(f"invalid field entry {i}")
        return phi


def pansu_field(f, g: GradedLieAlgebra, pts: np.ndarray,
                r: float, codomain: Optional[GradedLieAlgebra] = None,
                validity_tol: float = 1e-6) -> PansuField:
    """Vectorized first-layer Pansu blocks at a fixed FD radius."""
    gp = codomain or getattr(f, "codomain", None) or g
    gf = g.with_scalar("f64") if scalars.is_exact(g.scalar) else g
    gpf = gp.with_scalar("f64") if scalars.is_exact(gp.scalar) else gp
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    A, vert = _first_layer_blocks(f, gf, gpf, pts, r)
    scale = np.maximum(1.0, np.max(np.abs(A), axis=(1, 2)))
    vert_ok = vert <= np.maximum(1e-2, 50.0 * r) * scale
    if gf.step == 1:
        return PansuField(g, gp, pts, A, vert_ok)
    B, resid = second_layer_blocks(gf, gpf, A)
    return PansuField(g, gp, pts, A, (resid <= validity_tol) & vert_ok, B)


def second_layer_blocks(g: GradedLieAlgebra, gp: GradedLieAlgebra,
                        A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Solve the layer-2 blocks B from the first-layer blocks, vectorized.

    Equations: for every pair i<j in V1, B [e_i, e_j]_2 = [A e_i, A e_j]_2'.
    Returns (B, max-residual per point).  Only steps <= 2 are needed by the
    lab; higher steps go through homs.extend_first_layer pointwise.
    """
    if g.step > 2 or gp.step > 2:
        raise NonContactError("vectorized extension implemented for step <= 2")
    n1, n1p = g.layer_dims[0], gp.layer_dims[0]
    n2 = g.layer_dims[1] if g.step == 2 else 0
    n2p = gp.layer_dims[1] if gp.step == 2 else 0
    M = A.shape[0]
    pairs = [(i, j) for i in range(n1) for j in range(i + 1, n1)]
    P = len(pairs)
    # domain-side bracket coordinates: W (P, n2), constant over points
    W = np.zeros((P, n2))
    for t, (i, j) in enumerate(pairs):
        w = g.bracket(g.basis_vector(i), g.basis_vector(j))
        for s in range(n2):
            W[t, s] = float(scalars.to_float(w[g.layer_starts[1] + s]))
    # image-side brackets: for each point, R (P, n2p)
    # [A e_i, A e_j]' = sum_{a<b} (A_ai A_bj - A_aj A_bi) [e'_a, e'_b]
    Cp = np.zeros((n1p, n1p, n2p))
    for (a, b), terms in gp.table.items():
        if a >= n1p or b >= n1p or a > b:
            continue
        for k, c in terms.items():
            Cp[a, b, k - gp.layer_starts[1]] += float(scalars.to_float(c))
    # minor tensor: m[M, P, a, b] = A[:, a, i] A[:, b, j] - A[:, a, j] A[:, b, i]
    R = np.zeros((M, P, n2p))
    for t, (i, j) in enumerate(pairs):
        minors = np.einsum("ma,mb->mab", A[:, :, i], A[:, :, j]) \
            - np.einsum("ma,mb->mab", A[:, :, j], A[:, :, i])
        R[:, t, :] = np.tensordot(minors, Cp, axes=([1, 2], [0, 1]))
    # solve W B^T = R in least squares once (W is shared): B (M, n2p, n2)
    WtW = W.T @ W
    Wt = W.T
    try:
        sol = np.linalg.solve(WtW, Wt @ R.transpose(1, 0, 2).reshape(P, -1))
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(W, R.transpose(1, 0, 2).reshape(P, -1), rcond=None)
    B = sol.reshape(n2, M, n2p).transpose(1, 2, 0)
    resid = np.einsum("pt,mkt->mpk", W, B) - R
    return B, np.max(np.abs(resid), axis=(1, 2)) if P else np.zeros(M)


def full_blocks(g: GradedLieAlgebra, gp: GradedLieAlgebra, A: np.ndarray
                ) -> List[np.ndarray]:
    """Per-layer blocks [(M, n1', n1), (M, n2', n2)] for step <= 2."""
    if g.step == 1:
        return [A]
    B, _ = second_layer_blocks(g, gp, A)
    return [A, B]


def frame_jacobian_fd(f, g: GradedLieAlgebra, gp: GradedLieAlgebra,
                      x: Sequence, t: float = 1e-5) -> np.ndarray:
    """Full ordinary differential of f at x in the left-invariant frames:
    column j = d/ds log(f(x)^{-1} f(x exp(s X_j))) at s = 0, central FD."""
    gf = g.with_scalar("f64") if scalars.is_exact(g.scalar) else g
    gpf = gp.with_scalar("f64") if scalars.is_exact(gp.scalar) else gp
    x = np.asarray(x, dtype=float)
    n, npr = gf.dim, gpf.dim
    out = np.empty((npr, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = t
        plus = f(group.bch_np(gf, x[None, :], e[None, :]))[0]
        minus = f(group.bch_np(gf, x[None, :], -e[None, :]))[0]
        diff = group.bch_np(gpf, -minus, plus)
        out[:, j] = diff / (2 * t)
    return out
