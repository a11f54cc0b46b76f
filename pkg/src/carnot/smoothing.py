"""Buser-Karcher center of mass and mollification of maps between Carnot groups.

All numerics are float64; group points are numpy coordinate vectors.  The
center of mass of a discrete measure is the unique zero of the potential
C_nu(x) = sum_i w_i log(x^{-1} p_i), found by damped Newton iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import group
from .algebra import GradedLieAlgebra, StructuralError
from .group import Lattice

SOLVER_TOL = 1e-10        # absolute residual bound on the potential
PROPERTY_TOL = 1e-8       # default tolerance for equivariance-style checks
WEIGHT_TOL = 1e-12


class CenterOfMassError(RuntimeError):
    """Newton failed to reach the residual target (should not happen)."""

    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass
class DiscreteMeasure:
    """Finitely supported probability measure on a Carnot group."""

    algebra: GradedLieAlgebra
    points: np.ndarray                 # (M, N)
    weights: np.ndarray                # (M,)
    symmetric: bool = False            # claim I_* nu = nu; verified when set

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != self.algebra.dim:
            raise StructuralError("points must be (M, N)")
        if self.weights.shape != (self.points.shape[0],):
            raise StructuralError("weights shape mismatch")
        if np.any(self.weights <= 0):
            raise StructuralError("weights must be positive")
        if abs(float(self.weights.sum()) - 1.0) > WEIGHT_TOL:
            raise StructuralError("weights must sum to 1 (within 1e-12)")
        if self.symmetric and not self._verify_symmetry():
            raise StructuralError("measure declared symmetric but I_*nu != nu")

    def _verify_symmetry(self) -> bool:
        inv = -self.points
        order = np.lexsort(self.points.T)
        order_inv = np.lexsort(inv.T)
        return (np.allclose(self.points[order], inv[order_inv], atol=1e-12)
                and np.allclose(self.weights[order], self.weights[order_inv], atol=1e-12))

    def pushforward(self, f: Callable[[np.ndarray], np.ndarray],
                    codomain: GradedLieAlgebra, symmetric: bool = False) -> "DiscreteMeasure":
        return DiscreteMeasure(codomain, f(self.points), self.weights, symmetric)

    def scale(self) -> float:
        """Size scale used by the solver's relative residual target."""
        return max(1.0, float(np.max(np.abs(self.points), initial=0.0)))


@dataclass
class SampledMap:
    """A map between group domains sampled on a lattice."""

    lattice: Lattice
    values: np.ndarray                 # (size, N')
    codomain: GradedLieAlgebra

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.lattice.size, self.codomain.dim):
            raise StructuralError("values shape mismatch with lattice")

    def as_callable(self) -> Callable[[np.ndarray], np.ndarray]:
        """Multilinear interpolation on the lattice (queries must lie inside)."""
        from scipy.interpolate import RegularGridInterpolator

        lat = self.lattice
        axes = [lat.axis_coords(i) for i in range(lat.algebra.dim)]
        grids = self.values.reshape(tuple(lat.resolution) + (self.codomain.dim,))
        interp = RegularGridInterpolator(axes, grids, method="linear",
                                         bounds_error=False, fill_value=None)
        return lambda pts: np.atleast_2d(interp(pts))


def default_kernel(g: GradedLieAlgebra, resolution: int = 3) -> DiscreteMeasure:
    """Uniform weights on the centered lattice points inside the unit
    quasinorm ball; symmetric by the pairing p <-> p^{-1} = -p."""
    lat = group.sample_box(g, np.zeros(g.dim), 1.0, resolution)
    pts = lat.points()
    qn = group.quasinorm_np(g, pts)
    keep = pts[qn <= 1.0 + 1e-12]
    # enforce exact inversion symmetry: keep the union with the negatives
    pts = np.unique(np.concatenate([keep, -keep]), axis=0)
    w = np.full(len(pts), 1.0 / len(pts))
    return DiscreteMeasure(g, pts, w, symmetric=True)


def com_potential(nu: DiscreteMeasure, x: Sequence) -> np.ndarray:
    """C_nu(x) = sum_i w_i log(x^{-1} p_i) in exponential coordinates."""
    g = nu.algebra
    x = np.asarray(x, dtype=float)
    terms = group.bch_np(g, -x, nu.points)
    return np.asarray(terms, dtype=float).T @ nu.weights


def _com_jacobian(nu: DiscreteMeasure, x: np.ndarray) -> np.ndarray:
    """d/dx C_nu(x), via finite differences (exact closed form for step <= 2)."""
    g = nu.algebra
    n = g.dim
    if g.step <= 2:
        # C(x) = sum w_i (p_i - x - 1/2 [x, p_i]); dC = -I + 1/2 ad_{mean p}
        pbar = nu.points.T @ nu.weights
        jac = -np.eye(n)
        for (i, j), terms in g.table.items():
            if i > j:
                continue
            for k, c in terms.items():
                cf = float(c)
                # d/dx_i of -1/2 [x, p]_k = -1/2 c_{ij}^k p_j; antisym partner too
                jac[k, i] += -0.5 * cf * pbar[j]
                jac[k, j] += 0.5 * cf * pbar[i]
        return jac
    h = 1e-6
    jac = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        jac[:, i] = (com_potential(nu, x + e) - com_potential(nu, x - e)) / (2 * h)
    return jac


def center_of_mass(nu: DiscreteMeasure, tol: float = SOLVER_TOL,
                   max_iter: int = 80) -> np.ndarray:
    """The unique zero of the potential, by damped Newton from the Euclidean mean."""
    g = nu.algebra
    x = nu.points.T @ nu.weights
    target = tol * nu.scale()
    res = com_potential(nu, x)
    norm = float(np.linalg.norm(res))
    for _ in range(max_iter):
        if norm <= target:
            return x
        jac = _com_jacobian(nu, x)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            step = -res
        t = 1.0
        while t > 1e-12:
            cand = x + t * step
            cres = com_potential(nu, cand)
            cnorm = float(np.linalg.norm(cres))
            if cnorm < norm:
                x, res, norm = cand, cres, cnorm
                break
            t *= 0.5
        else:
            break
    if norm <= target:
        return x
    raise CenterOfMassError(
        f"center-of-mass Newton stalled at residual {norm:.3e} (target {target:.3e})", x)


def _kernel_at(g: GradedLieAlgebra, kernel: DiscreteMeasure, x: np.ndarray,
               rho: float) -> np.ndarray:
    """Support of sigma_{x, rho} = (l_x o delta_rho)_* sigma_1."""
    pts = group.dilate_np(g, rho, kernel.points)
    return group.bch_np(g, x[None, :], pts)


def mollify_map(f, kernel: DiscreteMeasure, rho: float, queries: np.ndarray,
                domain: Optional[GradedLieAlgebra] = None,
                codomain: Optional[GradedLieAlgebra] = None,
                domain_bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None
                ) -> np.ndarray:
    """f_rho(x) = cent(f_* sigma_{x, rho}) at each query point.

    `f` is a callable (points (M,N) -> (M,N')) or a SampledMap.  The kernel
    must be inversion symmetric and supported in the unit quasinorm ball.
    Queries whose rho-neighborhood leaves the declared domain bounds raise.
    """
    if isinstance(f, SampledMap):
        domain = f.lattice.algebra
        codomain = f.codomain
        lo = f.lattice.center - f.lattice.radius
        hi = f.lattice.center + f.lattice.radius
        domain_bounds = (lo, hi) if domain_bounds is None else domain_bounds
        fc = f.as_callable()
    else:
        if domain is None or codomain is None:
            raise StructuralError("callable maps need explicit domain/codomain algebras")
        fc = f
    if not kernel.symmetric:
        raise StructuralError("mollification kernel must be inversion symmetric")
    if float(np.max(group.quasinorm_np(kernel.algebra, kernel.points))) > 1.0 + 1e-9:
        raise StructuralError("kernel support must lie in the unit quasinorm ball")
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.empty((len(queries), codomain.dim))
    for t, x in enumerate(queries):
        supp = _kernel_at(domain, kernel, x, rho)
        if domain_bounds is not None:
            lo, hi = domain_bounds
            if np.any(supp < lo - 1e-12) or np.any(supp > hi + 1e-12):
                raise StructuralError(
                    f"query {x} has points of its rho-neighborhood outside the domain")
        vals = np.atleast_2d(fc(supp))
        nu = DiscreteMeasure(codomain, vals, kernel.weights)
        out[t] = center_of_mass(nu)
    return out


def mollify_to_sampled(f, kernel: DiscreteMeasure, rho: float,
                       query_lattice: Lattice, codomain: GradedLieAlgebra,
                       domain: Optional[GradedLieAlgebra] = None) -> SampledMap:
    vals = mollify_map(f, kernel, rho, query_lattice.points(),
                       domain=domain or query_lattice.algebra, codomain=codomain)
    return SampledMap(query_lattice, vals, codomain)
