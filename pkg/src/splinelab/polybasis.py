"""Multi-index machinery and low-degree multivariate polynomial interpolation.

Multi-indices are plain integer tuples.  Polynomial spaces carry a
graded-lexicographic monomial basis; points are affinely normalized to a
unit-scale frame before any Vandermonde assembly so that conditioning does
not degrade on tiny or off-center point clouds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import rng_for

RANK_TOLERANCE_FACTOR = 1e-12
TEMPLATE_CONDITION_BOUND = 1e8


class UnisolvencyError(ValueError):
    """Raised when a point set cannot determine a unique interpolating polynomial."""

    def __init__(self, message: str, condition: float = np.inf):
        super().__init__(message)
        self.condition = condition


def poly_dim(d: int, degree: int) -> int:
    """Dimension of the space of d-variate polynomials of total degree <= degree."""
    if d < 1 or degree < 0:
        raise ValueError("need d >= 1 and degree >= 0")
    return math.comb(degree + d, d)


def multi_indices(d: int, exact_order: int) -> list[tuple[int, ...]]:
    """All multi-indices of exactly the given order, graded-lex order.

    For fixed order the first component decreases, e.g. (2,0), (1,1), (0,2).
    """
    if d < 1 or exact_order < 0:
        raise ValueError("need d >= 1 and exact_order >= 0")
    if d == 1:
        return [(exact_order,)]
    out = []
    for first in range(exact_order, -1, -1):
        for rest in multi_indices(d - 1, exact_order - first):
            out.append((first,) + rest)
    return out


@dataclass(frozen=True)
class PolySpace:
    """Polynomials of total degree <= degree in d variables, monomial basis."""

    d: int
    degree: int
    basis: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        if self.d < 1 or self.degree < 0:
            raise ValueError("need d >= 1 and degree >= 0")
        basis = []
        for order in range(self.degree + 1):
            basis.extend(multi_indices(self.d, order))
        object.__setattr__(self, "basis", tuple(basis))
        assert len(basis) == poly_dim(self.d, self.degree)

    @property
    def dim(self) -> int:
        return len(self.basis)


def blh_coefficients(d: int, k: int) -> dict[tuple[int, ...], float]:
    """Multinomial weights c_alpha with sum_{|a|=k} c_a x^(2a) = |x|^(2k).

    These make the order-k derivative seminorm rotationally invariant;
    c_alpha = k! / alpha!.
    """
    if d < 1 or k < 1:
        raise ValueError("need d >= 1 and k >= 1")
    out = {}
    for alpha in multi_indices(d, k):
        denom = 1
        for a in alpha:
            denom *= math.factorial(a)
        out[alpha] = math.factorial(k) / denom
    return out


def monomial_matrix(points: np.ndarray, basis) -> np.ndarray:
    """Vandermonde-type matrix: rows are points, columns the basis monomials."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cols = [np.prod(pts ** np.asarray(alpha, dtype=float), axis=1) for alpha in basis]
    return np.stack(cols, axis=-1)


def normalization_frame(points: np.ndarray):
    """Centroid and max-radius scale mapping a point cloud into a unit frame."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    center = pts.mean(axis=0)
    scale = float(np.max(np.linalg.norm(pts - center, axis=1)))
    if scale < 1e-300:
        scale = 1.0
    return center, scale


def check_unisolvent(points, space: PolySpace):
    """Whether the points determine Π_degree uniquely, plus a condition estimate.

    Returns (flag, condition) where flag says the normalized Vandermonde has
    full column rank under the standard spectral tolerance, and condition is
    the ratio of its extreme singular values.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) == 0:
        raise ValueError("need at least one point")
    center, scale = normalization_frame(pts)
    v = monomial_matrix((pts - center) / scale, space.basis)
    sv = np.linalg.svd(v, compute_uv=False)
    tol = sv[0] * space.dim * RANK_TOLERANCE_FACTOR if sv[0] > 0 else 0.0
    rank = int(np.sum(sv > tol))
    smallest = sv[min(len(sv), space.dim) - 1]
    condition = float(sv[0] / smallest) if smallest > 0 else np.inf
    return rank == space.dim, condition


@dataclass
class Polynomial:
    """A polynomial as monomial coefficients in an affine frame.

    Evaluation computes sum_j coeffs[j] * y^alpha_j with y = (x - center)/scale;
    the identity frame (center 0, scale 1) gives plain monomials.  Evaluation
    is linear in the coefficients and the zero vector is the zero function.
    """

    space: PolySpace
    coeffs: np.ndarray
    center: np.ndarray | None = None
    scale: float = 1.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.dim,):
            raise ValueError(f"need {self.space.dim} coefficients")
        if self.center is None:
            self.center = np.zeros(self.space.d)
        self.center = np.asarray(self.center, dtype=float)

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        y = (pts - self.center) / self.scale
        vals = monomial_matrix(y, self.space.basis) @ self.coeffs
        return float(vals[0]) if single else vals


def lagrange_project(points, values, space: PolySpace) -> Polynomial:
    """The unique polynomial of the space interpolating values at `dim` points.

    Solved on affinely normalized coordinates; raises UnisolvencyError (with
    the condition estimate attached) when the points are degenerate.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.asarray(values, dtype=float).ravel()
    if len(pts) != space.dim or len(vals) != space.dim:
        raise ValueError(f"need exactly {space.dim} points and values")
    flag, condition = check_unisolvent(pts, space)
    if not flag:
        raise UnisolvencyError(
            f"points are not unisolvent for degree {space.degree} "
            f"(condition estimate {condition:.3e})",
            condition=condition,
        )
    center, scale = normalization_frame(pts)
    v = monomial_matrix((pts - center) / scale, space.basis)
    coeffs = np.linalg.solve(v, vals)
    return Polynomial(space, coeffs, center=center, scale=scale)


def pick_unisolvent_in_ball(
    center, radius: float, space: PolySpace, require_center_first: bool = True
):
    """A deterministic unisolvent point template inside a ball.

    Uses the principal lattice of the basis multi-indices scaled into the
    ball of half the radius: point_alpha = center + (radius/2) * alpha/degree.
    The first basis index is (0,...,0), so the center always comes first.
    Falls back to seeded random draws if the template were ever degenerate.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    c = np.asarray(center, dtype=float)
    if space.degree == 0:
        return c[None, :].copy()
    offsets = np.asarray(space.basis, dtype=float) * (0.5 * radius / space.degree)
    pts = c[None, :] + offsets
    flag, condition = check_unisolvent(pts, space)
    if flag and condition <= TEMPLATE_CONDITION_BOUND:
        return pts
    rng = rng_for(0, "unisolvent_template", space.d, space.degree)
    for _ in range(100):
        raw = rng.standard_normal((space.dim, space.d))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        raw *= rng.uniform(0.2, 0.9, size=(space.dim, 1)) * radius
        pts = c[None, :] + raw
        if require_center_first:
            pts[0] = c
        flag, condition = check_unisolvent(pts, space)
        if flag and condition <= TEMPLATE_CONDITION_BOUND:
            return pts
    raise RuntimeError("could not construct a well-conditioned unisolvent set")
