"""Compactly supported smooth bumps with vanishing moments, and smoothing.

The mollifier is an even radial polynomial times the standard bump
exp(-1/(1-|x|^2)), supported on the closed unit ball.  Odd moments vanish by
symmetry; the polynomial coefficients are chosen so the mass is one and the
remaining even moments up to order m-1 vanish.  Convolving a function that
agrees with a polynomial of degree < m on a ball around a point therefore
reproduces the polynomial's value at that point, which is the property the
smoothed-interpolation construction leans on.

`smoothed_interpolation_data` builds, from samples of f near each node, a
smooth function F with F(node) = f(node): around every node the function is
blended into its local interpolating polynomial inside a ball of radius
delta = q/4 (q the node separation), the blend regions of distinct nodes
being disjoint, and the result is mollified at scale delta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import PointSet, separation
from .polybasis import (
    Polynomial,
    PolySpace,
    lagrange_project,
    multi_indices,
    pick_unisolvent_in_ball,
)
from .quadrature import ball_quadrature

# radial/angular resolution of the internal ball rule; 64 holds the moment
# integrals to ~1e-13 in every supported dimension
DEFAULT_MOLLIFIER_QUAD = 64


def _bump_radial(u):
    """exp(-1/(1-u)) on u < 1, zero beyond; u is the squared radius."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = u < 1.0
    with np.errstate(over="ignore", under="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - u[inside]))
    return out


def _bump_radial_d1(u):
    """First derivative of the radial profile with respect to u = r^2."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = u < 1.0
    g = 1.0 - u[inside]
    with np.errstate(over="ignore", under="ignore"):
        out[inside] = -np.exp(-1.0 / g) / g**2
    return out


def _bump_radial_d2(u):
    """Second derivative of the radial profile with respect to u = r^2."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = u < 1.0
    g = 1.0 - u[inside]
    with np.errstate(over="ignore", under="ignore"):
        out[inside] = np.exp(-1.0 / g) * (1.0 - 2.0 * g) / g**4
    return out


@dataclass
class Mollifier:
    """Unit-mass smooth bump on the unit ball with vanishing moments below order m."""

    d: int
    m: int
    radial_coeffs: np.ndarray
    quad_nodes_per_axis: int
    _quad: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self.radial_coeffs = np.asarray(self.radial_coeffs, dtype=float)
        self._quad = ball_quadrature(self.d, self.quad_nodes_per_axis)

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        u = np.einsum("ij,ij->i", pts, pts)
        vals = np.polynomial.polynomial.polyval(u, self.radial_coeffs) * _bump_radial(u)
        return float(vals[0]) if single else vals

    def radial_value_d1_d2(self, u):
        """Value, du- and du^2-derivatives of g(u) = P(u) * bump(u), u = r^2."""
        p = np.polynomial.polynomial
        c = self.radial_coeffs
        c1 = p.polyder(c) if len(c) > 1 else np.zeros(1)
        c2 = p.polyder(c, 2) if len(c) > 2 else np.zeros(1)
        pe, pe1, pe2 = p.polyval(u, c), p.polyval(u, c1), p.polyval(u, c2)
        e, e1, e2 = _bump_radial(u), _bump_radial_d1(u), _bump_radial_d2(u)
        g = pe * e
        g1 = pe1 * e + pe * e1
        g2 = pe2 * e + 2.0 * pe1 * e1 + pe * e2
        return g, g1, g2

    def partial(self, alpha, x):
        """Analytic partial derivative D^alpha of the mollifier, |alpha| <= 2."""
        order = sum(alpha)
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        u = np.einsum("ij,ij->i", pts, pts)
        g, g1, g2 = self.radial_value_d1_d2(u)
        if order == 0:
            return g
        if order == 1:
            i = alpha.index(1)
            return 2.0 * pts[:, i] * g1
        if order == 2:
            if 2 in alpha:
                i = alpha.index(2)
                return 2.0 * g1 + 4.0 * pts[:, i] ** 2 * g2
            i, j = [idx for idx, a in enumerate(alpha) if a == 1]
            return 4.0 * pts[:, i] * pts[:, j] * g2
        raise NotImplementedError("analytic mollifier derivatives stop at order 2")


def moment(phi: Mollifier, alpha, quad_nodes: int | None = None) -> float:
    """The moment integral of phi against the monomial x^alpha."""
    if quad_nodes is None:
        pts, w = phi._quad
    else:
        pts, w = ball_quadrature(phi.d, quad_nodes)
    mono = np.prod(pts ** np.asarray(alpha, dtype=float), axis=1)
    return float(np.sum(w * phi(pts) * mono))


def build_mollifier(d: int, m: int, quad_nodes: int | None = None) -> Mollifier:
    """Construct the order-m mollifier in dimension d.

    The even moments that symmetry does not kill are removed by solving a
    small moment-matching system for the radial polynomial coefficients; the
    system is square and, for this ansatz, always nonsingular (a singular
    solve would indicate a bug and raises).
    """
    if d not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2, or 3")
    if m < 1:
        raise ValueError("moment order m must be >= 1")
    if quad_nodes is None:
        quad_nodes = DEFAULT_MOLLIFIER_QUAD
    pts, w = ball_quadrature(d, quad_nodes)
    u = np.einsum("ij,ij->i", pts, pts)
    bump = _bump_radial(u)
    n_con = 1 + (m - 1) // 2  # mass + even radial moments 2,4,... <= m-1
    a = np.empty((n_con, n_con))
    for t in range(n_con):
        for j in range(n_con):
            a[t, j] = np.sum(w * bump * u ** (t + j))
    rhs = np.zeros(n_con)
    rhs[0] = 1.0
    try:
        coeffs = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("mollifier moment system singular") from exc
    return Mollifier(d=d, m=m, radial_coeffs=coeffs, quad_nodes_per_axis=quad_nodes)


def verify_moments(phi: Mollifier, tol_mass: float = 1e-8, tol_moment: float = 1e-6):
    """Re-check the moment conditions at double the construction resolution.

    Returns (ok, rows) with one (alpha, value, required) row per multi-index
    of order <= m-1.
    """
    rows = []
    ok = True
    for order in range(phi.m):
        for alpha in multi_indices(phi.d, order):
            val = moment(phi, alpha, quad_nodes=2 * phi.quad_nodes_per_axis)
            required = 1.0 if order == 0 else 0.0
            tol = tol_mass if order == 0 else tol_moment
            rows.append((alpha, val, required))
            if abs(val - required) > tol:
                ok = False
    return ok, rows


def mollify(f, phi: Mollifier, eps: float, x) -> float:
    """The mollified value (phi_eps * f)(x) = integral of phi(t) f(x - eps t).

    `f` must be vectorized over (n, d) arrays and is only evaluated strictly
    inside the ball of radius eps around x (where the bump is nonzero).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float).ravel()
    pts, w = phi._quad  # ball-rule nodes lie strictly inside the unit ball
    shifted = x[None, :] - eps * pts
    return float(np.sum(w * phi(pts) * np.asarray(f(shifted), dtype=float)))


def mollified_partial(f, phi: Mollifier, h: float, alpha, x) -> float:
    """D^alpha of the scale-h mollification of f at x, via derivatives of phi.

    Uses D^alpha(phi_h * f)(x) = h^(-|alpha|) * integral of
    (D^alpha phi)(t) f(x - h t) dt, with the mollifier derivative analytic.
    """
    x = np.asarray(x, dtype=float).ravel()
    pts, w = phi._quad
    dvals = phi.partial(tuple(alpha), pts)
    shifted = x[None, :] - h * pts
    integral = float(np.sum(w * dvals * np.asarray(f(shifted), dtype=float)))
    return h ** (-sum(alpha)) * integral


def _smooth_step_up(t):
    """The C-infinity profile exp(-1/t) for t > 0, zero otherwise."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / t[pos])
    return out


def blend_weight(r, inner: float, outer: float):
    """Smooth cutoff: identically 1 for r <= inner, 0 for r >= outer."""
    r = np.asarray(r, dtype=float)
    a = _smooth_step_up((outer - r) / (outer - inner))
    b = _smooth_step_up((r - inner) / (outer - inner))
    with np.errstate(invalid="ignore"):
        w = np.where(a + b > 0, a / (a + b), 0.0)
    return w


@dataclass
class SmoothedData:
    """A smooth stand-in for f that matches it exactly at the nodes.

    `blended` is the piecewise-blended function H (local interpolating
    polynomial near each node, f elsewhere); calling the object evaluates
    F = (mollifier at scale delta) * H.
    """

    f: object
    nodes: PointSet
    m: int
    delta: float
    phi: Mollifier
    local_polys: list[Polynomial]

    def blended(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = np.asarray(self.f(pts), dtype=float).copy()
        dists = cdist(pts, self.nodes.points)
        nearest = np.argmin(dists, axis=1)
        rmin = dists[np.arange(len(pts)), nearest]
        touched = rmin < 2.0 * self.delta
        # blend regions of distinct nodes are disjoint: 2*delta = q/2 < node gap
        for j in np.unique(nearest[touched]):
            sel = touched & (nearest == j)
            eta = blend_weight(rmin[sel], self.delta, 2.0 * self.delta)
            out[sel] = (1.0 - eta) * out[sel] + eta * self.local_polys[j](pts[sel])
        return float(out[0]) if single else out

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        vals = np.array([mollify(self.blended, self.phi, self.delta, p) for p in pts])
        return float(vals[0]) if single else vals


def smoothed_interpolation_data(f, nodes: PointSet, m: int, phi: Mollifier) -> SmoothedData:
    """Build the smooth F with F(a) = f(a) at every node.

    Around each node a the local degree-(m-1) interpolating polynomial is
    fitted on a unisolvent template inside the ball of radius delta = q/4
    with the node itself as first template point, blended into f by a smooth
    cutoff between radii delta and 2*delta, and the blend is mollified at
    scale delta.  Requires d < 2m and f evaluable on the node domain dilated
    by 3*delta.
    """
    d = nodes.domain.d
    if 2 * m <= d:
        raise ValueError(f"need d < 2m (got d={d}, m={m})")
    if phi.d != d or phi.m < m:
        raise ValueError("mollifier dimension/order incompatible with request")
    q = nodes.separation_q if nodes.separation_q is not None else separation(nodes)
    delta = q / 4.0
    space = PolySpace(d, m - 1)
    polys = []
    for a in nodes.points:
        template = pick_unisolvent_in_ball(a, delta, space, require_center_first=True)
        try:
            vals = np.asarray(f(template), dtype=float)
        except Exception as exc:
            raise ValueError(
                "f not evaluable near the nodes; shrink the node domain so that "
                f"f covers it dilated by 3*delta = {3 * delta:.3e}"
            ) from exc
        polys.append(lagrange_project(template, vals, space))
    return SmoothedData(f=f, nodes=nodes, m=m, delta=delta, phi=phi, local_polys=polys)
