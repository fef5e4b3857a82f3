"""Quadrature rules and low-discrepancy sampling shared across the package.

Cubes get tensor Gauss-Legendre rules.  Balls get product rules in polar /
spherical coordinates, which keeps integrals of smooth radial-friendly
integrands spectrally accurate and (up to quadrature error) rotation
independent.  Halton points provide deterministic quasi-random samples for
error norms.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import qmc


def default_nodes_per_axis(d: int) -> int:
    """Default Gauss-Legendre resolution: 64 per axis for d <= 2, 24 for d = 3."""
    return 64 if d <= 2 else 24


def rng_for(seed: int, *path) -> np.random.Generator:
    """Counter-based generator keyed by (seed, path), no global state.

    The Philox key is derived from a stable hash of the path components, so
    independent subsystems (geometry, satellites, tests) draw from disjoint
    streams that are reproducible across processes and platforms.
    """
    tag = "/".join(str(p) for p in path)
    digest = hashlib.blake2b(tag.encode(), digest_size=8).digest()
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) << 64 | int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))


def gauss_legendre_1d(lo: float, hi: float, n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [lo, hi]."""
    x, w = leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def gauss_legendre_box(lo, hi, nodes_per_axis: int):
    """Tensor-product Gauss-Legendre rule on the box [lo, hi] in R^d.

    Returns (points, weights) with points of shape (M, d) and weights (M,),
    M = nodes_per_axis ** d.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    d = lo.size
    axes = [gauss_legendre_1d(lo[i], hi[i], nodes_per_axis) for i in range(d)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.ones(pts.shape[0])
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    for wg in wgrids:
        w = w * wg.ravel()
    return pts, w


def composite_gauss_1d(lo: float, hi: float, panel_width: float, nodes_per_panel: int = 8):
    """Panel-wise Gauss rule on [lo, hi]; resolves features of width ~panel_width."""
    n_panels = max(1, int(np.ceil((hi - lo) / panel_width)))
    edges = np.linspace(lo, hi, n_panels + 1)
    pts, wts = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre_1d(a, b, nodes_per_panel)
        pts.append(x)
        wts.append(w)
    return np.concatenate(pts), np.concatenate(wts)


def ball_quadrature(d: int, nodes_per_axis: int):
    """Product rule on the closed unit ball in R^d (d <= 3).

    d=1 is plain Gauss on [-1, 1]; d=2 uses Gauss in radius against a uniform
    periodic rule in angle; d=3 adds a Gauss rule in the polar cosine.  The
    angular rules are exactly invariant under their own rotation subgroup and
    spectrally accurate for smooth integrands, so rotated integrands agree to
    quadrature precision.
    """
    n = nodes_per_axis
    if d == 1:
        x, w = gauss_legendre_1d(-1.0, 1.0, n)
        return x[:, None], w
    if d == 2:
        r, wr = gauss_legendre_1d(0.0, 1.0, n)
        n_theta = 2 * n
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        wt = np.full(n_theta, 2.0 * np.pi / n_theta)
        R, T = np.meshgrid(r, theta, indexing="ij")
        pts = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=-1)
        w = (np.outer(wr * r, wt)).ravel()
        return pts, w
    if d == 3:
        r, wr = gauss_legendre_1d(0.0, 1.0, n)
        u, wu = gauss_legendre_1d(-1.0, 1.0, n)  # u = cos(polar angle)
        n_theta = 2 * n
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        wt = np.full(n_theta, 2.0 * np.pi / n_theta)
        R, U, T = np.meshgrid(r, u, theta, indexing="ij")
        s = np.sqrt(np.clip(1.0 - U**2, 0.0, None))
        pts = np.stack(
            [
                (R * s * np.cos(T)).ravel(),
                (R * s * np.sin(T)).ravel(),
                (R * U).ravel(),
            ],
            axis=-1,
        )
        w = (wr * r**2)[:, None, None] * wu[None, :, None] * wt[None, None, :]
        return pts, w.ravel()
    raise ValueError(f"ball quadrature implemented for d <= 3, got d={d}")


def halton_points(d: int, n: int):
    """First n points of the (unscrambled, deterministic) Halton sequence in [0,1)^d."""
    sampler = qmc.Halton(d=d, scramble=False)
    return sampler.random(n)
