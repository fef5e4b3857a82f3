"""Catalog of test functions with known smoothness.

Each entry evaluates vectorized over (n, d) point arrays and, where
practical, exposes analytic partial derivatives; anything beyond the
analytic order falls back to nested central finite differences.  Rough
entries are radial powers |x - x0|^beta around an interior point with
deliberately non-grid coordinates, so nodes never land on the singularity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermval

ROUGH_CENTER = (0.5377, 0.41849, 0.66293)


def _as_points(x, d):
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        if pts.size != d:
            raise ValueError(f"a single point must have {d} coordinates")
        pts = pts.reshape(1, d)
    return pts


@dataclass
class TestFunction:
    """An evaluable function with optional analytic partials and a smoothness tag."""

    name: str
    d: int
    evaluator: object
    smoothness: str = "smooth"  # "smooth" or "rough"
    rough_exponent: float | None = None
    singular_point: np.ndarray | None = None
    analytic_order: int = 0
    _partials: object = field(default=None, repr=False)

    def __call__(self, x):
        pts = _as_points(x, self.d)
        vals = np.asarray(self.evaluator(pts), dtype=float)
        return float(vals[0]) if np.asarray(x).ndim == 1 else vals

    def partial(self, alpha):
        """Analytic D^alpha as a vectorized callable, or None beyond analytic order."""
        alpha = tuple(alpha)
        if len(alpha) != self.d:
            raise ValueError(f"alpha must have {self.d} entries")
        if self._partials is None or sum(alpha) > self.analytic_order:
            return None
        return self._partials(alpha)


def fd_partial(f, alpha, x, step: float = 1e-5):
    """Nested central finite difference for D^alpha f at points x."""
    alpha = tuple(alpha)
    order = sum(alpha)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if order == 0:
        return np.asarray(f(pts), dtype=float)
    i = next(idx for idx, a in enumerate(alpha) if a > 0)
    lower = tuple(a - (1 if idx == i else 0) for idx, a in enumerate(alpha))
    plus = pts.copy()
    plus[:, i] += step
    minus = pts.copy()
    minus[:, i] -= step
    return (fd_partial(f, lower, plus, step) - fd_partial(f, lower, minus, step)) / (
        2.0 * step
    )


def fd_step_for_order(order: int) -> float:
    """Central-difference step balancing truncation against roundoff per order."""
    return {1: 1e-6, 2: 1e-4, 3: 3e-3}.get(order, 1e-2)


def _trig_product(d: int) -> TestFunction:
    # product of sin(2 pi x_i) for odd axes and cos for even axes; every
    # partial derivative is the same product with per-axis phase shifts
    phases = np.array([0.0 if i % 2 == 0 else 0.5 * np.pi for i in range(d)])

    def factor(pts, i, order):
        return (2.0 * np.pi) ** order * np.sin(
            2.0 * np.pi * pts[:, i] + phases[i] + 0.5 * np.pi * order
        )

    def evaluator(pts):
        out = np.ones(len(pts))
        for i in range(d):
            out *= factor(pts, i, 0)
        return out

    def partials(alpha):
        def dfun(x):
            pts = np.atleast_2d(np.asarray(x, dtype=float))
            out = np.ones(len(pts))
            for i in range(d):
                out *= factor(pts, i, alpha[i])
            return out

        return dfun

    return TestFunction(
        name="trig", d=d, evaluator=evaluator, analytic_order=99, _partials=partials
    )


def _gaussian_factory(d: int, centers, gammas, weights, name: str) -> TestFunction:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    gammas = np.asarray(gammas, dtype=float)
    weights = np.asarray(weights, dtype=float)

    def term_partial(pts, c, gamma, alpha):
        # per-axis: d^a/dt^a exp(-g u^2) = (-sqrt(g))^a H_a(sqrt(g) u) exp(-g u^2)
        out = np.ones(len(pts))
        for i in range(len(alpha)):
            u = np.sqrt(gamma) * (pts[:, i] - c[i])
            coef = np.zeros(alpha[i] + 1)
            coef[alpha[i]] = 1.0
            out *= (-np.sqrt(gamma)) ** alpha[i] * hermval(u, coef) * np.exp(-(u**2))
        return out

    def evaluator(pts):
        zero = (0,) * d
        return sum(
            w * term_partial(pts, c, g, zero)
            for w, c, g in zip(weights, centers, gammas)
        )

    def partials(alpha):
        def dfun(x):
            pts = np.atleast_2d(np.asarray(x, dtype=float))
            return sum(
                w * term_partial(pts, c, g, alpha)
                for w, c, g in zip(weights, centers, gammas)
            )

        return dfun

    return TestFunction(
        name=name, d=d, evaluator=evaluator, analytic_order=99, _partials=partials
    )


def _gaussian_bump(d: int) -> TestFunction:
    return _gaussian_factory(d, [np.full(d, 0.5)], [8.0], [1.0], "gaussian")


def _franke_sum(d: int) -> TestFunction:
    if d != 2:
        raise ValueError("the Gaussian-sum surface is two-dimensional")
    centers = [(0.25, 0.3), (0.68, 0.72), (0.45, 0.85), (0.8, 0.2)]
    gammas = [9.0, 14.0, 20.0, 11.0]
    weights = [0.75, 0.55, -0.35, 0.4]
    return _gaussian_factory(d, centers, gammas, weights, "franke")


def _radial_power(d: int, beta: float) -> TestFunction:
    x0 = np.asarray(ROUGH_CENTER[:d])

    def evaluator(pts):
        return np.linalg.norm(pts - x0, axis=1) ** beta

    def partials(alpha):
        order = sum(alpha)

        def dfun(x):
            pts = np.atleast_2d(np.asarray(x, dtype=float))
            diff = pts - x0
            r = np.linalg.norm(diff, axis=1)
            if order == 1:
                i = alpha.index(1)
                return beta * r ** (beta - 2.0) * diff[:, i]
            if 2 in alpha:
                i = alpha.index(2)
                return beta * (beta - 2.0) * r ** (beta - 4.0) * diff[:, i] ** 2 + (
                    beta * r ** (beta - 2.0)
                )
            i, j = [idx for idx, a in enumerate(alpha) if a == 1]
            return beta * (beta - 2.0) * r ** (beta - 4.0) * diff[:, i] * diff[:, j]

        return dfun

    return TestFunction(
        name=f"rough_{beta:g}",
        d=d,
        evaluator=evaluator,
        smoothness="rough",
        rough_exponent=beta,
        singular_point=x0,
        analytic_order=2,
        _partials=partials,
    )


def _linear(d: int) -> TestFunction:
    # affine target: reproduced exactly by every kernel order, so studies
    # against it exercise the "exact" reporting path
    slope = np.arange(1, d + 1, dtype=float)

    def evaluator(pts):
        return 0.25 + pts @ slope

    def partials(alpha):
        order = sum(alpha)

        def dfun(x):
            pts = np.atleast_2d(np.asarray(x, dtype=float))
            if order == 0:
                return evaluator(pts)
            if order == 1:
                return np.full(len(pts), slope[alpha.index(1)])
            return np.zeros(len(pts))

        return dfun

    return TestFunction(
        name="linear", d=d, evaluator=evaluator, analytic_order=99, _partials=partials
    )


def _hat(d: int) -> TestFunction:
    if d != 1:
        raise ValueError("the hat function is one-dimensional")

    def evaluator(pts):
        return np.maximum(0.0, 1.0 - np.abs(2.0 * pts[:, 0] - 1.0))

    return TestFunction(name="hat", d=1, evaluator=evaluator, smoothness="rough")


_FACTORIES = {
    "trig": _trig_product,
    "gaussian": _gaussian_bump,
    "franke": _franke_sum,
    "linear": _linear,
    "rough_0.6": lambda d: _radial_power(d, 0.6),
    "rough_1.5": lambda d: _radial_power(d, 1.5),
    "rough_2.5": lambda d: _radial_power(d, 2.5),
    "hat": _hat,
}


def catalog_names() -> list[str]:
    return sorted(_FACTORIES)


def get_function(name: str, d: int) -> TestFunction:
    """Look up a catalog entry by name for the requested dimension."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise KeyError(
            f"unknown test function {name!r}; available: {', '.join(catalog_names())}"
        ) from None
    return factory(d)
