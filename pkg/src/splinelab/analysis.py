"""Error measurement, convergence studies, and scaling-law checks.

The measured quantities mirror the theory: derivative seminorms with the
rotation-invariant multinomial weights, L_p errors against deterministic
samplers, and log-log rate fits whose exponents are compared with the
predicted order beta(j) = j - d/2 + d/p for p >= 2 (and j for p < 2).
Instability runs use deliberately clustered node sets where the separation
collapses while the fill distance stays put; fit failures there are data,
not errors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .functions import TestFunction, fd_partial, fd_step_for_order, get_function
from .geometry import Domain, PointSet, generate_clustered, generate_quasi_uniform
from .mollifier import Mollifier, build_mollifier, mollified_partial
from .polybasis import UnisolvencyError, blh_coefficients
from .quadrature import (
    ball_quadrature,
    composite_gauss_1d,
    default_nodes_per_axis,
    gauss_legendre_box,
    halton_points,
)
from .spline import ConditioningError, fit

DEFAULT_EXCLUSION_RADIUS = 0.01
DEFAULT_LP_SAMPLES = 16384
DEFAULT_LP_GRID = 1025
EXACT_ERROR_THRESHOLD = 1e-10


def beta_rate(j: int, d: int, p: float) -> float:
    """Predicted L_p convergence exponent for smoothness order j."""
    if p >= 2:
        return j - d / 2.0 + (0.0 if np.isinf(p) else d / p)
    return float(j)


def domain_quadrature(domain: Domain, nodes_per_axis: int | None = None):
    """A quadrature rule over the domain (tensor Gauss on cubes, product polar on balls)."""
    n = nodes_per_axis or default_nodes_per_axis(domain.d)
    if domain.kind == "unit_cube":
        lo, hi = domain.bounding_box
        return gauss_legendre_box(lo, hi, n)
    return ball_quadrature(domain.d, n)


def _partial_values(f, alpha, pts, fd_step=None):
    dfun = f.partial(alpha) if isinstance(f, TestFunction) else None
    if dfun is not None:
        vals = np.asarray(dfun(pts), dtype=float)
    else:
        step = fd_step if fd_step is not None else fd_step_for_order(sum(alpha))
        vals = fd_partial(f, alpha, pts, step)
    if not np.all(np.isfinite(vals)):
        bad = pts[int(np.argmax(~np.isfinite(vals)))]
        raise ValueError(f"derivative D^{tuple(alpha)} failed at point {bad}")
    return vals


def beppo_levi_seminorm(
    f,
    domain: Domain,
    m: int,
    nodes_per_axis: int | None = None,
    exclusion=None,
    fd_step: float | None = None,
) -> float:
    """Quadrature value of the order-m derivative seminorm over the domain.

    Uses the multinomial weights from `blh_coefficients`, analytic partials
    where the function provides them and central differences otherwise.  For
    functions with a singular point an exclusion ball (center, radius) must
    be supplied; its removal makes the value a truncated proxy, reported for
    context only.
    """
    if (
        isinstance(f, TestFunction)
        and f.smoothness == "rough"
        and f.singular_point is not None
        and exclusion is None
    ):
        raise ValueError("rough functions need an exclusion ball (center, radius)")
    pts, w = domain_quadrature(domain, nodes_per_axis)
    if exclusion is not None:
        center, radius = exclusion
        keep = np.linalg.norm(pts - np.asarray(center, dtype=float), axis=1) > radius
        pts, w = pts[keep], w[keep]
    total = 0.0
    for alpha, c in blh_coefficients(domain.d, m).items():
        vals = _partial_values(f, alpha, pts, fd_step)
        total += c * float(np.sum(w * vals**2))
    return float(np.sqrt(total))


def _lp_samples(domain: Domain, n_samples: int, grid_points: int) -> np.ndarray:
    lo, hi = domain.bounding_box
    if domain.d == 1:
        return np.linspace(lo[0], hi[0], grid_points)[:, None]
    # deterministic Halton samples, rejection-restricted to the domain
    accepted = np.empty((0, domain.d))
    total_drawn = 0
    while len(accepted) < n_samples:
        total_drawn += max(n_samples, 1024)
        pts = lo + (hi - lo) * halton_points(domain.d, total_drawn)
        accepted = pts[domain.contains(pts)]
    return accepted[:n_samples]


def lp_error(
    f,
    g,
    domain: Domain,
    p: float,
    n_samples: int = DEFAULT_LP_SAMPLES,
    grid_points: int = DEFAULT_LP_GRID,
) -> float:
    """Sampled L_p distance between two evaluable functions over the domain.

    For finite p this is (mean |f-g|^p * vol)^(1/p) over the sample set
    (a 1-d tensor grid, or Halton points restricted to the domain); p = inf
    takes the sample maximum.
    """
    pts = _lp_samples(domain, n_samples, grid_points)
    diff = np.abs(np.asarray(f(pts), dtype=float) - np.asarray(g(pts), dtype=float))
    if np.isinf(p):
        return float(diff.max())
    return float((np.mean(diff**p) * domain.volume) ** (1.0 / p))


class RateFit(NamedTuple):
    slope: float
    r2: float


def fit_rate(hs, errors) -> RateFit:
    """Least-squares slope of log(error) against log(h), with the fit's R^2.

    Non-positive errors (exact interpolation) are excluded with a warning;
    fewer than three usable levels is an error.
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(hs) != len(errors) or len(hs) < 3:
        raise ValueError("need at least 3 (h, error) levels")
    if not np.all(np.diff(hs) < 0):
        raise ValueError("h values must be strictly decreasing")
    keep = errors > 0
    if not np.all(keep):
        warnings.warn(f"excluding {int(np.sum(~keep))} level(s) with non-positive error")
    if int(np.sum(keep)) < 3:
        raise ValueError("fewer than 3 levels with positive error")
    x, y = np.log(hs[keep]), np.log(errors[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(float(slope), float(r2))


def _format_p(p: float) -> str:
    return "inf" if np.isinf(p) else format(float(p), "g")


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return "nan"
    return format(float(x), ".17g")


@dataclass
class StudyConfig:
    """Configuration of a convergence study (all fields echo into the report)."""

    function: str
    d: int
    k: int
    m: int
    p_values: tuple
    h_schedule: tuple
    seed: int = 0
    domain_kind: str = "unit_cube"
    rho_bound: float = 4.0
    lp_samples: int = DEFAULT_LP_SAMPLES
    lp_grid: int = DEFAULT_LP_GRID


@dataclass
class StudyLevel:
    target_h: float
    h: float
    q: float
    rho: float
    n_nodes: int
    cond: float
    nbc: float
    errors: dict
    status: str = "ok"


@dataclass
class StudyReport:
    """Per-level error records plus fitted and predicted rates."""

    config: StudyConfig
    levels: list[StudyLevel]
    rates: dict = field(default_factory=dict)  # p -> RateFit or "exact"
    theory: dict = field(default_factory=dict)  # p -> beta(m)

    CSV_HEADER = "level,target_h,h,q,rho,n_nodes,p,error,cond,nbc_residual,status"

    def csv_text(self) -> str:
        lines = [self.CSV_HEADER]
        for i, lv in enumerate(self.levels):
            for p in self.config.p_values:
                err = lv.errors.get(p, float("nan"))
                lines.append(
                    ",".join(
                        [
                            str(i),
                            _fmt(lv.target_h),
                            _fmt(lv.h),
                            _fmt(lv.q),
                            _fmt(lv.rho),
                            str(lv.n_nodes),
                            _format_p(p),
                            _fmt(err),
                            _fmt(lv.cond),
                            _fmt(lv.nbc),
                            lv.status,
                        ]
                    )
                )
        return "\n".join(lines) + "\n"

    def summary_text(self) -> str:
        ok = sum(1 for lv in self.levels if lv.status == "ok")
        lines = [
            "command: study",
            f"function: {self.config.function}",
            f"d: {self.config.d}",
            f"k: {self.config.k}",
            f"m: {self.config.m}",
            f"seed: {self.config.seed}",
            f"levels_ok: {ok}/{len(self.levels)}",
        ]
        for p in self.config.p_values:
            tag = _format_p(p)
            rate = self.rates.get(p)
            if rate == "exact":
                lines.append(f"measured_rate_p_{tag}: exact")
            elif rate is not None:
                lines.append(f"measured_rate_p_{tag}: {rate.slope:.6g}")
                lines.append(f"r2_p_{tag}: {rate.r2:.6g}")
            lines.append(f"theory_rate_p_{tag}: {self.theory[p]:.6g}")
        return "\n".join(lines) + "\n"


def convergence_study(cfg: StudyConfig) -> StudyReport:
    """Run the refinement ladder: generate nodes, fit, measure, fit rates.

    Levels run from coarse to fine; a fit failure at one level is recorded in
    its row and excluded from the rate fit.  Everything is deterministic for
    a fixed config and seed.
    """
    domain = Domain(cfg.domain_kind, cfg.d)
    f = get_function(cfg.function, cfg.d)
    schedule = sorted(cfg.h_schedule, reverse=True)
    levels = []
    for i, target_h in enumerate(schedule):
        nodes = generate_quasi_uniform(domain, target_h, seed=cfg.seed * 1009 + i)
        rho = nodes.fill_h / nodes.separation_q
        values = f(nodes.points)
        try:
            model = fit(nodes, values, cfg.d, cfg.k)
        except (UnisolvencyError, ConditioningError) as exc:
            cond = getattr(exc, "cond_estimate", getattr(exc, "condition", np.nan))
            levels.append(
                StudyLevel(
                    target_h, nodes.fill_h, nodes.separation_q, rho, len(nodes),
                    float(cond), np.nan, {}, status="fit_failed",
                )
            )
            continue
        errors = {
            p: lp_error(f, model, domain, p, cfg.lp_samples, cfg.lp_grid)
            for p in cfg.p_values
        }
        levels.append(
            StudyLevel(
                target_h, nodes.fill_h, nodes.separation_q, rho, len(nodes),
                model.diagnostics.cond_estimate, model.diagnostics.nbc_residual,
                errors,
            )
        )

    report = StudyReport(config=cfg, levels=levels)
    good = [lv for lv in levels if lv.status == "ok"]
    for p in cfg.p_values:
        report.theory[p] = beta_rate(cfg.m, cfg.d, p)
        errs = np.array([lv.errors[p] for lv in good])
        if len(good) >= 3 and np.all(errs <= EXACT_ERROR_THRESHOLD):
            report.rates[p] = "exact"
        elif len(good) >= 3:
            hs = np.array([lv.h for lv in good])
            order = np.argsort(-hs)
            report.rates[p] = fit_rate(hs[order], errs[order])
    return report


@dataclass
class InstabilityConfig:
    function: str
    d: int
    k: int
    base_h: float
    cluster_factors: tuple
    seed: int = 0
    domain_kind: str = "unit_cube"
    lp_samples: int = DEFAULT_LP_SAMPLES
    lp_grid: int = DEFAULT_LP_GRID


@dataclass
class InstabilityRow:
    factor: float
    q: float
    rho: float
    cond: float
    mu_max: float
    sf_l1: float
    status: str = "ok"


@dataclass
class InstabilityReport:
    config: InstabilityConfig
    rows: list[InstabilityRow]

    CSV_HEADER = "cluster_factor,q,rho,cond,mu_max,sf_l1,status"

    def csv_text(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(
                ",".join(
                    [
                        _fmt(r.factor), _fmt(r.q), _fmt(r.rho), _fmt(r.cond),
                        _fmt(r.mu_max), _fmt(r.sf_l1), r.status,
                    ]
                )
            )
        return "\n".join(lines) + "\n"


def instability_study(cfg: InstabilityConfig) -> InstabilityReport:
    """Growth of the interpolant as one satellite node collapses the separation.

    For each cluster factor the same seeded base set gains one satellite at
    shrinking distance; the row records separation, mesh ratio, condition
    estimate, the largest kernel weight, and the sampled L1 size of the
    interpolant.  Conditioning failures become rows, not exceptions.
    """
    domain = Domain(cfg.domain_kind, cfg.d)
    f = get_function(cfg.function, cfg.d)
    zero = lambda pts: np.zeros(len(pts))
    rows = []
    for factor in cfg.cluster_factors:
        nodes = generate_clustered(domain, cfg.base_h, factor, cfg.seed)
        rho = nodes.fill_h / nodes.separation_q
        values = f(nodes.points)
        try:
            model = fit(nodes, values, cfg.d, cfg.k)
        except ConditioningError as exc:
            rows.append(
                InstabilityRow(
                    factor, nodes.separation_q, rho, exc.cond_estimate,
                    np.nan, np.nan, status="fit_failed",
                )
            )
            continue
        sf_l1 = lp_error(model, zero, domain, 1.0, cfg.lp_samples, cfg.lp_grid)
        rows.append(
            InstabilityRow(
                factor, nodes.separation_q, rho,
                model.diagnostics.cond_estimate,
                float(np.abs(model.mu).max()), sf_l1,
            )
        )
    return InstabilityReport(config=cfg, rows=rows)


def affine_pullback(f: TestFunction, h: float, a, t) -> TestFunction:
    """The composed function x -> f(a + h(x - t)), with composed partials."""
    a = np.asarray(a, dtype=float)
    t = np.asarray(t, dtype=float)

    def sigma(pts):
        return a + h * (np.atleast_2d(np.asarray(pts, dtype=float)) - t)

    def evaluator(pts):
        return f(sigma(pts))

    def partials(alpha):
        base = f.partial(alpha)
        if base is None:
            return None
        order = sum(alpha)

        def dfun(pts):
            return h**order * base(sigma(pts))

        return dfun

    return TestFunction(
        name=f"{f.name}@scale{h:g}",
        d=f.d,
        evaluator=evaluator,
        smoothness=f.smoothness,
        analytic_order=f.analytic_order,
        _partials=partials if f.analytic_order else None,
    )


@dataclass
class ScalingCaseResult:
    h: float
    lhs: float
    rhs: float
    rel_discrepancy: float


@dataclass
class ScalingReport:
    cases: list[ScalingCaseResult]

    @property
    def max_rel_discrepancy(self) -> float:
        return max(c.rel_discrepancy for c in self.cases)


def scaling_check_cov(
    f: TestFunction,
    domain: Domain,
    m: int,
    cases,
    nodes_per_axis: int | None = None,
) -> ScalingReport:
    """Numerical check of the dilation identity for the derivative seminorm.

    For sigma(x) = a + h(x - t) the seminorm of the pullback over the domain
    must equal h^(m - d/2) times the seminorm of f over the image.  The two
    sides are discretized independently: the left side integrates the
    composed function over the base domain, the right side integrates f over
    the mapped domain on a rule of 3/2 the resolution.
    """
    n = nodes_per_axis or default_nodes_per_axis(domain.d)
    results = []
    for h, a, t in cases:
        a = np.asarray(a, dtype=float)
        t = np.asarray(t, dtype=float)
        lhs = beppo_levi_seminorm(affine_pullback(f, h, a, t), domain, m, n)
        pts, w = domain_quadrature(domain, max(n + 8, int(1.5 * n)))
        mapped = a + h * (pts - t)
        w_mapped = w * h**domain.d
        total = 0.0
        for alpha, c in blh_coefficients(domain.d, m).items():
            vals = _partial_values(f, alpha, mapped)
            total += c * float(np.sum(w_mapped * vals**2))
        rhs = h ** (m - domain.d / 2.0) * float(np.sqrt(total))
        rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
        results.append(ScalingCaseResult(h, lhs, rhs, rel))
    return ScalingReport(results)


@dataclass
class ConvolutionScalingReport:
    hs: tuple
    seminorms: tuple
    slope: float
    r2: float
    normalized: tuple  # seminorm * h^(k - m)
    tail_nonincreasing: bool


def convolution_scaling_check(
    f: TestFunction,
    m: int,
    k: int,
    hs,
    phi: Mollifier | None = None,
    support=None,
    panel_nodes: int = 8,
) -> ConvolutionScalingReport:
    """Decay of the order-k seminorm of the scale-h mollification of f.

    The theory bounds |phi_h * f|_k by a constant times h^(m-k) |f|_m with a
    little-o refinement; the report carries the fitted log-log slope and the
    normalized sequence |phi_h * f|_k * h^(k-m), whose tail should not grow
    as h shrinks.  Compactly supported f only; cost restricts d to 1 or 2.
    """
    d = f.d
    if d > 2:
        raise ValueError("convolution scaling check supports d = 1 or 2 only")
    if phi is None:
        phi = build_mollifier(d, m)
    if support is None:
        lo, hi = np.zeros(d), np.ones(d)
    else:
        lo, hi = (np.asarray(s, dtype=float) for s in support)
    hs = tuple(float(h) for h in hs)
    coeffs = blh_coefficients(d, k)
    seminorms = []
    for h in hs:
        margin = h + 1e-3
        if d == 1:
            x, w = composite_gauss_1d(
                lo[0] - margin, hi[0] + margin, panel_width=h / 2.0,
                nodes_per_panel=panel_nodes,
            )
            pts = x[:, None]
        else:
            ax = [
                composite_gauss_1d(lo[i] - margin, hi[i] + margin, h / 2.0, panel_nodes)
                for i in range(d)
            ]
            gx, gy = np.meshgrid(ax[0][0], ax[1][0], indexing="ij")
            pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
            w = np.outer(ax[0][1], ax[1][1]).ravel()
        total = 0.0
        for alpha, c in coeffs.items():
            vals = np.array([mollified_partial(f, phi, h, alpha, x) for x in pts])
            total += c * float(np.sum(w * vals**2))
        seminorms.append(float(np.sqrt(total)))
    rate = fit_rate(hs, seminorms)
    normalized = tuple(s * h ** (k - m) for s, h in zip(seminorms, hs))
    tail_ok = normalized[-1] <= normalized[-2] * (1.0 + 1e-9)
    return ConvolutionScalingReport(
        hs=hs,
        seminorms=tuple(seminorms),
        slope=rate.slope,
        r2=rate.r2,
        normalized=normalized,
        tail_nonincreasing=bool(tail_ok),
    )
