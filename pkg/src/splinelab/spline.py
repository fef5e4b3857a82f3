"""Surface-spline interpolation of scattered data.

The interpolant is a combination of radial-kernel translates centered at the
nodes plus a low-degree polynomial tail, pinned down by the interpolation
conditions together with the side constraints sum_a mu_a q(a) = 0 for every
polynomial q of the tail space (natural boundary conditions).  The kernel is
r^(2k-d) when d is odd and r^(2k-d) log r when d is even; in one dimension
with k=2 this reduces to the natural cubic spline, in two dimensions with
k=2 to the thin-plate spline.

Fitting solves the dense symmetric saddle-point system with a
Bunch-Kaufman-pivoted factorization; near-singular systems fall back to a
column-pivoted QR, and anything below the reciprocal-condition floor raises
ConditioningError (which studies intentionally catch as data).  Node
coordinates are mapped to a unit frame before assembly; for the log-branch
kernels that rescaling shifts the solution by a polynomial of the tail
space, so the fitted tail simply lives in the same frame and evaluation maps
back through it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, qr, solve_triangular
from scipy.spatial.distance import cdist, pdist, squareform

from .geometry import Domain, PointSet
from .polybasis import (
    Polynomial,
    PolySpace,
    UnisolvencyError,
    check_unisolvent,
    monomial_matrix,
    normalization_frame,
)

RCOND_FLOOR = 1e-14
INTERP_TOLERANCE = 1e-8
NBC_TOLERANCE = 1e-9


class ConditioningError(RuntimeError):
    """Raised when the interpolation system is numerically singular."""

    def __init__(self, message: str, cond_estimate: float = np.inf):
        super().__init__(message)
        self.cond_estimate = cond_estimate


@dataclass(frozen=True)
class BasicFunction:
    """The radial kernel r^(2k-d), with a log factor when d is even."""

    d: int
    k: int

    def __post_init__(self):
        if 2 * self.k <= self.d:
            raise ValueError("order too low for dimension")

    @property
    def exponent(self) -> int:
        return 2 * self.k - self.d

    @property
    def uses_log(self) -> bool:
        return self.d % 2 == 0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if not self.uses_log:
            return r**self.exponent
        out = np.zeros_like(r)
        pos = r > 0
        # r^e log r -> 0 as r -> 0 since e = 2k-d > 0
        out[pos] = r[pos] ** self.exponent * np.log(r[pos])
        return out


def basic_function(d: int, k: int) -> BasicFunction:
    return BasicFunction(d, k)


def assemble(nodes, basic: BasicFunction) -> np.ndarray:
    """Dense symmetric saddle-point matrix [[Psi, P], [P^T, 0]].

    Psi_ij is the kernel at the pairwise node distances and P the monomial
    matrix of the tail space; the block layout is symmetric by construction.
    Accepts a PointSet or a raw (N, d) array in whatever frame the caller
    prefers.
    """
    pts = nodes.points if isinstance(nodes, PointSet) else np.atleast_2d(np.asarray(nodes, dtype=float))
    space = PolySpace(basic.d, basic.k - 1)
    n = len(pts)
    psi = basic(squareform(pdist(pts))) if n > 1 else np.zeros((1, 1))
    p = monomial_matrix(pts, space.basis)
    ell = space.dim
    a = np.zeros((n + ell, n + ell))
    a[:n, :n] = psi
    a[:n, n:] = p
    a[n:, :n] = p.T
    return a


def _solve_saddle(a: np.ndarray, b: np.ndarray):
    """Solve the symmetric indefinite system, returning (x, cond_estimate, method)."""
    anorm = np.linalg.norm(a, 1)
    ldu, ipiv, info = lapack.dsytrf(a, lower=1)
    if info == 0:
        rcond, _ = lapack.dsycon(ldu, ipiv, anorm, lower=1)
        if rcond >= RCOND_FLOOR:
            x, info2 = lapack.dsytrs(ldu, ipiv, b, lower=1)
            if info2 == 0:
                return x, 1.0 / max(rcond, 1e-300), "sytrf"
    # pivoted-factorization path failed or is near-singular: try pivoted QR
    q, r, piv = qr(a, pivoting=True)
    rdiag = np.abs(np.diag(r))
    rcond_qr = rdiag.min() / rdiag.max() if rdiag.max() > 0 else 0.0
    cond = 1.0 / max(rcond_qr, 1e-300)
    if rcond_qr < RCOND_FLOOR:
        raise ConditioningError(
            f"interpolation system numerically singular (condition ~ {cond:.3e})",
            cond_estimate=cond,
        )
    z = solve_triangular(r, q.T @ b, lower=False)
    x = np.empty_like(z)
    x[piv] = z
    return x, cond, "qr"


@dataclass
class SolveDiagnostics:
    cond_estimate: float
    interp_residual: float
    nbc_residual: float
    method: str


@dataclass
class SurfaceSplineModel:
    """A fitted surface spline: nodes, kernel weights, and polynomial tail.

    `mu` and `tail` are expressed in the normalization frame (`center`,
    `scale`) computed from the nodes; evaluation routes any query point
    through the same frame, which realizes the tail correction the
    log-branch kernels need under rescaling.
    """

    nodes: PointSet
    basic: BasicFunction
    mu: np.ndarray
    tail: Polynomial
    center: np.ndarray
    scale: float
    diagnostics: SolveDiagnostics

    @property
    def nodes_normalized(self) -> np.ndarray:
        return (self.nodes.points - self.center) / self.scale

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        y = (pts - self.center) / self.scale
        vals = self.basic(cdist(y, self.nodes_normalized)) @ self.mu + self.tail(pts)
        return float(vals[0]) if single else vals


def evaluate(model: SurfaceSplineModel, x):
    """Evaluate the fitted interpolant at one point or an array of points."""
    return model(x)


def nbc_residual(model: SurfaceSplineModel) -> float:
    """Worst normalized violation of the polynomial side constraints.

    For each basis monomial q of the tail space this is
    |sum_a mu_a q(a)| / (||mu||_1 * max_a |q(a)|), taken over the nodes in
    the model frame; exactly zero weights give zero.
    """
    p = monomial_matrix(model.nodes_normalized, model.tail.space.basis)
    mu1 = np.abs(model.mu).sum()
    if mu1 == 0.0:
        return 0.0
    sums = np.abs(model.mu @ p)
    scales = np.abs(p).max(axis=0)
    scales[scales == 0.0] = 1.0
    return float(np.max(sums / (mu1 * scales)))


def fit(nodes: PointSet, values, d: int, k: int) -> SurfaceSplineModel:
    """Interpolate values at the nodes by the order-k surface spline.

    Requires 2k > d and a node set that determines the degree-(k-1) tail
    uniquely.  Raises UnisolvencyError for degenerate node sets and
    ConditioningError when the linear system is numerically singular or the
    solved model fails its interpolation / side-constraint gates.
    """
    if d != nodes.domain.d:
        raise ValueError(f"nodes live in dimension {nodes.domain.d}, got d={d}")
    basic = BasicFunction(d, k)
    vals = np.asarray(values, dtype=float).ravel()
    if len(vals) != len(nodes):
        raise ValueError("values length must equal node count")

    space = PolySpace(d, k - 1)
    center, scale = normalization_frame(nodes.points)
    y = (nodes.points - center) / scale
    flag, condition = check_unisolvent(y, space)
    if not flag:
        raise UnisolvencyError(
            f"nodes are not unisolvent for the degree-{k - 1} tail "
            f"(condition estimate {condition:.3e})",
            condition=condition,
        )

    a = assemble(y, basic)
    b = np.concatenate([vals, np.zeros(space.dim)])
    x, cond, method = _solve_saddle(a, b)
    mu = x[: len(nodes)]
    tail = Polynomial(space, x[len(nodes) :], center=center, scale=scale)

    model = SurfaceSplineModel(
        nodes=nodes,
        basic=basic,
        mu=mu,
        tail=tail,
        center=center,
        scale=scale,
        diagnostics=SolveDiagnostics(cond, 0.0, 0.0, method),
    )
    data_scale = max(1.0, float(np.abs(vals).max()) if len(vals) else 1.0)
    interp_res = float(np.abs(model(nodes.points) - vals).max())
    nbc_res = nbc_residual(model)
    model.diagnostics.interp_residual = interp_res
    model.diagnostics.nbc_residual = nbc_res
    mu_negligible = np.abs(mu).sum() <= NBC_TOLERANCE * data_scale
    if interp_res > INTERP_TOLERANCE * data_scale or (
        nbc_res > NBC_TOLERANCE and not mu_negligible
    ):
        raise ConditioningError(
            f"fit rejected: interpolation residual {interp_res:.3e}, "
            f"side-constraint residual {nbc_res:.3e} (condition ~ {cond:.3e})",
            cond_estimate=cond,
        )
    return model


def save_model(model: SurfaceSplineModel, path) -> None:
    """Serialize a model to a flat text file (17 significant digits throughout)."""
    n, ell = len(model.nodes), model.tail.space.dim
    seed = model.nodes.generation_seed
    lines = [
        "surface-spline-model 1",
        f"d={model.basic.d} k={model.basic.k} n={n} ell={ell} "
        f"domain={model.nodes.domain.kind} seed={seed if seed is not None else 'none'}",
    ]
    for row in model.nodes.points:
        lines.append(",".join(format(v, ".17g") for v in row))
    lines.append(",".join(format(v, ".17g") for v in model.mu))
    lines.append(",".join(format(v, ".17g") for v in model.tail.coeffs))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> SurfaceSplineModel:
    """Rebuild a model written by `save_model`.

    Node coordinates round-trip exactly at 17 significant digits, and the
    normalization frame is a pure function of the nodes, so the loaded model
    evaluates identically to the saved one.
    """
    with open(path) as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0] != "surface-spline-model 1":
        raise ValueError("line 1: not a surface-spline model file")
    fields = dict(item.split("=", 1) for item in raw[1].split() if "=" in item)
    try:
        d, k = int(fields["d"]), int(fields["k"])
        n, ell = int(fields["n"]), int(fields["ell"])
        kind = fields["domain"]
        seed = None if fields["seed"] == "none" else int(fields["seed"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"line 2: bad model header ({exc})") from exc
    if len(raw) < 2 + n + 2:
        raise ValueError(f"line {len(raw)}: truncated model file")
    pts = np.asarray([[float(v) for v in raw[2 + i].split(",")] for i in range(n)])
    mu = np.asarray([float(v) for v in raw[2 + n].split(",")])
    tail_coeffs = np.asarray([float(v) for v in raw[3 + n].split(",")])
    if pts.shape != (n, d) or len(mu) != n or len(tail_coeffs) != ell:
        raise ValueError("model file rows inconsistent with header")

    nodes = PointSet(Domain(kind, d), pts, generation_seed=seed)
    space = PolySpace(d, k - 1)
    center, scale = normalization_frame(nodes.points)
    tail = Polynomial(space, tail_coeffs, center=center, scale=scale)
    model = SurfaceSplineModel(
        nodes=nodes,
        basic=BasicFunction(d, k),
        mu=mu,
        tail=tail,
        center=center,
        scale=scale,
        diagnostics=SolveDiagnostics(np.nan, np.nan, np.nan, "loaded"),
    )
    model.diagnostics.nbc_residual = nbc_residual(model)
    return model
