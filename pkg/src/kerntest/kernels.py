"""Kernel families, bandwidth selection and Stein kernels.

Three translation-invariant families are provided, each in two forms:

* bounded form (default): ``k(x, x) = 1``, which is the form every test
  path relies on since the kernel bound enters sensitivity and U/V
  inequalities;
* density form (``normalized=True``): the kernel is divided by the
  product of bandwidths together with the family's normalisation
  constant, so that the Gaussian and Laplace kernels integrate to one.

With scaled coordinate differences ``t_i = (x_i - y_i) / lambda_i`` the
bounded forms are

* gaussian:  ``exp(-sum(t_i^2) / 2)``
* laplace:   ``exp(-sum(|t_i|))``
* imq:       ``(1 + sum(t_i^2))^(-beta)``  with ``beta in (1/2, 1)``

First and mixed second derivatives are computed analytically per family;
finite differences are used only as a test oracle.  The Laplace kernel is
not differentiable on coordinate-coincidence sets; its derivatives here
are the almost-everywhere expressions with the ``sign(0) = 0`` convention,
so a Laplace Stein matrix is not positive semi-definite in general (the
Gaussian and IMQ Stein matrices are).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np

FAMILIES = ("gaussian", "laplace", "imq")

DEFAULT_IMQ_EXPONENT = 0.75


@dataclasses.dataclass(frozen=True)
class KernelSpec:
    """A kernel family with its bandwidth(s) and form.

    ``bandwidth`` is either a positive scalar (isotropic) or a vector of
    per-dimension bandwidths.  ``imq_exponent`` must be given exactly for
    the IMQ family and lie strictly in (1/2, 1).
    """

    family: str
    bandwidth: float | tuple[float, ...]
    imq_exponent: float | None = None
    normalized: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        bw = np.atleast_1d(np.asarray(self.bandwidth, dtype=float))
        if bw.ndim != 1 or bw.size == 0:
            raise ValueError("bandwidth must be a scalar or a 1-d vector")
        if not np.all(np.isfinite(bw)) or np.any(bw <= 0):
            raise ValueError("bandwidth components must be positive and finite")
        if self.family == "imq":
            if self.imq_exponent is None:
                raise ValueError("imq kernel requires imq_exponent")
            if not (0.5 < self.imq_exponent < 1.0):
                raise ValueError("imq_exponent must lie strictly in (1/2, 1)")
        elif self.imq_exponent is not None:
            raise ValueError("imq_exponent is only valid for the imq family")

    def bandwidth_vector(self, dim: int) -> np.ndarray:
        """Bandwidths broadcast to shape (dim,)."""
        bw = np.atleast_1d(np.asarray(self.bandwidth, dtype=float))
        if bw.size == 1:
            return np.full(dim, bw[0])
        if bw.size != dim:
            raise ValueError(f"bandwidth has {bw.size} components, data has dimension {dim}")
        return bw.copy()

    def describe(self) -> dict:
        """JSON-friendly description of the kernel."""
        bw = np.atleast_1d(np.asarray(self.bandwidth, dtype=float))
        out = {
            "family": self.family,
            "bandwidth": float(bw[0]) if bw.size == 1 else [float(v) for v in bw],
            "normalized": self.normalized,
        }
        if self.family == "imq":
            out["imq_exponent"] = float(self.imq_exponent)
        return out


def gaussian_kernel(bandwidth, normalized: bool = False) -> KernelSpec:
    return KernelSpec("gaussian", bandwidth, normalized=normalized)


def laplace_kernel(bandwidth, normalized: bool = False) -> KernelSpec:
    return KernelSpec("laplace", bandwidth, normalized=normalized)


def imq_kernel(bandwidth, exponent: float = DEFAULT_IMQ_EXPONENT, normalized: bool = False) -> KernelSpec:
    return KernelSpec("imq", bandwidth, imq_exponent=exponent, normalized=normalized)


def _as_points(a) -> np.ndarray:
    pts = np.asarray(a, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("points must form a 2-d array (rows = samples)")
    return pts


def _norm_const(spec: KernelSpec, dim: int) -> float:
    """Multiplier turning the bounded form into the density form."""
    if not spec.normalized:
        return 1.0
    prod = float(np.prod(spec.bandwidth_vector(dim)))
    if spec.family == "gaussian":
        return (2.0 * math.pi) ** (-dim / 2.0) / prod
    if spec.family == "laplace":
        return 2.0 ** (-dim) / prod
    return 1.0 / prod  # imq: no closed-form normaliser, 1/prod(lambda) scaling


def kernel_bound(spec: KernelSpec, dim: int) -> float:
    """K = k(x, x), the supremum of the kernel."""
    return _norm_const(spec, dim)


def _scaled_diff(A: np.ndarray, B: np.ndarray, lam: np.ndarray) -> np.ndarray:
    return (A[:, None, :] - B[None, :, :]) / lam


def gram_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Matrix of kernel values, entry (i, j) = k(A_i, B_j).

    Symmetric with diagonal ``kernel_bound`` when ``A is B`` row-for-row.
    """
    A, B = _as_points(A), _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    lam = spec.bandwidth_vector(A.shape[1])
    U = _scaled_diff(A, B, lam)
    if spec.family == "gaussian":
        base = np.exp(-0.5 * np.einsum("mnd,mnd->mn", U, U))
    elif spec.family == "laplace":
        base = np.exp(-np.abs(U).sum(axis=-1))
    else:
        base = (1.0 + np.einsum("mnd,mnd->mn", U, U)) ** (-spec.imq_exponent)
    return _norm_const(spec, A.shape[1]) * base


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """k(x, y) for two single points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(gram_matrix(spec, x[None, :], y[None, :])[0, 0])


def grad1_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Gradients of k with respect to the first argument, shape (m, n, d)."""
    A, B = _as_points(A), _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    dim = A.shape[1]
    lam = spec.bandwidth_vector(dim)
    c = _norm_const(spec, dim)
    U = _scaled_diff(A, B, lam)
    if spec.family == "gaussian":
        K = np.exp(-0.5 * np.einsum("mnd,mnd->mn", U, U))
        return -(U / lam) * (c * K)[:, :, None]
    if spec.family == "laplace":
        K = np.exp(-np.abs(U).sum(axis=-1))
        return -(np.sign(U) / lam) * (c * K)[:, :, None]
    beta = spec.imq_exponent
    r2 = np.einsum("mnd,mnd->mn", U, U)
    return -2.0 * beta * (U / lam) * (c * (1.0 + r2) ** (-beta - 1.0))[:, :, None]


def grad2_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Gradients with respect to the second argument; -grad1 for these even kernels."""
    return -grad1_matrix(spec, A, B)


def cross_derivative_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """sum_i d^2 k / dx_i dy_i, shape (m, n)."""
    A, B = _as_points(A), _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    dim = A.shape[1]
    lam = spec.bandwidth_vector(dim)
    c = _norm_const(spec, dim)
    U = _scaled_diff(A, B, lam)
    inv2 = 1.0 / lam**2
    if spec.family == "gaussian":
        K = np.exp(-0.5 * np.einsum("mnd,mnd->mn", U, U))
        return c * K * ((1.0 - U**2) * inv2).sum(axis=-1)
    if spec.family == "laplace":
        K = np.exp(-np.abs(U).sum(axis=-1))
        return -c * K * ((np.sign(U) ** 2) * inv2).sum(axis=-1)
    beta = spec.imq_exponent
    r2 = np.einsum("mnd,mnd->mn", U, U)
    base = 1.0 + r2
    term1 = 2.0 * beta * inv2.sum() * base ** (-beta - 1.0)
    term2 = 4.0 * beta * (beta + 1.0) * (U**2 * inv2).sum(axis=-1) * base ** (-beta - 2.0)
    return c * (term1 - term2)


@dataclasses.dataclass(frozen=True)
class ScoreField:
    """A gradient-of-log-density field.

    ``evaluate`` maps an (n, d) array of points to an (n, d) array of
    score vectors.  ``bound`` is a known supremum of the score norm; when
    absent, consumers fall back to the maximum observed norm.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    provenance: str = "closed_form"
    bound: float | None = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = _as_points(points)
        out = np.asarray(self.evaluate(points), dtype=float)
        if out.shape != points.shape:
            raise ValueError(f"score output shape {out.shape} does not match points {points.shape}")
        return out


def standard_gaussian_score() -> ScoreField:
    """Score of N(0, I): s(x) = -x.  The norm is unbounded on R^d."""
    return ScoreField(evaluate=lambda x: -x, provenance="closed_form", bound=None)


def student_t_score(df: float, dim: int) -> ScoreField:
    """Score of the multivariate t model p(x) ~ (1 + |x|^2/df)^(-(df+dim)/2).

    s(x) = -(df + dim) x / (df + |x|^2).  The squared norm
    (df + dim)^2 |x|^2 / (df + |x|^2)^2 peaks at |x|^2 = df, so the norm
    is bounded by (df + dim) / (2 sqrt(df)).
    """
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")

    def _eval(x: np.ndarray) -> np.ndarray:
        return -(df + dim) * x / (df + (x**2).sum(axis=1, keepdims=True))

    return ScoreField(evaluate=_eval, provenance="closed_form", bound=(df + dim) / (2.0 * math.sqrt(df)))


def stein_kernel(spec: KernelSpec, score: ScoreField, x, y) -> float:
    """Stein kernel value h_P(x, y) for a score field s = grad log p.

    h_P(x,y) = k(x,y) s(x)'s(y) + grad1 k(x,y)'s(y) + grad2 k(x,y)'s(x)
               + sum_i d^2 k / dx_i dy_i.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    y = np.atleast_1d(np.asarray(y, dtype=float))[None, :]
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    sx, sy = score(x)[0], score(y)[0]
    k = gram_matrix(spec, x, y)[0, 0]
    g1 = grad1_matrix(spec, x, y)[0, 0]
    c = cross_derivative_matrix(spec, x, y)[0, 0]
    return float(k * (sx @ sy) + g1 @ sy + (-g1) @ sx + c)


def stein_matrix(spec: KernelSpec, points, scores) -> np.ndarray:
    """Matrix of Stein kernel values over one sample, exactly symmetric."""
    X = _as_points(points)
    S = np.asarray(scores, dtype=float)
    if S.shape != X.shape:
        raise ValueError(f"scores shape {S.shape} does not match points {X.shape}")
    K = gram_matrix(spec, X, X)
    G1 = grad1_matrix(spec, X, X)
    C = cross_derivative_matrix(spec, X, X)
    H = K * (S @ S.T)
    H += np.einsum("ijd,jd->ij", G1, S)
    H -= np.einsum("ijd,id->ij", G1, S)
    H += C
    return 0.5 * (H + H.T)  # remove ulp-level BLAS asymmetry


def derivative_bounds(spec: KernelSpec, dim: int) -> tuple[float, float, float]:
    """Conservative suprema (K, G, H) of |k|, |grad1 k|_2 and |sum d^2k/dx_i dy_i|."""
    lam = spec.bandwidth_vector(dim)
    lam_min = float(lam.min())
    inv2_sum = float((1.0 / lam**2).sum())
    c = _norm_const(spec, dim)
    if spec.family == "gaussian":
        return c, c * math.exp(-0.5) / lam_min, c * dim / lam_min**2
    if spec.family == "laplace":
        return c, c * math.sqrt(inv2_sum), c * inv2_sum
    beta = spec.imq_exponent
    return c, c * beta / lam_min, c * (2.0 * beta * inv2_sum + 4.0 * beta * (beta + 1.0) / lam_min**2)


def stein_kernel_bound(spec: KernelSpec, dim: int, score_bound: float) -> float:
    """Closed-form bound on |h_P| from derivative bounds and a score-norm bound."""
    if score_bound < 0:
        raise ValueError("score bound must be nonnegative")
    K, G, H = derivative_bounds(spec, dim)
    return K * score_bound**2 + 2.0 * G * score_bound + H


def _sorted_nonzero_distances(points: np.ndarray) -> np.ndarray:
    X = _as_points(points)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 points")
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.einsum("mnd,mnd->mn", diff, diff))
    iu = np.triu_indices(X.shape[0], k=1)
    vals = np.sort(dist[iu])
    vals = vals[vals > 0]
    if vals.size == 0:
        raise ValueError("all points are identical: no positive pairwise distance")
    return vals


def median_heuristic(points) -> float:
    """Median of the nonzero pairwise Euclidean distances."""
    return float(np.median(_sorted_nonzero_distances(points)))


def bandwidth_grid(points, count: int) -> np.ndarray:
    """Geometric bandwidth grid spanning the inter-sample distances.

    Returns ``count`` bandwidths geometrically spaced between the 5% and
    95% quantiles of the nonzero pairwise distances.  Distances are sorted
    before the quantiles are taken, so the output is invariant under any
    reordering of the input rows.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    vals = _sorted_nonzero_distances(points)
    lo = float(np.quantile(vals, 0.05))
    hi = float(np.quantile(vals, 0.95))
    if count == 1:
        return np.array([math.sqrt(lo * hi)])
    return np.geomspace(lo, hi, count)
