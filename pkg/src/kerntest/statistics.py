"""Core-function matrices and the statistics built on them.

All three discrepancy estimators reduce to averages of a symmetric
core matrix H over index pairs:

* complete V-statistic: mean over all pairs including the diagonal;
* complete U-statistic: mean over off-diagonal pairs;
* incomplete statistic: mean over an explicit design of pairs;
* block B-statistic: mean over the within-block off-diagonal pairs of
  consecutive blocks (the trailing smaller block is dropped).

Two HSIC cores are provided.  ``core_matrix_hsic`` is the N x N
doubly-centered product core used on the permutation path; permuting the
Y component conjugates its second factor.  ``core_matrix_hsic_wild``
splits the N paired samples in half and multiplies the two half-sample
MMD cores; for that (N/2) x (N/2) core, flipping the sign of block i is
exactly equivalent to swapping pairs i and i + N/2, which is what makes
the wild bootstrap a permutation test.  The doubly-centered core does
not satisfy that identity.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import kernels
from .kernels import KernelSpec, ScoreField

FRAMEWORKS = ("mmd", "hsic", "ksd")


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array (rows = samples)")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclasses.dataclass(frozen=True)
class TwoSampleData:
    """Samples X (m x d) and Y (n x d) from the two distributions under test."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_matrix(self.x, "x"))
        object.__setattr__(self, "y", _as_matrix(self.y, "y"))
        if self.x.shape[1] != self.y.shape[1]:
            raise ValueError("x and y must share their dimension")
        if self.x.shape[0] < 2 or self.y.shape[0] < 2:
            raise ValueError("need at least 2 samples on each side")

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclasses.dataclass(frozen=True)
class PairedData:
    """Jointly observed pairs, stored as rows of Z = [X | Y] with a split index."""

    z: np.ndarray
    split: int

    def __post_init__(self):
        object.__setattr__(self, "z", _as_matrix(self.z, "z"))
        if not (1 <= self.split < self.z.shape[1]):
            raise ValueError(f"split index {self.split} out of range for {self.z.shape[1]} columns")
        if self.z.shape[0] < 2:
            raise ValueError("need at least 2 paired samples")

    @classmethod
    def from_parts(cls, x, y) -> "PairedData":
        x, y = _as_matrix(x, "x"), _as_matrix(y, "y")
        if x.shape[0] != y.shape[0]:
            raise ValueError("paired samples need matching lengths")
        return cls(np.hstack([x, y]), x.shape[1])

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def x_part(self) -> np.ndarray:
        return self.z[:, : self.split]

    @property
    def y_part(self) -> np.ndarray:
        return self.z[:, self.split :]


@dataclasses.dataclass(frozen=True)
class ModelSampleData:
    """One sample plus score values of the model at the sample points.

    ``scores`` may be omitted for operations that do not need them (the
    plug-in one-sample MMD); the KSD core requires them.
    """

    x: np.ndarray
    scores: np.ndarray | None = None
    score_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", _as_matrix(self.x, "x"))
        if self.scores is not None:
            s = _as_matrix(self.scores, "scores")
            if s.shape != self.x.shape:
                raise ValueError("scores must have the same shape as the sample")
            object.__setattr__(self, "scores", s)
        if self.x.shape[0] < 2:
            raise ValueError("need at least 2 samples")

    @classmethod
    def from_score_field(cls, x, field: ScoreField) -> "ModelSampleData":
        x = _as_matrix(x, "x")
        return cls(x, field(x), score_bound=field.bound)

    @property
    def n(self) -> int:
        return self.x.shape[0]


Dataset = TwoSampleData | PairedData | ModelSampleData


@dataclasses.dataclass(frozen=True)
class CoreMatrix:
    """Symmetric matrix of core-function values with its closed-form bound."""

    h: np.ndarray
    kernel_bound: float
    framework: str
    diagonal_policy: str = "excluded"

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("core matrix must be square")
        if self.framework not in FRAMEWORKS:
            raise ValueError(f"unknown framework {self.framework!r}")
        if self.diagonal_policy not in ("included", "excluded"):
            raise ValueError("diagonal_policy must be 'included' or 'excluded'")
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.h.shape[0]


@dataclasses.dataclass(frozen=True)
class HsicCoreMatrix(CoreMatrix):
    """Doubly-centered HSIC core, keeping its two factors for permutation use."""

    k_centered: np.ndarray = dataclasses.field(default=None, repr=False)
    l_centered: np.ndarray = dataclasses.field(default=None, repr=False)


@dataclasses.dataclass(frozen=True)
class DesignSet:
    """An ordered set of index pairs (i, j) defining an incomplete statistic."""

    idx_i: np.ndarray
    idx_j: np.ndarray
    structure: str = "custom"
    block_count: int | None = None

    def __post_init__(self):
        i = np.asarray(self.idx_i, dtype=np.intp)
        j = np.asarray(self.idx_j, dtype=np.intp)
        if i.shape != j.shape or i.ndim != 1:
            raise ValueError("design index arrays must be 1-d and of equal length")
        if i.size == 0:
            raise ValueError("design must be nonempty")
        object.__setattr__(self, "idx_i", i)
        object.__setattr__(self, "idx_j", j)

    @property
    def size(self) -> int:
        return self.idx_i.size

    def validate_for(self, core: CoreMatrix) -> None:
        n = core.n
        if self.idx_i.min() < 0 or self.idx_j.min() < 0 or self.idx_i.max() >= n or self.idx_j.max() >= n:
            raise ValueError("design pair out of range")
        if core.diagonal_policy == "excluded" and np.any(self.idx_i == self.idx_j):
            raise ValueError("design contains diagonal pairs but the core excludes the diagonal")

    @classmethod
    def full_offdiag(cls, n: int) -> "DesignSet":
        """All ordered off-diagonal pairs in row-major order."""
        if n < 2:
            raise ValueError("need n >= 2")
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        mask = ii != jj
        return cls(ii[mask], jj[mask], structure="full_offdiag")

    @classmethod
    def block(cls, n: int, blocks: int) -> "DesignSet":
        """Within-block ordered off-diagonal pairs of `blocks` consecutive blocks.

        Blocks have size floor(n / blocks); trailing points are ignored.
        """
        if blocks < 1:
            raise ValueError("block count must be positive")
        size = n // blocks
        if size < 2:
            raise ValueError(f"block size {size} < 2 for n={n}, blocks={blocks}")
        parts_i, parts_j = [], []
        for b in range(blocks):
            lo = b * size
            ii, jj = np.meshgrid(np.arange(lo, lo + size), np.arange(lo, lo + size), indexing="ij")
            mask = ii != jj
            parts_i.append(ii[mask])
            parts_j.append(jj[mask])
        return cls(
            np.concatenate(parts_i),
            np.concatenate(parts_j),
            structure=f"block({blocks})",
            block_count=blocks,
        )

    @classmethod
    def incomplete(cls, n: int, size: int) -> "DesignSet":
        """Deterministic design of `size` pairs taken from successive superdiagonals.

        Pairs are enumerated as (i, i+r) for r = 1, 2, ... which keeps the
        design spread across rows of the core matrix.
        """
        if size < 1:
            raise ValueError("design size must be positive")
        if size > n * (n - 1):
            raise ValueError(f"design size {size} exceeds the {n * (n - 1)} off-diagonal pairs")
        ii, jj = [], []
        remaining = size
        for r in range(1, n):
            count = min(n - r, remaining)
            ii.append(np.arange(count))
            jj.append(np.arange(count) + r)
            remaining -= count
            if remaining == 0:
                break
        return cls(np.concatenate(ii), np.concatenate(jj), structure="custom")


def _pair_split_mmd_core(spec: KernelSpec, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Core k(a_i,a_j) - k(a_i,b_j) - k(a_j,b_i) + k(b_i,b_j) for pairs (a_i, b_i)."""
    kaa = kernels.gram_matrix(spec, first, first)
    kbb = kernels.gram_matrix(spec, second, second)
    kab = kernels.gram_matrix(spec, first, second)
    cross = kab + kab.T  # symmetric by commutativity, keeps H exactly symmetric
    return kaa - cross + kbb


def core_matrix_mmd(spec: KernelSpec, data: TwoSampleData) -> CoreMatrix:
    """One-sample second-order MMD core for paired two-sample data (m = n).

    H[i, j] = k(X_i, X_j) - k(X_j, Y_i) - k(X_i, Y_j) + k(Y_i, Y_j).
    Swapping a pair (X_i, Y_i) negates row and column i.
    """
    if data.m != data.n:
        raise ValueError(
            "the one-sample MMD core requires m == n; use the permutation test "
            "on the merged sample for unequal sample sizes"
        )
    h = _pair_split_mmd_core(spec, data.x, data.y)
    bound = 4.0 * kernels.kernel_bound(spec, data.x.shape[1])
    return CoreMatrix(h=h, kernel_bound=bound, framework="mmd")


def _double_center(g: np.ndarray) -> np.ndarray:
    # G - (r 1' + 1 r') + mean(G); equals C G C and stays exactly symmetric
    row = g.mean(axis=0)
    return (g - (row[:, None] + row[None, :])) + g.mean()


def core_matrix_hsic(kx: KernelSpec, ky: KernelSpec, data: PairedData) -> HsicCoreMatrix:
    """Doubly-centered product core H = (C K C) * (C L C), entrywise.

    Used with permutations of the Y component; Y-permutations act on the
    second factor by row/column conjugation.
    """
    kc = _double_center(kernels.gram_matrix(kx, data.x_part, data.x_part))
    lc = _double_center(kernels.gram_matrix(ky, data.y_part, data.y_part))
    bound = 16.0 * kernels.kernel_bound(kx, data.split) * kernels.kernel_bound(ky, data.z.shape[1] - data.split)
    return HsicCoreMatrix(h=kc * lc, kernel_bound=bound, framework="hsic", k_centered=kc, l_centered=lc)


def core_matrix_hsic_wild(kx: KernelSpec, ky: KernelSpec, data: PairedData) -> CoreMatrix:
    """Half-split product core for the wild-bootstrap HSIC test (N even).

    With n = N/2, block i carries pairs i and i+n and
    H[i, j] = hX[i, j] * hY[i, j] where hX, hY are the half-sample MMD
    cores of the X and Y components.  Flipping sign i is equivalent to
    swapping (X_i, Y_i) with (X_{i+n}, Y_{i+n})'s Y component, i.e. the
    permutation that swaps i with i + N/2.
    """
    if data.n % 2 != 0:
        raise ValueError("the wild-bootstrap HSIC core requires an even number of pairs")
    n = data.n // 2
    x, y = data.x_part, data.y_part
    hx = _pair_split_mmd_core(kx, x[:n], x[n:])
    hy = _pair_split_mmd_core(ky, y[:n], y[n:])
    bound = 16.0 * kernels.kernel_bound(kx, data.split) * kernels.kernel_bound(ky, data.z.shape[1] - data.split)
    return CoreMatrix(h=hx * hy, kernel_bound=bound, framework="hsic")


def core_matrix_ksd(spec: KernelSpec, data: ModelSampleData) -> CoreMatrix:
    """Stein kernel core H[i, j] = h_P(X_i, X_j) from score values."""
    if data.scores is None:
        raise ValueError("KSD core requires score values at every sample point")
    h = kernels.stein_matrix(spec, data.x, data.scores)
    if data.score_bound is not None:
        s_bound = float(data.score_bound)
    else:
        s_bound = float(np.sqrt((data.scores**2).sum(axis=1)).max())
    bound = kernels.stein_kernel_bound(spec, data.x.shape[1], s_bound)
    return CoreMatrix(h=h, kernel_bound=bound, framework="ksd")


def v_statistic(core: CoreMatrix) -> float:
    """Mean of the core matrix over all pairs, diagonal included."""
    n = core.n
    return float(core.h.sum() / (n * n))


def incomplete_statistic(core: CoreMatrix, design: DesignSet) -> float:
    """Mean of the core values over the design pairs."""
    design.validate_for(core)
    return float(core.h[design.idx_i, design.idx_j].sum() / design.size)


def u_statistic(core: CoreMatrix) -> float:
    """Off-diagonal mean; shares the gather-and-sum path of the full design,
    so block_statistic(core, 1) reproduces it bit-for-bit."""
    if core.n < 2:
        raise ValueError("U-statistic needs at least 2 samples")
    return incomplete_statistic(core, DesignSet.full_offdiag(core.n))


def block_statistic(core: CoreMatrix, blocks: int) -> float:
    """Mean of the complete U-statistics over `blocks` consecutive blocks."""
    return incomplete_statistic(core, DesignSet.block(core.n, blocks))


def two_sample_v_statistic(gram_xx, gram_yy, gram_xy) -> float:
    """Merged-form MMD V-statistic, valid for unequal sample sizes.

    mean(Kxx) + mean(Kyy) - 2 mean(Kxy); nonnegative up to rounding.
    """
    m, n = gram_xy.shape
    return float(gram_xx.sum() / (m * m) + gram_yy.sum() / (n * n) - 2.0 * gram_xy.sum() / (m * n))


def one_sample_mmd(spec: KernelSpec, data, mean_embedding, double_expectation: float) -> float:
    """Plug-in squared MMD between the sample and a model with known moments.

    ``data`` is a ModelSampleData or a plain array of points (a single
    point is allowed).  ``mean_embedding`` maps points to E_P[k(x, Y)];
    ``double_expectation`` is E_{P,P}[k(Y, Y')].  Value:

        mean_ij k(X_i, X_j) - 2 mean_i E_P[k(X_i, Y)] + E_{P,P}[k(Y, Y')]
    """
    x = data.x if isinstance(data, ModelSampleData) else _as_matrix(data, "data")
    n = x.shape[0]
    g = kernels.gram_matrix(spec, x, x)
    emb = np.asarray(mean_embedding(x), dtype=float).reshape(-1)
    if emb.shape[0] != n:
        raise ValueError("mean embedding must return one value per sample point")
    return float(g.sum() / (n * n) - 2.0 * emb.sum() / n + double_expectation)


def empirical_model_moments(spec: KernelSpec, model_points) -> tuple:
    """Moments of the empirical distribution on `model_points`.

    Feeding these into one_sample_mmd reproduces the usual two-sample
    MMD V-statistic against that empirical sample.
    """
    pts = _as_matrix(model_points, "model_points")

    def _embed(x):
        return kernels.gram_matrix(spec, _as_matrix(x, "x"), pts).mean(axis=1)

    g = kernels.gram_matrix(spec, pts, pts)
    return _embed, float(g.sum() / (pts.shape[0] ** 2))
