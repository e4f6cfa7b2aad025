"""Replicate engines: original and null-replicate statistics, per kernel.

Every test in the package reduces to an array of per-kernel statistic
values for the original data and for ``B`` null replicates.  Within one
replicate the randomness (a permutation or a Rademacher sign vector) is
drawn once and shared across all kernels; this sharing is part of the
correctness contract of the adaptive tests, not an optimisation.

Replicate ``b`` draws from ``stream(seed, TAG_REPLICATE, b)``, so results
do not depend on evaluation order.  The original statistic is computed
through the same arithmetic as the replicates (identity permutation,
all-ones signs), which keeps constrained variants bit-compatible with the
standard test they degenerate to.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .kernels import KernelSpec
from .resampling import (
    TAG_REPLICATE,
    ReplicateSpec,
    rademacher,
    sample_paired_permutation,
    sample_two_sample_permutation,
    stream,
)
from .statistics import (
    CoreMatrix,
    DesignSet,
    ModelSampleData,
    PairedData,
    TwoSampleData,
    core_matrix_hsic,
    core_matrix_hsic_wild,
    core_matrix_ksd,
    core_matrix_mmd,
)

STATISTIC_KINDS = ("u", "v", "sqrt_v")

_CHUNK_ELEMENTS = 1 << 22


def framework_of(data) -> str:
    if isinstance(data, TwoSampleData):
        return "mmd"
    if isinstance(data, PairedData):
        return "hsic"
    if isinstance(data, ModelSampleData):
        return "ksd"
    raise ValueError(f"unrecognised dataset type {type(data).__name__}")


def _sign_matrix(seed: int, count: int, n: int) -> np.ndarray:
    """(count+1, n) signs; row 0 is all ones (the original)."""
    out = np.empty((count + 1, n))
    out[0] = 1.0
    for b in range(count):
        out[b + 1] = rademacher(stream(seed, TAG_REPLICATE, b), n)
    return out


def _quadratic_offdiag(h: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """sum_{i != j} eps_i eps_j h[i, j] for every sign row."""
    return ((signs @ h) * signs).sum(axis=1) - np.trace(h)


def wild_replicates(
    cores: list[CoreMatrix], design: DesignSet | None, rep: ReplicateSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Wild-bootstrap statistics (1/|D|) sum eps_i eps_j H[i, j].

    Returns (originals, replicates) of shapes (K,) and (K, B); one shared
    sign vector per replicate across the K cores.
    """
    n = cores[0].n
    if any(c.n != n for c in cores):
        raise ValueError("all core matrices must share the sample size")
    if design is None:
        design = DesignSet.full_offdiag(n)
    for c in cores:
        design.validate_for(c)
    signs = _sign_matrix(rep.seed, rep.count, n)
    vals = np.empty((len(cores), rep.count + 1))
    if design.structure == "full_offdiag":
        for k, c in enumerate(cores):
            vals[k] = _quadratic_offdiag(c.h, signs) / design.size
    elif design.block_count is not None:
        size = n // design.block_count
        for k, c in enumerate(cores):
            acc = np.zeros(rep.count + 1)
            for b in range(design.block_count):
                sl = slice(b * size, (b + 1) * size)
                acc += _quadratic_offdiag(c.h[sl, sl], signs[:, sl])
            vals[k] = acc / design.size
    else:
        hv = np.stack([c.h[design.idx_i, design.idx_j] for c in cores])
        chunk = max(1, _CHUNK_ELEMENTS // design.size)
        for lo in range(0, rep.count + 1, chunk):
            hi = min(lo + chunk, rep.count + 1)
            e = signs[lo:hi, design.idx_i] * signs[lo:hi, design.idx_j]
            vals[:, lo:hi] = hv @ e.T / design.size
    return vals[:, 0].copy(), vals[:, 1:].copy()


def _finalize(vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return vals[:, 0].copy(), vals[:, 1:].copy()


def mmd_permutation_replicates(
    data: TwoSampleData, specs: list[KernelSpec], rep: ReplicateSpec, statistic: str = "sqrt_v"
) -> tuple[np.ndarray, np.ndarray]:
    """Merged-sample MMD statistics over uniformly permuted group labels.

    Supports unequal sample sizes.  ``statistic``: "u" for the unbiased
    estimator of MMD^2, "v" for the biased one, "sqrt_v" for its root.
    """
    if statistic not in STATISTIC_KINDS:
        raise ValueError(f"unknown statistic kind {statistic!r}")
    m, n = data.m, data.n
    total = m + n
    z = np.vstack([data.x, data.y])
    masks = np.empty((rep.count + 1, total))
    masks[0] = np.concatenate([np.ones(m), np.zeros(n)])
    for b in range(rep.count):
        perm = sample_two_sample_permutation(stream(rep.seed, TAG_REPLICATE, b), m, n)
        row = np.zeros(total)
        row[perm[:m]] = 1.0
        masks[b + 1] = row
    comask = 1.0 - masks
    vals = np.empty((len(specs), rep.count + 1))
    for k, spec in enumerate(specs):
        gram = kernels.gram_matrix(spec, z, z)
        gm = masks @ gram
        s_xx = (gm * masks).sum(axis=1)
        s_xy = (gm * comask).sum(axis=1)
        s_yy = gram.sum() - s_xx - 2.0 * s_xy
        if statistic == "u":
            diag = np.diagonal(gram)
            d_x = masks @ diag
            d_y = diag.sum() - d_x
            vals[k] = (
                (s_xx - d_x) / (m * (m - 1))
                + (s_yy - d_y) / (n * (n - 1))
                - 2.0 * s_xy / (m * n)
            )
        else:
            v = s_xx / (m * m) + s_yy / (n * n) - 2.0 * s_xy / (m * n)
            vals[k] = np.sqrt(np.maximum(v, 0.0)) if statistic == "sqrt_v" else v
    return _finalize(vals)


def hsic_permutation_replicates(
    data: PairedData,
    spec_pairs: list[tuple[KernelSpec, KernelSpec]],
    rep: ReplicateSpec,
    statistic: str = "sqrt_v",
) -> tuple[np.ndarray, np.ndarray]:
    """Doubly-centered HSIC statistics with the Y component permuted."""
    if statistic not in STATISTIC_KINDS:
        raise ValueError(f"unknown statistic kind {statistic!r}")
    n = data.n
    cores = [core_matrix_hsic(kx, ky, data) for kx, ky in spec_pairs]
    kc = np.stack([c.k_centered for c in cores])
    lc = np.stack([c.l_centered for c in cores])
    k_diag = np.einsum("kii->ki", kc).copy()
    l_diag = np.einsum("kii->ki", lc).copy()
    perms = np.empty((rep.count + 1, n), dtype=np.intp)
    perms[0] = np.arange(n)
    for b in range(rep.count):
        perms[b + 1] = sample_paired_permutation(stream(rep.seed, TAG_REPLICATE, b), n)
    vals = np.empty((len(spec_pairs), rep.count + 1))
    chunk = max(1, _CHUNK_ELEMENTS // (n * n * len(spec_pairs)))
    for lo in range(0, rep.count + 1, chunk):
        hi = min(lo + chunk, rep.count + 1)
        p = perms[lo:hi]
        l_perm = lc[:, p[:, :, None], p[:, None, :]]  # (K, chunk, n, n)
        prod = kc[:, None, :, :] * l_perm
        total = prod.sum(axis=(2, 3))
        if statistic == "u":
            trace = (k_diag[:, None, :] * l_diag[:, p]).sum(axis=2)
            vals[:, lo:hi] = (total - trace) / (n * (n - 1))
        else:
            v = total / (n * n)
            vals[:, lo:hi] = np.sqrt(np.maximum(v, 0.0)) if statistic == "sqrt_v" else v
    return _finalize(vals)


def collection_replicates(
    data,
    kernel_entries: list,
    rep: ReplicateSpec,
    *,
    statistic: str | None = None,
    design: DesignSet | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch to the right engine for the dataset / method combination.

    ``kernel_entries`` holds KernelSpec items (mmd, ksd) or
    (KernelSpec, KernelSpec) pairs (hsic).  Permutation engines accept a
    ``statistic`` kind (default "sqrt_v") and no design; the wild engine
    averages the core over ``design`` (default: all off-diagonal pairs).
    """
    framework = framework_of(data)
    if rep.method == "permutation":
        if design is not None:
            raise ValueError("incomplete designs are only supported with the wild bootstrap")
        kind = statistic or "sqrt_v"
        if framework == "mmd":
            return mmd_permutation_replicates(data, kernel_entries, rep, kind)
        if framework == "hsic":
            return hsic_permutation_replicates(data, kernel_entries, rep, kind)
        raise ValueError("goodness-of-fit testing admits no permutation method; use the wild bootstrap")
    if statistic is not None:
        raise ValueError("wild-bootstrap statistics are design means; the statistic kind is not configurable")
    if framework == "mmd":
        cores = [core_matrix_mmd(spec, data) for spec in kernel_entries]
    elif framework == "hsic":
        cores = [core_matrix_hsic_wild(kx, ky, data) for kx, ky in kernel_entries]
    else:
        cores = [core_matrix_ksd(spec, data) for spec in kernel_entries]
    return wild_replicates(cores, design, rep)
