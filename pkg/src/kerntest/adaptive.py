"""Kernel adaptivity: pooled statistics and aggregated multiple testing.

Pooling combines the per-kernel statistics into a single statistic
(mean, max, or the soft maximum "fuse") and calibrates that one number;
each replicate is pooled with the identical configuration, on statistics
computed from one shared permutation or sign vector.

Aggregation runs one test per kernel at a data-calibrated adjusted level
u* in [alpha/|K|, alpha]: the largest u for which the Monte-Carlo
probability (over the same replicate set that supplies the per-kernel
quantiles) that any kernel exceeds its u-level quantile stays at most
alpha.  The search is a bisection; since u* never drops below the
Bonferroni level alpha/|K|, every Bonferroni rejection is an aggregated
rejection.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np

from .engines import collection_replicates, framework_of
from .resampling import ReplicateSpec, TestResult, _alpha_count, test_decision
from .testing import resolve_design

POOL_METHODS = ("mean", "max", "fuse")


@dataclasses.dataclass(frozen=True)
class KernelCollection:
    """Kernels to adapt over: specs for MMD/KSD, (kx, ky) pairs for HSIC.

    Weights are strictly positive and sum to at most one; they default
    to the uniform 1/|K|.
    """

    kernels: tuple
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        entries = tuple(self.kernels)
        if not entries:
            raise ValueError("kernel collection must be nonempty")
        object.__setattr__(self, "kernels", entries)
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if len(w) != len(entries):
                raise ValueError("one weight per kernel required")
            if any(v <= 0 for v in w):
                raise ValueError("weights must be strictly positive")
            if sum(w) > 1.0 + 1e-12:
                raise ValueError("weights must sum to at most one")
            object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return len(self.kernels)

    def weight_vector(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.size, 1.0 / self.size)
        return np.asarray(self.weights, dtype=float)


def harmonic_weights(count: int) -> tuple[float, ...]:
    """The 6/(l^2 pi^2) weight scheme; sums to below one for any count."""
    return tuple(6.0 / (ell**2 * math.pi**2) for ell in range(1, count + 1))


@dataclasses.dataclass(frozen=True)
class PoolConfig:
    """How to combine per-kernel statistics."""

    method: str = "fuse"
    nu: float | None = None
    normalized: bool = False
    sigma: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.method not in POOL_METHODS:
            raise ValueError(f"unknown pooling method {self.method!r}")
        if self.nu is not None and self.nu <= 0:
            raise ValueError("fusing parameter nu must be positive")
        if self.sigma is not None and any(s <= 0 for s in self.sigma):
            raise ValueError("normalisation scales must be positive")


def _fuse_columns(values: np.ndarray, nu: float, weights: np.ndarray) -> np.ndarray:
    shift = nu * values.max(axis=0)
    return (shift + np.log((weights[:, None] * np.exp(nu * values - shift)).sum(axis=0))) / nu


def _pool_columns(values: np.ndarray, config: PoolConfig, weights: np.ndarray) -> np.ndarray:
    """Pool each column of a (K, B) matrix; K = 1 passes through unchanged."""
    if values.shape[0] == 1:
        return values[0]
    if config.method == "mean":
        return weights @ values / weights.sum()
    if config.method == "max":
        return values.max(axis=0)
    if config.nu is None:
        raise ValueError("fuse pooling requires nu")
    return _fuse_columns(values, config.nu, weights)


def pool(values, config: PoolConfig, weights=None) -> float:
    """Pool a vector of per-kernel values into one number.

    Normalisation (when configured) divides by the per-kernel sigma
    first.  Fuse is evaluated in shifted, overflow-safe form and defaults
    to uniform weights.
    """
    vals = np.asarray(values, dtype=float).reshape(-1)
    if vals.size == 0:
        raise ValueError("cannot pool an empty collection")
    if config.normalized:
        if config.sigma is None:
            raise ValueError("normalised pooling requires sigma values")
        vals = vals / np.asarray(config.sigma, dtype=float)
    w = np.full(vals.size, 1.0 / vals.size) if weights is None else np.asarray(weights, dtype=float)
    return float(_pool_columns(vals[:, None], config, w)[0])


def _default_nu(n: int, count: int) -> float:
    return float(max(n, math.log(count)))


def pooled_test(
    data,
    collection: KernelCollection,
    config: PoolConfig,
    rep: ReplicateSpec,
    alpha: float = 0.05,
    *,
    blocks: int | None = None,
    design_size: int | None = None,
    statistic: str | None = None,
) -> TestResult:
    """Calibrated test on the pooled statistic.

    The pooled original and every pooled replicate use the identical
    configuration; with a single kernel the result is bit-identical to
    the single-kernel test.  Normalisation scales default to the
    empirical standard deviation of each kernel's replicate statistics
    (zero scales fall back to one).
    """
    framework = framework_of(data)
    design = None
    if rep.method == "wild_bootstrap":
        n = data.m if framework == "mmd" else (data.n // 2 if framework == "hsic" else data.n)
        design = resolve_design(n, blocks, design_size)
    elif blocks is not None or design_size is not None:
        raise ValueError("block/incomplete statistics require the wild bootstrap")
    originals, reps = collection_replicates(
        data, list(collection.kernels), rep, statistic=statistic, design=design
    )
    config = _with_runtime_defaults(config, data, collection, reps)
    weights = collection.weight_vector()
    if config.normalized:
        sigma = np.asarray(config.sigma, dtype=float)
        originals = originals / sigma
        reps = reps / sigma[:, None]
    pooled_original = _pool_columns(originals[:, None], config, weights)[0]
    pooled_reps = _pool_columns(reps, config, weights)
    return test_decision(
        pooled_original,
        pooled_reps,
        alpha,
        framework=framework,
        method=rep.method,
        seed=rep.seed,
        kernels=_collection_descriptions(framework, collection),
        constraint=None,
    )


def _collection_descriptions(framework: str, collection: KernelCollection) -> tuple:
    out = []
    for entry in collection.kernels:
        if framework == "hsic":
            kx, ky = entry
            out.append({**kx.describe(), "component": "x"})
            out.append({**ky.describe(), "component": "y"})
        else:
            out.append(entry.describe())
    return tuple(out)


def _with_runtime_defaults(config: PoolConfig, data, collection: KernelCollection, reps: np.ndarray) -> PoolConfig:
    updates = {}
    if config.method == "fuse":
        n = min(data.m, data.n) if hasattr(data, "m") else data.n
        floor = _default_nu(n, collection.size)
        if config.nu is None:
            updates["nu"] = floor
        elif config.nu < floor:
            warnings.warn(
                f"fusing parameter nu={config.nu} is below the recommended max(N, log|K|)={floor}",
                stacklevel=3,
            )
    if config.normalized and config.sigma is None:
        sigma = reps.std(axis=1)
        sigma = np.where(sigma > 0, sigma, 1.0)
        updates["sigma"] = tuple(float(s) for s in sigma)
    return dataclasses.replace(config, **updates) if updates else config


@dataclasses.dataclass(frozen=True)
class KernelOutcome:
    """Per-kernel summary inside an aggregated test."""

    kernels: tuple
    statistic: float
    threshold: float
    p_value: float
    reject: bool


@dataclasses.dataclass(frozen=True)
class AggregatedTestResult(TestResult):
    """Aggregated decision; `statistic` is the largest exceedance margin
    max_k (T_k - q_k(u*)), compared against a zero threshold."""

    adjusted_level: float = float("nan")
    per_kernel: tuple[KernelOutcome, ...] = ()

    def to_json_dict(self) -> dict:
        out = super().to_json_dict()
        out["adjusted_level"] = self.adjusted_level
        out["per_kernel"] = [
            {
                "kernel": list(o.kernels),
                "statistic": o.statistic,
                "threshold": o.threshold,
                "p_value": o.p_value,
                "reject": o.reject,
            }
            for o in self.per_kernel
        ]
        return out


def _adjusted_thresholds(sorted_pools: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Per-kernel (1 - level)-quantiles of the pools {original} u replicates."""
    m = sorted_pools.shape[1]
    idx = np.array([m - 1 - _alpha_count(level, m) for level in levels])
    return sorted_pools[np.arange(sorted_pools.shape[0]), idx]


def _exceedance_probability(replicates: np.ndarray, thresholds: np.ndarray) -> float:
    return float((replicates > thresholds[:, None]).any(axis=0).mean())


def _adjusted_level(
    originals: np.ndarray,
    replicates: np.ndarray,
    alpha: float,
    weights: np.ndarray,
    iters: int,
) -> float:
    """Largest u in [alpha/|K|, alpha] keeping the any-kernel exceedance
    probability at most alpha; clamped below at the Bonferroni level."""
    count = originals.size
    sorted_pools = np.sort(np.column_stack([replicates, originals]), axis=1)

    def feasible(u: float) -> bool:
        thr = _adjusted_thresholds(sorted_pools, u * weights * count)
        return _exceedance_probability(replicates, thr) <= alpha

    lo, hi = alpha / count, alpha
    if count == 1 or feasible(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def aggregated_test(
    data,
    collection: KernelCollection,
    rep: ReplicateSpec,
    alpha: float = 0.05,
    bisection_iters: int = 20,
    *,
    statistic: str | None = None,
) -> AggregatedTestResult:
    """Multiple test over the collection at the adjusted level u*.

    Rejects when any kernel's original statistic exceeds its u*-level
    quantile.  The reported p-value is the smallest level at which the
    aggregated test would reject, found by bisection over levels; it is
    at most alpha exactly when the test rejects.
    """
    framework = framework_of(data)
    count = collection.size
    if (rep.count + 1) * alpha / count < 1.0 - 1e-9:
        raise ValueError(
            f"need (replicates+1) * alpha / |K| >= 1 for the Bonferroni level: "
            f"got {rep.count} replicates for alpha={alpha}, |K|={count}"
        )
    originals, reps = collection_replicates(data, list(collection.kernels), rep, statistic=statistic)
    weights = collection.weight_vector()
    return _aggregate_decide(
        originals,
        reps,
        alpha,
        weights,
        bisection_iters,
        framework=framework,
        method=rep.method,
        seed=rep.seed,
        collection=collection,
    )


def _aggregate_decide(
    originals: np.ndarray,
    replicates: np.ndarray,
    alpha: float,
    weights: np.ndarray,
    iters: int,
    *,
    framework: str = "unspecified",
    method: str = "unspecified",
    seed: int = 0,
    collection: KernelCollection | None = None,
) -> AggregatedTestResult:
    count = originals.size
    n_rep = replicates.shape[1]
    sorted_pools = np.sort(np.column_stack([replicates, originals]), axis=1)

    def decide(level: float) -> tuple[bool, float, np.ndarray]:
        u = _adjusted_level(originals, replicates, level, weights, iters)
        thr = _adjusted_thresholds(sorted_pools, u * weights * count)
        return bool((originals > thr).any()), u, thr

    reject, u_star, thresholds = decide(alpha)
    lo, hi = (0.0, alpha) if reject else (alpha, 1.0)
    for _ in range(16):
        mid = 0.5 * (lo + hi)
        if decide(mid)[0]:
            hi = mid
        else:
            lo = mid
    p_value = hi if (reject or hi < 1.0) else 1.0
    margins = originals - thresholds
    per_kernel = []
    for k in range(count):
        ge = 1 + int(np.count_nonzero(replicates[k] >= originals[k]))
        entry_desc = _entry_descriptions(framework, collection, k) if collection is not None else ()
        per_kernel.append(
            KernelOutcome(
                kernels=entry_desc,
                statistic=float(originals[k]),
                threshold=float(thresholds[k]),
                p_value=ge / (n_rep + 1),
                reject=bool(originals[k] > thresholds[k]),
            )
        )
    kernels_desc = _collection_descriptions(framework, collection) if collection is not None else ()
    return AggregatedTestResult(
        framework=framework,
        statistic=float(margins.max()),
        threshold=0.0,
        p_value=float(p_value),
        reject=reject,
        alpha=alpha,
        replicates=n_rep,
        method=method,
        seed=seed,
        kernels=kernels_desc,
        constraint=None,
        adjusted_level=float(u_star),
        per_kernel=tuple(per_kernel),
    )


def _entry_descriptions(framework: str, collection: KernelCollection, index: int) -> tuple:
    entry = collection.kernels[index]
    if framework == "hsic":
        kx, ky = entry
        return ({**kx.describe(), "component": "x"}, {**ky.describe(), "component": "y"})
    return (entry.describe(),)
