"""Single-kernel MMD, HSIC and KSD tests.

Two calibration routes are exposed:

* ``method="permutation"`` (two-sample and independence only): the
  statistic, by default the square-rooted V-statistic, is recomputed on
  uniformly permuted data; level control is non-asymptotic.
* ``method="wild_bootstrap"``: the design-averaged core statistic is
  recomputed under Rademacher sign flips.  For the MMD with m = n and
  for the HSIC with N even this coincides with a subgroup of
  permutations, so the level guarantee is again non-asymptotic; for the
  KSD (the only route available) it is asymptotic.

Block and incomplete designs are wild-bootstrap-only: a permuted
incomplete statistic would need core values outside the design.
"""

from __future__ import annotations

import numpy as np

from .engines import collection_replicates
from .kernels import KernelSpec, ScoreField
from .resampling import ReplicateSpec, TestResult, test_decision
from .statistics import (
    DesignSet,
    ModelSampleData,
    PairedData,
    TwoSampleData,
)


def resolve_design(n: int, blocks: int | None, design_size: int | None) -> DesignSet | None:
    if blocks is not None and design_size is not None:
        raise ValueError("blocks and design_size are mutually exclusive")
    if blocks is not None:
        return DesignSet.block(n, blocks)
    if design_size is not None:
        return DesignSet.incomplete(n, design_size)
    return None


def _kernel_descriptions(framework: str, entry) -> tuple:
    if framework == "hsic":
        kx, ky = entry
        return ({**kx.describe(), "component": "x"}, {**ky.describe(), "component": "y"})
    return (entry.describe(),)


def _single_test(
    data,
    entry,
    *,
    alpha: float,
    replicates: int,
    method: str,
    seed: int,
    statistic: str | None,
    blocks: int | None,
    design_size: int | None,
    framework: str,
) -> TestResult:
    rep = ReplicateSpec(count=replicates, method=method, seed=seed)
    if method == "wild_bootstrap":
        n = data.n if not isinstance(data, TwoSampleData) else data.m
        if framework == "hsic":
            n = data.n // 2
        design = resolve_design(n, blocks, design_size)
        originals, reps = collection_replicates(data, [entry], rep, design=design)
    else:
        if blocks is not None or design_size is not None:
            raise ValueError("block/incomplete statistics require the wild bootstrap")
        originals, reps = collection_replicates(data, [entry], rep, statistic=statistic or "sqrt_v")
    return test_decision(
        originals[0],
        reps[0],
        alpha,
        framework=framework,
        method=method,
        seed=seed,
        kernels=_kernel_descriptions(framework, entry),
    )


def two_sample_test(
    x,
    y,
    kernel: KernelSpec,
    *,
    alpha: float = 0.05,
    replicates: int = 199,
    method: str = "permutation",
    seed: int = 0,
    statistic: str | None = None,
    blocks: int | None = None,
    design_size: int | None = None,
) -> TestResult:
    """MMD two-sample test of H0: the two samples share one distribution."""
    data = x if isinstance(x, TwoSampleData) else TwoSampleData(x, y)
    return _single_test(
        data,
        kernel,
        alpha=alpha,
        replicates=replicates,
        method=method,
        seed=seed,
        statistic=statistic,
        blocks=blocks,
        design_size=design_size,
        framework="mmd",
    )


def independence_test(
    data: PairedData,
    kernel_x: KernelSpec,
    kernel_y: KernelSpec,
    *,
    alpha: float = 0.05,
    replicates: int = 199,
    method: str = "permutation",
    seed: int = 0,
    statistic: str | None = None,
    blocks: int | None = None,
    design_size: int | None = None,
) -> TestResult:
    """HSIC independence test of H0: the pair components are independent."""
    return _single_test(
        data,
        (kernel_x, kernel_y),
        alpha=alpha,
        replicates=replicates,
        method=method,
        seed=seed,
        statistic=statistic,
        blocks=blocks,
        design_size=design_size,
        framework="hsic",
    )


def goodness_of_fit_test(
    x,
    score,
    kernel: KernelSpec,
    *,
    alpha: float = 0.05,
    replicates: int = 199,
    seed: int = 0,
    blocks: int | None = None,
    design_size: int | None = None,
) -> TestResult:
    """KSD goodness-of-fit test of H0: the sample follows the score's model.

    ``score`` is a ScoreField, an array of precomputed score values, or a
    ready ModelSampleData.  Only the wild bootstrap applies here; its
    level control is asymptotic.
    """
    if isinstance(x, ModelSampleData):
        data = x
    elif isinstance(score, ScoreField):
        data = ModelSampleData.from_score_field(x, score)
    else:
        data = ModelSampleData(x, np.asarray(score, dtype=float))
    return _single_test(
        data,
        kernel,
        alpha=alpha,
        replicates=replicates,
        method="wild_bootstrap",
        seed=seed,
        statistic=None,
        blocks=blocks,
        design_size=design_size,
        framework="ksd",
    )
