import itertools
import math

import numpy as np
import pytest

from kerntest.adaptive import (
    KernelCollection,
    PoolConfig,
    _adjusted_level,
    _adjusted_thresholds,
    aggregated_test,
    harmonic_weights,
    pool,
    pooled_test,
)
from kerntest.kernels import gaussian_kernel, gram_matrix, laplace_kernel
from kerntest.resampling import ReplicateSpec
from kerntest.statistics import (
    CoreMatrix,
    PairedData,
    TwoSampleData,
    v_statistic,
)
from kerntest.testing import two_sample_test

GAUSS = gaussian_kernel(1.0)


# --- pool -------------------------------------------------------------------


@pytest.mark.parametrize("method", ["mean", "max", "fuse"])
def test_pool_single_value_passthrough(method):
    config = PoolConfig(method=method, nu=3.0 if method == "fuse" else None)
    assert pool([0.7314159], config) == 0.7314159


def test_pool_fuse_logsumexp_value():
    config = PoolConfig(method="fuse", nu=1.0)
    assert pool([0.0, 1.0], config) == pytest.approx(math.log((1.0 + math.e) / 2.0), abs=1e-12)


def test_pool_mean_and_max():
    vals = [0.2, -0.1, 0.7]
    assert pool(vals, PoolConfig(method="mean")) == pytest.approx(np.mean(vals))
    assert pool(vals, PoolConfig(method="max")) == 0.7
    weighted = pool([1.0, 3.0], PoolConfig(method="mean"), weights=[0.75, 0.25])
    assert weighted == pytest.approx(1.5)


def test_pool_validation():
    with pytest.raises(ValueError):
        pool([], PoolConfig(method="mean"))
    with pytest.raises(ValueError):
        PoolConfig(method="fuse", nu=-1.0)
    with pytest.raises(ValueError):
        pool([1.0, 2.0], PoolConfig(method="fuse"))  # nu unset
    with pytest.raises(ValueError):
        PoolConfig(method="softmax")


def test_fuse_bracket_and_limit():
    rng = np.random.default_rng(0)
    for _ in range(500):
        k = int(rng.integers(2, 12))
        vals = rng.normal(size=k)
        nu = float(rng.uniform(0.5, 50.0))
        fused = pool(vals, PoolConfig(method="fuse", nu=nu))
        assert vals.max() - math.log(k) / nu <= fused + 1e-12
        assert fused <= vals.max() + 1e-12
    vals = rng.normal(size=8)
    fused = pool(vals, PoolConfig(method="fuse", nu=1e6))
    assert abs(fused - vals.max()) <= 1e-4


def test_fuse_monotone_in_nu():
    rng = np.random.default_rng(1)
    vals = rng.normal(size=6)
    previous = -np.inf
    for nu in (0.5, 1.0, 2.0, 8.0, 32.0, 1e3):
        fused = pool(vals, PoolConfig(method="fuse", nu=nu))
        assert fused >= previous - 1e-12
        previous = fused


@pytest.mark.parametrize("method", ["mean", "max", "fuse"])
def test_pool_monotone_in_inputs(method):
    rng = np.random.default_rng(2)
    config = PoolConfig(method=method, nu=2.0 if method == "fuse" else None)
    for _ in range(200):
        vals = rng.normal(size=5)
        bumped = vals.copy()
        i = int(rng.integers(5))
        bumped[i] += abs(rng.normal())
        assert pool(bumped, config) >= pool(vals, config) - 1e-12


def test_pool_normalized_divides_by_sigma():
    config = PoolConfig(method="max", normalized=True, sigma=(2.0, 4.0))
    assert pool([2.0, 2.0], config) == 1.0


def test_harmonic_weights_sum_below_one():
    for count in (1, 3, 10, 50):
        w = harmonic_weights(count)
        assert all(v > 0 for v in w)
        assert sum(w) <= 1.0


def test_collection_validation():
    with pytest.raises(ValueError):
        KernelCollection(())
    with pytest.raises(ValueError):
        KernelCollection((GAUSS,), weights=(0.5, 0.5))
    with pytest.raises(ValueError):
        KernelCollection((GAUSS, GAUSS), weights=(0.9, 0.2))
    with pytest.raises(ValueError):
        KernelCollection((GAUSS,), weights=(-0.1,))


# --- pooled test ---------------------------------------------------------------


def _two_sample(seed, n=14, shift=0.0):
    rng = np.random.default_rng(seed)
    return TwoSampleData(rng.normal(size=(n, 2)), rng.normal(size=(n, 2)) + shift)


def test_pooled_single_kernel_bit_identical():
    data = _two_sample(3)
    rep = ReplicateSpec(count=99, method="permutation", seed=11)
    single = two_sample_test(data, None, GAUSS, replicates=99, seed=11)
    for method in ("mean", "max", "fuse"):
        config = PoolConfig(method=method, nu=100.0 if method == "fuse" else None)
        pooled = pooled_test(data, KernelCollection((GAUSS,)), config, rep, 0.05)
        assert pooled.statistic == single.statistic
        assert pooled.threshold == single.threshold
        assert pooled.p_value == single.p_value
        assert pooled.reject == single.reject


def test_pooled_wild_single_kernel_bit_identical():
    data = _two_sample(4)
    rep = ReplicateSpec(count=99, method="wild_bootstrap", seed=7)
    single = two_sample_test(data, None, GAUSS, replicates=99, seed=7, method="wild_bootstrap")
    pooled = pooled_test(data, KernelCollection((GAUSS,)), PoolConfig(method="mean"), rep, 0.05)
    assert (pooled.statistic, pooled.threshold, pooled.p_value) == (
        single.statistic,
        single.threshold,
        single.p_value,
    )


def test_mean_pooling_matches_averaged_kernel():
    # linearity: the mean of V-statistics equals the V-statistic of the averaged core
    from kerntest.statistics import core_matrix_mmd

    data = _two_sample(5, shift=0.4)
    specs = [gaussian_kernel(b) for b in (0.5, 1.0, 2.0)]
    cores = [core_matrix_mmd(s, data) for s in specs]
    pooled_value = pool([v_statistic(c) for c in cores], PoolConfig(method="mean"))
    averaged = CoreMatrix(
        h=sum(c.h for c in cores) / 3.0, kernel_bound=4.0, framework="mmd"
    )
    assert pooled_value == pytest.approx(v_statistic(averaged), rel=1e-10)


def test_pooled_test_runs_normalized_fuse():
    data = _two_sample(6, shift=0.8)
    rep = ReplicateSpec(count=99, method="permutation", seed=2)
    collection = KernelCollection(tuple(gaussian_kernel(b) for b in (0.5, 1.0, 2.0)))
    result = pooled_test(data, collection, PoolConfig(method="fuse", normalized=True), rep, 0.05)
    assert result.framework == "mmd"
    assert 0.0 < result.p_value <= 1.0
    assert result.reject == (result.p_value <= 0.05)


def test_pooled_fuse_nu_warning():
    data = _two_sample(7)
    rep = ReplicateSpec(count=19, method="permutation", seed=2)
    collection = KernelCollection((gaussian_kernel(0.5), gaussian_kernel(1.5)))
    with pytest.warns(UserWarning, match="nu"):
        pooled_test(data, collection, PoolConfig(method="fuse", nu=1.0), rep, 0.05)


def test_pooled_hsic_shared_replicate_draws():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(16, 1))
    data = PairedData.from_parts(x, 0.9 * x + 0.1 * rng.normal(size=(16, 1)))
    collection = KernelCollection(
        tuple((gaussian_kernel(a), gaussian_kernel(b)) for a in (0.7, 1.4) for b in (0.7, 1.4))
    )
    rep = ReplicateSpec(count=99, method="permutation", seed=5)
    result = pooled_test(data, collection, PoolConfig(method="max"), rep, 0.05)
    assert result.framework == "hsic"
    assert result.reject


# --- aggregated test -------------------------------------------------------------


def test_aggregated_single_kernel_equals_single_test():
    data = _two_sample(9)
    rep = ReplicateSpec(count=99, method="permutation", seed=13)
    single = two_sample_test(data, None, GAUSS, replicates=99, seed=13)
    agg = aggregated_test(data, KernelCollection((GAUSS,)), rep, 0.05)
    assert agg.adjusted_level == 0.05
    assert agg.reject == single.reject
    assert agg.per_kernel[0].p_value == single.p_value
    assert agg.per_kernel[0].statistic == single.statistic


def test_aggregated_requires_enough_replicates():
    data = _two_sample(10)
    collection = KernelCollection((gaussian_kernel(0.5), gaussian_kernel(1.0), gaussian_kernel(2.0)))
    with pytest.raises(ValueError, match="replicates"):
        aggregated_test(data, collection, ReplicateSpec(count=19, seed=0), 0.05)


def test_aggregated_level_range_and_dominance():
    collection = KernelCollection(tuple(gaussian_kernel(b) for b in (0.4, 0.9, 2.1)))
    alpha = 0.05
    dominated = 0
    for trial in range(120):
        data = _two_sample(100 + trial, n=12, shift=0.6 if trial % 2 else 0.0)
        rep = ReplicateSpec(count=99, method="permutation", seed=trial)
        agg = aggregated_test(data, collection, rep, alpha)
        assert alpha / 3 - 1e-12 <= agg.adjusted_level <= alpha + 1e-12
        assert agg.reject == (agg.statistic > agg.threshold)
        assert agg.reject == (agg.p_value <= alpha)
        # Bonferroni: fixed adjusted level alpha/|K| on the same replicate draws
        from kerntest.engines import collection_replicates

        originals, reps = collection_replicates(
            data, list(collection.kernels), rep, statistic="sqrt_v"
        )
        pools = np.sort(np.column_stack([reps, originals]), axis=1)
        bonferroni_thr = _adjusted_thresholds(pools, np.full(3, alpha / 3))
        bonferroni_reject = bool((originals > bonferroni_thr).any())
        if bonferroni_reject:
            dominated += 1
            assert agg.reject  # aggregation never loses a Bonferroni rejection
    assert dominated > 0  # the check above actually exercised rejections


def _exhaustive_statistics(x, y, specs):
    """sqrt-V MMD statistics for every permutation of the merged 6-point sample."""
    z = np.vstack([x, y])
    m = x.shape[0]
    grams = [gram_matrix(s, z, z) for s in specs]
    stats = np.empty((len(specs), 720))
    for t, perm in enumerate(itertools.permutations(range(6))):
        mask = np.zeros(6)
        mask[list(perm[:m])] = 1.0
        for k, gram in enumerate(grams):
            gm = mask @ gram
            s_xx = float(gm @ mask)
            s_xy = float(gm @ (1.0 - mask))
            s_yy = gram.sum() - s_xx - 2 * s_xy
            v = s_xx / m**2 + s_yy / (6 - m) ** 2 - 2 * s_xy / (m * (6 - m))
            stats[k, t] = math.sqrt(max(v, 0.0))
    return stats


def test_aggregated_exhaustive_type_one_error():
    # m + n = 6, |K| = 2, every permutation enumerated: empirical level <= alpha
    rng = np.random.default_rng(123)
    specs = [gaussian_kernel(0.7), laplace_kernel(1.3)]
    for alpha in (0.05, 0.2):
        for _ in range(3):
            x, y = rng.normal(size=(3, 1)), rng.normal(size=(3, 1))
            stats = _exhaustive_statistics(x, y, specs)
            weights = np.full(2, 0.5)
            rejections = 0
            for t in range(720):
                originals = stats[:, t]
                u = _adjusted_level(originals, stats, alpha, weights, 20)
                pools = np.sort(np.column_stack([stats, originals]), axis=1)
                thr = _adjusted_thresholds(pools, u * weights * 2)
                rejections += bool((originals > thr).any())
            assert rejections / 720 <= alpha + 1e-12


def test_adaptive_null_level():
    alpha = 0.05
    trials = 200
    collection = KernelCollection(tuple(gaussian_kernel(b) for b in (0.5, 1.0, 2.0)))
    pooled_rejects = 0
    agg_rejects = 0
    for trial in range(trials):
        data = _two_sample(5000 + trial, n=12)
        rep = ReplicateSpec(count=99, method="permutation", seed=trial)
        pooled_rejects += pooled_test(
            data, collection, PoolConfig(method="fuse"), rep, alpha
        ).reject
        agg_rejects += aggregated_test(data, collection, rep, alpha).reject
    band = alpha + 3 * math.sqrt(alpha * (1 - alpha) / trials)
    assert pooled_rejects / trials <= band
    assert agg_rejects / trials <= band
