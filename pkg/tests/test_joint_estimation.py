"""Tests for two-sketch overlap estimation.

The log-likelihood is checked against a brute-force oracle that builds
the exact per-register value-pair distribution from the Poisson model
by enumerating all value triples, and the gradient against central
finite differences.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hllkit.core_sketch import (
    HllSketch,
    SketchConfig,
    extract_counts,
    merge,
    new_sketch,
)
from hllkit.estimation import MlOptions, ml_estimate
from hllkit.joint_estimation import (
    EstimateTriple,
    JointStatistic,
    PhiPoint,
    estimate_joint,
    extract_joint_statistic,
    inclusion_exclusion_estimates,
    joint_log_likelihood,
)


def sketch_from_registers(q, registers):
    p = int(math.log2(len(registers)))
    return HllSketch(SketchConfig(p, q), np.array(registers, dtype=np.uint8))


def record(config, hash_values):
    sketch = new_sketch(config)
    for h in hash_values:
        sketch.insert_hash(int(h))
    return sketch


def overlapping_pair(config, n_a, n_b, n_x, seed):
    rng = np.random.default_rng(seed)
    only_a = rng.integers(0, 1 << 64, n_a, dtype=np.uint64)
    only_b = rng.integers(0, 1 << 64, n_b, dtype=np.uint64)
    shared = rng.integers(0, 1 << 64, n_x, dtype=np.uint64)
    s1 = record(config, np.concatenate([only_a, shared]))
    s2 = record(config, np.concatenate([only_b, shared]))
    return s1, s2


def register_value_pmf(rate, m, q):
    """Distribution of one register's value under a whole-sketch rate."""
    cdf = [math.exp(-rate / m * math.ldexp(1.0, -k)) for k in range(q + 1)]
    cdf.append(1.0)
    return [cdf[0]] + [cdf[k] - cdf[k - 1] for k in range(1, q + 2)]


def oracle_log_likelihood(phi, s1, s2):
    """Exact log-probability of the observed register pairs.

    Enumerates every (value_a, value_b, value_shared) triple to build
    the joint value-pair distribution, then sums log-probabilities over
    the actual registers. Independent of the folded evaluation under
    test in everything but the Poisson model itself.
    """
    config = s1.config
    q, m = config.q, config.m
    pmf_a = register_value_pmf(math.exp(phi[0]), m, q)
    pmf_b = register_value_pmf(math.exp(phi[1]), m, q)
    pmf_x = register_value_pmf(math.exp(phi[2]), m, q)
    pair_prob = np.zeros((q + 2, q + 2))
    for a, pa in enumerate(pmf_a):
        for b, pb in enumerate(pmf_b):
            for x, px in enumerate(pmf_x):
                pair_prob[max(a, x), max(b, x)] += pa * pb * px
    total = 0.0
    for k1, k2 in zip(s1.registers.tolist(), s2.registers.tolist()):
        total += math.log(pair_prob[k1, k2])
    return total


def test_extract_worked_example():
    s1 = sketch_from_registers(1, [0, 2])
    s2 = sketch_from_registers(1, [1, 2])
    stat = extract_joint_statistic(s1, s2)
    assert stat.c1_less.tolist() == [1, 0, 0]
    assert stat.c2_greater.tolist() == [0, 1, 0]
    assert stat.c_equal.tolist() == [0, 0, 1]
    assert stat.c1_greater.tolist() == [0, 0, 0]
    assert stat.c2_less.tolist() == [0, 0, 0]


def test_extract_identical_sketches():
    config = SketchConfig(4, 6)
    rng = np.random.default_rng(1)
    sketch = record(config, rng.integers(0, 1 << 64, 300, dtype=np.uint64))
    stat = extract_joint_statistic(sketch, sketch)
    assert stat.c_equal.sum() == config.m
    assert stat.c1_less.sum() == 0
    assert stat.c1_greater.sum() == 0


def test_extract_config_mismatch():
    with pytest.raises(ValueError):
        extract_joint_statistic(
            new_sketch(SketchConfig(4, 6)), new_sketch(SketchConfig(4, 7))
        )


@given(
    st.lists(st.integers(0, 5), min_size=16, max_size=16),
    st.lists(st.integers(0, 5), min_size=16, max_size=16),
)
@settings(max_examples=100)
def test_extract_invariants(regs1, regs2):
    s1 = sketch_from_registers(4, regs1)
    s2 = sketch_from_registers(4, regs2)
    stat = extract_joint_statistic(s1, s2)
    q = stat.q
    assert stat.c1_greater[0] == 0 and stat.c2_greater[0] == 0
    assert stat.c1_less[q + 1] == 0 and stat.c2_less[q + 1] == 0
    assert stat.c1_less.sum() == stat.c2_greater.sum()
    assert stat.c2_less.sum() == stat.c1_greater.sum()
    assert stat.m == 16
    assert stat.counts_sketch1() == extract_counts(s1)
    assert stat.counts_sketch2() == extract_counts(s2)
    assert stat.counts_merged() == extract_counts(merge(s1, s2))


def test_joint_statistic_validation():
    zeros = np.zeros(4, dtype=np.int64)
    full = np.array([0, 8, 8, 0], dtype=np.int64)
    JointStatistic(zeros, zeros, zeros, zeros, full)
    with pytest.raises(ValueError):
        JointStatistic(zeros, zeros, zeros, zeros, np.array([0, -1, 1, 0]))
    with pytest.raises(ValueError):
        # greater-side count at value 0
        JointStatistic(zeros, np.array([1, 0, 0, 0]), zeros, zeros, full)
    with pytest.raises(ValueError):
        # less-side count at the top value
        JointStatistic(np.array([0, 0, 0, 1]), zeros, zeros, zeros, full)
    with pytest.raises(ValueError):
        # c1_less total without matching c2_greater total
        JointStatistic(np.array([1, 0, 0, 0]), zeros, zeros, zeros, full)


def test_phi_point_validation():
    point = PhiPoint(0.0, -1.0, 2.0)
    assert point.as_array().tolist() == [0.0, -1.0, 2.0]
    with pytest.raises(ValueError):
        PhiPoint(math.inf, 0.0, 0.0)
    with pytest.raises(ValueError):
        PhiPoint(0.0, math.nan, 0.0)


def test_likelihood_matches_brute_force_oracle():
    config = SketchConfig(3, 4)
    rng = np.random.default_rng(2)
    for seed in range(5):
        s1, s2 = overlapping_pair(config, 5, 7, 4, seed)
        stat = extract_joint_statistic(s1, s2)
        for _ in range(4):
            phi = rng.uniform(low=math.log(0.5), high=math.log(40.0), size=3)
            value, _ = joint_log_likelihood(PhiPoint(*phi), stat, config)
            assert value == pytest.approx(oracle_log_likelihood(phi, s1, s2), rel=1e-9)


def test_likelihood_config_consistency():
    config = SketchConfig(3, 4)
    s1, s2 = overlapping_pair(config, 5, 5, 5, 0)
    stat = extract_joint_statistic(s1, s2)
    with pytest.raises(ValueError):
        joint_log_likelihood(PhiPoint(0, 0, 0), stat, SketchConfig(3, 5))
    with pytest.raises(ValueError):
        joint_log_likelihood(PhiPoint(0, 0, 0), stat, SketchConfig(4, 4))


def test_gradient_matches_central_differences():
    config = SketchConfig(4, 8)
    rng = np.random.default_rng(3)
    step = 1e-5
    for seed in range(10):
        s1, s2 = overlapping_pair(config, 20, 15, 10, seed + 100)
        stat = extract_joint_statistic(s1, s2)
        phi = rng.uniform(low=-1.0, high=math.log(5 * config.m), size=3)
        _, gradient = joint_log_likelihood(PhiPoint(*phi), stat, config)
        for i in range(3):
            lo, hi = phi.copy(), phi.copy()
            lo[i] -= step
            hi[i] += step
            fd = (
                joint_log_likelihood(PhiPoint(*hi), stat, config)[0]
                - joint_log_likelihood(PhiPoint(*lo), stat, config)[0]
            ) / (2 * step)
            assert gradient[i] == pytest.approx(fd, rel=1e-5, abs=1e-7 * config.m)


def test_likelihood_swap_symmetry():
    config = SketchConfig(4, 6)
    s1, s2 = overlapping_pair(config, 12, 30, 9, 7)
    stat = extract_joint_statistic(s1, s2)
    swapped = JointStatistic(
        c1_less=stat.c2_less,
        c1_greater=stat.c2_greater,
        c2_less=stat.c1_less,
        c2_greater=stat.c1_greater,
        c_equal=stat.c_equal,
    )
    phi = PhiPoint(1.7, 2.9, 0.4)
    phi_swapped = PhiPoint(2.9, 1.7, 0.4)
    value, gradient = joint_log_likelihood(phi, stat, config)
    value_s, gradient_s = joint_log_likelihood(phi_swapped, swapped, config)
    assert value == pytest.approx(value_s, rel=1e-12)
    assert gradient[0] == pytest.approx(gradient_s[1], rel=1e-12)
    assert gradient[1] == pytest.approx(gradient_s[0], rel=1e-12)
    assert gradient[2] == pytest.approx(gradient_s[2], rel=1e-12)


def test_gradient_vanishes_for_disjoint_direction():
    # two disjoint streams; as phi_x -> -inf the intersection rate dies
    # out and its gradient component decays to zero from above
    config = SketchConfig(5, 10)
    s1, s2 = overlapping_pair(config, 60, 60, 0, 11)
    stat = extract_joint_statistic(s1, s2)
    _, gradient = joint_log_likelihood(
        PhiPoint(math.log(60.0), math.log(60.0), -30.0), stat, config
    )
    assert 0.0 <= gradient[2] < 1e-8


def test_likelihood_overflow_is_reported():
    config = SketchConfig(3, 4)
    s1, s2 = overlapping_pair(config, 5, 5, 5, 0)
    stat = extract_joint_statistic(s1, s2)
    with pytest.raises(OverflowError):
        joint_log_likelihood(PhiPoint(800.0, 0.0, 0.0), stat, config)


def test_inclusion_exclusion_arithmetic():
    config = SketchConfig(4, 6)
    s1, s2 = overlapping_pair(config, 10, 10, 5, 13)
    outputs = iter([100.0, 100.0, 150.0])
    a, b, x, union = inclusion_exclusion_estimates(s1, s2, lambda c: next(outputs))
    assert (a, b, x, union) == (50.0, 50.0, 50.0, 150.0)


def test_inclusion_exclusion_identical_sketches():
    config = SketchConfig(6, 10)
    rng = np.random.default_rng(17)
    sketch = record(config, rng.integers(0, 1 << 64, 500, dtype=np.uint64))
    a, b, x, union = inclusion_exclusion_estimates(sketch, sketch)
    estimate = ml_estimate(extract_counts(sketch))
    assert a == 0.0
    assert b == 0.0
    assert x == estimate
    assert union == estimate


def test_estimate_joint_identical_sketches():
    config = SketchConfig(8, 12)
    rng = np.random.default_rng(19)
    sketch = record(config, rng.integers(0, 1 << 64, 2000, dtype=np.uint64))
    triple = estimate_joint(sketch, sketch)
    single = ml_estimate(extract_counts(sketch))
    delta = MlOptions().delta(config.m)
    assert triple.lambda_x == pytest.approx(single, rel=10 * delta)
    assert triple.lambda_a < 0.01 * triple.lambda_x
    assert triple.lambda_b < 0.01 * triple.lambda_x
    assert triple.dominant_sketch is None


def test_estimate_joint_both_empty():
    config = SketchConfig(6, 10)
    triple = estimate_joint(new_sketch(config), new_sketch(config))
    assert triple == EstimateTriple(0.0, 0.0, 0.0, used_shortcut=True)


def test_estimate_joint_disjoint_shortcut():
    # register-disjoint supports prove an empty intersection exactly
    s1 = sketch_from_registers(3, [3, 2, 0, 0])
    s2 = sketch_from_registers(3, [0, 0, 1, 4])
    triple = estimate_joint(s1, s2)
    assert triple.used_shortcut
    assert triple.lambda_x == 0.0
    assert triple.lambda_a == ml_estimate(extract_counts(s1))
    assert triple.lambda_b == ml_estimate(extract_counts(s2))
    assert triple.iterations == 0


def test_estimate_joint_relabeling():
    config = SketchConfig(7, 9)
    s1, s2 = overlapping_pair(config, 400, 900, 300, 23)
    forward = estimate_joint(s1, s2)
    backward = estimate_joint(s2, s1)
    assert forward.lambda_a == pytest.approx(backward.lambda_b, rel=1e-6)
    assert forward.lambda_b == pytest.approx(backward.lambda_a, rel=1e-6)
    assert forward.lambda_x == pytest.approx(backward.lambda_x, rel=1e-6)


def test_estimate_joint_improves_on_initialization():
    config = SketchConfig(6, 8)
    for seed in range(5):
        s1, s2 = overlapping_pair(config, 300, 200, 150, seed + 40)
        stat = extract_joint_statistic(s1, s2)
        triple = estimate_joint(s1, s2)
        if triple.used_shortcut:
            continue
        # rebuild the clamped inclusion-exclusion starting point
        est1 = ml_estimate(stat.counts_sketch1())
        est2 = ml_estimate(stat.counts_sketch2())
        est_union = ml_estimate(stat.counts_merged())
        start = np.log(
            np.maximum(1.0, [est_union - est2, est_union - est1, est1 + est2 - est_union])
        )
        config_obj = s1.config
        start_value, _ = joint_log_likelihood(PhiPoint(*start), stat, config_obj)
        end = PhiPoint(
            math.log(triple.lambda_a), math.log(triple.lambda_b), math.log(triple.lambda_x)
        )
        end_value, _ = joint_log_likelihood(end, stat, config_obj)
        assert end_value >= start_value - 1e-9 * abs(start_value)


def test_estimate_joint_ballpark():
    config = SketchConfig(10, 12)
    s1, s2 = overlapping_pair(config, 3000, 3000, 3000, 29)
    triple = estimate_joint(s1, s2)
    for value in (triple.lambda_a, triple.lambda_b, triple.lambda_x):
        assert 1500 < value < 6000
    union = triple.lambda_a + triple.lambda_b + triple.lambda_x
    merged_estimate = ml_estimate(extract_counts(merge(s1, s2)))
    assert union == pytest.approx(merged_estimate, rel=0.05)


def test_estimate_joint_dominant_flag():
    s1 = sketch_from_registers(2, [1, 2, 1, 2])
    s2 = sketch_from_registers(2, [1, 3, 2, 2])
    triple = estimate_joint(s1, s2)
    assert triple.dominant_sketch == 2
    swapped = estimate_joint(s2, s1)
    assert swapped.dominant_sketch == 1


def test_estimate_joint_config_mismatch():
    with pytest.raises(ValueError):
        estimate_joint(new_sketch(SketchConfig(4, 6)), new_sketch(SketchConfig(5, 6)))
