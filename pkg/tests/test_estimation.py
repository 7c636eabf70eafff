"""Tests for the three cardinality estimators.

The likelihood solver is checked against an independent bisection root
finder built on the scalar ``h`` function, and the q=0 cases against
their closed forms. Frozen values were computed from the defining
formulas directly.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hllkit.core_sketch import MultiplicityVector, SketchConfig, extract_counts, new_sketch
from hllkit.estimation import (
    CorrectionDomainExceededError,
    MlOptions,
    UnboundedEstimateError,
    improved_raw_estimate,
    ml_bounds,
    ml_estimate,
    ml_estimate_details,
    original_estimate,
)
from hllkit.special_functions import ALPHA_INF, SigmaTauTables, h, sigma, tau


def vector(counts):
    return MultiplicityVector(np.array(counts, dtype=np.int64))


def uniform_vector(m, q, value):
    counts = [0] * (q + 2)
    counts[value] = m
    return vector(counts)


def simulated_vector(p, q, n, seed=0):
    config = SketchConfig(p, q)
    sketch = new_sketch(config)
    for hv in np.random.default_rng(seed).integers(0, 1 << 64, n, dtype=np.uint64):
        sketch.insert_hash(int(hv))
    return extract_counts(sketch)


def reduced_terms(c):
    """Independent restatement of the likelihood-derivative pieces."""
    q, m = c.q, c.m
    nonzero = [k for k in range(q + 2) if c[k] > 0]
    k_min = max(nonzero[0], 1)
    k_max = min(nonzero[-1], q)
    z = sum(c[k] * math.ldexp(1.0, -k) for k in range(k_min, k_max + 1))
    a = z + c[0]
    b = z + math.ldexp(c[q + 1], -q)
    return a, b, k_min, k_max


def f_oracle(x, c):
    """Likelihood derivative equation, ``f(x) = m - C_0`` at the root.

    Evaluated with the scalar ``h`` directly instead of the solver's
    Taylor-plus-recursion chain, so it is an independent check.
    """
    q, m = c.q, c.m
    a, _, k_min, k_max = reduced_terms(c)
    weight = c[q + 1] + (c[k_max] if q >= 1 else 0)
    total = weight * h(x * math.ldexp(1.0, -k_max))
    for k in range(k_min, k_max):
        total += c[k] * h(x * math.ldexp(1.0, -k))
    return total + x * a - (m - c[0])


def bisect_root(c, iterations=200):
    bounds = ml_bounds(c)
    lo, hi = bounds.strong_lower, bounds.strong_upper
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if f_oracle(mid, c) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


register_vectors = st.builds(
    lambda values: vector(np.bincount(values, minlength=8)),
    st.lists(st.integers(0, 7), min_size=16, max_size=16),
)


def test_ml_options():
    opts = MlOptions()
    assert opts.epsilon == 1e-2
    assert opts.delta(4096) == 1e-2 / 64.0
    with pytest.raises(ValueError):
        MlOptions(epsilon=0.0)
    with pytest.raises(ValueError):
        MlOptions(epsilon=-1.0)


def test_original_all_zero():
    config = SketchConfig(12, 20)
    assert original_estimate(uniform_vector(4096, 20, 0), config) == 0.0


def test_original_linear_counting_branch():
    # raw stays under 2.5 m for a nearly-empty sketch, so the estimate
    # is exactly m ln(m / C_0)
    config = SketchConfig(12, 20)
    counts = [0] * 22
    counts[0] = 4000
    counts[1] = 96
    estimate = original_estimate(vector(counts), config)
    assert estimate == 4096 * math.log(4096 / 4000)


def test_original_mid_range_is_plain_raw():
    config = SketchConfig(12, 20)
    estimate = original_estimate(uniform_vector(4096, 20, 15), config)
    assert estimate == pytest.approx(96817625.29249188, rel=1e-13)


def test_original_large_range_correction():
    config = SketchConfig(12, 20)
    estimate = original_estimate(uniform_vector(4096, 20, 16), config)
    assert estimate == pytest.approx(198135993.51461464, rel=1e-13)


def test_original_correction_domain_error():
    # p+q=32 with all registers saturated: raw = alpha * 2^33 > 2^32
    config = SketchConfig(12, 20)
    with pytest.raises(CorrectionDomainExceededError, match="correction domain exceeded"):
        original_estimate(uniform_vector(4096, 20, 21), config)


def test_original_mid_range_accuracy():
    config = SketchConfig(12, 20)
    n = 100_000
    standard_error = 1.04 / math.sqrt(config.m)
    for seed in range(3):
        estimate = original_estimate(simulated_vector(12, 20, n, seed), config)
        assert abs(estimate - n) <= 3.0 * standard_error * n


def test_original_config_consistency():
    with pytest.raises(ValueError):
        original_estimate(uniform_vector(4096, 20, 0), SketchConfig(12, 19))
    with pytest.raises(ValueError):
        original_estimate(uniform_vector(4096, 20, 0), SketchConfig(11, 20))


def test_improved_raw_empty_and_saturated():
    assert improved_raw_estimate(uniform_vector(4096, 20, 0)) == 0.0
    assert improved_raw_estimate(uniform_vector(4096, 20, 21)) == math.inf


def test_improved_raw_half_filled_q0():
    # q=0, C_0 = m/2: closed form m ln2 / xi(log2 ln2)
    estimate = improved_raw_estimate(vector([2048, 2048]))
    assert estimate == pytest.approx(2839.1524602299633, rel=1e-13)


def test_improved_raw_matches_direct_formula():
    # Horner loop against the direct weighted sum
    rng = np.random.default_rng(5)
    for _ in range(20):
        c = simulated_vector(8, 12, int(rng.integers(1, 200_000)), int(rng.integers(1 << 30)))
        m, q = c.m, c.q
        z = (
            m * sigma(c[0] / m)
            + sum(c[k] * math.ldexp(1.0, -k) for k in range(1, q + 1))
            + m * tau(1.0 - c[q + 1] / m) * math.ldexp(1.0, -q)
        )
        assert improved_raw_estimate(c) == pytest.approx(ALPHA_INF * m * m / z, rel=1e-12)


def test_improved_raw_tables_identical():
    tables = SigmaTauTables.for_register_count(256)
    rng = np.random.default_rng(6)
    for _ in range(20):
        c = simulated_vector(8, 12, int(rng.integers(1, 500_000)), int(rng.integers(1 << 30)))
        assert improved_raw_estimate(c, tables) == improved_raw_estimate(c)
    assert improved_raw_estimate(uniform_vector(256, 12, 0), tables) == 0.0
    assert improved_raw_estimate(uniform_vector(256, 12, 13), tables) == math.inf


def test_improved_raw_tables_m_mismatch():
    tables = SigmaTauTables.for_register_count(128)
    with pytest.raises(ValueError):
        improved_raw_estimate(uniform_vector(256, 12, 0), tables)


def test_ml_bounds_empty_and_saturated():
    assert ml_bounds(uniform_vector(64, 5, 0)) == pytest.approx(
        type(ml_bounds(uniform_vector(64, 5, 0)))(0.0, 0.0, 0.0, 0.0)
    )
    with pytest.raises(UnboundedEstimateError):
        ml_bounds(uniform_vector(64, 5, 6))


def test_ml_bounds_q0_bracket_closed_form():
    # at q=0 both strong bounds collapse onto the closed-form root, so
    # the bracket checks carry a one-ulp tolerance
    for c0 in (1, 100, 2048, 4095):
        c = vector([c0, 4096 - c0])
        bounds = ml_bounds(c)
        root = math.log(4096 / c0)
        assert bounds.weak_lower <= bounds.strong_lower
        assert bounds.strong_upper <= bounds.weak_upper
        assert bounds.strong_lower <= root * (1.0 + 1e-14)
        assert root * (1.0 - 1e-14) <= bounds.strong_upper
        assert bounds.strong_lower == pytest.approx(root, rel=1e-12)
        assert bounds.strong_upper == pytest.approx(root, rel=1e-12)


@given(register_vectors)
@settings(max_examples=200)
def test_ml_bounds_ordering(c):
    if c[c.q + 1] == c.m:
        return
    bounds = ml_bounds(c)
    assert 0.0 <= bounds.weak_lower <= bounds.strong_lower
    assert bounds.strong_lower <= bounds.strong_upper <= bounds.weak_upper


@given(register_vectors)
@settings(max_examples=100)
def test_ml_bounds_bracket_the_root(c):
    if c[c.q + 1] == c.m or c[0] == c.m:
        return
    bounds = ml_bounds(c)
    # f is below zero at the strong lower bound and above at the upper
    assert f_oracle(bounds.strong_lower, c) <= 1e-9 * c.m
    assert f_oracle(bounds.strong_upper, c) >= -1e-9 * c.m


def test_ml_estimate_sentinels():
    assert ml_estimate(uniform_vector(4096, 20, 21)) == math.inf
    assert ml_estimate(uniform_vector(4096, 20, 0)) == 0.0
    details = ml_estimate_details(uniform_vector(4096, 20, 0))
    assert details.iterations == 0


def test_ml_estimate_q0_closed_forms():
    # under the Poisson model with q=0 the ML estimate is linear counting
    delta = MlOptions().delta(4096)
    for c0, expected in [
        (1, 34069.57021888243),
        (1024, 5678.261703147072),
        (2048, 2839.130851573536),
        (4095, 1.0001220901843502),
    ]:
        estimate = ml_estimate(vector([c0, 4096 - c0]))
        assert estimate == pytest.approx(expected, rel=delta)
        # the secant lands much closer than the guaranteed tolerance
        assert estimate == pytest.approx(expected, rel=1e-6)


@given(register_vectors)
@settings(max_examples=100, deadline=None)
def test_ml_estimate_matches_bisection(c):
    if c[c.q + 1] == c.m or c[0] == c.m:
        return
    root = bisect_root(c)
    estimate = ml_estimate(c)
    assert estimate / c.m == pytest.approx(root, rel=MlOptions().delta(c.m))


@given(register_vectors)
@settings(max_examples=100)
def test_ml_secant_sequence_monotone_and_bounded(c):
    if c[c.q + 1] == c.m or c[0] == c.m:
        return
    details = ml_estimate_details(c)
    xs = details.x_values
    assert all(a <= b for a, b in zip(xs, xs[1:]))
    assert xs[-1] <= ml_bounds(c).strong_upper * (1.0 + 1e-12)
    assert details.iterations == len(xs) - 1


def test_ml_iteration_budget_at_default_precision():
    rng = np.random.default_rng(9)
    for n in (10, 1000, 100_000, 10_000_000):
        c = simulated_vector(12, 20, min(n, 300_000), int(rng.integers(1 << 30)))
        assert ml_estimate_details(c).iterations <= 3


def test_f_oracle_increasing_and_concave():
    c = simulated_vector(6, 10, 500, seed=4)
    bounds = ml_bounds(c)
    xs = np.linspace(bounds.strong_lower * 0.5, bounds.strong_upper * 1.5, 40)
    values = [f_oracle(float(x), c) for x in xs]
    diffs = np.diff(values)
    assert (diffs > 0.0).all()
    assert (np.diff(diffs) <= 1e-9).all()


def test_ml_h_scale_unit_is_identity():
    c = simulated_vector(10, 14, 50_000, seed=8)
    assert ml_estimate_details(c, h_scale=1.0) == ml_estimate_details(c)


def test_ml_h_perturbation_bound():
    # a uniform relative error eps_h in every h evaluation moves the root
    # by at most (eps_h/2) * (1 + C_{q+1} / (m - C_{q+1}))
    opts = MlOptions(epsilon=1e-6)
    eps_h = 1e-3
    rng = np.random.default_rng(12)
    for _ in range(10):
        c = simulated_vector(8, 10, int(rng.integers(1, 3_000_000)), int(rng.integers(1 << 30)))
        if c[c.q + 1] == c.m:
            continue
        base = ml_estimate_details(c, opts).value
        shifted = ml_estimate_details(c, opts, h_scale=1.0 + eps_h).value
        bound = 0.5 * eps_h * (1.0 + c[c.q + 1] / (c.m - c[c.q + 1]))
        assert abs(shifted / base - 1.0) <= bound
