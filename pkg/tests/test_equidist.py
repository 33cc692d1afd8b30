import math
from fractions import Fraction

import numpy as np
import pytest

from ffl.ifs import ValidationError
from ffl.equidist import (RateFn, EquidistSpec, GridPoint, random_grid_point,
                          grid_point_for, sigma, count_hits, weyl_sums,
                          digit_freq, sample_rational_points)
from ffl.rng import spawn_seed


# -- rate sums -----------------------------------------------------------------

def test_sigma_values():
    assert sigma(RateFn.constant(0.5), 10) == pytest.approx(5.0)
    assert sigma(RateFn.parse("(div 1 (mul 2 n))"), 4) == pytest.approx(25 / 24)
    assert sigma(RateFn.constant(0.0), 100) == 0.0


def test_rate_range_check_reports_offender():
    with pytest.raises(ValidationError, match="n=1"):
        sigma(RateFn.constant(0.7), 5)
    with pytest.raises(ValidationError, match="n=3"):
        sigma(RateFn.parse("(mul 0.2 n)"), 10)  # 0.6 at n=3


def test_rate_rejects_foreign_variables():
    with pytest.raises(ValidationError):
        RateFn.parse("(mul 0.1 x)")


# -- sequence specs ---------------------------------------------------------------

def test_geometric_spec_validation():
    with pytest.raises(ValidationError):
        EquidistSpec.geometric(1, 0.0, RateFn.constant(0.1), 10)
    with pytest.raises(ValidationError):
        EquidistSpec.geometric(2, 1.5, RateFn.constant(0.1), 10)


def test_explicit_spec_records_gaps():
    spec = EquidistSpec.explicit([1, 2, 4, 8, 16], 0.0, RateFn.constant(0.1))
    assert spec.lacunary_ratio == pytest.approx(2.0)
    assert spec.min_gap == 1
    with pytest.raises(ValidationError):
        EquidistSpec.explicit([3, 3, 4], 0.0, RateFn.constant(0.1))
    with pytest.raises(ValidationError):
        EquidistSpec.explicit([1.5, 2.5], 0.0, RateFn.constant(0.1))


# -- hit counting -------------------------------------------------------------------

def test_count_zero_point_always_hits():
    spec = EquidistSpec.geometric(2, 0.0, RateFn.constant(0.1), 100)
    assert count_hits(Fraction(0), spec).count == 100


def test_count_third_periodic_orbit_never_hits():
    spec = EquidistSpec.geometric(2, 0.0, RateFn.constant(0.25), 100)
    assert count_hits(Fraction(1, 3), spec).count == 0


def test_count_monotone_in_rate_and_horizon():
    x = random_grid_point(2064, seed=3)
    lo = count_hits(x, EquidistSpec.geometric(2, 0.3, RateFn.constant(0.05), 2000))
    hi = count_hits(x, EquidistSpec.geometric(2, 0.3, RateFn.constant(0.2), 2000))
    assert lo.count <= hi.count
    short = count_hits(x, EquidistSpec.geometric(2, 0.3, RateFn.constant(0.05), 800))
    assert short.count <= lo.count


def periodic_count_oracle(p, q, b, gamma, psi, N):
    """Closed-form count via the eventual cycle of b^n p mod q."""
    seen = {}
    orbit = []
    r = p % q
    n = 0
    while True:
        r = (b * r) % q
        n += 1
        if r in seen:
            start = seen[r]
            break
        seen[r] = n
        orbit.append(r)
        if n > N:  # horizon shorter than the cycle: count directly
            start = None
            break
    def hit(rv):
        y = Fraction(rv, q)
        d = abs(y - Fraction(gamma))
        return min(d, 1 - d) <= Fraction(psi)
    if start is None or N <= len(orbit):
        return sum(hit(rv) for rv in orbit[:N])
    head = orbit[:start - 1]
    cycle = orbit[start - 1:]
    full, rem = divmod(N - len(head), len(cycle))
    return (sum(hit(rv) for rv in head) + full * sum(hit(rv) for rv in cycle)
            + sum(hit(rv) for rv in cycle[:rem]))


def test_count_matches_periodic_oracle():
    rng = np.random.default_rng(12)
    rate = RateFn.constant(0.2)
    for _ in range(20):
        q = int(rng.integers(3, 200))
        p = int(rng.integers(1, q))
        b = int(rng.choice([2, 3, 5]))
        gamma = float(rng.choice([0.0, 0.25, 0.5]))
        N = int(rng.integers(50, 400))
        spec = EquidistSpec.geometric(b, gamma, rate, N)
        got = count_hits(Fraction(p, q), spec).count
        want = periodic_count_oracle(p, q, b, gamma, 0.2, N)
        assert got == want


def test_count_rate_converges_for_uniform_points():
    # hit fraction tends to twice a constant rate
    psi0 = 0.05
    N = 100_000
    spec = EquidistSpec.geometric(2, 0.0, RateFn.constant(psi0), N)
    band = 3 * math.sqrt(2 * psi0 / N) * 3
    for i in range(3):
        gp = grid_point_for(spec, seed=spawn_seed(77, i))
        res = count_hits(gp, spec)
        assert abs(res.count / N - 2 * psi0) <= band


def test_precision_budget_rejection():
    spec = EquidistSpec.geometric(2, 0.0, RateFn.constant(0.1), 100_000)
    gp = random_grid_point(128, seed=0)
    with pytest.raises(ValidationError, match="max admissible"):
        count_hits(gp, spec)


def test_fast_and_slow_paths_agree():
    rate = RateFn.parse("(div 1 (mul 2 n))")
    spec = EquidistSpec.geometric(2, 0.3, rate, 800)
    gp = grid_point_for(spec, seed=4)
    fast = count_hits(gp, spec)
    slow = count_hits(gp.fraction, spec)  # plain Fraction skips the bit path
    assert fast.count == slow.count


def test_count_result_normalisations():
    spec = EquidistSpec.geometric(2, 0.0, RateFn.constant(0.1), 2000)
    gp = grid_point_for(spec, seed=5)
    res = count_hits(gp, spec, epsilon=1.0)
    s = sigma(spec.rate, 2000)
    dev = res.count - 2 * s
    assert res.deviation_half == pytest.approx(
        dev / (math.sqrt(s) * math.log(s + 2) ** 3))
    assert res.deviation_twothirds == pytest.approx(
        dev / (s ** (2 / 3) * math.log(s + 2) ** 3))


# -- Weyl sums ---------------------------------------------------------------------

def test_weyl_zero_point_is_one():
    spec = EquidistSpec.geometric(2, 0.0, RateFn.constant(0.1), 500)
    sums = weyl_sums(Fraction(0), spec, 4)
    np.testing.assert_allclose(sums, 1.0)


def test_weyl_arithmetic_sequence_closed_form_bound():
    spec = EquidistSpec.explicit(list(range(1, 100_001)), 0.0, RateFn.constant(0.1))
    x = random_grid_point(256, seed=8)
    assert weyl_sums(x, spec, 1)[0] <= 0.05


def test_weyl_lacunary_band_over_seeds():
    terms = [2 ** n for n in range(1, 1001)]
    spec = EquidistSpec.explicit(terms, 0.0, RateFn.constant(0.1))
    small = 0
    for i in range(40):
        x = random_grid_point(1100, seed=spawn_seed(5, i))
        if weyl_sums(x, spec, 5).max() <= 0.1:
            small += 1
    assert small / 40 >= 0.9


# -- digit statistics -----------------------------------------------------------------

def test_digits_of_half_and_third():
    d = digit_freq(Fraction(1, 2), 2, 8)
    np.testing.assert_array_equal(d.digits, [1, 0, 0, 0, 0, 0, 0, 0])
    d = digit_freq(Fraction(1, 3), 3, 8)
    np.testing.assert_array_equal(d.digits, [1, 0, 0, 0, 0, 0, 0, 0])


def test_digits_of_triadic_samples_avoid_one():
    pts = sample_rational_points(
        [(Fraction(1, 3), Fraction(0)), (Fraction(1, 3), Fraction(2, 3))],
        [0.5, 0.5], 5, 1000, seed=6)
    for p in pts:
        d = digit_freq(p, 3, 1000)
        assert np.mean(d.digits == 1) <= 0.01


def test_digits_uniform_chi_square_reasonable():
    gp = random_grid_point(10_128, seed=7)
    d = digit_freq(gp, 2, 10_000)
    assert d.chi_square <= 15.0  # 1 dof, very generous


def test_digits_budget():
    with pytest.raises(ValidationError):
        digit_freq(Fraction(1, 3), 3, 2_000_000)


# -- composition with nonlinear images --------------------------------------------------

def test_pushforward_samples_through_counting_harness():
    # sample the triadic measure exactly, push through x -> x^2, count hits
    pts = sample_rational_points(
        [(Fraction(1, 3), Fraction(0)), (Fraction(1, 3), Fraction(2, 3))],
        [0.5, 0.5], 20, 400, seed=9)
    psi0 = 0.05
    N = 300
    spec = EquidistSpec.geometric(2, 0.0, RateFn.constant(psi0), N)
    fracs = []
    for y in pts:
        res = count_hits(y * y, spec)
        fracs.append(res.count / N)
    # hits concentrate near twice the constant rate
    assert abs(np.mean(fracs) - 2 * psi0) <= 0.05
