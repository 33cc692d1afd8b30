import math

import numpy as np
import pytest

from conftest import lebesgue_transform
from ffl.ifs import CIFS, AffineMap, BudgetExhausted, ValidationError
from ffl.measure import (fourier_exact, fourier_product_homogeneous,
                         fourier_montecarlo, make_sampler, sample_points,
                         frostman_profile, cylinder_decomposition)


# -- sampling ----------------------------------------------------------------

def test_dirac_samples_collapse(dirac):
    pts = sample_points(dirac, 200, tol=1e-9, seed=1).points
    assert np.abs(pts).max() <= 1e-9


def test_dyadic_sample_mean(dyadic):
    pts = sample_points(dyadic, 100_000, tol=1e-9, seed=2).points
    # mean of the uniform law with a 3-sigma CLT allowance
    assert abs(pts.mean() - 0.5) <= 3 * pts.std() / math.sqrt(len(pts)) + 1e-6


def test_cantor_samples_avoid_middle_third(cantor):
    pts = sample_points(cantor, 50_000, tol=1e-9, seed=3).points
    assert not np.any((pts > 1 / 3 + 1e-9) & (pts < 2 / 3 - 1e-9))


def test_sampling_deterministic(cantor):
    a = sample_points(cantor, 1000, seed=5).points
    b = sample_points(cantor, 1000, seed=5).points
    c = sample_points(cantor, 1000, seed=6).points
    np.testing.assert_array_equal(a, b)
    assert np.any(a != c)


def test_depth_cap_reports_achieved(dirac):
    res = sample_points(dirac, 10, tol=1e-300, depth=40, seed=0)
    assert res.accuracy == pytest.approx(0.5 ** 40)


# -- rigorous evaluator -------------------------------------------------------

@pytest.mark.parametrize("xi", [0.5, 1.0, 7.25, 100.0])
def test_exact_matches_lebesgue_closed_form(dyadic, xi):
    fv = fourier_exact(dyadic, xi, tol=1e-8)
    assert abs(fv.value - lebesgue_transform(xi)) <= fv.error_bound


def test_exact_at_zero_is_one(cantor):
    fv = fourier_exact(cantor, 0.0)
    assert fv.value == 1.0 + 0.0j and fv.error_bound == 0.0


def test_exact_conjugate_symmetry(cantor):
    for xi in (0.7, 3.3, 12.0):
        a = fourier_exact(cantor, xi, tol=1e-9)
        b = fourier_exact(cantor, -xi, tol=1e-9)
        assert abs(b.value - np.conj(a.value)) <= 2e-9


def test_cantor_self_similarity_oracle(cantor):
    # both sides of the scale-3 refinement identity, evaluated independently
    for xi in (1.0, 2.0, 3.0 ** 5):
        lhs = fourier_exact(cantor, 3 * xi, tol=1e-10).value
        rhs = 0.5 * (1 + np.exp(-4j * np.pi * xi)) * fourier_exact(cantor, xi, tol=1e-10).value
        assert abs(lhs - rhs) <= 1e-8


def test_cantor_triadic_powers_equal(cantor):
    vals = [fourier_exact(cantor, 3.0 ** n, tol=5e-7).value for n in range(11)]
    mags = [abs(v) for v in vals]
    assert max(mags) - min(mags) <= 2 * 5e-7
    assert mags[0] > 0.1


def test_exact_budget_exhaustion(two_ratio):
    with pytest.raises(BudgetExhausted):
        fourier_exact(two_ratio, 1e6, tol=1e-12, budget=50)


def test_exact_requires_affine():
    from ffl.ifs import SmoothMap
    smooth = CIFS((0,), {0: SmoothMap.from_expr("(mul 0.5 x)")}, {0: 1.0})
    with pytest.raises(ValidationError):
        fourier_exact(smooth, 1.0)


# -- product evaluator --------------------------------------------------------

def test_product_agrees_with_exact(cantor):
    a = fourier_product_homogeneous(cantor, 1.0, 40)
    b = fourier_exact(cantor, 1.0, tol=1e-9)
    assert abs(a.value - b.value) <= 1e-8


def test_product_at_zero_and_integer(dyadic):
    assert fourier_product_homogeneous(dyadic, 0.0, 10).value == 1.0 + 0.0j
    fv = fourier_product_homogeneous(dyadic, 2.0, 40)
    assert abs(fv.value) <= 1e-8


def test_product_needs_equal_ratios(two_ratio):
    with pytest.raises(ValidationError):
        fourier_product_homogeneous(two_ratio, 1.0, 10)


# -- Monte Carlo ---------------------------------------------------------------

def test_montecarlo_dirac(dirac):
    fv = fourier_montecarlo(make_sampler(dirac), [0.7], 1000, seed=1)[0]
    assert abs(fv.value - 1.0) <= 1e-6


def test_montecarlo_dyadic_integer_freq(dyadic):
    fv = fourier_montecarlo(make_sampler(dyadic), [1.0], 1_000_000, seed=2)[0]
    assert abs(fv.value) <= 4 / math.sqrt(1_000_000)


def test_montecarlo_matches_exact(cantor):
    m = 1_000_000
    fv = fourier_montecarlo(make_sampler(cantor), [1.0], m, seed=3)[0]
    target = fourier_exact(cantor, 1.0, tol=1e-9).value
    assert abs(fv.value - target) <= 4 / math.sqrt(m)


def test_montecarlo_rejects_tiny_runs(cantor):
    with pytest.raises(ValidationError):
        fourier_montecarlo(make_sampler(cantor), [1.0], 10, seed=0)


# -- cross-method and structural invariants -----------------------------------

def test_cross_method_agreement(cantor):
    rng = np.random.default_rng(7)
    sampler = make_sampler(cantor)
    for xi in rng.uniform(-100, 100, size=20):
        a = fourier_exact(cantor, xi, tol=1e-8)
        b = fourier_product_homogeneous(cantor, xi, 60)
        c = fourier_montecarlo(sampler, [xi], 200_000, seed=int(abs(xi) * 100))[0]
        assert abs(a.value - b.value) <= a.error_bound + b.error_bound
        assert abs(a.value - c.value) <= a.error_bound + c.error_bound
        assert abs(b.value - c.value) <= b.error_bound + c.error_bound
        for fv in (a, b, c):
            assert abs(fv.value) <= 1.0 + fv.error_bound


def test_translation_covariance():
    # support [0, 1/2] system, then the same system shifted by c
    base = CIFS((0, 1), {0: AffineMap(1 / 3, 0.0), 1: AffineMap(1 / 3, 1 / 3)},
                {0: 0.5, 1: 0.5})
    c = 1 / 3
    shifted = CIFS((0, 1),
                   {0: AffineMap(1 / 3, c * (2 / 3)),
                    1: AffineMap(1 / 3, 1 / 3 + c * (2 / 3))},
                   {0: 0.5, 1: 0.5})
    for xi in (0.8, 4.0, 21.5):
        a = fourier_exact(base, xi, tol=1e-9)
        b = fourier_exact(shifted, xi, tol=1e-9)
        target = np.exp(-2j * np.pi * xi * c) * a.value
        assert abs(b.value - target) <= a.error_bound + b.error_bound


def test_cylinder_decomposition_invariants(two_ratio):
    dec = cylinder_decomposition(two_ratio, 0.1)
    assert dec.mass() == pytest.approx(1.0, abs=1e-10)
    assert np.all(dec.diameters <= 0.1)
    # prefix-free: stopping only at first crossing, so every parent ratio > 0.1
    for word in dec.words:
        parent = 1.0
        for s in word[:-1]:
            parent *= two_ratio.maps[s].ratio
        assert abs(parent) > 0.1


# -- Frostman profiles ---------------------------------------------------------

def test_frostman_dyadic(dyadic):
    pts = sample_points(dyadic, 100_000, seed=11).points
    prof = frostman_profile(pts)
    assert abs(prof.exponent - 1.0) <= 0.1


def test_frostman_dirac(dirac):
    pts = sample_points(dirac, 20_000, seed=12).points
    prof = frostman_profile(pts)
    assert np.allclose(prof.max_mass, 1.0)
    assert abs(prof.exponent) <= 1e-6


def test_frostman_cantor_matches_counting_oracle(cantor):
    pts = sample_points(cantor, 200_000, seed=13).points
    prof = frostman_profile(pts)
    dim = math.log(2) / math.log(3)
    assert abs(prof.exponent - dim) <= 0.05
    # independent oracle: triadic cylinder counting gives mass 2^-k on scale 3^-k
    for k in (4, 6, 8):
        r = 3.0 ** -k / 2
        starts = np.arange(0, 1, 1 / 64)
        srt = np.sort(pts)
        masses = (np.searchsorted(srt, starts + r) - np.searchsorted(srt, starts - r)) / len(pts)
        assert masses.max() <= 3 * 2.0 ** -k


def test_frostman_needs_enough_samples():
    with pytest.raises(ValidationError):
        frostman_profile(np.zeros(100))


def test_smooth_system_sampling_stays_in_image():
    from ffl.ifs import SmoothMap
    curved = SmoothMap.from_expr("(add (mul 0.2 (pow x 2)) (mul 0.5 x))")
    sys = CIFS((0, 1), {0: curved, 1: AffineMap(0.3, 0.7)}, {0: 0.5, 1: 0.5})
    pts = sample_points(sys, 5000, tol=1e-6, seed=21).points
    assert pts.min() >= 0.0 and pts.max() <= 1.0
    # the two first-level images cover everything
    lo, hi = curved.image(0.0, 1.0)
    assert np.all(((pts >= lo - 1e-6) & (pts <= hi + 1e-6))
                  | ((pts >= 0.7 - 1e-6) & (pts <= 1.0 + 1e-6)))


def luroth_truncated(n_max=30):
    """Truncation of the countable interval-filling system with harmonic
    ratio decay; the omitted weight is recorded as tail mass."""
    maps = {n: AffineMap(1.0 / (n * (n + 1)), 1.0 / (n + 1))
            for n in range(1, n_max + 1)}
    weights = {n: 1.0 / (n * (n + 1)) for n in range(1, n_max + 1)}
    tail = 1.0 / (n_max + 1)
    return CIFS(tuple(maps), maps, weights, tail_mass=tail)


def test_truncated_countable_tail_propagates():
    import math as _m
    from ffl.ifs import tail_check
    sys = luroth_truncated(30)
    chk = tail_check(sys, 0.4, declared_tail=0.05)
    assert chk.finite and not chk.exact
    fv = fourier_exact(sys, 2.0, tol=1e-9)
    assert fv.error_bound >= 2 * _m.pi * 2.0 * sys.tail_mass


def test_truncated_countable_cross_method():
    sys = luroth_truncated(30)
    m = 400_000
    for xi in (1.0, 6.5):
        a = fourier_exact(sys, xi, tol=1e-7)
        b = fourier_montecarlo(make_sampler(sys), [xi], m, seed=33)[0]
        # both evaluators see the same renormalised truncation, so they
        # agree within statistical error alone
        assert abs(a.value - b.value) <= 1e-7 + b.error_bound
