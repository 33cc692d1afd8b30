import math

import numpy as np
import pytest

from ffl.ifs import (CIFS, AffineMap, SmoothMap, ValidationError, SeparationError,
                     compose, make_word, tail_check, lyapunov,
                     build_fibre_product, fibre_product_from_1d,
                     cantor_system, dyadic_uniform_system)


def ab_system():
    return CIFS(("a", "b"), {"a": AffineMap(0.5, 0.0), "b": AffineMap(1 / 3, 2 / 3)},
                {"a": 0.5, "b": 0.5})


# -- composition ------------------------------------------------------------

def test_compose_two_maps():
    m = compose(ab_system(), ("a", "b"))
    assert m.ratio == pytest.approx(1 / 6)
    assert m.translate == pytest.approx(1 / 3)
    # x -> ((x+2)/3)/2 pointwise
    for x in (0.0, 0.4, 1.0):
        assert m(x) == pytest.approx(((x + 2) / 3) / 2)


def test_compose_empty_word_is_flagged_identity():
    m = compose(ab_system(), ())
    assert m.ratio == 1.0 and m.translate == 0.0
    assert not m.is_contraction


def test_compose_power_word():
    m = compose(CIFS(("a",), {"a": AffineMap(0.5, 0.0)}, {"a": 1.0}), ("a",) * 3)
    assert m.ratio == pytest.approx(1 / 8) and m.translate == 0.0


def test_compose_unknown_symbol_reports_index():
    with pytest.raises(ValidationError, match="index 1"):
        compose(ab_system(), ("a", "zzz"))


def test_compose_matches_right_to_left_fold():
    sys = ab_system()
    rng = np.random.default_rng(0)
    for _ in range(20):
        word = tuple(rng.choice(["a", "b"], size=rng.integers(1, 9)))
        m = compose(sys, word)
        for x in rng.random(3):
            folded = x
            for s in reversed(word):
                folded = sys.maps[s](folded)
            assert abs(m(x) - folded) <= 1e-12


def test_compose_smooth_matches_fold():
    smooth = SmoothMap.from_expr("(add (mul 0.2 (pow x 2)) (mul 0.5 x))")
    sys = CIFS((0, 1), {0: smooth, 1: AffineMap(0.4, 0.6)}, {0: 0.5, 1: 0.5})
    m = compose(sys, (0, 1, 0))
    for x in (0.0, 0.3, 1.0):
        folded = x
        for s in (0, 1, 0)[::-1]:
            folded = sys.maps[s](folded)
        assert abs(m(x) - folded) <= 1e-9


def test_word_ratio_multiplies_exactly_for_dyadic():
    # dyadic ratios make float products exact, so concatenation is exact
    sys = dyadic_uniform_system()
    w1 = make_word(sys, (0, 1, 1))
    w2 = make_word(sys, (1, 0))
    w12 = make_word(sys, (0, 1, 1, 1, 0))
    assert w12.ratio == w1.ratio * w2.ratio
    assert w12.weight == w1.weight * w2.weight


# -- validation -------------------------------------------------------------

def test_cifs_rejects_bad_weights():
    with pytest.raises(ValidationError):
        CIFS((0, 1), {0: AffineMap(0.5, 0.0), 1: AffineMap(0.5, 0.5)},
             {0: 0.5, 1: 0.6})
    with pytest.raises(ValidationError):
        CIFS((0,), {0: AffineMap(0.5, 0.0)}, {0: -1.0})


def test_cifs_rejects_expansion():
    with pytest.raises(ValidationError):
        CIFS((0,), {0: AffineMap(1.5, 0.0)}, {0: 1.0})


def test_smooth_map_certification():
    m = SmoothMap.from_expr("(add (mul 0.2 (pow x 2)) (mul 0.5 x))")
    assert m.contraction_bound < 1.0 and m.bound_kind == "grid"
    with pytest.raises(ValidationError):
        SmoothMap.from_expr("(mul 1.5 x)")  # expands
    with pytest.raises(ValidationError):
        SmoothMap.from_expr("(add x 0.5)")  # leaves the box


def test_tail_mass_accounting():
    sys = CIFS((0,), {0: AffineMap(0.5, 0.0)}, {0: 0.9}, tail_mass=0.1)
    assert sys.tail_mass == 0.1
    chk = tail_check(sys, 1.0, declared_tail=0.4)
    assert chk.value == pytest.approx(0.9 * 2 + 0.4)
    assert not chk.exact


# -- tail sums and Lyapunov exponent ----------------------------------------

def test_tail_check_values(cantor):
    assert tail_check(cantor, 1.0).value == pytest.approx(3.0)
    assert tail_check(cantor, 0.5).value == pytest.approx(math.sqrt(3.0))
    single = CIFS((0,), {0: AffineMap(0.5, 0.0)}, {0: 1.0})
    assert tail_check(single, 2.0).value == pytest.approx(4.0)
    with pytest.raises(ValidationError):
        tail_check(cantor, 0.0)


def test_lyapunov_values(cantor, dyadic):
    assert lyapunov(cantor) == pytest.approx(math.log(3.0))
    assert lyapunov(dyadic) == pytest.approx(math.log(2.0))
    single = CIFS((0,), {0: AffineMap(1 / math.e, 0.0)}, {0: 1.0})
    assert lyapunov(single) == pytest.approx(1.0)


def test_lyapunov_relabeling_invariance(cantor):
    relabeled = CIFS(("q", "p"), {"q": cantor.maps[1], "p": cantor.maps[0]},
                     {"q": 0.5, "p": 0.5})
    assert lyapunov(relabeled) == lyapunov(cantor)


# -- fibre products ----------------------------------------------------------

def test_fibre_product_direct_pair():
    fp = build_fibre_product(
        {"j": AffineMap(0.5, 0.0)},
        {"j": {"l0": AffineMap(1 / 3, 0.0), "l1": AffineMap(1 / 3, 2 / 3)}},
        {("j", "l0"): 0.5, ("j", "l1"): 0.5})
    assert fp.fold == 1
    assert fp.pair.gap == pytest.approx(2 / 3)
    assert fp.pair.ratio == pytest.approx(1 / 3)


def test_fibre_product_touching_images_need_iteration():
    fp = build_fibre_product(
        {"j": AffineMap(0.5, 0.0)},
        {"j": {0: AffineMap(0.5, 0.0), 1: AffineMap(0.5, 0.5)}},
        {("j", 0): 0.5, ("j", 1): 0.5})
    assert fp.fold == 2
    ga = fp.fibre_maps[fp.pair.base_id][fp.pair.fibre_a]
    gb = fp.fibre_maps[fp.pair.base_id][fp.pair.fibre_b]
    (alo, ahi), (blo, bhi) = ga.image(), gb.image()
    assert ahi < blo or bhi < alo


def test_fibre_product_figure_carpet():
    # three planar maps with base ratio 1/2 and fibre ratio 1/3
    fp = build_fibre_product(
        {"left": AffineMap(0.5, 0.0), "right": AffineMap(0.5, 0.5)},
        {"left": {0: AffineMap(1 / 3, 0.0), 1: AffineMap(1 / 3, 2 / 3)},
         "right": {0: AffineMap(1 / 3, 1 / 3)}},
        {("left", 0): 1 / 3, ("left", 1): 1 / 3, ("right", 0): 1 / 3})
    assert fp.fold == 1
    assert fp.pair.base_id == "left"
    assert {abs(fp.base_map(s).ratio) for s in fp.alphabet} == {0.5}
    fibre_ratios = sorted(abs(fp.fibre_map(s).ratio) for s in fp.alphabet)
    assert fibre_ratios == pytest.approx([1 / 3] * 3)


def test_fibre_product_rejects_common_fixed_point():
    with pytest.raises(ValidationError):
        build_fibre_product(
            {"j": AffineMap(0.5, 0.0)},
            {"j": {0: AffineMap(0.5, 0.0), 1: AffineMap(0.25, 0.0)}},
            {("j", 0): 0.5, ("j", 1): 0.5})


def test_fibre_product_separation_failure():
    # touching images cannot separate when iteration is disallowed
    with pytest.raises(SeparationError):
        build_fibre_product(
            {"j": AffineMap(0.5, 0.0)},
            {"j": {0: AffineMap(0.5, 0.0), 1: AffineMap(0.5, 0.5)}},
            {("j", 0): 0.5, ("j", 1): 0.5}, n_max=1)


def test_separated_pair_invariants(two_ratio):
    fp = fibre_product_from_1d(two_ratio)
    p = fp.pair
    wa, wb = fp.weights[(p.base_id, p.fibre_a)], fp.weights[(p.base_id, p.fibre_b)]
    assert wa == wb == p.weight
    ga = fp.fibre_maps[p.base_id][p.fibre_a]
    gb = fp.fibre_maps[p.base_id][p.fibre_b]
    assert ga.ratio == pytest.approx(gb.ratio)
    (alo, ahi), (blo, bhi) = ga.image(), gb.image()
    assert ahi < blo or bhi < alo
    assert abs(gb.translate - ga.translate) >= p.gap > 0
