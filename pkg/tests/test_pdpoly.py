"""Divided power polynomial arithmetic against the defining axioms."""

import random
from math import factorial

import pytest

from crystalline.exactalg import integers, integers_mod, rationals
from crystalline.pdpoly import (
    ExprError,
    PdElement,
    TruncationParams,
    format_pd_element,
    ideal_power_membership,
    parse_pd_element,
    pd_gamma,
    pd_mul,
    substitute,
    truncate,
)

Z = integers()
RINGS = [integers(), rationals(), integers_mod(4), integers_mod(9)]


def mono(ring, arity, k, c=1):
    return PdElement(ring, arity, {tuple(k): c})


def test_square_of_generator():
    t = PdElement.variable(Z, 1, 0)
    assert pd_mul(t, t) == mono(Z, 1, [2], 2)


def test_product_binomial():
    # t^[2] t^[3] = C(5,2) t^[5] = 10 t^[5]
    assert pd_mul(mono(Z, 1, [2]), mono(Z, 1, [3])) == mono(Z, 1, [5], 10)


def test_independent_variables():
    a = PdElement.variable(Z, 2, 0)
    b = PdElement.variable(Z, 2, 1)
    assert pd_mul(a, b) == mono(Z, 2, [1, 1], 1)


def test_gamma_of_generator():
    t = PdElement.variable(Z, 1, 0)
    assert pd_gamma(2, t) == mono(Z, 1, [2])


def test_gamma_of_higher_power():
    # 2! gamma_2(x) = x^2 and (t^[2])^2 = 6 t^[4], so gamma_2(t^[2]) = 3 t^[4]
    assert pd_gamma(2, mono(Z, 1, [2])) == mono(Z, 1, [4], 3)


def test_gamma_homogeneity():
    t = PdElement.variable(Z, 1, 0)
    assert pd_gamma(3, t.scale(2)) == mono(Z, 1, [3], 8)


def test_gamma_needs_zero_constant_term():
    with pytest.raises(ValueError):
        pd_gamma(2, PdElement.constant(Z, 1, 1) + PdElement.variable(Z, 1, 0))


def rand_element(ring, rng, arity, max_weight, terms=4, zero_constant=True):
    coeffs = {}
    for _ in range(terms):
        k = [0] * arity
        w = rng.randint(1 if zero_constant else 0, max_weight)
        for _ in range(w):
            k[rng.randrange(arity)] += 1
        c = rng.randint(-4, 4)
        if c:
            coeffs[tuple(k)] = coeffs.get(tuple(k), 0) + c
    return PdElement(ring, arity, {k: ring.normalize(v) for k, v in coeffs.items()})


@pytest.mark.parametrize("ring", RINGS)
def test_axiom_factorial(ring):
    rng = random.Random(11)
    for _ in range(20):
        x = rand_element(ring, rng, rng.randint(1, 3), 4)
        for k in range(5):
            lhs = pd_gamma(k, x).scale(ring.from_int(factorial(k)))
            assert lhs == x.power(k)


@pytest.mark.parametrize("ring", RINGS)
def test_axiom_addition(ring):
    rng = random.Random(13)
    for _ in range(15):
        arity = rng.randint(1, 3)
        x = rand_element(ring, rng, arity, 3)
        y = rand_element(ring, rng, arity, 3)
        for k in range(4):
            rhs = PdElement.zero(ring, arity)
            for i in range(k + 1):
                rhs = rhs + pd_mul(pd_gamma(i, x), pd_gamma(k - i, y))
            assert pd_gamma(k, x + y) == rhs


def test_mul_associative_commutative():
    rng = random.Random(17)
    for ring in RINGS:
        for _ in range(10):
            arity = rng.randint(1, 3)
            a = rand_element(ring, rng, arity, 3, zero_constant=False)
            b = rand_element(ring, rng, arity, 3, zero_constant=False)
            c = rand_element(ring, rng, arity, 3, zero_constant=False)
            assert pd_mul(a, b) == pd_mul(b, a)
            assert pd_mul(pd_mul(a, b), c) == pd_mul(a, pd_mul(b, c))


def test_ideal_power_membership():
    assert ideal_power_membership(mono(Z, 1, [3]), 2)
    assert not ideal_power_membership(PdElement.constant(Z, 1, 1) + mono(Z, 1, [2]), 1)
    assert ideal_power_membership(mono(Z, 2, [1, 2]), 3)


def test_truncate_documented():
    x = mono(Z, 1, [1]) + mono(Z, 1, [3], 5)
    assert truncate(x, TruncationParams(2, 2)) == mono(Z, 1, [1]) + mono(Z, 1, [3])
    assert truncate(mono(Z, 1, [2]), TruncationParams(1, 2)).is_zero()
    x2 = PdElement.constant(Z, 1, 7) + mono(Z, 1, [5], 4)
    assert truncate(x2, TruncationParams(4, 3)) == PdElement.constant(Z, 1, 7)


def test_truncate_idempotent_and_multiplicative():
    rng = random.Random(23)
    p = TruncationParams(3, 2, 6)
    for ring in (Z, integers_mod(9)):
        for _ in range(10):
            a = rand_element(ring, rng, 2, 4, zero_constant=False)
            b = rand_element(ring, rng, 2, 4, zero_constant=False)
            ta = truncate(a, p)
            assert truncate(ta, p) == ta
            lhs = truncate(pd_mul(a, b), p)
            rhs = truncate(pd_mul(truncate(a, p), truncate(b, p)), p)
            assert lhs == rhs


def test_truncate_sets_clip_flag():
    x = mono(Z, 1, [5])
    out = truncate(x, TruncationParams(2, 2, 3))
    assert out.is_zero() and out.clipped


def test_substitution_addition_axiom():
    u = PdElement.variable(Z, 2, 0)
    v = PdElement.variable(Z, 2, 1)
    image = substitute(mono(Z, 1, [2]), {0: u + v})
    assert image == mono(Z, 2, [2, 0]) + mono(Z, 2, [1, 1]) + mono(Z, 2, [0, 2])


def test_substitution_trivial_cases():
    assert substitute(PdElement.variable(Z, 1, 0), {0: PdElement.zero(Z, 1)}).is_zero()
    u = PdElement.variable(Z, 1, 0)
    assert substitute(mono(Z, 1, [3]), {0: u.scale(2)}) == mono(Z, 1, [3], 8)


def test_substitution_functorial():
    rng = random.Random(31)
    for _ in range(8):
        x = rand_element(Z, rng, 1, 3)
        f_img = rand_element(Z, rng, 2, 2)
        g0 = rand_element(Z, rng, 2, 2)
        g1 = rand_element(Z, rng, 2, 2)
        # x -> f -> g  versus  x -> (g o f)
        step1 = substitute(x, {0: f_img})
        lhs = substitute(step1, {0: g0, 1: g1})
        composed = substitute(f_img, {0: g0, 1: g1})
        rhs = substitute(x, {0: composed})
        assert lhs == rhs


def test_parse_and_format_round_trip():
    text = "t1^[3]*t2^[1] + 2*t1^[1] - 3"
    el = parse_pd_element(text, Z, ["t1", "t2"])
    assert format_pd_element(el) == "-3 + 2*t1^[1] + t1^[3]*t2^[1]"
    again = parse_pd_element(format_pd_element(el), Z, ["t1", "t2"])
    assert again == el


def test_parse_plain_power_is_ring_power():
    el = parse_pd_element("t1^2", Z, ["t1"])
    assert el == mono(Z, 1, [2], 2)


def test_parse_error_positions():
    with pytest.raises(ExprError) as e:
        parse_pd_element("t1^[2", Z, ["t1"])
    assert e.value.pos == 5
    with pytest.raises(ExprError):
        parse_pd_element("t1 + * 2", Z, ["t1"])


def test_rational_coefficients():
    Qr = rationals()
    el = parse_pd_element("1/2*t1^[1]", Qr, ["t1"])
    from fractions import Fraction

    assert el.coeffs[(1,)] == Fraction(1, 2)
