"""Connections: integrability, the quasi-nilpotence semi-decision, the
torsion bound, crystal evaluation, and transition isomorphisms."""

import random
from math import factorial

import pytest

from crystalline.exactalg import integers, integers_mod, rationals
from crystalline.envelope import (
    AlgebraPresentation,
    Element,
    EnvelopeError,
    Poly,
    build_envelope,
)
from crystalline.pdpoly import TruncationParams
from crystalline.crystal import (
    ConnectionData,
    NotWithinBound,
    PdThickening,
    RefusalError,
    Verified,
    check_integrable,
    check_pd_quasinilpotent,
    cocycle_check,
    crystal_evaluate,
    matrix_is_identity,
    matrix_mul,
    partial,
    pd_map,
    pd_nilpotence_bound,
    transition_iso,
)

Z = integers()
Q = rationals()
Z4 = integers_mod(4)
F3 = integers_mod(3)


def envelope(ring, chart, gens, n, w):
    src = AlgebraPresentation.from_strings(ring, chart, gens, gens)
    return build_envelope(src, TruncationParams(factorial(n), n, w))


# ---------------------------------------------------------------------------
# Integrability


def test_integrable_zero_connection():
    env = envelope(Z, ["x", "y"], [], 2, 4)
    assert check_integrable(ConnectionData(env, 2, None, n_max=2))


def test_integrable_single_direction_always():
    env = envelope(Z4, ["x"], [], 2, 4)
    one = env.carrier.one()
    conn = ConnectionData(env, 1, [[[dict(one)]]], n_max=2)
    assert check_integrable(conn)


def test_integrable_documented_counterexample():
    env = envelope(Z, ["x", "y"], [], 2, 4)
    one = env.carrier.one()
    g1 = [[{}, dict(one)], [{}, {}]]
    g2 = [[{}, {}], [dict(one), {}]]
    conn = ConnectionData(env, 2, [g1, g2], n_max=2)
    assert not check_integrable(conn)


def test_theta_leibnitz():
    # theta_j(f m) = partial_j(f) m + f theta_j(m), exactly, upstairs
    env = envelope(Z4, ["x"], ["x"], 3, 5)
    car = env.carrier.free_view()
    rng = random.Random(42)
    gamma = [[[dict(Element(car, {((0,), (1,), ()): 2}).data)]]]
    conn = ConnectionData(env, 1, gamma, n_max=3)
    gmats = conn.gamma_matrices(car)

    def theta(vec):
        from crystalline.crystal import _vec_theta

        return _vec_theta(car, gmats, 0, vec)

    for _ in range(8):
        fdata = {}
        for w in range(3):
            for b in car.basis(w):
                if rng.random() < 0.6:
                    fdata[b] = rng.randrange(1, 4)
        f = Element(car, fdata)
        m = Element(car, {car.basis(rng.randrange(3))[0]: 1})
        lhs = theta([(f * m).data])[0]
        df = partial(car, 0, f.data)
        rhs = (Element(car, df) * m + f * Element(car, theta([m.data])[0])).data
        assert car.normalize(lhs)[0] == car.normalize(rhs)[0]


# ---------------------------------------------------------------------------
# Quasi-nilpotence


def test_qn_zero_connection_witness_p():
    for p in (2, 3):
        Fp = integers_mod(p)
        env = envelope(Fp, ["x"], [], p, 6)
        conn = ConnectionData(env, 1, None, n_max=p)
        res = check_pd_quasinilpotent(conn, 10)
        assert isinstance(res, Verified)
        assert res.k == p


def test_qn_rational_base_trivial():
    env = envelope(Q, ["x"], [], 2, 4)
    one = env.carrier.one()
    conn = ConnectionData(env, 1, [[[dict(one)]]], n_max=2)
    res = check_pd_quasinilpotent(conn, 10)
    assert isinstance(res, Verified) and res.k == 1


def test_qn_inconclusive_is_not_a_disproof():
    env = envelope(Z, ["x"], [], 3, 4)
    one = env.carrier.one()
    conn = ConnectionData(env, 1, [[[dict(one)]]], n_max=3)
    res = check_pd_quasinilpotent(conn, 10)
    assert isinstance(res, NotWithinBound)
    assert res.status == "inconclusive"
    assert res.k_max == 10


def test_transition_refused_without_certificate():
    env = envelope(Z, ["x"], ["x"], 3, 4)
    one = env.carrier.one()
    conn = ConnectionData(env, 1, [[[dict(one)]]], n_max=3)
    B = PdThickening(env.carrier)
    t = Element(env.carrier, env.carrier.inject_poly(Poly.parse("x", Z, ["x"])))
    f = pd_map(env.carrier, B, [t])
    with pytest.raises(RefusalError):
        transition_iso(conn, f, f, k_max=8)


# ---------------------------------------------------------------------------
# The torsion bound


def test_pd_nilpotence_bound_values():
    assert pd_nilpotence_bound(1, 1) == 1
    assert pd_nilpotence_bound(2, 2) == 8
    assert pd_nilpotence_bound(1, 3) == 29  # ceil(18 log2 3), exactly
    assert pd_nilpotence_bound(3, 4) == 64
    # the ceiling is exact: 2^29 >= 3^18 > 2^28
    assert 2 ** 29 >= 3 ** 18 > 2 ** 28


# ---------------------------------------------------------------------------
# Thickenings, evaluation, transitions


def test_thickening_torsion_holds():
    env = envelope(Z4, ["x"], ["x"], 4, 6)
    B = PdThickening(env.carrier)
    assert B.verify_torsion()


def test_crystal_evaluate_on_quotient_to_R():
    # B = D^{1,1} = R: evaluating the structure crystal gives R itself
    src = AlgebraPresentation.from_strings(Z4, ["x"], ["x"], ["x"])
    env = build_envelope(src, TruncationParams(factorial(4), 4, 6))
    envR = env.with_truncation(TruncationParams(1, 1, 6))
    conn = ConnectionData(env, 1, None, n_max=4)
    B = PdThickening(envR.carrier)
    t = Element(envR.carrier, envR.carrier.inject_poly(Poly.parse("x", Z4, ["x"])))
    f = pd_map(env.carrier, B, [t])
    ev = crystal_evaluate(conn, f)
    # R = Z/4 here: one generator at weight 0, nothing above
    assert ev.module(0).gens == 1
    assert ev.module(1).gens == 0
    # identity evaluation: M itself
    fid = pd_map(env.carrier, PdThickening(env.carrier),
                 [Element(env.carrier, env.carrier.inject_poly(Poly.parse("x", Z4, ["x"])))])
    ev2 = crystal_evaluate(conn, fid)
    for w in range(4):
        assert ev2.module(w).gens == len(env.carrier.basis(w)) * conn.rank


def test_transition_identity_and_structure():
    env = envelope(Z4, ["x"], ["x"], 4, 6)
    conn = ConnectionData(env, 1, None, n_max=4)
    B = PdThickening(env.carrier)
    car = env.carrier
    t = Element(car, car.inject_poly(Poly.parse("x", Z4, ["x"])))
    f = pd_map(car, B, [t])
    g = pd_map(car, B, [t + Element(car, {((0,), (2,), ()): 1})])
    assert matrix_is_identity(car, transition_iso(conn, f, f))
    c = transition_iso(conn, f, g)
    assert matrix_is_identity(car, c)  # structure crystal: c_{f,g} = 1


def test_transition_two_term_sum_documented():
    # rank 1 with theta = d on A<t>: c(t (x) 1) = t (x) 1 + 1 (x) b; matrix
    # transport and the element-level finite sum agree
    env = envelope(Z4, ["x"], ["x"], 4, 6)
    conn = ConnectionData(env, 1, None, n_max=4)
    car = env.carrier
    B = PdThickening(car)
    t = Element(car, car.inject_poly(Poly.parse("x", Z4, ["x"])))
    beta = Element(car, {((0,), (2,), ()): 1})
    f = pd_map(car, B, [t + beta])
    g = pd_map(car, B, [t])
    b = f.chart_images[0] - g.chart_images[0]
    assert b == beta
    m = Element(car, car.inject_poly(Poly.parse("x", Z4, ["x"])))
    # sum_K theta^K(m) gamma_K(b): theta = d/dx, theta(x-class) = 1, then 0
    direct = g.apply(m) + b
    cmat = transition_iso(conn, f, g)
    transported = f.apply(m) * cmat[0][0]
    assert transported == direct


def rand_ideal_element(car, rng, ring):
    data = {}
    n = ring.modulus
    for w in range(1, 4):
        for b in car.basis(w):
            if car.pd_weight(b) >= 1 and rng.random() < 0.4:
                data[b] = rng.randrange(1, n)
    return Element(car, data)


@pytest.mark.parametrize("ring", [integers_mod(4), integers_mod(3)])
def test_cocycle_and_inverse_randomized(ring):
    rng = random.Random(101 if ring.modulus == 4 else 202)
    n = ring.modulus
    env = envelope(ring, ["x"], ["x"], max(n, 3), 6)
    car = env.carrier
    B = PdThickening(car)
    t = Element(car, car.inject_poly(Poly.parse("x", ring, ["x"])))
    upper = rand_ideal_element(car, rng, ring)
    gammas = [[[{}, dict(upper.data)], [{}, {}]]]
    conn = ConnectionData(env, 2, gammas, n_max=max(n, 3))
    assert check_integrable(conn)
    assert isinstance(conn.ensure_quasinilpotent(32), Verified)
    for _ in range(6):
        maps = [pd_map(car, B, [t + rand_ideal_element(car, rng, ring)])
                for _ in range(3)]
        assert cocycle_check(conn, *maps)
        cfg = transition_iso(conn, maps[0], maps[1])
        cgf = transition_iso(conn, maps[1], maps[0])
        assert matrix_is_identity(car, matrix_mul(car, cgf, cfg))


def test_pd_map_validity_checks():
    env = envelope(Z4, ["x"], ["x"], 3, 5)
    car = env.carrier
    B = PdThickening(car)
    bad = Element(car, car.one())  # wrong augmentation for x -> 1
    with pytest.raises(EnvelopeError):
        pd_map(car, B, [bad])
