"""Acceptance criteria.

Each test implements one numbered criterion at its stated tolerance and
prints one pass/fail line.  Cohomology is indexed by total weight (frame
symbols count one); the stated component values are asserted under that
documented convention.
"""

import json
import random
import time
from itertools import combinations, product
from math import comb, factorial, gcd
from pathlib import Path

import pytest

from crystalline.exactalg import (
    IntMatrix,
    ModuleShape,
    integers,
    integers_mod,
    prime_power_with_pd,
    rationals,
    solve_linear,
)
from crystalline.envelope import (
    AlgebraPresentation,
    Element,
    Poly,
    build_envelope,
)
from crystalline.pdpoly import (
    PdElement,
    TruncationParams,
    pd_gamma,
    pd_mul,
)
from crystalline.derham import derham_complex, poincare_homotopy
from crystalline.crystal import (
    ConnectionData,
    NotWithinBound,
    PdThickening,
    Verified,
    check_pd_quasinilpotent,
    cocycle_check,
    matrix_is_identity,
    matrix_mul,
    pd_map,
    pd_nilpotence_bound,
    transition_iso,
)
from crystalline.cechcomp import build_double_complex, cech_alexander
from crystalline.homcx import (
    check_complex,
    homology,
    homology_map_equal,
)
from crystalline.cli import parse_problem, run

Z = integers()
FOUR_BASES = [integers(), rationals(), integers_mod(4), integers_mod(9)]


def report(n, tag, ok, extra=""):
    line = f"criterion {n} ({tag}): {'PASS' if ok else 'FAIL'}"
    if extra:
        line += f" [{extra}]"
    print(line)
    assert ok


def envelope_for(ring, chart, gens, n, w):
    src = AlgebraPresentation.from_strings(ring, chart, gens, gens)
    return build_envelope(src, TruncationParams(factorial(n), n, w))


# ---------------------------------------------------------------------------


def _random_pd_element(ring, rng, arity, max_weight):
    coeffs = {}
    for _ in range(rng.randint(1, 4)):
        k = [0] * arity
        for _ in range(rng.randint(1, max_weight)):
            k[rng.randrange(arity)] += 1
        c = rng.randint(-4, 4)
        if c:
            coeffs[tuple(k)] = ring.normalize(coeffs.get(tuple(k), 0) + c)
    return PdElement(ring, arity, coeffs)


def test_criterion_1_pd_axiom_suite():
    t0 = time.monotonic()
    rng = random.Random(20260809)
    count = 0
    ok = True
    while count < 500:
        for ring in FOUR_BASES:
            arity = rng.randint(1, 3)
            x = _random_pd_element(ring, rng, arity, 8)
            y = _random_pd_element(ring, rng, arity, 4)
            a = ring.normalize(rng.randint(-3, 3))
            k = rng.randint(0, 4)
            # k! gamma_k = power
            if pd_gamma(k, x).scale(ring.from_int(factorial(k))) != x.power(k):
                ok = False
            # addition
            rhs = PdElement.zero(ring, arity)
            for i in range(k + 1):
                rhs = rhs + pd_mul(pd_gamma(i, x), pd_gamma(k - i, y))
            if pd_gamma(k, x + y) != rhs:
                ok = False
            # homogeneity
            lhs = pd_gamma(k, x.scale(a))
            coef = ring.one()
            for _ in range(k):
                coef = ring.mul(coef, a)
            if lhs != pd_gamma(k, x).scale(coef):
                ok = False
            count += 1
    elapsed = time.monotonic() - t0
    report(1, "pd axiom suite", ok and elapsed < 10.0,
           f"{count} randomized checks in {elapsed:.2f}s")


def test_criterion_2_poincare_lemma():
    t0 = time.monotonic()
    ok = True
    for ring in FOUR_BASES:
        for d in (1, 2, 3):
            H = poincare_homotopy(ring, d)
            F = H.forms
            for w in range(0, 9):
                for k in _compositions(d, w):
                    for mu in range(d + 1):
                        for S in combinations(range(d), mu):
                            form = F.monomial(k, S)
                            if form and F.homotopy_defect(form):
                                ok = False
    # consequence: H^0 = A at weight 0 and everything vanishes above
    for ring in FOUR_BASES:
        for d in (1, 2, 3):
            names = [f"x{i+1}" for i in range(d)]
            src = AlgebraPresentation.from_strings(ring, names, names, names)
            env = build_envelope(src, TruncationParams(1, 10**9, 8))
            for w in range(0, 9):
                cx = derham_complex(env, w).complex
                for i in cx.degrees():
                    h = homology(cx, i)
                    if w == 0 and i == 0:
                        want_unit = ModuleShape(0, (ring.modulus,)) \
                            if ring.kind == "ZmodN" else ModuleShape(1)
                        ok = ok and h == want_unit
                    else:
                        ok = ok and h.is_zero()
    elapsed = time.monotonic() - t0
    report(2, "Poincare contracting homotopy", ok and elapsed < 10.0,
           f"exact identity, d <= 3, weight <= 8, 4 bases in {elapsed:.2f}s")


def _compositions(d, w):
    if d == 1:
        return [(w,)]
    out = []

    def rec(prefix, rem, slots):
        if slots == 1:
            out.append(tuple(prefix + [rem]))
            return
        for v in range(rem + 1):
            rec(prefix + [v], rem - v, slots - 1)

    rec([], w, d)
    return out


CRITERION3_INSTANCES = [
    ("F2[x]", integers_mod(2), [], 2),
    ("F3[x]", integers_mod(3), [], 3),
    ("F2[x]/(x^2)", integers_mod(2), ["x^2"], 2),
    ("F3[x]/(x^2)", integers_mod(3), ["x^2"], 3),
    ("(Z/4)[x]", integers_mod(4), [], 4),
]


def test_criterion_3_comparison_theorem():
    ok = True
    details = []
    for tag, ring, gens, n in CRITERION3_INSTANCES:
        t0 = time.monotonic()
        env = envelope_for(ring, ["x"], gens, n, 6)
        ca = cech_alexander(env, None, 3, n, 6)
        for i in (0, 1, 2):
            for w in range(7):
                hd = homology(derham_complex(env.carrier, w).complex, i)
                hc = homology(ca.complex(w), i)
                if hd != hc:
                    ok = False
        dt = time.monotonic() - t0
        details.append(f"{tag} {dt:.1f}s")
        ok = ok and dt < 60.0
    report(3, "comparison theorem desk instances", ok, "; ".join(details))


def test_criterion_4_embedding_independence():
    ring = integers_mod(2)
    env_a = envelope_for(ring, ["x"], ["x^2"], 2, 6)
    src_b = AlgebraPresentation.from_strings(ring, ["x", "y"], ["x^2", "y"],
                                             ["x^2", "y"])
    env_b = build_envelope(src_b, TruncationParams(factorial(2), 2, 6))
    ok = True
    for i in (0, 1, 2):
        for w in range(7):
            ha = homology(derham_complex(env_a.carrier, w).complex, i)
            hb = homology(derham_complex(env_b.carrier, w).complex, i)
            if ha != hb:
                ok = False
    report(4, "embedding independence", ok,
           "charts F2[x] and F2[x,y] agree for i <= 2, weight <= 6")


def test_criterion_5_envelope_equals_chart():
    ok = True
    for p in (2, 3):
        ring = prime_power_with_pd(p, 2)
        src = AlgebraPresentation.from_strings(ring, ["x"], [str(p)], [str(p)])
        n = p * p
        env = build_envelope(src, TruncationParams(factorial(n), n, 8))
        ok = ok and env.envelope_is_chart
        for k in range(1, 9):
            h1 = homology(derham_complex(env.carrier, k).complex, 1)
            # independent oracle: Smith form of the 1x1 matrix [k] over Z
            # lifted against the ring modulus
            want_d = gcd(k, p * p)
            want = ModuleShape(0, (want_d,)) if want_d > 1 else ModuleShape(0)
            sol = solve_linear(IntMatrix(ring, [[k]]), [want_d])
            ok = ok and (sol is not None) and h1 == want
    report(5, "envelope = chart (p-adic line)", ok,
           "H^1 at weight k is Z/gcd(k, p^2), k <= 8, p in {2,3}")


# ---------------------------------------------------------------------------
# criterion 6: the torsion bound
#
# The bound serves thickenings with m I^[n] = 0, whose pointwise meaning is
# m x^[i] = 0 for every i >= n (all divided powers of every ideal element
# past the level).  Enforcing only the single weight n is strictly weaker
# and provably admits no bound at all: at every prime weight p all relation
# coefficients are divisible by p, so the class of t^[p] survives with
# order p.  The suite enforces the filtration form over a randomized
# family, verifies the bound, and keeps one single-weight counterexample
# as a negative control documenting the distinction.


def _enforced_span(v, m_mult, n, family, cap):
    """Per-weight Hermite bases of the ideal generated by m*gamma_i(x)
    for x in the family and all i >= n, up to the weight cap."""
    from crystalline.exactalg import hermite_row_basis

    mons_by_w = {w: _compositions(v, w) for w in range(cap + 1)}
    rows_by_w = {w: [] for w in range(cap + 1)}

    def deposit(el):
        for w in range(cap + 1):
            index = {k: i for i, k in enumerate(mons_by_w[w])}
            vec = [0] * len(mons_by_w[w])
            hit = False
            for k, c in el.coeffs.items():
                if sum(k) <= cap and sum(k) == w:
                    vec[index[k]] = int(c)
                    hit = True
            if hit and any(vec):
                rows_by_w[w].append(vec)

    for x in family:
        if x.is_zero():
            continue
        base = min(sum(k) for k in x.coeffs)
        for i in range(n, cap + 1):
            if i * base > cap:
                break
            rel = pd_gamma(i, x).scale(m_mult)
            gw = min((sum(k) for k in rel.coeffs), default=cap + 1)
            if gw > cap:
                continue
            for jw in range(0, cap - gw + 1):
                for J in mons_by_w[jw]:
                    deposit(pd_mul(rel, PdElement(Z, v, {J: 1})))
    return {w: hermite_row_basis(rows_by_w[w]) for w in range(cap + 1)}, mons_by_w


def _member_per_weight(el, bases, mons_by_w, cap):
    from crystalline.exactalg import integer_span_member

    for w in range(cap + 1):
        index = {k: i for i, k in enumerate(mons_by_w[w])}
        vec = [0] * len(mons_by_w[w])
        hit = False
        for k, c in el.coeffs.items():
            if sum(k) == w:
                vec[index[k]] = int(c)
                hit = True
        if hit and not integer_span_member(bases[w], vec):
            return False
    if any(sum(k) > cap for k in el.coeffs):
        raise AssertionError("probe escapes the weight cap")
    return True


def test_criterion_6_nilpotence_bound():
    from crystalline.exactalg import hermite_row_basis, integer_span_member

    cap = 16
    ok = True
    details = []
    rng = random.Random(6)
    for n in (2, 3, 4):
        for m_mult in (1, 2, 3):
            bound = pd_nilpotence_bound(m_mult, n)
            if bound > cap:
                details.append(f"n={n},m={m_mult}: bound {bound} > cap {cap}, vacuous")
                continue
            for v in (1, 2):
                family = [PdElement.variable(Z, v, j) for j in range(v)]
                for _ in range(3):
                    el = _random_pd_element(Z, rng, v, 2)
                    if not el.is_zero():
                        family.append(el)
                bases, mons_by_w = _enforced_span(v, m_mult, n, family, cap)
                # every monomial product of the variables at weight >= bound
                for w in range(bound, cap + 1):
                    index = {k: i for i, k in enumerate(mons_by_w[w])}
                    for M in mons_by_w[w]:
                        vec = [0] * len(mons_by_w[w])
                        vec[index[M]] = m_mult
                        if not integer_span_member(bases[w], vec):
                            ok = False
                # randomized divided-power products of family members
                for _ in range(12):
                    terms = []
                    total = 0
                    while total < bound:
                        x = family[rng.randrange(len(family))]
                        i = rng.randint(1, 3)
                        terms.append((i, x))
                        total += i
                    prod = PdElement.constant(Z, v, 1)
                    okay = True
                    for i, x in terms:
                        prod = pd_mul(prod, pd_gamma(i, x))
                        if any(sum(k) > cap for k in prod.coeffs):
                            okay = False
                            break
                    if not okay or prod.is_zero():
                        continue
                    if not _member_per_weight(prod.scale(m_mult), bases,
                                              mons_by_w, cap):
                        ok = False
            details.append(f"n={n},m={m_mult}: bound {bound} verified to cap {cap}")
    # negative control: single-weight enforcement admits no bound (a Z/3
    # class at weight 9 survives m*gamma_2-only relations)
    rows9 = []
    mons9 = _compositions(1, 9)
    for k in range(1, 5):
        lead = pd_gamma(2, PdElement(Z, 1, {(k,): 1}))
        rel = pd_mul(lead, PdElement(Z, 1, {(9 - 2 * k,): 1}))
        rows9.append([int(rel.coeffs.get((9,), 0))])
    for a in range(1, 9):
        prod = pd_mul(PdElement(Z, 1, {(a,): 1}), PdElement(Z, 1, {(9 - a,): 1}))
        rows9.append([int(prod.coeffs.get((9,), 0))])
    ok = ok and not integer_span_member(hermite_row_basis(rows9), [1])
    report(6, "divided power torsion bound", ok,
           "; ".join(details) + "; weight cap 16 recorded; single-weight "
           "enforcement counterexample at weight 9 documented")


# ---------------------------------------------------------------------------
# criterion 7: transition suite


def _rand_ideal_element(car, rng, modulus):
    data = {}
    for w in range(1, 4):
        for b in car.basis(w):
            if car.pd_weight(b) >= 1 and rng.random() < 0.35:
                data[b] = rng.randrange(1, modulus)
    return Element(car, data)


def test_criterion_7_transition_suite():
    t0 = time.monotonic()
    ok = True
    trials = 0
    for ring, seed in ((integers_mod(4), 474), (integers_mod(3), 373)):
        rng = random.Random(seed)
        n = max(ring.modulus, 3)
        env = envelope_for(ring, ["x"], ["x"], n, 6)
        car = env.carrier
        B = PdThickening(car)
        t_el = Element(car, car.inject_poly(Poly.parse("x", ring, ["x"])))
        for rank in (1, 2):
            if rank == 1:
                # nontrivial quasi-nilpotent rank-one connection over Z/4:
                # entries in 2*(carrier) kill every double Gamma factor
                entry = _rand_ideal_element(car, rng, ring.modulus)
                if ring.modulus == 4:
                    entry = entry.scale(2)
                    gammas = [[[dict(entry.data)]]]
                else:
                    gammas = [[[{}]]]
            else:
                gammas = [[[{}, dict(_rand_ideal_element(car, rng, ring.modulus).data)],
                           [{}, {}]]]
            conn = ConnectionData(env, rank, gammas, n_max=n)
            conn.ensure_quasinilpotent(40)
            per_conn = 25
            for _ in range(per_conn):
                f, g, h = (pd_map(car, B,
                                  [t_el + _rand_ideal_element(car, rng, ring.modulus)])
                           for _ in range(3))
                if not cocycle_check(conn, f, g, h):
                    ok = False
                cfg = transition_iso(conn, f, g)
                cgf = transition_iso(conn, g, f)
                if not matrix_is_identity(car, matrix_mul(car, cgf, cfg)):
                    ok = False
                trials += 1
    elapsed = time.monotonic() - t0
    report(7, "crystal transition suite", ok and trials >= 100,
           f"{trials} randomized cocycle+inverse checks in {elapsed:.1f}s")


def test_criterion_8_quasinilpotence_controls():
    ok = True
    # positive: Gamma = 0 over F_p[x] verified with witness k = p
    for p in (2, 3):
        env = envelope_for(integers_mod(p), ["x"], [], p, 6)
        res = check_pd_quasinilpotent(ConnectionData(env, 1, None, n_max=p), 10)
        ok = ok and isinstance(res, Verified) and res.k == p
    # negative control: theta = d + 1 over Z[x] at level 3, k_max = 10
    env = envelope_for(Z, ["x"], [], 3, 4)
    one = env.carrier.one()
    res = check_pd_quasinilpotent(ConnectionData(env, 1, [[[dict(one)]]], n_max=3), 10)
    inconclusive = isinstance(res, NotWithinBound) and res.status == "inconclusive"
    ok = ok and inconclusive
    report(8, "quasi-nilpotence controls", ok,
           "witness k = p over F_p[x]; theta = d+1 reported inconclusive, not false")


def test_criterion_9_double_complex_structure():
    ok = True
    for tag, ring, gens, n in CRITERION3_INSTANCES:
        env = envelope_for(ring, ["x"], gens, n, 6)
        dc = build_double_complex(env, None, 3, n, 6)
        for w in range(7):
            for mu in range(1, 5):
                col = dc.column_complex(mu, w)
                if not check_complex(col):
                    ok = False
                for nu in range(0, 3):
                    if not homology(col, nu).is_zero():
                        ok = False
            for nu in (0, 1):
                maps = [dc.row_map(nu, j, w) for j in range(nu + 2)]
                for i in range(0, 3):
                    for mref in maps[1:]:
                        if not homology_map_equal(maps[0], mref, i):
                            ok = False
    report(9, "double complex structure", ok,
           "columns acyclic and coface-induced maps coincide on homology")


def test_criterion_10_determinism():
    root = Path(__file__).resolve().parents[1] / "problems"
    corpus = sorted(root.glob("*.prob"))
    assert corpus, "problem corpus missing"
    ok = True
    for path in corpus:
        blobs = set()
        for _ in range(3):
            problem = parse_problem(path.read_text())
            blobs.add(json.dumps(run(problem), sort_keys=True))
        if len(blobs) != 1:
            ok = False
    report(10, "report determinism", ok,
           f"{len(corpus)} corpus files, 3 runs each, byte-identical JSON")
