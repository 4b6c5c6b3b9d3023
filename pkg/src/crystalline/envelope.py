"""Finite presentations of truncated divided power envelopes.

Given a polynomial chart P = A[x_1..x_d], a quotient R = P/J, and ideal
generators f_1..f_e whose classes form an R-basis of J/J^2, the envelope
of P along J has an exact normal form: an A-basis of monomials

    x^alpha * t^[K] * xi^[L]

with x^alpha running over the reduced monomials of R, t_i the divided
power generator attached to f_i, and xi the weight-one generators added by
fiber powers of the chart.  Multiplication rewrites chart products through
the unique decomposition P = (+)_gamma R * f^gamma (verified degree by
degree; rejected when the splitting fails), so the identities t_i = f_i
are active: this is the actual envelope, not its associated graded.

Truncation by (m, n) reduces coefficients of monomials of divided power
weight >= n modulo m.  When J is generated by the base prime p itself
(standard divided powers on (p) in Z/p^e) the envelope equals the chart;
the quotient data becomes a p-power torsion profile per xi-weight and the
presentation is annotated accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial

from .exactalg import BaseDpRing, factorial_valuation, xgcd
from .pdpoly import (
    TruncationParams,
    parse_terms,
    monomial_product_coeff,
    monomial_gamma_coeff,
)


class EnvelopeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Chart polynomials


class Poly:
    """Polynomial in the chart variables with coefficients in the base ring."""

    __slots__ = ("ring", "arity", "coeffs")

    def __init__(self, ring: BaseDpRing, arity: int, coeffs=None):
        self.ring = ring
        self.arity = arity
        clean = {}
        if coeffs:
            for k, v in coeffs.items():
                v = ring.normalize(v)
                if not ring.is_zero(v):
                    clean[tuple(k)] = v
        self.coeffs = clean

    @classmethod
    def parse(cls, text: str, ring: BaseDpRing, names: list[str]) -> "Poly":
        index = {n: i for i, n in enumerate(names)}
        out = {}
        for coeff, factors in parse_terms(text):
            k = [0] * len(names)
            for name, exp, divided in factors:
                if divided:
                    raise EnvelopeError(f"divided power {name}^[{exp}] in a chart polynomial")
                if name not in index:
                    raise EnvelopeError(f"unknown chart variable {name!r}")
                k[index[name]] += exp
            c = coeff if ring.kind == "Q" else _coeff_into_ring(ring, coeff)
            key = tuple(k)
            prev = out.get(key, ring.zero())
            out[key] = ring.add(prev, c)
        return cls(ring, len(names), out)

    def is_zero(self):
        return not self.coeffs

    def degree(self) -> int:
        return max((sum(k) for k in self.coeffs), default=0)

    def is_homogeneous(self) -> bool:
        degs = {sum(k) for k in self.coeffs}
        return len(degs) <= 1

    def is_constant(self) -> bool:
        return all(sum(k) == 0 for k in self.coeffs)

    def constant_value(self):
        return self.coeffs.get(tuple([0] * self.arity), self.ring.zero())

    def partial(self, j: int) -> "Poly":
        out = {}
        R = self.ring
        for k, v in self.coeffs.items():
            if k[j]:
                kk = list(k)
                kk[j] -= 1
                key = tuple(kk)
                out[key] = R.add(out.get(key, R.zero()), R.mul(v, R.from_int(k[j])))
        return Poly(R, self.arity, out)

    def mul(self, other: "Poly") -> "Poly":
        R = self.ring
        out = {}
        for k, a in self.coeffs.items():
            for l, b in other.coeffs.items():
                key = tuple(x + y for x, y in zip(k, l))
                out[key] = R.add(out.get(key, R.zero()), R.mul(a, b))
        return Poly(R, self.arity, out)

    def format(self, names: list[str]) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for k in sorted(self.coeffs, key=lambda kk: (sum(kk), kk)):
            c = self.coeffs[k]
            fac = "*".join(f"{names[j]}^{e}" if e > 1 else names[j]
                           for j, e in enumerate(k) if e)
            if not fac:
                parts.append(str(c))
            elif c == self.ring.one():
                parts.append(fac)
            else:
                parts.append(f"{c}*{fac}")
        return " + ".join(parts).replace("+ -", "- ")


def _coeff_into_ring(ring: BaseDpRing, q: Fraction):
    if q.denominator == 1:
        return ring.normalize(q.numerator)
    if ring.kind == "ZmodN":
        return ring.mul(q.numerator, ring.inverse(q.denominator))
    raise EnvelopeError(f"coefficient {q} is not integral over {ring}")


def _monomials_of_degree(arity: int, deg: int):
    if arity == 0:
        return [()] if deg == 0 else []
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(tuple(prefix + [remaining]))
            return
        for v in range(remaining, -1, -1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], deg, arity)
    return sorted(out)


# ---------------------------------------------------------------------------
# Source data


@dataclass
class AlgebraPresentation:
    """Chart P = A[x..], quotient relations presenting R, and the ideal
    generators whose classes must base J/J^2."""

    base: BaseDpRing
    chart_vars: list[str]
    quotient_rels: list[Poly]
    ideal_gens: list[Poly]
    declared_weights: list[int] | None = None

    @classmethod
    def from_strings(cls, base, chart_vars, quotient_rels, ideal_gens, weights=None):
        qr = [Poly.parse(s, base, chart_vars) for s in quotient_rels]
        ig = [Poly.parse(s, base, chart_vars) for s in ideal_gens]
        return cls(base, list(chart_vars), qr, ig, weights)


# ---------------------------------------------------------------------------
# Shared reduction / decomposition tables


class ChartCore:
    """Reduced monomial bases of R per degree and the decomposition of
    chart products into the R * f^gamma normal form."""

    def __init__(self, ring, chart_vars, ideal_gens, weights, graded: bool,
                 block_bound: int | None, chart_mode: bool):
        self.ring = ring
        self.chart = list(chart_vars)
        self.d = len(chart_vars)
        self.gens = list(ideal_gens)
        self.e = 0 if chart_mode else len(ideal_gens)
        self.weights = list(weights)
        self.graded = graded
        self.chart_mode = chart_mode
        self.block_bound = block_bound
        # pivots: leading monomial -> (row dict, provenance dict)
        self.pivots: dict = {}
        self.reduced_by_deg: dict[int, list] = {}
        self._built_deg = -1
        self._decomp_memo: dict = {}
        self.dfs = [[f.partial(j) for j in range(self.d)] for f in self.gens] \
            if not chart_mode else []
        if not graded and block_bound is None:
            raise EnvelopeError("inhomogeneous ideal generators need a weight cutoff")
        if not graded:
            self._build_filtered_block()

    # -- term order ---------------------------------------------------------

    @staticmethod
    def _order(mono):
        return (sum(mono), mono)

    # -- echelon construction ------------------------------------------------

    def _insert_rows(self, rows, pending):
        R = self.ring
        queue = list(rows)
        while queue:
            vec, prov = queue.pop()
            while vec:
                lead = max(vec, key=self._order)
                if lead in self.pivots:
                    prow, pprov = self.pivots[lead]
                    c = vec[lead]
                    vec = _dict_sub(R, vec, _dict_scale(R, prow, c))
                    prov = _dict_sub(R, prov, _dict_scale(R, pprov, c))
                    continue
                c = vec[lead]
                if R.is_unit(c):
                    inv = R.inverse(c)
                    self.pivots[lead] = (_dict_scale(R, vec, inv), _dict_scale(R, prov, inv))
                    if lead in pending:
                        queue.append(pending.pop(lead))
                    break
                if lead in pending:
                    ovec, oprov = pending.pop(lead)
                    a, b = int(ovec[lead]), int(c)
                    g, s, t = xgcd(a, b)
                    comb_vec = _dict_add(R, _dict_scale(R, ovec, s), _dict_scale(R, vec, t))
                    comb_prov = _dict_add(R, _dict_scale(R, oprov, s), _dict_scale(R, prov, t))
                    rem_vec = _dict_sub(R, _dict_scale(R, vec, a // g),
                                        _dict_scale(R, ovec, b // g))
                    rem_prov = _dict_sub(R, _dict_scale(R, prov, a // g),
                                         _dict_scale(R, oprov, b // g))
                    pending[lead] = (comb_vec, comb_prov)
                    vec, prov = rem_vec, rem_prov
                    continue
                pending[lead] = (vec, prov)
                break

    def _finalize_pending(self, pending):
        # pivots may have appeared since a row was stashed
        leftover = list(pending.values())
        pending.clear()
        retry = {}
        self._insert_rows(leftover, retry)
        for lead, (vec, prov) in retry.items():
            mono = max(vec, key=self._order)
            raise EnvelopeError(
                "ideal slice is not an A-module direct summand "
                f"(no unit pivot at monomial {mono}); the J/J^2 basis "
                "hypothesis fails over this base")

    def ensure_degree(self, deg: int):
        """Extend the graded tables through chart degree `deg`."""
        if self.chart_mode or self.e == 0:
            for k in range(self._built_deg + 1, deg + 1):
                self.reduced_by_deg[k] = _monomials_of_degree(self.d, k)
            self._built_deg = max(self._built_deg, deg)
            return
        if not self.graded:
            if deg > self.block_bound:
                raise EnvelopeError(
                    f"degree {deg} exceeds the weight cutoff {self.block_bound} "
                    "of this filtered presentation")
            return
        for k in range(self._built_deg + 1, deg + 1):
            rows = []
            pending: dict = {}
            for i, f in enumerate(self.gens):
                w = self.weights[i]
                if k < w:
                    continue
                for m in _monomials_of_degree(self.d, k - w):
                    vec = {}
                    for beta, c in f.coeffs.items():
                        key = tuple(a + b for a, b in zip(m, beta))
                        vec[key] = self.ring.add(vec.get(key, self.ring.zero()), c)
                    vec = {kk: v for kk, v in vec.items() if not self.ring.is_zero(v)}
                    if vec:
                        rows.append((vec, {(m, i): self.ring.one()}))
            self._insert_rows(rows, pending)
            self._finalize_pending(pending)
            self.reduced_by_deg[k] = [m for m in _monomials_of_degree(self.d, k)
                                      if m not in self.pivots]
            self._verify_counts(k)
        self._built_deg = max(self._built_deg, deg)

    def _build_filtered_block(self):
        rows = []
        pending: dict = {}
        for i, f in enumerate(self.gens):
            w = self.weights[i]
            for k in range(0, self.block_bound - w + 1):
                for m in _monomials_of_degree(self.d, k):
                    vec = {}
                    for beta, c in f.coeffs.items():
                        key = tuple(a + b for a, b in zip(m, beta))
                        vec[key] = self.ring.add(vec.get(key, self.ring.zero()), c)
                    vec = {kk: v for kk, v in vec.items() if not self.ring.is_zero(v)}
                    if vec:
                        rows.append((vec, {(m, i): self.ring.one()}))
        self._insert_rows(rows, pending)
        self._finalize_pending(pending)
        for k in range(0, self.block_bound + 1):
            self.reduced_by_deg[k] = [m for m in _monomials_of_degree(self.d, k)
                                      if m not in self.pivots]
        self._built_deg = self.block_bound
        self._verify_counts_filtered()

    def _verify_counts(self, k: int):
        """Graded slice count check: surjectivity of the normal form plus an
        equal count forces the R (x) f^gamma decomposition to be a bijection."""
        total = 0
        for gamma in self._gamma_tuples(k):
            rem = k - sum(g * w for g, w in zip(gamma, self.weights))
            total += len(self.reduced_by_deg.get(rem, [])) if rem >= 0 else 0
        if total != len(_monomials_of_degree(self.d, k)):
            raise EnvelopeError(
                f"quasi-regularity fails in degree {k}: the R*f^gamma count "
                f"{total} differs from the monomial count; the J/J^2 basis "
                "hypothesis does not hold")

    def _verify_counts_filtered(self):
        total = 0
        for k in range(0, self.block_bound + 1):
            for gamma in self._gamma_tuples(k):
                rem = k - sum(g * w for g, w in zip(gamma, self.weights))
                if rem >= 0:
                    total += len(self.reduced_by_deg.get(rem, []))
        want = sum(len(_monomials_of_degree(self.d, k))
                   for k in range(0, self.block_bound + 1))
        if total != want:
            raise EnvelopeError(
                "quasi-regularity fails through the cutoff; the J/J^2 basis "
                "hypothesis does not hold")

    def _gamma_tuples(self, bound: int):
        out = []

        def rec(prefix, rem, i):
            if i == self.e:
                out.append(tuple(prefix))
                return
            w = self.weights[i]
            g = 0
            while g * w <= rem:
                rec(prefix + [g], rem - g * w, i + 1)
                g += 1

        rec([], bound, 0)
        return out

    # -- reduction and decomposition ------------------------------------------

    def reduce_vec(self, vec: dict):
        """Normal form of a chart polynomial (as a monomial dict) modulo J.

        Returns (residual, combo) with residual supported on reduced
        monomials and combo giving the consumed multiples of each f_i.
        """
        R = self.ring
        combo: dict = {}
        vec = dict(vec)
        while True:
            lead = None
            for m in sorted(vec, key=self._order, reverse=True):
                if m in self.pivots:
                    lead = m
                    break
            if lead is None:
                return vec, combo
            prow, pprov = self.pivots[lead]
            c = vec[lead]
            vec = _dict_sub(R, vec, _dict_scale(R, prow, c))
            combo = _dict_add(R, combo, _dict_scale(R, pprov, c))

    def decompose_monomial(self, beta: tuple):
        """x^beta as sum of (reduced monomial, t-multi-index) with coefficient."""
        if beta in self._decomp_memo:
            return self._decomp_memo[beta]
        if self.chart_mode or self.e == 0:
            res = {(beta, ()): self.ring.one()}
            self._decomp_memo[beta] = res
            return res
        deg = sum(beta)
        self.ensure_degree(deg)
        residual, combo = self.reduce_vec({beta: self.ring.one()})
        out: dict = {}
        zero_k = tuple([0] * self.e)
        for mono, c in residual.items():
            _dict_bump(self.ring, out, (mono, zero_k), c)
        quotients: dict[int, dict] = {}
        for (m, i), c in combo.items():
            quotients.setdefault(i, {})
            _dict_bump(self.ring, quotients[i], m, c)
        for i, q in quotients.items():
            for m, c in q.items():
                inner = self.decompose_monomial(m)
                for (alpha, kk), c2 in inner.items():
                    nk = list(kk)
                    nk[i] += 1
                    coeff = self.ring.mul(self.ring.mul(c, c2), self.ring.from_int(nk[i]))
                    _dict_bump(self.ring, out, (alpha, tuple(nk)), coeff)
        out = {k: v for k, v in out.items() if not self.ring.is_zero(v)}
        self._decomp_memo[beta] = out
        return out


def _dict_scale(R, d, c):
    if R.is_zero(c):
        return {}
    return {k: R.mul(v, c) for k, v in d.items()}


def _dict_add(R, a, b):
    out = dict(a)
    for k, v in b.items():
        s = R.add(out.get(k, R.zero()), v)
        if R.is_zero(s):
            out.pop(k, None)
        else:
            out[k] = s
    return out


def _dict_sub(R, a, b):
    return _dict_add(R, a, {k: R.neg(v) for k, v in b.items()})


def _dict_bump(R, d, key, c):
    s = R.add(d.get(key, R.zero()), c)
    if R.is_zero(s):
        d.pop(key, None)
    else:
        d[key] = s


# ---------------------------------------------------------------------------
# Carriers: the working quotient algebras

# A monomial is (alpha, K, L): chart exponents, t exponents, xi exponents.


class Carrier:
    """One truncated level of the envelope, possibly with a xi block."""

    def __init__(self, core: ChartCore, trunc: TruncationParams, nu: int = 0):
        self.core = core
        self.ring = core.ring
        self.trunc = trunc
        self.nu = nu
        self.xi_count = nu * core.d
        self._mul_memo: dict = {}
        self._d_memo: dict = {}
        self._basis_memo: dict = {}

    # -- presentation-level data ----------------------------------------------

    @property
    def chart_names(self):
        return self.core.chart

    @property
    def xi_names(self):
        return [self._xi_name(u) for u in range(self.xi_count)]

    def _xi_name(self, u: int) -> str:
        s, v = divmod(u, self.core.d)
        if self.core.d == 1:
            return f"xi{s+1}"
        return f"xi{s+1}_{self.core.chart[v]}"

    @property
    def frame_names(self):
        return [f"d{x}" for x in self.core.chart] + [f"d{n}" for n in self.xi_names]

    @property
    def frame_size(self):
        return self.core.d + self.xi_count

    def mono_weight(self, mono) -> int:
        alpha, k, l = mono
        return sum(alpha) + sum(g * w for g, w in zip(k, self.core.weights)) + sum(l)

    def pd_weight(self, mono) -> int:
        _, k, l = mono
        return sum(k) + sum(l)

    def torsion_of(self, mono) -> int:
        """Generator of the coefficient annihilator at this monomial
        (0 means the coefficient is a full ring element)."""
        if self.core.chart_mode:
            p = self.ring.prime
            j = self.pd_weight(mono)
            r = max(self.trunc.level - j, 0)
            return self.trunc.torsion * p ** _min_pd_valuation(r, p)
        if self.pd_weight(mono) >= self.trunc.level:
            return self.trunc.torsion
        return 0

    def coefficient_killed(self, mono) -> bool:
        return self.ring.torsion_modulus(self.torsion_of(mono)) == 1

    def normalize(self, data: dict) -> tuple[dict, bool]:
        out = {}
        clipped = False
        cutoff = self.trunc.weight_cutoff
        R = self.ring
        for mono, c in data.items():
            if cutoff is not None and self.mono_weight(mono) > cutoff:
                clipped = True
                continue
            c = R.reduce_mod(c, self.torsion_of(mono))
            if not R.is_zero(c):
                out[mono] = c
        return out, clipped

    def at_level(self, n: int) -> "Carrier":
        """The same presentation truncated at tower level n (m = n!)."""
        return Carrier(self.core,
                       TruncationParams(factorial(n), n, self.trunc.weight_cutoff),
                       self.nu)

    def same_as(self, other: "Carrier") -> bool:
        return (self.core is other.core and self.trunc == other.trunc
                and self.nu == other.nu)

    def free_view(self) -> "Carrier":
        """The untruncated envelope (weight cutoff kept, no torsion).

        Operators that only exist upstairs (the theta iterates of a
        connection) are computed here; truncated levels see their images.
        """
        return Carrier(self.core,
                       TruncationParams(1, 10**9, self.trunc.weight_cutoff),
                       self.nu)

    # -- bases ------------------------------------------------------------------

    def basis(self, weight: int) -> list:
        """Ordered monomials of the given weight with live coefficients."""
        if weight in self._basis_memo:
            return self._basis_memo[weight]
        out = [m for m in self.basis_full(weight) if not self.coefficient_killed(m)]
        self._basis_memo[weight] = out
        return out

    def basis_full(self, weight: int) -> list:
        """All normal-form monomials of the weight, killed coefficients
        included (their differentials still generate form relations)."""
        core = self.core
        out = []
        for k in self._k_tuples(weight):
            kw = sum(g * w for g, w in zip(k, core.weights))
            for l in _monomials_bounded(self.xi_count, weight - kw):
                rem = weight - kw - sum(l)
                core.ensure_degree(rem)
                for alpha in core.reduced_by_deg.get(rem, []):
                    out.append((alpha, k, l))
        out.sort()
        return out

    def basis_through(self, weight: int) -> list:
        out = []
        for w in range(weight + 1):
            out.extend(self.basis(w))
        return out

    def _k_tuples(self, bound: int):
        core = self.core
        out = []

        def rec(prefix, rem, i):
            if i == core.e:
                out.append(tuple(prefix))
                return
            w = core.weights[i]
            g = 0
            while g * w <= rem:
                rec(prefix + [g], rem - g * w, i + 1)
                g += 1

        rec([], bound, 0)
        return out

    # -- arithmetic ---------------------------------------------------------------

    def inject_poly(self, poly: Poly) -> dict:
        """A chart polynomial as a carrier element (t-rewrites applied)."""
        out: dict = {}
        R = self.ring
        zero_l = tuple([0] * self.xi_count)
        for beta, c in poly.coeffs.items():
            for (alpha, k), c2 in self.core.decompose_monomial(beta).items():
                _dict_bump(R, out, (alpha, k, zero_l), R.mul(c, c2))
        out, _ = self.normalize(out)
        return out

    def constant(self, c) -> dict:
        mono = (tuple([0] * self.core.d), tuple([0] * self.core.e),
                tuple([0] * self.xi_count))
        out, _ = self.normalize({mono: c})
        return out

    def one(self) -> dict:
        return self.constant(self.ring.one())

    def mono_mul(self, m1, m2) -> dict:
        key = (m1, m2) if m1 <= m2 else (m2, m1)
        cached = self._mul_memo.get(key)
        if cached is not None:
            return cached
        a1, k1, l1 = key[0]
        a2, k2, l2 = key[1]
        R = self.ring
        tcoef = monomial_product_coeff(k1, k2) * monomial_product_coeff(l1, l2)
        kk = tuple(x + y for x, y in zip(k1, k2))
        ll = tuple(x + y for x, y in zip(l1, l2))
        beta = tuple(x + y for x, y in zip(a1, a2))
        out: dict = {}
        if sum(beta) + sum(g * w for g, w in zip(kk, self.core.weights)) + sum(ll) \
                <= (self.trunc.weight_cutoff or 10**9):
            for (alpha, kq), c in self.core.decompose_monomial(beta).items():
                merged = tuple(x + y for x, y in zip(kq, kk))
                c2 = monomial_product_coeff(kq, kk)
                coeff = R.mul(c, R.from_int(tcoef * c2))
                _dict_bump(R, out, (alpha, merged, ll), coeff)
        out, _ = self.normalize(out)
        self._mul_memo[key] = out
        return out

    def mul(self, d1: dict, d2: dict) -> tuple[dict, bool]:
        R = self.ring
        out: dict = {}
        clipped = False
        cutoff = self.trunc.weight_cutoff
        for m1, c1 in d1.items():
            w1 = self.mono_weight(m1)
            for m2, c2 in d2.items():
                if cutoff is not None and w1 + self.mono_weight(m2) > cutoff:
                    clipped = True
                    continue
                prod = self.mono_mul(m1, m2)
                c = R.mul(c1, c2)
                for mono, cc in prod.items():
                    _dict_bump(R, out, mono, R.mul(c, cc))
        out, clip2 = self.normalize(out)
        return out, clipped or clip2

    def power(self, d: dict, e: int) -> tuple[dict, bool]:
        acc = self.one()
        clipped = False
        for _ in range(e):
            acc, c = self.mul(acc, d)
            clipped = clipped or c
        return acc, clipped

    def augmentation_zero(self, d: dict) -> bool:
        """Whether the element lies in the kernel of the map onto R."""
        return all(self.pd_weight(m) >= 1 for m in d)

    def gamma(self, e: int, d: dict) -> tuple[dict, bool]:
        """Divided power gamma_e of an augmentation-ideal element."""
        if not self.augmentation_zero(d):
            raise EnvelopeError("divided powers need an augmentation-ideal element")
        if e == 0:
            return self.one(), False
        R = self.ring
        terms = sorted(d.items())
        memo: dict = {}
        clip_flag = [False]

        def gamma_mono(mono, c, a) -> dict:
            alpha, k, l = mono
            # the pd part carries the divided power; the chart part is an
            # ordinary a-th power
            coef = monomial_gamma_coeff(k + l, a)
            out = {(tuple([0] * self.core.d), tuple(x * a for x in k),
                    tuple(x * a for x in l)): R.mul(_pow_ring(R, c, a),
                                                    R.from_int(coef))}
            if any(alpha):
                chart_pow = Poly(R, self.core.d, {tuple(x * a for x in alpha): R.one()})
                inj = self.inject_poly(chart_pow)
                out, clip = self.mul(out, inj)
                clip_flag[0] = clip_flag[0] or clip
            else:
                out, _ = self.normalize(out)
            return out

        def rec(i, a) -> dict:
            if a == 0:
                return self.one()
            if i == len(terms):
                return {}
            if (i, a) in memo:
                return memo[(i, a)]
            mono, c = terms[i]
            acc: dict = {}
            for s in range(a + 1):
                rest = rec(i + 1, a - s)
                if not rest and a - s > 0:
                    continue
                part = gamma_mono(mono, c, s) if s else self.one()
                prod, clip = self.mul(part, rest)
                clip_flag[0] = clip_flag[0] or clip
                acc = _dict_add(R, acc, prod)
            acc, _ = self.normalize(acc)
            memo[(i, a)] = acc
            return acc

        out = rec(0, e)
        return out, clip_flag[0]

    # -- differentials ------------------------------------------------------------

    def d_mono(self, mono) -> dict:
        """Expansion of d(mono) as {(monomial, frame index): coefficient}."""
        cached = self._d_memo.get(mono)
        if cached is not None:
            return cached
        R = self.ring
        alpha, k, l = mono
        out: dict = {}
        d0 = self.core.d
        # chart part
        for j in range(d0):
            if alpha[j]:
                na = list(alpha)
                na[j] -= 1
                lowered = Poly(R, d0, {tuple(na): R.from_int(alpha[j])})
                inj = self.inject_poly(lowered)
                base = {(tuple([0] * d0), k, l): R.one()}
                prod, _ = self.mul(base, inj)
                for m2, c in prod.items():
                    _dict_bump(R, out, (m2, j), c)
        # t part: d(t_i^[k]) = t_i^[k-1] df_i
        for i in range(self.core.e):
            if k[i]:
                nk = list(k)
                nk[i] -= 1
                base = {(alpha, tuple(nk), l): R.one()}
                for j in range(d0):
                    dfij = self.core.dfs[i][j]
                    if dfij.is_zero():
                        continue
                    prod, _ = self.mul(base, self.inject_poly(dfij))
                    for m2, c in prod.items():
                        _dict_bump(R, out, (m2, j), c)
        # xi part
        for u in range(self.xi_count):
            if l[u]:
                nl = list(l)
                nl[u] -= 1
                m2 = (alpha, k, tuple(nl))
                nm, _ = self.normalize({m2: R.one()})
                for m3, c in nm.items():
                    _dict_bump(R, out, (m3, d0 + u), c)
        clean = {}
        for (m2, j), c in out.items():
            nm, _ = self.normalize({m2: c})
            for m3, cc in nm.items():
                _dict_bump(R, clean, (m3, j), cc)
        self._d_memo[mono] = clean
        return clean

    def d_element(self, d: dict) -> dict:
        R = self.ring
        out: dict = {}
        for mono, c in d.items():
            for (m2, j), cc in self.d_mono(mono).items():
                _dict_bump(R, out, (m2, j), R.mul(c, cc))
        clean = {}
        for (m2, j), c in out.items():
            nm, _ = self.normalize({m2: c})
            for m3, cc in nm.items():
                _dict_bump(R, clean, (m3, j), cc)
        return clean

    def format_element(self, d: dict) -> str:
        if not d:
            return "0"
        names = self.chart_names
        xnames = self.xi_names
        tnames = [f"t{i+1}" for i in range(self.core.e)]
        parts = []
        for mono in sorted(d, key=lambda m: (self.mono_weight(m), m)):
            alpha, k, l = mono
            c = d[mono]
            fac = []
            for j, e in enumerate(alpha):
                if e:
                    fac.append(f"{names[j]}^{e}" if e > 1 else names[j])
            for i, e in enumerate(k):
                if e:
                    fac.append(f"{tnames[i]}^[{e}]")
            for u, e in enumerate(l):
                if e:
                    fac.append(f"{xnames[u]}^[{e}]")
            body = "*".join(fac)
            if not body:
                parts.append(str(c))
            elif c == self.ring.one():
                parts.append(body)
            else:
                parts.append(f"{c}*{body}")
        return " + ".join(parts).replace("+ -", "- ")


def _pow_ring(R, c, e):
    out = R.one()
    for _ in range(e):
        out = R.mul(out, c)
    return out


def _min_pd_valuation(r: int, p: int) -> int:
    """min over a >= r of (a - v_p(a!)); 0 when r <= 0."""
    if r <= 0:
        return 0
    best = None
    for a in range(r, max(2 * r, p * r) + 41):
        val = a - factorial_valuation(a, p)
        if best is None or val < best:
            best = val
    return best


def _monomials_bounded(arity: int, bound: int):
    """Exponent tuples with sum <= bound, ordered."""
    if arity == 0:
        return [()]
    out = []

    def rec(prefix, rem, slots):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for v in range(0, rem + 1):
            rec(prefix + [v], rem - v, slots - 1)

    rec([], bound, arity)
    return sorted(out)


# ---------------------------------------------------------------------------
# Elements


class Element:
    """A carrier element; thin wrapper over the monomial dict."""

    __slots__ = ("carrier", "data", "clipped")

    def __init__(self, carrier: Carrier, data: dict, clipped: bool = False):
        self.carrier = carrier
        norm, clip = carrier.normalize(data)
        self.data = norm
        self.clipped = clipped or clip

    def is_zero(self):
        return not self.data

    def __add__(self, other):
        R = self.carrier.ring
        return Element(self.carrier, _dict_add(R, self.data, other.data),
                       self.clipped or other.clipped)

    def __sub__(self, other):
        R = self.carrier.ring
        return Element(self.carrier,
                       _dict_add(R, self.data, {k: R.neg(v) for k, v in other.data.items()}),
                       self.clipped or other.clipped)

    def __neg__(self):
        R = self.carrier.ring
        return Element(self.carrier, {k: R.neg(v) for k, v in self.data.items()},
                       self.clipped)

    def scale(self, c):
        R = self.carrier.ring
        return Element(self.carrier, {k: R.mul(v, c) for k, v in self.data.items()},
                       self.clipped)

    def __mul__(self, other):
        if isinstance(other, Element):
            out, clip = self.carrier.mul(self.data, other.data)
            return Element(self.carrier, out, self.clipped or other.clipped or clip)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def gamma(self, e: int):
        out, clip = self.carrier.gamma(e, self.data)
        return Element(self.carrier, out, self.clipped or clip)

    def __eq__(self, other):
        return isinstance(other, Element) and self.carrier.same_as(other.carrier) \
            and self.data == other.data

    def __repr__(self):
        return f"<{self.carrier.format_element(self.data)}>"


# ---------------------------------------------------------------------------
# Envelope presentations


@dataclass
class PdVarInfo:
    name: str
    image: Poly
    weight: int


class EnvelopePresentation:
    """Level-zero presentation of D^{m,n}_{P}(J) in normal-form coordinates."""

    def __init__(self, source: AlgebraPresentation, trunc: TruncationParams,
                 core: ChartCore, pd_vars: list[PdVarInfo],
                 envelope_is_chart: bool, basis_verified: bool):
        self.source = source
        self.trunc = trunc
        self.core = core
        self.pd_vars = pd_vars
        self.envelope_is_chart = envelope_is_chart
        self.basis_verified = basis_verified
        self.carrier = Carrier(core, trunc, nu=0)

    @property
    def base(self):
        return self.source.base

    @property
    def graded(self):
        return self.core.graded

    def with_truncation(self, trunc: TruncationParams) -> "EnvelopePresentation":
        """A view of the same presentation at another truncation; the
        reduction tables are shared."""
        return EnvelopePresentation(self.source, trunc, self.core, self.pd_vars,
                                    self.envelope_is_chart, self.basis_verified)

    def at_level(self, n: int, weight_cutoff=None) -> "EnvelopePresentation":
        w = weight_cutoff if weight_cutoff is not None else self.trunc.weight_cutoff
        return self.with_truncation(TruncationParams(factorial(n), n, w))

    def dump(self) -> str:
        lines = [f"base ring: {self.base}",
                 f"chart variables: {', '.join(self.core.chart)} (weight 1 each)"]
        if self.envelope_is_chart:
            lines.append("annotation: envelope = chart (ideal generated by the base prime)")
            lines.append(f"pd generator: t1 -> {self.pd_vars[0].image.format(self.core.chart)}"
                         if self.pd_vars else "pd generators: none")
        elif self.pd_vars:
            for i, info in enumerate(self.pd_vars):
                lines.append(
                    f"pd generator {info.name} -> {info.image.format(self.core.chart)} "
                    f"(weight {info.weight})")
                dfs = [self.core.dfs[i][j].format(self.core.chart)
                       for j in range(self.core.d)]
                terms = " + ".join(f"({df})*d{x}" for df, x in zip(dfs, self.core.chart)
                                   if df != "0") or "0"
                lines.append(f"  d{info.name} = {terms}")
        else:
            lines.append("pd generators: none (J = 0)")
        lines.append(f"truncation: torsion {self.trunc.torsion}, pd level "
                     f"{self.trunc.level}, weight cutoff {self.trunc.weight_cutoff}")
        lines.append("grading: exact" if self.graded else
                     "grading: filtered (inhomogeneous generators)")
        lines.append(f"basis hypothesis: "
                     f"{'verified per degree' if self.basis_verified else 'asserted'}")
        return "\n".join(lines)


def build_envelope(src: AlgebraPresentation, trunc: TruncationParams) -> EnvelopePresentation:
    """Present D^{m,n}_{P}(J) as a truncated pd algebra with t_i -> f_i."""
    ring = src.base
    d = len(src.chart_vars)
    for f in src.ideal_gens + src.quotient_rels:
        if f.arity != d:
            raise EnvelopeError("polynomial arity does not match the chart")
    constants = [f for f in src.ideal_gens if f.is_constant() and not f.is_zero()]
    gens = [f for f in src.ideal_gens if not f.is_constant()]
    chart_mode = False
    if constants:
        if gens or len(constants) != 1:
            raise EnvelopeError("constants in the ideal are only supported as J = (p)")
        c = constants[0].constant_value()
        if ring.pd_structure != "standard-p":
            raise EnvelopeError("a constant ideal generator needs the standard "
                                "divided powers on (p)")
        p = ring.prime
        if int(c) % p != 0 or (int(c) // p) % p == 0:
            raise EnvelopeError(f"ideal generator {c} does not generate ({p})")
        chart_mode = True
    zero_gens = [f for f in src.ideal_gens if f.is_zero()]
    if zero_gens:
        raise EnvelopeError("zero ideal generator")

    weights = []
    if src.declared_weights is not None and not chart_mode:
        if len(src.declared_weights) != len(gens):
            raise EnvelopeError("declared weights do not match the ideal generators")
        for w, f in zip(src.declared_weights, gens):
            if w != f.degree():
                raise EnvelopeError(
                    f"declared weight {w} differs from generator degree {f.degree()}")
            weights.append(w)
    else:
        weights = [f.degree() for f in gens]
    graded = all(f.is_homogeneous() for f in gens)
    if not graded and trunc.weight_cutoff is None:
        raise EnvelopeError("inhomogeneous ideal generators need a weight cutoff")

    core = ChartCore(ring, src.chart_vars, gens, weights, graded,
                     trunc.weight_cutoff, chart_mode)
    verified = True
    if trunc.weight_cutoff is not None:
        core.ensure_degree(trunc.weight_cutoff)
    # quotient relations and ideal generators must generate the same ideal
    if not chart_mode and trunc.weight_cutoff is not None:
        bound = trunc.weight_cutoff
        for q in src.quotient_rels:
            if q.degree() <= bound and not q.is_zero():
                residual, _ = core.reduce_vec(dict(q.coeffs))
                if residual:
                    raise EnvelopeError(
                        "a quotient relation does not lie in the ideal "
                        "spanned by the generators (through the cutoff)")
        if [tuple(sorted(q.coeffs.items())) for q in src.quotient_rels] != \
           [tuple(sorted(f.coeffs.items())) for f in gens]:
            other = ChartCore(ring, src.chart_vars,
                              [q for q in src.quotient_rels if not q.is_constant()],
                              [q.degree() for q in src.quotient_rels if not q.is_constant()],
                              all(q.is_homogeneous() for q in src.quotient_rels),
                              bound, False)
            try:
                other.ensure_degree(bound)
            except EnvelopeError:
                other = None
            if other is not None:
                for f in gens:
                    if f.degree() <= bound:
                        residual, _ = other.reduce_vec(dict(f.coeffs))
                        if residual:
                            raise EnvelopeError(
                                "an ideal generator does not lie in the ideal "
                                "spanned by the quotient relations")

    if chart_mode:
        pd_vars = [PdVarInfo("t1", constants[0], 0)]
    else:
        pd_vars = [PdVarInfo(f"t{i+1}", f, w) for i, (f, w) in enumerate(zip(gens, weights))]
    return EnvelopePresentation(src, trunc, core, pd_vars, chart_mode, verified)


# ---------------------------------------------------------------------------
# Cosimplicial levels and structure maps


class CosimplicialLevel:
    """Level nu of the fiber-power tower: the base envelope with nu*d extra
    weight-one pd generators xi^{(s)}_v = x_v(slot 0) - x_v(slot s)."""

    def __init__(self, env: EnvelopePresentation, nu: int):
        self.env = env
        self.nu = nu
        self.carrier = Carrier(env.core, env.trunc, nu=nu) if nu else env.carrier

    @property
    def dictionary(self):
        d = self.env.core.d
        return {self.carrier._xi_name(u): (u // d + 1, self.env.core.chart[u % d])
                for u in range(self.carrier.xi_count)}


def fiber_power_envelope(env: EnvelopePresentation, nu: int) -> CosimplicialLevel:
    if nu < 0:
        raise EnvelopeError("fiber power level must be >= 0")
    return CosimplicialLevel(env, nu)


class CarrierMap:
    """A divided power algebra map between carriers, given on generators."""

    def __init__(self, source: Carrier, target: Carrier,
                 chart_images: list, xi_images: list, name: str = ""):
        if len(chart_images) != source.core.d:
            raise EnvelopeError("need one image per chart variable")
        if len(xi_images) != source.xi_count:
            raise EnvelopeError("need one image per xi variable")
        self.source = source
        self.target = target
        self.name = name
        self.chart_images = [Element(target, im) if isinstance(im, dict) else im
                             for im in chart_images]
        self.xi_images = [Element(target, im) if isinstance(im, dict) else im
                          for im in xi_images]
        self._pd_images: list | None = None
        self._mono_memo: dict = {}

    def pd_images(self) -> list:
        """Images of the t generators: f_i evaluated at the chart images."""
        if self._pd_images is None:
            out = []
            for f in self.source.core.gens:
                val = _eval_poly(self.target, f, self.chart_images)
                if not self.target.augmentation_zero(val.data):
                    raise EnvelopeError(
                        "map does not send the ideal into the augmentation ideal")
                out.append(val)
            self._pd_images = out
        return self._pd_images

    def apply_mono(self, mono) -> Element:
        cached = self._mono_memo.get(mono)
        if cached is not None:
            return cached
        alpha, k, l = mono
        out = Element(self.target, self.target.one())
        for j, e in enumerate(alpha):
            for _ in range(e):
                out = out * self.chart_images[j]
        for i, e in enumerate(k):
            if e:
                out = out * self.pd_images()[i].gamma(e)
        for u, e in enumerate(l):
            if e:
                out = out * self.xi_images[u].gamma(e)
        self._mono_memo[mono] = out
        return out

    def apply(self, el: Element | dict) -> Element:
        data = el.data if isinstance(el, Element) else el
        clipped = el.clipped if isinstance(el, Element) else False
        acc = Element(self.target, {})
        for mono, c in data.items():
            acc = acc + self.apply_mono(mono).scale(c)
        acc.clipped = acc.clipped or clipped
        return acc

    def frame_pullback(self) -> list:
        """d of each source frame coordinate, as constant combinations of the
        target frame (images of chart and xi variables are degree one)."""
        R = self.target.ring
        out = []
        gens = self.chart_images + self.xi_images
        for el in gens:
            row = {}
            for (mono, j), c in self.target.d_element(el.data).items():
                alpha, k, l = mono
                if any(alpha) or any(k) or any(l):
                    raise EnvelopeError("frame pullback is not constant")
                row[j] = R.add(row.get(j, R.zero()), c)
            out.append(row)
        return out


def _eval_poly(carrier: Carrier, poly: Poly, chart_images: list) -> Element:
    out = Element(carrier, {})
    R = carrier.ring
    for beta, c in poly.coeffs.items():
        term = Element(carrier, carrier.constant(c))
        for j, e in enumerate(beta):
            for _ in range(e):
                term = term * chart_images[j]
        out = out + term
    return out


def _xi_element(carrier: Carrier, u: int) -> Element:
    l = [0] * carrier.xi_count
    l[u] = 1
    mono = (tuple([0] * carrier.core.d), tuple([0] * carrier.core.e), tuple(l))
    return Element(carrier, {mono: carrier.ring.one()})


def _chart_element(carrier: Carrier, j: int) -> Element:
    beta = [0] * carrier.core.d
    beta[j] = 1
    return Element(carrier, carrier.inject_poly(
        Poly(carrier.ring, carrier.core.d, {tuple(beta): carrier.ring.one()})))


def coface_maps(level_a: CosimplicialLevel, level_b: CosimplicialLevel) -> list[CarrierMap]:
    """The nu+2 coface maps from level nu to level nu+1.

    Ordered so that the alternating sum sum_j (-1)^j coface[j] applied to
    f(x) at nu = 0 is f(x) - f(x - xi).
    """
    nu = level_a.nu
    if level_b.nu != nu + 1 or level_a.env is not level_b.env:
        raise EnvelopeError("levels must be adjacent over one envelope")
    src, tgt = level_a.carrier, level_b.carrier
    d = src.core.d
    out = []
    for j in range(nu + 2):
        i = nu + 1 - j  # standard coface index; list reversed to match the sum
        chart_images = []
        for v in range(d):
            el = _chart_element(tgt, v)
            if i == 0:
                el = el - _xi_element(tgt, v)  # slot 0 moves to slot 1
            chart_images.append(el)
        xi_images = []
        for u in range(src.xi_count):
            s = u // d + 1
            v = u % d
            sprime = s + 1 if s >= i else s
            el = _xi_element(tgt, (sprime - 1) * d + v)
            if i == 0:
                el = el - _xi_element(tgt, v)
            xi_images.append(el)
        out.append(CarrierMap(src, tgt, chart_images, xi_images, name=f"coface[{j}]"))
    return out


def codegeneracy_maps(level_b: CosimplicialLevel) -> list[CarrierMap]:
    """The nu+1 codegeneracies from level nu+1 down to level nu."""
    nu = level_b.nu - 1
    if nu < 0:
        raise EnvelopeError("no codegeneracies below level one")
    level_a = CosimplicialLevel(level_b.env, nu)
    src, tgt = level_b.carrier, level_a.carrier
    d = src.core.d
    out = []
    for idx in range(nu + 1):
        kk = nu - idx  # standard codegeneracy index, reversed like the cofaces
        chart_images = [_chart_element(tgt, v) for v in range(d)]
        xi_images = []
        for u in range(src.xi_count):
            s = u // d + 1
            v = u % d
            if s <= kk:
                target_slot = s
            else:
                target_slot = s - 1
            if target_slot == 0:
                xi_images.append(Element(tgt, {}))
            else:
                xi_images.append(_xi_element(tgt, (target_slot - 1) * d + v))
        out.append(CarrierMap(src, tgt, chart_images, xi_images, name=f"codegen[{idx}]"))
    return out
