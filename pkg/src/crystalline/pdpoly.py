"""Free divided power polynomial algebras A<t_1,...,t_d> and truncations.

Elements are finitely supported sums sum a_K t^[K] over multi-indices K,
with t^[K] = t_1^[k_1]...t_d^[k_d].  Products reduce by the forced rule
t^[i] * t^[j] = C(i+j, i) * t^[i+j] in each variable; divided powers
gamma_k are computed from the axioms

    gamma_k(a x)   = a^k gamma_k(x)
    gamma_k(x + y) = sum_{i+j=k} gamma_i(x) gamma_j(y)
    gamma_i(t^[j]) = ((i j)! / (i! (j!)^i)) t^[i j]

with all combinatorial coefficients computed in Z before being mapped into
the coefficient ring.  The weight of a monomial is the exponent sum; the
truncation D^{m,n} kills m times the span of monomials of weight >= n.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

from .exactalg import BaseDpRing

MultiIndex = tuple


def weight(k: MultiIndex) -> int:
    return sum(k)


def monomial_product_coeff(k: MultiIndex, l: MultiIndex) -> int:
    """Integer coefficient of t^[K+L] in t^[K]*t^[L]."""
    c = 1
    for a, b in zip(k, l):
        c *= comb(a + b, a)
    return c


def monomial_power_coeff(k: MultiIndex, e: int) -> int:
    """Integer coefficient in (t^[K])^e = c * t^[e*K]."""
    c = 1
    for a in k:
        if a:
            c *= factorial(e * a) // (factorial(a) ** e)
    return c


def monomial_gamma_coeff(k: MultiIndex, e: int) -> int:
    """Integer coefficient in gamma_e(t^[K]) = c * t^[e*K], K nonzero."""
    if e == 0:
        return 1
    return monomial_power_coeff(k, e) // factorial(e)


@dataclass(frozen=True)
class TruncationParams:
    """Quotient data for D^{m,n}: torsion multiplier m, pd level n, cutoff w."""

    torsion: int
    level: int
    weight_cutoff: int | None = None

    def __post_init__(self):
        if self.torsion < 1 or self.level < 1:
            raise ValueError("torsion multiplier and pd level must be >= 1")
        if self.weight_cutoff is not None and self.weight_cutoff < 1:
            raise ValueError("weight cutoff must be >= 1")


class PdElement:
    """Finitely supported divided power polynomial."""

    __slots__ = ("ring", "arity", "coeffs", "clipped")

    def __init__(self, ring: BaseDpRing, arity: int, coeffs=None, clipped: bool = False):
        self.ring = ring
        self.arity = arity
        self.clipped = clipped
        clean = {}
        if coeffs:
            for k, v in coeffs.items():
                if len(k) != arity:
                    raise ValueError("multi-index arity mismatch")
                v = ring.normalize(v)
                if not ring.is_zero(v):
                    clean[tuple(k)] = v
        self.coeffs = clean

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, ring, arity):
        return cls(ring, arity)

    @classmethod
    def constant(cls, ring, arity, c):
        return cls(ring, arity, {tuple([0] * arity): c})

    @classmethod
    def variable(cls, ring, arity, index, power: int = 1):
        k = [0] * arity
        k[index] = power
        return cls(ring, arity, {tuple(k): ring.one()})

    # -- structure -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.coeffs

    def constant_term(self):
        return self.coeffs.get(tuple([0] * self.arity), self.ring.zero())

    def max_weight(self) -> int:
        return max((weight(k) for k in self.coeffs), default=0)

    def homogeneous_part(self, w: int) -> "PdElement":
        return PdElement(self.ring, self.arity,
                         {k: v for k, v in self.coeffs.items() if weight(k) == w})

    def __eq__(self, other):
        return (isinstance(other, PdElement) and self.ring == other.ring
                and self.arity == other.arity and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.arity, tuple(sorted(self.coeffs.items()))))

    # -- arithmetic ----------------------------------------------------------

    def _check(self, other):
        if self.ring != other.ring or self.arity != other.arity:
            raise ValueError("arity or ring mismatch")

    def __add__(self, other):
        self._check(other)
        out = dict(self.coeffs)
        R = self.ring
        for k, v in other.coeffs.items():
            s = R.add(out.get(k, R.zero()), v)
            if R.is_zero(s):
                out.pop(k, None)
            else:
                out[k] = s
        return PdElement(R, self.arity, out, self.clipped or other.clipped)

    def __neg__(self):
        R = self.ring
        return PdElement(R, self.arity, {k: R.neg(v) for k, v in self.coeffs.items()},
                         self.clipped)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "PdElement":
        R = self.ring
        c = R.normalize(c)
        return PdElement(R, self.arity,
                         {k: R.mul(v, c) for k, v in self.coeffs.items()}, self.clipped)

    def __mul__(self, other):
        if isinstance(other, PdElement):
            return pd_mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def power(self, e: int) -> "PdElement":
        out = PdElement.constant(self.ring, self.arity, self.ring.one())
        for _ in range(e):
            out = pd_mul(out, self)
        return out

    def __repr__(self):
        return f"PdElement({format_pd_element(self)})"


def pd_mul(a: PdElement, b: PdElement) -> PdElement:
    """Exact product in A<t>, reduced to canonical zero-free support."""
    a._check(b)
    R = a.ring
    out: dict = {}
    for k, va in a.coeffs.items():
        for l, vb in b.coeffs.items():
            m = tuple(x + y for x, y in zip(k, l))
            c = R.mul(R.mul(va, vb), R.from_int(monomial_product_coeff(k, l)))
            s = R.add(out.get(m, R.zero()), c)
            if R.is_zero(s):
                out.pop(m, None)
            else:
                out[m] = s
    return PdElement(R, a.arity, out, a.clipped or b.clipped)


def pd_gamma(k: int, x: PdElement) -> PdElement:
    """Divided power gamma_k(x) for x with zero constant term."""
    if k < 0:
        raise ValueError("negative divided power")
    R = x.ring
    if not R.is_zero(x.constant_term()):
        raise ValueError("divided powers require a zero constant term")
    if k == 0:
        return PdElement.constant(R, x.arity, R.one())
    terms = sorted(x.coeffs.items())
    memo: dict = {}

    def gamma_monomial(idx: tuple, c, e: int) -> PdElement:
        coeff = R.mul(_ring_pow(R, c, e), R.from_int(monomial_gamma_coeff(idx, e)))
        return PdElement(R, x.arity, {tuple(e * v for v in idx): coeff})

    def rec(i: int, e: int) -> PdElement:
        if e == 0:
            return PdElement.constant(R, x.arity, R.one())
        if i == len(terms):
            return PdElement.zero(R, x.arity)
        key = (i, e)
        if key in memo:
            return memo[key]
        idx, c = terms[i]
        acc = PdElement.zero(R, x.arity)
        for a in range(e + 1):
            rest = rec(i + 1, e - a)
            if rest.is_zero():
                continue
            acc = acc + pd_mul(gamma_monomial(idx, c, a), rest)
        memo[key] = acc
        return acc

    return rec(0, k)


def _ring_pow(R: BaseDpRing, c, e: int):
    out = R.one()
    for _ in range(e):
        out = R.mul(out, c)
    return out


def ideal_power_membership(x: PdElement, n: int) -> bool:
    """True iff every monomial of x has weight >= n."""
    return all(weight(k) >= n for k in x.coeffs)


def truncate(x: PdElement, p: TruncationParams) -> PdElement:
    """Canonical representative in D^{m,n} = A<t> / m<t>_+^[n].

    Coefficients of monomials of weight >= n are reduced modulo the ideal
    (m); monomials past the weight cutoff are dropped and the result is
    flagged as clipped.
    """
    R = x.ring
    out = {}
    clipped = x.clipped
    for k, v in x.coeffs.items():
        w = weight(k)
        if p.weight_cutoff is not None and w > p.weight_cutoff:
            clipped = True
            continue
        if w >= p.level:
            v = R.reduce_mod(v, p.torsion)
            if R.is_zero(v):
                continue
        out[k] = v
    return PdElement(R, x.arity, out, clipped)


def substitute(x: PdElement, images: dict) -> PdElement:
    """The divided power algebra map sending t_j to images[j].

    Every image must live in one common algebra and have zero constant
    term, so that t^[K] maps to the product of gamma_{k_j}(images[j]).
    """
    if not images:
        raise ValueError("no substitution images supplied")
    sample = next(iter(images.values()))
    R, arity = sample.ring, sample.arity
    for j, img in images.items():
        if img.ring != R or img.arity != arity:
            raise ValueError("images live in different algebras")
        if not R.is_zero(img.constant_term()):
            raise ValueError(f"image of variable {j} has a nonzero constant term")
    out = PdElement.zero(R, arity)
    for k, c in x.coeffs.items():
        term = PdElement.constant(R, arity, c)
        for j, e in enumerate(k):
            if e == 0:
                continue
            if j not in images:
                raise ValueError(f"variable {j} has no image")
            term = pd_mul(term, pd_gamma(e, images[j]))
            if term.is_zero():
                break
        out = out + term
    return out


# ---------------------------------------------------------------------------
# Text syntax
#
# Monomials print as t1^[3]*t2^[1]; coefficients are integers or a/b
# rationals; terms combine with + and -.  Plain powers on a pd variable
# are ordinary ring powers, so t^2 parses to 2*t^[2].


class ExprError(ValueError):
    def __init__(self, pos: int, message: str):
        super().__init__(message)
        self.pos = pos
        self.message = message


_TOKEN_OPS = set("^*+-/[](),=")


def tokenize(text: str):
    """Tokens (kind, value, offset); kinds NAME, INT, OP, END."""
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t":
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(("INT", int(text[i:j]), i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("NAME", text[i:j], i))
            i = j
        elif ch in _TOKEN_OPS:
            toks.append(("OP", ch, i))
            i += 1
        else:
            raise ExprError(i, f"unexpected character {ch!r}")
    toks.append(("END", None, n))
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, ch):
        kind, val, pos = self.next()
        if kind != "OP" or val != ch:
            raise ExprError(pos, f"expected {ch!r}")


def parse_terms(text: str):
    """Parse a sum of terms.

    Returns a list of (coefficient Fraction, factors) where factors is a
    list of (name, exponent, is_divided_power).
    """
    p = _Parser(tokenize(text))
    terms = _parse_sum(p)
    kind, _, pos = p.peek()
    if kind != "END":
        raise ExprError(pos, "trailing input")
    return terms


def _parse_sum(p: _Parser):
    terms = []
    sign = 1
    kind, val, pos = p.peek()
    if kind == "OP" and val in "+-":
        p.next()
        sign = -1 if val == "-" else 1
    while True:
        coeff, factors = _parse_term(p)
        terms.append((coeff * sign, factors))
        kind, val, pos = p.peek()
        if kind == "OP" and val in "+-":
            p.next()
            sign = -1 if val == "-" else 1
            continue
        return terms


def _parse_term(p: _Parser):
    coeff = Fraction(1)
    factors = []
    first = True
    while True:
        kind, val, pos = p.peek()
        if kind == "INT":
            p.next()
            num = val
            kind2, val2, _ = p.peek()
            if kind2 == "OP" and val2 == "/":
                p.next()
                kind3, val3, pos3 = p.next()
                if kind3 != "INT":
                    raise ExprError(pos3, "expected denominator")
                coeff *= Fraction(num, val3)
            else:
                coeff *= num
        elif kind == "NAME":
            p.next()
            exp, divided = 1, False
            kind2, val2, _ = p.peek()
            if kind2 == "OP" and val2 == "^":
                p.next()
                kind3, val3, pos3 = p.peek()
                if kind3 == "OP" and val3 == "[":
                    p.next()
                    kind4, val4, pos4 = p.next()
                    if kind4 != "INT":
                        raise ExprError(pos4, "expected integer inside [ ]")
                    kind5, val5, pos5 = p.next()
                    if kind5 != "OP" or val5 != "]":
                        raise ExprError(pos5, "unclosed divided power bracket")
                    exp, divided = val4, True
                elif kind3 == "INT":
                    p.next()
                    exp, divided = val3, False
                else:
                    raise ExprError(pos3, "expected exponent")
            factors.append((val, exp, divided))
        else:
            if first:
                raise ExprError(pos, "expected a term")
            break
        first = False
        kind, val, pos = p.peek()
        if kind == "OP" and val == "*":
            p.next()
            continue
        break
    return coeff, factors


def parse_pd_element(text: str, ring: BaseDpRing, names: list[str]) -> PdElement:
    """Parse the pd-element text syntax over the named variables."""
    index = {n: i for i, n in enumerate(names)}
    arity = len(names)
    out = PdElement.zero(ring, arity)
    for coeff, factors in parse_terms(text):
        k = [0] * arity
        extra = 1
        for name, exp, divided in factors:
            if name not in index:
                raise ExprError(0, f"unknown variable {name!r}")
            if not divided:
                extra *= factorial(exp)
            k[index[name]] += exp
        c = _fraction_into_ring(ring, coeff * extra)
        out = out + PdElement(ring, arity, {tuple(k): c})
    return out


def _fraction_into_ring(ring: BaseDpRing, q: Fraction):
    if ring.kind == "Q":
        return q
    if q.denominator == 1:
        return ring.normalize(q.numerator)
    if ring.kind == "ZmodN":
        return ring.mul(q.numerator, ring.inverse(q.denominator))
    raise ExprError(0, f"coefficient {q} is not integral")


def format_pd_element(x: PdElement, names: list[str] | None = None) -> str:
    """Canonical printing: monomials by (weight, lexicographic exponents)."""
    if names is None:
        names = [f"t{i+1}" for i in range(x.arity)]
    if not x.coeffs:
        return "0"
    parts = []
    for k in sorted(x.coeffs, key=lambda kk: (weight(kk), kk)):
        c = x.coeffs[k]
        factors = [f"{names[j]}^[{e}]" for j, e in enumerate(k) if e]
        body = "*".join(factors)
        if not factors:
            frag = str(c)
        elif c == x.ring.one():
            frag = body
        else:
            frag = f"{c}*{body}"
        parts.append(frag)
    text = " + ".join(parts)
    return text.replace("+ -", "- ")
