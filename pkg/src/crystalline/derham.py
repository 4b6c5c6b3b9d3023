"""pd de Rham complexes of truncated envelopes, the explicit contracting
homotopy of the free case, and connection-twisted complexes.

Forms over a carrier are spanned by (monomial, wedge subset) pairs; the
frame is the list of chart 1-forms dx_j followed by the dxi symbols of a
fiber power.  Wedges are kept sorted with parity signs, so serialization
is stable.  A weight-w slice of Omega^mu is a presented module whose
relations are the coefficient torsion rows tau(b)*(b (x) w_S) together
with the rows tau(c)*d(c) wedged into Omega^{mu-1}; this is the exact
kernel of the quotient by m*I^[n], so the differential descends on the
nose in every degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .exactalg import BaseDpRing
from .envelope import Carrier, CosimplicialLevel, Element, EnvelopePresentation
from .homcx import FiniteComplex, PresentedModule


def wedge_insert(s: tuple, j: int):
    """Sign and result of e_j wedged on the LEFT of the sorted wedge s."""
    if j in s:
        return None
    pos = sum(1 for x in s if x < j)
    out = tuple(sorted(s + (j,)))
    return (1 if pos % 2 == 0 else -1), out


def wedge_append(s: tuple, j: int):
    """Sign and result of e_j wedged on the RIGHT of the sorted wedge s."""
    if j in s:
        return None
    pos = sum(1 for x in s if x > j)
    out = tuple(sorted(s + (j,)))
    return (1 if pos % 2 == 0 else -1), out


def _as_carrier(env) -> Carrier:
    if isinstance(env, Carrier):
        return env
    if isinstance(env, CosimplicialLevel):
        return env.carrier
    if isinstance(env, EnvelopePresentation):
        return env.carrier
    raise TypeError("expected an envelope presentation, level, or carrier")


@dataclass
class DeRhamSlice:
    """One weight slice of the (possibly twisted) de Rham complex."""

    carrier: Carrier
    weight: int
    rank: int
    generators: list          # per degree mu: ordered list of (mono, wedge, s)
    complex: FiniteComplex

    def generator_index(self, mu: int):
        return {g: i for i, g in enumerate(self.generators[mu])}


def _slice_generators(carrier: Carrier, weight: int, rank: int):
    frame = range(carrier.frame_size)
    gens = []
    for mu in range(carrier.frame_size + 1):
        if weight - mu < 0:
            gens.append([])
            continue
        basis = carrier.basis(weight - mu)
        level = []
        for wedge in combinations(frame, mu):
            for b in basis:
                for s in range(rank):
                    level.append((b, wedge, s))
        level.sort(key=lambda g: (g[1], g[0], g[2]))
        gens.append(level)
    return gens


def _torsion_rows(carrier: Carrier, gens_mu: list, index: dict, rank: int):
    ring = carrier.ring
    rows = []
    for (b, wedge, s) in gens_mu:
        t = ring.torsion_modulus(carrier.torsion_of(b))
        if t == 0:
            continue
        row = [ring.zero()] * len(gens_mu)
        row[index[(b, wedge, s)]] = ring.from_int(t)
        rows.append(tuple(row))
    return rows


def _dtorsion_rows(carrier: Carrier, weight: int, mu: int, index: dict,
                   gens_mu: list, rank: int):
    """Rows tau(c) * d(c) ∧ w_{S'} for carrier monomials c of weight
    weight-mu+1 with torsion, wedged over all (mu-1)-subsets."""
    if mu == 0:
        return []
    ring = carrier.ring
    rows = []
    frame = range(carrier.frame_size)
    cw = weight - mu + 1
    if cw < 0:
        return []
    # killed monomials (eff = 1) still contribute: their differential is a
    # relation with unit multiplier
    for c in carrier.basis_full(cw):
        t = carrier.torsion_of(c)
        eff = ring.torsion_modulus(t)
        if eff == 0:
            continue
        dc = carrier.d_mono(c)
        if not dc:
            continue
        for sprime in combinations(frame, mu - 1):
            for s in range(rank):
                row = [ring.zero()] * len(gens_mu)
                touched = False
                for (m2, j), coeff in dc.items():
                    ins = wedge_insert(sprime, j)
                    if ins is None:
                        continue
                    sign, wedge = ins
                    g = (m2, wedge, s)
                    if g not in index:
                        continue
                    row[index[g]] = ring.add(
                        row[index[g]], ring.mul(ring.from_int(eff * sign), coeff))
                    touched = True
                if touched and any(not ring.is_zero(v) for v in row):
                    rows.append(tuple(row))
    return rows


def derham_complex(env, weight: int, conn=None) -> DeRhamSlice:
    """Weight slice of Omega^* over the carrier, twisted by a connection.

    conn is None for the plain structure complex (rank one, zero
    connection); otherwise it must provide `rank` and `gamma_matrices
    (carrier)` giving, per chart direction, a rank x rank matrix of carrier
    elements.
    """
    carrier = _as_carrier(env)
    ring = carrier.ring
    rank = 1 if conn is None else conn.rank
    gammas = None
    if conn is not None:
        gammas = conn.gamma_matrices(carrier)
    gens = _slice_generators(carrier, weight, rank)
    indexes = [{g: i for i, g in enumerate(lv)} for lv in gens]
    terms = []
    for mu in range(carrier.frame_size + 1):
        rows = _torsion_rows(carrier, gens[mu], indexes[mu], rank)
        rows += _dtorsion_rows(carrier, weight, mu, indexes[mu], gens[mu], rank)
        terms.append(PresentedModule(ring, len(gens[mu]), tuple(rows)))
    maps = []
    d = carrier.core.d
    for mu in range(carrier.frame_size):
        src, tgt = gens[mu], gens[mu + 1]
        tix = indexes[mu + 1]
        mat = [[ring.zero()] * len(src) for _ in range(len(tgt))]
        for col, (b, wedge, s) in enumerate(src):
            for (m2, j), coeff in carrier.d_mono(b).items():
                ins = wedge_insert(wedge, j)
                if ins is None:
                    continue
                sign, nw = ins
                g = (m2, nw, s)
                if g in tix:
                    mat[tix[g]][col] = ring.add(mat[tix[g]][col],
                                                ring.mul(ring.from_int(sign), coeff))
            if gammas is not None:
                for j in range(d):
                    ins = wedge_insert(wedge, j)
                    if ins is None:
                        continue
                    sign, nw = ins
                    for s2 in range(rank):
                        entry = gammas[j][s2][s]
                        if entry.is_zero():
                            continue
                        prod, _ = carrier.mul({b: ring.one()}, entry.data)
                        for m2, coeff in prod.items():
                            g = (m2, nw, s2)
                            if g in tix:
                                mat[tix[g]][col] = ring.add(
                                    mat[tix[g]][col],
                                    ring.mul(ring.from_int(sign), coeff))
        maps.append(mat)
    cx = FiniteComplex(ring, 0, terms, maps)
    return DeRhamSlice(carrier, weight, rank, gens, cx)


def twisted_derham(conn, env, weight: int) -> DeRhamSlice:
    """Connection-twisted de Rham slice; the connection must be integrable."""
    from .crystal import check_integrable

    if not check_integrable(conn):
        raise ValueError("connection is not integrable")
    return derham_complex(env, weight, conn=conn)


# ---------------------------------------------------------------------------
# The free-case contracting homotopy


class FreeForms:
    """Differential forms over the free pd algebra A<t_1..t_m>.

    A form is a dict {(K, S): coefficient} with K the pd multi-index and S
    the sorted tuple of wedge indices.  Supplies the de Rham differential,
    the unit inclusion f, the constant-term projection h, and the
    contracting homotopy k with k d + d k = id - f h exactly.
    """

    def __init__(self, ring: BaseDpRing, nvars: int):
        self.ring = ring
        self.nvars = nvars

    def normalize(self, form: dict) -> dict:
        return {k: v for k, v in form.items() if not self.ring.is_zero(v)}

    def monomial(self, k, s=(), c=1):
        return self.normalize({(tuple(k), tuple(s)): self.ring.normalize(c)})

    def add(self, a: dict, b: dict) -> dict:
        R = self.ring
        out = dict(a)
        for key, v in b.items():
            s = R.add(out.get(key, R.zero()), v)
            if R.is_zero(s):
                out.pop(key, None)
            else:
                out[key] = s
        return out

    def scale(self, a: dict, c) -> dict:
        R = self.ring
        return self.normalize({k: R.mul(v, c) for k, v in a.items()})

    def sub(self, a, b):
        return self.add(a, self.scale(b, -1))

    def d(self, form: dict) -> dict:
        R = self.ring
        out: dict = {}
        for (k, s), c in form.items():
            for j in range(self.nvars):
                if k[j]:
                    ins = wedge_insert(s, j)
                    if ins is None:
                        continue
                    sign, ns = ins
                    nk = list(k)
                    nk[j] -= 1
                    key = (tuple(nk), ns)
                    v = R.add(out.get(key, R.zero()), R.mul(c, R.from_int(sign)))
                    if R.is_zero(v):
                        out.pop(key, None)
                    else:
                        out[key] = v
        return out

    def k(self, form: dict) -> dict:
        """Contracting homotopy: on t^[K] dx_S it raises the smallest wedge
        variable j into t_j^[K_j+1] when no earlier variable appears, and
        vanishes otherwise (tensor assembly of the one-variable rule)."""
        R = self.ring
        out: dict = {}
        for (k, s), c in form.items():
            if not s:
                continue
            j = s[0]
            if any(k[i] for i in range(j)):
                continue
            nk = list(k)
            nk[j] += 1
            key = (tuple(nk), s[1:])
            v = R.add(out.get(key, R.zero()), c)
            if R.is_zero(v):
                out.pop(key, None)
            else:
                out[key] = v
        return out

    def f(self, c) -> dict:
        """Unit inclusion A -> Omega^0."""
        return self.monomial([0] * self.nvars, (), c)

    def h(self, form: dict):
        """Projection to the constant term of Omega^0."""
        key = (tuple([0] * self.nvars), ())
        return form.get(key, self.ring.zero())

    def fh(self, form: dict) -> dict:
        return self.f(self.h(form))

    def homotopy_defect(self, form: dict) -> dict:
        """(k d + d k + f h - id)(form); zero iff the identity holds."""
        lhs = self.add(self.k(self.d(form)), self.d(self.k(form)))
        lhs = self.add(lhs, self.fh(form))
        return self.sub(lhs, form)


@dataclass
class HomotopyOperator:
    """The contracting homotopy package for A<t_1..t_m>."""

    forms: FreeForms

    def k(self, form):
        return self.forms.k(form)

    def d(self, form):
        return self.forms.d(form)

    def unit(self, c):
        return self.forms.f(c)

    def constant_term(self, form):
        return self.forms.h(form)


def poincare_homotopy(ring: BaseDpRing, nvars: int) -> HomotopyOperator:
    """Homotopy data for the free pd de Rham complex of A<t_1..t_m>."""
    return HomotopyOperator(FreeForms(ring, nvars))
