"""Connections on free modules over truncated envelopes: integrability,
the divided-power quasi-nilpotence certificate, crystal evaluation on pd
thickenings, and the transition isomorphisms between evaluations along two
different maps.

A connection is stored as one rank x rank matrix Gamma_j of carrier
elements per chart direction; theta_j acts as the frame derivative plus
Gamma_j.  The transition matrix between evaluations along f and g is the
finite sum over multi-indices K of theta^K applied to the generators times
the divided powers of b = f(x) - g(x); computing it requires a Verified
quasi-nilpotence certificate (an inconclusive bound refuses rather than
truncating a possibly infinite sum).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, gcd

from .envelope import (
    Carrier,
    CarrierMap,
    Element,
    EnvelopeError,
    EnvelopePresentation,
)
from .homcx import PresentedModule


class RefusalError(RuntimeError):
    """A computation was declined because its certificate is missing."""


# ---------------------------------------------------------------------------
# Connection data


class ConnectionData:
    """A tower of free rank-r modules with connection matrices Gamma_j.

    The matrices are given over the envelope's carrier (top truncation
    level); each lower tower level is the canonical truncation, so the
    transition condition M_{n+1} (x) D_n = M_n holds by construction and
    the theta operators commute with the tower maps.
    """

    def __init__(self, env: EnvelopePresentation, rank: int, gammas=None,
                 n_max: int | None = None):
        self.env = env
        self.rank = rank
        self.n_max = n_max if n_max is not None else env.trunc.level
        d = env.core.d
        if gammas is None:
            gammas = [[[{} for _ in range(rank)] for _ in range(rank)]
                      for _ in range(d)]
        if len(gammas) != d:
            raise ValueError("need one connection matrix per chart direction")
        self._raw = []
        for mat in gammas:
            if len(mat) != rank or any(len(row) != rank for row in mat):
                raise ValueError("connection matrix has wrong shape")
            self._raw.append([[entry.data if isinstance(entry, Element) else dict(entry)
                               for entry in row] for row in mat])
        self._qn_cache: dict = {}

    @property
    def is_structure(self) -> bool:
        return self.rank == 1 and all(
            not entry for mat in self._raw for row in mat for entry in row)

    def carrier_at(self, n: int) -> Carrier:
        return self.env.carrier.at_level(n)

    def gamma_matrices(self, carrier: Carrier):
        """The connection matrices as elements of the given carrier."""
        pad = carrier.xi_count
        out = []
        for mat in self._raw:
            rows = []
            for row in mat:
                rows.append([Element(carrier, _pad_xi(entry, pad)) for entry in row])
            out.append(rows)
        return out

    def ensure_quasinilpotent(self, k_max: int = 64):
        key = k_max
        if key not in self._qn_cache:
            self._qn_cache[key] = check_pd_quasinilpotent(self, k_max)
        res = self._qn_cache[key]
        if not isinstance(res, Verified):
            raise RefusalError(
                "quasi-nilpotence was not verified within the iteration bound; "
                "transition isomorphisms are refused without the certificate")
        return res


def _pad_xi(data: dict, pad: int) -> dict:
    if pad == 0:
        return dict(data)
    zeros = tuple([0] * pad)
    return {(alpha, k, zeros): c for (alpha, k, _l), c in data.items()}


def partial(carrier: Carrier, j: int, data: dict) -> dict:
    """The frame-direction derivative: the dx_j coefficient of d."""
    out = {}
    R = carrier.ring
    for (mono, jj), c in carrier.d_element(data).items():
        if jj == j:
            prev = out.get(mono, R.zero())
            s = R.add(prev, c)
            if R.is_zero(s):
                out.pop(mono, None)
            else:
                out[mono] = s
    return out


def _vec_theta(carrier: Carrier, gammas, j: int, vec: list) -> list:
    """theta_j = partial_j + Gamma_j on a rank-vector of carrier elements."""
    R = carrier.ring
    rank = len(vec)
    out = [partial(carrier, j, comp) for comp in vec]
    for sprime in range(rank):
        acc = out[sprime]
        for s in range(rank):
            entry = gammas[j][sprime][s]
            if entry.is_zero() or not vec[s]:
                continue
            prod, _ = carrier.mul(entry.data, vec[s])
            for mono, c in prod.items():
                prev = acc.get(mono, R.zero())
                v = R.add(prev, c)
                if R.is_zero(v):
                    acc.pop(mono, None)
                else:
                    acc[mono] = v
        out[sprime], _ = carrier.normalize(acc)
    return out


def theta_word_matrices(carrier: Carrier, gammas, rank: int, max_total: int,
                        directions: int):
    """T_K for |K| <= max_total: the matrix of theta^K on module generators.

    T_0 = id and T_{K+e_j} = partial_j(T_K) + Gamma_j T_K; the order of
    composition is immaterial once the connection is integrable.
    """
    one = carrier.one()
    T0 = [[dict(one) if a == b else {} for b in range(rank)] for a in range(rank)]
    words = {tuple([0] * directions): T0}
    frontier = [tuple([0] * directions)]
    for _ in range(max_total):
        new = []
        for K in frontier:
            for j in range(directions):
                nk = list(K)
                nk[j] += 1
                nk = tuple(nk)
                if nk in words:
                    continue
                base = words[K]
                mat = [[None] * rank for _ in range(rank)]
                for b in range(rank):
                    vec = [base[s][b] for s in range(rank)]
                    res = _vec_theta(carrier, gammas, j, vec)
                    for a in range(rank):
                        mat[a][b] = res[a]
                words[nk] = mat
                new.append(nk)
        frontier = new
    return words


# ---------------------------------------------------------------------------
# Integrability and quasi-nilpotence


def check_integrable(c: ConnectionData) -> bool:
    """[theta_i, theta_j] = 0 on generators through the weight cutoff.

    The commutator is computed on the untruncated envelope (where theta is
    an honest operator) and is carrier-linear there, so vanishing on the
    module generators gives vanishing everywhere and at every tower level.
    """
    d = c.env.core.d
    carrier = c.env.carrier.free_view()
    gammas = c.gamma_matrices(carrier)
    for i in range(d):
        for j in range(i + 1, d):
            for s in range(c.rank):
                vec = [dict() for _ in range(c.rank)]
                vec[s] = carrier.one()
                a = _vec_theta(carrier, gammas, j, _vec_theta(carrier, gammas, i, vec))
                b = _vec_theta(carrier, gammas, i, _vec_theta(carrier, gammas, j, vec))
                for u, v in zip(a, b):
                    if carrier.normalize(_dict_diff(carrier.ring, u, v))[0]:
                        return False
    return True


def _dict_diff(R, a, b):
    out = dict(a)
    for k, v in b.items():
        s = R.sub(out.get(k, R.zero()), v)
        if R.is_zero(s):
            out.pop(k, None)
        else:
            out[k] = s
    return out


@dataclass(frozen=True)
class Verified:
    """Quasi-nilpotence certificate: witnessing exponent per tower level."""

    witnesses: dict
    k: int

    status = "verified"


@dataclass(frozen=True)
class NotWithinBound:
    """Inconclusive outcome: not a disproof of quasi-nilpotence."""

    level: int
    direction: int
    k_max: int

    status = "inconclusive"


def _divisible(carrier: Carrier, data: dict, q: int) -> bool:
    """Whether every coefficient lies in q * (its coefficient module)."""
    R = carrier.ring
    if R.kind == "Q":
        return True
    for mono, c in data.items():
        t = R.torsion_modulus(carrier.torsion_of(mono))
        if R.kind == "Z":
            g = gcd(q, t) if t else q
        else:
            m = t if t else R.modulus
            g = gcd(gcd(q, m), R.modulus)
        if g == 0:
            if int(c) != 0:
                return False
        elif int(c) % g:
            return False
    return True


def check_pd_quasinilpotent(c: ConnectionData, k_max: int = 64):
    """Semi-decision: Verified with witnesses, or NotWithinBound.

    Tests every module generator over every carrier basis monomial through
    the weight cutoff, at every tower level n <= n_max, iterating theta_j
    until the image is divisible by n!.
    """
    witnesses = {}
    d = c.env.core.d
    cutoff = c.env.trunc.weight_cutoff
    if cutoff is None:
        cutoff = 6
    upstairs = c.env.carrier.free_view()
    gammas = c.gamma_matrices(upstairs)
    for n in range(1, c.n_max + 1):
        carrier = c.carrier_at(n)
        nfact = factorial(n)
        level_witness = 1
        for w in range(cutoff + 1):
            for b in carrier.basis(w):
                for s in range(c.rank):
                    for j in range(d):
                        # iterate upstairs; test divisibility of the image
                        vec = [dict() for _ in range(c.rank)]
                        vec[s] = {b: carrier.ring.one()}
                        k = 0
                        while not all(_divisible(carrier, comp, nfact) for comp in vec):
                            if k >= k_max:
                                return NotWithinBound(n, j, k_max)
                            vec = _vec_theta(upstairs, gammas, j, vec)
                            k += 1
                        level_witness = max(level_witness, k, 1)
        witnesses[n] = level_witness
    return Verified(witnesses, max(witnesses.values(), default=1))


def pd_nilpotence_bound(m: int, n: int) -> int:
    """The integer N with: m x^[n] = 0 for all x forces m I^[N] = 0.

    N = max(n, ceil(2 n^2 log2 n)) for n >= 2 and N = 1 for n = 1; the
    ceiling is computed exactly through bit lengths.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    if n == 1:
        return 1
    power = n ** (2 * n * n)
    return max(n, (power - 1).bit_length())


# ---------------------------------------------------------------------------
# Thickenings and maps into them


@dataclass
class PdThickening:
    """A concrete object (B, I, delta): a truncated pd algebra carrier whose
    augmentation ideal satisfies m I^[n] = 0 by construction."""

    carrier: Carrier

    @property
    def torsion(self) -> int:
        return self.carrier.trunc.torsion

    @property
    def level(self) -> int:
        return self.carrier.trunc.level

    def verify_torsion(self, probe_weight: int = 4) -> bool:
        R = self.carrier.ring
        for w in range(min(probe_weight, self.carrier.trunc.weight_cutoff or probe_weight) + 1):
            for b in self.carrier.basis(w):
                if self.carrier.pd_weight(b) >= self.level:
                    scaled, _ = self.carrier.normalize(
                        {b: R.from_int(self.torsion)})
                    if scaled:
                        return False
        return True


def augmentation(carrier: Carrier, data: dict) -> dict:
    """The image in R: the pure chart part of an element."""
    out = {}
    for (alpha, k, l), c in data.items():
        if not any(k) and not any(l):
            out[alpha] = c
    return out


def pd_map(source: Carrier, target: PdThickening | Carrier, chart_images,
           name: str = "") -> CarrierMap:
    """A divided power map D -> B given on chart variables.

    The pd generators go to f_i evaluated at the chart images; validity is
    checked on generators: images must respect the augmentation to R and
    carry the ideal into the divided power ideal of B.
    """
    tgt = target.carrier if isinstance(target, PdThickening) else target
    images = [im if isinstance(im, Element) else Element(tgt, im)
              for im in chart_images]
    m = CarrierMap(source, tgt, images, [], name=name)
    for j in range(source.core.d):
        beta = [0] * source.core.d
        beta[j] = 1
        from .envelope import Poly

        want = augmentation(tgt, tgt.inject_poly(
            Poly(tgt.ring, tgt.core.d, {tuple(beta): tgt.ring.one()})))
        got = augmentation(tgt, images[j].data)
        if want != got:
            raise EnvelopeError(
                f"image of chart variable {source.core.chart[j]} does not "
                "respect the augmentation to R")
    m.pd_images()  # raises if an ideal generator escapes the pd ideal
    return m


@dataclass
class EvaluatedModule:
    """A crystal evaluated on a thickening: free of the crystal's rank."""

    carrier: Carrier
    rank: int

    def module(self, weight: int) -> PresentedModule:
        R = self.carrier.ring
        gens = [(b, s) for b in self.carrier.basis(weight) for s in range(self.rank)]
        rows = []
        for i, (b, s) in enumerate(gens):
            t = R.torsion_modulus(self.carrier.torsion_of(b))
            if t:
                row = [R.zero()] * len(gens)
                row[i] = R.from_int(t)
                rows.append(tuple(row))
        return PresentedModule(R, len(gens), tuple(rows))


def crystal_evaluate(c: ConnectionData, f: CarrierMap) -> EvaluatedModule:
    """The base change M (x)_{D,f} B along a pd map into a thickening."""
    if f.source.core is not c.env.core:
        raise EnvelopeError("map does not start from the crystal's envelope")
    return EvaluatedModule(f.target, c.rank)


def transition_iso(c: ConnectionData, f: CarrierMap, g: CarrierMap,
                   k_max: int = 64):
    """The matrix of c_{f,g}: M (x)_f B -> M (x)_g B over B.

    Equals sum_K g(theta^K on generators) * gamma_K(b) with b = f(x)-g(x);
    finite because high divided powers of b die in the truncation and high
    theta words are certified divisible.  Refuses without a Verified
    quasi-nilpotence certificate.
    """
    cert = c.ensure_quasinilpotent(k_max)
    if f.target is not g.target:
        raise EnvelopeError("the two maps must land in one thickening")
    B = f.target
    d = c.env.core.d
    source = f.source
    b = [f.chart_images[v] - g.chart_images[v] for v in range(d)]
    for el in b:
        if not B.augmentation_zero(el.data):
            raise EnvelopeError("maps do not agree on the augmentation")
    cutoff = B.trunc.weight_cutoff or 8
    upstairs = source.free_view()
    gammas = c.gamma_matrices(upstairs)
    words = theta_word_matrices(upstairs, gammas, c.rank, cutoff, d)
    # divided powers of the difference vector, per variable and exponent
    gmemo = {}

    def gamma_b(v: int, e: int) -> Element:
        if (v, e) not in gmemo:
            gmemo[(v, e)] = b[v].gamma(e)
        return gmemo[(v, e)]

    zero = Element(B, {})
    out = [[zero for _ in range(c.rank)] for _ in range(c.rank)]
    for K, T in sorted(words.items()):
        factor = Element(B, B.one())
        for v, e in enumerate(K):
            if e:
                factor = factor * gamma_b(v, e)
        if factor.is_zero():
            continue
        for a in range(c.rank):
            for bb in range(c.rank):
                entry = T[a][bb]
                if not entry:
                    continue
                out[a][bb] = out[a][bb] + g.apply(entry) * factor
    return out


def matrix_mul(B: Carrier, m1, m2):
    r = len(m1)
    zero = Element(B, {})
    out = [[zero for _ in range(r)] for _ in range(r)]
    for a in range(r):
        for c_ in range(r):
            acc = Element(B, {})
            for k in range(r):
                acc = acc + m1[a][k] * m2[k][c_]
            out[a][c_] = acc
    return out


def matrix_is_identity(B: Carrier, m) -> bool:
    one = Element(B, B.one())
    for a in range(len(m)):
        for b in range(len(m)):
            want = one if a == b else Element(B, {})
            if m[a][b] != want:
                return False
    return True


def cocycle_check(c: ConnectionData, f: CarrierMap, g: CarrierMap,
                  h: CarrierMap, k_max: int = 64) -> bool:
    """Exact matrix identity c_{g,h} c_{f,g} = c_{f,h} over B."""
    cfg = transition_iso(c, f, g, k_max)
    cgh = transition_iso(c, g, h, k_max)
    cfh = transition_iso(c, f, h, k_max)
    lhs = matrix_mul(f.target, cgh, cfg)
    for a in range(c.rank):
        for bb in range(c.rank):
            if lhs[a][bb] != cfh[a][bb]:
                return False
    return True
