"""Bounded complexes of finitely presented modules and their homology.

A module is given by a generator count and relation rows over the base
ring; a complex is a contiguous run of such modules with boundary
matrices.  Homology is computed exactly: by Smith normal form over Z, by
lifting with ring-torsion rows over Z/N (the quotient is automatically
N-torsion, reported as a canonical sum of Z/d_i), and by rank arithmetic
over Q.

All sign conventions used by the higher layers live here.  The mapping
cone of f : S -> T has cone^k = S^{k+1} (+) T^k with differential
[[-d_S, 0], [-f, d_T]], and `is_quasi_iso(f, (a, b))` certifies that
H^k(f) is bijective for a <= k <= b by checking that the cone is acyclic
in degrees a-1 .. b.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exactalg import (
    BaseDpRing,
    IntMatrix,
    IntSolver,
    ModuleShape,
    integers,
    kernel_integer,
    module_from_relations,
    solve_linear,
)


@dataclass(frozen=True)
class PresentedModule:
    """A^gens modulo the span of the relation rows."""

    ring: BaseDpRing
    gens: int
    rels: tuple = ()

    def __post_init__(self):
        for r in self.rels:
            if len(r) != self.gens:
                raise ValueError("relation row has wrong width")

    def shape(self) -> ModuleShape:
        return module_from_relations(self.ring, self.gens, [list(r) for r in self.rels])


def zero_module(ring: BaseDpRing) -> PresentedModule:
    return PresentedModule(ring, 0)


class FiniteComplex:
    """Cochain complex term(lo) -> term(lo+1) -> ... with explicit maps.

    maps[i] sends term(lo+i) to term(lo+i+1) and is a matrix of shape
    (term(lo+i+1).gens, term(lo+i).gens) acting on column vectors.
    """

    def __init__(self, ring: BaseDpRing, lo: int, terms: list, maps: list):
        if len(maps) != max(len(terms) - 1, 0):
            raise ValueError("need one boundary map per adjacent pair")
        self.ring = ring
        self.lo = lo
        self.terms = list(terms)
        self.maps = [self._as_matrix(m, terms[i + 1].gens, terms[i].gens)
                     for i, m in enumerate(maps)]

    def _as_matrix(self, m, rows, cols):
        m = [list(r) for r in m]
        if len(m) != rows or any(len(r) != cols for r in m):
            raise ValueError(f"boundary matrix must be {rows}x{cols}")
        return [[self.ring.normalize(v) for v in r] for r in m]

    @property
    def hi(self) -> int:
        return self.lo + len(self.terms) - 1

    def degrees(self):
        return range(self.lo, self.hi + 1)

    def term(self, i: int) -> PresentedModule:
        if self.lo <= i <= self.hi:
            return self.terms[i - self.lo]
        return zero_module(self.ring)

    def map(self, i: int):
        """Matrix of term(i) -> term(i+1); zero-shaped outside range."""
        if self.lo <= i < self.hi:
            return self.maps[i - self.lo]
        rows = self.term(i + 1).gens
        cols = self.term(i).gens
        return [[self.ring.zero()] * cols for _ in range(rows)]

    def shift(self, k: int) -> "FiniteComplex":
        return FiniteComplex(self.ring, self.lo - k, self.terms, self.maps)


def _mat_apply(ring, m, vec):
    return [ring.normalize(sum(r[j] * vec[j] for j in range(len(vec)))) for r in m]


def _mat_mul(ring, a, b, cols=None):
    if cols is None:
        cols = len(b[0]) if b else 0
    if not a or not b:
        return [[ring.zero()] * cols for _ in range(len(a))]
    rows, inner = len(a), len(b)
    return [[ring.normalize(sum(a[i][k] * b[k][j] for k in range(inner)))
             for j in range(cols)] for i in range(rows)]


def span_membership(ring: BaseDpRing, rows, width: int):
    """A membership test for the row span, factored once for many probes."""
    if ring.kind == "Q":
        from fractions import Fraction

        reduced = []
        pivots = []
        for r in rows:
            v = [Fraction(x) for x in r]
            for (p, pv) in zip(pivots, reduced):
                if v[p] != 0:
                    f = v[p]
                    v = [a - f * b for a, b in zip(v, pv)]
            lead = next((i for i, a in enumerate(v) if a != 0), None)
            if lead is not None:
                inv = Fraction(1) / v[lead]
                v = [a * inv for a in v]
                pivots.append(lead)
                reduced.append(v)

        def member(vec):
            v = [Fraction(x) for x in vec]
            for (p, pv) in zip(pivots, reduced):
                if v[p] != 0:
                    f = v[p]
                    v = [a - f * b for a, b in zip(v, pv)]
            return all(a == 0 for a in v)

        return member
    lifted = [[int(rows[k][i]) for k in range(len(rows))] for i in range(width)]
    if ring.kind == "ZmodN":
        n = ring.modulus
        for i in range(width):
            lifted[i] += [n if i == j else 0 for j in range(width)]
    solver = IntSolver(lifted) if (rows or ring.kind == "ZmodN") else None

    def member(vec):
        vec = [int(x) for x in vec]
        if all(x == 0 for x in vec):
            return True
        if solver is None:
            return False
        return solver.solve(vec) is not None

    return member


def in_row_span(ring: BaseDpRing, rows, vec) -> bool:
    """Whether vec lies in the span of the given rows over the ring."""
    vec = list(vec)
    if all(ring.is_zero(v) for v in vec):
        return True
    if not rows:
        return False
    return span_membership(ring, rows, len(vec))(vec)


def check_complex(c: FiniteComplex) -> bool:
    """True iff every consecutive composite is zero modulo relations."""
    for i in c.degrees():
        comp = _mat_mul(c.ring, c.map(i + 1), c.map(i), cols=c.term(i).gens)
        tgt = c.term(i + 2)
        member = None
        for j in range(c.term(i).gens):
            col = [comp[k][j] for k in range(tgt.gens)]
            if all(c.ring.is_zero(v) for v in col):
                continue
            if member is None:
                member = span_membership(c.ring, [list(r) for r in tgt.rels],
                                         tgt.gens)
            if not member(col):
                return False
    return True


def relations_compatible(c: FiniteComplex) -> bool:
    """Boundary maps must carry relation rows into the target relations."""
    for i in c.degrees():
        tgt = c.term(i + 1)
        member = None
        for r in c.term(i).rels:
            img = _mat_apply(c.ring, c.map(i), list(r))
            if all(c.ring.is_zero(v) for v in img):
                continue
            if member is None:
                member = span_membership(c.ring, [list(x) for x in tgt.rels],
                                         tgt.gens)
            if not member(img):
                return False
    return True


# ---------------------------------------------------------------------------
# Homology


def homology(c: FiniteComplex, i: int) -> ModuleShape:
    """Invariant factors of ker/im at degree i (modulo relations)."""
    if c.ring.kind == "Q":
        return _homology_rational(c, i)
    return _homology_lifted(c, i)


def homology_all(c: FiniteComplex) -> dict:
    return {i: homology(c, i) for i in c.degrees()}


def _lift_rows(term: PresentedModule):
    rows = [[int(v) for v in r] for r in term.rels]
    if term.ring.kind == "ZmodN":
        n = term.ring.modulus
        rows += [[n if i == j else 0 for j in range(term.gens)] for i in range(term.gens)]
    return rows


def _cycles_and_boundaries(c: FiniteComplex, i: int):
    """Integer-lifted cycle lattice generators and boundary vectors at i."""
    cache = getattr(c, "_cb_cache", None)
    if cache is None:
        cache = {}
        setattr(c, "_cb_cache", cache)
    if i in cache:
        return cache[i]
    Z = integers()
    g = c.term(i).gens
    if g == 0:
        cache[i] = ([], [])
        return [], []
    d_out = [[int(v) for v in r] for r in c.map(i)]
    rel_out = _lift_rows(c.term(i + 1))
    if c.term(i + 1).gens == 0:
        kgens = [[1 if k == j else 0 for k in range(g)] for j in range(g)]
    else:
        stacked = [[d_out[r][j] for j in range(g)] +
                   [-rel_out[k][r] for k in range(len(rel_out))]
                   for r in range(c.term(i + 1).gens)]
        kern = kernel_integer(IntMatrix(Z, stacked)) if stacked else []
        kgens = [v[:g] for v in kern]
    lvecs = []
    d_in = [[int(v) for v in r] for r in c.map(i - 1)]
    for j in range(c.term(i - 1).gens):
        lvecs.append([d_in[k][j] for k in range(g)])
    lvecs += _lift_rows(c.term(i))
    cache[i] = (kgens, lvecs)
    return kgens, lvecs


def _homology_lifted(c: FiniteComplex, i: int) -> ModuleShape:
    Z = integers()
    kgens, lvecs = _cycles_and_boundaries(c, i)
    if not kgens:
        return ModuleShape(0)
    g = c.term(i).gens
    solver = IntSolver([[kgens[s][k] for s in range(len(kgens))] for k in range(g)])
    rel_in_k = []
    for l in lvecs:
        z = solver.solve(l)
        if z is None:
            raise ArithmeticError("boundary image escapes the cycle lattice")
        rel_in_k.append([int(x) for x in z])
    return module_from_relations(Z, len(kgens), rel_in_k)


def _quotient_basis_rational(term: PresentedModule):
    """Row-reduce relations; returns (pivot cols, reduced rows)."""
    from fractions import Fraction

    rows = [[Fraction(v) for v in r] for r in term.rels]
    pivots = []
    rank = 0
    for j in range(term.gens):
        piv = None
        for r in range(rank, len(rows)):
            if rows[r][j] != 0:
                piv = r
                break
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = Fraction(1) / rows[rank][j]
        rows[rank] = [x * inv for x in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][j] != 0:
                f = rows[r][j]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        pivots.append(j)
        rank += 1
    return pivots, rows[:rank]


def _reduce_vec_rational(vec, pivots, rows):
    from fractions import Fraction

    v = [Fraction(x) for x in vec]
    for r, j in enumerate(pivots):
        if v[j] != 0:
            f = v[j]
            v = [x - f * y for x, y in zip(v, rows[r])]
    return v


def _homology_rational(c: FiniteComplex, i: int) -> ModuleShape:
    from .exactalg import _rank_rational

    def induced(src: PresentedModule, tgt: PresentedModule, mat):
        piv_s, _ = _quotient_basis_rational(src)
        piv_t, rows_t = _quotient_basis_rational(tgt)
        free_s = [j for j in range(src.gens) if j not in piv_s]
        free_t = [j for j in range(tgt.gens) if j not in piv_t]
        out = []
        for j in free_s:
            col = [mat[k][j] for k in range(tgt.gens)]
            red = _reduce_vec_rational(col, piv_t, rows_t)
            out.append([red[k] for k in free_t])
        return [[out[j][k] for j in range(len(free_s))] for k in range(len(free_t))]

    def rank(m):
        if not m or not m[0]:
            return 0
        return _rank_rational(IntMatrix(c.ring, m))

    t = c.term(i)
    piv, _ = _quotient_basis_rational(t)
    dim = t.gens - len(piv)
    rk_out = rank(induced(t, c.term(i + 1), c.map(i)))
    rk_in = rank(induced(c.term(i - 1), t, c.map(i - 1)))
    return ModuleShape(dim - rk_out - rk_in)


# ---------------------------------------------------------------------------
# Maps of complexes, cones, quasi-isomorphisms


class ComplexMap:
    """Degreewise map between two complexes over the same ring."""

    def __init__(self, source: FiniteComplex, target: FiniteComplex, components: dict):
        if source.ring != target.ring:
            raise ValueError("ring mismatch")
        self.ring = source.ring
        self.source = source
        self.target = target
        self.components = {}
        for i, m in components.items():
            m = [list(r) for r in m]
            rows, cols = target.term(i).gens, source.term(i).gens
            if len(m) != rows or any(len(r) != cols for r in m):
                raise ValueError(f"component at degree {i} must be {rows}x{cols}")
            self.components[i] = [[self.ring.normalize(v) for v in r] for r in m]

    def component(self, i: int):
        if i in self.components:
            return self.components[i]
        rows = self.target.term(i).gens
        cols = self.source.term(i).gens
        return [[self.ring.zero()] * cols for _ in range(rows)]

    def commutes(self) -> bool:
        lo = min(self.source.lo, self.target.lo)
        hi = max(self.source.hi, self.target.hi)
        for i in range(lo, hi + 1):
            cols = self.source.term(i).gens
            left = _mat_mul(self.ring, self.component(i + 1), self.source.map(i),
                            cols=cols)
            right = _mat_mul(self.ring, self.target.map(i), self.component(i),
                             cols=cols)
            tgt = self.target.term(i + 1)
            for j in range(self.source.term(i).gens):
                col = [self.ring.sub(right[k][j], left[k][j]) for k in range(tgt.gens)]
                if not in_row_span(self.ring, [list(r) for r in tgt.rels], col):
                    return False
        return True


def identity_map(c: FiniteComplex) -> ComplexMap:
    comps = {}
    for i in c.degrees():
        g = c.term(i).gens
        comps[i] = [[c.ring.one() if a == b else c.ring.zero() for b in range(g)]
                    for a in range(g)]
    return ComplexMap(c, c, comps)


def mapping_cone(f: ComplexMap) -> FiniteComplex:
    """Cone with differential [[-d_src, 0], [-f, d_tgt]] on S^{k+1} (+) T^k."""
    ring = f.ring
    src, tgt = f.source, f.target
    lo = min(src.lo - 1, tgt.lo)
    hi = max(src.hi - 1, tgt.hi)
    terms = []
    for k in range(lo, hi + 1):
        s, t = src.term(k + 1), tgt.term(k)
        gens = s.gens + t.gens
        rels = [list(r) + [ring.zero()] * t.gens for r in s.rels]
        rels += [[ring.zero()] * s.gens + list(r) for r in t.rels]
        terms.append(PresentedModule(ring, gens, tuple(tuple(r) for r in rels)))
    maps = []
    for k in range(lo, hi):
        s0, t0 = src.term(k + 1), tgt.term(k)
        s1, t1 = src.term(k + 2), tgt.term(k + 1)
        ds = src.map(k + 1)
        dt = tgt.map(k)
        fc = f.component(k + 1)
        m = []
        for a in range(s1.gens):
            m.append([ring.neg(ds[a][b]) for b in range(s0.gens)] + [ring.zero()] * t0.gens)
        for a in range(t1.gens):
            m.append([ring.neg(fc[a][b]) for b in range(s0.gens)] +
                     [dt[a][b] for b in range(t0.gens)])
        maps.append(m)
    return FiniteComplex(ring, lo, terms, maps)


def is_quasi_iso(f: ComplexMap, degree_range: tuple[int, int]) -> bool:
    """H^k(f) bijective for k in [a, b], via cone acyclicity in [a-1, b]."""
    if not f.commutes():
        raise ValueError("map does not commute with the boundaries")
    cone = mapping_cone(f)
    a, b = degree_range
    for k in range(a - 1, b + 1):
        if not homology(cone, k).is_zero():
            return False
    return True


def homology_map_bijective(f: ComplexMap, k: int) -> bool:
    """Whether H^k(f) is an isomorphism, by a direct lattice computation.

    Unlike the cone criterion this is insensitive to what happens above
    degree k, which matters for complexes cut off at a finite cosimplicial
    or wedge range.  Integer and Z/N coefficients only.
    """
    ring = f.ring
    if ring.kind == "Q":
        return _rational_induced_iso(f, k)
    Z = integers()
    ks, ls = _cycles_and_boundaries(f.source, k)
    kt, lt = _cycles_and_boundaries(f.target, k)
    if not ks and not kt:
        return True
    gs = f.source.term(k).gens
    gt = f.target.term(k).gens
    comp = [[int(v) for v in r] for r in f.component(k)]
    ktsolver = IntSolver([[kt[s][j] for s in range(len(kt))] for j in range(gt)]) \
        if kt else None
    # image of each source cycle generator, in target cycle coordinates
    fcols = []
    for gen in ks:
        v = [sum(comp[r][j] * gen[j] for j in range(gs)) for r in range(gt)]
        z = ktsolver.solve(v) if ktsolver else ([] if all(x == 0 for x in v) else None)
        if z is None:
            return False
        fcols.append([int(x) for x in z])
    lt_in_k = []
    for l in lt:
        z = ktsolver.solve(l) if ktsolver else []
        if z is None:
            raise ArithmeticError("boundary escapes the cycle lattice")
        lt_in_k.append([int(x) for x in z])
    ls_in_k = []
    kssolver = IntSolver([[ks[s][j] for s in range(len(ks))] for j in range(gs)]) \
        if ks else None
    for l in ls:
        z = kssolver.solve(l) if kssolver else []
        if z is None:
            raise ArithmeticError("boundary escapes the cycle lattice")
        ls_in_k.append([int(x) for x in z])
    nt, ns = len(kt), len(ks)
    # surjective: every target cycle is an image plus a boundary
    bigsolver = IntSolver([[fcols[s][r] for s in range(ns)] +
                           [lt_in_k[q][r] for q in range(len(lt_in_k))]
                           for r in range(nt)])
    for i in range(nt):
        e = [1 if r == i else 0 for r in range(nt)]
        if bigsolver.solve(e) is None:
            return False
    # injective: kernel of (F mod boundaries) is contained in the boundaries
    stacked = IntMatrix(Z, [[fcols[s][r] for s in range(ns)] +
                            [-lt_in_k[q][r] for q in range(len(lt_in_k))]
                            for r in range(nt)]) if nt else None
    if nt:
        kern = kernel_integer(stacked)
        candidates = [v[:ns] for v in kern]
    else:
        candidates = [[1 if a == b else 0 for a in range(ns)] for b in range(ns)]
    if ls_in_k:
        lssolver = IntSolver([[ls_in_k[q][r] for q in range(len(ls_in_k))]
                              for r in range(ns)])
    else:
        lssolver = None
    for x in candidates:
        if all(v == 0 for v in x):
            continue
        if lssolver is None:
            return False
        if lssolver.solve(x) is None:
            return False
    return True


def homology_map_equal(f: ComplexMap, g: ComplexMap, k: int) -> bool:
    """Whether H^k(f) = H^k(g): the difference sends cycles to boundaries."""
    if f.source is not g.source or f.target is not g.target:
        raise ValueError("maps must share source and target")
    ring = f.ring
    if ring.kind == "Q":
        raise NotImplementedError("rational homology map comparison")
    Z = integers()
    ks, _ = _cycles_and_boundaries(f.source, k)
    _, lt = _cycles_and_boundaries(f.target, k)
    gs = f.source.term(k).gens
    gt = f.target.term(k).gens
    fc = f.component(k)
    gc = g.component(k)
    diff = [[int(fc[a][b]) - int(gc[a][b]) for b in range(gs)] for a in range(gt)]
    ltsolver = IntSolver([[lt[q][r] for q in range(len(lt))] for r in range(gt)]) \
        if lt else None
    for gen in ks:
        v = [sum(diff[r][j] * gen[j] for j in range(gs)) for r in range(gt)]
        if all(x == 0 for x in v):
            continue
        if ltsolver is None:
            return False
        if ltsolver.solve(v) is None:
            return False
    return True


def _rational_induced_iso(f: ComplexMap, k: int) -> bool:
    from fractions import Fraction

    def cycle_space(c, i):
        piv, rows = _quotient_basis_rational(c.term(i))
        free = [j for j in range(c.term(i).gens) if j not in piv]
        # induced differential on quotient coordinates
        mat = c.map(i)
        piv_t, rows_t = _quotient_basis_rational(c.term(i + 1))
        free_t = [j for j in range(c.term(i + 1).gens) if j not in piv_t]
        dmat = []
        for j in free:
            col = [mat[r][j] for r in range(c.term(i + 1).gens)]
            red = _reduce_vec_rational(col, piv_t, rows_t)
            dmat.append([red[t] for t in free_t])
        # kernel basis of the induced map
        rowsm = [[dmat[j][t] for j in range(len(free))] for t in range(len(free_t))]
        kern = _kernel_rational(rowsm, len(free))
        return free, piv, rows, kern

    def boundaries(c, i, free, piv, rows):
        mat = c.map(i - 1)
        out = []
        for j in range(c.term(i - 1).gens):
            col = [mat[r][j] for r in range(c.term(i).gens)]
            red = _reduce_vec_rational(col, piv, rows)
            out.append([red[t] for t in free])
        return out

    sfree, spiv, srows, skern = cycle_space(f.source, k)
    tfree, tpiv, trows, tkern = cycle_space(f.target, k)
    sbound = boundaries(f.source, k, sfree, spiv, srows)
    tbound = boundaries(f.target, k, tfree, tpiv, trows)
    from .exactalg import _rank_rational, IntMatrix as IM, rationals

    Q = rationals()

    def dim_quot(kern, bound):
        if not kern:
            return 0
        rows = [list(v) for v in kern]
        rk_k = _rank_rational(IM(Q, rows)) if rows else 0
        rows2 = rows + [list(v) for v in bound]
        rk_b = _rank_rational(IM(Q, [list(v) for v in bound])) if bound else 0
        # boundaries lie inside cycles, so the quotient dimension is
        return rk_k - rk_b

    hs = dim_quot(skern, sbound)
    ht = dim_quot(tkern, tbound)
    if hs != ht:
        return False
    # rank of the induced map: f(cycles) + boundaries modulo boundaries
    comp = f.component(k)
    imgs = []
    for v in skern:
        full = [Fraction(0)] * f.source.term(k).gens
        for idx, j in enumerate(sfree):
            full[j] = v[idx]
        col = [sum(comp[r][j] * full[j] for j in range(len(full)))
               for r in range(f.target.term(k).gens)]
        red = _reduce_vec_rational(col, tpiv, trows)
        imgs.append([red[t] for t in tfree])
    all_rows = imgs + [list(v) for v in tbound]
    rk_all = _rank_rational(IM(Q, all_rows)) if all_rows else 0
    rk_b = _rank_rational(IM(Q, [list(v) for v in tbound])) if tbound else 0
    return (rk_all - rk_b) == ht


def _kernel_rational(rows, ncols):
    """Kernel basis of the matrix given by rows (rational Gauss)."""
    from fractions import Fraction

    a = [[Fraction(v) for v in r] for r in rows]
    m = len(a)
    pivots = []
    rank = 0
    for j in range(ncols):
        piv = None
        for i in range(rank, m):
            if a[i][j] != 0:
                piv = i
                break
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        inv = Fraction(1) / a[rank][j]
        a[rank] = [x * inv for x in a[rank]]
        for i in range(m):
            if i != rank and a[i][j] != 0:
                fqq = a[i][j]
                a[i] = [x - fqq * y for x, y in zip(a[i], a[rank])]
        pivots.append(j)
        rank += 1
    free = [j for j in range(ncols) if j not in pivots]
    out = []
    for j in free:
        v = [Fraction(0)] * ncols
        v[j] = Fraction(1)
        for i, pj in enumerate(pivots):
            v[pj] = -a[i][j]
        out.append(v)
    return out
