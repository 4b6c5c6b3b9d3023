"""Exact arithmetic in the supported base rings and the matrix normal forms
used by every homology computation.

Supported bases: the integers, the rationals, Z/N, and Z/p^e carrying the
standard divided powers on (p).  All matrix work is exact: arbitrary
precision integers over Z, ``fractions.Fraction`` over Q, and canonical
residues in [0, N) over Z/N.  Kernels, images and quotients over Z go
through Smith normal form; row modules over Z/N (not a domain) go through
the Howell canonical form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

Scalar = "int | Fraction"


def xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Extended gcd: returns (g, s, t) with s*a + t*b = g and g >= 0."""
    x, nx = 1, 0
    y, ny = 0, 1
    g, ng = a, b
    while ng:
        q = g // ng
        x, nx = nx, x - q * nx
        y, ny = ny, y - q * ny
        g, ng = ng, g - q * ng
    if g < 0:
        x, y, g = -x, -y, -g
    return g, x, y


def _p_adic_valuation(n: int, p: int) -> int:
    v = 0
    while n % p == 0 and n:
        n //= p
        v += 1
    return v


def factorial_valuation(n: int, p: int) -> int:
    """Legendre's formula: v_p(n!)."""
    v, q = 0, p
    while q <= n:
        v += n // q
        q *= p
    return v


@dataclass(frozen=True)
class BaseDpRing:
    """A base ring together with its divided power structure.

    kind is one of 'Z', 'Q', 'ZmodN'.  The pd structure is 'trivial'
    (ideal (0)) or 'standard-p' (Z/p^e with divided powers p^k/k! on (p)).
    """

    kind: str
    modulus: int = 0
    pd_structure: str = "trivial"
    prime: int = 0

    def __post_init__(self):
        if self.kind not in ("Z", "Q", "ZmodN"):
            raise ValueError(f"unknown ring kind {self.kind!r}")
        if self.kind == "ZmodN":
            if self.modulus < 2:
                raise ValueError("modulus must be >= 2")
        if self.pd_structure == "standard-p":
            if self.kind != "ZmodN":
                raise ValueError("standard-p divided powers require Z/p^e")
            p, n = self.prime, self.modulus
            if p < 2 or any(p % q == 0 for q in range(2, p)):
                raise ValueError("declared prime is not prime")
            while n % p == 0:
                n //= p
            if n != 1:
                raise ValueError("standard-p requires modulus a power of the prime")
        elif self.pd_structure != "trivial":
            raise ValueError(f"unknown pd structure {self.pd_structure!r}")

    # -- element arithmetic ------------------------------------------------

    def normalize(self, v):
        if self.kind == "Z":
            return int(v)
        if self.kind == "Q":
            return v if isinstance(v, Fraction) else Fraction(v)
        return int(v) % self.modulus

    def add(self, a, b):
        return self.normalize(a + b)

    def sub(self, a, b):
        return self.normalize(a - b)

    def mul(self, a, b):
        return self.normalize(a * b)

    def neg(self, a):
        return self.normalize(-a)

    def zero(self):
        return Fraction(0) if self.kind == "Q" else 0

    def one(self):
        return Fraction(1) if self.kind == "Q" else 1

    def is_zero(self, a) -> bool:
        return self.normalize(a) == 0

    def is_unit(self, a) -> bool:
        a = self.normalize(a)
        if self.kind == "Z":
            return a in (1, -1)
        if self.kind == "Q":
            return a != 0
        return gcd(a, self.modulus) == 1

    def inverse(self, a):
        a = self.normalize(a)
        if self.kind == "Q":
            return Fraction(1) / a
        if self.kind == "Z":
            if a in (1, -1):
                return a
            raise ZeroDivisionError(f"{a} is not a unit in Z")
        g, s, _ = xgcd(a, self.modulus)
        if g != 1:
            raise ZeroDivisionError(f"{a} is not a unit mod {self.modulus}")
        return s % self.modulus

    def from_int(self, n: int):
        return self.normalize(Fraction(n) if self.kind == "Q" else n)

    # -- torsion bookkeeping ----------------------------------------------

    def torsion_modulus(self, m: int) -> int:
        """Effective modulus of A/(m): 0 means no constraint, 1 kills all.

        Over Z this is m itself, over Z/N it is gcd(m, N), over Q any
        nonzero m is a unit so the quotient is 0.
        """
        if m == 0:
            return 0
        if self.kind == "Z":
            return m
        if self.kind == "Q":
            return 1
        g = gcd(m, self.modulus)
        return g if g != self.modulus else 0

    def reduce_mod(self, v, m: int):
        """Canonical representative of v modulo the ideal (m)."""
        eff = self.torsion_modulus(m)
        if eff == 0:
            return self.normalize(v)
        if eff == 1:
            return self.zero()
        return int(v) % eff

    def divisible_by(self, v, m: int) -> bool:
        """Whether v lies in the ideal (m) of this ring."""
        return self.is_zero(self.reduce_mod(v, m)) if m else self.is_zero(v)

    # -- standard divided powers on (p) -------------------------------------

    def gamma_of_p(self, k: int) -> int:
        """gamma_k(p) = p^k/k! in Z/p^e for the standard structure."""
        if self.pd_structure != "standard-p":
            raise ValueError("ring has no divided powers on a prime")
        if k == 0:
            return 1 % self.modulus
        p = self.prime
        v = factorial_valuation(k, p)
        unit = 1
        fact = 1
        for i in range(2, k + 1):
            fact *= i
        fact //= p ** v
        g, s, _ = xgcd(fact % self.modulus, self.modulus)
        return (pow(p, k - v, self.modulus) * (s % self.modulus)) % self.modulus

    def __str__(self):
        if self.kind == "Z":
            return "Z"
        if self.kind == "Q":
            return "Q"
        tag = f"Z/{self.modulus}"
        if self.pd_structure == "standard-p":
            tag += f" (standard pd on ({self.prime}))"
        return tag


def integers() -> BaseDpRing:
    return BaseDpRing("Z")


def rationals() -> BaseDpRing:
    return BaseDpRing("Q")


def integers_mod(n: int) -> BaseDpRing:
    return BaseDpRing("ZmodN", modulus=n)


def prime_power_with_pd(p: int, e: int) -> BaseDpRing:
    return BaseDpRing("ZmodN", modulus=p**e, pd_structure="standard-p", prime=p)


# ---------------------------------------------------------------------------
# Matrices


class IntMatrix:
    """Dense exact matrix over a declared base ring."""

    __slots__ = ("ring", "rows", "cols", "entries")

    def __init__(self, ring: BaseDpRing, entries):
        self.ring = ring
        self.entries = [[ring.normalize(v) for v in row] for row in entries]
        self.rows = len(self.entries)
        self.cols = len(self.entries[0]) if self.entries else 0
        if any(len(r) != self.cols for r in self.entries):
            raise ValueError("ragged matrix")

    @classmethod
    def identity(cls, ring: BaseDpRing, n: int) -> "IntMatrix":
        one, zero = ring.one(), ring.zero()
        return cls(ring, [[one if i == j else zero for j in range(n)] for i in range(n)])

    @classmethod
    def zero(cls, ring: BaseDpRing, rows: int, cols: int) -> "IntMatrix":
        z = ring.zero()
        return cls(ring, [[z] * cols for _ in range(rows)])

    def copy(self) -> "IntMatrix":
        return IntMatrix(self.ring, [row[:] for row in self.entries])

    def __getitem__(self, ij):
        return self.entries[ij[0]][ij[1]]

    def __eq__(self, other):
        return (
            isinstance(other, IntMatrix)
            and self.ring == other.ring
            and self.entries == other.entries
        )

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise ValueError("dimension mismatch")
        R = self.ring
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = sum(self.entries[i][k] * other.entries[k][j] for k in range(self.cols))
                row.append(R.normalize(acc))
            out.append(row)
        return IntMatrix(R, out)

    def apply(self, vec):
        if len(vec) != self.cols:
            raise ValueError("dimension mismatch")
        R = self.ring
        return [R.normalize(sum(self.entries[i][k] * vec[k] for k in range(self.cols)))
                for i in range(self.rows)]

    def transpose(self) -> "IntMatrix":
        return IntMatrix(self.ring, [[self.entries[i][j] for i in range(self.rows)]
                                     for j in range(self.cols)])

    def is_zero(self) -> bool:
        return all(self.ring.is_zero(v) for row in self.entries for v in row)

    def __repr__(self):
        return f"IntMatrix({self.ring}, {self.entries})"


def det_bareiss(entries) -> int:
    """Exact determinant of a square integer matrix (fraction-free Bareiss)."""
    a = [row[:] for row in entries]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _det_fraction(entries) -> Fraction:
    a = [[Fraction(v) for v in row] for row in entries]
    n = len(a)
    det = Fraction(1)
    for k in range(n):
        piv = None
        for i in range(k, n):
            if a[i][k] != 0:
                piv = i
                break
        if piv is None:
            return Fraction(0)
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            det = -det
        det *= a[k][k]
        inv = Fraction(1) / a[k][k]
        for i in range(k + 1, n):
            f = a[i][k] * inv
            if f:
                for j in range(k, n):
                    a[i][j] -= f * a[k][j]
    return det


def is_invertible(m: IntMatrix) -> bool:
    """Whether a square matrix is invertible over its ring."""
    if m.rows != m.cols:
        return False
    if m.ring.kind == "Q":
        return _det_fraction(m.entries) != 0
    d = det_bareiss([[int(v) for v in row] for row in m.entries])
    if m.ring.kind == "Z":
        return d in (1, -1)
    return gcd(d % m.ring.modulus, m.ring.modulus) == 1


# ---------------------------------------------------------------------------
# Smith normal form over Z


def smith_normal_form(m: IntMatrix) -> tuple[IntMatrix, IntMatrix, IntMatrix]:
    """Smith normal form over Z: returns (D, U, V) with U*m*V = D.

    The diagonal of D satisfies d1 | d2 | ... with nonnegative entries,
    U and V are unimodular.  Pivots are chosen by minimal absolute value
    to limit coefficient growth.
    """
    if m.ring.kind != "Z":
        raise ValueError("Smith normal form requires integer entries")
    A = [[int(v) for v in row] for row in m.entries]
    r, c = m.rows, m.cols
    U = [[1 if i == j else 0 for j in range(r)] for i in range(r)]
    V = [[1 if i == j else 0 for j in range(c)] for i in range(c)]

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(src, dst, q):
        # row dst += q * row src
        Ad, As = A[dst], A[src]
        for k in range(c):
            Ad[k] += q * As[k]
        Ud, Us = U[dst], U[src]
        for k in range(r):
            Ud[k] += q * Us[k]

    def add_col(src, dst, q):
        for row in A:
            row[dst] += q * row[src]
        for row in V:
            row[dst] += q * row[src]

    t = 0
    while t < r and t < c:
        # locate a minimal nonzero pivot in the trailing block; a unit
        # entry is already minimal, so stop scanning at the first one
        piv = None
        best = None
        for i in range(t, r):
            row = A[i]
            for j in range(t, c):
                v = row[j]
                if not v:
                    continue
                if v < 0:
                    v = -v
                if v == 1:
                    best, piv = 1, (i, j)
                    break
                if best is None or v < best:
                    best, piv = v, (i, j)
            if best == 1:
                break
        if piv is None:
            break
        swap_rows(t, piv[0])
        swap_cols(t, piv[1])

        while True:
            # clear column t
            dirty = False
            for i in range(t + 1, r):
                if A[i][t]:
                    q = A[i][t] // A[t][t]
                    add_row(t, i, -q)
                    if A[i][t]:
                        swap_rows(t, i)
                        dirty = True
            # clear row t
            for j in range(t + 1, c):
                if A[t][j]:
                    q = A[t][j] // A[t][t]
                    add_col(t, j, -q)
                    if A[t][j]:
                        swap_cols(t, j)
                        dirty = True
            if not dirty and all(A[i][t] == 0 for i in range(t + 1, r)) \
                    and all(A[t][j] == 0 for j in range(t + 1, c)):
                break
        # enforce divisibility of the pivot into the rest of the block
        p = A[t][t]
        offender = None
        for i in range(t + 1, r):
            for j in range(t + 1, c):
                if A[i][j] % p:
                    offender = i
                    break
            if offender is not None:
                break
        if offender is not None:
            add_row(offender, t, 1)
            continue
        t += 1

    for i in range(min(r, c)):
        if A[i][i] < 0:
            for k in range(c):
                A[i][k] = -A[i][k]
            for k in range(r):
                U[i][k] = -U[i][k]

    ring = m.ring
    return IntMatrix(ring, A), IntMatrix(ring, U), IntMatrix(ring, V)


def diagonal_of(d: IntMatrix) -> list:
    return [d.entries[i][i] for i in range(min(d.rows, d.cols))]


def kernel_integer(m: IntMatrix) -> list[list[int]]:
    """Generators (as columns) of the integer kernel of m."""
    D, U, V = smith_normal_form(m)
    gens = []
    diag = diagonal_of(D)
    for k in range(m.cols):
        dk = diag[k] if k < len(diag) else 0
        if dk == 0:
            gens.append([V.entries[i][k] for i in range(m.cols)])
    return gens


# ---------------------------------------------------------------------------
# Howell form over Z/N


def _unit_lift(b: int, n: int, g: int) -> int:
    """A unit u mod n with u*b = gcd-stabilized pivot; b*g' style helper.

    Given b coprime to n//g, returns a unit u of Z/n with u ≡ b^{-1} mod n//g.
    """
    m = n // g
    if m == 1:
        return 1
    gg, s, _ = xgcd(b % m, m)
    u = s % m
    while gcd(u, n) != 1:
        u += m
    return u % n


def howell_form(m: IntMatrix) -> IntMatrix:
    """Howell canonical form of the row span of m over Z/N.

    Two matrices over Z/N have equal row spans iff their Howell forms are
    equal.  Pivots divide N, rows are sorted by pivot column, entries above
    a pivot p are reduced into [0, p).
    """
    if m.ring.kind != "ZmodN":
        raise ValueError("Howell form requires a Z/N matrix")
    n = m.ring.modulus
    cols = m.cols

    pivots: dict[int, list[int]] = {}

    def leading(row):
        for j, v in enumerate(row):
            if v % n:
                return j
        return None

    def insert(row):
        row = [v % n for v in row]
        j = leading(row)
        while j is not None and j in pivots:
            p = pivots[j]
            a, b = p[j], row[j]
            g, s, t = xgcd(a, b)
            newp = [(s * p[k] + t * row[k]) % n for k in range(cols)]
            newr = [((a // g) * row[k] - (b // g) * p[k]) % n for k in range(cols)]
            pivots[j] = newp
            row = newr
            j = leading(row)
        if j is not None:
            pivots[j] = row
            return j
        return None

    queue = [row[:] for row in m.entries]
    while queue:
        fresh = queue.pop()
        newcol = insert(fresh)
        if newcol is None:
            continue
    # Howell closure: annihilator multiples of each pivot row must stay in span
    changed = True
    while changed:
        changed = False
        for j in sorted(pivots):
            row = pivots[j]
            g = gcd(row[j], n)
            ann = n // g
            tail = [(ann * v) % n for v in row]
            if any(tail):
                before = {k: pivots[k][:] for k in pivots}
                insert(tail)
                if {k: pivots[k] for k in pivots} != before:
                    changed = True
    # normalize pivots to divisors of N and reduce above
    for j in sorted(pivots):
        row = pivots[j]
        g = gcd(row[j], n)
        u = _unit_lift(row[j] // g, n, g)
        pivots[j] = [(u * v) % n for v in row]
        pivots[j][j] = g
    # reduce entries above each pivot; ascending column order stays stable
    # because a pivot row is supported in columns >= its pivot
    for j in sorted(pivots):
        p = pivots[j][j]
        for k in sorted(pivots):
            if k < j and pivots[k][j] % n:
                q = pivots[k][j] // p
                pivots[k] = [(pivots[k][i] - q * pivots[j][i]) % n for i in range(cols)]
    rows = [pivots[j] for j in sorted(pivots)]
    if not rows:
        rows = [[0] * cols] if cols else [[]]
        return IntMatrix(m.ring, rows) if cols else IntMatrix(m.ring, [])
    return IntMatrix(m.ring, rows)


def hermite_row_basis(rows):
    """Triangular integer basis of the row lattice (pivot-per-column).

    Suited to very overdetermined spans: linear in the number of rows.
    Returns a list of rows sorted by pivot column, pivots positive.
    """
    pivots: dict[int, list[int]] = {}
    queue = [list(r) for r in rows]
    while queue:
        row = queue.pop()
        while True:
            lead = next((j for j, x in enumerate(row) if x), None)
            if lead is None:
                break
            if lead not in pivots:
                if row[lead] < 0:
                    row = [-x for x in row]
                pivots[lead] = row
                break
            p = pivots[lead]
            a, b = p[lead], row[lead]
            g, s, t = xgcd(a, b)
            newp = [s * pa + t * rb for pa, rb in zip(p, row)]
            row = [(a // g) * rb - (b // g) * pa for pa, rb in zip(p, row)]
            pivots[lead] = newp
    return [pivots[j] for j in sorted(pivots)]


def integer_span_member(basis_rows, vec) -> bool:
    """Membership of vec in the lattice with Hermite basis basis_rows."""
    v = [int(x) for x in vec]
    for row in basis_rows:
        lead = next(j for j, x in enumerate(row) if x)
        if v[lead]:
            if v[lead] % row[lead]:
                return False
            q = v[lead] // row[lead]
            v = [a - q * b for a, b in zip(v, row)]
    return all(x == 0 for x in v)


def row_member(v, m: IntMatrix) -> bool:
    """Whether row vector v lies in the row span of m (over Z/N or Z)."""
    ring = m.ring
    if ring.kind == "ZmodN":
        h = howell_form(m)
        n = ring.modulus
        v = [x % n for x in v]
        piv = {}
        for row in h.entries:
            for j, val in enumerate(row):
                if val:
                    piv[j] = row
                    break
        for j in range(len(v)):
            if v[j] % n:
                if j not in piv:
                    return False
                p = piv[j][j]
                if v[j] % p:
                    return False
                q = v[j] // p
                v = [(v[k] - q * piv[j][k]) % n for k in range(len(v))]
        return True
    sol = solve_linear(m.transpose(), list(v))
    return sol is not None


def row_span_equal(a: IntMatrix, b: IntMatrix) -> bool:
    return howell_form(a) == howell_form(b)


# ---------------------------------------------------------------------------
# Linear solving


class IntSolver:
    """Factor-once integer solver: one Smith normal form, many right sides."""

    def __init__(self, entries):
        self.rows = len(entries)
        self.cols = len(entries[0]) if entries else 0
        m = IntMatrix(integers(), entries)
        self.D, self.U, self.V = smith_normal_form(m)
        self.diag = diagonal_of(self.D)

    def solve(self, v):
        if len(v) != self.rows:
            raise ValueError("dimension mismatch")
        nz = [(j, int(x)) for j, x in enumerate(v) if x]
        U = self.U.entries
        w = [sum(row[j] * x for j, x in nz) for row in U]
        z = [0] * self.cols
        for i in range(self.rows):
            d = self.diag[i] if i < len(self.diag) else 0
            if d == 0:
                if w[i] != 0:
                    return None
            else:
                if w[i] % d:
                    return None
                if i < self.cols:
                    z[i] = w[i] // d
        V = self.V.entries
        znz = [(j, x) for j, x in enumerate(z) if x]
        return [sum(row[j] * x for j, x in znz) for row in V]


def solve_linear(m: IntMatrix, v):
    """Solve m @ x = v exactly; returns a solution vector or None.

    Over Q: Gaussian elimination.  Over Z: via Smith normal form with
    divisibility checks.  Over Z/N: by lifting to Z with N*I relation
    columns appended.
    """
    if len(v) != m.rows:
        raise ValueError("dimension mismatch")
    ring = m.ring
    if ring.kind == "Q":
        return _solve_rational(m, v)
    if ring.kind == "Z":
        return IntSolver([[int(x) for x in row] for row in m.entries]).solve(v)
    n = ring.modulus
    lifted = [[int(x) for x in row] + [n if i == j else 0 for j in range(m.rows)]
              for i, row in enumerate(m.entries)]
    sol = IntSolver(lifted).solve([int(x) for x in v])
    if sol is None:
        return None
    return [ring.normalize(x) for x in sol[: m.cols]]


def _solve_rational(m: IntMatrix, v):
    rows, cols = m.rows, m.cols
    a = [[Fraction(m.entries[i][j]) for j in range(cols)] + [Fraction(v[i])]
         for i in range(rows)]
    pivots = []
    rank = 0
    for j in range(cols):
        piv = None
        for i in range(rank, rows):
            if a[i][j] != 0:
                piv = i
                break
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        inv = Fraction(1) / a[rank][j]
        a[rank] = [x * inv for x in a[rank]]
        for i in range(rows):
            if i != rank and a[i][j] != 0:
                f = a[i][j]
                a[i] = [x - f * y for x, y in zip(a[i], a[rank])]
        pivots.append(j)
        rank += 1
    for i in range(rank, rows):
        if a[i][cols] != 0:
            return None
    x = [Fraction(0)] * cols
    for i, j in enumerate(pivots):
        x[j] = a[i][cols]
    return x


# ---------------------------------------------------------------------------
# Finitely generated modules


@dataclass(frozen=True)
class ModuleShape:
    """Invariant-factor description of a finitely generated module."""

    free_rank: int
    torsion: tuple[int, ...] = ()

    def is_zero(self) -> bool:
        return self.free_rank == 0 and not self.torsion

    def to_json(self):
        return {"free_rank": self.free_rank, "torsion": list(self.torsion)}

    def __str__(self):
        parts = []
        if self.free_rank == 1:
            parts.append("Z")
        elif self.free_rank > 1:
            parts.append(f"Z^{self.free_rank}")
        parts += [f"Z/{d}" for d in self.torsion]
        return " + ".join(parts) if parts else "0"


def module_from_relations(ring: BaseDpRing, gens: int, rel_rows) -> ModuleShape:
    """Shape of the module on `gens` generators modulo the span of rel_rows.

    Over Z the invariant factors come from Smith normal form; over Z/N the
    ring torsion N*e_i is adjoined and the lifted quotient is decomposed,
    giving the canonical sum of Z/d_i with d_i | N (free rank 0 by
    convention).  Over Q only the dimension is meaningful.
    """
    rel_rows = [list(r) for r in rel_rows]
    if any(len(r) != gens for r in rel_rows):
        raise ValueError("relation rows must have `gens` columns")
    if ring.kind == "Q":
        if not rel_rows:
            return ModuleShape(gens)
        mat = IntMatrix(ring, rel_rows)
        rank = _rank_rational(mat)
        return ModuleShape(gens - rank)
    rows = [[int(x) for x in r] for r in rel_rows]
    if ring.kind == "ZmodN":
        n = ring.modulus
        rows += [[n if i == j else 0 for j in range(gens)] for i in range(gens)]
    if not rows:
        return ModuleShape(gens)
    D, _, _ = smith_normal_form(IntMatrix(integers(), rows))
    diag = diagonal_of(D)
    torsion = tuple(d for d in diag if d not in (0, 1))
    nonzero = sum(1 for d in diag if d != 0)
    return ModuleShape(gens - nonzero, torsion)


def _rank_rational(m: IntMatrix) -> int:
    a = [[Fraction(v) for v in row] for row in m.entries]
    rows, cols = m.rows, m.cols
    rank = 0
    for j in range(cols):
        piv = None
        for i in range(rank, rows):
            if a[i][j] != 0:
                piv = i
                break
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        inv = Fraction(1) / a[rank][j]
        a[rank] = [x * inv for x in a[rank]]
        for i in range(rows):
            if i != rank and a[i][j] != 0:
                f = a[i][j]
                a[i] = [x - f * y for x, y in zip(a[i], a[rank])]
        rank += 1
    return rank
