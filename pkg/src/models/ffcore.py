"""
Finite field core - arithmetic in F_p and F_{p^2}, the quadratic character,
discrete logarithms and Gaussian integers used by every counting engine.
"""
from fractions import Fraction
from functools import lru_cache
from typing import List, Sequence, Tuple, Union

import numpy as np
from sympy import isprime
from sympy.ntheory import primitive_root

from src.utils.errors import DomainError

Rational = Union[int, Fraction]


class FieldCtx:
    """
    Immutable context for a fixed odd prime p.

    Holds the quadratic-character table, the least primitive root with its
    discrete-log table, and the nonresidue d used to model F_{p^2} = F_p[s]/(s^2 - d).
    """

    def __init__(self, p: int):
        self.p = p

        squares = np.zeros(p, dtype=bool)
        squares[(np.arange(1, p, dtype=np.int64) ** 2) % p] = True
        self.sqtable = np.where(squares, 1, -1).astype(np.int8)
        self.sqtable[0] = 0
        self.sqtable.setflags(write=False)

        self.g = int(primitive_root(p))
        dlog = np.full(p, -1, dtype=np.int64)
        powers = np.empty(p - 1, dtype=np.int64)
        value = 1
        for k in range(p - 1):
            powers[k] = value
            dlog[value] = k
            value = value * self.g % p
        self.dlog = dlog
        self.powers = powers
        self.dlog.setflags(write=False)
        self.powers.setflags(write=False)

        self.nonresidue = next(x for x in range(2, p) if self.sqtable[x] == -1)

    def __repr__(self):
        return f"FieldCtx(p={self.p})"

    def legendre(self, x: int) -> int:
        """Quadratic character of x (any integer) modulo p."""
        return int(self.sqtable[x % self.p])

    def inv(self, x: int) -> int:
        """Multiplicative inverse modulo p."""
        x %= self.p
        if x == 0:
            raise DomainError(f"0 has no inverse modulo {self.p}")
        return pow(x, self.p - 2, self.p)

    def reduce(self, value: Rational) -> int:
        """
        Reduce an integer or rational constant to its residue in [0, p).

        Raises:
            DomainError: if p divides the denominator
        """
        value = Fraction(value)
        if value.denominator % self.p == 0:
            raise DomainError(f"denominator {value.denominator} is divisible by p={self.p}")
        return value.numerator % self.p * self.inv(value.denominator) % self.p

    def reduce_matrix(self, rows: Sequence[Sequence[Rational]]) -> np.ndarray:
        """Reduce a rational matrix entrywise to an int64 residue array."""
        return np.array([[self.reduce(x) for x in row] for row in rows], dtype=np.int64).reshape(len(rows), -1)


@lru_cache(maxsize=64)
def make_field_ctx(p: int) -> FieldCtx:
    """
    Build (or fetch the cached) context for an odd prime.

    Args:
        p: odd prime with 3 <= p <= 2^31

    Returns:
        FieldCtx for p
    """
    if not isinstance(p, (int, np.integer)) or isinstance(p, bool):
        raise DomainError(f"p must be an integer, got {p!r}")
    p = int(p)
    if p < 3 or p > 2**31:
        raise DomainError(f"p={p} outside supported range 3..2^31")
    if p % 2 == 0 or not isprime(p):
        raise DomainError(f"p={p} is not an odd prime")
    return FieldCtx(p)


def legendre(ctx: FieldCtx, x: int) -> int:
    """phi(x) in {+1, 0, -1}, by table lookup."""
    return ctx.legendre(x)


# --- linear algebra modulo p -------------------------------------------------

def row_reduce_mod(ctx: FieldCtx, rows) -> Tuple[np.ndarray, List[int]]:
    """Reduced row echelon form mod p; returns (rref, pivot columns)."""
    p = ctx.p
    m = np.array(rows, dtype=np.int64).reshape(len(rows), -1) % p
    pivots = []
    r = 0
    for c in range(m.shape[1]):
        nz = [i for i in range(r, m.shape[0]) if m[i, c] != 0]
        if not nz:
            continue
        m[[r, nz[0]]] = m[[nz[0], r]]
        m[r] = m[r] * ctx.inv(int(m[r, c])) % p
        for i in range(m.shape[0]):
            if i != r and m[i, c] != 0:
                m[i] = (m[i] - m[i, c] * m[r]) % p
        pivots.append(c)
        r += 1
        if r == m.shape[0]:
            break
    return m, pivots


def rank_mod(ctx: FieldCtx, rows) -> int:
    """Rank of an integer matrix modulo p."""
    if len(rows) == 0:
        return 0
    return len(row_reduce_mod(ctx, rows)[1])


def nullspace_mod(ctx: FieldCtx, rows, ncols: int) -> np.ndarray:
    """
    Basis of {x : rows . x = 0} over F_p.

    Returns:
        array of shape (ncols, ncols - rank); columns are basis vectors
    """
    p = ctx.p
    if len(rows) == 0:
        return np.eye(ncols, dtype=np.int64)
    rref, pivots = row_reduce_mod(ctx, rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = np.zeros((ncols, len(free)), dtype=np.int64)
    for k, f in enumerate(free):
        basis[f, k] = 1
        for i, c in enumerate(pivots):
            basis[c, k] = (-rref[i, f]) % p
    return basis


# --- F_{p^2} -----------------------------------------------------------------

class Fp2Elem:
    """Element a + b*s of F_p[s]/(s^2 - d)."""

    __slots__ = ('a', 'b')

    def __init__(self, a: int, b: int = 0):
        self.a = a
        self.b = b

    def __eq__(self, other):
        return isinstance(other, Fp2Elem) and (self.a, self.b) == (other.a, other.b)

    def __hash__(self):
        return hash((self.a, self.b))

    def __repr__(self):
        return f"Fp2Elem({self.a}, {self.b})"


def fp2_mul(ctx: FieldCtx, x: Fp2Elem, y: Fp2Elem) -> Fp2Elem:
    """(x.a + x.b sqrt(d)) (y.a + y.b sqrt(d)) with d the fixed nonresidue."""
    p, d = ctx.p, ctx.nonresidue
    return Fp2Elem((x.a * y.a + d * x.b * y.b) % p, (x.a * y.b + x.b * y.a) % p)


def fp2_norm(ctx: FieldCtx, x: Fp2Elem) -> int:
    """(a + bs)(a - bs) = a^2 - d b^2, an element of F_p."""
    return (x.a * x.a - ctx.nonresidue * x.b * x.b) % ctx.p


def frobenius(ctx: FieldCtx, x: Fp2Elem) -> Fp2Elem:
    """x^p; since d is a nonresidue, s^p = d^((p-1)/2) s = -s."""
    return Fp2Elem(x.a % ctx.p, (-x.b) % ctx.p)


class Fp2Tables:
    """
    Vectorised F_{p^2} arithmetic on pairs of residue arrays (a, b), with
    exp/log tables over the index e = a + b*p.
    """

    def __init__(self, ctx: FieldCtx):
        self.ctx = ctx
        p = ctx.p
        self.q = p * p
        self.order = self.q - 1

        # find a generator of F_{p^2}^*
        factors = _prime_factors(self.order)
        for e in range(p, self.q):
            g = Fp2Elem(e % p, e // p)
            if all(_fp2_pow(ctx, g, self.order // f) != Fp2Elem(1, 0) for f in factors):
                break
        self.generator = g

        log = np.full(self.q, -1, dtype=np.int64)
        exp_a = np.empty(self.order, dtype=np.int64)
        exp_b = np.empty(self.order, dtype=np.int64)
        x = Fp2Elem(1, 0)
        for k in range(self.order):
            exp_a[k], exp_b[k] = x.a, x.b
            log[x.a + p * x.b] = k
            x = fp2_mul(ctx, x, g)
        self.log_table = log
        self.exp_a = exp_a
        self.exp_b = exp_b

    def mul(self, a1, b1, a2, b2):
        """Elementwise product of a1 + b1 sqrt(d) and a2 + b2 sqrt(d); works on arrays."""
        p, d = self.ctx.p, self.ctx.nonresidue
        return (a1 * a2 + d * (b1 * b2 % p)) % p, (a1 * b2 + b1 * a2) % p

    def log(self, a, b):
        """Discrete log of nonzero elements (entries for 0 are -1)."""
        return self.log_table[a + self.ctx.p * b]

    def exp(self, k):
        """Components of g^k for the tabulated generator g."""
        k = np.asarray(k) % self.order
        return self.exp_a[k], self.exp_b[k]

    def inv_scalar(self, x: Fp2Elem) -> Fp2Elem:
        k = int(self.log_table[x.a + self.ctx.p * x.b])
        if k < 0:
            raise DomainError("0 has no inverse in F_{p^2}")
        j = (-k) % self.order
        return Fp2Elem(int(self.exp_a[j]), int(self.exp_b[j]))


@lru_cache(maxsize=32)
def fp2_tables(ctx: FieldCtx) -> Fp2Tables:
    """Log and exp tables of F_{p^2}^*."""
    return Fp2Tables(ctx)


def _fp2_pow(ctx: FieldCtx, x: Fp2Elem, k: int) -> Fp2Elem:
    result = Fp2Elem(1, 0)
    while k:
        if k & 1:
            result = fp2_mul(ctx, result, x)
        x = fp2_mul(ctx, x, x)
        k >>= 1
    return result


def _prime_factors(n: int) -> List[int]:
    factors, d = [], 2
    while d * d <= n:
        if n % d == 0:
            factors.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        factors.append(n)
    return factors


# --- Gaussian integers -------------------------------------------------------

class GaussInt:
    """Gaussian integer a + b*i with exact integer arithmetic."""

    __slots__ = ('a', 'b')

    def __init__(self, a: int, b: int = 0):
        self.a = a
        self.b = b

    def __mul__(self, other: 'GaussInt') -> 'GaussInt':
        return GaussInt(self.a * other.a - self.b * other.b, self.a * other.b + self.b * other.a)

    def __pow__(self, k: int) -> 'GaussInt':
        result = GaussInt(1, 0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        return isinstance(other, GaussInt) and (self.a, self.b) == (other.a, other.b)

    def __hash__(self):
        return hash((self.a, self.b))

    def __repr__(self):
        return f"GaussInt({self.a}, {self.b})"

    def conjugate(self) -> 'GaussInt':
        return GaussInt(self.a, -self.b)

    def norm(self) -> int:
        return self.a * self.a + self.b * self.b

    def trace(self) -> int:
        return 2 * self.a

    def divisible_by(self, other: 'GaussInt') -> bool:
        n = other.norm()
        q = self * other.conjugate()
        return q.a % n == 0 and q.b % n == 0


PRIMARY_MODULUS = GaussInt(2, 2)


@lru_cache(maxsize=None)
def sum_of_two_squares(p: int) -> GaussInt:
    """
    Primary decomposition p = a^2 + b^2 with a + bi = 1 mod (2 + 2i).

    The congruence fixes a; b is returned positive. Consumers use only traces
    and even powers of b, which do not depend on its sign.

    Args:
        p: prime with p = 1 mod 4

    Returns:
        GaussInt(a, b)
    """
    if p % 4 != 1 or not isprime(p):
        raise DomainError(f"p={p} is not a prime congruent to 1 mod 4")
    a = 0
    while a * a <= p:
        b2 = p - a * a
        b = int(np.sqrt(b2))
        while b * b > b2:
            b -= 1
        while (b + 1) * (b + 1) <= b2:
            b += 1
        if b * b == b2:
            for sa in (a, -a):
                if GaussInt(sa - 1, b).divisible_by(PRIMARY_MODULUS):
                    return GaussInt(sa, b)
        a += 1
    raise DomainError(f"no primary decomposition found for p={p}")
