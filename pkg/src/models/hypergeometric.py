"""
Hypergeometric Model - finite-field 3F2 and the level-8 count built from it.

Characters of F_p^* are indexed by j in [0, p-1): chi_j(x) = zeta^(j * dlog(x))
with zeta = exp(2 pi i / (p-1)). Every character, the trivial one included,
vanishes at 0. Character products are kept as integer exponents and only the
final sums are taken in complex floating point.
"""
import time
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Dict

import numpy as np
import pandas as pd

from config.config import config
from src.data.models import CountRecord
from src.utils.errors import DomainError, IntegrityError
from src.models.ffcore import FieldCtx, sum_of_two_squares
from src.models.fibrations import EllipticTrace, a_lambda, trace_cubic

BINOM_CONVENTION = 'binom(A, B) = (1/p) sum_x A(x) conj(B)(x - 1); all characters vanish at 0'


class CharacterTable:
    """
    Multiplicative characters of F_p^* as exponents of a primitive (p-1)-th root.

    Attributes:
        ctx: field context
        order: p - 1
        phi_index: index of the quadratic character
        roots: complex powers zeta^e for e in [0, p-1)
    """

    def __init__(self, ctx: FieldCtx):
        self.ctx = ctx
        self.order = ctx.p - 1
        self.phi_index = self.order // 2
        self.roots = np.exp(2j * np.pi * np.arange(self.order) / self.order)

    def __repr__(self):
        return f"CharacterTable(p={self.ctx.p})"

    def _check_index(self, j: int) -> int:
        if not 0 <= j < self.order:
            raise DomainError(f"character index {j} outside 0..{self.order - 1}")
        return j

    def exponent(self, j: int, x: int) -> int:
        """e with chi_j(x) = zeta^e; x must be nonzero modulo p."""
        self._check_index(j)
        x %= self.ctx.p
        if x == 0:
            raise DomainError("characters are not evaluated at 0")
        return j * int(self.ctx.dlog[x]) % self.order

    def value(self, j: int, x: int) -> complex:
        """chi_j(x), with chi_j(0) = 0."""
        if x % self.ctx.p == 0:
            return 0j
        return complex(self.roots[self.exponent(j, x)])

    @cached_property
    def binom_cubes(self) -> np.ndarray:
        """binom(phi chi_j, chi_j)^3 for every j, as a complex array."""
        n = self.order
        j = np.arange(n, dtype=np.int64)[:, None]
        x = np.arange(2, self.ctx.p, dtype=np.int64)[None, :]
        dl_x, dl_x1 = self.ctx.dlog[x], self.ctx.dlog[x - 1]
        exps = (((j + self.phi_index) % n) * dl_x - j * dl_x1) % n
        # exponent multiset per character, one row each
        counts = np.zeros((n, n), dtype=np.int64)
        np.add.at(counts, (np.broadcast_to(j, exps.shape), exps), 1)
        binoms = counts @ self.roots / self.ctx.p
        return binoms ** 3


@lru_cache(maxsize=32)
def character_table(ctx: FieldCtx) -> CharacterTable:
    return CharacterTable(ctx)


@dataclass(frozen=True)
class HyperValue:
    """numerator / p^scale."""
    p: int
    numerator: int
    scale: int = 2

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.p ** self.scale)

    def __float__(self):
        return float(self.as_fraction())


def binom_exponents(table: CharacterTable, A: int, B: int) -> np.ndarray:
    """Multiplicity of each exponent e in p * binom(A, B) = sum_e m_e zeta^e."""
    n, dlog = table.order, table.ctx.dlog
    table._check_index(A)
    table._check_index(B)
    x = np.arange(2, table.ctx.p, dtype=np.int64)
    exps = (A * dlog[x] - B * dlog[x - 1]) % n
    return np.bincount(exps, minlength=n)


def jacobi_binom(table: CharacterTable, A: int, B: int) -> complex:
    """
    Normalized Jacobi sum binom(A, B) = (1/p) sum_x A(x) conj(B)(x - 1).

    Args:
        table: character table for p
        A, B: character indices

    Returns:
        complex value, summed from the exact exponent multiset
    """
    return complex(binom_exponents(table, A, B) @ table.roots) / table.ctx.p


def _round_gate(p: int, value: complex, lam: int) -> int:
    if abs(value.imag) >= config.F32_IMAG_TOL:
        raise IntegrityError(
            f"3F2({lam}) at p={p} has imaginary part {value.imag:.3g}; reduce p for the floating-point path"
        )
    scaled = value.real * p * p
    numerator = int(round(scaled))
    if abs(scaled - numerator) >= config.F32_ROUND_TOL:
        raise IntegrityError(
            f"p^2 * 3F2({lam}) at p={p} is {scaled:.6f}, not an integer; reduce p for the floating-point path"
        )
    return numerator


def f32(table: CharacterTable, lam: int) -> HyperValue:
    """
    3F2(lambda) = p/(p-1) sum_chi binom(phi chi, chi)^3 chi(lambda).

    Raises:
        DomainError: for lambda = 0
        IntegrityError: when the float result fails the rounding gates
    """
    p = table.ctx.p
    lam %= p
    if lam == 0:
        raise DomainError("3F2 is evaluated at lambda != 0")
    k = int(table.ctx.dlog[lam])
    phases = table.roots[(np.arange(table.order) * k) % table.order]
    value = complex(table.binom_cubes @ phases) * p / table.order
    return HyperValue(p, _round_gate(p, value, lam))


def f32_table(table: CharacterTable) -> Dict[int, int]:
    """p^2 * 3F2(lambda) for every lambda in F_p^*, from one inverse FFT over the character index."""
    p = table.ctx.p
    # ifft(c)[k] = (1/(p-1)) sum_j c_j zeta^(j k)
    by_log = np.fft.ifft(table.binom_cubes) * p
    return {
        int(table.ctx.powers[k]): _round_gate(p, complex(by_log[k]), int(table.ctx.powers[k]))
        for k in range(table.order)
    }


def a32(ctx: FieldCtx, lam: int) -> EllipticTrace:
    """Trace of y^2 = (x - 1)(x^2 + lambda), for lambda^2 != -lambda."""
    lam %= ctx.p
    if lam in (0, ctx.p - 1):
        raise DomainError(f"3A2 needs lambda^2 != -lambda (lambda={lam}, p={ctx.p})")
    return trace_cubic(ctx, -1, lam, -lam, label=f"3E2({lam})")


def f32_at_one(p: int) -> int:
    """Expected p^2 * 3F2(1): 0 for p = 3 mod 4, 4a^2 - 2p with p = a^2 + b^2, a odd."""
    if p % 4 == 3:
        return 0
    a = sum_of_two_squares(p).a
    return 4 * a * a - 2 * p


def verify_fop_identity(ctx: FieldCtx) -> pd.DataFrame:
    """
    Check the evaluation identities of 3F2 at p.

    Rows carry (p, lambda, identity, lhs, rhs, passed):
      - '3F2(1+1/l)': p^2 3F2(1 + 1/l) = phi(-l)(3A2(l)^2 - p), l not in {0, -1}
      - '3F2(1)': p^2 3F2(1) against f32_at_one
      - 'same-curve': 3A2(-1/(l+1))^2 = a_l^2, l not in {0, -1}
      - 'f-a': p^2 3F2(l) = phi(1 - l)(a_{-l}^2 - p), l not in {0, 1}
    """
    p = ctx.p
    values = f32_table(character_table(ctx))
    rows = []

    def add(lam, identity, lhs, rhs):
        rows.append({'p': p, 'lambda': lam, 'identity': identity,
                     'lhs': int(lhs), 'rhs': int(rhs), 'passed': int(lhs) == int(rhs)})

    add(1, '3F2(1)', values[1], f32_at_one(p))
    for lam in range(1, p - 1):
        a = a32(ctx, lam).a
        arg = (1 + ctx.inv(lam)) % p
        add(lam, '3F2(1+1/l)', values[arg], ctx.legendre(-lam) * (a * a - p))

        other = (-ctx.inv(lam + 1)) % p
        add(lam, 'same-curve', a32(ctx, other).a ** 2, a_lambda(ctx, lam).a ** 2)
    for lam in range(2, p):
        a = a_lambda(ctx, -lam).a
        add(lam, 'f-a', values[lam], ctx.legendre(1 - lam) * (a * a - p))

    frame = pd.DataFrame(rows, columns=['p', 'lambda', 'identity', 'lhs', 'rhs', 'passed'])
    frame.attrs['convention'] = BINOM_CONVENTION
    return frame


def f1_hypergeometric_count(ctx: FieldCtx) -> CountRecord:
    """
    [F1]_p = sum_{i<=5} p^i + p^4 sum_{l=1}^{p-1} phi(-l) 3F2(l)^2.

    For p = 1 mod 4 the l = 1 term carries the contribution of the fibre over -1.
    """
    start = time.perf_counter()
    p = ctx.p
    values = f32_table(character_table(ctx))
    count = sum(p ** i for i in range(6))
    count += sum(ctx.legendre(-lam) * num * num for lam, num in values.items())
    return CountRecord('f1', p, 'hypergeometric', count, (time.perf_counter() - start) * 1000,
                       {'convention': BINOM_CONVENTION})


def hypergeometric_frame(ctx: FieldCtx) -> pd.DataFrame:
    """(p, lambda, p2_times_f32, a32) for lambda = 1..p-1; a32 is empty at lambda = -1."""
    values = f32_table(character_table(ctx))
    rows = []
    for lam in range(1, ctx.p):
        trace = a32(ctx, lam).a if lam != ctx.p - 1 else None
        rows.append({'p': ctx.p, 'lambda': lam, 'p2_times_f32': values[lam], 'a32': trace})
    frame = pd.DataFrame(rows, columns=['p', 'lambda', 'p2_times_f32', 'a32'])
    frame['a32'] = frame['a32'].astype('Int64')
    return frame
