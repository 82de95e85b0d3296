"""
Brute Count Model - exact point counts of double covers by enumeration.

Every count is a character sum over base points: [V]_p = sum (1 + phi(c * prod forms)).
The enumeration is split into patches x_j = 1 (first nonzero coordinate) and,
inside a patch, into index ranges over the outer coordinates; the innermost
coordinates are evaluated as a precomputed grid so that each form costs one
vectorised add per outer point.
"""
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from config.config import config
from src.data.models import CountRecord
from src.utils.errors import DomainError
from src.models.arrangements import DoubleCoverSpec
from src.models.ffcore import FieldCtx, nullspace_mod, rank_mod

Space = Union[str, int]

# number of (outer point, inner point) pairs evaluated per numpy batch
_BATCH_ELEMENTS = 1 << 20


@dataclass
class SignCensus:
    """How many base points make the branch value a nonzero square, zero, or a nonsquare."""
    v_plus: int
    v_zero: int
    v_minus: int

    def __add__(self, other: 'SignCensus') -> 'SignCensus':
        return SignCensus(self.v_plus + other.v_plus, self.v_zero + other.v_zero, self.v_minus + other.v_minus)

    @property
    def total(self) -> int:
        return self.v_plus + self.v_zero + self.v_minus

    @property
    def signed(self) -> int:
        """v_plus - v_minus, the character sum over the base."""
        return self.v_plus - self.v_minus

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.v_plus, self.v_zero, self.v_minus)

    @classmethod
    def from_histogram(cls, ctx: FieldCtx, hist: np.ndarray) -> 'SignCensus':
        return cls(int(hist[ctx.sqtable == 1].sum()), int(hist[0]), int(hist[ctx.sqtable == -1].sum()))


def count_projective_space(ctx: FieldCtx, n: int) -> int:
    """|P^n(F_p)| = (p^(n+1) - 1)/(p - 1)."""
    if n < 0:
        return 0
    p = ctx.p
    return (p ** (n + 1) - 1) // (p - 1)


def base_size(ctx: FieldCtx, dim: int, space: Space = 'projective') -> int:
    """Number of F_p-points of the base space of a census."""
    if space == 'projective':
        return count_projective_space(ctx, dim)
    if space == 'affine':
        return ctx.p ** (dim + 1)
    return ctx.p ** (dim - _patch_index(space, dim))


def _patch_index(space, dim) -> int:
    if isinstance(space, (int, np.integer)) and not isinstance(space, bool) and 0 <= space <= dim:
        return int(space)
    raise DomainError(f"space must be 'projective', 'affine' or a patch index 0..{dim}, got {space!r}")


# --- enumeration kernel ------------------------------------------------------

def _histogram_range(p: int, lin: np.ndarray, const: np.ndarray, twist: int,
                     inner: int, start: int, stop: int) -> np.ndarray:
    """
    Histogram of twist * prod_k (const_k + lin_k . x) over x in F_p^m whose outer
    index lies in [start, stop).

    The first `inner` coordinates of x form a precomputed grid; the rest are
    decoded from the outer index (least significant digit first).
    """
    k, m = lin.shape
    outer = m - inner
    size = p ** inner
    if inner:
        grid = np.indices((p,) * inner, dtype=np.int64).reshape(inner, size)
    else:
        grid = np.zeros((0, 1), dtype=np.int64)
    inner_values = (lin[:, :inner] @ grid) % p
    lin_outer = lin[:, inner:]

    hist = np.zeros(p, dtype=np.int64)
    batch = max(1, _BATCH_ELEMENTS // size)
    for lo in range(start, stop, batch):
        idx = np.arange(lo, min(lo + batch, stop), dtype=np.int64)
        digits = np.empty((idx.size, outer), dtype=np.int64)
        rest = idx.copy()
        for j in range(outer):
            rest, digits[:, j] = np.divmod(rest, p)
        offsets = (const[None, :] + digits @ lin_outer.T) % p
        prod = np.full((idx.size, size), twist % p, dtype=np.int64)
        for f in range(k):
            prod = prod * ((inner_values[f][None, :] + offsets[:, f][:, None]) % p) % p
        hist += np.bincount(prod.ravel(), minlength=p)
    return hist


def value_histogram(ctx: FieldCtx, lin: np.ndarray, const: np.ndarray, twist: int,
                    jobs: Optional[int] = None, partitions: Optional[int] = None) -> np.ndarray:
    """
    Histogram over F_p of the branch values on the affine space F_p^m.

    Args:
        lin: k x m residues, the linear part of each form
        const: k residues, each form's value at the origin
        twist: residue multiplying the product
        jobs: joblib workers (defaults to Config.JOBS)
        partitions: number of index ranges (defaults to jobs)

    Returns:
        int64 array h with h[v] = #{x : value(x) = v}
    """
    p = ctx.p
    lin = np.asarray(lin, dtype=np.int64).reshape(len(const), -1) % p
    const = np.asarray(const, dtype=np.int64) % p
    m = lin.shape[1]
    inner = min(m, config.CENSUS_INNER_DIMS)
    total_outer = p ** (m - inner)
    jobs = jobs or config.JOBS
    partitions = max(1, min(partitions or jobs, total_outer))

    bounds = [total_outer * i // partitions for i in range(partitions + 1)]
    ranges = [(bounds[i], bounds[i + 1]) for i in range(partitions) if bounds[i] < bounds[i + 1]]
    if jobs > 1 and len(ranges) > 1:
        parts = Parallel(n_jobs=jobs)(
            delayed(_histogram_range)(p, lin, const, twist, inner, a, b) for a, b in ranges
        )
    else:
        parts = [_histogram_range(p, lin, const, twist, inner, a, b) for a, b in ranges]
    return np.sum(parts, axis=0)


def forms_histogram(ctx: FieldCtx, forms: np.ndarray, twist: int, space: Space = 'projective',
                    jobs: Optional[int] = None, partitions: Optional[int] = None,
                    verbose: bool = False) -> np.ndarray:
    """Histogram of twist * prod(forms) over P^n, F_p^(n+1) or the patch x_j = 1."""
    forms = np.asarray(forms, dtype=np.int64) % ctx.p
    k, width = forms.shape
    dim = width - 1
    if space == 'affine':
        return value_histogram(ctx, forms, np.zeros(k, np.int64), twist, jobs, partitions)
    if space == 'projective':
        patches = range(width)
    else:
        patches = [_patch_index(space, dim)]

    hist = np.zeros(ctx.p, dtype=np.int64)
    for j in patches:
        if verbose:
            print(f"  patch x{j} = 1 ({ctx.p ** (dim - j)} points)")
        hist += value_histogram(ctx, forms[:, j + 1:], forms[:, j], twist, jobs, partitions)
    return hist


def sign_census(ctx: FieldCtx, spec: DoubleCoverSpec, space: Space = 'projective',
                jobs: Optional[int] = None, partitions: Optional[int] = None,
                verbose: bool = False) -> SignCensus:
    """
    Census (v_plus, v_zero, v_minus) of c * prod(forms) over the base space.

    Raises:
        DomainError: odd degree over projective space, or twist = 0 mod p
    """
    if space == 'projective' and not spec.even_degree:
        raise DomainError(f"{spec.name}: odd degree {len(spec.forms)} is not defined on projective space")
    hist = forms_histogram(ctx, spec.arrangement.forms_mod(ctx), spec.constant_mod(ctx), space,
                           jobs, partitions, verbose)
    return SignCensus.from_histogram(ctx, hist)


def count_double_cover(ctx: FieldCtx, spec: DoubleCoverSpec, space: Space = 'projective',
                       jobs: Optional[int] = None, partitions: Optional[int] = None,
                       verbose: bool = False) -> CountRecord:
    """
    [V]_p for t^2 = c * prod(forms), as |base| + v_plus - v_minus.
    """
    start = time.perf_counter()
    census = sign_census(ctx, spec, space, jobs, partitions, verbose)
    count = base_size(ctx, spec.dim, space) + census.signed
    return CountRecord(spec.name, ctx.p, 'brute', count, (time.perf_counter() - start) * 1000,
                       {'census': list(census.as_tuple()), 'space': space})


def count_quotient_product(ctx: FieldCtx, specs: Sequence[DoubleCoverSpec],
                           spaces: Optional[Sequence[Space]] = None,
                           jobs: Optional[int] = None) -> CountRecord:
    """
    Points of (D_1 x ... x D_n)/sigma, sigma negating every cover coordinate:
    prod |S_i| + prod (v_i+ - v_i-).
    """
    start = time.perf_counter()
    spaces = list(spaces) if spaces is not None else ['projective'] * len(specs)
    censuses = [sign_census(ctx, spec, space, jobs) for spec, space in zip(specs, spaces)]
    base, signed = 1, 1
    for spec, space, census in zip(specs, spaces, censuses):
        base *= base_size(ctx, spec.dim, space)
        signed *= census.signed
    name = '(' + ' x '.join(s.name for s in specs) + ')/sigma'
    return CountRecord(name, ctx.p, 'formula', base + signed, (time.perf_counter() - start) * 1000,
                       {'censuses': [list(c.as_tuple()) for c in censuses]})


def count_quotient_product_direct(ctx: FieldCtx, specs: Sequence[DoubleCoverSpec],
                                  spaces: Optional[Sequence[Space]] = None) -> int:
    """
    Independent oracle for count_quotient_product over affine bases.

    Counts solutions (x_i, s_i) of s_i^2 = f_i(x_i) with all s_i in F_p (fixed
    by Frobenius) and with all s_i in sqrt(d) F_p (Frobenius equals sigma),
    then averages the two as Burnside prescribes for <sigma>.
    """
    p, d = ctx.p, ctx.nonresidue
    spaces = list(spaces) if spaces is not None else ['affine'] * len(specs)
    if any(space == 'projective' for space in spaces):
        raise DomainError("the direct product oracle works on affine bases only")

    s = np.arange(p, dtype=np.int64)
    roots_plus = np.bincount(s * s % p, minlength=p)
    roots_minus = np.bincount(d * s * s % p, minlength=p)

    fixed, twisted = 1, 1
    for spec, space in zip(specs, spaces):
        hist = forms_histogram(ctx, spec.arrangement.forms_mod(ctx), spec.constant_mod(ctx), space)
        fixed *= int(hist @ roots_plus)
        twisted *= int(hist @ roots_minus)
    if (fixed + twisted) % 2:
        raise DomainError("Burnside sum for <sigma> is odd")
    return (fixed + twisted) // 2


# --- fibres of linear pencils ------------------------------------------------

def count_on_subspace(ctx: FieldCtx, spec: DoubleCoverSpec, rows: Sequence[Sequence[int]]) -> int:
    """Points of the cover lying over the projective subspace {rows . x = 0}."""
    width = spec.dim + 1
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, width) % ctx.p
    basis = nullspace_mod(ctx, rows, width)
    sub_dim = basis.shape[1] - 1
    if sub_dim < 0:
        return 0
    pulled = spec.arrangement.forms_mod(ctx) @ basis % ctx.p
    hist = forms_histogram(ctx, pulled, spec.constant_mod(ctx), 'projective')
    census = SignCensus.from_histogram(ctx, hist)
    return count_projective_space(ctx, sub_dim) + census.signed


def _fibre_hyperplane(ctx: FieldCtx, fmap, value) -> np.ndarray:
    m0, m1 = (np.asarray(m, dtype=np.int64) for m in fmap)
    a, b = value
    if rank_mod(ctx, [m0 % ctx.p, m1 % ctx.p]) < 2:
        raise DomainError("map components are proportional modulo p")
    if a % ctx.p == 0 and b % ctx.p == 0:
        raise DomainError("(0:0) is not a point of P^1")
    return (b * m0 - a * m1) % ctx.p


def count_fibre(ctx: FieldCtx, spec: DoubleCoverSpec, fmap: Tuple[Sequence[int], Sequence[int]],
                value: Tuple[int, int], patch: Optional[int] = None) -> CountRecord:
    """
    Points of the cover over b*m0(x) = a*m1(x), the fibre at (a:b) of x -> (m0:m1).

    The fibre contains the base locus m0 = m1 = 0. With patch=j only the part
    with x_j != 0 is counted.
    """
    start = time.perf_counter()
    h = _fibre_hyperplane(ctx, fmap, value)
    count = count_on_subspace(ctx, spec, [h])
    if patch is not None:
        e_j = np.zeros(spec.dim + 1, dtype=np.int64)
        e_j[_patch_index(patch, spec.dim)] = 1
        count -= count_on_subspace(ctx, spec, [h, e_j])
    a, b = value
    return CountRecord(f"{spec.name}|fibre({a % ctx.p}:{b % ctx.p})", ctx.p, 'brute', count,
                       (time.perf_counter() - start) * 1000, {'patch': patch})


def count_base_locus(ctx: FieldCtx, spec: DoubleCoverSpec, fmap) -> int:
    """Points over the base locus m0 . x = m1 . x = 0 of the pencil."""
    m0, m1 = fmap
    return count_on_subspace(ctx, spec, [list(m0), list(m1)])


def projective_line(ctx: FieldCtx) -> List[Tuple[int, int]]:
    """P^1(F_p) as (a:b): (0:1), ..., (p-1:1), (1:0)."""
    return [(a, 1) for a in range(ctx.p)] + [(1, 0)]


def fibre_consistency(ctx: FieldCtx, spec: DoubleCoverSpec, fmap) -> Tuple[int, int]:
    """(sum of fibres - p * base locus, brute total); the two must agree."""
    fibres = sum(count_fibre(ctx, spec, fmap, value).count for value in projective_line(ctx))
    base = count_base_locus(ctx, spec, fmap)
    total = count_double_cover(ctx, spec).count
    return fibres - ctx.p * base, total


def weil_deviation(ctx: FieldCtx, count: int) -> int:
    """|count - (p^2 + p + 1)|, bounded by 22p for K3-type covers."""
    return abs(count - count_projective_space(ctx, 2))


def within_weil_bound(ctx: FieldCtx, count: int) -> bool:
    """|count - (p^2 + p + 1)| <= WEIL_K3_CONSTANT * p, the sanity bound for K3 surface covers."""
    return weil_deviation(ctx, count) <= config.WEIL_K3_CONSTANT * ctx.p
