"""
Fibration Model - closed and semi-closed point counts assembled fibre by fibre.

Level 8: the K3 surfaces K_lambda, L_lambda, the fibres F_lambda of
pi = (x0 : x3) on F1, and the special value lambda = -1.
Level 32: the K3 surface K, the threefold script-L fibred by rho, and the
comparison between (K x L_lambda)/sigma and the fibres of V32.
"""
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from src.data.models import CountRecord
from src.utils.errors import DomainError, IntegrityError
from src.models.arrangements import DoubleCoverSpec, load_arrangement_file
from src.models.brutecount import (
    SignCensus, count_double_cover, count_fibre, count_projective_space, count_quotient_product,
    forms_histogram, projective_line, sign_census,
)
from src.models.ffcore import FieldCtx, nullspace_mod
from src.models.modforms import cm_coefficient

F1_PENCIL = ((1, 0, 0, 0, 0, 0), (0, 0, 0, 1, 0, 0))
V32_PENCIL = ((1, 1, 0, 0, 0, 0), (0, 0, 1, 0, 1, 0))


@dataclass
class EllipticTrace:
    """Trace of Frobenius a = p + 1 - #E(F_p) of a named curve."""
    p: int
    label: str
    a: int

    def __int__(self):
        return self.a

    @property
    def point_count(self) -> int:
        return self.p + 1 - self.a


def trace_cubic(ctx: FieldCtx, A, B, C, label: Optional[str] = None) -> EllipticTrace:
    """
    Trace of y^2 = x^3 + A x^2 + B x + C as -sum_x phi(x^3 + A x^2 + B x + C).

    Raises:
        DomainError: if the cubic has a repeated root modulo p
    """
    p = ctx.p
    A, B, C = ctx.reduce(A), ctx.reduce(B), ctx.reduce(C)
    disc = (A * A * B * B - 4 * B ** 3 - 4 * A ** 3 * C - 27 * C * C + 18 * A * B * C) % p
    if disc == 0:
        raise DomainError(f"y^2 = x^3 + {A}x^2 + {B}x + {C} is singular modulo {p}")
    x = np.arange(p, dtype=np.int64)
    value = (x + A) % p
    value = (value * x + B) % p
    value = (value * x + C) % p
    a = -int(ctx.sqtable[value].astype(np.int64).sum())
    return EllipticTrace(p, label or f"y^2 = x^3 + {A}x^2 + {B}x + {C}", a)


def _check_lambda(ctx: FieldCtx, lam: int, allow_zero: bool = False) -> int:
    lam %= ctx.p
    if lam == ctx.p - 1:
        raise DomainError(f"lambda = -1 is excluded (p={ctx.p})")
    if lam == 0 and not allow_zero:
        raise DomainError(f"lambda = 0 is excluded (p={ctx.p})")
    return lam


def a_lambda(ctx: FieldCtx, lam: int) -> EllipticTrace:
    """a_{lambda,p} for E_lambda: y^2 = x^3 - 2x^2 + lambda/(lambda+1) x; a_{0,p} = 0."""
    lam = _check_lambda(ctx, lam, allow_zero=True)
    if lam == 0:
        return EllipticTrace(ctx.p, 'E_0', 0)
    b = lam * ctx.inv(lam + 1) % ctx.p
    return trace_cubic(ctx, -2, b, 0, label=f"E_{lam}")


def a_minus_one(ctx: FieldCtx) -> EllipticTrace:
    """a_{-1,p}: the trace of y^2 = x^3 - x."""
    return trace_cubic(ctx, 0, -1, 0, label='y^2 = x^3 - x')


def count_kummer(ctx: FieldCtx, lam: int) -> int:
    """p^2 + (12 + 6 phi(lambda)) p + 1 + a_{lambda,p}^2."""
    lam = _check_lambda(ctx, lam)
    p, a = ctx.p, a_lambda(ctx, lam).a
    return p * p + (12 + 6 * ctx.legendre(lam)) * p + 1 + a * a


def count_kummer_fibrewise(ctx: FieldCtx, lam: int) -> int:
    """
    Kummer count assembled along the (z0 : z2) fibration.

    r = 2 + phi(lambda + 1) is the number of rational 2-torsion points of
    E_lambda. The p - r good fibres contribute (p - r)(p + 1) + a^2 in total;
    the reducible fibres contribute 4(5p + 1) when all 2-torsion is rational
    and 2(3p + 1) otherwise.
    """
    lam = _check_lambda(ctx, lam)
    p, a = ctx.p, a_lambda(ctx, lam).a
    r = 2 + ctx.legendre(lam + 1)
    bad = 4 * (5 * p + 1) if r == 3 else 2 * (3 * p + 1)
    return (p - r) * (p + 1) + a * a + bad


def count_K_lambda(ctx: FieldCtx, lam: int) -> int:
    """[K_lambda]_p = p^2 + 1 + a_{lambda,p}^2."""
    lam = _check_lambda(ctx, lam)
    a = a_lambda(ctx, lam).a
    return ctx.p ** 2 + 1 + a * a


def count_L_lambda(ctx: FieldCtx, lam: int) -> int:
    """[L_lambda]_p = p^2 + p + 1 + phi(lambda)(a_{lambda,p}^2 - p)."""
    lam = _check_lambda(ctx, lam)
    p, a = ctx.p, a_lambda(ctx, lam).a
    return p * p + p + 1 + ctx.legendre(lam) * (a * a - p)


def count_F_lambda(ctx: FieldCtx, lam: int) -> int:
    """[F_lambda]_p = p^4 + phi(lambda)(a_{lambda,p}^2 - p)^2, with [F_0]_p = p^4."""
    lam = _check_lambda(ctx, lam, allow_zero=True)
    p, a = ctx.p, a_lambda(ctx, lam).a
    return p ** 4 + ctx.legendre(lam) * (a * a - p) ** 2


def count_minus_one(ctx: FieldCtx) -> Tuple[int, int]:
    """([K_{-1}]_p, [F_{-1}]_p)."""
    p, a = ctx.p, a_minus_one(ctx).a
    k = p * p - ctx.legendre(-1) * p + 1 + a * a
    f = p ** 4 + (2 * p - a * a) ** 2 if p % 4 == 1 else p ** 4
    return k, f


def count_F1_fibrationwise(ctx: FieldCtx) -> CountRecord:
    """
    [F1]_p from the fibres of pi = (x0 : x3): the hyperplane x3 = 0, the affine
    fibre over 0, F_lambda for lambda = 1..p-2 and F_{-1}.
    """
    start = time.perf_counter()
    p = ctx.p
    count = sum(p ** i for i in range(5)) + p ** 4
    count += sum(count_F_lambda(ctx, lam) for lam in range(1, p - 1))
    count += count_minus_one(ctx)[1]
    return CountRecord('f1', p, 'fibration', count, (time.perf_counter() - start) * 1000)


# --- brute counterparts of the level-8 surfaces ------------------------------

@lru_cache(maxsize=256)
def surface_spec(key: str, lam: Optional[int] = None) -> DoubleCoverSpec:
    """Bundled surface or fivefold, with lambda substituted in templates."""
    return load_arrangement_file(key, lam=lam)


def count_F_lambda_brute(ctx: FieldCtx, lam: int) -> int:
    """Affine patch x3 != 0 of the pi-fibre x0 = lambda x3 of F1."""
    return count_fibre(ctx, surface_spec('f1'), F1_PENCIL, (lam % ctx.p, 1), patch=3).count


def count_F_lambda_product(ctx: FieldCtx, lam: int) -> int:
    """
    [F_lambda]_p = [A][B] - p^2 [A] - p^2 [B] + 2 p^4 with A, B the affine
    patches z0 != 0 of K_lambda and L_lambda, counted by enumeration.
    """
    if lam % ctx.p == ctx.p - 1:
        k, l = surface_spec('k_minus_one'), surface_spec('l_minus_one')
    else:
        lam = _check_lambda(ctx, lam)
        k, l = surface_spec('k_lambda', lam), surface_spec('l_lambda', lam)
    p = ctx.p
    a = count_double_cover(ctx, k, space=0).count
    b = count_double_cover(ctx, l, space=0).count
    return a * b - p * p * a - p * p * b + 2 * p ** 4


# --- level 32 ----------------------------------------------------------------

def count_K32(ctx: FieldCtx) -> int:
    """[K]_p = p^2 + p + 1 + a_{3,p}."""
    return count_projective_space(ctx, 2) + cm_coefficient(3, ctx.p)


def count_rho_fibre(ctx: FieldCtx, x: Optional[int]) -> int:
    """Points of the fibre of rho over x (None for infinity)."""
    p = ctx.p
    if x is None:
        return 2 * p * p + 2 * p + 1
    x %= p
    v = (x * x * x - x) % p
    if v == 0:
        return p * p + 3 * p + 1 if x == 0 else 2 * p * p + 2 * p + 1
    return p * p + 4 * p + 1 + ctx.legendre(v) * cm_coefficient(3, p)


def _script_L_forms(ctx: FieldCtx, u: int, v: int) -> Tuple[np.ndarray, int]:
    """
    Branch forms of the slice (u : v) of script-L, as a double cover of P^2 in
    (z0 : z1 : z2): t^2 v^3 = u z0 (-v z0 + u z2) z1 (-z1 + z2)(z0 + 2 z1 - z2)(-v z0 - 2 v z1 + (u + v) z2).
    """
    forms = np.array([
        [1, 0, 0],
        [-v, 0, u],
        [0, 1, 0],
        [0, -1, 1],
        [1, 2, -1],
        [-v, -2 * v, u + v],
    ], dtype=np.int64) % ctx.p
    return forms, u % ctx.p


def _script_L_over(ctx: FieldCtx, rows) -> int:
    """Points of script-L whose P^2 coordinate lies on {rows . z = 0}, including the point z = 0."""
    p = ctx.p
    basis = nullspace_mod(ctx, np.asarray(rows, dtype=np.int64).reshape(-1, 3), 3)
    sub_dim = basis.shape[1] - 1
    base = count_projective_space(ctx, sub_dim)
    total = 0
    for u in range(p):
        forms, twist = _script_L_forms(ctx, u, 1)
        census = SignCensus.from_histogram(ctx, forms_histogram(ctx, forms @ basis % p, twist))
        total += base + census.signed
    forms, twist = _script_L_forms(ctx, 1, 0)
    census = SignCensus.from_histogram(ctx, forms_histogram(ctx, forms @ basis % p, twist))
    # over v = 0 every zero of the branch value carries a whole line of t
    total += p * census.v_zero + 1
    return total


def count_script_L_brute(ctx: FieldCtx) -> int:
    """Enumeration of script-L in P(3,1,1,1) x P^1."""
    return _script_L_over(ctx, [])


def count_rho_fibre_brute(ctx: FieldCtx, x: Optional[int]) -> int:
    """Enumeration of one rho-fibre: 2 z1 - (1 + x) z2 = 0, or z2 = 0 over infinity."""
    if x is None:
        return _script_L_over(ctx, [[0, 0, 1]])
    return _script_L_over(ctx, [[0, 2, -(1 + x)]])


def count_script_L(ctx: FieldCtx) -> int:
    """p^3 + 6p^2 - 3p + 1 - a_{4,p} - p a_{2,p}."""
    p = ctx.p
    return p ** 3 + 6 * p * p - 3 * p + 1 - cm_coefficient(4, p) - p * cm_coefficient(2, p)


def count_script_L_fibrewise(ctx: FieldCtx, brute: bool = False) -> int:
    """Sum of the p + 1 rho-fibres minus p times the 2p + 1 points over the base locus."""
    p = ctx.p
    fibre = count_rho_fibre_brute if brute else count_rho_fibre
    total = sum(fibre(ctx, x) for x in range(p)) + fibre(ctx, None)
    return total - p * (2 * p + 1)


def fibre_excess(ctx: FieldCtx, lam: int) -> int:
    """Points by which (K x L_lambda)/sigma exceeds the pi-fibre of V32 at lambda."""
    p = ctx.p
    lam %= p
    if lam == 0:
        raise DomainError(f"lambda = 0 is excluded (p={p})")
    return p * (p + 1) ** 2 + (p - 2) * ctx.legendre(lam) * cm_coefficient(3, p)


def _cover_signs(ctx: FieldCtx, spec: DoubleCoverSpec, points) -> np.ndarray:
    """phi(c * prod(forms)) at each row of points."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, spec.dim + 1) % ctx.p
    values = spec.arrangement.forms_mod(ctx) @ points.T % ctx.p
    prod = np.full(points.shape[0], spec.constant_mod(ctx), dtype=np.int64)
    for row in values:
        prod = prod * row % ctx.p
    return ctx.sqtable[prod].astype(np.int64)


def fibre_exception_sets(ctx: FieldCtx, lam: int) -> Dict[str, int]:
    """
    Point counts where mu: x -> ((x3 : x5 : x2+x4), (x0 : x2 : x2+x4)) fails to
    match the V32 fibre at (lambda : 1) with (K x L_lambda)/sigma.

    undefined: fibre points with x2+x4 = 0 and (x3, x5) = 0 or (x0, x2) = 0
    contracted: the other fibre points with x2+x4 = 0, mapped (p-1)-to-1
    contracted_image: their images, over pairs with both third coordinates 0
    unmatched: points over pairs with exactly one third coordinate 0

    Off these sets mu is a bijection, so the excess of the product over the
    fibre is unmatched + contracted_image - undefined - contracted.
    """
    lam %= ctx.p
    if lam == 0:
        raise DomainError(f"lambda = 0 is excluded (p={ctx.p})")
    p = ctx.p
    v32, k, l = surface_spec('v32'), surface_spec('k32'), surface_spec('l32_lambda', lam)
    line = np.array(projective_line(ctx), dtype=np.int64)
    u0, u1 = line[:, 0], line[:, 1]
    zeros = np.zeros_like(u0)

    # x2 + x4 = 0 forces x0 + x1 = 0 on the fibre
    undefined = np.concatenate([
        np.stack([u0, -u0, u1, zeros, -u1, zeros], axis=1),
        np.stack([zeros, zeros, zeros, u0, zeros, u1], axis=1),
    ])
    w = np.array([(a, b) for a in range(p) for b in range(p) if a or b], dtype=np.int64)
    uu = np.repeat(line, len(w), axis=0)
    ww = np.tile(w, (len(line), 1))
    contracted = np.stack([uu[:, 0], -uu[:, 0], uu[:, 1], ww[:, 0], -uu[:, 1], ww[:, 1]], axis=1)

    at_infinity = np.stack([u0, u1, zeros], axis=1)
    affine = np.array([(a, b, 1) for a in range(p) for b in range(p)], dtype=np.int64)
    k_inf, l_inf = _cover_signs(ctx, k, at_infinity), _cover_signs(ctx, l, at_infinity)
    k_aff, l_aff = _cover_signs(ctx, k, affine), _cover_signs(ctx, l, affine)
    n_inf, n_aff = len(at_infinity), len(affine)

    return {
        'undefined': int(len(undefined) + _cover_signs(ctx, v32, undefined).sum()),
        'contracted': int(len(contracted) + _cover_signs(ctx, v32, contracted).sum()),
        'contracted_image': int(n_inf * n_inf + k_inf.sum() * l_inf.sum()),
        'unmatched': int(2 * n_inf * n_aff + k_inf.sum() * l_aff.sum() + k_aff.sum() * l_inf.sum()),
    }


def fibre_excess_brute(ctx: FieldCtx, lam: int) -> int:
    """
    [(K x L_lambda)/sigma]_p minus the brute count of the V32 fibre at (lambda : 1).

    Raises:
        IntegrityError: the exception sets of mu do not add up to the excess
    """
    lam %= ctx.p
    if lam == 0:
        raise DomainError(f"lambda = 0 is excluded (p={ctx.p})")
    product = count_quotient_product(ctx, [surface_spec('k32'), surface_spec('l32_lambda', lam)]).count
    fibre = count_fibre(ctx, surface_spec('v32'), V32_PENCIL, (lam, 1)).count
    excess = product - fibre
    sets = fibre_exception_sets(ctx, lam)
    from_sets = sets['unmatched'] + sets['contracted_image'] - sets['undefined'] - sets['contracted']
    if from_sets != excess:
        raise IntegrityError(f"p={ctx.p}, lambda={lam}: exception sets {sets} give {from_sets}, "
                             f"enumeration gives {excess}")
    return excess


def count_V32_fibrationwise(ctx: FieldCtx) -> CountRecord:
    """
    [V32]_p from the fibres of (x0 + x1 : x2 + x4).

    Each fibre over lambda in F_p^* is (K x L_lambda)/sigma minus the excess;
    the fibres over 0 and infinity are hyperplanes; the base locus is counted
    in every fibre and removed p times.
    """
    start = time.perf_counter()
    p = ctx.p
    k = sign_census(ctx, surface_spec('k32'))
    a3 = cm_coefficient(3, p)
    if k.signed != a3:
        raise IntegrityError(f"k_+ - k_- = {k.signed} disagrees with a_(3,{p}) = {a3}")

    plane = count_projective_space(ctx, 2)
    count = 0
    for lam in range(1, p):
        l = sign_census(ctx, surface_spec('l32_lambda', lam))
        count += plane * plane + k.signed * l.signed - fibre_excess(ctx, lam)
    count += 2 * count_projective_space(ctx, 4) - p * count_projective_space(ctx, 3)
    return CountRecord('v32', p, 'fibration', count, (time.perf_counter() - start) * 1000,
                       {'k_census': list(k.as_tuple())})


def surface_closed_forms(ctx: FieldCtx, lam: int) -> Dict[str, int]:
    """Closed-form K_lambda, L_lambda, F_lambda at an admissible lambda."""
    return {
        'k_lambda': count_K_lambda(ctx, lam),
        'l_lambda': count_L_lambda(ctx, lam),
        'f_lambda': count_F_lambda(ctx, lam),
    }
