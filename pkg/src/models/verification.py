"""
Verification Model - the registry of claims checked by `verify` and the
(variety, method) dispatch behind `count`.

Every claim produces VerificationRows (predicted vs counted, exact integers).
"""
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

from sympy import primerange

from config.config import config
from src.data.models import CountRecord, PointCountCache, VerificationRow, VerificationRun
from src.utils.errors import DomainError, MissingDataError, UnsupportedError
from src.models.arrangements import (
    DoubleCoverSpec, automorphism_group, ch_failures, cynk_hulek_report, load_arrangement_file,
)
from src.models.brutecount import count_double_cover, within_weil_bound
from src.models.ffcore import FieldCtx, make_field_ctx
from src.models.fibrations import (
    count_F1_fibrationwise, count_F_lambda, count_F_lambda_brute, count_F_lambda_product, count_K32,
    count_K_lambda, count_L_lambda, count_minus_one, count_script_L, count_script_L_brute,
    count_script_L_fibrewise, count_V32_fibrationwise, fibre_excess, fibre_excess_brute, surface_spec,
)
from src.models.hypergeometric import f1_hypergeometric_count, verify_fop_identity
from src.models.modforms import level8_forms, predict_F1, predict_V32, verify_coef_identities
from src.models.quotients import load_quotient_file, twisted_count_brute, twisted_count_h90, verify_quotient_conjectures

BUNDLED_VARIETIES = ('f1', 'v32', 'k32', 'script_l')


@dataclass
class RunEnv:
    """Settings shared by every computation of one CLI invocation."""
    data_dir: Optional[str] = None
    jobs: Optional[int] = None
    seed: Optional[int] = None
    cache: Optional[PointCountCache] = None
    verbose: bool = False
    recompute: bool = False
    _level8: List = field(default_factory=list)

    def level8(self):
        """The level-8 pair (weight 6, weight 4), loaded once per run."""
        if not self._level8:
            self._level8.append(level8_forms(self.data_dir))
        return self._level8[0]


# --- counts ------------------------------------------------------------------

def _record(variety: str, p: int, method: str, fn: Callable[[], int]) -> CountRecord:
    start = time.perf_counter()
    count = fn()
    return CountRecord(variety, p, method, count, (time.perf_counter() - start) * 1000)


def _bundled(variety: str, ctx: FieldCtx, method: str, env: RunEnv) -> CountRecord:
    p = ctx.p
    if method == 'brute' and variety != 'script_l' and p > config.BRUTE_PRIME_CEILING:
        raise DomainError(f"p={p} exceeds the brute ceiling {config.BRUTE_PRIME_CEILING}")
    if variety == 'f1':
        if method == 'brute':
            return count_double_cover(ctx, load_arrangement_file('f1', data_dir=env.data_dir), jobs=env.jobs,
                                      verbose=env.verbose)
        if method == 'fibration':
            return count_F1_fibrationwise(ctx)
        if method == 'hypergeometric':
            return f1_hypergeometric_count(ctx)
        if method == 'formula':
            w6, w4 = env.level8()
            return _record('f1', p, 'formula', lambda: predict_F1(ctx, w6, w4))
    if variety == 'v32':
        if method == 'brute':
            return count_double_cover(ctx, load_arrangement_file('v32', data_dir=env.data_dir), jobs=env.jobs,
                                      verbose=env.verbose)
        if method == 'fibration':
            return count_V32_fibrationwise(ctx)
        if method == 'formula':
            return _record('v32', p, 'formula', lambda: predict_V32(ctx))
    if variety == 'k32':
        if method == 'brute':
            return count_double_cover(ctx, load_arrangement_file('k32', data_dir=env.data_dir), jobs=env.jobs,
                                      verbose=env.verbose)
        if method == 'formula':
            return _record('k32', p, 'formula', lambda: count_K32(ctx))
    if variety == 'script_l':
        if method == 'brute':
            return _record('script_l', p, 'brute', lambda: count_script_L_brute(ctx))
        if method == 'fibration':
            return _record('script_l', p, 'fibration', lambda: count_script_L_fibrewise(ctx))
        if method == 'formula':
            return _record('script_l', p, 'formula', lambda: count_script_L(ctx))
    raise UnsupportedError(f"no {method!r} decomposition is registered for {variety!r}")


def user_variety_id(spec: DoubleCoverSpec) -> str:
    """Cache id of a user arrangement: its name plus a digest of its equation."""
    return f"{spec.name}@{spec.fingerprint[:16]}"


def compute_count(variety: str, ctx: FieldCtx, method: str, env: Optional[RunEnv] = None) -> CountRecord:
    """
    [variety]_p by the given method, served from the cache when present.

    variety is a bundled id (f1, v32, k32, script_l) or an arrangement file,
    which supports the brute method only. A file is cached under its name and
    the fingerprint of its forms and twist, so two files never share an entry
    unless they define the same cover. With env.recompute a cached count is
    computed again and must agree with the cache.
    """
    env = env or RunEnv()
    if variety in BUNDLED_VARIETIES:
        variety_id = variety
    else:
        spec = load_arrangement_file(variety, data_dir=env.data_dir)
        variety_id = user_variety_id(spec)
    if env.cache is not None and not env.recompute:
        cached = env.cache.get(variety_id, ctx.p, method)
        if cached is not None:
            return cached

    if variety in BUNDLED_VARIETIES:
        record = _bundled(variety, ctx, method, env)
    elif method == 'brute':
        if ctx.p > config.BRUTE_PRIME_CEILING:
            raise DomainError(f"p={ctx.p} exceeds the brute ceiling {config.BRUTE_PRIME_CEILING}")
        record = count_double_cover(ctx, spec, jobs=env.jobs, verbose=env.verbose)
        record = replace(record, variety_id=variety_id, details={**record.details, 'fingerprint': spec.fingerprint})
    else:
        raise UnsupportedError(f"{variety_id}: only the brute method applies to a user arrangement")

    if env.cache is not None:
        env.cache.put(record)
    return record


# --- claims ------------------------------------------------------------------

def _compare(claim: str, p: int, label: str, predicted: CountRecord, counted: CountRecord) -> VerificationRow:
    return VerificationRow(claim, p, label, predicted.count, counted.count,
                           f"{predicted.method}|{counted.method}", round(predicted.wall_ms + counted.wall_ms, 1))


def _timed_row(claim: str, p: int, label: str, methods: str, fn: Callable[[], Tuple[int, int]]) -> VerificationRow:
    start = time.perf_counter()
    predicted, counted = fn()
    return VerificationRow(claim, p, label, int(predicted), int(counted), methods,
                           round((time.perf_counter() - start) * 1000, 1))


def _thm_main_first(ctx, env):
    return [_compare('thm-main-first', ctx.p, 'F1', compute_count('f1', ctx, 'formula', env),
                     compute_count('f1', ctx, 'brute', env))]


def _thm_count_32(ctx, env):
    return [_compare('thm-count-32', ctx.p, 'V32', compute_count('v32', ctx, 'formula', env),
                     compute_count('v32', ctx, 'brute', env))]


def _f1_fibration(ctx, env):
    return [_compare('f1-fibration', ctx.p, 'F1', compute_count('f1', ctx, 'fibration', env),
                     compute_count('f1', ctx, 'brute', env))]


def _f1_hypergeometric(ctx, env):
    return [_compare('f1-hypergeometric', ctx.p, 'F1', compute_count('f1', ctx, 'fibration', env),
                     compute_count('f1', ctx, 'hypergeometric', env))]


def _v32_fibration(ctx, env):
    return [_compare('v32-fibration', ctx.p, 'V32', compute_count('v32', ctx, 'formula', env),
                     compute_count('v32', ctx, 'fibration', env))]


def _surface_formulas(ctx, env):
    p, claim = ctx.p, 'surface-formulas'
    rows = []
    for lam in range(1, p - 1):
        k, l = surface_spec('k_lambda', lam), surface_spec('l_lambda', lam)
        rows.append(_timed_row(claim, p, f"K_{lam}", 'formula|brute',
                               lambda: (count_K_lambda(ctx, lam), count_double_cover(ctx, k).count)))
        rows.append(_timed_row(claim, p, f"L_{lam}", 'formula|brute',
                               lambda: (count_L_lambda(ctx, lam), count_double_cover(ctx, l).count)))
        rows.append(_timed_row(claim, p, f"F_{lam}", 'formula|brute',
                               lambda: (count_F_lambda(ctx, lam), count_F_lambda_brute(ctx, lam))))
        rows.append(_timed_row(claim, p, f"F_{lam} product", 'formula|brute',
                               lambda: (count_F_lambda(ctx, lam), count_F_lambda_product(ctx, lam))))
    k_minus, f_minus = count_minus_one(ctx)
    rows.append(_timed_row(claim, p, 'K_-1', 'formula|brute',
                           lambda: (k_minus, count_double_cover(ctx, surface_spec('k_minus_one')).count)))
    rows.append(_timed_row(claim, p, 'F_-1', 'formula|brute',
                           lambda: (f_minus, count_F_lambda_brute(ctx, p - 1))))
    k_formula = compute_count('k32', ctx, 'formula', env)
    rows.append(_compare(claim, p, 'K', k_formula, compute_count('k32', ctx, 'brute', env)))
    rows.append(VerificationRow(claim, p, 'K Weil bound', 1, int(within_weil_bound(ctx, k_formula.count)),
                                'bound|formula'))
    rows.append(_compare(claim, p, 'script-L', compute_count('script_l', ctx, 'formula', env),
                         compute_count('script_l', ctx, 'brute', env)))
    rows.append(_compare(claim, p, 'script-L fibrewise', compute_count('script_l', ctx, 'formula', env),
                         compute_count('script_l', ctx, 'fibration', env)))
    return rows


def _fibre_excess(ctx, env):
    return [
        _timed_row('fibre-excess', ctx.p, f"lambda={lam}", 'formula|brute',
                   lambda: (fibre_excess(ctx, lam), fibre_excess_brute(ctx, lam)))
        for lam in range(1, ctx.p)
    ]


def _fop_identities(ctx, env):
    start = time.perf_counter()
    frame = verify_fop_identity(ctx)
    wall = round((time.perf_counter() - start) * 1000, 1)
    return [
        VerificationRow('fop-identities', ctx.p, identity, len(group), int(group['passed'].sum()), 'hypergeometric', wall)
        for identity, group in frame.groupby('identity', sort=False)
    ]


def _coef_identities(ctx, env):
    frame = verify_coef_identities(ctx.p, ctx.p)
    checks = [c for c in frame.columns if '=' in c]
    row = frame.iloc[0]
    return [VerificationRow('coef-identities', ctx.p, 'a3, a4, a6', len(checks),
                            sum(bool(row[c]) for c in checks), 'cm-oracle')]


def _quotient_claim(claim):
    def rows(ctx, env):
        frame = verify_quotient_conjectures(ctx.p, ctx.p, claims=[claim], data_dir=env.data_dir, jobs=env.jobs)
        return [
            VerificationRow(claim, int(r['p']), r['label'], int(r['predicted']), int(r['counted']),
                            f"conjecture|{r['method']}", float(r['wall_ms']), r['status'])
            for _, r in frame.iterrows()
        ]
    return rows


def _h90_oracle(ctx, env):
    rows = []
    for key in ('f1_involutions', 'v32_involutions'):
        quotient = load_quotient_file(key, env.data_dir)
        for name, g in quotient.maps.items():
            def pair(g=g):
                brute = twisted_count_brute(ctx, quotient.spec, g)
                fast = twisted_count_h90(ctx, quotient.spec, g, env.seed)
                if brute.fixed != fast.fixed:
                    return brute.fixed, fast.fixed
                return brute.T, fast.T
            rows.append(_timed_row('h90-oracle', ctx.p, f"{quotient.spec.name}:{name}", 'quotient-brute|quotient-h90', pair))
    return rows


def _ch_criterion(ctx, env):
    rows = []
    for key, expected in (('f1', 1), ('v32', 0)):
        spec = load_arrangement_file(key, data_dir=env.data_dir)
        rows.append(_timed_row('ch-criterion', 0, f"{key} failing subsets", 'expected|scan',
                               lambda: (expected, len(ch_failures(cynk_hulek_report(spec))))))
    return rows


def _aut_orders(ctx, env):
    f1 = automorphism_group(load_arrangement_file('f1', data_dir=env.data_dir))
    v32 = automorphism_group(load_arrangement_file('v32', data_dir=env.data_dir)).summary()
    return [
        VerificationRow('aut-orders', 0, 'f1 cover order', 24, f1.cover_order, 'remark|search'),
        VerificationRow('aut-orders', 0, 'v32 order', 64, v32['pgl_order'], 'remark|search'),
        VerificationRow('aut-orders', 0, 'v32 center order', 8, v32['center_order'], 'structure|search'),
        VerificationRow('aut-orders', 0, 'v32 G/Z exponent', 2, v32['quotient_exponent'], 'structure|search'),
        VerificationRow('aut-orders', 0, 'v32 G/Z abelian', 1, int(v32['quotient_abelian']), 'structure|search'),
    ]


@dataclass
class Claim:
    claim_id: str
    description: str
    rows: Callable[[Optional[FieldCtx], RunEnv], List[VerificationRow]]
    pmin: Optional[int] = None
    pmax: Optional[int] = None
    ceiling: Optional[int] = None

    @property
    def per_prime(self) -> bool:
        return self.pmin is not None


CLAIMS: Dict[str, Claim] = {c.claim_id: c for c in [
    Claim('thm-main-first', 'brute [F1]_p against the level-8 modular prediction', _thm_main_first,
          3, 13, config.BRUTE_PRIME_CEILING),
    Claim('thm-count-32', 'brute [V32]_p against sum p^i - a6 - p a4 - 2p^2 a2', _thm_count_32,
          3, 13, config.BRUTE_PRIME_CEILING),
    Claim('f1-fibration', 'fibrewise [F1]_p against brute', _f1_fibration, 3, 13, config.BRUTE_PRIME_CEILING),
    Claim('f1-hypergeometric', 'hypergeometric [F1]_p against fibrewise', _f1_hypergeometric,
          3, 199, config.HYPERGEOMETRIC_PRIME_CEILING),
    Claim('v32-fibration', 'fibrewise [V32]_p against the CM prediction', _v32_fibration,
          3, 61, config.FIBRATION_PRIME_CEILING),
    Claim('surface-formulas', 'brute K_l, L_l, F_l, K_-1, F_-1, K, script-L against closed forms',
          _surface_formulas, 3, 13, config.BRUTE_PRIME_CEILING),
    Claim('fibre-excess', 'excess of (K x L_l)/sigma over the V32 fibre', _fibre_excess,
          3, 7, config.BRUTE_PRIME_CEILING),
    Claim('fop-identities', 'evaluation identities of 3F2', _fop_identities,
          3, 199, config.HYPERGEOMETRIC_PRIME_CEILING),
    Claim('coef-identities', 'Hecke identities between the CM coefficients', _coef_identities, 3, 997),
    Claim('prop-count-q-r', '[Q1]_p and [R1]_p against sum p^i', _quotient_claim('prop-count-q-r'),
          3, 7, config.QUOTIENT_PRIME_CEILING),
    Claim('conj-q2', '[Q2]_p against sum p^i - p b_p', _quotient_claim('conj-q2'),
          3, 7, config.QUOTIENT_PRIME_CEILING),
    Claim('conj-q3', '[Q3]_p and [R3]_p against the conjectured counts', _quotient_claim('conj-q3'),
          3, 7, config.QUOTIENT_PRIME_CEILING),
    Claim('conj-count-mod-a1', 'V32 modulo alpha1, alpha2, alpha1 alpha2', _quotient_claim('conj-count-mod-a1'),
          3, 7, config.QUOTIENT_PRIME_CEILING),
    Claim('rigid-32', 'V32/G4 against sum p^i - a6', _quotient_claim('rigid-32'),
          3, 7, config.QUOTIENT_PRIME_CEILING),
    Claim('h90-oracle', 'Hilbert-90 twisted counts against F_(p^2) enumeration', _h90_oracle, 3, 5, 5),
    Claim('ch-criterion', 'Cynk-Hulek verdicts for F1 and V32', _ch_criterion),
    Claim('aut-orders', 'automorphism group orders and structure', _aut_orders),
]}


def _skip(run: VerificationRun, p: int, error: MissingDataError):
    run.rows.append(VerificationRow(run.claim, p, 'data unavailable', 0, 0, 'skipped', status='skipped'))
    where = f" from p={p}" if p else ''
    run.notes.append(f"skipped{where}: {error}")


def run_claim(claim_id: str, pmin: Optional[int] = None, pmax: Optional[int] = None,
              env: Optional[RunEnv] = None) -> VerificationRun:
    """
    Evaluate a registered claim over the odd primes in [pmin, pmax].

    A claim whose data file is absent yields a single 'skipped' row with a
    note naming the file; a malformed file still raises.

    Raises:
        UnsupportedError: unknown claim id
        DomainError: pmax above the claim's ceiling
        DataError: a data file the claim needs is malformed
    """
    if claim_id not in CLAIMS:
        raise UnsupportedError(f"unknown claim {claim_id!r}; registered: {', '.join(CLAIMS)}")
    claim = CLAIMS[claim_id]
    env = env or RunEnv()
    if not claim.per_prime:
        run = VerificationRun(claim_id, None, None)
        try:
            run.rows = claim.rows(None, env)
        except MissingDataError as e:
            _skip(run, 0, e)
    else:
        pmin = claim.pmin if pmin is None else pmin
        pmax = claim.pmax if pmax is None else pmax
        if pmin > pmax:
            raise DomainError(f"empty prime range {pmin}..{pmax}")
        if claim.ceiling is not None and pmax > claim.ceiling:
            raise DomainError(f"{claim_id}: pmax={pmax} exceeds the ceiling {claim.ceiling}")
        run = VerificationRun(claim_id, pmin, pmax)
        for p in primerange(max(3, pmin), pmax + 1):
            try:
                run.rows.extend(claim.rows(make_field_ctx(int(p)), env))
            except MissingDataError as e:
                _skip(run, int(p), e)
                break
    if any(row.status == 'finding' for row in run.rows):
        run.notes.append(f"mismatches at p >= {config.CONJECTURE_VERIFIED_BELOW} are reported as findings")
    if env.cache is not None:
        env.cache.add_run(run)
    return run
