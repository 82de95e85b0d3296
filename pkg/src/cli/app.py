"""
Command-line front end for the point-count workbench.

Subcommands: count, verify, report, forms, hypergeo, analyze, quotient.
Exit status: 0 when everything passes, 1 when a verification row fails,
2 on data, domain or integrity errors.
"""
import argparse
import io
import json
import os
import sys

# Add project root to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '../..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

import pandas as pd

from config.config import config
from src.data.models import CountRecord, PointCountCache, VerificationRun, open_cache
from src.models.arrangements import automorphism_group, ch_failures, cynk_hulek_report, load_arrangement_file
from src.models.ffcore import make_field_ctx
from src.models.hypergeometric import hypergeometric_frame
from src.models.modforms import cm_coefficients
from src.models.quotients import count_quotient, load_quotient_file
from src.models.verification import CLAIMS, RunEnv, compute_count, run_claim
from src.utils.errors import DataError, DomainError, IntegrityError, UnsupportedError, WorkbenchError

METHOD_CEILINGS = {
    'brute': config.BRUTE_PRIME_CEILING,
    'fibration': config.FIBRATION_PRIME_CEILING,
    'hypergeometric': config.HYPERGEOMETRIC_PRIME_CEILING,
}
STATUS_TAGS = {'pass': 'PASS', 'fail': 'FAIL', 'finding': 'FIND', 'skipped': 'SKIP'}


# --- commands ----------------------------------------------------------------

def cmd_count(variety: str, p: int, method: str, env: RunEnv) -> CountRecord:
    """Compute (or serve from the cache) [variety]_p by method."""
    ceiling = METHOD_CEILINGS.get(method)
    if ceiling is not None and p > ceiling:
        raise DomainError(f"p={p} exceeds the {method} ceiling {ceiling}")
    return compute_count(variety, make_field_ctx(p), method, env)


def cmd_verify(claim: str, pmin, pmax, env: RunEnv) -> VerificationRun:
    return run_claim(claim, pmin, pmax, env)


def _markdown(frame: pd.DataFrame) -> str:
    if frame.empty:
        return '_none_\n'
    header = '| ' + ' | '.join(map(str, frame.columns)) + ' |'
    rule = '|' + '|'.join('---' for _ in frame.columns) + '|'
    body = ['| ' + ' | '.join(str(v) for v in row) + ' |' for row in frame.itertuples(index=False)]
    return '\n'.join([header, rule] + body) + '\n'


def cmd_report(fmt: str, cache: PointCountCache) -> str:
    """All cached counts and verification runs as csv, json or markdown."""
    if len(cache) == 0 and not cache.runs:
        raise DataError(f"cache {cache.path} is empty; run count or verify first")
    counts, runs = cache.counts_frame(), cache.runs_frame()
    if fmt == 'json':
        doc = {
            'counts': [entry.record.to_dict() for entry in cache.entries()],
            'runs': [run.to_dict() for run in cache.runs],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + '\n'
    if fmt == 'csv':
        out = io.StringIO()
        counts.to_csv(out, index=False)
        out.write('\n')
        runs.to_csv(out, index=False)
        return out.getvalue()
    if fmt == 'markdown':
        return '## Point counts\n\n' + _markdown(counts) + '\n## Verification runs\n\n' + _markdown(runs)
    raise DataError(f"unknown report format {fmt!r}")


def print_run(run: VerificationRun):
    """PASS/FAIL rows followed by the summary line."""
    print(f"Verifying {run.claim}" + (f" for {run.pmin} <= p <= {run.pmax}" if run.pmin is not None else ''))
    for row in run.rows:
        tag = STATUS_TAGS.get(row.status, row.status.upper())
        where = f"p={row.p} " if row.p else ''
        detail = "no data" if row.status == 'skipped' else f"predicted {row.predicted}, counted {row.counted}"
        print(f"  {tag}  {where}{row.label}: {detail}  ({row.methods}, {row.wall_ms:.1f} ms)")
    for note in run.notes:
        print(f"  NOTE  {note}")
    passed = sum(1 for row in run.rows if row.passed)
    failed = len(run.rows) - passed
    findings = sum(1 for row in run.rows if row.status == 'finding')
    skipped = sum(1 for row in run.rows if row.status == 'skipped')
    print(f"\n{'=' * 60}")
    extra = []
    if findings:
        extra.append(f"{findings} findings")
    if skipped:
        extra.append(f"{skipped} skipped")
    print(f"Results: {passed} passed, {failed} failed" + (f" ({', '.join(extra)})" if extra else ''))


def _print_frame(frame: pd.DataFrame, fmt: str):
    if fmt == 'json':
        print(frame.to_json(orient='records'))
    elif fmt == 'markdown':
        print(_markdown(frame), end='')
    else:
        print(frame.to_csv(index=False), end='')


def cmd_forms(p: int, env: RunEnv, fmt: str):
    ctx = make_field_ctx(p)
    row = {'p': ctx.p}
    row.update({f"a{j}": a for j, a in cm_coefficients(ctx.p).items()})
    try:
        w6, w4 = env.level8()
        row['level8_a'] = w6.coefficient(ctx.p)
        row['level8_b'] = w4.coefficient(ctx.p)
    except DataError as e:
        print(f"level-8 coefficients unavailable: {e}", file=sys.stderr)
    _print_frame(pd.DataFrame([row]), fmt)


def cmd_analyze(variety: str, env: RunEnv, fmt: str):
    spec = load_arrangement_file(variety, data_dir=env.data_dir)
    reports = cynk_hulek_report(spec)
    failures = ch_failures(reports)
    group = automorphism_group(spec)
    doc = {
        'variety': spec.name,
        'flats': len(reports),
        'ch_failures': [{'subset': list(r.subset), 'rank': r.rank, 'point': r.point} for r in failures],
        'automorphisms': group.summary(),
    }
    if fmt == 'json':
        print(json.dumps(doc, indent=2, default=str))
        return
    print(f"{spec.name}: {len(reports)} flats, {len(failures)} failing the Cynk-Hulek condition")
    for r in failures:
        print(f"  subset {list(r.subset)} rank {r.rank} point {r.point}")
    summary = doc['automorphisms']
    print(f"  automorphisms: PGL order {summary['pgl_order']}, cover order {summary['cover_order']}, "
          f"center {summary['center_order']}, G/Z exponent {summary['quotient_exponent']}")


def cmd_quotient(variety: str, group: str, p: int, method: str, env: RunEnv, fmt: str):
    if p > config.QUOTIENT_PRIME_CEILING:
        raise DomainError(f"p={p} exceeds the quotient ceiling {config.QUOTIENT_PRIME_CEILING}")
    key = f"{variety}_involutions" if variety in ('f1', 'v32') else variety
    quotient = load_quotient_file(key, env.data_dir)
    ctx = make_field_ctx(p)
    record = count_quotient(ctx, quotient.spec, quotient.group(group), method, group, env.jobs, env.seed)
    if env.cache is not None:
        env.cache.put(record)
    if fmt == 'json':
        print(json.dumps(record.to_dict(), indent=2, sort_keys=True))
        return
    print(f"[{record.variety_id}]_{p} = {record.count} ({record.method}, {record.wall_ms:.1f} ms)")
    print(f"  base quotient: {record.details['base_quotient']}")
    if 'opposite_lift' in record.details:
        print(f"  opposite lift: {record.details['opposite_lift']}")


# --- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pointcount', description='Finite-field point-count workbench')
    parser.add_argument('--jobs', type=int, default=None, help='parallel workers (default: POINTCOUNT_JOBS)')
    parser.add_argument('--seed', type=int, default=None, help='seed for the Hilbert-90 matrices')
    parser.add_argument('--cache', default=None, help='JSONL cache path (default: POINTCOUNT_CACHE)')
    parser.add_argument('--data-dir', default=None, help='arrangement, quotient and coefficient files')
    parser.add_argument('--format', default='csv', choices=['csv', 'json', 'markdown'])
    parser.add_argument('--verbose', action='store_true', help='announce each enumeration patch')
    parser.add_argument('--recompute', action='store_true', help='recompute cached counts and compare with the cache')
    sub = parser.add_subparsers(dest='command', required=True)

    count = sub.add_parser('count', help='point count of a variety')
    count.add_argument('variety', help='f1, v32, k32, script_l or an arrangement file')
    count.add_argument('prime', type=int, nargs='?')
    count.add_argument('method', nargs='?')
    count.add_argument('-p', '--prime', dest='prime_opt', type=int)
    count.add_argument('--method', dest='method_opt')

    verify = sub.add_parser('verify', help='run a registered claim')
    verify.add_argument('claim', choices=sorted(CLAIMS))
    verify.add_argument('pmin', type=int, nargs='?')
    verify.add_argument('pmax', type=int, nargs='?')
    verify.add_argument('--range', nargs=2, type=int, metavar=('PMIN', 'PMAX'))

    sub.add_parser('report', help='cached counts and verification runs')

    forms = sub.add_parser('forms', help='modular form coefficients at p')
    forms.add_argument('prime', type=int)

    hypergeo = sub.add_parser('hypergeo', help='p^2 3F2(lambda) and 3A2(lambda) for every lambda')
    hypergeo.add_argument('prime', type=int)

    analyze = sub.add_parser('analyze', help='Cynk-Hulek scan and automorphism group')
    analyze.add_argument('variety', help='f1, v32 or an arrangement file')

    quotient = sub.add_parser('quotient', help='point count of a quotient by a group of deck maps')
    quotient.add_argument('variety', help='f1, v32 or a quotient file')
    quotient.add_argument('group')
    quotient.add_argument('prime', type=int)
    quotient.add_argument('--method', default='h90', choices=['h90', 'brute'])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cache = open_cache(args.cache)
        env = RunEnv(data_dir=args.data_dir, jobs=args.jobs, seed=args.seed, cache=cache, verbose=args.verbose,
                     recompute=args.recompute)

        if args.command == 'count':
            p = args.prime_opt or args.prime
            if p is None:
                raise DomainError("count needs a prime")
            method = args.method_opt or args.method or 'brute'
            record = cmd_count(args.variety, p, method, env)
            if args.format == 'json':
                print(json.dumps(record.to_dict(), sort_keys=True))
            else:
                print(record.count)
            return 0

        if args.command == 'verify':
            pmin, pmax = args.range if args.range else (args.pmin, args.pmax)
            run = cmd_verify(args.claim, pmin, pmax, env)
            print_run(run)
            return 0 if run.passed else 1

        if args.command == 'report':
            print(cmd_report(args.format, cache), end='')
            return 0

        if args.command == 'forms':
            cmd_forms(args.prime, env, args.format)
            return 0

        if args.command == 'hypergeo':
            if args.prime > config.HYPERGEOMETRIC_PRIME_CEILING:
                raise DomainError(f"p={args.prime} exceeds the hypergeometric ceiling")
            _print_frame(hypergeometric_frame(make_field_ctx(args.prime)), args.format)
            return 0

        if args.command == 'analyze':
            cmd_analyze(args.variety, env, args.format)
            return 0

        if args.command == 'quotient':
            cmd_quotient(args.variety, args.group, args.prime, args.method, env, args.format)
            return 0
    except IntegrityError as e:
        print(f"integrity error: {e}", file=sys.stderr)
        return 2
    except (DataError, DomainError, UnsupportedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except WorkbenchError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == '__main__':
    sys.exit(main())
