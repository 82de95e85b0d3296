"""
Acceptance run for the point-count workbench.
Runs every registered claim over its desk-scale prime range and records the
results in the point-count cache.
"""
import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from config.config import config
from src.cli.app import print_run
from src.data.models import open_cache
from src.models.verification import RunEnv, run_claim
from src.utils.errors import WorkbenchError

# (claim, pmin, pmax); None keeps the registered range
STAGES = [
    ('Checking arrangement structure', [('ch-criterion', None, None), ('aut-orders', None, None)]),
    ('Checking coefficient oracles', [('coef-identities', 3, 199), ('fop-identities', 3, 61)]),
    ('Checking closed forms against enumeration',
     [('surface-formulas', 3, 7), ('fibre-excess', 3, 5)]),
    ('Checking the level-8 and level-32 counts',
     [('thm-count-32', 3, 7), ('f1-fibration', 3, 7), ('f1-hypergeometric', 3, 199),
      ('v32-fibration', 3, 61), ('thm-main-first', 3, 7)]),
    ('Checking quotients',
     [('h90-oracle', 3, 3), ('prop-count-q-r', 3, 5), ('conj-q2', 3, 5), ('conj-q3', 3, 5),
      ('conj-count-mod-a1', 3, 5), ('rigid-32', 3, 5)]),
]


def verify_all() -> bool:
    """Run the acceptance suite; True when no row failed."""
    print("Starting acceptance run...")
    cache = open_cache()
    env = RunEnv(cache=cache, verbose=config.VERBOSE)
    print(f"Cache: {cache.path} ({len(cache)} counts)")

    ok = True
    for number, (title, claims) in enumerate(STAGES, start=1):
        print(f"\n{number}. {title}...")
        for claim, pmin, pmax in claims:
            try:
                run = run_claim(claim, pmin, pmax, env)
            except WorkbenchError as e:
                print(f"   ✗ {claim}: {e}")
                ok = False
                continue
            print_run(run)
            ok = ok and run.passed

    if ok:
        print("\n✓ Acceptance run complete!")
    else:
        print("\n✗ Acceptance run found failing rows")
    print("\nYou can now:")
    print("  - Inspect the results: python src/cli/app.py --format markdown report")
    print("  - Run the unit tests: python -m unittest discover tests")
    print(f"  - Rerun with more workers: POINTCOUNT_JOBS=4 (currently {config.JOBS})")
    return ok


if __name__ == '__main__':
    sys.exit(0 if verify_all() else 1)
