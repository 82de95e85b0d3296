"""
Test suite for the command-line front end.
"""
import unittest
import sys
import os
import io
import json
import shutil
import tempfile
from contextlib import redirect_stderr, redirect_stdout

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.cli.app import build_parser, main
from src.models.modforms import level8_forms
from src.utils.errors import DataError

try:
    level8_forms()
    LEVEL8_MISSING = ''
except DataError as e:
    LEVEL8_MISSING = f"level-8 coefficient files unavailable: {e}"


class TestCLI(unittest.TestCase):
    """Test cases for subcommands and exit codes."""

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()
        self.cache = os.path.join(self.tmpdir, 'counts.jsonl')

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def run_cli(self, *args):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(['--cache', self.cache, '--jobs', '1', *args])
        return code, out.getvalue(), err.getvalue()

    def test_count(self):
        code, out, _ = self.run_cli('count', 'f1', '3', 'brute')
        self.assertEqual(code, 0)
        self.assertEqual(out.strip(), '365')
        code, out, _ = self.run_cli('--format', 'json', 'count', 'v32', '-p', '5', '--method', 'formula')
        self.assertEqual(json.loads(out)['count'], 3978)
        print("✓ count prints exact integers")

    def test_verbose_count(self):
        code, out, _ = self.run_cli('--verbose', 'count', 'k32', '5', 'brute')
        self.assertEqual(code, 0)
        lines = out.strip().splitlines()
        self.assertEqual(lines[0].strip(), 'patch x0 = 1 (25 points)')
        self.assertEqual(lines[-1], '25')

    def test_count_errors(self):
        code, _, err = self.run_cli('count', 'f1', '37', 'brute')
        self.assertEqual(code, 2)
        self.assertIn('ceiling', err)
        self.assertEqual(self.run_cli('count', 'f1', '9')[0], 2)
        self.assertEqual(self.run_cli('count', 'f1')[0], 2)

    def test_verify_and_report(self):
        code, out, _ = self.run_cli('verify', 'thm-count-32', '--range', '3', '5')
        self.assertEqual(code, 0)
        self.assertIn('PASS', out)
        self.assertIn('Results: 2 passed, 0 failed', out)

        code, out, _ = self.run_cli('--format', 'markdown', 'report')
        self.assertEqual(code, 0)
        self.assertIn('## Point counts', out)
        self.assertIn('thm-count-32', out)

        code, out, _ = self.run_cli('--format', 'json', 'report')
        doc = json.loads(out)
        self.assertEqual(len(doc['runs']), 1)
        print("✓ verify and report round through the cache")

    def test_empty_report(self):
        code, _, err = self.run_cli('report')
        self.assertEqual(code, 2)
        self.assertIn('empty', err)

    @unittest.skipIf(LEVEL8_MISSING, LEVEL8_MISSING)
    def test_forms(self):
        code, out, _ = self.run_cli('forms', '5')
        self.assertEqual(code, 0)
        lines = out.strip().splitlines()
        self.assertEqual(lines[0], 'p,a2,a3,a4,a6,level8_a,level8_b')
        self.assertEqual(lines[1], '5,-2,-6,22,-82,-74,-2')

    def test_missing_level8_data(self):
        empty = os.path.join(self.tmpdir, 'no-data')
        code, out, _ = self.run_cli('--data-dir', empty, 'verify', 'thm-main-first', '3', '5')
        self.assertEqual(code, 0)
        self.assertIn('SKIP  p=3 data unavailable', out)
        self.assertIn('(1 skipped)', out)
        code, out, err = self.run_cli('--data-dir', empty, 'forms', '5')
        self.assertEqual(code, 0)
        self.assertEqual(out.strip().splitlines()[0], 'p,a2,a3,a4,a6')
        self.assertIn('unavailable', err)
        print("✓ Missing level-8 files are reported, not fatal")

    def test_recompute_flag(self):
        self.assertEqual(self.run_cli('count', 'v32', '3', 'brute')[1].strip(), '364')
        with open(self.cache, 'a', encoding='utf-8') as fh:
            fh.write(json.dumps({'kind': 'count', 'variety_id': 'v32', 'p': 5, 'method': 'brute', 'count': 1}) + '\n')
        self.assertEqual(self.run_cli('count', 'v32', '5', 'brute')[1].strip(), '1')
        code, _, err = self.run_cli('--recompute', 'count', 'v32', '5', 'brute')
        self.assertEqual(code, 2)
        self.assertIn('integrity error', err)
        self.assertEqual(self.run_cli('--recompute', 'count', 'v32', '3', 'brute')[0], 0)

    def test_hypergeo(self):
        code, out, _ = self.run_cli('--format', 'json', 'hypergeo', '5')
        self.assertEqual(code, 0)
        rows = json.loads(out)
        self.assertEqual([r['p2_times_f32'] for r in rows], [-6, -1, 1, 5])

    def test_analyze(self):
        code, out, _ = self.run_cli('analyze', 'f1')
        self.assertEqual(code, 0)
        self.assertIn('1 failing', out)
        self.assertIn('(-1, 1, -1, 1, -1, 1)', out)

    def test_quotient(self):
        code, out, _ = self.run_cli('quotient', 'f1', 'Q2', '3')
        self.assertEqual(code, 0)
        self.assertIn('= 376', out)
        self.assertEqual(self.run_cli('quotient', 'f1', 'Q2', '23')[0], 2)
        self.assertEqual(self.run_cli('quotient', 'f1', 'Q9', '3')[0], 2)

    def test_unknown_claim_is_a_usage_error(self):
        with redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as cm:
                build_parser().parse_args(['verify', 'no-such-claim'])
        self.assertEqual(cm.exception.code, 2)


if __name__ == '__main__':
    print("\nRunning CLI Tests...")
    print("=" * 60)
    unittest.main(verbosity=2)
