"""
Test suite for arrangements, the Cynk-Hulek scan and automorphism groups.
"""
import unittest
import sys
import os
import json
from fractions import Fraction

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.models.arrangements import (
    Arrangement, DoubleCoverSpec, automorphism_group, ch_failures, cynk_hulek_report, dump_arrangement,
    is_rational_square, load_arrangement, load_arrangement_file, subset_ranks,
)
from src.utils.data_generator import change_coordinates, make_rng, random_unimodular
from src.utils.errors import DataError, DomainError

ALPHA1 = [[0, 1, 0, 0, 0, 0], [1, 0, 0, 0, 0, 0], [0, 0, 0, 0, 1, 0],
          [0, 0, 0, 1, 0, 0], [0, 0, 1, 0, 0, 0], [0, 0, 0, 0, 0, 1]]
ALPHA2 = [[0, -1, 0, 0, 0, 0], [-1, 0, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0],
          [0, 0, 0, 0, 0, -1], [0, 0, 0, 0, 1, 0], [0, 0, 0, -1, 0, 0]]
ALPHA1ALPHA2 = [[-1, 0, 0, 0, 0, 0], [0, -1, 0, 0, 0, 0], [0, 0, 0, 0, 1, 0],
                [0, 0, 0, 0, 0, -1], [0, 0, 1, 0, 0, 0], [0, 0, 0, -1, 0, 0]]


class TestArrangementLoading(unittest.TestCase):
    """Test cases for arrangement documents."""

    def test_load_bundled_f1(self):
        """Test the bundled level-8 fivefold."""
        spec = load_arrangement_file('f1')
        self.assertEqual(spec.dim, 5)
        self.assertEqual(len(spec.forms), 12)
        self.assertEqual(spec.weights, [6, 1, 1, 1, 1, 1, 1])
        self.assertEqual(spec.branch_constant, 1)
        print(f"✓ Loaded {spec}")

    def test_normalization_tracks_unit(self):
        """Test that scaling a form moves its factor into the branch constant."""
        arrangement = Arrangement([[2, 0], [0, -3]])
        self.assertEqual(arrangement.forms, [(1, 0), (0, 1)])
        self.assertEqual(arrangement.unit, -6)
        spec = DoubleCoverSpec(arrangement, Fraction(1, 2))
        self.assertEqual(spec.branch_constant, -3)

    def test_proportional_forms_rejected(self):
        with self.assertRaises(DataError):
            Arrangement([[1, 2, 3], [-2, -4, -6]])

    def test_odd_form_count_needs_weights(self):
        doc = {'name': 'odd', 'dim': 2, 'twist': {'num': 1}, 'forms': [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}
        with self.assertRaises(DataError):
            load_arrangement(json.dumps(doc))

    def test_zero_twist_rejected(self):
        doc = {'name': 'flat', 'dim': 1, 'twist': {'num': 0}, 'forms': [[1, 0], [0, 1]]}
        with self.assertRaises(DomainError):
            load_arrangement(json.dumps(doc))

    def test_missing_field(self):
        with self.assertRaises(DataError):
            load_arrangement(json.dumps({'dim': 1, 'forms': [[1, 0], [0, 1]]}))
        with self.assertRaises(DataError):
            load_arrangement('{not json')

    def test_template_substitution(self):
        """Test that lambda fills polynomial coefficients."""
        spec = load_arrangement_file('k_lambda', lam=2)
        self.assertEqual(spec.twist, 3)
        self.assertIn((2, 1, 0), spec.forms)
        with self.assertRaises(DataError):
            load_arrangement_file('k_lambda')
        with self.assertRaises(DomainError):
            load_arrangement_file('k_lambda', lam=-1)
        print("✓ Template K_2 loaded")

    def test_dump_describes_same_cover(self):
        spec = load_arrangement_file('l_lambda', lam=3)
        again = load_arrangement(dump_arrangement(spec))
        self.assertEqual(again.forms, spec.forms)
        self.assertEqual(again.branch_constant, spec.branch_constant)
        self.assertEqual(again.weights, spec.weights)

    def test_missing_file(self):
        with self.assertRaises(DataError):
            load_arrangement_file('/nonexistent/arrangement.json')


class TestCynkHulek(unittest.TestCase):
    """Test cases for the subset scan."""

    @classmethod
    def setUpClass(cls):
        cls.f1_reports = cynk_hulek_report(load_arrangement_file('f1'))
        cls.v32_reports = cynk_hulek_report(load_arrangement_file('v32'))

    def test_subset_ranks(self):
        ranks = subset_ranks([(1, 0, 0), (0, 1, 0), (1, 1, 0)])
        self.assertEqual(ranks[0b011], 2)
        self.assertEqual(ranks[0b111], 2)
        self.assertEqual(ranks[0b100], 1)

    def test_f1_has_one_failing_flat(self):
        """Test that only the six forms x_i + x_{i+1} fail, meeting in one point."""
        self.assertEqual(len(self.f1_reports), 314)
        failures = ch_failures(self.f1_reports)
        self.assertEqual(len(failures), 1)
        self.assertEqual(failures[0].subset, (6, 7, 8, 9, 10, 11))
        self.assertEqual(failures[0].rank, 5)
        self.assertEqual(failures[0].point, (-1, 1, -1, 1, -1, 1))
        print(f"✓ F1: {len(self.f1_reports)} flats, failure at {failures[0].point}")

    def test_v32_passes(self):
        self.assertEqual(len(self.v32_reports), 383)
        self.assertEqual(ch_failures(self.v32_reports), [])
        print(f"✓ V32: {len(self.v32_reports)} flats, no failures")

    def test_failure_survives_relabelling(self):
        """Test that permuting the forms or changing coordinates keeps one failing flat of rank 5."""
        f1 = load_arrangement_file('f1')
        rng = make_rng(4)
        order = [int(i) for i in rng.permutation(12)]
        permuted = DoubleCoverSpec(Arrangement([f1.forms[i] for i in order], 5),
                                   f1.branch_constant, f1.weights, 'f1-permuted')
        failures = ch_failures(cynk_hulek_report(permuted))
        self.assertEqual(len(failures), 1)
        self.assertEqual(failures[0].subset, tuple(sorted(order.index(j) for j in range(6, 12))))
        self.assertEqual(failures[0].rank, 5)

        moved = change_coordinates(f1, random_unimodular(rng, 6))
        failures = ch_failures(cynk_hulek_report(moved))
        self.assertEqual([(r.subset, r.rank) for r in failures], [((6, 7, 8, 9, 10, 11), 5)])
        print("✓ Cynk-Hulek failure count is 1 after relabelling")

    def test_too_many_forms(self):
        forms = [[1, k, k * k] for k in range(18)]
        with self.assertRaises(DomainError):
            cynk_hulek_report(DoubleCoverSpec(Arrangement(forms)))


class TestAutomorphisms(unittest.TestCase):
    """Test cases for the automorphism search."""

    @classmethod
    def setUpClass(cls):
        cls.f1 = automorphism_group(load_arrangement_file('f1'))
        cls.v32 = automorphism_group(load_arrangement_file('v32'))

    def test_f1_orders(self):
        self.assertEqual(self.f1.pgl_order, 12)
        self.assertEqual(self.f1.cover_order, 24)
        self.assertTrue(self.f1.is_closed())
        print(f"✓ F1 automorphisms: {self.f1.pgl_order} projective, {self.f1.cover_order} on the cover")

    def test_f1_orbits(self):
        self.assertEqual(self.f1.orbits(), [[0, 1, 2, 3, 4, 5], [6, 7, 8, 9, 10, 11]])

    def test_generic_arrangement_is_rigid(self):
        """Test six points of P^1 with no symmetry: only the identity and the deck involution."""
        spec = DoubleCoverSpec(Arrangement([[1, 0], [0, 1], [1, 1], [1, 2], [1, 5], [3, 11]], 1))
        group = automorphism_group(spec)
        self.assertEqual(group.pgl_order, 1)
        self.assertEqual(group.cover_order, 2)

    def test_v32_structure(self):
        summary = self.v32.summary()
        self.assertEqual(summary['pgl_order'], 64)
        self.assertEqual(summary['center_order'], 8)
        self.assertEqual(summary['quotient_order'], 8)
        self.assertEqual(summary['quotient_exponent'], 2)
        self.assertTrue(summary['quotient_abelian'])
        print(f"✓ V32 automorphisms: order {summary['pgl_order']}, center {summary['center_order']}")

    def test_identity_first(self):
        self.assertEqual(self.v32.perms[0], self.v32.identity)

    def test_alpha_classes(self):
        """Test that alpha2 is central and alpha1 alpha2 is conjugate to alpha1."""
        a1 = self.v32.permutation_of(ALPHA1)
        a2 = self.v32.permutation_of(ALPHA2)
        a12 = self.v32.permutation_of(ALPHA1ALPHA2)
        self.assertIn(a2, self.v32.center())
        self.assertEqual(self.v32.compose(a1, a2), a12)
        self.assertTrue(self.v32.is_conjugate(a1, a12))
        with self.assertRaises(DomainError):
            self.v32.permutation_of([[1 if i == j else 0 for j in range(6)] for i in range(5)] + [[1, 1, 0, 0, 0, 1]])

    def test_rational_squares(self):
        self.assertTrue(is_rational_square(Fraction(9, 4)))
        self.assertFalse(is_rational_square(-1))
        self.assertFalse(is_rational_square(2))


if __name__ == '__main__':
    print("\nRunning Arrangement Tests...")
    print("=" * 60)
    unittest.main(verbosity=2)
