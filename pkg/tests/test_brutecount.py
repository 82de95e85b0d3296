"""
Test suite for brute-force enumeration of double covers.
"""
import unittest
import sys
import os

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.models.arrangements import Arrangement, DoubleCoverSpec, load_arrangement_file
from src.models.brutecount import (
    base_size, count_double_cover, count_fibre, count_on_subspace, count_projective_space,
    count_quotient_product, count_quotient_product_direct, fibre_consistency, projective_line,
    sign_census, weil_deviation, within_weil_bound,
)
from src.models.ffcore import make_field_ctx
from src.utils.data_generator import (
    change_coordinates, generate_sample_covers, make_rng, perturbed_arrangement, random_affine_cover,
    random_square_twist, random_unimodular,
)
from src.utils.errors import DomainError

V32_PENCIL = ((1, 1, 0, 0, 0, 0), (0, 0, 1, 0, 1, 0))


def conic():
    """t^2 = x0 x1 over P^1, a smooth conic."""
    return DoubleCoverSpec(Arrangement([[1, 0], [0, 1]]), 1, name='conic')


class TestSmallCovers(unittest.TestCase):
    """Test cases with counts that can be checked by hand."""

    def test_projective_space_sizes(self):
        ctx = make_field_ctx(5)
        self.assertEqual(count_projective_space(ctx, 2), 31)
        self.assertEqual(count_projective_space(ctx, 0), 1)
        self.assertEqual(count_projective_space(ctx, -1), 0)
        self.assertEqual(base_size(ctx, 2, 'affine'), 125)
        self.assertEqual(base_size(ctx, 2, 1), 5)

    def test_conic_has_p_plus_one_points(self):
        """Test the census of x0 x1 on P^1."""
        for p in (3, 5, 7, 11):
            ctx = make_field_ctx(p)
            census = sign_census(ctx, conic())
            self.assertEqual(census.as_tuple(), ((p - 1) // 2, 2, (p - 1) // 2))
            self.assertEqual(count_double_cover(ctx, conic()).count, p + 1)
        print("✓ Conic counts p + 1")

    def test_affine_line(self):
        """Test t^2 = x on the affine line."""
        ctx = make_field_ctx(7)
        spec = DoubleCoverSpec(Arrangement([[1]]), 1, name='line')
        self.assertEqual(count_double_cover(ctx, spec, 'affine').count, 7)
        with self.assertRaises(DomainError):
            count_double_cover(ctx, spec)

    def test_twist_vanishing_mod_p(self):
        ctx = make_field_ctx(5)
        with self.assertRaises(DomainError):
            count_double_cover(ctx, DoubleCoverSpec(Arrangement([[1, 0], [0, 1]]), 5))

    def test_bad_patch(self):
        with self.assertRaises(DomainError):
            count_double_cover(make_field_ctx(5), conic(), 7)

    def test_weil_deviation(self):
        ctx = make_field_ctx(5)
        self.assertEqual(weil_deviation(ctx, 38), 7)
        self.assertTrue(within_weil_bound(ctx, 31 + 110))
        self.assertFalse(within_weil_bound(ctx, 31 + 111))


class TestBundledCounts(unittest.TestCase):
    """Test cases for the level-8 and level-32 fivefolds."""

    @classmethod
    def setUpClass(cls):
        cls.f1 = load_arrangement_file('f1')
        cls.v32 = load_arrangement_file('v32')

    def test_f1_counts(self):
        """Test [F1]_p for p = 3, 5."""
        self.assertEqual(count_double_cover(make_field_ctx(3), self.f1).count, 365)
        record = count_double_cover(make_field_ctx(5), self.f1)
        self.assertEqual(record.count, 3965)
        self.assertEqual(record.method, 'brute')
        self.assertEqual(sum(record.details['census']), count_projective_space(make_field_ctx(5), 5))
        print(f"✓ [F1]_5 = {record.count} in {record.wall_ms:.1f} ms")

    def test_v32_counts(self):
        self.assertEqual(count_double_cover(make_field_ctx(3), self.v32).count, 364)
        self.assertEqual(count_double_cover(make_field_ctx(5), self.v32).count, 3978)

    def test_partitions_do_not_change_the_count(self):
        ctx = make_field_ctx(5)
        baseline = sign_census(ctx, self.f1, partitions=1)
        for partitions in (2, 3, 7):
            self.assertEqual(sign_census(ctx, self.f1, jobs=1, partitions=partitions), baseline)
        print("✓ Census independent of the partition")


class TestProductsAndFibres(unittest.TestCase):
    """Test cases for quotient products and linear fibres."""

    def test_quotient_product_matches_burnside(self):
        """Test the census formula against the direct Frobenius-twist count."""
        ctx = make_field_ctx(7)
        rng = make_rng(11)
        for _ in range(5):
            specs = [random_affine_cover(rng, dim=1, n_forms=3, name='a'),
                     random_affine_cover(rng, dim=1, n_forms=4, name='b')]
            formula = count_quotient_product(ctx, specs, ['affine', 'affine']).count
            self.assertEqual(formula, count_quotient_product_direct(ctx, specs))
        print("✓ Product quotients agree with the direct count")

    def test_direct_oracle_needs_affine_bases(self):
        with self.assertRaises(DomainError):
            count_quotient_product_direct(make_field_ctx(5), [conic(), conic()], ['projective', 'projective'])

    def test_fibres_add_up(self):
        """Test that the fibres of a pencil cover the fivefold once, plus p copies of the base locus."""
        ctx = make_field_ctx(3)
        fibres, total = fibre_consistency(ctx, load_arrangement_file('v32'), V32_PENCIL)
        self.assertEqual(total, 364)
        self.assertEqual(fibres, total)
        print("✓ Fibre sums match the total count")

    def test_conic_fibres(self):
        """Test fibres of x -> (x0 : x1) on the conic."""
        ctx = make_field_ctx(5)
        fmap = ((1, 0), (0, 1))
        counts = {value: count_fibre(ctx, conic(), fmap, value).count for value in projective_line(ctx)}
        self.assertEqual(counts[(0, 1)], 1)
        self.assertEqual(counts[(1, 0)], 1)
        self.assertEqual(sum(counts.values()), 6)
        with self.assertRaises(DomainError):
            count_fibre(ctx, conic(), fmap, (0, 0))
        with self.assertRaises(DomainError):
            count_fibre(ctx, conic(), ((1, 0), (2, 0)), (1, 1))

    def test_empty_subspace(self):
        ctx = make_field_ctx(5)
        self.assertEqual(count_on_subspace(ctx, conic(), [[1, 0], [0, 1]]), 0)


class TestInvariance(unittest.TestCase):
    """Property checks on seeded random covers."""

    @classmethod
    def setUpClass(cls):
        cls.ctx = make_field_ctx(7)
        cls.covers = generate_sample_covers(5, seed=3)

    def test_square_twists(self):
        """Test that twisting by a nonzero square leaves the count unchanged."""
        rng = make_rng(5)
        checked = 0
        while checked < 20:
            square = random_square_twist(rng)
            if square % self.ctx.p == 0:
                continue
            spec = self.covers[checked % len(self.covers)]
            self.assertEqual(count_double_cover(self.ctx, spec.with_twist(square)).count,
                             count_double_cover(self.ctx, spec).count)
            checked += 1
        print("✓ Square twists leave 20 counts unchanged")

    def test_coordinate_changes(self):
        """Test that unimodular coordinate changes leave the count unchanged."""
        rng = make_rng(9)
        for spec in self.covers:
            moved = change_coordinates(spec, random_unimodular(rng, spec.dim + 1))
            self.assertEqual(count_double_cover(self.ctx, moved).count, count_double_cover(self.ctx, spec).count)

    def test_perturbation_keeps_shape(self):
        spec = load_arrangement_file('f1')
        perturbed = perturbed_arrangement(spec, make_rng(2))
        self.assertEqual(len(perturbed.forms), 12)
        self.assertEqual(perturbed.weights, spec.weights)
        self.assertEqual(len(set(perturbed.forms)), 12)
        self.assertLessEqual(sum(a != b for a, b in zip(spec.forms, perturbed.forms)), 2)


if __name__ == '__main__':
    print("\nRunning Brute Count Tests...")
    print("=" * 60)
    unittest.main(verbosity=2)
