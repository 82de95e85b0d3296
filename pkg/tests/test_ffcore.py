"""
Test suite for the finite field core.
"""
import unittest
import sys
import os
from fractions import Fraction

import numpy as np

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.models.ffcore import (
    Fp2Elem, GaussInt, fp2_mul, fp2_norm, fp2_tables, frobenius, legendre, make_field_ctx,
    nullspace_mod, rank_mod, sum_of_two_squares,
)
from src.utils.errors import DomainError


class TestFieldCtx(unittest.TestCase):
    """Test cases for F_p contexts."""

    def test_rejects_non_primes(self):
        """Test that composite, even and out-of-range p are refused."""
        for bad in (1, 2, 4, 9, 15, 2**31 + 11):
            with self.assertRaises(DomainError):
                make_field_ctx(bad)
        with self.assertRaises(DomainError):
            make_field_ctx(5.0)
        print("✓ Non-primes rejected")

    def test_quadratic_character(self):
        """Test the Legendre symbol table."""
        ctx = make_field_ctx(7)
        self.assertEqual([legendre(ctx, x) for x in range(7)], [0, 1, 1, -1, 1, -1, -1])
        self.assertEqual(ctx.legendre(-1), -1)
        self.assertEqual(make_field_ctx(13).legendre(-1), 1)
        self.assertFalse(ctx.sqtable.flags.writeable)
        print("✓ Legendre table correct")

    def test_multiplicativity(self):
        """Test phi(xy) = phi(x) phi(y) exhaustively at p = 11."""
        ctx = make_field_ctx(11)
        for x in range(11):
            for y in range(11):
                self.assertEqual(ctx.legendre(x * y), ctx.legendre(x) * ctx.legendre(y))

    def test_primitive_root_and_logs(self):
        """Test the discrete-log tables."""
        ctx = make_field_ctx(13)
        self.assertEqual(ctx.g, 2)
        for x in range(1, 13):
            self.assertEqual(pow(ctx.g, int(ctx.dlog[x]), 13), x)
            self.assertEqual(int(ctx.powers[ctx.dlog[x]]), x)
        self.assertEqual(ctx.nonresidue, 2)
        print(f"✓ Primitive root {ctx.g} and logs consistent")

    def test_reduce(self):
        """Test reduction of rationals."""
        ctx = make_field_ctx(5)
        self.assertEqual(ctx.reduce(Fraction(1, 2)), 3)
        self.assertEqual(ctx.reduce(-7), 3)
        with self.assertRaises(DomainError):
            ctx.reduce(Fraction(1, 10))
        with self.assertRaises(DomainError):
            ctx.inv(0)


class TestLinearAlgebra(unittest.TestCase):
    """Test cases for linear algebra modulo p."""

    def test_rank_and_nullspace(self):
        """Test that null vectors are annihilated and the dimensions add up."""
        ctx = make_field_ctx(7)
        rows = [[1, 2, 3, 4], [0, 1, 5, 2]]
        self.assertEqual(rank_mod(ctx, rows), 2)
        basis = nullspace_mod(ctx, rows, 4)
        self.assertEqual(basis.shape, (4, 2))
        self.assertTrue(np.all(np.array(rows) @ basis % 7 == 0))
        print("✓ Null space has dimension 2")

    def test_rank_drops_modulo_p(self):
        """Test a matrix that is singular only modulo p."""
        rows = [[1, 1], [1, 6]]
        self.assertEqual(rank_mod(make_field_ctx(5), rows), 1)
        self.assertEqual(rank_mod(make_field_ctx(7), rows), 2)


class TestFp2(unittest.TestCase):
    """Test cases for F_{p^2} arithmetic."""

    @classmethod
    def setUpClass(cls):
        cls.ctx = make_field_ctx(5)
        cls.tables = fp2_tables(cls.ctx)

    def test_frobenius_is_pth_power(self):
        """Test x^p = frobenius(x) for every element."""
        ctx = self.ctx
        for a in range(5):
            for b in range(5):
                x = Fp2Elem(a, b)
                power = Fp2Elem(1, 0)
                for _ in range(5):
                    power = fp2_mul(ctx, power, x)
                self.assertEqual(power, frobenius(ctx, x))
        print("✓ Frobenius matches x^p")

    def test_norm_lands_in_fp(self):
        """Test that x * x^p is the norm."""
        x = Fp2Elem(2, 3)
        product = fp2_mul(self.ctx, x, frobenius(self.ctx, x))
        self.assertEqual(product, Fp2Elem(fp2_norm(self.ctx, x), 0))

    def test_log_exp_tables(self):
        """Test that the generator has order q - 1 and the tables invert each other."""
        t = self.tables
        self.assertEqual(t.order, 24)
        logs = t.log_table[t.exp_a + 5 * t.exp_b]
        self.assertTrue(np.array_equal(logs, np.arange(24)))
        self.assertEqual(len(set(zip(t.exp_a.tolist(), t.exp_b.tolist()))), 24)
        a, b = t.mul(np.array([2]), np.array([3]), np.array([4]), np.array([1]))
        expected = fp2_mul(self.ctx, Fp2Elem(2, 3), Fp2Elem(4, 1))
        self.assertEqual((int(a[0]), int(b[0])), (expected.a, expected.b))
        print("✓ F_25 log/exp tables consistent")

    def test_inverse(self):
        x = Fp2Elem(3, 4)
        self.assertEqual(fp2_mul(self.ctx, x, self.tables.inv_scalar(x)), Fp2Elem(1, 0))
        with self.assertRaises(DomainError):
            self.tables.inv_scalar(Fp2Elem(0, 0))


class TestGaussianIntegers(unittest.TestCase):
    """Test cases for primary decompositions p = a^2 + b^2."""

    def test_known_decompositions(self):
        """Test the primary representative for small primes."""
        self.assertEqual(sum_of_two_squares(5), GaussInt(-1, 2))
        self.assertEqual(sum_of_two_squares(13), GaussInt(3, 2))
        self.assertEqual(sum_of_two_squares(17), GaussInt(1, 4))
        print("✓ Primary decompositions of 5, 13, 17")

    def test_norm_and_primary_congruence(self):
        """Test a^2 + b^2 = p and a + bi = 1 mod (2 + 2i) for p = 1 mod 4 below 200."""
        for p in (5, 13, 17, 29, 37, 41, 53, 61, 73, 89, 97, 101, 109, 113, 137, 149, 157, 173, 181, 193, 197):
            pi = sum_of_two_squares(p)
            self.assertEqual(pi.norm(), p)
            self.assertTrue(GaussInt(pi.a - 1, pi.b).divisible_by(GaussInt(2, 2)))

    def test_rejects_three_mod_four(self):
        with self.assertRaises(DomainError):
            sum_of_two_squares(7)
        with self.assertRaises(DomainError):
            sum_of_two_squares(21)

    def test_powers(self):
        z = GaussInt(-1, 2)
        self.assertEqual(z ** 2, GaussInt(-3, -4))
        self.assertEqual((z ** 3).trace(), 22)
        self.assertEqual(z * z.conjugate(), GaussInt(5, 0))


if __name__ == '__main__':
    print("\nRunning Finite Field Core Tests...")
    print("=" * 60)
    unittest.main(verbosity=2)
