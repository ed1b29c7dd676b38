import math
import unittest

import numpy as np
from numpy.testing import assert_allclose

import polypade.series.polyseries as ps
import polypade.approx.takagi_engine as te

S2 = 1 / math.sqrt(2)


def half_sum(bound: tuple[int, int] = (1, 1)) -> ps.TruncatedPoly:
    return ps.TruncatedPoly.from_mapping({(1, 0): 0.5, (0, 1): 0.5}, bound)


def raw_matrix(a: np.ndarray) -> te.ConSymMatrix:
    return te.ConSymMatrix(ps.enumerate_box((a.shape[0] - 1,)), a)


class TakagiEngineTest(unittest.TestCase):
    rng: np.random.Generator

    @classmethod
    def setUpClass(cls) -> None:
        cls.rng = np.random.default_rng(7)

    def random_symmetric(self, size: int) -> np.ndarray:
        g = self.rng.normal(size=(size, size)) + 1j * self.rng.normal(size=(size, size))
        return g + g.T

    def random_symbol(self, bound: tuple[int, ...]) -> ps.TruncatedPoly:
        box = ps.enumerate_box(bound)
        c = self.rng.normal(size=len(box)) + 1j * self.rng.normal(size=len(box))
        return ps.TruncatedPoly(box, c / np.sum(np.abs(c)))

    def test_half_sum_matrix(self):
        a = te.build_con_matrix(half_sum(), (1, 1))
        self.assertFalse(a.truncated)
        expected = np.zeros((4, 4))
        for i, j in [(1, 3), (3, 1), (2, 3), (3, 2)]:
            expected[i, j] = 0.5
        assert_allclose(a.entries, expected)

    def test_half_sum_eigenpair(self):
        a = te.build_con_matrix(half_sum((2, 2)), (1, 1))
        pair = te.con_eig_max(a)
        self.assertAlmostEqual(pair.sigma, S2, delta=1e-10)
        p = np.array([0, 0.5, 0.5, S2])
        self.assertGreaterEqual(abs(np.vdot(p, pair.q.coeffs)), 1 - 1e-8)
        assert_allclose(pair.q.coeffs, p, atol=1e-10)
        self.assertEqual(pair.multiplicity, 2)
        q_star = ps.reflect(pair.q, (1, 1))
        assert_allclose(q_star.coeffs, [S2, 0.5, 0.5, 0], atol=1e-10)

    def test_simple_cluster(self):
        pair = te.con_eig_max(raw_matrix(np.diag([3.0, 1.0]).astype(complex)))
        self.assertAlmostEqual(pair.sigma, 3, delta=1e-12)
        self.assertEqual(pair.multiplicity, 1)
        assert_allclose(pair.q.coeffs, [1, 0], atol=1e-12)

    def test_degenerate_cluster(self):
        a = raw_matrix(2 * np.array([[0, 1], [1, 0]], dtype=complex))
        first = te.con_eig_max(a)
        self.assertAlmostEqual(first.sigma, 2, delta=1e-12)
        self.assertEqual(first.multiplicity, 2)
        # |q_1| ties across the cluster, the real part breaks it
        assert_allclose(first.q.coeffs, [S2, S2], atol=1e-10)
        for _ in range(3):
            again = te.con_eig_max(a)
            np.testing.assert_array_equal(again.q.coeffs, first.q.coeffs)

        # the same cluster presented with a unitary congruence still resolves to a real vector
        u = np.diag([1j, 1j])
        rotated = te.con_eig_max(raw_matrix(u @ a.entries @ u.T))
        self.assertEqual(rotated.multiplicity, 2)
        self.assertAlmostEqual(rotated.sigma, 2, delta=1e-12)
        self.assertLessEqual(float(np.linalg.norm(rotated.q.coeffs.imag)), 1e-10)

    def test_box_enlargement(self):
        f = half_sum((2, 2))
        sigma = {n: te.con_eig_max(te.build_con_matrix(f, n)).sigma for n in [(1, 0), (0, 1), (1, 1)]}
        self.assertAlmostEqual(sigma[(1, 0)], 0.5, delta=1e-12)
        self.assertAlmostEqual(sigma[(0, 1)], 0.5, delta=1e-12)
        self.assertAlmostEqual(sigma[(1, 1)], S2, delta=1e-12)
        self.assertLess(sigma[(1, 0)], sigma[(1, 1)])

        for k in range(10):
            with self.subTest(trial=k):
                g = self.random_symbol((6, 6))
                sigmas = [te.con_eig_max(te.build_con_matrix(g, (m, m))).sigma for m in range(4)]
                self.assertTrue(all(b >= a - 1e-12 for a, b in zip(sigmas, sigmas[1:])))

    def test_truncated_table(self):
        a = te.build_con_matrix(ps.TruncatedPoly.monomial((0, 0), (0, 0)), (1, 1))
        self.assertTrue(a.truncated)
        with self.assertRaises(ps.BoxMismatch):
            te.build_con_matrix(half_sum(), (1,))

    def test_random_symmetric(self):
        for k in range(100):
            size = int(self.rng.integers(2, 33))
            with self.subTest(trial=k, size=size):
                a = raw_matrix(self.random_symmetric(size))
                pair = te.con_eig_max(a)
                top = np.linalg.svd(a.entries, compute_uv=False)[0]
                self.assertLessEqual(pair.residual, 1e-10 * a.frobenius)
                self.assertAlmostEqual(pair.sigma / top, 1, delta=1e-10)
                self.assertAlmostEqual(pair.q.norm(), 1, delta=1e-12)

    def test_con_eig_all(self):
        a = raw_matrix(self.random_symmetric(6))
        pairs = te.con_eig_all(a)
        sigmas = [p.sigma for p in pairs]
        assert_allclose(sigmas, np.linalg.svd(a.entries, compute_uv=False), rtol=1e-10)
        for pair in pairs:
            with self.subTest(sigma=pair.sigma):
                r1, r2 = te.schmidt_check(a, pair)
                self.assertLessEqual(r1, 1e-10 * a.frobenius)
                self.assertLessEqual(r2, 1e-10 * a.frobenius)

    def test_schmidt_pair(self):
        a = te.build_con_matrix(half_sum(), (1, 1))
        r1, r2 = te.schmidt_check(a, te.con_eig_max(a))
        self.assertLess(r1, 1e-12)
        self.assertLess(r2, 1e-12)

    def test_not_symmetric(self):
        g = self.rng.normal(size=(3, 3))
        with self.assertRaises(ValueError):
            te.con_eig_max(raw_matrix(g + 1j * g.T + np.triu(np.ones((3, 3)), 1)))

    def test_convergence_failure(self):
        a = raw_matrix(self.random_symmetric(5))
        with self.assertRaises(te.ConvergenceFailure):
            te.con_eig_max(a, te.ConEigOptions(rtol=1e-30))

    def test_zero_matrix(self):
        pair = te.con_eig_max(raw_matrix(np.zeros((3, 3), dtype=complex)))
        self.assertEqual(pair.sigma, 0)
        self.assertAlmostEqual(pair.q.norm(), 1)

    def test_c_symmetry(self):
        for k in range(20):
            d = int(self.rng.integers(1, 4))
            n = tuple(int(v) for v in self.rng.integers(0, 4, size=d))
            with self.subTest(trial=k, n=n):
                f = self.random_symbol(n)
                self.assertLessEqual(te.c_symmetry_check(f, n), 1e-13)

    def test_reversal(self):
        j = te.reversal_permutation((2, 1))
        assert_allclose(j @ j, np.eye(6))
        box = ps.enumerate_box((2, 1))
        e = np.zeros(6)
        e[box.position[(1, 0)]] = 1
        self.assertEqual(int(np.argmax(j @ e)), box.position[(1, 1)])

    def test_hankel_half_sum(self):
        f = half_sum((2, 2))
        p = ps.TruncatedPoly.from_mapping({(1, 0): 0.5, (0, 1): 0.5, (1, 1): S2})
        q = ps.TrigPoly.from_poly(p, shift=(-1, -1))
        self.assertAlmostEqual(te.hankel_form(f, q, q, (1, 1)), S2, delta=1e-12)

    def test_hankel_optimality(self):
        n = (2, 2)
        indices = [(a, b) for a in range(-2, 3) for b in range(-2, 3)]
        for k in range(5):
            with self.subTest(symbol=k):
                f = self.random_symbol((4, 4))
                sigma, extremal = te.hankel_extremal(f, n)
                self.assertAlmostEqual(extremal.norm(), 1, delta=1e-12)
                self.assertAlmostEqual(te.hankel_form(f, extremal, extremal, n).real, sigma, delta=1e-9)
                sigma_2n = te.con_eig_max(te.build_con_matrix(f, (4, 4))).sigma
                self.assertAlmostEqual(sigma, sigma_2n, delta=1e-12)
                for _ in range(200):
                    c = self.rng.normal(size=len(indices)) + 1j * self.rng.normal(size=len(indices))
                    q = ps.TrigPoly(2, dict(zip(indices, c / np.linalg.norm(c))))
                    self.assertLessEqual(te.hankel_form(f, q, q, n).real, sigma + 1e-9)

    def test_hankel_support(self):
        f = half_sum((2, 2))
        wide = ps.TrigPoly(2, {(-3, 0): 1.0})
        with self.assertRaises(te.SupportMismatch):
            te.hankel_form(f, wide, wide, (2, 2))
        with self.assertRaises(te.SupportMismatch):
            te.hankel_form(half_sum(), wide, wide)


if __name__ == "__main__":
    unittest.main()
