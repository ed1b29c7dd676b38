import cmath
import unittest

import numpy as np
from numpy.testing import assert_allclose

import polypade.interp.k11 as k11
import polypade.interp.cf_interp as cf
import polypade.series.polyseries as ps


def random_disk(rng: np.random.Generator, radius: float, size: int) -> np.ndarray:
    return radius * np.sqrt(rng.uniform(size=size)) * np.exp(2j * np.pi * rng.uniform(size=size))


def structure_batch(c01: np.ndarray, c10: np.ndarray, c11: np.ndarray) -> np.ndarray:
    """X for the box (1, 1) in the order 1, z, w, zw, one matrix per point."""
    x = np.zeros((c01.size, 4, 4), dtype=complex)
    x[:, [0, 1, 2, 3], [0, 1, 2, 3]] = 1
    x[:, 1, 0] = c10
    x[:, 2, 0] = c01
    x[:, 3, 0] = c11
    x[:, 3, 1] = c01
    x[:, 3, 2] = c10
    return x


class K11Test(unittest.TestCase):
    rng: np.random.Generator

    @classmethod
    def setUpClass(cls) -> None:
        cls.rng = np.random.default_rng(11)

    def random_points(self, count: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            random_disk(self.rng, 1.2, count),
            random_disk(self.rng, 1.2, count),
            random_disk(self.rng, 2.5, count),
        )

    def test_check_examples(self):
        v = k11.k11_check(0, 0, 0)
        self.assertTrue(v.member)
        self.assertEqual((v.slack1, v.slack2), (4, 2))
        v = k11.k11_check(2, 0, 0)
        self.assertTrue(v.member)
        self.assertEqual((v.slack1, v.slack2), (0, 0))
        v = k11.k11_check(0, 0, 3)
        self.assertFalse(v.member)
        self.assertEqual(v.slack1, -2)

    def test_structure_layout(self):
        c01, c10, c11 = 0.3 + 0.1j, -0.2j, 0.4
        data = cf.CFData.from_table(k11.K11Point(c01, c10, c11).to_table())
        expected = structure_batch(np.array([c01]), np.array([c10]), np.array([c11]))[0]
        assert_allclose(cf.build_structure(data).x, expected)

    def test_membership_necessity(self):
        c01, c10, c11 = self.random_points(100000)
        member = np.array([k11.k11_check(a, b, c).member for a, b, c in zip(c01, c10, c11)])
        self.assertGreater(np.count_nonzero(member), 1000)
        self.assertGreater(np.count_nonzero(~member), 1000)

        x = structure_batch(c01[member], c10[member], c11[member])
        lowest = np.linalg.eigvalsh(x + np.conj(np.swapaxes(x, 1, 2)))[:, 0]
        self.assertGreaterEqual(float(lowest.min()), -1e-12)

        lam = np.exp(2j * np.pi * np.arange(64) / 64)
        directional = np.abs(c10[member][:, None] + lam[None, :] * c01[member][:, None])
        self.assertLessEqual(float(directional.max()), 2 + 1e-12)

    def test_construct_examples(self):
        trivial = k11.k11_construct(0, 0, 0)
        self.assertEqual(trivial.sigma, 0)
        self.assertAlmostEqual(trivial(np.array([[0.3, -0.4j]]))[0], 1)

        half = k11.k11_construct(0, 0, 1)
        self.assertAlmostEqual(half.sigma, 0.5)
        pt = np.array([[0.5, 0.6j]])
        u = 0.5 * 0.6j
        self.assertAlmostEqual(half(pt)[0], (1 + u / 2) / (1 - u / 2), places=12)
        self.assertAlmostEqual(half.taylor()[(1, 1)], 1, places=12)

        with self.assertRaises(k11.NotInK11):
            k11.k11_construct(0, 0, 3)

    def test_construct_reproduces_data(self):
        c01, c10, c11 = self.random_points(2000)
        samples = 0.999 * np.sqrt(self.rng.uniform(size=(10000, 2))) * np.exp(
            2j * np.pi * self.rng.uniform(size=(10000, 2))
        )
        checked = 0
        for a, b, c in zip(c01, c10, c11):
            v = k11.k11_check(a, b, c)
            if not v.member or 4 - abs(a) ** 2 - abs(b) ** 2 < 1e-3:
                continue
            interp = k11.k11_construct(a, b, c)
            if checked < 20:
                with self.subTest(point=(a, b, c)):
                    self.assertGreaterEqual(float(np.min(interp(samples).real)), -1e-8)
            expected = k11.K11Point(a, b, c).to_table().coeffs
            assert_allclose(interp.taylor().coeffs, expected, atol=1e-10)
            checked += 1
        self.assertGreater(checked, 100)

    def test_boundary_witness(self):
        for theta in np.linspace(0, 2 * np.pi, 7):
            tau = cmath.exp(1j * theta)
            with self.subTest(tau=tau):
                interp = k11.k11_construct(2 * tau, 0, 0)
                self.assertTrue(interp.witness)
                self.assertEqual(interp.tau, tau)
                pt = np.array([[0.3, 0.5j]])
                w = 0.5j
                self.assertAlmostEqual(interp(pt)[0], (1 + tau * w) / (1 - tau * w), places=12)
                assert_allclose(interp.taylor().coeffs, [1, 0, 2 * tau, 0], atol=1e-12)
        z_side = k11.k11_construct(0, 2, 0)
        self.assertAlmostEqual(z_side.taylor()[(1, 0)], 2)

    def test_table_roundtrip(self):
        point = k11.K11Point(0.1j, 0.2, -0.3)
        back = k11.k11_point_from_table(point.to_table())
        self.assertEqual(back, point)
        with self.assertRaises(ValueError):
            k11.k11_point_from_table(ps.TruncatedPoly.zeros((1, 1, 1)))

    def test_mobius(self):
        identity = k11.mobius_from_c00(1)
        self.assertEqual((identity.a, identity.b, identity.c, identity.d), (2, 0, 0, 2))

        halve = k11.mobius_from_c00(2)
        self.assertAlmostEqual(halve(2), 1, places=12)
        self.assertAlmostEqual(halve(0.7 + 0.2j), (0.7 + 0.2j) / 2, places=12)
        self.assertAlmostEqual(halve.d1, 0.5, places=12)
        self.assertAlmostEqual(halve.d2, 0, places=12)

        tilted = k11.mobius_from_c00(1 + 1j)
        self.assertAlmostEqual(abs(tilted(1 + 1j) - 1), 0, delta=1e-12)
        for z in random_disk(self.rng, 3.0, 50) + 3.1:
            with self.subTest(z=z):
                self.assertGreater(tilted(z).real, 0)

        with self.assertRaises(k11.DomainViolation):
            k11.mobius_from_c00(-1)
        with self.assertRaises(ValueError):
            k11.HalfPlaneMobius(1, 1, 1, 1)

    def test_rotation(self):
        theta = 0.7
        rot = k11.rhp_rotation(theta)
        self.assertAlmostEqual(rot(1), 1, places=12)
        self.assertAlmostEqual(rot.d1, cmath.exp(1j * theta), places=12)

    def test_automorphism_transform(self):
        same = k11.automorphism_transform(k11.K11Point(0.2, 0.3j, 0.1), 1, 0)
        self.assertEqual(same, k11.K11Point(0.2, 0.3j, 0.1))
        doubled = k11.automorphism_transform(k11.K11Point(1, 1, 0), 2, 0)
        self.assertEqual(doubled, k11.K11Point(2, 2, 0))

    def test_invariance(self):
        c01, c10, c11 = self.random_points(5000)
        for a, b, c in zip(c01, c10, c11):
            if not k11.k11_check(a, b, c).member:
                continue
            rot = k11.rhp_rotation(float(self.rng.uniform(0, 2 * np.pi)))
            moved = k11.automorphism_transform(k11.K11Point(a, b, c), rot.d1, rot.d2)
            self.assertTrue(k11.k11_check(moved.c01, moved.c10, moved.c11, tol=1e-9).member)

    def test_cf2_matches_k11_at_unit_c00(self):
        c01, c10, c11 = self.random_points(100000)
        for a, b, c in zip(c01, c10, c11):
            if k11.cf2_general_check(1, a, b, c) != k11.k11_check(a, b, c).member:
                self.fail(f"Disagreement at {(a, b, c)}")

    def test_cf2_general(self):
        self.assertTrue(k11.cf2_general_check(2, 0, 0, 0))
        with self.assertRaises(k11.DomainViolation):
            k11.cf2_general_check(-0.5j, 0, 0, 0)
        # c00 = 2 is normalized by halving
        self.assertTrue(k11.cf2_general_check(2, 1, 1, 0.5))
        self.assertFalse(k11.cf2_general_check(2, 4, 2, 0))

        c00 = 1 + 1j
        verdict = k11.cf2_general_check(c00, 1, 0.5, 0)
        mobius = k11.mobius_from_c00(c00)
        moved = k11.automorphism_transform(k11.K11Point(1, 0.5, 0), mobius.d1, mobius.d2)
        self.assertEqual(verdict, k11.k11_check(moved.c01, moved.c10, moved.c11).member)


if __name__ == "__main__":
    unittest.main()
