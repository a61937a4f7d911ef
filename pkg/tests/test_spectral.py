import unittest

import numpy as np
from hypothesis import given, settings, strategies as st
from scipy import sparse

import tests.test_setup  # noqa: F401
from core.errors import DomainError, GapViolationError, ResourceError, UnsupportedObservableError
from core.measure import MarkovMeasure
from core.observable import ParetoObservable, ReturnTimeObservable
from core.shift import ShiftSystem
from core.spectral import (CylinderFunction, TransferMatrix, assemble_transfer, holder_seminorm,
                           integrated_oscillation, leading_eigenpair, oscillation, property_F_audit,
                           quasi_holder_seminorm, spectral_gap)


def bernoulli() -> MarkovMeasure:
    return MarkovMeasure.bernoulli([0.5, 0.5])


def skewed() -> MarkovMeasure:
    return MarkovMeasure.from_stochastic(ShiftSystem.full_shift(2), [[0.9, 0.1], [0.5, 0.5]])


def golden() -> MarkovMeasure:
    return MarkovMeasure.from_stochastic(ShiftSystem(np.array([[1, 1], [1, 0]])), [[2 / 3, 1 / 3], [1, 0]])


def three_state() -> MarkovMeasure:
    p = np.random.default_rng(1).dirichlet(np.ones(3), size=3)
    return MarkovMeasure.from_stochastic(ShiftSystem.full_shift(3), p)


def dense_second_modulus(transfer: TransferMatrix) -> float:
    moduli = np.sort(np.abs(np.linalg.eigvals(transfer.to_dense())))[::-1]
    return float(moduli[1])


class TestTransferMatrix(unittest.TestCase):

    def test_bernoulli_depth_one(self):
        np.testing.assert_allclose(assemble_transfer(bernoulli(), 1).to_dense(), [[0.5, 0.5], [0.5, 0.5]])

    def test_fixes_constants(self):
        for measure in (bernoulli(), skewed(), golden(), three_state()):
            for depth in (1, 2, 4):
                transfer = assemble_transfer(measure, depth)
                ones = np.ones(transfer.dimension)
                np.testing.assert_allclose(transfer.matrix @ ones, ones, atol=1e-12)
                self.assertTrue((transfer.to_dense() >= 0).all())

    def test_refinement_consistency(self):
        measure = skewed()
        h = CylinderFunction(measure.system, 1, [3.0, -1.0])
        coarse = assemble_transfer(measure, 1).apply(h)
        fine = assemble_transfer(measure, 2).apply(h)
        np.testing.assert_allclose(fine.values, coarse.refine(2).values, atol=1e-14)

    def test_integral_invariance(self):
        rng = np.random.default_rng(4)
        for measure in (skewed(), golden(), three_state()):
            for depth in (1, 3, 5):
                transfer = assemble_transfer(measure, depth)
                h = CylinderFunction(measure.system, depth, rng.standard_normal(transfer.dimension))
                self.assertAlmostEqual(transfer.apply(h).integral(measure), h.integral(measure), delta=1e-12)

    def test_depth_range(self):
        with self.assertRaises(ResourceError):
            assemble_transfer(bernoulli(), 13)
        with self.assertRaises(ResourceError):
            assemble_transfer(bernoulli(), 0)


class TestSpectralData(unittest.TestCase):

    def test_leading_eigenpair(self):
        pair = leading_eigenpair(assemble_transfer(bernoulli(), 3))
        self.assertAlmostEqual(pair.eigenvalue, 1.0, delta=1e-10)
        np.testing.assert_allclose(pair.eigvec, np.full(8, 1 / 8), atol=1e-12)

        pair = leading_eigenpair(assemble_transfer(skewed(), 1))
        self.assertAlmostEqual(pair.eigenvalue, 1.0, delta=1e-10)
        np.testing.assert_allclose(pair.eigvec, [5 / 6, 1 / 6], atol=1e-10)

    def test_eigvec_is_cylinder_measure(self):
        for measure in (golden(), three_state()):
            pair = leading_eigenpair(assemble_transfer(measure, 3))
            np.testing.assert_allclose(pair.eigvec, measure.cylinder_measures(3), atol=1e-10)

    def test_bernoulli_gap_is_zero(self):
        self.assertAlmostEqual(spectral_gap(assemble_transfer(bernoulli(), 1)), 0.0, delta=1e-10)

    def test_two_state_gap(self):
        for depth in (1, 2, 3):
            self.assertAlmostEqual(spectral_gap(assemble_transfer(skewed(), depth)), 0.4, delta=1e-8)

    def test_gap_matches_dense_oracle(self):
        for measure, depth in ((golden(), 3), (three_state(), 2), (skewed(), 4)):
            transfer = assemble_transfer(measure, depth)
            self.assertAlmostEqual(spectral_gap(transfer), dense_second_modulus(transfer), delta=1e-8)
            self.assertLess(spectral_gap(transfer), 1.0)

    def test_gap_violation(self):
        swap = TransferMatrix(depth=1, matrix=sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])),
                              system=ShiftSystem.full_shift(2))
        with self.assertRaises(GapViolationError):
            spectral_gap(swap)


class TestOscillation(unittest.TestCase):

    def test_oscillation(self):
        system = ShiftSystem.full_shift(2)
        self.assertEqual(oscillation(CylinderFunction.constant(system, 2.0, depth=3), [0, 1]), 0.0)
        h = CylinderFunction.indicator(system, [0])
        self.assertEqual(oscillation(h, []), 1.0)
        self.assertEqual(oscillation(h, [0]), 0.0)

    def test_oscillation_of_empty_cylinder(self):
        system = golden().system
        h = CylinderFunction.from_callable(system, 3, lambda words: words.sum(axis=1).astype(float))
        self.assertEqual(oscillation(h, [1, 1]), 0.0)
        self.assertEqual(oscillation(h, [0]), 1.0)

    def test_integrated_oscillation(self):
        measure = bernoulli()
        h = CylinderFunction.indicator(measure.system, [0, 0])
        self.assertAlmostEqual(integrated_oscillation(h, 0.6, measure), 0.5, places=15)
        self.assertEqual(integrated_oscillation(h, 0.3, measure), 0.0)


class TestQuasiHolderSeminorm(unittest.TestCase):

    def test_constant_is_zero(self):
        measure = skewed()
        self.assertEqual(quasi_holder_seminorm(CylinderFunction.constant(measure.system, 5.0, 4), 0.9, measure), 0.0)

    def test_eps0_range(self):
        measure = bernoulli()
        with self.assertRaises(DomainError):
            quasi_holder_seminorm(CylinderFunction.constant(measure.system, 1.0, 2), 1.0, measure)

    def test_indicator_against_grid_oracle(self):
        measure = bernoulli()
        for word in ([0], [0, 0], [0, 1, 1]):
            h = CylinderFunction.indicator(measure.system, word, depth=len(word) + 1)
            exact = quasi_holder_seminorm(h, 0.9, measure)
            grid = np.linspace(0.9 / 10 ** 4, 0.9, 10 ** 4)
            coarse = max(integrated_oscillation(h, eps, measure) / eps for eps in grid)
            self.assertLessEqual(coarse, exact + 1e-9)
            # the sup is a left limit at a cylinder measure; approach each one from above
            measures = np.unique(np.concatenate([measure.cylinder_measures(j) for j in range(len(word) + 2)]))
            near = [eps * (1 + 1e-11) for eps in measures if eps * (1 + 1e-11) <= 0.9]
            refined = max([integrated_oscillation(h, eps, measure) / eps for eps in near] + [coarse])
            self.assertAlmostEqual(refined, exact, delta=1e-9)

    def test_two_symbol_block(self):
        measure = bernoulli()
        h = CylinderFunction.indicator(measure.system, [0, 0])
        self.assertAlmostEqual(quasi_holder_seminorm(h, 0.9, measure), 1.0, delta=1e-9)

    def test_run_indicators_bounded_by_one(self):
        for measure in (bernoulli(), skewed()):
            for k in range(1, 11):
                h = CylinderFunction.indicator(measure.system, [0] * k, depth=k + 1)
                self.assertLessEqual(quasi_holder_seminorm(h, 0.9, measure), 1 + 1e-9)

    @given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_triangle_and_product_inequality(self, depth, seed):
        measure = skewed()
        rng = np.random.default_rng(seed)
        size = len(measure.system.word_level(depth))
        f = CylinderFunction(measure.system, depth, rng.standard_normal(size))
        g = CylinderFunction(measure.system, depth, rng.standard_normal(size))

        def norm(h):
            return quasi_holder_seminorm(h, 0.9, measure)

        self.assertLessEqual(norm(f + g), norm(f) + norm(g) + 1e-9)
        self.assertLessEqual(norm(f * g), f.sup_norm() * norm(g) + norm(f) * g.sup_norm() + 1e-9)

    def test_holder_seminorm(self):
        system = ShiftSystem.full_shift(2)
        h = CylinderFunction.indicator(system, [0, 0, 0], depth=4)
        self.assertAlmostEqual(holder_seminorm(h, 0.5), 4.0, places=12)
        self.assertEqual(holder_seminorm(CylinderFunction.constant(system, 1.0, 3), 0.5), 0.0)


class TestPropertyFAudit(unittest.TestCase):

    def test_canonical_return_time(self):
        chi = ReturnTimeObservable(eta=4.0, markov_measure=bernoulli())
        audit = property_F_audit(chi, chi.measure, 0.9, [chi.atom(k) for k in range(11)])
        self.assertEqual(list(audit.rows.columns), ['level', 'depth', 'k1', 'k2', 'k3', 'holder_k2'])
        self.assertEqual(len(audit.rows), 11)
        self.assertEqual(audit.rows['depth'].tolist(), list(range(1, 12)))
        for value in (audit.K1_hat, audit.K2_hat, audit.K3_hat):
            self.assertTrue(np.isfinite(value))
        self.assertLessEqual(audit.K2_hat, 1 + 1e-9)
        self.assertLessEqual(audit.K3_hat, 2 * audit.K2_hat + 1e-9)

        system = chi.measure.system
        grid = np.linspace(0.9 / 10 ** 4, 0.9, 10 ** 4)
        for row in audit.rows.itertuples():
            values = chi.cylinder_values(system.admissible_words(row.depth))
            above = CylinderFunction(system, row.depth, (values >= row.level).astype(float))
            coarse = max(integrated_oscillation(above, eps, chi.measure) / eps for eps in grid)
            with self.subTest(level=row.level):
                self.assertLessEqual(coarse, row.k2 + 1e-9)

    def test_level_below_every_value(self):
        chi = ReturnTimeObservable(eta=4.0, markov_measure=bernoulli())
        audit = property_F_audit(chi, chi.measure, 0.9, [0.5])
        self.assertEqual(audit.K1_hat, 0.0)

    def test_pareto_unsupported(self):
        chi = ParetoObservable(alpha=0.5)
        with self.assertRaises(UnsupportedObservableError):
            property_F_audit(chi, chi.measure, 0.9, [2.0])

    def test_depth_limit(self):
        chi = ReturnTimeObservable(eta=4.0, markov_measure=bernoulli())
        with self.assertRaises(ResourceError):
            property_F_audit(chi, chi.measure, 0.9, [chi.atom(12)])


if __name__ == '__main__':
    unittest.main()
