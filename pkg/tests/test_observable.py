import math
import unittest

import numpy as np
from hypothesis import given, strategies as st

import tests.test_setup  # noqa: F401
from core.errors import CapExceededError, DomainError, NonIntegrableError, UnsupportedObservableError
from core.measure import MarkovMeasure, TrajectorySampler, sample_stream
from core.observable import (ParetoObservable, ReturnTimeObservable, TruncatedObservable,
                             atom_ratio_diagnostic)
from core.shift import ShiftSystem


def canonical() -> ReturnTimeObservable:
    return ReturnTimeObservable(eta=4.0, markov_measure=MarkovMeasure.bernoulli([0.5, 0.5]))


def skewed() -> ReturnTimeObservable:
    measure = MarkovMeasure.from_stochastic(ShiftSystem.full_shift(2), [[0.9, 0.1], [0.5, 0.5]])
    return ReturnTimeObservable(eta=2.0, markov_measure=measure, depth_cap=400)


class TestReturnTimeObservable(unittest.TestCase):

    def test_evaluate(self):
        chi = canonical()
        self.assertEqual(chi.evaluate([1, 0, 0]), 1.0)
        self.assertEqual(chi.evaluate([0, 0, 1, 0]), 16.0)

    def test_evaluate_cap_exceeded(self):
        chi = ReturnTimeObservable(eta=4.0, markov_measure=MarkovMeasure.bernoulli([0.5, 0.5]), depth_cap=10)
        with self.assertRaises(CapExceededError):
            chi.evaluate([0] * 10)

    def test_requires_heavy_tail(self):
        with self.assertRaises(DomainError):
            ReturnTimeObservable(eta=2.0, markov_measure=MarkovMeasure.bernoulli([0.5, 0.5]))
        with self.assertRaises(DomainError):
            ReturnTimeObservable(eta=4.0, markov_measure=MarkovMeasure.bernoulli([0.5, 0.5]), special_symbol=2)

    def test_level_just_below_atom(self):
        chi = canonical()
        level = 1024.0 * (1 - 1e-10)
        self.assertEqual(chi.atom_index(level), 4)
        self.assertEqual(chi.atom_index(1024.0), 5)
        self.assertEqual(chi.tail_prob(level), 0.03125)
        self.assertEqual(chi.tail_prob(level), chi.tail_prob(256.0))
        self.assertAlmostEqual(chi.expected_truncated(level), 15.5, places=12)
        self.assertEqual(chi.atom_prob(level), 0.0)
        self.assertEqual(chi.atom_prob(1024.0), 0.015625)
        values = np.array([256.0, 1024.0, 1.0])
        self.assertEqual(int(np.count_nonzero(values > level)), 1)

    def test_large_eta_caps_depth(self):
        with self.assertLogs('core.observable', level='WARNING'):
            chi = ReturnTimeObservable(eta=2000.0, markov_measure=MarkovMeasure.bernoulli([0.5, 0.5]))
        self.assertEqual(chi.depth_cap, 93)
        self.assertTrue(math.isfinite(chi.atom(93)))
        self.assertEqual(chi.atom(94), math.inf)
        self.assertEqual(chi.atom_index(1e308), 93)
        self.assertEqual(chi.evaluate([0, 0, 0, 1]), 2000.0 ** 3)
        with self.assertRaises(DomainError):
            ReturnTimeObservable(eta=math.inf, markov_measure=MarkovMeasure.bernoulli([0.5, 0.5]))

    def test_constants(self):
        chi = canonical()
        self.assertEqual(chi.q, 0.5)
        self.assertEqual(chi.pi1, 0.5)
        self.assertAlmostEqual(chi.R, 0.5, places=15)
        self.assertAlmostEqual(chi.R_stated, 1.0, places=15)
        self.assertAlmostEqual(chi.tail_exponent, 0.5, places=15)

    def test_level_prob(self):
        chi = canonical()
        self.assertAlmostEqual(chi.level_prob(0), 0.5, places=15)
        self.assertAlmostEqual(chi.level_prob(1), 0.25, places=15)
        self.assertAlmostEqual(chi.level_prob(2) / chi.level_prob(1), chi.q, places=15)
        for k in range(1, 10):
            self.assertAlmostEqual(chi.level_prob(k), chi.R * chi.q ** k, places=15)

    def test_tail_prob(self):
        chi = canonical()
        self.assertAlmostEqual(chi.tail_prob(1.0), 0.5, places=15)
        self.assertEqual(chi.tail_prob(0.5), 1.0)
        for k in range(12):
            telescoped = math.fsum(chi.level_prob(j) for j in range(k + 1, 200))
            self.assertAlmostEqual(chi.tail_prob(chi.atom(k)), telescoped, delta=1e-14)

    def test_exact_against_enumeration(self):
        for chi in (canonical(), skewed()):
            measure = chi.measure
            for k in range(13):
                words = measure.system.admissible_words(k + 1)
                mu = measure.cylinder_measures(k + 1)
                values = chi.cylinder_values(words)
                self.assertAlmostEqual(chi.level_prob(k), mu[values == chi.atom(k)].sum(), delta=1e-12)
                self.assertAlmostEqual(chi.tail_prob(chi.atom(k)), mu[values > chi.atom(k)].sum(), delta=1e-12)

    def test_quantile(self):
        chi = canonical()
        self.assertEqual(chi.quantile(0.5), 1.0)
        for k in range(15):
            self.assertEqual(chi.quantile(chi.cdf(chi.atom(k))), chi.atom(k))
        with self.assertRaises(DomainError):
            chi.quantile(1.0)

    def test_expected_truncated(self):
        chi = canonical()
        self.assertAlmostEqual(chi.expected_truncated(4.0), 1.5, places=15)
        self.assertEqual(chi.expected_truncated(0.5), 0.0)
        with self.assertRaises(NonIntegrableError):
            chi.expected_truncated(math.inf)

    def test_expected_truncated_asymptotic(self):
        chi = skewed()
        q, eta = chi.q, chi.eta
        limit = chi.R * q * eta / (q * eta - 1)
        ratio = chi.expected_truncated(eta ** 40) / (q * eta) ** 40
        self.assertAlmostEqual(ratio / limit, 1.0, delta=0.01)

    @given(st.floats(0, 1e12), st.floats(0, 1e12))
    def test_monotone(self, a, b):
        chi = skewed()
        low, high = sorted((a, b))
        self.assertLessEqual(chi.expected_truncated(low), chi.expected_truncated(high))
        self.assertGreaterEqual(chi.tail_prob(low), chi.tail_prob(high))

    def test_evaluate_block_matches_evaluate(self):
        chi = skewed()
        symbols = sample_stream(TrajectorySampler(chi.measure, 5, 0), 2000 + chi.lookahead)
        values = chi.evaluate_block(symbols, 2000)
        expected = [chi.evaluate(symbols[i:i + chi.lookahead]) for i in range(2000)]
        np.testing.assert_array_equal(values, expected)

    def test_evaluate_block_reports_position(self):
        chi = ReturnTimeObservable(eta=4.0, markov_measure=MarkovMeasure.bernoulli([0.5, 0.5]), depth_cap=5)
        symbols = np.array([1, 1, 0, 0, 0, 0, 0, 1, 1], dtype=np.uint8)
        with self.assertRaises(CapExceededError) as cm:
            chi.evaluate_block(symbols, 5)
        self.assertEqual(cm.exception.position, 2)

    def test_truncation_identity(self):
        chi = skewed()
        symbols = sample_stream(TrajectorySampler(chi.measure, 9, 2), 3000 + chi.lookahead)
        values = chi.evaluate_block(symbols, 3000)
        for level in (0.5, 1.0, 3.0, 16.0, 1e6):
            truncated = TruncatedObservable(chi, level).evaluate_block(symbols, 3000)
            np.testing.assert_array_equal(truncated, values * (values <= level))

    def test_atom_ratio_diagnostic(self):
        chi = canonical()
        ratios = atom_ratio_diagnostic(chi, [chi.atom(k) for k in range(6)])
        self.assertAlmostEqual(ratios[0], 1.0, places=12)
        for k in range(1, 6):
            self.assertAlmostEqual(ratios[k], (2 ** k - 0.5) / 2 ** (k - 1), places=12)
        self.assertEqual(atom_ratio_diagnostic(chi, [5.0]), [math.inf])


class TestParetoObservable(unittest.TestCase):

    def test_tail_and_quantile(self):
        chi = ParetoObservable(alpha=0.5)
        self.assertEqual(chi.tail_prob(0.5), 1.0)
        self.assertAlmostEqual(chi.tail_prob(100.0), 0.1, places=15)
        self.assertAlmostEqual(chi.quantile(1 - 1e-4) / 1e8, 1.0, places=9)
        self.assertEqual(chi.atom_prob(4.0), 0.0)

    def test_expected_truncated(self):
        chi = ParetoObservable(alpha=0.5)
        self.assertAlmostEqual(chi.expected_truncated(100.0), 9.0, places=12)
        self.assertEqual(chi.expected_truncated(0.9), 0.0)
        with self.assertRaises(NonIntegrableError):
            chi.expected_truncated(math.inf)

    def test_parameter_ranges(self):
        with self.assertRaises(DomainError):
            ParetoObservable(alpha=1.0)
        with self.assertRaises(DomainError):
            ParetoObservable(alpha=0.5, digit_cap=64)

    def test_evaluate(self):
        chi = ParetoObservable(alpha=0.5)
        self.assertAlmostEqual(chi.evaluate([1, 0] + [0] * 126), 4.0, places=12)
        self.assertAlmostEqual(chi.evaluate([0] * 128), 1.0, places=12)
        with self.assertRaises(CapExceededError):
            chi.evaluate([1] * 128)

    def test_small_alpha_overflow(self):
        chi = ParetoObservable(alpha=0.01)
        self.assertEqual(chi.evaluate([1] * 20 + [0] * 108), math.inf)
        self.assertEqual(chi.quantile(1 - 1e-10), math.inf)
        symbols = np.array([1] * 20 + [0] * 200, dtype=np.uint8)
        with self.assertRaises(DomainError):
            chi.evaluate_block(symbols, 1)

    def test_not_cylinder_measurable(self):
        chi = ParetoObservable(alpha=0.5)
        self.assertFalse(chi.is_cylinder_measurable)
        with self.assertRaises(UnsupportedObservableError):
            chi.truncation_depth(10.0)

    def test_supports(self):
        chi = ParetoObservable(alpha=0.5)
        self.assertTrue(chi.supports(MarkovMeasure.bernoulli([0.5, 0.5])))
        self.assertFalse(chi.supports(MarkovMeasure.bernoulli([0.6, 0.4])))

    def test_evaluate_block_matches_evaluate(self):
        chi = ParetoObservable(alpha=0.5)
        symbols = sample_stream(TrajectorySampler(chi.measure, 1, 0), 500 + chi.lookahead)
        values = chi.evaluate_block(symbols, 500)
        expected = [chi.evaluate(symbols[i:i + chi.lookahead]) for i in range(500)]
        np.testing.assert_allclose(values, expected, rtol=1e-12)

    def test_empirical_tail(self):
        chi = ParetoObservable(alpha=0.5)
        n = 10 ** 6
        symbols = sample_stream(TrajectorySampler(chi.measure, 77, 0), n + chi.lookahead)
        values = chi.evaluate_block(symbols, n)
        for t in (2.0, 10.0, 100.0):
            p = t ** -0.5
            # neighbouring positions share digits; 6 binomial deviations covers the correlation
            tolerance = 6 * math.sqrt(p * (1 - p) / n)
            self.assertAlmostEqual(np.mean(values > t), p, delta=tolerance)


if __name__ == '__main__':
    unittest.main()
