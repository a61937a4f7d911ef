import math
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

import tests.test_setup  # noqa: F401
from core.errors import DomainError
from core.trimming import KahanSum, TrimAccumulator, oracle_trimmed

summands = st.lists(st.sampled_from([0.0, 1.0, 2.0, 4.0, 16.0]) | st.floats(0, 1e6), min_size=1, max_size=300)


def filled(values, b_max=2 ** 16) -> TrimAccumulator:
    acc = TrimAccumulator(b_max=b_max)
    for v in values:
        acc.push(v)
    return acc


class TestKahanSum(unittest.TestCase):

    def test_compensates_small_terms(self):
        total = KahanSum(1e16)
        for _ in range(1000):
            total += 1.0
        self.assertEqual(total.value, 1e16 + 1000)


class TestTrimAccumulator(unittest.TestCase):

    def test_push(self):
        acc = filled([5, 1, 3])
        self.assertEqual(acc.count, 3)
        self.assertEqual(acc.total, 9.0)

    def test_ties_in_topk(self):
        acc = filled([2, 2, 2], b_max=2)
        self.assertEqual(acc.topk, [2.0, 2.0])

    def test_many_equal_values(self):
        acc = TrimAccumulator()
        acc.extend(np.ones(10 ** 6))
        self.assertEqual(acc.total, 1e6)

    def test_rejects_bad_values(self):
        acc = TrimAccumulator()
        with self.assertRaises(DomainError):
            acc.push(-1.0)
        with self.assertRaises(DomainError):
            acc.push(math.inf)
        with self.assertRaises(DomainError):
            acc.extend([1.0, math.nan])

    def test_trimmed_sum(self):
        acc = filled([5, 1, 3])
        self.assertEqual(acc.trimmed_sum(1), 4.0)
        self.assertEqual(acc.trimmed_sum(0), 9.0)
        self.assertEqual(acc.trimmed_sum(3), 0.0)
        with self.assertRaises(DomainError):
            acc.trimmed_sum(4)

    def test_truncated_sum(self):
        acc = filled([5, 1, 3])
        self.assertEqual(acc.truncated_sum(3), 4.0)
        self.assertEqual(acc.truncated_sum(0.5), 0.0)
        self.assertEqual(acc.truncated_sum(5), 9.0)
        with self.assertRaises(DomainError):
            acc.truncated_sum(-1)

    def test_counts_at_level(self):
        acc = filled([4, 4, 16, 1, 4, 64])
        self.assertEqual(acc.count_above(4), 2)
        self.assertEqual(acc.count_equal(4), 3)

    def test_store_fallback_beyond_b_max(self):
        rng = np.random.default_rng(3)
        values = rng.pareto(0.5, 5000)
        acc = TrimAccumulator(b_max=16)
        acc.extend(values)
        for b in (0, 10, 16, 17, 500, 4999, 5000):
            expected = oracle_trimmed(values, b)
            self.assertAlmostEqual(acc.trimmed_sum(b), expected, delta=1e-9 * expected)

    def test_oracle_agreement_on_random_input(self):
        rng = np.random.default_rng(11)
        values = rng.pareto(0.5, 10 ** 4) + 1
        acc = TrimAccumulator()
        acc.extend(values)
        for b in (1, 7, 100, 1000):
            expected = oracle_trimmed(values, b)
            self.assertAlmostEqual(acc.trimmed_sum(b), expected, delta=1e-9 * expected)

    def test_oracle_agreement_heavy_tailed_and_tied(self):
        n = 1000
        generators = {
            'pareto': lambda rng: rng.pareto(0.5, n) + 1,
            'ties': lambda rng: 4.0 ** rng.integers(0, 6, n),
        }
        for name, draw in generators.items():
            for seed in range(200):
                values = draw(np.random.default_rng(seed))
                acc = TrimAccumulator(b_max=64)
                for block in np.array_split(values, 7):
                    acc.extend(block)
                for b in (0, 1, 10, 100, n // 2, n):
                    expected = oracle_trimmed(values, b)
                    with self.subTest(generator=name, seed=seed, b=b):
                        self.assertLessEqual(abs(acc.trimmed_sum(b) - expected), 1e-9 * expected)

    def test_oracle_all_equal(self):
        for b in (0, 3, 10):
            self.assertEqual(oracle_trimmed([2.5] * 10, b), (10 - b) * 2.5)

    def test_oracle_sorted_input(self):
        values = [float(v) for v in range(100, 0, -1)]
        acc = filled(values)
        self.assertEqual(acc.trimmed_sum(30), oracle_trimmed(values, 30))

    @given(summands, st.data())
    @settings(max_examples=200)
    def test_push_and_extend_agree(self, values, data):
        b_max = data.draw(st.integers(0, 40))
        one_by_one = filled(values, b_max=b_max)
        blocked = TrimAccumulator(b_max=b_max, capacity=1)
        split = data.draw(st.integers(0, len(values)))
        blocked.extend(values[:split])
        blocked.extend(values[split:])
        self.assertEqual(sorted(one_by_one.topk), sorted(blocked.topk))
        self.assertEqual(sorted(one_by_one.topk), sorted(values, reverse=True)[:b_max][::-1])

    @given(summands)
    def test_antitone_in_b(self, values):
        acc = filled(values, b_max=8)
        sums = [acc.trimmed_sum(b) for b in range(len(values) + 1)]
        for wider, narrower in zip(sums[1:], sums[:-1]):
            self.assertLessEqual(wider, narrower + 1e-9 * max(acc.total, 1.0))

    @given(summands, st.randoms(use_true_random=False))
    def test_permutation_invariance(self, values, random):
        shuffled = list(values)
        random.shuffle(shuffled)
        a, b = filled(values, b_max=5), filled(shuffled, b_max=5)
        level = values[0]
        for k in (0, len(values) // 2, len(values)):
            self.assertAlmostEqual(a.trimmed_sum(k), b.trimmed_sum(k), delta=1e-9 * max(a.total, 1.0))
        self.assertAlmostEqual(a.truncated_sum(level), b.truncated_sum(level), delta=1e-9 * max(a.total, 1.0))

    @given(summands, st.floats(0, 1e6))
    def test_sandwich(self, values, level):
        acc = filled(values, b_max=4)
        self.assertTrue(acc.sandwich_holds(level))
        if acc.count_equal(level) == 0:
            expected = acc.trimmed_sum(acc.count_above(level))
            self.assertAlmostEqual(acc.truncated_sum(level), expected, delta=1e-9 * max(acc.total, 1.0))

    def test_sandwich_with_injected_ties(self):
        rng = np.random.default_rng(5)
        values = np.concatenate([rng.integers(0, 6, 2000).astype(float) ** 2, np.full(50, 16.0)])
        rng.shuffle(values)
        acc = TrimAccumulator(b_max=32)
        acc.extend(values)
        for level in (0.0, 1.0, 4.0, 9.0, 16.0, 25.0):
            self.assertTrue(acc.sandwich_holds(level))


if __name__ == '__main__':
    unittest.main()
