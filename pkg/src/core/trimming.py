"""
Streaming Birkhoff sums, trimmed sums and truncated sums.

S_n is the plain sum, S_n^b drops the b largest summands, T_n^f drops every summand above f.
A bounded min-heap tracks the b_max largest values; trimmed sums select on the full value store.
"""
import heapq
import math
from typing import Iterable, List

import numpy as np

import constants
from core.errors import DomainError


class KahanSum:
    """Running compensated sum (Neumaier's variant of Kahan summation)."""

    def __init__(self, value: float = 0.0):
        self._sum = float(value)
        self._compensation = 0.0

    def add(self, value: float):
        t = self._sum + value
        if abs(self._sum) >= abs(value):
            self._compensation += (self._sum - t) + value
        else:
            self._compensation += (value - t) + self._sum
        self._sum = t

    def __iadd__(self, value: float):
        self.add(value)
        return self

    @property
    def value(self) -> float:
        return self._sum + self._compensation


def _check_values(values: np.ndarray):
    if values.size and (not np.all(np.isfinite(values)) or values.min() < 0):
        raise DomainError("Summands must be finite and nonnegative")


class TrimAccumulator:
    """
    Streaming state for one path: count, compensated total, value store and top-k heap.

    The heap holds exactly the min(count, b_max) largest values seen so far (as a multiset).
    """

    def __init__(self, b_max: int = constants.B_MAX, capacity: int = 1024):
        if b_max < 0:
            raise DomainError(f"b_max must be nonnegative, got {b_max}")
        self.b_max = b_max
        self.count = 0
        self._total = KahanSum()
        self._store = np.empty(max(capacity, 1))
        self._heap: List[float] = []

    @property
    def total(self) -> float:
        """S_n."""
        return self._total.value

    @property
    def values(self) -> np.ndarray:
        return self._store[:self.count]

    @property
    def topk(self) -> List[float]:
        return sorted(self._heap, reverse=True)

    def _reserve(self, extra: int):
        needed = self.count + extra
        if needed > len(self._store):
            grown = np.empty(max(needed, 2 * len(self._store)))
            grown[:self.count] = self._store[:self.count]
            self._store = grown

    def push(self, value: float):
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise DomainError(f"Summand must be finite and nonnegative, got {value}")
        self._reserve(1)
        self._store[self.count] = value
        self.count += 1
        self._total.add(value)
        if len(self._heap) < self.b_max:
            heapq.heappush(self._heap, value)
        elif self.b_max and value > self._heap[0]:
            heapq.heapreplace(self._heap, value)

    def extend(self, values: Iterable[float]):
        """Push a block of values; same result as pushing them one by one."""
        block = np.asarray(values, dtype=float).ravel()
        if block.size == 0:
            return
        _check_values(block)
        self._reserve(block.size)
        self._store[self.count:self.count + block.size] = block
        self.count += block.size
        self._total.add(math.fsum(block))
        if self.b_max == 0:
            return
        if len(self._heap) >= self.b_max:
            block = block[block > self._heap[0]]
            if block.size == 0:
                return
        merged = np.concatenate([np.asarray(self._heap, dtype=float), block])
        if merged.size > self.b_max:
            merged = np.partition(merged, merged.size - self.b_max)[-self.b_max:]
        self._heap = merged.tolist()
        heapq.heapify(self._heap)

    def trimmed_sum(self, b: int) -> float:
        """
        S_n^b: the sum of the count - b smallest values.

        The kept values are summed directly, never as S_n minus the top b.
        """
        if b < 0 or b > self.count:
            raise DomainError(f"Cannot trim {b} of {self.count} values")
        if b == self.count:
            return 0.0
        if b == 0:
            return math.fsum(self.values)
        kept = np.partition(self.values, self.count - b)[:self.count - b]
        return math.fsum(kept)

    def truncated_sum(self, level: float) -> float:
        """T_n^f: the sum of the values ≤ f."""
        if math.isnan(level) or level < 0:
            raise DomainError(f"Truncation level must be nonnegative, got {level}")
        values = self.values
        return math.fsum(values[values <= level])

    def count_above(self, level: float) -> int:
        return int(np.count_nonzero(self.values > level))

    def count_equal(self, level: float) -> int:
        return int(np.count_nonzero(self.values == level))

    def sandwich_holds(self, level: float, tol: float = constants.RELATIVE_TOL) -> bool:
        """
        S_n^m ≥ T_n^f ≥ S_n^(m+e) with m values above f and e values equal to f.

        The tolerance is relative to S_n, the scale of the rounding error in a trimmed sum.
        """
        above = self.count_above(level)
        equal = self.count_equal(level)
        truncated = self.truncated_sum(level)
        upper = self.trimmed_sum(above)
        lower = self.trimmed_sum(above + equal)
        slack = tol * max(self.total, 1.0)
        return truncated <= upper + slack and lower <= truncated + slack


def oracle_trimmed(values: Iterable[float], b: int) -> float:
    """Reference S_n^b: sort descending and sum from index b on."""
    ordered = sorted((float(v) for v in values), reverse=True)
    if b < 0 or b > len(ordered):
        raise DomainError(f"Cannot trim {b} of {len(ordered)} values")
    return math.fsum(ordered[b:])
