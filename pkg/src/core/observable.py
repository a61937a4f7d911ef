"""
Heavy-tailed observables on the shift with exact tail, quantile and truncated-moment calculus.

Key functionality:
- ReturnTimeObservable: η raised to the length of the leading run of the special symbol
- ParetoObservable: (1 - u(x))^(-1/α) on the full 2-shift, exact tail t^(-α)
- TruncatedObservable: the observable zeroed above a level
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

import constants
from core.enums import ObservableKind
from core.errors import (CapExceededError, DomainError, InsufficientPrefixError,
                         NonIntegrableError, UnsupportedObservableError)
from core.measure import MarkovMeasure
from core.shift import WordLike, as_word

logger = logging.getLogger(__name__)


def _float_power(base: float, exponent: float) -> float:
    """base ** exponent, +inf past the float range."""
    try:
        return math.pow(base, exponent)
    except OverflowError:
        return math.inf


class Observable(ABC):
    """A nonnegative observable χ ≥ 1 with its distribution under the invariant measure."""

    kind: ObservableKind

    @property
    @abstractmethod
    def lookahead(self) -> int:
        """Number of symbols read to evaluate χ at one position."""

    @property
    @abstractmethod
    def tail_exponent(self) -> float:
        """α with μ(χ > t) decaying like t^(-α)."""

    @property
    @abstractmethod
    def measure(self) -> MarkovMeasure:
        """The invariant measure under which the tail calculus holds."""

    @abstractmethod
    def evaluate(self, prefix: WordLike) -> float:
        """χ at the point whose first symbols are prefix."""

    @abstractmethod
    def evaluate_block(self, symbols: np.ndarray, count: int) -> np.ndarray:
        """χ at positions 0..count-1 of a stream; needs count + lookahead - 1 symbols."""

    @abstractmethod
    def tail_prob(self, level: float) -> float:
        """μ(χ > level)."""

    @abstractmethod
    def atom_prob(self, level: float) -> float:
        """μ(χ = level)."""

    @abstractmethod
    def quantile(self, u: float) -> float:
        """Generalized inverse inf{x : F(x) ≥ u} of F(x) = 1 - tail_prob(x)."""

    @abstractmethod
    def expected_truncated(self, level: float) -> float:
        """E[χ; χ ≤ level]."""

    def cdf(self, level: float) -> float:
        return 1.0 - self.tail_prob(level)

    @property
    def is_cylinder_measurable(self) -> bool:
        return False

    def truncation_depth(self, level: float) -> int:
        raise UnsupportedObservableError(
            f"{self.kind.name.lower()} observable is not measurable with respect to finite-depth cylinders")

    def cylinder_values(self, words: np.ndarray) -> np.ndarray:
        raise UnsupportedObservableError(
            f"{self.kind.name.lower()} observable is not measurable with respect to finite-depth cylinders")

    def _check_block(self, symbols: np.ndarray, count: int):
        needed = count + self.lookahead - 1
        if len(symbols) < needed:
            raise InsufficientPrefixError(f"Block of {len(symbols)} symbols cannot serve {count} positions "
                                          f"(needs {needed})")


def _check_u(u: float):
    if not 0 < u < 1:
        raise DomainError(f"Quantile level must lie in (0, 1), got {u}")


def _check_truncation_level(level: float):
    if math.isinf(level):
        raise NonIntegrableError("E[χ] is infinite; truncation level must be finite")
    if math.isnan(level) or level < 0:
        raise DomainError(f"Truncation level must be nonnegative, got {level}")


@dataclass(frozen=True, eq=False)
class ReturnTimeObservable(Observable):
    """
    χ(x) = η^(m-1) where m is the 1-based index of the first symbol different from the
    special symbol. Requires q = P[s, s] > 0 and η > 1/q, so that E[χ] = ∞.
    """
    eta: float
    markov_measure: MarkovMeasure
    special_symbol: int = 0
    depth_cap: int = constants.DEFAULT_DEPTH_CAP
    _atoms: np.ndarray = field(init=False, repr=False)

    kind = ObservableKind.RETURN_TIME

    def __post_init__(self):
        k = self.markov_measure.alphabet_size
        if not 0 <= self.special_symbol < k:
            raise DomainError(f"Special symbol {self.special_symbol} is outside the alphabet of size {k}")
        if k < 2:
            raise DomainError("Return-time observable needs at least two symbols")
        if self.depth_cap < 1:
            raise DomainError(f"depth_cap must be positive, got {self.depth_cap}")
        q = self.q
        if q <= 0:
            raise DomainError(f"Return-time observable needs P[s, s] > 0 for the special symbol, got {q}")
        if not self.eta * q > 1:
            raise DomainError(f"eta={self.eta} must exceed 1/q={1 / q:.12g} for the return-time observable "
                              f"(otherwise χ is integrable)")
        if not math.isfinite(self.eta):
            raise DomainError(f"eta must be finite, got {self.eta}")
        finite_cap = int(math.log(np.finfo(float).max) / math.log(self.eta))
        if self.depth_cap > finite_cap:
            logger.warning("depth_cap=%d puts eta^k past the float range for eta=%g; capping at %d",
                           self.depth_cap, self.eta, finite_cap)
            object.__setattr__(self, 'depth_cap', finite_cap)
        with np.errstate(over='ignore'):
            atoms = np.power(float(self.eta), np.arange(self.depth_cap + 1), dtype=float)
        if not np.isfinite(atoms[-1]):
            # log rounding can leave the top atom just past the range
            object.__setattr__(self, 'depth_cap', self.depth_cap - 1)
            atoms = atoms[:-1]
        atoms.setflags(write=False)
        object.__setattr__(self, '_atoms', atoms)

    @property
    def measure(self) -> MarkovMeasure:
        return self.markov_measure

    @property
    def q(self) -> float:
        return float(self.markov_measure.stochastic[self.special_symbol, self.special_symbol])

    @property
    def pi1(self) -> float:
        return float(self.markov_measure.stationary[self.special_symbol])

    @property
    def R(self) -> float:
        """Geometric-law constant: μ(χ = η^k) = R·q^k for k ≥ 1."""
        return self.pi1 * (1 - self.q) / self.q

    @property
    def R_stated(self) -> float:
        """μ(x₁ = s)/q, the alternative normalization of the same law."""
        return self.pi1 / self.q

    @property
    def lookahead(self) -> int:
        return self.depth_cap

    @property
    def tail_exponent(self) -> float:
        return -math.log(self.q) / math.log(self.eta)

    @property
    def is_cylinder_measurable(self) -> bool:
        return True

    def atom(self, k: int) -> float:
        if k <= self.depth_cap:
            return float(self._atoms[k])
        return _float_power(self.eta, k)

    def atom_index(self, level: float) -> int:
        """Largest k with η^k ≤ level, for level ≥ 1, compared against the atoms χ actually takes."""
        k = max(int(math.floor(math.log(level) / math.log(self.eta))), 0)
        while self.atom(k + 1) <= level:
            k += 1
        while k > 0 and self.atom(k) > level:
            k -= 1
        return k

    def evaluate(self, prefix: WordLike) -> float:
        word = as_word(prefix)
        for j, s in enumerate(word[:self.depth_cap]):
            if s != self.special_symbol:
                return self.atom(j)
        if len(word) >= self.depth_cap:
            raise CapExceededError(f"No symbol other than {self.special_symbol} within {self.depth_cap} positions",
                                   position=0)
        raise InsufficientPrefixError(f"Prefix of length {len(word)} is a run of the special symbol")

    def evaluate_block(self, symbols: np.ndarray, count: int) -> np.ndarray:
        self._check_block(symbols, count)
        n = len(symbols)
        positions = np.arange(n)
        non_special = np.where(symbols != self.special_symbol, positions, n)
        next_non_special = np.minimum.accumulate(non_special[::-1])[::-1]
        runs = next_non_special[:count] - positions[:count]
        if np.any(runs >= self.depth_cap):
            position = int(np.flatnonzero(runs >= self.depth_cap)[0])
            raise CapExceededError(f"No symbol other than {self.special_symbol} within {self.depth_cap} positions",
                                   position=position)
        return self._atoms[runs]

    def level_prob(self, k: int) -> float:
        """μ(χ = η^k)."""
        if k < 0:
            raise DomainError(f"Level index must be nonnegative, got {k}")
        if k == 0:
            return 1.0 - self.pi1
        return self.pi1 * self.q ** (k - 1) * (1 - self.q)

    def tail_prob(self, level: float) -> float:
        if level < 1:
            return 1.0
        return self.pi1 * self.q ** self.atom_index(level)

    def atom_prob(self, level: float) -> float:
        if level < 1:
            return 0.0
        k = self.atom_index(level)
        if self.atom(k) != level:
            return 0.0
        return self.level_prob(k)

    def quantile(self, u: float) -> float:
        _check_u(u)
        target = 1.0 - u
        if self.pi1 <= target:
            return 1.0
        k = math.ceil(math.log(target / self.pi1) / math.log(self.q) - constants.LOG_SNAP_TOL)
        return self.atom(max(k, 0))

    def expected_truncated(self, level: float) -> float:
        _check_truncation_level(level)
        if level < 1:
            return 0.0
        top = self.atom_index(level)
        return math.fsum(self.level_prob(k) * self.atom(k) for k in range(top + 1))

    def truncation_depth(self, level: float) -> int:
        """Cylinder depth on which ℓχ and 𝟙{χ = ℓ} are measurable."""
        if level < 1:
            return 1
        return self.atom_index(level) + 1

    def cylinder_values(self, words: np.ndarray) -> np.ndarray:
        """χ on each word where the word determines it, +inf where the word is all special."""
        words = np.atleast_2d(words)
        values = np.full(len(words), np.inf)
        if words.shape[1] == 0:
            return values
        non_special = words != self.special_symbol
        first = np.argmax(non_special, axis=1)
        determined = non_special.any(axis=1)
        atoms = np.array([self.atom(j) for j in range(words.shape[1])])
        values[determined] = atoms[first[determined]]
        return values


@dataclass(frozen=True, eq=False)
class ParetoObservable(Observable):
    """
    χ(x) = (1 - u(x))^(-1/α) with u(x) = Σ x_j 2^(-j), on the full 2-shift with the fair
    Bernoulli measure; μ(χ > t) = t^(-α) for t ≥ 1.
    """
    alpha: float
    digit_cap: int = constants.DEFAULT_DIGIT_CAP
    _measure: MarkovMeasure = field(init=False, repr=False)

    kind = ObservableKind.PARETO

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.digit_cap <= constants.PARETO_MAX_ZERO_RUN:
            raise DomainError(f"digit_cap must exceed {constants.PARETO_MAX_ZERO_RUN}, got {self.digit_cap}")
        object.__setattr__(self, '_measure', MarkovMeasure.bernoulli([0.5, 0.5]))

    @property
    def measure(self) -> MarkovMeasure:
        return self._measure

    @property
    def lookahead(self) -> int:
        return self.digit_cap

    @property
    def tail_exponent(self) -> float:
        return self.alpha

    def supports(self, measure: MarkovMeasure) -> bool:
        return (measure.alphabet_size == 2 and measure.is_bernoulli()
                and np.allclose(measure.stochastic, 0.5, rtol=0, atol=constants.STOCHASTIC_ROW_TOL))

    def evaluate(self, prefix: WordLike) -> float:
        digits = list(as_word(prefix)[:self.digit_cap])
        limit = constants.PARETO_MAX_ZERO_RUN
        if 0 not in digits[:limit]:
            if len(digits) >= limit:
                raise CapExceededError(f"First zero digit lies beyond position {limit}", position=0)
            raise InsufficientPrefixError(f"Prefix of length {len(digits)} contains no zero digit")
        numerator = 0
        for d in digits:
            numerator = 2 * numerator + (1 - d)
        one_minus_u = numerator / 2 ** len(digits)
        return _float_power(one_minus_u, -1.0 / self.alpha)

    def evaluate_block(self, symbols: np.ndarray, count: int) -> np.ndarray:
        self._check_block(symbols, count)
        n = len(symbols)
        positions = np.arange(n)
        complement = (1 - symbols.astype(np.int64)).astype(np.uint64)
        ones = np.where(complement == 1, positions, n)
        next_one = np.minimum.accumulate(ones[::-1])[::-1]
        runs = next_one[:count] - positions[:count]
        if np.any(runs >= constants.PARETO_MAX_ZERO_RUN):
            position = int(np.flatnonzero(runs >= constants.PARETO_MAX_ZERO_RUN)[0])
            raise CapExceededError(f"First zero digit lies beyond position {constants.PARETO_MAX_ZERO_RUN}",
                                   position=position)
        # windows[j] holds complement digits j..j+63, most significant first
        windows = complement
        width = 1
        while width < 64:
            shifted = np.zeros_like(windows)
            shifted[:-width] = windows[width:]
            windows = (windows << np.uint64(width)) | shifted
            width *= 2
        heads = windows[positions[:count] + runs]
        drop = np.maximum(64 - (self.digit_cap - runs), 0).astype(np.uint64)
        heads = (heads >> drop) << drop
        one_minus_u = np.ldexp(heads.astype(np.float64), -64 - runs)
        with np.errstate(over='ignore'):
            values = one_minus_u ** (-1.0 / self.alpha)
        if not np.all(np.isfinite(values)):
            position = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DomainError(f"Pareto value at position {position} exceeds the float range for alpha={self.alpha}")
        return values

    def tail_prob(self, level: float) -> float:
        if level <= 1:
            return 1.0
        return level ** -self.alpha

    def atom_prob(self, level: float) -> float:
        return 0.0

    def quantile(self, u: float) -> float:
        _check_u(u)
        return _float_power(1.0 - u, -1.0 / self.alpha)

    def expected_truncated(self, level: float) -> float:
        _check_truncation_level(level)
        if level < 1:
            return 0.0
        return self.alpha / (1 - self.alpha) * (level ** (1 - self.alpha) - 1)


@dataclass(frozen=True, eq=False)
class TruncatedObservable:
    """ℓχ := χ·𝟙{χ ≤ ℓ}."""
    base: Observable
    level: float

    def __post_init__(self):
        if self.level < 0:
            raise DomainError(f"Truncation level must be nonnegative, got {self.level}")

    @property
    def lookahead(self) -> int:
        return self.base.lookahead

    def evaluate(self, prefix: WordLike) -> float:
        value = self.base.evaluate(prefix)
        return value if value <= self.level else 0.0

    def evaluate_block(self, symbols: np.ndarray, count: int) -> np.ndarray:
        values = self.base.evaluate_block(symbols, count)
        return np.where(values <= self.level, values, 0.0)

    def expected(self) -> float:
        return self.base.expected_truncated(self.level)


def atom_ratio_diagnostic(observable: Observable, levels: Sequence[float]) -> List[float]:
    """E[χ; χ ≤ f] / (f·μ(χ = f)) per level; +inf where f carries no mass."""
    ratios = []
    for f in levels:
        mass = observable.atom_prob(f)
        ratios.append(observable.expected_truncated(f) / (f * mass) if mass > 0 else math.inf)
    return ratios
