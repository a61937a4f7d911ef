"""
One-sided subshifts of finite type.

Key functionality:
- validate_transition: irreducibility and period of a 0/1 transition matrix
- ShiftSystem: admissibility checks and lexicographic enumeration of admissible words
- d1_distance and d2_ball_depth: the symbolic metric and the measure-driven ball depth
"""
import logging
from dataclasses import dataclass, field
from math import gcd
from typing import Dict, Iterable, List, Protocol, Sequence, Union

import numpy as np

import constants
from core.errors import (DomainError, InadmissibleWordError, InsufficientPrefixError,
                         InvalidMatrixError, InvalidSymbolError, NonMixingMatrixError,
                         ResourceError)

logger = logging.getLogger(__name__)

MAX_SYMBOL = 255

MAX_ENUMERATED_WORDS = 2 ** 22


@dataclass(frozen=True)
class Word:
    """A finite word over the alphabet, stored densely as bytes."""
    symbols: bytes = b''

    @classmethod
    def of(cls, symbols: Iterable[int]) -> 'Word':
        values = [int(s) for s in symbols]
        for s in values:
            if not 0 <= s <= MAX_SYMBOL:
                raise InvalidSymbolError(f"Symbol {s} is outside 0..{MAX_SYMBOL}")
        return cls(bytes(values))

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Word(self.symbols[index])
        return self.symbols[index]

    def extend(self, symbol: int) -> 'Word':
        return Word(self.symbols + bytes([symbol]))

    def prepend(self, symbol: int) -> 'Word':
        return Word(bytes([symbol]) + self.symbols)

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.symbols, dtype=np.uint8)


WordLike = Union[Word, Sequence[int], np.ndarray]


def as_word(word: WordLike) -> Word:
    if isinstance(word, Word):
        return word
    return Word.of(word)


@dataclass(frozen=True)
class TransitionDiagnosis:
    irreducible: bool
    period: int                   # 0 when the matrix has no cycle at all

    def to_dict(self):
        return {'irreducible': self.irreducible, 'period': self.period}


def validate_transition(matrix) -> TransitionDiagnosis:
    """
    Decides irreducibility and the period of a 0/1 matrix by powering it up to k² times.

    Args:
        matrix: square array-like with entries in {0, 1}.

    Returns:
        TransitionDiagnosis: irreducible iff every (i, j) is reached by some power;
        period is the gcd of the lengths n with a positive diagonal entry in A^n.
    """
    try:
        a = np.asarray(matrix, dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidMatrixError(f"Transition matrix is not numeric: {e}")
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidMatrixError(f"Transition matrix must be square and nonempty, got shape {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise InvalidMatrixError("Transition matrix entries must be 0 or 1")
    k = a.shape[0]
    if k > constants.MAX_ALPHABET_SIZE:
        raise ResourceError(f"Alphabet size {k} exceeds {constants.MAX_ALPHABET_SIZE}")

    reach = np.zeros((k, k), dtype=bool)
    power = np.eye(k)
    period = 0
    for n in range(1, k * k + 1):
        power = ((power @ a) > 0).astype(float)
        reach |= power > 0
        if np.any(np.diag(power) > 0):
            period = gcd(period, n)
        if period == 1 and reach.all():
            break
    return TransitionDiagnosis(irreducible=bool(reach.all()), period=period)


@dataclass(frozen=True)
class WordLevel:
    """All admissible words of one length, lexicographically sorted, with parent indices."""
    words: np.ndarray             # (N, n) uint8
    parents: np.ndarray           # (N,) index into the level n-1 words; -1 at level 0

    @property
    def depth(self) -> int:
        return self.words.shape[1]

    def __len__(self):
        return self.words.shape[0]


@dataclass(frozen=True, eq=False)
class ShiftSystem:
    """
    A one-sided subshift of finite type with a mixing transition matrix.

    The transition matrix must be irreducible and aperiodic. Word levels are cached lazily;
    the instance is otherwise immutable and safe to share.
    """
    transition: np.ndarray
    theta: float = constants.DEFAULT_THETA
    _levels: List[WordLevel] = field(default_factory=list, init=False, repr=False)
    _indices: Dict[int, Dict[bytes, int]] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        diagnosis = validate_transition(self.transition)
        if not diagnosis.irreducible:
            raise NonMixingMatrixError("Transition matrix is reducible",
                                       diagnosis.irreducible, diagnosis.period)
        if diagnosis.period != 1:
            raise NonMixingMatrixError(f"Transition matrix is periodic with period {diagnosis.period}",
                                       diagnosis.irreducible, diagnosis.period)
        if not 0 < self.theta < 1:
            raise DomainError(f"theta must lie in (0, 1), got {self.theta}")
        matrix = np.array(self.transition, dtype=np.int8)
        matrix.setflags(write=False)
        object.__setattr__(self, 'transition', matrix)

    @classmethod
    def full_shift(cls, alphabet_size: int, theta: float = constants.DEFAULT_THETA) -> 'ShiftSystem':
        return cls(np.ones((alphabet_size, alphabet_size), dtype=np.int8), theta)

    @property
    def alphabet_size(self) -> int:
        return self.transition.shape[0]

    def allows(self, a: int, b: int) -> bool:
        return bool(self.transition[a, b])

    def check_symbols(self, word: WordLike):
        for s in as_word(word):
            if s >= self.alphabet_size:
                raise InvalidSymbolError(f"Symbol {s} is outside the alphabet of size {self.alphabet_size}")

    def is_admissible(self, word: WordLike) -> bool:
        word = as_word(word)
        self.check_symbols(word)
        symbols = word.as_array()
        if len(symbols) < 2:
            return True
        return bool(np.all(self.transition[symbols[:-1], symbols[1:]]))

    def make_word(self, symbols: WordLike) -> Word:
        word = as_word(symbols)
        if not self.is_admissible(word):
            raise InadmissibleWordError(f"Word {list(word)} contains a forbidden transition")
        return word

    def children(self, word: WordLike) -> List[Word]:
        """All admissible one-symbol extensions of an admissible word."""
        word = self.make_word(word)
        if len(word) == 0:
            return [Word.of([s]) for s in range(self.alphabet_size)]
        last = word[len(word) - 1]
        return [word.extend(s) for s in range(self.alphabet_size) if self.transition[last, s]]

    def word_level(self, depth: int) -> WordLevel:
        """Admissible words of the given length, built by extending the previous level."""
        if depth < 0:
            raise DomainError(f"depth must be nonnegative, got {depth}")
        if not self._levels:
            self._levels.append(WordLevel(np.zeros((1, 0), dtype=np.uint8), np.array([-1], dtype=np.intp)))
        while len(self._levels) <= depth:
            previous = self._levels[-1]
            if previous.depth == 0:
                parents = np.zeros(self.alphabet_size, dtype=np.intp)
                symbols = np.arange(self.alphabet_size, dtype=np.uint8)
            else:
                allowed = self.transition[previous.words[:, -1]].astype(bool)
                parents, symbols = np.nonzero(allowed)
                symbols = symbols.astype(np.uint8)
            if len(parents) > MAX_ENUMERATED_WORDS:
                raise ResourceError(f"Depth {previous.depth + 1} has {len(parents)} admissible words")
            words = np.hstack([previous.words[parents], symbols[:, None]])
            self._levels.append(WordLevel(words, parents.astype(np.intp)))
        return self._levels[depth]

    def admissible_words(self, depth: int) -> np.ndarray:
        return self.word_level(depth).words

    def word_index(self, depth: int) -> Dict[bytes, int]:
        if depth not in self._indices:
            words = self.admissible_words(depth)
            self._indices[depth] = {row.tobytes(): i for i, row in enumerate(words)}
        return self._indices[depth]

    def ancestors(self, depth: int, ancestor_depth: int) -> np.ndarray:
        """Index of each depth-word's prefix of length ancestor_depth."""
        if not 0 <= ancestor_depth <= depth:
            raise DomainError(f"Ancestor depth {ancestor_depth} not in 0..{depth}")
        index = np.arange(len(self.word_level(depth)))
        for level in range(depth, ancestor_depth, -1):
            index = self.word_level(level).parents[index]
        return index


def is_admissible(word: WordLike, system: ShiftSystem) -> bool:
    return system.is_admissible(word)


def d1_distance(x_prefix: WordLike, y_prefix: WordLike, theta: float) -> float:
    """θ^k where k is the length of the common prefix of x and y."""
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    x, y = as_word(x_prefix), as_word(y_prefix)
    common = min(len(x), len(y))
    for i in range(common):
        if x[i] != y[i]:
            return theta ** i
    raise InsufficientPrefixError(f"Prefixes agree on all {common} stored symbols; distance not determined")


class CylinderMeasure(Protocol):
    def cylinder_measure(self, word: WordLike) -> float:
        ...


def d2_ball_depth(x_prefix: WordLike, epsilon: float, measure: CylinderMeasure) -> int:
    """
    Depth of the open ball B(epsilon, x): the shortest prefix cylinder with measure < epsilon.

    Depth 0 is the whole space and is returned only when epsilon > 1.
    """
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    x = as_word(x_prefix)
    for k in range(len(x) + 1):
        if measure.cylinder_measure(x[:k]) < epsilon:
            return k
    raise InsufficientPrefixError(
        f"Cylinder measure stays >= {epsilon} along the whole prefix of length {len(x)}")
