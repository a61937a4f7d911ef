"""
Stationary Markov measures on a subshift of finite type.

Key functionality:
- stationary_distribution: power iteration for π·P = π
- MarkovMeasure: exact cylinder measures, the induced g-function, Gibbs and decay audits
- TrajectorySampler: deterministic per-path symbol streams

Streams come from numpy's PCG64 bit generator seeded with SeedSequence(master_seed, spawn_key=(path,)).
Report digests are specific to that generator.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional

import numpy as np

import constants
from core.errors import DomainError, ConvergenceError, InvalidMeasureError, ResourceError
from core.shift import ShiftSystem, WordLike, as_word

logger = logging.getLogger(__name__)


def _check_row_stochastic(matrix: np.ndarray) -> np.ndarray:
    p = np.asarray(matrix, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise InvalidMeasureError(f"Stochastic matrix must be square, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidMeasureError("Stochastic matrix entries must be finite and nonnegative")
    row_error = np.max(np.abs(p.sum(axis=1) - 1.0))
    if row_error > constants.STOCHASTIC_ROW_TOL:
        raise InvalidMeasureError(f"Rows of the stochastic matrix must sum to 1 (max error {row_error:.3e})")
    return p


def stationary_distribution(stochastic) -> np.ndarray:
    """Stationary probability vector of P by power iteration from the uniform vector."""
    p = _check_row_stochastic(stochastic)
    k = p.shape[0]
    pi = np.full(k, 1.0 / k)
    for _ in range(constants.STATIONARY_MAX_ITERATIONS):
        nxt = pi @ p
        nxt /= nxt.sum()
        residual = np.max(np.abs(nxt @ p - nxt))
        pi = nxt
        if residual <= constants.STATIONARY_RESIDUAL_TOL * 1e-2:
            return pi
    residual = np.max(np.abs(pi @ p - pi))
    if residual <= constants.STATIONARY_RESIDUAL_TOL:
        return pi
    raise ConvergenceError(
        f"Power iteration did not converge in {constants.STATIONARY_MAX_ITERATIONS} iterations "
        f"(residual {residual:.3e})")


@dataclass(frozen=True)
class GibbsBracket:
    K_lower: float
    K_upper: float
    depth_max: int

    def to_dict(self):
        return {'K_lower': self.K_lower, 'K_upper': self.K_upper, 'depth_max': self.depth_max}


@dataclass(frozen=True)
class CylinderDecay:
    """Largest cylinder measure per depth with a fitted bound max μ([A]) ≤ K·γ^n."""
    depths: np.ndarray
    max_measures: np.ndarray
    gamma: float
    K: float

    def to_dict(self):
        return {
            'depths': self.depths.tolist(),
            'max_measures': self.max_measures.tolist(),
            'gamma': self.gamma,
            'K': self.K
        }


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """
    A stationary Markov measure: P is supported exactly on the allowed transitions and π·P = π.
    """
    system: ShiftSystem
    stochastic: np.ndarray
    stationary: np.ndarray
    _level_measures: Dict[int, np.ndarray] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        p = np.array(_check_row_stochastic(self.stochastic), dtype=float)
        k = self.system.alphabet_size
        if p.shape != (k, k):
            raise InvalidMeasureError(f"Stochastic matrix shape {p.shape} does not match alphabet size {k}")
        if not np.array_equal(p > 0, self.system.transition > 0):
            raise InvalidMeasureError("Stochastic matrix must be positive exactly on the allowed transitions")
        pi = np.array(self.stationary, dtype=float)
        if pi.shape != (k,) or np.any(pi <= 0) or abs(pi.sum() - 1.0) > constants.STOCHASTIC_ROW_TOL:
            raise InvalidMeasureError("Stationary vector must be a positive probability vector")
        residual = np.max(np.abs(pi @ p - pi))
        if residual > constants.STATIONARY_RESIDUAL_TOL:
            raise InvalidMeasureError(f"Stationary vector is not invariant (residual {residual:.3e})")
        p.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, 'stochastic', p)
        object.__setattr__(self, 'stationary', pi)

    @classmethod
    def from_stochastic(cls, system: ShiftSystem, stochastic) -> 'MarkovMeasure':
        return cls(system, np.asarray(stochastic, dtype=float), stationary_distribution(stochastic))

    @classmethod
    def uniform(cls, system: ShiftSystem) -> 'MarkovMeasure':
        """Each allowed successor equally likely."""
        a = system.transition.astype(float)
        return cls.from_stochastic(system, a / a.sum(axis=1, keepdims=True))

    @classmethod
    def bernoulli(cls, weights) -> 'MarkovMeasure':
        w = np.asarray(weights, dtype=float)
        system = ShiftSystem.full_shift(len(w))
        return cls.from_stochastic(system, np.tile(w, (len(w), 1)))

    @property
    def alphabet_size(self) -> int:
        return self.system.alphabet_size

    def is_bernoulli(self) -> bool:
        return bool(np.all(self.stochastic == self.stochastic[0]))

    def cylinder_measure(self, word: WordLike) -> float:
        """π_{i1}·p_{i1,i2}·…; 0 for inadmissible words and 1 for the empty word."""
        word = as_word(word)
        if len(word) == 0:
            return 1.0
        if not self.system.is_admissible(word):
            return 0.0
        symbols = word.as_array()
        return float(self.stationary[symbols[0]] * np.prod(self.stochastic[symbols[:-1], symbols[1:]]))

    def cylinder_measures(self, depth: int) -> np.ndarray:
        """Measures of all admissible words of the given length, aligned with system.word_level."""
        if depth not in self._level_measures:
            level = self.system.word_level(depth)
            if depth == 0:
                mu = np.ones(1)
            elif depth == 1:
                mu = self.stationary[level.words[:, 0]].copy()
            else:
                parent = self.system.word_level(depth - 1)
                mu = (self.cylinder_measures(depth - 1)[level.parents]
                      * self.stochastic[parent.words[level.parents, -1], level.words[:, -1]])
            mu.setflags(write=False)
            self._level_measures[depth] = mu
        return self._level_measures[depth]

    def g_matrix(self) -> np.ndarray:
        """G[a, b] = π_a·P_{ab}/π_b, the g-weight of prepending a to a point starting with b."""
        return self.stationary[:, None] * self.stochastic / self.stationary[None, :]

    def g_function(self, symbol: int, suffix: WordLike) -> float:
        suffix = as_word(suffix)
        if len(suffix) == 0:
            raise DomainError("g_function needs a nonempty suffix")
        self.system.check_symbols(suffix.prepend(symbol))
        if not self.system.is_admissible(suffix.prepend(symbol)):
            return 0.0
        first = suffix[0]
        return float(self.stationary[symbol] * self.stochastic[symbol, first] / self.stationary[first])

    def verify_gibbs(self, depth_max: int) -> GibbsBracket:
        """
        Min and max over admissible words A with |A| ≤ depth_max of μ([A]) / exp(S_n log g (x)).

        x is the periodic extension of A when A_n → A_1 is allowed, else A followed by the
        smallest allowed successor of A_n.
        """
        if depth_max > constants.GIBBS_DEPTH_MAX:
            raise ResourceError(f"Gibbs audit depth {depth_max} exceeds {constants.GIBBS_DEPTH_MAX}")
        if depth_max < 0:
            raise DomainError(f"depth_max must be nonnegative, got {depth_max}")
        log_g = np.full(self.stochastic.shape, -np.inf)
        allowed = self.system.transition > 0
        log_g[allowed] = np.log(self.g_matrix()[allowed])
        lower, upper = 1.0, 1.0
        for n in range(1, depth_max + 1):
            words = self.system.admissible_words(n).astype(np.intp)
            last, first = words[:, -1], words[:, 0]
            smallest = np.argmax(allowed[last], axis=1)
            continuation = np.where(allowed[last, first], first, smallest)
            extended = np.hstack([words, continuation[:, None]])
            birkhoff = log_g[extended[:, :-1], extended[:, 1:]].sum(axis=1)
            ratios = np.exp(np.log(self.cylinder_measures(n)) - birkhoff)
            if n == 1:
                lower, upper = float(ratios.min()), float(ratios.max())
            else:
                lower, upper = min(lower, float(ratios.min())), max(upper, float(ratios.max()))
        return GibbsBracket(K_lower=lower, K_upper=upper, depth_max=depth_max)

    def cylinder_decay(self, depth_max: int) -> CylinderDecay:
        if depth_max < 2:
            raise DomainError(f"Cylinder decay fit needs depth_max >= 2, got {depth_max}")
        depths = np.arange(1, depth_max + 1)
        max_measures = np.array([self.cylinder_measures(int(n)).max() for n in depths])
        slope, _ = np.polyfit(depths, np.log(max_measures), 1)
        gamma = float(np.exp(slope))
        K = float(np.max(max_measures / gamma ** depths))
        return CylinderDecay(depths=depths, max_measures=max_measures, gamma=gamma, K=K)


def _cumulative_rows(p: np.ndarray) -> np.ndarray:
    cum = np.cumsum(p, axis=-1)
    for row, probs in zip(np.atleast_2d(cum), np.atleast_2d(p)):
        row[np.flatnonzero(probs)[-1]:] = 1.0
    return cum


@dataclass
class TrajectorySampler:
    """
    Symbol stream of one path: the first symbol from π, later symbols from the rows of P.

    The stream depends only on (master_seed, path_index): the uniform draws are consumed in
    order, so the block size does not change the symbols.
    """
    measure: MarkovMeasure
    master_seed: int
    path_index: int
    block_size: int = constants.DEFAULT_BLOCK_SIZE

    def generator(self) -> np.random.Generator:
        seed_sequence = np.random.SeedSequence(self.master_seed, spawn_key=(self.path_index,))
        return np.random.Generator(np.random.PCG64(seed_sequence))

    def blocks(self, n: int) -> Iterator[np.ndarray]:
        if n < 1:
            raise DomainError(f"Stream length must be positive, got {n}")
        rng = self.generator()
        p = self.measure.stochastic
        cum_pi = _cumulative_rows(self.measure.stationary[None, :])[0]
        cum_p = _cumulative_rows(p)
        iid = self.measure.is_bernoulli()
        state: Optional[int] = None
        remaining = n
        while remaining > 0:
            size = min(self.block_size, remaining)
            u = rng.random(size)
            out = np.empty(size, dtype=np.uint8)
            start = 0
            if state is None:
                out[0] = np.searchsorted(cum_pi, u[0], side='right')
                state = int(out[0])
                start = 1
            if size > start:
                if iid:
                    out[start:] = np.searchsorted(cum_p[0], u[start:], side='right')
                else:
                    out[start:] = _markov_steps(cum_p, state, u[start:])
            state = int(out[-1])
            remaining -= size
            yield out


def _markov_steps(cum_p: np.ndarray, state: int, u: np.ndarray) -> np.ndarray:
    """
    Inverse-CDF Markov steps from state, vectorized by composing per-step transition maps.

    maps[i, s] is the successor of s under uniform u[i]; a doubling scan turns the maps into
    prefix compositions so that maps[i, state] is the symbol at step i.
    """
    k = cum_p.shape[0]
    maps = np.empty((len(u), k), dtype=np.intp)
    for s in range(k):
        maps[:, s] = np.searchsorted(cum_p[s], u, side='right')
    shift = 1
    while shift < len(u):
        maps[shift:] = np.take_along_axis(maps[shift:], maps[:-shift], axis=1)
        shift *= 2
    return maps[:, state]


def sample_stream(sampler: TrajectorySampler, n: int) -> np.ndarray:
    """The first n symbols of the sampler's path as one array."""
    return np.concatenate(list(sampler.blocks(n)))

