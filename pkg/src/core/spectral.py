"""
Transfer operators and quasi-Hölder seminorms at cylinder resolution.

Key functionality:
- CylinderFunction: functions constant on depth-m cylinders
- assemble_transfer, leading_eigenpair, spectral_gap: the normalized transfer operator on depth-m
  functions as a sparse matrix and its spectral data
- oscillation, integrated_oscillation, quasi_holder_seminorm, holder_seminorm
- property_F_audit: empirical seminorm constants of the truncated observable and its level sets
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse

import constants
from core.errors import (ConvergenceError, DomainError, GapViolationError, InvalidMeasureError,
                         ResourceError, UnsupportedObservableError)
from core.measure import MarkovMeasure
from core.shift import ShiftSystem, WordLike, as_word

logger = logging.getLogger(__name__)

SNAP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    """h constant on depth-m cylinders; values[i] belongs to system.admissible_words(depth)[i]."""
    system: ShiftSystem
    depth: int
    values: np.ndarray

    def __post_init__(self):
        if self.depth < 0:
            raise DomainError(f"depth must be nonnegative, got {self.depth}")
        values = np.array(self.values, dtype=float).ravel()
        expected = len(self.system.word_level(self.depth))
        if len(values) != expected:
            raise DomainError(f"Depth {self.depth} needs {expected} values, got {len(values)}")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, system: ShiftSystem, value: float, depth: int = 0) -> 'CylinderFunction':
        return cls(system, depth, np.full(len(system.word_level(depth)), float(value)))

    @classmethod
    def from_callable(cls, system: ShiftSystem, depth: int,
                      fn: Callable[[np.ndarray], np.ndarray]) -> 'CylinderFunction':
        """fn maps the (N, depth) word array to N values."""
        return cls(system, depth, fn(system.admissible_words(depth)))

    @classmethod
    def indicator(cls, system: ShiftSystem, word: WordLike, depth: int = None) -> 'CylinderFunction':
        word = system.make_word(word)
        depth = len(word) if depth is None else depth
        if depth < len(word):
            raise DomainError(f"Indicator of a length-{len(word)} word needs depth >= {len(word)}")
        words = system.admissible_words(depth)
        hit = np.all(words[:, :len(word)] == word.as_array(), axis=1)
        return cls(system, depth, hit.astype(float))

    @property
    def words(self) -> np.ndarray:
        return self.system.admissible_words(self.depth)

    def refine(self, depth: int) -> 'CylinderFunction':
        if depth < self.depth:
            raise DomainError(f"Cannot refine depth {self.depth} to {depth}")
        return CylinderFunction(self.system, depth, self.values[self.system.ancestors(depth, self.depth)])

    def _align(self, other) -> Tuple[np.ndarray, np.ndarray, int]:
        if isinstance(other, CylinderFunction):
            if other.system is not self.system:
                raise DomainError("Cylinder functions live on different systems")
            depth = max(self.depth, other.depth)
            return self.refine(depth).values, other.refine(depth).values, depth
        return self.values, np.full(len(self.values), float(other)), self.depth

    def __add__(self, other):
        a, b, depth = self._align(other)
        return CylinderFunction(self.system, depth, a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b, depth = self._align(other)
        return CylinderFunction(self.system, depth, a - b)

    def __mul__(self, other):
        a, b, depth = self._align(other)
        return CylinderFunction(self.system, depth, a * b)

    __rmul__ = __mul__

    def __neg__(self):
        return CylinderFunction(self.system, self.depth, -self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self, measure: MarkovMeasure) -> float:
        return float(np.dot(measure.cylinder_measures(self.depth), self.values))


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """
    The normalized transfer operator on depth-m cylinder functions.

    Rows are target words x, columns source words a·x₁…x_{m−1}; the entry is g(a, x₁).
    """
    depth: int
    matrix: sparse.csr_matrix
    system: ShiftSystem

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def apply(self, h: CylinderFunction) -> CylinderFunction:
        if h.system is not self.system or h.depth > self.depth:
            raise DomainError("Function must live on the same system at depth <= the matrix depth")
        return CylinderFunction(self.system, self.depth, self.matrix @ h.refine(self.depth).values)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def assemble_transfer(measure: MarkovMeasure, depth: int) -> TransferMatrix:
    if not 1 <= depth <= constants.TRANSFER_DEPTH_MAX:
        raise ResourceError(f"Transfer depth must lie in 1..{constants.TRANSFER_DEPTH_MAX}, got {depth}")
    system = measure.system
    words = system.admissible_words(depth)
    index = system.word_index(depth)
    g = measure.g_matrix()
    allowed = system.transition > 0
    rows, cols, data = [], [], []
    for a in range(system.alphabet_size):
        targets = np.flatnonzero(allowed[a, words[:, 0]])
        if targets.size == 0:
            continue
        sources = np.hstack([np.full((targets.size, 1), a, dtype=np.uint8), words[targets, :depth - 1]])
        rows.append(targets)
        cols.append(np.array([index[s.tobytes()] for s in sources], dtype=np.intp))
        data.append(g[a, words[targets, 0]])
    n = len(words)
    matrix = sparse.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    row_error = float(np.max(np.abs(np.asarray(matrix.sum(axis=1)).ravel() - 1.0)))
    if row_error > 1e-12:
        raise InvalidMeasureError(f"Transfer matrix does not fix constants (row error {row_error:.3e})")
    return TransferMatrix(depth=depth, matrix=matrix, system=system)


@dataclass(frozen=True)
class EigenPair:
    eigenvalue: float
    eigvec: np.ndarray
    iterations: int

    def to_dict(self):
        return {'lambda1': self.eigenvalue, 'eigvec': self.eigvec.tolist(), 'iterations': self.iterations}


def leading_eigenpair(transfer: TransferMatrix) -> EigenPair:
    """Left Perron vector by power iteration from the uniform vector, normalized to unit sum."""
    left = transfer.matrix.T.tocsr()
    v = np.full(transfer.dimension, 1.0 / transfer.dimension)
    for iteration in range(1, constants.POWER_ITERATION_MAX + 1):
        w = left @ v
        eigenvalue = w.sum() / v.sum()
        w /= w.sum()
        if np.max(np.abs(w - v)) <= constants.POWER_ITERATION_TOL * np.max(w):
            if np.any(w <= 0):
                raise ConvergenceError("Leading eigenvector is not entrywise positive")
            return EigenPair(eigenvalue=float(eigenvalue), eigvec=w, iterations=iteration)
        v = w
    raise ConvergenceError(f"Power iteration did not converge in {constants.POWER_ITERATION_MAX} iterations")


def spectral_gap(transfer: TransferMatrix) -> float:
    """
    |λ₂| of the transfer matrix.

    The leading pair (1, μ) is deflated as T − 1·μᵀ and the rest is handled by orthogonal
    iteration on a small block with Rayleigh–Ritz values, so that complex or ± pairs of
    second eigenvalues are resolved. Block columns that turn linearly dependent are dropped;
    a deflated operator that annihilates the block gives 0.
    """
    n = transfer.dimension
    if n > constants.SPECTRAL_DIMENSION_MAX:
        raise ResourceError(f"Dimension {n} exceeds {constants.SPECTRAL_DIMENSION_MAX}")
    if n == 1:
        return 0.0
    mu = leading_eigenpair(transfer).eigvec
    matrix = transfer.matrix
    scale = max(float(abs(matrix).sum(axis=1).max()), 1.0)

    def deflated(block: np.ndarray) -> np.ndarray:
        return matrix @ block - (mu @ block)[None, :]

    block_size = min(3, n - 1)
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((n, block_size)))
    previous = math.inf
    for _ in range(constants.POWER_ITERATION_MAX):
        w = deflated(q)
        if np.linalg.norm(w) <= 1e-12 * scale:
            return 0.0
        rho = float(np.max(np.abs(np.linalg.eigvals(q.T @ w))))
        q, r = np.linalg.qr(w)
        # columns that collapsed onto the others carry only rounding noise
        diagonal = np.abs(np.diag(r))
        q = q[:, diagonal > 1e-10 * diagonal.max()]
        if abs(rho - previous) <= constants.POWER_ITERATION_TOL + 1e-12 * rho:
            break
        previous = rho
    else:
        raise ConvergenceError(f"Deflated iteration did not converge in {constants.POWER_ITERATION_MAX} steps")
    if rho >= 1 - constants.GAP_VIOLATION_TOL:
        raise GapViolationError(f"Second eigenvalue modulus {rho:.12g} reaches the unit circle")
    return rho


def _oscillation_levels(h: CylinderFunction) -> List[np.ndarray]:
    """osc(h, [v]) for every admissible word v of each length 0..depth."""
    system = h.system
    high, low = h.values.copy(), h.values.copy()
    levels = [high - low]
    for j in range(h.depth, 0, -1):
        parents = system.word_level(j).parents
        size = len(system.word_level(j - 1))
        up = np.full(size, -np.inf)
        down = np.full(size, np.inf)
        np.maximum.at(up, parents, high)
        np.minimum.at(down, parents, low)
        high, low = up, down
        levels.append(high - low)
    return levels[::-1]


def oscillation(h: CylinderFunction, word: WordLike) -> float:
    """max − min of h over the cylinder [word]; 0 when the cylinder is empty."""
    word = as_word(word)
    if len(word) > h.depth:
        raise DomainError(f"Word length {len(word)} exceeds the function depth {h.depth}")
    h.system.check_symbols(word)
    i = h.system.word_index(len(word)).get(word.symbols)
    if i is None:
        return 0.0
    return float(_oscillation_levels(h)[len(word)][i])


def _check_measure(h: CylinderFunction, measure: MarkovMeasure):
    if measure.system is not h.system:
        raise DomainError("Measure and function live on different systems")


def integrated_oscillation(h: CylinderFunction, eps: float, measure: MarkovMeasure) -> float:
    """
    ∫ osc(h, B(ε, x)) dμ(x), one point per depth-m cylinder.

    B(ε, x) is the shortest prefix cylinder of x with measure < ε; balls deeper than the
    function depth contribute 0.
    """
    _check_measure(h, measure)
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    system = h.system
    m = h.depth
    osc = _oscillation_levels(h)
    prefix_measures = np.column_stack(
        [measure.cylinder_measures(j)[system.ancestors(m, j)] for j in range(m + 1)])
    inside = prefix_measures < eps
    has_ball = inside.any(axis=1)
    ball_depth = np.argmax(inside, axis=1)
    ball_osc = np.zeros(len(prefix_measures))
    for j in np.unique(ball_depth[has_ball]):
        rows = has_ball & (ball_depth == j)
        ball_osc[rows] = osc[j][system.ancestors(m, int(j))[rows]]
    return math.fsum(prefix_measures[:, m] * ball_osc)


def _snapped_breakpoints(values: np.ndarray) -> np.ndarray:
    ordered = np.sort(values)
    keep = np.ones(len(ordered), dtype=bool)
    keep[1:] = np.diff(ordered) > SNAP_TOL * ordered[1:]
    return ordered[keep]


def quasi_holder_seminorm(h: CylinderFunction, eps0: float, measure: MarkovMeasure) -> float:
    """
    sup over 0 < ε ≤ ε₀ of ∫ osc(h, B(ε, x)) dμ / ε, exact for cylinder functions.

    ε ↦ ∫osc is a left-continuous step function jumping only at cylinder measures, so the sup
    is a maximum of left limits step(s_i)/s_{i−1} over the sorted breakpoints.
    """
    if not 0 < eps0 < 1:
        raise DomainError(f"eps0 must lie in (0, 1), got {eps0}")
    if h.depth > constants.SEMINORM_DEPTH_MAX:
        raise ResourceError(f"Seminorm depth {h.depth} exceeds {constants.SEMINORM_DEPTH_MAX}")
    _check_measure(h, measure)
    m = h.depth
    if m <= 1:
        return 0.0
    system = h.system
    osc = _oscillation_levels(h)
    ball, parent, weight = [], [], []
    for j in range(1, m):
        mu = measure.cylinder_measures(j)
        ball.append(mu)
        parent.append(measure.cylinder_measures(j - 1)[system.word_level(j).parents])
        weight.append(mu * osc[j])
    ball, parent, weight = np.concatenate(ball), np.concatenate(parent), np.concatenate(weight)
    candidates = np.concatenate([ball, measure.cylinder_measures(m)])
    breakpoints = _snapped_breakpoints(np.append(candidates[candidates < eps0], eps0))
    active = weight > 0
    lo = np.searchsorted(breakpoints, ball[active] * (1 + SNAP_TOL), side='right')
    hi = np.searchsorted(breakpoints, parent[active] * (1 + SNAP_TOL), side='right')
    jumps = np.zeros(len(breakpoints) + 1)
    np.add.at(jumps, lo, weight[active])
    np.add.at(jumps, hi, -weight[active])
    steps = np.cumsum(jumps)[:len(breakpoints)]
    if len(breakpoints) < 2:
        return 0.0
    return float(np.max(steps[1:] / breakpoints[:-1]))


def holder_seminorm(h: CylinderFunction, theta: float) -> float:
    """sup |h(x) − h(y)| / θ^(common prefix length) over points with different depth-m cylinders."""
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    system = h.system
    best = 0.0
    high, low = h.values, h.values
    for j in range(h.depth, 0, -1):
        parents = system.word_level(j).parents
        size = len(system.word_level(j - 1))
        spread = 0.0
        for v in range(size):
            children = np.flatnonzero(parents == v)
            if len(children) < 2:
                continue
            c_high, c_low = high[children], low[children]
            diffs = c_high[:, None] - c_low[None, :]
            np.fill_diagonal(diffs, -np.inf)
            spread = max(spread, float(diffs.max()))
        best = max(best, spread / theta ** (j - 1))
        up = np.full(size, -np.inf)
        down = np.full(size, np.inf)
        np.maximum.at(up, parents, high)
        np.minimum.at(down, parents, low)
        high, low = up, down
    return best


@dataclass
class PropertyFAudit:
    K1_hat: float
    K2_hat: float
    K3_hat: float
    rows: pd.DataFrame            # per level: level, depth, k1, k2, k3, holder_k2

    def to_dict(self):
        return {
            'K1_hat': self.K1_hat,
            'K2_hat': self.K2_hat,
            'K3_hat': self.K3_hat,
            'rows': self.rows.to_dict(orient='records')
        }


def property_F_audit(observable, measure: MarkovMeasure, eps0: float,
                     level_grid: Sequence[float]) -> PropertyFAudit:
    """
    Empirical constants K̂₁ = sup |ℓχ|/ℓ, K̂₂ = sup |𝟙{χ ≥ ℓ}| and K̂₃ = sup |𝟙{χ = ℓ}| in the
    quasi-Hölder seminorm over the level grid.
    """
    if not observable.is_cylinder_measurable:
        raise UnsupportedObservableError(
            f"{type(observable).__name__} has no finite-depth cylinder representation")
    if not level_grid:
        raise DomainError("Level grid is empty")
    system = measure.system
    records = []
    for level in level_grid:
        level = float(level)
        if not level > 0:
            raise DomainError(f"Levels must be positive, got {level}")
        depth = observable.truncation_depth(level)
        if depth > constants.SEMINORM_DEPTH_MAX:
            raise ResourceError(f"Level {level:g} needs depth {depth} > {constants.SEMINORM_DEPTH_MAX}")
        values = observable.cylinder_values(system.admissible_words(depth))
        truncated = CylinderFunction(system, depth, np.where(values <= level, values, 0.0))
        above = CylinderFunction(system, depth, (values >= level).astype(float))
        equal = CylinderFunction(system, depth, (values == level).astype(float))
        records.append({
            'level': level,
            'depth': depth,
            'k1': quasi_holder_seminorm(truncated, eps0, measure) / level,
            'k2': quasi_holder_seminorm(above, eps0, measure),
            'k3': quasi_holder_seminorm(equal, eps0, measure),
            'holder_k2': holder_seminorm(above, system.theta)
        })
    rows = pd.DataFrame(records)
    return PropertyFAudit(K1_hat=float(rows['k1'].max()),
                          K2_hat=float(rows['k2'].max()),
                          K3_hat=float(rows['k3'].max()),
                          rows=rows)
