"""
Deterministic sequence calculus for trimmed sums.

Key functionality:
- PsiFunction and c_eps_psi: the Ψ-class growth functions and the deviation scale c(k, n)
- TrimSchedule: b_n rules (power, St. Petersburg, explicit)
- threshold_from_trim / trim_from_threshold: the f_n <-> b_n correspondence
- debruijn_conjugate, d_regvar, d_stpete, d_stpete_unscaled, d_exact: norming sequences
- schedule_diagnostic: finite-grid trend check of b_n / log ψ(⌊log n⌋)
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

import constants
from core.enums import PsiKind, ScheduleKind, SlowlyVaryingKind
from core.errors import ConjugateDivergedError, DomainError, ScheduleInfeasibleError
from core.measure import MarkovMeasure

logger = logging.getLogger(__name__)


def _snap_ceil(x: float) -> int:
    nearest = round(x)
    if abs(x - nearest) <= constants.LOG_SNAP_TOL * max(1.0, abs(x)):
        return int(nearest)
    return int(math.ceil(x))


def floor_log(n: int) -> int:
    """⌊log n⌋ with natural logarithm."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    return int(math.floor(math.log(n)))


@dataclass(frozen=True)
class PsiFunction:
    """
    A member of Ψ (positive integer functions with summable reciprocals).

    power:    ψ(j) = j^(1+δ), δ > 0
    exp_poly: ψ(j) = exp(c·j^p), c > 0, p > 0
    """
    kind: PsiKind
    delta: float = 1.0
    c: float = 1.0
    degree: float = 1.0

    def __post_init__(self):
        if self.kind == PsiKind.POWER and not self.delta > 0:
            raise DomainError(f"Power psi needs delta > 0 for summable reciprocals, got {self.delta}")
        if self.kind == PsiKind.EXP_POLY and not (self.c > 0 and self.degree > 0):
            raise DomainError(f"Exponential psi needs c > 0 and degree > 0, got c={self.c}, degree={self.degree}")

    @classmethod
    def power(cls, delta: float) -> 'PsiFunction':
        return cls(PsiKind.POWER, delta=delta)

    @classmethod
    def exp_poly(cls, c: float, degree: float = 1.0) -> 'PsiFunction':
        return cls(PsiKind.EXP_POLY, c=c, degree=degree)

    def log_value(self, j: int) -> float:
        """log ψ(j), computed without forming ψ(j)."""
        if j < 1:
            raise DomainError(f"psi is defined on positive integers, got {j}")
        if self.kind == PsiKind.POWER:
            return (1 + self.delta) * math.log(j)
        return self.c * j ** self.degree

    def __call__(self, j: int) -> float:
        return math.exp(self.log_value(j))

    def log_at(self, n: int) -> float:
        """log ψ(⌊log n⌋); needs n ≥ 3 so that ⌊log n⌋ ≥ 1."""
        if n < 3:
            raise DomainError(f"n must be at least 3, got {n}")
        return self.log_value(floor_log(n))

    def to_dict(self):
        return {'kind': self.kind.name.lower(), 'delta': self.delta, 'c': self.c, 'degree': self.degree}


def c_eps_psi(k: float, n: int, eps: float, psi: PsiFunction) -> float:
    """c(k, n) = max(k, log ψ(⌊log n⌋))^(1/2+ε) · log ψ(⌊log n⌋)^(1/2−ε)."""
    if not 0 < eps < 0.25:
        raise DomainError(f"eps must lie in (0, 1/4), got {eps}")
    if n < 3:
        raise DomainError(f"n must be at least 3, got {n}")
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    log_psi = psi.log_at(n)
    return max(k, log_psi) ** (0.5 + eps) * log_psi ** (0.5 - eps)


def threshold_from_trim(b_n: int, n: int, V: float, eps: float, psi: PsiFunction,
                        quantile: Callable[[float], float]) -> float:
    """f_n = F^←(1 − (b_n − V·c(b_n, n))/n)."""
    if V < 0:
        raise DomainError(f"V must be nonnegative, got {V}")
    margin = V * c_eps_psi(b_n, n, eps, psi) if V > 0 else 0.0
    excess = b_n - margin
    if not 0 < excess < n:
        raise ScheduleInfeasibleError(f"b_n - V*c(b_n, n) = {excess:.6g} is outside (0, n)", n)
    return quantile(1.0 - excess / n)


def trim_from_threshold(f_n: float, n: int, r_n: float, tail: Callable[[float], float]) -> int:
    """b_n = ⌈n·μ(χ > f_n) + r_n⌉."""
    if r_n < 0:
        raise DomainError(f"r_n must be nonnegative, got {r_n}")
    b = _snap_ceil(n * tail(f_n) + r_n)
    if b > n:
        raise ScheduleInfeasibleError(f"Trim count {b} exceeds the sample size", n)
    return b


@dataclass(frozen=True)
class TrimSchedule:
    """
    Trimming counts b_n.

    power:    b_n = ⌈n^β⌉
    stpete:   b_n = ⌈R/(1−q)·q^(k_n)·n + w_n⌉ with k_n = ⌈log(n^(1−β)·R/(1−q)) / log(1/q)⌉
              and w_n = (q^(k_n)·n)^0.55 · log ψ(⌊log n⌋)^0.45
    explicit: b_n listed per n
    """
    kind: ScheduleKind
    beta: float = 0.6
    values: Dict[int, int] = field(default_factory=dict)
    q: Optional[float] = None
    R: Optional[float] = None
    psi: Optional[PsiFunction] = None

    def __post_init__(self):
        if self.kind in (ScheduleKind.POWER, ScheduleKind.STPETE) and not 0 <= self.beta < 1:
            raise DomainError(f"beta must lie in [0, 1), got {self.beta}")
        if self.kind == ScheduleKind.STPETE:
            if self.q is None or self.R is None or self.psi is None:
                raise DomainError("St. Petersburg schedule needs q, R and psi")
            if not 0 < self.q < 1:
                raise DomainError(f"q must lie in (0, 1), got {self.q}")
            if not self.R > 0:
                raise DomainError(f"R must be positive, got {self.R}")

    @classmethod
    def power(cls, beta: float) -> 'TrimSchedule':
        return cls(ScheduleKind.POWER, beta=beta)

    @classmethod
    def stpete(cls, beta: float, q: float, R: float, psi: PsiFunction) -> 'TrimSchedule':
        return cls(ScheduleKind.STPETE, beta=beta, q=q, R=R, psi=psi)

    @classmethod
    def explicit(cls, values: Dict[int, int]) -> 'TrimSchedule':
        return cls(ScheduleKind.EXPLICIT, values={int(n): int(b) for n, b in values.items()})

    def k_n(self, n: int) -> int:
        """Atom index of the St. Petersburg main term."""
        if self.kind != ScheduleKind.STPETE:
            raise DomainError("k_n is defined only for the St. Petersburg schedule")
        x = math.log(n ** (1 - self.beta) * self.R / (1 - self.q)) / math.log(1 / self.q)
        return max(_snap_ceil(x), 0)

    def b_n(self, n: int) -> int:
        if n < 1:
            raise DomainError(f"n must be positive, got {n}")
        if self.kind == ScheduleKind.POWER:
            b = _snap_ceil(n ** self.beta)
        elif self.kind == ScheduleKind.STPETE:
            k = self.k_n(n)
            main = self.R / (1 - self.q) * self.q ** k * n
            w = (self.q ** k * n) ** constants.STPETE_W_EXPONENT * \
                self.psi.log_at(n) ** (1 - constants.STPETE_W_EXPONENT)
            b = _snap_ceil(main + w)
        else:
            if n not in self.values:
                raise ScheduleInfeasibleError("Explicit schedule has no entry", n)
            b = self.values[n]
        if not 1 <= b <= n:
            raise ScheduleInfeasibleError(f"Trim count {b} is outside 1..n", n)
        return b

    def evaluate(self, n_grid: Sequence[int]) -> List[int]:
        counts = [self.b_n(int(n)) for n in n_grid]
        if any(b2 < b1 for b1, b2 in zip(counts, counts[1:])):
            logger.warning("Trim counts are not nondecreasing on %s: %s", list(n_grid), counts)
        return counts

    def to_dict(self):
        return {
            'kind': self.kind.name.lower(),
            'beta': self.beta,
            'values': dict(self.values),
            'q': self.q,
            'R': self.R,
            'psi': self.psi.to_dict() if self.psi else None
        }


@dataclass(frozen=True)
class SlowlyVarying:
    """Built-in slowly varying functions: 1, a constant c, or log x."""
    kind: SlowlyVaryingKind = SlowlyVaryingKind.ONE
    c: float = 1.0

    def __post_init__(self):
        if self.kind == SlowlyVaryingKind.CONSTANT and not self.c > 0:
            raise DomainError(f"Constant slowly varying function needs c > 0, got {self.c}")

    def __call__(self, x: float) -> float:
        if self.kind == SlowlyVaryingKind.ONE:
            return 1.0
        if self.kind == SlowlyVaryingKind.CONSTANT:
            return self.c
        return math.log(x) if x > 0 else math.nan

    def is_one(self) -> bool:
        return self.kind == SlowlyVaryingKind.ONE or (self.kind == SlowlyVaryingKind.CONSTANT and self.c == 1.0)


@dataclass(frozen=True)
class ConjugateResult:
    value: float
    fixed_point_residual: float     # |y·L(x·y) − 1|
    asymptotic_residual: float      # |L(x)·L^#(x·L(x)) − 1|
    iterations: int

    def to_dict(self):
        return {
            'value': self.value,
            'fixed_point_residual': self.fixed_point_residual,
            'asymptotic_residual': self.asymptotic_residual,
            'iterations': self.iterations
        }


def _conjugate_fixed_point(L: Callable[[float], float], x: float):
    y = 1.0
    for iteration in range(1, constants.CONJUGATE_MAX_ITERATIONS + 1):
        value = L(x * y)
        if not (math.isfinite(value) and value > 0):
            raise ConjugateDivergedError(f"L({x * y:.6g}) = {value} is not positive")
        nxt = 1.0 / value
        if abs(nxt / y - 1) < constants.CONJUGATE_TOL:
            return nxt, iteration
        y = nxt
    raise ConjugateDivergedError(
        f"Fixed point y = 1/L(x·y) at x={x:.6g} did not settle in {constants.CONJUGATE_MAX_ITERATIONS} iterations")


def debruijn_conjugate(L: Callable[[float], float], x: float) -> ConjugateResult:
    """
    Numeric de Bruijn conjugate L^#(x) as the fixed point of y = 1/L(x·y), iterated from y = 1.

    Raises:
        ConjugateDivergedError: the iteration does not settle; supply a closed form instead.
    """
    lx = L(x)
    if not (math.isfinite(lx) and lx > 0):
        raise DomainError(f"L must be positive at x={x}, got {lx}")
    y, iterations = _conjugate_fixed_point(L, x)
    fixed_point_residual = abs(y * L(x * y) - 1)
    y_shifted, _ = _conjugate_fixed_point(L, x * lx)
    return ConjugateResult(value=y,
                           fixed_point_residual=fixed_point_residual,
                           asymptotic_residual=abs(lx * y_shifted - 1),
                           iterations=iterations)


def _check_trim_range(n: int, b_n: int):
    if not 1 <= b_n < n:
        raise DomainError(f"Need 1 <= b_n < n, got b_n={b_n}, n={n}")


def d_regvar(n: int, b_n: int, alpha: float, L: Optional[Callable[[float], float]] = None) -> float:
    """d_n = α/(1−α) · n^(1/α) · b_n^(1−1/α) · (L^(1/α))^#((n/b_n)^(1/α))."""
    _check_trim_range(n, b_n)
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if L is None or (isinstance(L, SlowlyVarying) and L.is_one()):
        conjugate = 1.0
    else:
        conjugate = debruijn_conjugate(lambda t: L(t) ** (1 / alpha), (n / b_n) ** (1 / alpha)).value
    return alpha / (1 - alpha) * n ** (1 / alpha) * b_n ** (1 - 1 / alpha) * conjugate


def _stpete_exponent(q: float, eta: float, R: float) -> float:
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    if not eta * q > 1:
        raise DomainError(f"eta={eta} must exceed 1/q={1 / q:.12g}")
    if not 0 < R < 1 / q:
        raise DomainError(f"R must lie in (0, 1/q), got {R}")
    return math.log(eta) / math.log(q)


def d_stpete(n: int, b_n: int, q: float, eta: float, R: float) -> float:
    """η/(qη−1) · (Rq)^(−e) · (1−q)^(1+e) · n^(−e) · b_n^(1+e) with e = log η / log q."""
    e = _stpete_exponent(q, eta, R)
    _check_trim_range(n, b_n)
    return eta / (q * eta - 1) * (R * q) ** (-e) * (1 - q) ** (1 + e) * n ** (-e) * b_n ** (1 + e)


def d_stpete_unscaled(n: int, b_n: int, q: float, eta: float, R: float) -> float:
    """Same as d_stpete with R in place of R·q."""
    e = _stpete_exponent(q, eta, R)
    _check_trim_range(n, b_n)
    return eta / (q * eta - 1) * R ** (-e) * (1 - q) ** (1 + e) * n ** (-e) * b_n ** (1 + e)


@dataclass(frozen=True)
class StPetersburgConstants:
    q: float
    R_derived: float              # π₁(1−q)/q: μ(χ = η^k) = R·q^k
    R_stated: float               # π₁/q

    def to_dict(self):
        return {'q': self.q, 'R_derived': self.R_derived, 'R_stated': self.R_stated}


def stpete_constants(measure: MarkovMeasure, special_symbol: int = 0) -> StPetersburgConstants:
    if not 0 <= special_symbol < measure.alphabet_size:
        raise DomainError(f"Special symbol {special_symbol} is outside the alphabet")
    q = float(measure.stochastic[special_symbol, special_symbol])
    if q <= 0:
        raise DomainError("The special symbol must be allowed to repeat")
    pi1 = float(measure.stationary[special_symbol])
    return StPetersburgConstants(q=q, R_derived=pi1 * (1 - q) / q, R_stated=pi1 / q)


def d_exact(n: int, b_n: int, observable) -> float:
    """
    n·E[χ; χ ≤ f_n] − r_n·f_n with f_n = F^←(1 − b_n/n) and r_n = b_n − n·μ(χ > f_n).

    This is the expected truncated sum minus the expected tie-level removals.
    """
    _check_trim_range(n, b_n)
    f = observable.quantile(1.0 - b_n / n)
    r = max(b_n - n * observable.tail_prob(f), 0.0)
    return n * observable.expected_truncated(f) - r * f


@dataclass
class ScheduleDiagnostic:
    table: pd.DataFrame           # columns n, b_n, log_psi, ratio
    increasing: bool

    def to_dict(self):
        return {'increasing': self.increasing, 'rows': self.table.to_dict(orient='records')}


def schedule_diagnostic(schedule: TrimSchedule, psi: PsiFunction, n_grid: Sequence[int]) -> ScheduleDiagnostic:
    """b_n / log ψ(⌊log n⌋) on the grid; a ratio trend that is not strictly increasing logs a warning."""
    grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError(f"n_grid must be strictly increasing, got {grid}")
    counts = schedule.evaluate(grid)
    log_psi = np.array([psi.log_at(n) for n in grid])
    with np.errstate(divide='ignore'):
        ratios = np.where(log_psi > 0, np.asarray(counts, dtype=float) / np.where(log_psi > 0, log_psi, 1.0), np.inf)
    table = pd.DataFrame({'n': grid, 'b_n': counts, 'log_psi': log_psi, 'ratio': ratios})
    increasing = bool(np.all(np.diff(ratios) > 0))
    if not increasing:
        logger.warning("b_n / log psi(floor(log n)) is not increasing on %s; "
                       "the schedule may grow too slowly", grid)
    return ScheduleDiagnostic(table=table, increasing=increasing)
