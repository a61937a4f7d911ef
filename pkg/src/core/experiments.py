"""
Ensemble Monte-Carlo runs of trimmed sums, truncated sums and exceedance counts.

Each path streams its symbols once, evaluates χ block by block with the observable's lookahead
and records one row per checkpoint. Paths are independent and aggregated in path order, so a
report depends only on the config and the master seed.
"""
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

import constants
from core.data_models import ExperimentConfig, ExperimentReport
from core.enums import (ExperimentMode, NormingKind, ObservableKind, PsiKind, ScheduleKind,
                        StPeteConstant)
from core.errors import CapExceededError, ConfigError, DomainError
from core.measure import MarkovMeasure, TrajectorySampler
from core.norming import (PsiFunction, SlowlyVarying, TrimSchedule, c_eps_psi, d_exact, d_regvar,
                          d_stpete, d_stpete_unscaled, threshold_from_trim)
from core.observable import Observable, ParetoObservable, ReturnTimeObservable
from core.shift import ShiftSystem
from core.trimming import TrimAccumulator

logger = logging.getLogger(__name__)


@dataclass
class ExperimentSetup:
    measure: MarkovMeasure
    observable: Observable
    psi: PsiFunction
    schedule: TrimSchedule
    slowly_varying: SlowlyVarying


def build_measure(config: ExperimentConfig) -> MarkovMeasure:
    k = config.alphabet_size
    transition = np.ones((k, k), dtype=int) if config.transition is None else np.asarray(config.transition)
    system = ShiftSystem(transition, config.theta)
    if config.stochastic is None:
        return MarkovMeasure.uniform(system)
    return MarkovMeasure.from_stochastic(system, np.asarray(config.stochastic, dtype=float))


def build_observable(config: ExperimentConfig, measure: MarkovMeasure) -> Observable:
    if config.observable == ObservableKind.RETURN_TIME:
        return ReturnTimeObservable(config.eta, measure, config.special_symbol, config.depth_cap)
    observable = ParetoObservable(config.alpha, config.digit_cap)
    if not observable.supports(measure):
        raise DomainError("The pareto observable needs the full 2-shift with the fair Bernoulli measure")
    return observable


def build_psi(config: ExperimentConfig) -> PsiFunction:
    if config.psi == PsiKind.POWER:
        return PsiFunction.power(config.psi_delta)
    return PsiFunction.exp_poly(config.psi_c, config.psi_degree)


def _stpete_R(config: ExperimentConfig, observable: ReturnTimeObservable) -> float:
    return observable.R if config.stpete_constant == StPeteConstant.DERIVED else observable.R_stated


def build_schedule(config: ExperimentConfig, observable: Observable, psi: PsiFunction) -> TrimSchedule:
    if config.schedule == ScheduleKind.POWER:
        return TrimSchedule.power(config.beta)
    if config.schedule == ScheduleKind.EXPLICIT:
        return TrimSchedule.explicit(config.schedule_values)
    if not isinstance(observable, ReturnTimeObservable):
        raise DomainError("The stpete schedule needs the return_time observable")
    return TrimSchedule.stpete(config.beta, observable.q, _stpete_R(config, observable), psi)


def build_setup(config: ExperimentConfig) -> ExperimentSetup:
    measure = build_measure(config)
    observable = build_observable(config, measure)
    psi = build_psi(config)
    return ExperimentSetup(measure=observable.measure,
                           observable=observable,
                           psi=psi,
                           schedule=build_schedule(config, observable, psi),
                           slowly_varying=SlowlyVarying(config.slowly_varying, config.slowly_varying_c))


@dataclass(frozen=True)
class CheckpointPlan:
    """Deterministic per-checkpoint quantities shared by every path."""
    n: int
    b_n: Optional[int] = None
    d_n: float = math.nan
    f_n: float = math.nan
    expected: float = math.nan
    expected_above: float = math.nan
    expected_equal: float = math.nan
    gamma: float = math.nan
    gamma_prime: float = math.nan
    plateau: float = math.nan


def norming_constant(config: ExperimentConfig, setup: ExperimentSetup, n: int, b_n: int) -> float:
    """d_n for the configured norming kind; NaN when b_n ≥ n leaves nothing to normalize."""
    if b_n >= n:
        return math.nan
    observable = setup.observable
    if config.norming == NormingKind.EXACT:
        return d_exact(n, b_n, observable)
    if isinstance(observable, ReturnTimeObservable):
        formula = d_stpete if config.norming == NormingKind.FORMULA else d_stpete_unscaled
        return formula(n, b_n, observable.q, observable.eta, _stpete_R(config, observable))
    if config.norming == NormingKind.UNSCALED:
        raise DomainError("The unscaled norming applies to the return_time observable only")
    return d_regvar(n, b_n, observable.alpha, setup.slowly_varying)


def _envelope(config: ExperimentConfig, psi: PsiFunction, expected_count: float, n: int) -> float:
    return config.V_hat * c_eps_psi(max(expected_count, 1.0), n, config.eps, psi)


def checkpoint_plan(config: ExperimentConfig, setup: ExperimentSetup) -> List[CheckpointPlan]:
    observable = setup.observable
    plans = []
    if config.mode == ExperimentMode.TRIM:
        counts = setup.schedule.evaluate(config.checkpoints)
        for n, b in zip(config.checkpoints, counts):
            plans.append(CheckpointPlan(n=n, b_n=b, d_n=norming_constant(config, setup, n, b)))
        return plans
    for n in config.checkpoints:
        b = None
        if n in config.thresholds:
            f = float(config.thresholds[n])
        else:
            b = setup.schedule.b_n(n)
            f = threshold_from_trim(b, n, config.V, config.eps, setup.psi, observable.quantile)
        expected_above = n * observable.tail_prob(f)
        expected_equal = n * observable.atom_prob(f)
        plateau = f ** observable.tail_exponent * setup.psi.log_at(n) / n if n >= 3 else math.nan
        gamma = _envelope(config, setup.psi, expected_above, n) if n >= 3 else math.nan
        gamma_prime = _envelope(config, setup.psi, expected_equal, n) if n >= 3 else math.nan
        plans.append(CheckpointPlan(n=n, b_n=b, f_n=f,
                                    expected=n * observable.expected_truncated(f),
                                    expected_above=expected_above,
                                    expected_equal=expected_equal,
                                    gamma=gamma, gamma_prime=gamma_prime,
                                    plateau=plateau))
    return plans


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else math.nan


def _record(mode: ExperimentMode, plan: CheckpointPlan, path_index: int, acc: TrimAccumulator) -> Dict:
    n = plan.n
    if mode == ExperimentMode.TRIM:
        degenerate = plan.b_n >= n or not math.isfinite(plan.d_n)
        trimmed = acc.trimmed_sum(min(plan.b_n, n))
        return {'n': n, 'path': path_index, 'S_n': acc.total, 'b_n': plan.b_n, 'S_trim': trimmed,
                'd_n': plan.d_n, 'ratio': 0.0 if degenerate else _ratio(trimmed, plan.d_n)}
    f = plan.f_n
    above = acc.count_above(f)
    equal = acc.count_equal(f)
    sandwich_ok = acc.sandwich_holds(f)
    if not sandwich_ok:
        logger.error("Sandwich inequality failed at n=%d on path %d", n, path_index)
    if mode == ExperimentMode.TRUNCATE:
        truncated = acc.truncated_sum(f)
        return {'n': n, 'path': path_index, 'f_n': f, 'T_n': truncated, 'expected': plan.expected,
                'ratio': _ratio(truncated, plan.expected), 'plateau': plan.plateau,
                'count_above': above, 'count_equal': equal, 'sandwich_ok': sandwich_ok}
    return {'n': n, 'path': path_index, 'f_n': f, 'count_above': above, 'count_equal': equal,
            'expected_above': plan.expected_above, 'expected_equal': plan.expected_equal,
            'gamma': plan.gamma, 'gamma_prime': plan.gamma_prime,
            'ratio': _ratio(above, plan.expected_above),
            'within_gamma': bool(abs(above - plan.expected_above) <= plan.gamma),
            'within_gamma_prime': bool(abs(equal - plan.expected_equal) <= plan.gamma_prime),
            'sandwich_ok': sandwich_ok}


def run_path(config: ExperimentConfig, plans: List[CheckpointPlan], path_index: int) -> List[Dict]:
    """Streams one path through every checkpoint; the records of one path in checkpoint order."""
    observable = build_setup(config).observable
    sampler = TrajectorySampler(observable.measure, config.master_seed, path_index, config.block_size)
    acc = TrimAccumulator(config.b_max)
    lookahead = observable.lookahead
    n_max = plans[-1].n
    records = []
    next_plan = 0
    pending = np.empty(0, dtype=np.uint8)
    for block in sampler.blocks(n_max + lookahead - 1):
        buffer = np.concatenate([pending, block]) if len(pending) else block
        ready = min(len(buffer) - lookahead + 1, n_max - acc.count)
        if ready <= 0:
            pending = buffer
            continue
        try:
            values = observable.evaluate_block(buffer, ready)
        except CapExceededError as e:
            e.path = path_index
            e.position = acc.count + (e.position or 0)
            raise
        start = 0
        while start < ready:
            take = min(ready - start, plans[next_plan].n - acc.count)
            acc.extend(values[start:start + take])
            start += take
            if acc.count == plans[next_plan].n:
                records.append(_record(config.mode, plans[next_plan], path_index, acc))
                next_plan += 1
        pending = buffer[ready:]
    return records


def _thread_count(config: ExperimentConfig) -> int:
    return config.threads if config.threads else 1


def _show_progress(config: ExperimentConfig) -> bool:
    return config.progress and sys.stderr.isatty()


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    problems = config.validate()
    if problems:
        raise ConfigError([f"{key}: {message}" for key, message in problems], [key for key, _ in problems])
    setup = build_setup(config)
    plans = checkpoint_plan(config, setup)
    threads = _thread_count(config)
    worker = partial(run_path, config, plans)
    paths = range(config.ensemble_size)
    logger.info("Running %d %s paths up to n=%d on %d thread(s)",
                config.ensemble_size, config.mode.name.lower(), plans[-1].n, threads)
    progress = partial(tqdm, total=config.ensemble_size, desc=config.mode.name.lower(),
                       disable=not _show_progress(config))
    if threads <= 1:
        results = list(progress(map(worker, paths)))
    else:
        with ProcessPoolExecutor(max_workers=threads) as executor:
            results = list(progress(executor.map(worker, paths)))
    rows = [row for path_rows in results for row in path_rows]
    records = pd.DataFrame(rows, columns=constants.CSV_COLUMNS[config.mode.name.lower()])
    if config.mode == ExperimentMode.TRIM:
        degenerate = int((records['b_n'] >= records['n']).sum())
        if degenerate:
            logger.warning("%d records have b_n >= n and are excluded from the summary", degenerate)
    return ExperimentReport(config=config, records=records)


def _require_mode(config: ExperimentConfig, mode: ExperimentMode) -> ExperimentConfig:
    if config.mode not in (None, mode):
        raise DomainError(f"Config mode {config.mode.name.lower()} does not match {mode.name.lower()}")
    return replace(config, mode=mode)


def run_trim(config: ExperimentConfig) -> ExperimentReport:
    return run_experiment(_require_mode(config, ExperimentMode.TRIM))


def run_truncate(config: ExperimentConfig) -> ExperimentReport:
    return run_experiment(_require_mode(config, ExperimentMode.TRUNCATE))


def run_exceedance(config: ExperimentConfig) -> ExperimentReport:
    return run_experiment(_require_mode(config, ExperimentMode.EXCEEDANCE))


def summarize(report: Union[ExperimentReport, pd.DataFrame]) -> pd.DataFrame:
    """
    Per-checkpoint statistics of ratio and |ratio − 1|; degenerate (zero or non-finite) ratios are
    counted but excluded. trend_ok marks a median deviation no larger than at the previous checkpoint.
    """
    records = report.records if isinstance(report, ExperimentReport) else report
    if records is None or len(records) == 0:
        raise DomainError("Cannot summarize an empty report")
    ratio = records['ratio'].astype(float)
    valid = np.isfinite(ratio) & (ratio > 0)
    frame = records.assign(ratio=ratio, deviation=(ratio - 1).abs(), valid=valid)
    rows = []
    for n, group in frame.groupby('n', sort=True):
        good = group[group['valid']]
        deviation = good['deviation']
        row = {
            'n': int(n),
            'paths': int(group['path'].nunique()),
            'degenerate': int((~group['valid']).sum()),
            'median_ratio': float(good['ratio'].median()) if len(good) else math.nan,
            'mean_ratio': float(good['ratio'].mean()) if len(good) else math.nan,
            'median_deviation': float(deviation.median()) if len(good) else math.nan,
            'mean_deviation': float(deviation.mean()) if len(good) else math.nan,
            'q25_deviation': float(deviation.quantile(0.25)) if len(good) else math.nan,
            'q75_deviation': float(deviation.quantile(0.75)) if len(good) else math.nan,
            'max_deviation': float(deviation.max()) if len(good) else math.nan
        }
        if 'within_gamma' in group:
            row['within_gamma_fraction'] = float(group['within_gamma'].astype(bool).mean())
            row['within_gamma_prime_fraction'] = float(group['within_gamma_prime'].astype(bool).mean())
        rows.append(row)
    summary = pd.DataFrame(rows)
    medians = summary['median_deviation'].to_numpy()
    trend = np.ones(len(medians), dtype=bool)
    trend[1:] = ~(medians[1:] > medians[:-1])
    summary['trend_ok'] = trend
    return summary


def trend_nonincreasing(summary: pd.DataFrame) -> bool:
    return bool(summary['trend_ok'].all())


def ensemble_mean_ratio(summary: pd.DataFrame, n: int) -> float:
    row = summary[summary['n'] == n]
    if row.empty:
        raise DomainError(f"No checkpoint n={n} in the summary")
    return float(row['mean_ratio'].iloc[0])

