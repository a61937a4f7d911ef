"""
Seeded statistical acceptance runs on the canonical St. Petersburg example and the Pareto example.

Checks:
- truncated sums: T_n / n·E[χ; χ ≤ f_n] concentrates at 1 (max deviation ≤ 0.05 at the top checkpoint,
  median deviation nonincreasing, ensemble mean within 0.05 of 1)
- trimmed sums: median of S_n^{b_n}/d_n within [0.7, 1.3] and shrinking deviation, for the
  St. Petersburg schedule and for Pareto α = 1/2 with b_n = ⌈n^0.6⌉
- exceedances: ≥ 95% of paths inside the c_{ε,ψ} envelopes for counts above and equal to f_n
- determinism: identical CSV bytes for 1 and several threads, in each mode

Run from src/:
    python3 -m scripts.acceptance --scale full --threads 8
"""
import argparse
import logging
import os
import sys
import tempfile
from dataclasses import replace
from typing import Dict, List

import pandas as pd

import constants
from core.data_models import ExperimentConfig
from core.enums import ExperimentMode, ObservableKind, ScheduleKind
from core.experiments import build_setup, run_experiment, summarize, trend_nonincreasing
from core.parser import ReportDataIO

SCALES = {
    # checkpoints, paths for the truncate run, paths for trim/exceedance runs
    'full': ([10 ** 4, 10 ** 5, 10 ** 6], 100, 200),
    'reduced': ([10 ** 3, 10 ** 4, 10 ** 5], 20, 40),
}

SEED = 42


def canonical_config(mode: ExperimentMode, checkpoints: List[int], paths: int, threads: int) -> ExperimentConfig:
    """Full 2-shift, π = (1/2, 1/2), q = 1/2, η = 4, St. Petersburg schedule with β = 0.6."""
    return ExperimentConfig(mode=mode,
                            observable=ObservableKind.RETURN_TIME,
                            stochastic=[[0.5, 0.5], [0.5, 0.5]],
                            eta=4.0,
                            schedule=ScheduleKind.STPETE,
                            beta=0.6,
                            checkpoints=list(checkpoints),
                            ensemble_size=paths,
                            master_seed=SEED,
                            threads=threads,
                            progress=True)


def pareto_config(checkpoints: List[int], paths: int, threads: int) -> ExperimentConfig:
    return ExperimentConfig(mode=ExperimentMode.TRIM,
                            observable=ObservableKind.PARETO,
                            stochastic=[[0.5, 0.5], [0.5, 0.5]],
                            alpha=0.5,
                            schedule=ScheduleKind.POWER,
                            beta=0.6,
                            checkpoints=list(checkpoints),
                            ensemble_size=paths,
                            master_seed=SEED,
                            threads=threads)


def atom_thresholds(config: ExperimentConfig) -> Dict[int, float]:
    """f_n = η^(k_n) with n·q^(k_n) within a factor 2 of n^0.6."""
    setup = build_setup(config)
    return {n: setup.observable.atom(setup.schedule.k_n(n)) for n in config.checkpoints}


def _row(check: str, value, target: str, passed: bool) -> Dict:
    return {'check': check, 'value': value, 'target': target, 'pass': bool(passed)}


def check_truncate(checkpoints, paths, threads) -> List[Dict]:
    config = canonical_config(ExperimentMode.TRUNCATE, checkpoints, paths, threads)
    config.thresholds = atom_thresholds(config)
    summary = summarize(run_experiment(config))
    top = summary.iloc[-1]
    return [
        _row('truncate max |ratio-1|', top['max_deviation'], '<= 0.05', top['max_deviation'] <= 0.05),
        _row('truncate median trend', list(summary['median_deviation']), 'nonincreasing',
             trend_nonincreasing(summary)),
        _row('truncate mean ratio', top['mean_ratio'], '1 +- 0.05', abs(top['mean_ratio'] - 1) <= 0.05),
    ]


def _trim_rows(label: str, summary: pd.DataFrame) -> List[Dict]:
    first, top = summary.iloc[0], summary.iloc[-1]
    return [
        _row(f'{label} median ratio', top['median_ratio'], 'in [0.7, 1.3]', 0.7 <= top['median_ratio'] <= 1.3),
        _row(f'{label} deviation shrinks', (first['median_deviation'], top['median_deviation']),
             'last < first', top['median_deviation'] < first['median_deviation']),
    ]


def check_trim(checkpoints, paths, threads) -> List[Dict]:
    stpete = summarize(run_experiment(canonical_config(ExperimentMode.TRIM, checkpoints, paths, threads)))
    pareto = summarize(run_experiment(pareto_config(checkpoints, paths, threads)))
    return _trim_rows('stpete trim', stpete) + _trim_rows('pareto trim', pareto)


def check_exceedance(checkpoints, paths, threads) -> List[Dict]:
    summary = summarize(run_experiment(canonical_config(ExperimentMode.EXCEEDANCE, checkpoints, paths, threads)))
    top = summary.iloc[-1]
    return [
        _row('exceedance within gamma', top['within_gamma_fraction'], '>= 0.95', top['within_gamma_fraction'] >= 0.95),
        _row('exceedance within gamma_prime', top['within_gamma_prime_fraction'], '>= 0.95',
             top['within_gamma_prime_fraction'] >= 0.95),
    ]


def _csv_digest(config: ExperimentConfig) -> str:
    report = run_experiment(config)
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, constants.REPORT_CSV_FILE)
        ReportDataIO.dump_report_csv(report.records, config.mode.name.lower(), path)
        return ReportDataIO.sha256(path)


def check_determinism(checkpoints, threads) -> List[Dict]:
    rows = []
    for mode in ExperimentMode:
        config = canonical_config(mode, checkpoints[:2], 8, 1)
        if mode == ExperimentMode.TRUNCATE:
            config.thresholds = atom_thresholds(config)
        single = _csv_digest(config)
        multi = _csv_digest(replace(config, threads=max(threads, 2)))
        rows.append(_row(f'{mode.name.lower()} determinism across threads', single[:12], multi[:12],
                         single == multi))
    return rows


def main():
    parser = argparse.ArgumentParser(description="Seeded acceptance runs")
    parser.add_argument('--scale', choices=sorted(SCALES), default='reduced')
    parser.add_argument('--threads', type=int, default=os.cpu_count() or 1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING)

    checkpoints, truncate_paths, paths = SCALES[args.scale]
    rows = []
    rows += check_truncate(checkpoints, truncate_paths, args.threads)
    rows += check_trim(checkpoints, paths, args.threads)
    rows += check_exceedance(checkpoints, paths, args.threads)
    rows += check_determinism(checkpoints, args.threads)

    table = pd.DataFrame(rows)
    print(table.to_string(index=False))
    return 0 if table['pass'].all() else 1


if __name__ == "__main__":
    sys.exit(main())
