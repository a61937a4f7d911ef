"""
Command-line front end.

Usage (from src/):
    python3 -m core.cli simulate --config ../doc/configs/stpete_trim.cfg --out ../output/stpete
    python3 -m core.cli spectrum --config ../doc/configs/markov_spectrum.cfg --depth 3
    python3 -m core.cli audit --config ../doc/configs/stpete_trim.cfg
    python3 -m core.cli summarize --out ../output/stpete

Exit codes: 0 success, 1 library or run error (or a failed audit check), 2 config error.
"""
import argparse
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from typing import List, Optional

import pandas as pd

import constants
from core.data_models import ExperimentConfig, RunManifest
from core.errors import ConfigError, TrimShiftError, UnsupportedObservableError
from core.experiments import build_measure, build_observable, run_experiment, summarize, trend_nonincreasing
from core.observable import atom_ratio_diagnostic
from core.parser import ConfigurationManager, ReportDataIO
from core.spectral import assemble_transfer, leading_eigenpair, property_F_audit, spectral_gap

logger = logging.getLogger(__name__)


def resolve_threads(cli_threads: Optional[int], config: ExperimentConfig) -> int:
    """--threads > TRIMSHIFT_THREADS > config threads > 1."""
    if cli_threads is not None:
        threads = cli_threads
    elif os.environ.get(constants.THREADS_ENV_VAR):
        text = os.environ[constants.THREADS_ENV_VAR]
        try:
            threads = int(text)
        except ValueError:
            raise ConfigError([f"{constants.THREADS_ENV_VAR}: not an integer: {text}"], [constants.THREADS_ENV_VAR])
    elif config.threads is not None:
        threads = config.threads
    else:
        threads = 1
    if threads < 1:
        raise ConfigError([f"threads: must be positive, got {threads}"], ['threads'])
    return threads


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


def cmd_simulate(config_path: str, out_dir: str, threads: Optional[int] = None,
                 seed_override: Optional[int] = None) -> int:
    config = ConfigurationManager(config_path).get_experiment_config()
    if seed_override is not None:
        config.master_seed = seed_override
    config.threads = resolve_threads(threads, config)
    started_at = _utc_now()

    report = run_experiment(config)
    summary = summarize(report)
    mode = config.mode.name.lower()

    os.makedirs(out_dir, exist_ok=True)
    csv_file = os.path.join(out_dir, constants.REPORT_CSV_FILE)
    summary_file = os.path.join(out_dir, constants.SUMMARY_JSON_FILE)
    ReportDataIO.dump_report_csv(report.records, mode, csv_file)
    ReportDataIO.dump_summary_json(summary, mode, trend_nonincreasing(summary), summary_file)

    measure = build_observable(config, build_measure(config)).measure
    config_echo = config.to_dict()
    config_echo.pop('threads')          # outputs do not depend on the thread count
    manifest = RunManifest(config=config_echo,
                           version=constants.VERSION,
                           master_seed=config.master_seed,
                           started_at=started_at,
                           finished_at=_utc_now(),
                           stochastic=measure.stochastic.tolist(),
                           stationary=measure.stationary.tolist(),
                           outputs={constants.REPORT_CSV_FILE: ReportDataIO.sha256(csv_file),
                                    constants.SUMMARY_JSON_FILE: ReportDataIO.sha256(summary_file)})
    ReportDataIO.dump_manifest(manifest, os.path.join(out_dir, constants.MANIFEST_JSON_FILE))

    print(summary.to_string(index=False))
    print(f"Wrote {len(report.records)} records to {out_dir}")
    return 0


def cmd_spectrum(config_path: str, depth: Optional[int] = None) -> int:
    config = ConfigurationManager(config_path, require_mode=False).get_experiment_config()
    depth = config.spectrum_depth if depth is None else depth
    transfer = assemble_transfer(build_measure(config), depth)
    pair = leading_eigenpair(transfer)
    print(json.dumps({
        'depth': depth,
        'lambda1': pair.eigenvalue,
        'gap': spectral_gap(transfer),
        'eigvec': pair.eigvec.tolist()
    }, indent=4))
    return 0


def cmd_audit(config_path: str) -> int:
    config = ConfigurationManager(config_path, require_mode=False).get_experiment_config()
    observable = build_observable(config, build_measure(config))
    measure = observable.measure
    if not observable.is_cylinder_measurable:
        raise UnsupportedObservableError(
            f"The {observable.kind.name.lower()} observable has no finite-depth cylinder representation")
    levels = [observable.atom(k) for k in range(config.level_depth_max + 1)]

    audit = property_F_audit(observable, measure, config.eps0, levels)
    gibbs = measure.verify_gibbs(config.gibbs_depth)
    decay = measure.cylinder_decay(max(config.gibbs_depth, 2))
    gap = spectral_gap(assemble_transfer(measure, config.spectrum_depth))
    ratios = atom_ratio_diagnostic(observable, levels[1:])

    checks = pd.DataFrame([
        {'check': 'K1_hat', 'value': audit.K1_hat, 'ceiling': config.k1_ceiling,
         'pass': math.isfinite(audit.K1_hat) and audit.K1_hat <= config.k1_ceiling},
        {'check': 'K2_hat', 'value': audit.K2_hat, 'ceiling': config.k2_ceiling,
         'pass': audit.K2_hat <= config.k2_ceiling},
        {'check': 'K3_hat', 'value': audit.K3_hat, 'ceiling': config.k3_ceiling,
         'pass': math.isfinite(audit.K3_hat) and audit.K3_hat <= config.k3_ceiling},
        {'check': 'gibbs_K_lower', 'value': gibbs.K_lower, 'ceiling': None, 'pass': gibbs.K_lower > 0},
        {'check': 'gibbs_K_upper', 'value': gibbs.K_upper, 'ceiling': None,
         'pass': bool(gibbs.K_upper < float('inf'))},
        {'check': 'decay_gamma', 'value': decay.gamma, 'ceiling': 1.0, 'pass': decay.gamma < 1},
        {'check': f'gap_depth_{config.spectrum_depth}', 'value': gap, 'ceiling': 1.0, 'pass': gap < 1},
        {'check': 'atom_ratio_last', 'value': ratios[-1] if ratios else float('nan'), 'ceiling': None,
         'pass': bool(ratios) and ratios[-1] > 1},
    ])
    print(audit.rows.to_string(index=False))
    print()
    print(checks.to_string(index=False))
    failed = checks[~checks['pass']]
    if len(failed):
        print(f"Audit failed: {', '.join(failed['check'])}")
        return 1
    print("Audit passed")
    return 0


def cmd_summarize(out_dir: str) -> int:
    csv_file = os.path.join(out_dir, constants.REPORT_CSV_FILE) if os.path.isdir(out_dir) else out_dir
    mode, records = ReportDataIO.load_report_csv(csv_file)
    summary = summarize(records)
    print(f"mode={mode}")
    print(summary.to_string(index=False))
    print(f"trend_nonincreasing={trend_nonincreasing(summary)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='trimshift', description="Trimmed Birkhoff sums on subshifts of finite type")
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    subparsers = parser.add_subparsers(dest='command', required=True)

    simulate = subparsers.add_parser('simulate', help="run the configured experiment")
    simulate.add_argument('--config', required=True)
    simulate.add_argument('--out', required=True)
    simulate.add_argument('--threads', type=int)
    simulate.add_argument('--seed-override', type=int)

    spectrum = subparsers.add_parser('spectrum', help="leading eigenpair and spectral gap")
    spectrum.add_argument('--config', required=True)
    spectrum.add_argument('--depth', type=int)

    audit = subparsers.add_parser('audit', help="quasi-Hölder, Gibbs and spectral audits")
    audit.add_argument('--config', required=True)

    summary = subparsers.add_parser('summarize', help="summary table of an existing report")
    summary.add_argument('--out', required=True)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        if args.command == 'simulate':
            return cmd_simulate(args.config, args.out, args.threads, args.seed_override)
        if args.command == 'spectrum':
            return cmd_spectrum(args.config, args.depth)
        if args.command == 'audit':
            return cmd_audit(args.config)
        return cmd_summarize(args.out)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        logger.debug("Config error", exc_info=True)
        return 2
    except TrimShiftError as e:
        print(f"Error: {e}", file=sys.stderr)
        logger.debug("Run failed", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
