"""
Config parsing and report IO.

It includes:
- `ConfigurationManager`: loads a flat `key = value` file into an `ExperimentConfig`,
  collecting every problem into one `ConfigError`.
- `ReportDataIO`: writes and reads report CSVs, summary JSON and run manifests. Every write goes
  through a temp file in the target directory and `os.replace`.
"""
import hashlib
import json
import os
import tempfile
from dataclasses import replace
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import pandas as pd

import constants
from core.data_models import ExperimentConfig, RunManifest
from core.enums import (ExperimentMode, NormingKind, ObservableKind, PsiKind, ScheduleKind,
                        SlowlyVaryingKind, StPeteConstant)
from core.errors import ConfigError, DomainError


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"Invalid boolean: {text}")


def _parse_int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        pass
    value = float(text)     # accepts 1e6
    if not value.is_integer():
        raise ValueError(f"Invalid integer: {text.strip()}")
    return int(value)


def _parse_list(item: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    def parse(text: str) -> List[Any]:
        return [item(part) for part in text.split(',') if part.strip()]
    return parse


def _parse_map(value: Callable[[str], Any]) -> Callable[[str], Dict[int, Any]]:
    def parse(text: str) -> Dict[int, Any]:
        result = {}
        for part in text.split(','):
            if not part.strip():
                continue
            key, sep, item = part.partition(':')
            if not sep:
                raise ValueError(f"Expected n:value pairs, got {part.strip()}")
            result[_parse_int(key)] = value(item)
        return result
    return parse


def _parse_enum(cls) -> Callable[[str], Any]:
    return lambda text: cls.from_string(text.strip())


# key -> parser; defaults live on ExperimentConfig
CONFIG_SCHEMA: Dict[str, Callable[[str], Any]] = {
    'mode': _parse_enum(ExperimentMode),
    'observable': _parse_enum(ObservableKind),
    'alphabet_size': _parse_int,
    'transition': _parse_list(_parse_int),
    'stochastic': _parse_list(float),
    'theta': float,
    'eta': float,
    'special_symbol': _parse_int,
    'depth_cap': _parse_int,
    'alpha': float,
    'digit_cap': _parse_int,
    'schedule': _parse_enum(ScheduleKind),
    'beta': float,
    'schedule_values': _parse_map(_parse_int),
    'thresholds': _parse_map(float),
    'psi': _parse_enum(PsiKind),
    'psi_delta': float,
    'psi_c': float,
    'psi_degree': float,
    'eps': float,
    'V': float,
    'V_hat': float,
    'checkpoints': _parse_list(_parse_int),
    'ensemble_size': _parse_int,
    'master_seed': _parse_int,
    'threads': _parse_int,
    'norming': _parse_enum(NormingKind),
    'stpete_constant': _parse_enum(StPeteConstant),
    'slowly_varying': _parse_enum(SlowlyVaryingKind),
    'slowly_varying_c': float,
    'b_max': _parse_int,
    'block_size': _parse_int,
    'eps0': float,
    'level_depth_max': _parse_int,
    'gibbs_depth': _parse_int,
    'spectrum_depth': _parse_int,
    'k1_ceiling': float,
    'k2_ceiling': float,
    'k3_ceiling': float,
    'progress': _parse_bool,
}

MATRIX_KEYS = ('transition', 'stochastic')


class ConfigurationManager:
    """Loads and validates an experiment config file."""

    def __init__(self, config_path: str, require_mode: bool = True):
        self._config_path = config_path
        self._raw_config = self._load_raw_config()
        self._experiment_config = self._load_experiment_config(require_mode)

    def _load_raw_config(self) -> Dict[str, Tuple[int, str]]:
        """key -> (line number, raw value)."""
        try:
            with open(self._config_path, 'r', encoding='utf-8') as f:
                lines = f.readlines()
        except FileNotFoundError:
            raise ConfigError([f"config file not found: {self._config_path}"], ['<file>'])
        except OSError as e:
            raise ConfigError([f"cannot read config file {self._config_path}: {e}"], ['<file>'])

        raw, problems, keys = {}, [], []
        for number, line in enumerate(lines, start=1):
            text = line.split('#', 1)[0].strip()
            if not text:
                continue
            key, sep, value = text.partition('=')
            key = key.strip()
            if not sep or not key:
                problems.append(f"line {number}: expected 'key = value', got {text!r}")
                keys.append(f"<line {number}>")
                continue
            if key in raw:
                problems.append(f"{key}: duplicate key on line {number}")
                keys.append(key)
                continue
            raw[key] = (number, value.strip())
        if problems:
            raise ConfigError(problems, keys)
        return raw

    def _load_experiment_config(self, require_mode: bool) -> ExperimentConfig:
        values, problems, keys = {}, [], []
        for key, (number, text) in self._raw_config.items():
            parser = CONFIG_SCHEMA.get(key)
            if parser is None:
                problems.append(f"{key}: unknown key (line {number})")
                keys.append(key)
                continue
            try:
                values[key] = parser(text)
            except (ValueError, TypeError) as e:
                problems.append(f"{key}: {e} (line {number})")
                keys.append(key)

        alphabet_size = values.get('alphabet_size', ExperimentConfig.alphabet_size)
        for key in MATRIX_KEYS:
            if key not in values:
                continue
            flat = values[key]
            if isinstance(alphabet_size, int) and len(flat) != alphabet_size * alphabet_size:
                problems.append(f"{key}: expected {alphabet_size * alphabet_size} entries, got {len(flat)}")
                keys.append(key)
                del values[key]
                continue
            values[key] = np.asarray(flat).reshape(alphabet_size, alphabet_size).tolist()

        config = ExperimentConfig(**values)
        for key, message in config.validate(require_mode=require_mode):
            if key not in keys:
                problems.append(f"{key}: {message}")
                keys.append(key)
        if problems:
            raise ConfigError(problems, keys)
        return config

    def get_experiment_config(self) -> ExperimentConfig:
        """Get a copy of the parsed config."""
        return replace(self._experiment_config)

    def get_raw_config(self) -> Dict[str, str]:
        return {key: value for key, (_, value) in self._raw_config.items()}


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class ReportDataIO:
    """
    Handles reading and writing run outputs.
    CSVs carry a `# trimshift-csv v<N> mode=<mode>` header line and 17 significant digits.
    """
    @staticmethod
    def csv_header(mode: str) -> str:
        return f"# trimshift-csv v{constants.CSV_SCHEMA_VERSION} mode={mode}\n"

    @staticmethod
    def dump_report_csv(records: pd.DataFrame, mode: str, csv_file: str):
        body = records.to_csv(index=False, float_format='%.17g', na_rep='nan', lineterminator='\n')
        _atomic_write(csv_file, ReportDataIO.csv_header(mode) + body)

    @staticmethod
    def load_report_csv(csv_file: str) -> Tuple[str, pd.DataFrame]:
        """Returns (mode, records)."""
        try:
            with open(csv_file, 'r', encoding='utf-8') as f:
                header = f.readline().strip()
        except FileNotFoundError:
            raise DomainError(f"Report file not found: {csv_file}")
        prefix = f"# trimshift-csv v{constants.CSV_SCHEMA_VERSION} mode="
        if not header.startswith(prefix):
            raise DomainError(f"Unrecognized report header in {csv_file}: {header!r}")
        mode = header[len(prefix):]
        if mode not in constants.CSV_COLUMNS:
            raise DomainError(f"Unknown report mode {mode!r} in {csv_file}")
        records = pd.read_csv(csv_file, skiprows=1)
        missing = [c for c in constants.CSV_COLUMNS[mode] if c not in records.columns]
        if missing:
            raise DomainError(f"Report {csv_file} misses columns {missing}")
        return mode, records

    @staticmethod
    def dump_json(data: Dict[str, Any], json_file: str):
        _atomic_write(json_file, json.dumps(data, ensure_ascii=False, indent=4, default=_json_default) + '\n')

    @staticmethod
    def dump_summary_json(summary: pd.DataFrame, mode: str, trend_ok: bool, json_file: str):
        ReportDataIO.dump_json({
            'csv_schema_version': constants.CSV_SCHEMA_VERSION,
            'mode': mode,
            'trend_nonincreasing': trend_ok,
            'checkpoints': json.loads(summary.to_json(orient='records', double_precision=15))
        }, json_file)

    @staticmethod
    def dump_manifest(manifest: RunManifest, json_file: str):
        ReportDataIO.dump_json(manifest.to_dict(), json_file)

    @staticmethod
    def load_json(json_file: str) -> Dict[str, Any]:
        try:
            with open(json_file, 'r', encoding='utf-8') as f:
                return json.load(f)
        except FileNotFoundError:
            raise DomainError(f"JSON file not found: {json_file}")
        except json.JSONDecodeError as e:
            raise DomainError(f"Could not decode JSON from {json_file}: {e}")

    @staticmethod
    def sha256(path: str) -> str:
        digest = hashlib.sha256()
        with open(path, 'rb') as f:
            for chunk in iter(lambda: f.read(1 << 20), b''):
                digest.update(chunk)
        return digest.hexdigest()
