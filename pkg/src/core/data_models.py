import math
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

import constants
from core.enums import (ExperimentMode, NormingKind, ObservableKind, PsiKind, ScheduleKind,
                        SlowlyVaryingKind, StPeteConstant)


@dataclass
class ExperimentConfig:
    """Everything a run needs: system, measure, observable, schedule, ensemble and audit knobs."""
    mode: Optional[ExperimentMode] = None
    observable: ObservableKind = ObservableKind.RETURN_TIME
    alphabet_size: int = 2
    transition: Optional[List[List[int]]] = None        # all ones when omitted
    stochastic: Optional[List[List[float]]] = None      # uniform over allowed transitions when omitted
    theta: float = constants.DEFAULT_THETA
    eta: Optional[float] = None
    special_symbol: int = 0
    depth_cap: int = constants.DEFAULT_DEPTH_CAP
    alpha: Optional[float] = None
    digit_cap: int = constants.DEFAULT_DIGIT_CAP
    schedule: ScheduleKind = ScheduleKind.POWER
    beta: float = 0.6
    schedule_values: Dict[int, int] = field(default_factory=dict)
    thresholds: Dict[int, float] = field(default_factory=dict)
    psi: PsiKind = PsiKind.POWER
    psi_delta: float = 1.0
    psi_c: float = 1.0
    psi_degree: float = 1.0
    eps: float = constants.DEFAULT_EPS
    V: float = 0.0
    V_hat: float = constants.DEFAULT_V_HAT
    checkpoints: List[int] = field(default_factory=lambda: list(constants.DEFAULT_CHECKPOINTS))
    ensemble_size: int = 100
    master_seed: int = 0
    threads: Optional[int] = None
    norming: NormingKind = NormingKind.FORMULA
    stpete_constant: StPeteConstant = StPeteConstant.DERIVED
    slowly_varying: SlowlyVaryingKind = SlowlyVaryingKind.ONE
    slowly_varying_c: float = 1.0
    b_max: int = constants.B_MAX
    block_size: int = constants.DEFAULT_BLOCK_SIZE
    eps0: float = constants.DEFAULT_EPS0
    level_depth_max: int = 10
    gibbs_depth: int = 8
    spectrum_depth: int = 1
    k1_ceiling: float = math.inf                        # finite check only
    k2_ceiling: float = constants.DEFAULT_K2_CEILING
    k3_ceiling: float = math.inf
    progress: bool = True

    def validate(self, require_mode: bool = True) -> List[Tuple[str, str]]:
        """Cross-field checks; returns (key, problem) pairs instead of raising."""
        problems = []
        if require_mode and self.mode is None:
            problems.append(('mode', "mode is required"))
        if not 1 <= self.alphabet_size <= constants.MAX_ALPHABET_SIZE:
            problems.append(('alphabet_size', f"alphabet_size must lie in 1..{constants.MAX_ALPHABET_SIZE}"))
        if not self.checkpoints:
            problems.append(('checkpoints', "checkpoints must not be empty"))
        elif any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            problems.append(('checkpoints', "checkpoints must be strictly increasing"))
        elif self.checkpoints[0] < 1 or self.checkpoints[-1] > constants.MAX_CHECKPOINT:
            problems.append(('checkpoints', f"checkpoints must lie in 1..{constants.MAX_CHECKPOINT}"))
        if not 1 <= self.ensemble_size <= constants.MAX_ENSEMBLE_SIZE:
            problems.append(('ensemble_size', f"ensemble_size must lie in 1..{constants.MAX_ENSEMBLE_SIZE}"))
        if not 0 <= self.master_seed < 2 ** 64:
            problems.append(('master_seed', "master_seed must be a 64-bit unsigned integer"))
        if self.threads is not None and self.threads < 1:
            problems.append(('threads', "threads must be positive"))
        if not 0 < self.eps < 0.25:
            problems.append(('eps', "eps must lie in (0, 1/4)"))
        if self.V < 0:
            problems.append(('V', "V must be nonnegative"))
        if self.V_hat < 0:
            problems.append(('V_hat', "V_hat must be nonnegative"))
        if self.observable == ObservableKind.RETURN_TIME and self.eta is None:
            problems.append(('eta', "eta is required for the return_time observable"))
        if self.observable == ObservableKind.PARETO and self.alpha is None:
            problems.append(('alpha', "alpha is required for the pareto observable"))
        if self.schedule == ScheduleKind.EXPLICIT and self.mode == ExperimentMode.TRIM:
            missing = [n for n in self.checkpoints if n not in self.schedule_values]
            if missing:
                problems.append(('schedule_values', f"explicit schedule misses checkpoints {missing}"))
        if self.thresholds and self.mode == ExperimentMode.TRIM:
            problems.append(('thresholds', "thresholds apply to truncate and exceedance modes only"))
        if self.b_max < 0:
            problems.append(('b_max', "b_max must be nonnegative"))
        if self.block_size < 1:
            problems.append(('block_size', "block_size must be positive"))
        if not 0 < self.eps0 < 1:
            problems.append(('eps0', "eps0 must lie in (0, 1)"))
        if self.level_depth_max < 0:
            problems.append(('level_depth_max', "level_depth_max must be nonnegative"))
        return problems

    def to_dict(self) -> Dict[str, Any]:
        data = {}
        for f in fields(self):
            value = getattr(self, f.name)
            data[f.name] = value.name.lower() if isinstance(value, Enum) else value
        return data


@dataclass
class ExperimentReport:
    """Per-(path, checkpoint) records of one run, ordered by path then n."""
    config: ExperimentConfig
    records: pd.DataFrame

    @property
    def mode(self) -> ExperimentMode:
        return self.config.mode

    def path_count(self) -> int:
        return int(self.records['path'].nunique()) if len(self.records) else 0


@dataclass
class RunManifest:
    """Provenance of one simulate run; the only output carrying timestamps."""
    config: Dict[str, Any]
    version: str
    master_seed: int
    started_at: str
    finished_at: str
    stochastic: List[List[float]]
    stationary: List[float]
    csv_schema_version: int = constants.CSV_SCHEMA_VERSION
    outputs: Dict[str, str] = field(default_factory=dict)       # file name -> sha256

    def to_dict(self):
        return {
            'version': self.version,
            'master_seed': self.master_seed,
            'started_at': self.started_at,
            'finished_at': self.finished_at,
            'csv_schema_version': self.csv_schema_version,
            'stochastic': self.stochastic,
            'stationary': self.stationary,
            'config': self.config,
            'outputs': self.outputs
        }
