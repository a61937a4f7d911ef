from enum import Enum, auto


class ObservableKind(Enum):
    RETURN_TIME = auto()          # η^(first non-special index - 1)
    PARETO = auto()               # (1 - u(x))^(-1/α) on the full 2-shift

    @classmethod
    def from_string(cls, string_value):
        string_value_upper = string_value.upper()
        try:
            return cls[string_value_upper]
        except KeyError:
            raise ValueError(f"Invalid observable kind: {string_value}")


class ScheduleKind(Enum):
    POWER = auto()                # b_n = ceil(n^β)
    STPETE = auto()               # geometric main term plus fluctuation margin
    EXPLICIT = auto()             # b_n listed per checkpoint

    @classmethod
    def from_string(cls, string_value):
        string_value_upper = string_value.upper()
        try:
            return cls[string_value_upper]
        except KeyError:
            raise ValueError(f"Invalid schedule kind: {string_value}")


class PsiKind(Enum):
    POWER = auto()                # ψ(j) = j^(1+δ)
    EXP_POLY = auto()             # ψ(j) = exp(c·j^p)

    @classmethod
    def from_string(cls, string_value):
        string_value_upper = string_value.upper()
        try:
            return cls[string_value_upper]
        except KeyError:
            raise ValueError(f"Invalid psi kind: {string_value}")


class ExperimentMode(Enum):
    TRIM = auto()
    TRUNCATE = auto()
    EXCEEDANCE = auto()

    @classmethod
    def from_string(cls, string_value):
        string_value_upper = string_value.upper()
        try:
            return cls[string_value_upper]
        except KeyError:
            raise ValueError(f"Invalid experiment mode: {string_value}")


class NormingKind(Enum):
    FORMULA = auto()              # closed-form asymptotic d_n
    UNSCALED = auto()               # St. Petersburg d_n written with R alone
    EXACT = auto()                # n·E[χ; χ ≤ f_n] - r_n·f_n

    @classmethod
    def from_string(cls, string_value):
        string_value_upper = string_value.upper()
        try:
            return cls[string_value_upper]
        except KeyError:
            raise ValueError(f"Invalid norming kind: {string_value}")


class StPeteConstant(Enum):
    DERIVED = auto()              # R = π₁(1-q)/q, read off the cylinder measures
    STATED = auto()               # R = π₁/q

    @classmethod
    def from_string(cls, string_value):
        string_value_upper = string_value.upper()
        try:
            return cls[string_value_upper]
        except KeyError:
            raise ValueError(f"Invalid St. Petersburg constant: {string_value}")


class SlowlyVaryingKind(Enum):
    ONE = auto()
    CONSTANT = auto()
    LOG = auto()

    @classmethod
    def from_string(cls, string_value):
        string_value_upper = string_value.upper()
        try:
            return cls[string_value_upper]
        except KeyError:
            raise ValueError(f"Invalid slowly varying kind: {string_value}")
