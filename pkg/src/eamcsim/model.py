"""Per-application power and runtime prediction under DVFS.

Power and CPI at a target frequency are linear in the application's
reference metrics, with one coefficient set (A..F) per target frequency:

    P(f)   = A * P(f_ref)   + B * TPI(f_ref) + C
    CPI(f) = D * CPI(f_ref) + E * TPI(f_ref) + F
    T(f)   = T(f_ref) * CPI(f) / CPI(f_ref) * f_ref / f

Runtime on an architecture with no measured data is derived from the
reference architecture's metrics scaled by ``time_coefficient``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np


class ModelError(ValueError):
    """Base class for prediction model errors."""


class UnknownFrequencyError(ModelError):
    pass


class ModelDomainError(ModelError):
    """A prediction left its physical domain (non-positive power, CPI, ...)."""


class UnknownAppError(ModelError, KeyError):
    def __str__(self):  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class SingularFitError(ModelError):
    pass


def _freq_key(f: float) -> float:
    # frequencies are compared on a 1 kHz grid to absorb parsing noise
    return round(float(f), 6)


@dataclass(frozen=True)
class FrequencyRange:
    frequencies: tuple[float, ...]
    f_ref: float

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies)
        if not freqs:
            raise ValueError("frequency list is empty")
        if any(not math.isfinite(f) or f <= 0 for f in freqs):
            raise ValueError(f"frequencies must be positive: {freqs}")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError(f"frequencies must be strictly ascending: {freqs}")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "f_ref", float(self.f_ref))
        if not self.contains(self.f_ref):
            raise ValueError(f"f_ref={self.f_ref} is not one of {freqs}")

    @property
    def f_min(self) -> float:
        return self.frequencies[0]

    @property
    def f_max(self) -> float:
        return self.frequencies[-1]

    def contains(self, f: float) -> bool:
        return any(_freq_key(f) == _freq_key(g) for g in self.frequencies)

    def __iter__(self):
        return iter(self.frequencies)

    def __len__(self):
        return len(self.frequencies)

    @classmethod
    def stepped(cls, f_min: float, f_max: float, step: float = 0.1,
                f_ref: float | None = None) -> "FrequencyRange":
        """Evenly spaced range from f_min to f_max inclusive; f_ref defaults to f_max."""
        n = int(round((f_max - f_min) / step))
        freqs = tuple(round(f_min + i * step, 6) for i in range(n + 1))
        return cls(freqs, f_max if f_ref is None else f_ref)


@dataclass(frozen=True)
class CoefficientSet:
    A: float = 1.0
    B: float = 0.0
    C: float = 0.0
    D: float = 1.0
    E: float = 0.0
    F: float = 0.0

    def __post_init__(self):
        for name in "ABCDEF":
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"coefficient {name} is not finite: {value}")
            object.__setattr__(self, name, value)

    def is_identity(self, tol: float = 1e-9) -> bool:
        return all(abs(getattr(self, n) - getattr(IDENTITY, n)) <= tol for n in "ABCDEF")


IDENTITY = CoefficientSet()


@dataclass(frozen=True)
class HardwareCoefficients:
    """Coefficient sets keyed by target frequency (GHz)."""

    sets: Mapping[float, CoefficientSet] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "sets", {_freq_key(f): c for f, c in dict(self.sets).items()})

    def get(self, f: float) -> CoefficientSet:
        try:
            return self.sets[_freq_key(f)]
        except KeyError:
            raise UnknownFrequencyError(
                f"no coefficient set for frequency {f} GHz") from None

    def frequencies(self) -> list[float]:
        return sorted(self.sets)


@dataclass(frozen=True)
class HardwareModel:
    model_id: str
    cores_per_node: int
    freq_range: FrequencyRange
    coeffs: HardwareCoefficients = field(default_factory=HardwareCoefficients)
    time_coefficient: float = 1.0

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if int(self.cores_per_node) != self.cores_per_node or self.cores_per_node <= 0:
            raise ValueError(f"{self.model_id}: cores_per_node must be a positive integer")
        if not (math.isfinite(self.time_coefficient) and self.time_coefficient > 0):
            raise ValueError(f"{self.model_id}: time_coefficient must be > 0")
        fr = self.freq_range
        sets = dict(self.coeffs.sets)
        ref = _freq_key(fr.f_ref)
        if ref in sets and not sets[ref].is_identity():
            raise ValueError(f"{self.model_id}: coefficients at f_ref must be the identity set")
        sets[ref] = IDENTITY
        expected = {_freq_key(f) for f in fr}
        if set(sets) != expected:
            missing = sorted(expected - set(sets))
            extra = sorted(set(sets) - expected)
            raise ValueError(
                f"{self.model_id}: coefficient sets do not match frequency range "
                f"(missing {missing}, unexpected {extra})")
        object.__setattr__(self, "coeffs", HardwareCoefficients(sets))

    def coefficients_at(self, f: float) -> CoefficientSet:
        if not self.freq_range.contains(f):
            raise UnknownFrequencyError(
                f"{f} GHz is outside the frequency range of model {self.model_id}")
        return self.coeffs.get(f)


@dataclass(frozen=True)
class SignatureEntry:
    """Reference metrics of one application on one architecture, at f_ref."""

    t_ref: float
    p_ref: float
    tpi_ref: float
    cpi_ref: float

    def __post_init__(self):
        for name in ("t_ref", "p_ref", "tpi_ref", "cpi_ref"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} is not finite")
            object.__setattr__(self, name, value)
        if self.t_ref <= 0 or self.p_ref <= 0 or self.cpi_ref <= 0:
            raise ValueError("t_ref, p_ref and cpi_ref must be > 0")
        if self.tpi_ref < 0:
            raise ValueError("tpi_ref must be >= 0")


@dataclass(frozen=True)
class AppSignature:
    app_id: str
    entries: Mapping[str, SignatureEntry] = field(default_factory=dict)

    def __post_init__(self):
        if not self.app_id:
            raise ValueError("app_id must be non-empty")
        object.__setattr__(self, "entries", dict(self.entries))


@dataclass(frozen=True)
class Prediction:
    frequency: float
    runtime: float
    node_power: float
    energy: float


def predict_power(sig: SignatureEntry, coeffs: CoefficientSet) -> float:
    power = coeffs.A * sig.p_ref + coeffs.B * sig.tpi_ref + coeffs.C
    if not power > 0:
        raise ModelDomainError(f"predicted power {power} W is not positive")
    return power


def predict_cpi(sig: SignatureEntry, coeffs: CoefficientSet) -> float:
    cpi = coeffs.D * sig.cpi_ref + coeffs.E * sig.tpi_ref + coeffs.F
    if not cpi > 0:
        raise ModelDomainError(f"predicted CPI {cpi} is not positive")
    return cpi


def predict_time(sig: SignatureEntry, coeffs: CoefficientSet, f: float,
                 f_ref: float, time_coefficient: float = 1.0) -> float:
    if not f > 0:
        raise UnknownFrequencyError(f"frequency must be positive, got {f}")
    cpi = predict_cpi(sig, coeffs)
    return time_coefficient * sig.t_ref * (cpi / sig.cpi_ref) * (f_ref / f)


def resolve_entry(sig: AppSignature, model: HardwareModel,
                  reference: HardwareModel | None = None
                  ) -> tuple[SignatureEntry, float, bool]:
    """Return ``(entry, runtime_multiplier, is_fallback)`` for an app on a model.

    Without a direct entry the reference model's metrics are used and runtime
    is scaled by the target model's time_coefficient. Power is not scaled.
    """
    entry = sig.entries.get(model.model_id)
    if entry is not None:
        return entry, 1.0, False
    if reference is not None and reference.model_id in sig.entries:
        return sig.entries[reference.model_id], model.time_coefficient, True
    raise UnknownAppError(
        f"app {sig.app_id!r} has no signature for model {model.model_id!r} "
        f"and no reference-model data to fall back on")


def predict(sig: AppSignature, model: HardwareModel, f: float, nodes: int = 1,
            reference: HardwareModel | None = None) -> Prediction:
    entry, multiplier, _ = resolve_entry(sig, model, reference)
    coeffs = model.coefficients_at(f)
    runtime = predict_time(entry, coeffs, f, model.freq_range.f_ref, multiplier)
    power = predict_power(entry, coeffs)
    return Prediction(float(f), runtime, power, power * runtime * nodes)


def predict_sweep(sig: AppSignature, model: HardwareModel, nodes: int = 1,
                  reference: HardwareModel | None = None) -> list[Prediction]:
    """Predictions at every frequency of the model, ascending."""
    return [predict(sig, model, f, nodes, reference) for f in model.freq_range]


class FitSample(NamedTuple):
    f_target: float
    p_ref: float
    tpi_ref: float
    cpi_ref: float
    power: float
    cpi: float


def _lstsq(X: np.ndarray, y: np.ndarray, what: str) -> np.ndarray:
    if X.shape[0] < X.shape[1] or np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularFitError(
            f"{what}: design matrix is rank deficient "
            f"({X.shape[0]} samples, rank {np.linalg.matrix_rank(X)})")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def fit_coefficients(samples: Iterable[FitSample | tuple]) -> HardwareCoefficients:
    """Least-squares fit of one coefficient set per target frequency.

    (A, B, C) regress measured power on (p_ref, tpi_ref, 1); (D, E, F)
    regress measured CPI on (cpi_ref, tpi_ref, 1).
    """
    groups: dict[float, list[FitSample]] = defaultdict(list)
    for s in samples:
        s = FitSample(*s)
        groups[_freq_key(s.f_target)].append(s)
    if not groups:
        raise SingularFitError("no samples")

    sets = {}
    for f, rows in sorted(groups.items()):
        arr = np.array([r[1:] for r in rows], dtype=float)
        p_ref, tpi, cpi_ref, power, cpi = arr.T
        ones = np.ones(len(rows))
        a, b, c = _lstsq(np.column_stack([p_ref, tpi, ones]), power, f"power fit at {f} GHz")
        d, e, f_ = _lstsq(np.column_stack([cpi_ref, tpi, ones]), cpi, f"CPI fit at {f} GHz")
        sets[f] = CoefficientSet(a, b, c, d, e, f_)
    return HardwareCoefficients(sets)


def estimate_time_coefficient(t_main: float, t_other: float) -> float:
    if not (t_main > 0 and t_other > 0):
        raise ModelDomainError(
            f"runtimes must be positive (t_main={t_main}, t_other={t_other})")
    return t_other / t_main
