"""Application database: app signatures and hardware models in a text file.

File layout::

    # comments start with '#'
    [meta]
    reference_model_id=p1

    [models]
    model_id,cores_per_node,f_ref,frequencies
    p1,48,2.7,1.2;1.3;...;2.7

    [coefficients]
    model_id,frequency,A,B,C,D,E,F,time_coefficient
    p1,1.2,0.62,...,1.0

    [apps]
    app_id,model_id,t_ref,p_ref,tpi_ref,cpi_ref
    ep.D,p1,64.2,349.0,2.2e-06,0.6

Frequencies are GHz, runtimes seconds, powers Watts. ``time_coefficient``
is a per-model value repeated on each coefficient row; a model without
coefficient rows has ``time_coefficient = 1``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple

from .model import (AppSignature, CoefficientSet, FrequencyRange, HardwareCoefficients,
                    HardwareModel, Prediction, SignatureEntry, UnknownAppError, predict)

MODEL_HEADER = ["model_id", "cores_per_node", "f_ref", "frequencies"]
COEFF_HEADER = ["model_id", "frequency", "A", "B", "C", "D", "E", "F", "time_coefficient"]
APP_HEADER = ["app_id", "model_id", "t_ref", "p_ref", "tpi_ref", "cpi_ref"]

_HEADERS = {"models": MODEL_HEADER, "coefficients": COEFF_HEADER, "apps": APP_HEADER}

DIRECT = "direct"
FALLBACK = "fallback"


class AppDBError(ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class Lookup(NamedTuple):
    entry: SignatureEntry
    provenance: str  # DIRECT or FALLBACK


@dataclass(frozen=True)
class AppDatabase:
    apps: dict[str, AppSignature]
    models: dict[str, HardwareModel]
    reference_model_id: str

    # identity hash so prediction caches can key on a loaded database
    __hash__ = object.__hash__

    def __post_init__(self):
        if self.reference_model_id not in self.models:
            raise AppDBError(f"reference model {self.reference_model_id!r} is not defined")
        ref = self.models[self.reference_model_id]
        if ref.time_coefficient != 1.0:
            raise AppDBError(
                f"reference model {ref.model_id!r} must have time_coefficient 1, "
                f"got {ref.time_coefficient}")
        for mid, model in self.models.items():
            if mid != model.model_id:
                raise AppDBError(f"model key {mid!r} does not match {model.model_id!r}")
        for aid, sig in self.apps.items():
            if aid != sig.app_id:
                raise AppDBError(f"app key {aid!r} does not match {sig.app_id!r}")
            for mid in sig.entries:
                if mid not in self.models:
                    raise AppDBError(f"app {aid!r} references unknown model {mid!r}")

    @property
    def reference_model(self) -> HardwareModel:
        return self.models[self.reference_model_id]

    def lookup(self, app_id: str, model_id: str) -> Lookup:
        sig = self.signature(app_id)
        if model_id not in self.models:
            raise KeyError(f"unknown model {model_id!r}")
        if model_id in sig.entries:
            return Lookup(sig.entries[model_id], DIRECT)
        if self.reference_model_id in sig.entries:
            return Lookup(sig.entries[self.reference_model_id], FALLBACK)
        raise UnknownAppError(
            f"app {app_id!r} has no data for {model_id!r} nor for the reference model")

    def signature(self, app_id: str) -> AppSignature:
        try:
            return self.apps[app_id]
        except KeyError:
            raise UnknownAppError(f"unknown app {app_id!r}") from None

    def predict(self, app_id: str, model_id: str, f: float, nodes: int = 1) -> Prediction:
        return predict(self.signature(app_id), self.models[model_id], f, nodes,
                       reference=self.reference_model)

    def reference_runtime(self, app_id: str) -> float:
        """Runtime on the reference model at its reference frequency."""
        ref = self.reference_model
        return self.predict(app_id, ref.model_id, ref.freq_range.f_ref).runtime


def lookup(db: AppDatabase, app_id: str, model_id: str) -> Lookup:
    return db.lookup(app_id, model_id)


def _num(text: str, what: str, path, lineno) -> float:
    try:
        value = float(text)
    except ValueError:
        raise AppDBError(f"{what}: cannot parse {text!r} as a number", path, lineno) from None
    if not math.isfinite(value):
        raise AppDBError(f"{what}: value {text!r} is not finite", path, lineno)
    return value


def _int(text: str, what: str, path, lineno) -> int:
    try:
        return int(text)
    except ValueError:
        raise AppDBError(f"{what}: cannot parse {text!r} as an integer", path, lineno) from None


def parse(text: str, path=None) -> AppDatabase:
    section = None
    header_seen = False
    meta = {}
    model_rows, coeff_rows, app_rows = [], [], []
    rows_for = {"models": model_rows, "coefficients": coeff_rows, "apps": app_rows}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("meta", *_HEADERS):
                raise AppDBError(f"unknown section [{section}]", path, lineno)
            header_seen = False
            continue
        if section is None:
            raise AppDBError("content before the first section header", path, lineno)
        if section == "meta":
            key, sep, value = line.partition("=")
            if not sep:
                raise AppDBError(f"expected key=value, got {line!r}", path, lineno)
            meta[key.strip()] = value.strip()
            continue
        cells = [c.strip() for c in line.split(",")]
        if not header_seen:
            if cells != _HEADERS[section]:
                raise AppDBError(
                    f"[{section}] header must be {','.join(_HEADERS[section])!r}, "
                    f"got {line!r}", path, lineno)
            header_seen = True
            continue
        if len(cells) != len(_HEADERS[section]):
            raise AppDBError(
                f"[{section}] expected {len(_HEADERS[section])} columns, got {len(cells)}",
                path, lineno)
        rows_for[section].append((lineno, cells))

    # models
    ranges: dict[str, tuple[int, int, FrequencyRange]] = {}
    for lineno, (mid, cores, f_ref, freqs) in model_rows:
        if mid in ranges:
            raise AppDBError(f"duplicate model_id {mid!r}", path, lineno)
        freq_list = [_num(f, "frequencies", path, lineno) for f in freqs.split(";") if f.strip()]
        try:
            fr = FrequencyRange(tuple(freq_list), _num(f_ref, "f_ref", path, lineno))
        except ValueError as exc:
            raise AppDBError(f"model {mid!r}: {exc}", path, lineno) from None
        ranges[mid] = (lineno, _int(cores, "cores_per_node", path, lineno), fr)

    coeff_sets: dict[str, dict[float, CoefficientSet]] = defaultdict(dict)
    time_coeff: dict[str, tuple[int, float]] = {}
    for lineno, cells in coeff_rows:
        mid = cells[0]
        if mid not in ranges:
            raise AppDBError(f"unknown model_id {mid!r}", path, lineno)
        f = _num(cells[1], "frequency", path, lineno)
        vals = [_num(v, name, path, lineno) for v, name in zip(cells[2:8], "ABCDEF")]
        tc = _num(cells[8], "time_coefficient", path, lineno)
        key = round(f, 6)
        if key in coeff_sets[mid]:
            raise AppDBError(f"duplicate coefficient row for {mid!r} at {f} GHz", path, lineno)
        coeff_sets[mid][key] = CoefficientSet(*vals)
        if mid in time_coeff and time_coeff[mid][1] != tc:
            raise AppDBError(
                f"model {mid!r}: time_coefficient {tc} disagrees with {time_coeff[mid][1]} "
                f"on line {time_coeff[mid][0]}", path, lineno)
        time_coeff.setdefault(mid, (lineno, tc))

    models = {}
    for mid, (lineno, cores, fr) in ranges.items():
        try:
            models[mid] = HardwareModel(mid, cores, fr, HardwareCoefficients(coeff_sets[mid]),
                                        time_coeff.get(mid, (None, 1.0))[1])
        except ValueError as exc:
            raise AppDBError(str(exc), path, lineno) from None

    entries: dict[str, dict[str, SignatureEntry]] = {}
    for lineno, (aid, mid, *vals) in app_rows:
        if mid not in models:
            raise AppDBError(f"app {aid!r} references unknown model_id {mid!r}", path, lineno)
        per_app = entries.setdefault(aid, {})
        if mid in per_app:
            raise AppDBError(f"duplicate row for app {aid!r} on model {mid!r}", path, lineno)
        nums = [_num(v, n, path, lineno) for v, n in zip(vals, APP_HEADER[2:])]
        try:
            per_app[mid] = SignatureEntry(*nums)
        except ValueError as exc:
            raise AppDBError(f"app {aid!r} on {mid!r}: {exc}", path, lineno) from None

    if not models:
        raise AppDBError("no models defined", path)
    ref_id = meta.get("reference_model_id", next(iter(models)))
    if ref_id not in models:
        raise AppDBError(f"reference_model_id {ref_id!r} is not a defined model", path)
    if models[ref_id].time_coefficient != 1.0:
        line = time_coeff[ref_id][0]
        raise AppDBError(f"reference model {ref_id!r} must have time_coefficient 1", path, line)

    apps = {aid: AppSignature(aid, e) for aid, e in entries.items()}
    return AppDatabase(apps, models, ref_id)


def load(path) -> AppDatabase:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), path)


def dumps(db: AppDatabase) -> str:
    out = ["[meta]", f"reference_model_id={db.reference_model_id}", "", "[models]",
           ",".join(MODEL_HEADER)]
    for mid in sorted(db.models):
        m = db.models[mid]
        freqs = ";".join(repr(f) for f in m.freq_range.frequencies)
        out.append(f"{mid},{m.cores_per_node},{m.freq_range.f_ref!r},{freqs}")
    out += ["", "[coefficients]", ",".join(COEFF_HEADER)]
    for mid in sorted(db.models):
        m = db.models[mid]
        for f in m.coeffs.frequencies():
            c = m.coeffs.get(f)
            vals = ",".join(repr(getattr(c, n)) for n in "ABCDEF")
            out.append(f"{mid},{f!r},{vals},{m.time_coefficient!r}")
    out += ["", "[apps]", ",".join(APP_HEADER)]
    for aid in sorted(db.apps):
        sig = db.apps[aid]
        for mid in sorted(sig.entries):
            e = sig.entries[mid]
            out.append(f"{aid},{mid},{e.t_ref!r},{e.p_ref!r},{e.tpi_ref!r},{e.cpi_ref!r}")
    return "\n".join(out) + "\n"


def save(db: AppDatabase, path) -> None:
    Path(path).write_text(dumps(db), encoding="utf-8")


def bundled_path(name: str = "table1.appdb"):
    return resources.files("eamcsim") / "data" / name


def load_bundled(name: str = "table1.appdb") -> AppDatabase:
    return parse(bundled_path(name).read_text(encoding="utf-8"), name)
