"""Trace, manifest and observation-table readers, plus record serialization.

Supported trace formats (UTF-8 text):

* ``csv-reim``   header ``frequency_hz,re_s21,im_s21``
* ``csv-dbdeg``  header ``frequency_hz,mag_db,phase_deg``
* ``touchstone`` two-port ``.s2p``; S21 is taken from the option-line format

CSV files may carry ``# key = value`` comment lines before the header for
``p_vna_dbm``, ``p_att_db`` and ``temperature_k``.
"""

import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from .errors import (MalformedHeaderError, NonFiniteSampleError, NonMonotonicGridError,
                     SchemaError, TraceFormatError)
from .loss import LossObservation
from .photon import PowerContext, input_power
from .s21 import ComplexTrace, TraceMetadata

FORMATS = ("auto", "csv-reim", "csv-dbdeg", "touchstone")
CSV_HEADERS = {
    "csv-reim": ("frequency_hz", "re_s21", "im_s21"),
    "csv-dbdeg": ("frequency_hz", "mag_db", "phase_deg"),
}
METADATA_KEYS = ("p_vna_dbm", "p_att_db", "temperature_k")
TOUCHSTONE_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
OBSERVATION_HEADER = ("n_ph", "temperature_k", "fr_hz", "qi", "qi_sigma")

Source = Union[str, os.PathLike, io.IOBase, bytes]


def _read_text(source: Source):
    """Return (text, display name)."""
    if isinstance(source, bytes):
        return source.decode("utf-8"), "<bytes>"
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        try:
            return path.read_text(encoding="utf-8"), str(path)
        except FileNotFoundError:
            raise FileNotFoundError(f"{path}: no such file") from None
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data, getattr(source, "name", "<stream>")


def _float(token, lineno, path, what):
    try:
        value = float(token)
    except ValueError:
        raise TraceFormatError(f"cannot parse {what} {token!r} as a number", lineno, path) from None
    if not math.isfinite(value):
        raise NonFiniteSampleError(f"non-finite {what} {token!r}", lineno, path)
    return value


def _check_grid(freqs, lines, path):
    for i in range(1, len(freqs)):
        if not freqs[i] > freqs[i - 1]:
            raise NonMonotonicGridError(
                f"frequency {freqs[i]!r} does not increase past {freqs[i - 1]!r}", lines[i], path)


def _sniff(text):
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("!"):
            return "touchstone"
        if line.startswith("#"):
            body = line[1:].split()
            if body and body[0].upper() in TOUCHSTONE_UNITS:
                return "touchstone"
            continue
        cols = tuple(c.strip() for c in line.split(","))
        for name, header in CSV_HEADERS.items():
            if cols == header:
                return name
        return None
    return None


def _parse_csv(text, fmt, path):
    header = CSV_HEADERS[fmt]
    meta = {}
    freqs, a, b, lines = [], [], [], []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if seen_header:
                continue
            key, sep, value = line[1:].partition("=")
            key = key.strip()
            if sep and key in METADATA_KEYS:
                meta[key] = _float(value.strip(), lineno, path, key)
            continue
        cols = [c.strip() for c in line.split(",")]
        if not seen_header:
            if tuple(cols) != header:
                raise MalformedHeaderError(
                    f"expected header {','.join(header)!r}, found {line!r}", lineno, path)
            seen_header = True
            continue
        if len(cols) != 3:
            raise TraceFormatError(f"expected 3 columns, found {len(cols)}", lineno, path)
        freqs.append(_float(cols[0], lineno, path, "frequency"))
        a.append(_float(cols[1], lineno, path, header[1]))
        b.append(_float(cols[2], lineno, path, header[2]))
        lines.append(lineno)
    if not seen_header:
        raise MalformedHeaderError(f"missing header {','.join(header)!r}", None, path)
    if len(freqs) < 1:
        raise TraceFormatError("no data rows", None, path)
    _check_grid(freqs, lines, path)
    a = np.array(a)
    b = np.array(b)
    if fmt == "csv-reim":
        s21 = a + 1j * b
    else:
        s21 = 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))
    if "temperature_k" in meta and not meta["temperature_k"] > 0:
        raise TraceFormatError("temperature_k must be > 0", None, path)
    return ComplexTrace(np.array(freqs), s21, TraceMetadata(**meta))


def _parse_touchstone(text, path):
    unit, fmt = "GHZ", "MA"      # Touchstone defaults
    option_line = None
    tokens = []   # (token, lineno)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if option_line is not None:
                raise MalformedHeaderError("second option line", lineno, path)
            option_line = lineno
            opts = line[1:].upper().split()
            i = 0
            while i < len(opts):
                tok = opts[i]
                if tok in TOUCHSTONE_UNITS:
                    unit = tok
                elif tok in ("RI", "DB", "MA"):
                    fmt = tok
                elif tok == "S":
                    pass
                elif tok == "R":
                    i += 1
                    if i >= len(opts):
                        raise MalformedHeaderError("option 'R' without a reference impedance", lineno, path)
                    _float(opts[i], lineno, path, "reference impedance")
                else:
                    raise MalformedHeaderError(f"unsupported option {tok!r}", lineno, path)
                i += 1
            continue
        if option_line is None:
            raise MalformedHeaderError("data before the '#' option line", lineno, path)
        tokens.extend((t, lineno) for t in line.split())
    if option_line is None:
        raise MalformedHeaderError("missing '#' option line", None, path)
    if not tokens:
        raise TraceFormatError("no data rows", None, path)
    if len(tokens) % 9:
        raise TraceFormatError(
            f"{len(tokens)} numbers is not a multiple of 9 (two-port record)", tokens[-1][1], path)
    scale = TOUCHSTONE_UNITS[unit]
    freqs, s21, lines = [], [], []
    for k in range(0, len(tokens), 9):
        chunk = tokens[k:k + 9]
        lineno = chunk[0][1]
        vals = [_float(t, ln, path, "value") for t, ln in chunk]
        x, y = vals[3], vals[4]
        if fmt == "RI":
            s = complex(x, y)
        elif fmt == "MA":
            s = x * complex(math.cos(math.radians(y)), math.sin(math.radians(y)))
        else:
            s = 10.0 ** (x / 20.0) * complex(math.cos(math.radians(y)), math.sin(math.radians(y)))
        freqs.append(vals[0] * scale)
        s21.append(s)
        lines.append(lineno)
    _check_grid(freqs, lines, path)
    return ComplexTrace(np.array(freqs), np.array(s21), TraceMetadata())


def parse_trace(source: Source, format: str = "auto") -> ComplexTrace:
    """Read a trace from a path, byte string or text/binary stream."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; choose from {', '.join(FORMATS)}")
    text, name = _read_text(source)
    if text.startswith("﻿"):
        text = text[1:]
    fmt = format
    if fmt == "auto":
        fmt = _sniff(text)
        if fmt is None:
            raise MalformedHeaderError(
                "cannot detect format: expected a CSV header or a Touchstone option line", None, name)
    if fmt == "touchstone":
        return _parse_touchstone(text, name)
    return _parse_csv(text, fmt, name)


def format_trace(trace: ComplexTrace) -> str:
    """Canonical csv-reim text; floats use repr so parsing it back is exact."""
    out = io.StringIO()
    for key, value in trace.metadata.as_record().items():
        out.write(f"# {key} = {float(value)!r}\n")
    out.write(",".join(CSV_HEADERS["csv-reim"]) + "\n")
    for f, s in zip(trace.frequencies.tolist(), trace.s21.tolist()):
        out.write(f"{f!r},{s.real!r},{s.imag!r}\n")
    return out.getvalue()


def write_trace(trace: ComplexTrace, path) -> None:
    Path(path).write_text(format_trace(trace), encoding="utf-8")


@dataclass(frozen=True)
class ManifestEntry:
    trace_path: str
    temperature_k: float
    p_vna_dbm: Optional[float] = None
    p_att_db: Optional[float] = None
    resonator_label: Optional[str] = None
    format: str = "auto"

    @property
    def power(self) -> Optional[PowerContext]:
        if self.p_vna_dbm is None or self.p_att_db is None:
            return None
        return input_power(self.p_vna_dbm, self.p_att_db)

    @property
    def p_in_dbm(self) -> Optional[float]:
        pc = self.power
        return None if pc is None else pc.p_in_dbm

    @property
    def label(self):
        return self.resonator_label if self.resonator_label is not None else Path(self.trace_path).stem


@dataclass(frozen=True)
class SweepManifest:
    entries: List[ManifestEntry]
    base_dir: Optional[str] = None

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.trace_path)
        if p.is_absolute() or self.base_dir is None:
            return p
        return Path(self.base_dir) / p


_ENTRY_FIELDS = {"trace_path": str, "temperature_k": float, "p_vna_dbm": float,
                 "p_att_db": float, "resonator_label": str, "format": str}


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {type(value).__name__}", where)
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError("must be finite", where)
    return value


def manifest_from_records(records, base_dir=None) -> SweepManifest:
    if not isinstance(records, list):
        raise SchemaError("top level must be a list of entries", "$")
    entries, seen = [], {}
    for i, rec in enumerate(records):
        where = f"$[{i}]"
        if not isinstance(rec, dict):
            raise SchemaError("entry must be an object", where)
        unknown = sorted(set(rec) - set(_ENTRY_FIELDS))
        if unknown:
            raise SchemaError(f"unknown key {unknown[0]!r}", f"{where}.{unknown[0]}")
        for key in ("trace_path", "temperature_k"):
            if key not in rec:
                raise SchemaError("required field missing", f"{where}.{key}")
        kwargs = {}
        for key, kind in _ENTRY_FIELDS.items():
            if key not in rec or rec[key] is None:
                continue
            value = rec[key]
            if kind is float:
                value = _number(value, f"{where}.{key}")
            elif not isinstance(value, str) or not value:
                raise SchemaError("expected a non-empty string", f"{where}.{key}")
            kwargs[key] = value
        if not kwargs["temperature_k"] > 0:
            raise SchemaError("must be > 0", f"{where}.temperature_k")
        if kwargs.get("format", "auto") not in FORMATS:
            raise SchemaError(f"unknown format {kwargs['format']!r}", f"{where}.format")
        path = kwargs["trace_path"]
        key = os.path.normpath(path)
        if key in seen:
            raise SchemaError(f"duplicate trace_path {path!r} (also at $[{seen[key]}])",
                              f"{where}.trace_path")
        seen[key] = i
        entries.append(ManifestEntry(**kwargs))
    return SweepManifest(entries, None if base_dir is None else str(base_dir))


def parse_manifest(path) -> SweepManifest:
    """Read a JSON sweep manifest; relative trace paths resolve against its directory."""
    text, name = _read_text(path)
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{name}: invalid JSON ({exc.msg} at line {exc.lineno})", "$") from None
    base = Path(name).parent if isinstance(path, (str, os.PathLike)) else None
    return manifest_from_records(records, base)


def parse_observations(source: Source) -> List[LossObservation]:
    """Read ``n_ph,temperature_k,fr_hz,qi,qi_sigma`` rows; an empty sigma means none."""
    text, name = _read_text(source)
    out = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = [c.strip() for c in line.split(",")]
        if not seen_header:
            if tuple(cols) != OBSERVATION_HEADER:
                raise MalformedHeaderError(
                    f"expected header {','.join(OBSERVATION_HEADER)!r}, found {line!r}", lineno, name)
            seen_header = True
            continue
        if len(cols) != 5:
            raise TraceFormatError(f"expected 5 columns, found {len(cols)}", lineno, name)
        n, t, fr, qi = (_float(c, lineno, name, h) for c, h in zip(cols[:4], OBSERVATION_HEADER))
        sigma = _float(cols[4], lineno, name, "qi_sigma") if cols[4] else None
        try:
            out.append(LossObservation(n, t, fr, qi, sigma))
        except ValueError as exc:
            raise TraceFormatError(str(exc), lineno, name) from None
    if not seen_header:
        raise MalformedHeaderError(f"missing header {','.join(OBSERVATION_HEADER)!r}", None, name)
    return out


def format_observations(observations) -> str:
    out = io.StringIO()
    out.write(",".join(OBSERVATION_HEADER) + "\n")
    for o in observations:
        sigma = "" if o.qi_sigma is None else repr(float(o.qi_sigma))
        out.write(f"{float(o.n_ph)!r},{float(o.temperature)!r},{float(o.fr)!r},{float(o.qi_measured)!r},{sigma}\n")
    return out.getvalue()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps_record(record) -> str:
    """Deterministic JSON: sorted keys, full float precision, NaN/inf as null."""
    return json.dumps(_jsonable(record), sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_record(source: Source):
    text, name = _read_text(source)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{name}: invalid JSON ({exc.msg} at line {exc.lineno})", "$") from None
