"""On-disk formats shared by the command line and test fixtures.

Readers validate eagerly: schema problems raise ConfigInvalid, unreadable or
unwritable files raise IoError.  Writers format floats with 17 significant
digits so every value round-trips through text exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io as _stringio
import json
import sys
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ConfigInvalid, IoError
from .sequences import FormalSeries, WeightSequence


def fmt(x) -> str:
    """17-significant-digit decimal; enough for an exact float round trip."""
    return format(float(x), ".17g")


# -- sequence specs -------------------------------------------------------------

_FAMILY_KEYS = {
    "gevrey": {"alpha"},
    "qgevrey": {"q", "alpha"},
    "powsigma": {"tau", "sigma"},
    "qpp": {"q"},
    "table": {"log_m"},
}


def sequence_from_spec(spec) -> WeightSequence:
    """Build a weight sequence from a spec mapping (see _FAMILY_KEYS)."""
    if not isinstance(spec, dict):
        raise ConfigInvalid("sequence spec must be a JSON object")
    family = spec.get("family")
    if family not in _FAMILY_KEYS:
        raise ConfigInvalid(
            f"unknown sequence family {family!r}; "
            f"expected one of {sorted(_FAMILY_KEYS)}")
    keys = set(spec) - {"family"}
    if keys != _FAMILY_KEYS[family]:
        raise ConfigInvalid(
            f"family {family!r} takes keys {sorted(_FAMILY_KEYS[family])}, "
            f"got {sorted(keys)}")
    try:
        if family == "gevrey":
            return WeightSequence.gevrey(float(spec["alpha"]))
        if family == "qgevrey":
            return WeightSequence.q_gevrey(float(spec["q"]),
                                           float(spec["alpha"]))
        if family == "powsigma":
            return WeightSequence.power_sigma(float(spec["tau"]),
                                              float(spec["sigma"]))
        if family == "qpp":
            return WeightSequence.q_pp(float(spec["q"]))
        log_m = np.asarray(spec["log_m"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad value in sequence spec: {exc}") from exc
    if log_m.ndim != 1 or log_m.size == 0:
        raise ConfigInvalid("table spec needs a non-empty flat log_m list")
    return WeightSequence.from_table(log_m)


def load_sequence_spec(path) -> WeightSequence:
    return sequence_from_spec(read_json(path))


def read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fp:
            return json.load(fp)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path} is not valid JSON: {exc}") from exc


# -- coefficient series ----------------------------------------------------------

_SERIES_HEADERS = (["p", "re", "im"], ["p", "log_abs"])


def load_series_csv(path) -> FormalSeries:
    """Read a coefficient series.

    Header `p,re,im` carries plain complex values; `p,log_abs` carries log
    magnitudes with zero phase for series whose coefficients leave float
    range.  Rows must be contiguous in p starting at 0.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fp:
            rows = [r for r in csv.reader(fp) if r]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ConfigInvalid(f"{path}: empty series file")
    header = [c.strip() for c in rows[0]]
    if header not in _SERIES_HEADERS:
        raise ConfigInvalid(
            f"{path}: series header must be one of "
            f"{[','.join(h) for h in _SERIES_HEADERS]}, got {','.join(header)}")
    body = rows[1:]
    if not body:
        raise ConfigInvalid(f"{path}: series file has a header but no rows")
    try:
        ps = [int(r[0]) for r in body]
        cols = [[float(r[k]) for r in body] for k in range(1, len(header))]
    except (IndexError, ValueError) as exc:
        raise ConfigInvalid(f"{path}: malformed series row: {exc}") from exc
    if ps != list(range(len(ps))):
        raise ConfigInvalid(
            f"{path}: p column must run 0,1,... without gaps")
    if header == ["p", "re", "im"]:
        coeffs = np.array(cols[0], dtype=float) + 1j * np.array(cols[1])
        return FormalSeries(coeffs)
    log_abs = np.array(cols[0], dtype=float)
    return FormalSeries.from_log(log_abs, np.zeros(log_abs.size))


def write_series_csv(path, series: FormalSeries) -> None:
    rows = [(str(p), fmt(c.real), fmt(c.imag))
            for p, c in enumerate(series.coeffs)]
    write_csv(path, ("p", "re", "im"), rows)


# -- function zoo ----------------------------------------------------------------

_FN_KEYS = {"one": set(), "exp_neg": set(), "stieltjes": set(),
            "poly": {"coeffs"}}


def function_from_spec(spec) -> Tuple[str, Callable[[complex], complex]]:
    """A named holomorphic test function: (label, callable over complex z).

    kinds: `one` (constant 1), `exp_neg` (exp(-z)), `stieltjes` (1/(1+z)),
    `poly` (real coefficients, ascending, key `coeffs`).
    """
    if not isinstance(spec, dict):
        raise ConfigInvalid("function spec must be a JSON object")
    kind = spec.get("kind")
    if kind not in _FN_KEYS:
        raise ConfigInvalid(
            f"unknown function kind {kind!r}; expected one of {sorted(_FN_KEYS)}")
    keys = set(spec) - {"kind"}
    if keys != _FN_KEYS[kind]:
        raise ConfigInvalid(
            f"function kind {kind!r} takes keys {sorted(_FN_KEYS[kind])}, "
            f"got {sorted(keys)}")
    if kind == "one":
        return "one", lambda z: 1.0 + 0.0j
    if kind == "exp_neg":
        return "exp_neg", lambda z: np.exp(-complex(z))
    if kind == "stieltjes":
        return "stieltjes", lambda z: 1.0 / (1.0 + complex(z))
    try:
        cs = tuple(float(c) for c in spec["coeffs"])
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"poly coeffs must be real numbers: {exc}") from exc
    if not cs:
        raise ConfigInvalid("poly needs at least one coefficient")

    def poly(z, _cs=cs):
        acc = 0.0 + 0.0j
        for c in reversed(_cs):
            acc = acc * z + c
        return acc

    return "poly", poly


def load_function_spec(path) -> Tuple[str, Callable[[complex], complex]]:
    return function_from_spec(read_json(path))


# -- report serialization ---------------------------------------------------------


def to_jsonable(obj):
    """Plain JSON types from report objects.

    Dataclasses become field dicts, arrays become lists, complex numbers
    become {"re","im"} pairs, weight sequences shrink to a label/window
    descriptor.  Anything else is a programming error.
    """
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, WeightSequence):
        return {"label": obj.label, "window": int(obj.window)}
    if isinstance(obj, FormalSeries):
        return {"label": obj.label, "order": int(obj.order)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def file_sha256(path) -> str:
    try:
        with open(path, "rb") as fp:
            return hashlib.sha256(fp.read()).hexdigest()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def tool_version() -> str:
    try:
        from importlib.metadata import version
        return version("asympto")
    except Exception:
        return "0+unknown"


def envelope(command: str, config: dict, payload, elapsed_s: float) -> dict:
    """Wrap a payload with provenance.

    The hash covers the canonical JSON of the resolved config; timing sits
    beside the payload, never inside it, so payload bytes are deterministic
    run to run.
    """
    canon = json.dumps(to_jsonable(config), sort_keys=True,
                       separators=(",", ":"))
    return {
        "command": command,
        "version": tool_version(),
        "config_sha256": hashlib.sha256(canon.encode("utf-8")).hexdigest(),
        "elapsed_s": float(elapsed_s),
        "payload": to_jsonable(payload),
    }


def emit_json(doc: dict, path: Optional[str] = None) -> None:
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows) -> None:
    buf = _stringio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    _write_text(path, buf.getvalue())


def _write_text(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fp:
            fp.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
