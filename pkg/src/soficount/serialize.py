"""Config loading and stable JSON/CSV output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CSV_COLUMNS = ("mode", "d", "delta", "F-id", "log_count", "restriction_log_count", "rate", "ci_low", "ci_high", "flags")


class ConfigError(ValueError):
    """Unreadable or malformed configuration."""


def load_config(path: str | Path) -> tuple[dict, str]:
    """Parse a JSON or TOML file; returns (mapping, sha256 of the bytes)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    text = raw.decode("utf-8", errors="replace")
    try:
        if path.suffix.lower() == ".toml":
            obj = tomllib.loads(text)
        else:
            obj = json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config must be a mapping")
    return obj, digest


def encode(obj: Any) -> Any:
    """JSON-safe copy: infinities and NaN become strings, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "-inf" if x < 0 else "inf"
        return x
    return obj


def decode_float(value: Any) -> float:
    if isinstance(value, str):
        return float(value)  # accepts "-inf", "inf", "nan"
    return float(value)


def dumps(obj: Any) -> str:
    return json.dumps(encode(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj))


def fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "-inf" if x < 0 else "inf"
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def csv_text(rows: list[dict], columns: tuple[str, ...]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path: str | Path, rows: list[dict], columns: tuple[str, ...] = CSV_COLUMNS) -> None:
    Path(path).write_text(csv_text(rows, columns))
