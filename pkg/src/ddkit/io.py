"""CSV / JSON emission and ingestion with a versioned schema tag."""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .decoherence import CoherenceCurve
from .errors import InvalidArgument

SCHEMA = "ddkit/v1"

CURVE_COLUMNS = ("time_s", "coherence", "method", "f_dd_hz", "sigma_delta", "gamma")
SIMULATION_COLUMNS = ("time_s", "coherence", "stat_err", "phase_var")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return _jsonable(obj.item())
    return obj


@contextmanager
def _open_out(path):
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def dumps_json(payload: Mapping) -> str:
    data = dict(payload)
    data.setdefault("schema", SCHEMA)
    return json.dumps(_jsonable(data), indent=2, allow_nan=False)


def write_json(payload: Mapping, path=None) -> None:
    with _open_out(path) as fh:
        fh.write(dumps_json(payload) + "\n")


def read_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgument(f"cannot read JSON from {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidArgument(f"{path} must hold a JSON object")
    if "schema" in data and data["schema"] != SCHEMA:
        raise InvalidArgument(f"unsupported schema {data['schema']!r} in {path}")
    return data


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))  # plain repr, also for numpy scalars
    return "" if v is None else str(v)


def write_csv(rows: Iterable[Mapping], columns: Sequence[str], path=None) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def read_csv(path) -> list[dict]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidArgument(f"cannot read {path}: {exc}") from None
    return list(csv.DictReader(io.StringIO(text)))


def curve_rows(curve: CoherenceCurve) -> list[dict]:
    p = curve.params
    bath = p.get("bath", {}) if isinstance(p.get("bath"), dict) else {}
    sigma = bath.get("sigma_delta_rad_s", p.get("sigma_delta_rad_s"))
    gamma = bath.get("gamma_per_s", p.get("gamma_per_s"))
    return [
        {
            "time_s": t,
            "coherence": c,
            "method": curve.method,
            "f_dd_hz": p.get("f_dd_hz", p.get("f_dd")),
            "sigma_delta": sigma,
            "gamma": gamma,
        }
        for t, c in zip(curve.times, curve.values)
    ]


def read_curve(path, method: str = "measured") -> CoherenceCurve:
    """Curve from a CSV with at least ``time_s`` and ``coherence`` columns."""
    rows = read_csv(path)
    if not rows or "time_s" not in rows[0] or "coherence" not in rows[0]:
        raise InvalidArgument(f"{path} needs time_s and coherence columns")
    try:
        t = [float(r["time_s"]) for r in rows]
        c = [float(r["coherence"]) for r in rows]
    except ValueError as exc:
        raise InvalidArgument(f"non-numeric value in {path}: {exc}") from None
    return CoherenceCurve(t, c, method)
