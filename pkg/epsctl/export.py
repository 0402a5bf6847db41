"""JSON and CSV writers: 12 significant digits, LF line endings, no NaN or inf."""

import csv
import io
import json
import math
import sys
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel

from .ellipsoids import SetPolygon
from .models import ComparisonRow
from .simulate import Trajectory

DEFAULT_PRECISION = 12


def _fmt(value: float, digits: int) -> str:
    return f"{value:.{digits}g}"


def _clean(obj: Any, digits: int) -> Any:
    """Round floats; non-finite numbers become None and are dropped from mappings."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(_fmt(obj, digits))
    if isinstance(obj, dict):
        cleaned = {k: _clean(v, digits) for k, v in obj.items()}
        return {k: v for k, v in cleaned.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, digits) for v in obj]
    return obj


def to_json(model: BaseModel, digits: int = DEFAULT_PRECISION) -> str:
    data = model.model_dump(mode="python", exclude_none=True)
    return json.dumps(_clean(data, digits), indent=2, allow_nan=False) + "\n"


def write_output(text: str, path: Optional[str] = None) -> None:
    """Write to path (LF endings) or to stdout."""
    if path:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
        return
    sys.stdout.write(text)


def _cell(value: Any, digits: int) -> Any:
    if isinstance(value, float):
        return _fmt(value, digits)
    return value


def _table(header: Sequence[str], rows: Iterable[Sequence[Any]], digits: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v, digits) for v in row])
    return buf.getvalue()


def curve_csv(curve: Iterable[tuple[float, float]], value_name: str = "eps_alpha", digits: int = DEFAULT_PRECISION) -> str:
    return _table(["alpha", value_name], ((float(a), float(v)) for a, v in curve), digits)


def polygons_csv(polygons: Iterable[SetPolygon], digits: int = DEFAULT_PRECISION) -> str:
    rows = []
    for poly in polygons:
        for i, (x1, x2) in enumerate(poly.vertices):
            rows.append((poly.label, i, float(x1), float(x2)))
    return _table(["kind", "index", "x1", "x2"], rows, digits)


def trajectory_csv(traj: Trajectory, digits: int = DEFAULT_PRECISION) -> str:
    n = traj.states.shape[1]
    k = traj.outputs.shape[1]
    header = ["t", *(f"x{i + 1}" for i in range(n)), *(f"z{i + 1}" for i in range(k)), "v"]
    rows = (
        (float(t), *map(float, x), *map(float, z), float(v))
        for t, x, z, v in zip(traj.times, traj.states, traj.outputs, traj.v_values, strict=True)
    )
    return _table(header, rows, digits)


def comparison_csv(rows: Iterable[ComparisonRow], digits: int = DEFAULT_PRECISION) -> str:
    """One row per beta; K and L flattened row-major."""
    out = []
    n_k = n_l = 0
    for r in rows:
        k = [float(v) for row in r.k for v in row]
        l = [float(v) for row in r.l for v in row]
        n_k, n_l = len(k), len(l)
        out.append((float(r.beta), float(r.alpha_hat), *k, *l, float(r.eps_norm), str(r.boundary_flag).lower()))
    header = ["beta", "alpha_hat", *(f"k{i + 1}" for i in range(n_k)), *(f"l{i + 1}" for i in range(n_l)), "eps_norm", "boundary_flag"]
    return _table(header, out, digits)
