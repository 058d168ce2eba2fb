"""Reading and writing of profile CSVs and JSON reports."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .waveop import WaveGrid, WaveProfile

PROFILE_SCHEMA = "wavecrit.profile/1"
REPORT_SCHEMA = "wavecrit.report/1"


def profile_to_csv(p: WaveProfile) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {PROFILE_SCHEMA}\n")
    buf.write(f"# s_right_limit = {p.s_right_limit!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["xi", "S", "I"])
    for x, s, i in zip(p.xi, p.s, p.i):
        w.writerow([repr(float(x)), repr(float(s)), repr(float(i))])
    return buf.getvalue()


def profile_from_csv(text: str) -> WaveProfile:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# schema:"):
        raise ValueError("profile CSV lacks the schema header line")
    schema = lines[0].split(":", 1)[1].strip()
    if schema != PROFILE_SCHEMA:
        raise ValueError(f"unsupported profile schema {schema!r}")
    rows = [ln for ln in lines if ln and not ln.startswith("#")]
    reader = csv.DictReader(rows)
    data = np.array([[float(r["xi"]), float(r["S"]), float(r["I"])] for r in reader])
    if data.shape[0] < 8:
        raise ValueError("profile CSV holds fewer than 8 nodes")
    xi = data[:, 0]
    grid = WaveGrid(float(xi[0]), float(xi[-1]), xi.size)
    if np.max(np.abs(grid.nodes - xi)) > 1e-9 * max(1.0, abs(grid.h)):
        raise ValueError("profile nodes are not uniformly spaced")
    # s_right_limit is recomputed from the nodes so edited files stay self-consistent
    return WaveProfile(grid, data[:, 1], data[:, 2])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def to_json(kind: str, payload: dict) -> str:
    doc = {"schema": REPORT_SCHEMA, "kind": kind}
    doc.update(_clean(payload))
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def read_json(path: Path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"{path}: not a {REPORT_SCHEMA} document")
    return doc


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
