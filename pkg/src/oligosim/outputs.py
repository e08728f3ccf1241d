"""CSV export and run manifests.

All files are written atomically (temp file in the target directory, then
rename); an existing target is only replaced under ``force``. Numbers are
formatted with 12 significant digits and a fixed '\\n' line ending so a
replayed run reproduces files byte for byte. The manifest records the fully
resolved configuration of a run and is written after its outputs.
"""

from __future__ import annotations

import json
import os
import tempfile
from datetime import datetime, timezone

from . import __version__

DIAGRAM_HEADER = ("p", "h", "c0", "c1_inf", "c2_inf", "c3_inf", "se1", "se2", "se3")
TRAJECTORY_HEADER = ("t", "c1", "c2", "c3")
MFA_HEADER = DIAGRAM_HEADER + ("clamped",)
BANDS_HEADER = ("quarter", "op", "lo", "med", "hi")
FIT_HEADER = ("p", "score")


def fmt(value) -> str:
    """One CSV cell: ints verbatim, floats with 12 significant digits."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int,)):
        return str(value)
    return format(float(value), ".12g")


def _atomic_write(path: str, text: str, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise FileExistsError(f"{path} exists; pass force to overwrite")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows, force: bool = False) -> None:
    """Write rows (iterables of cells) under the given header."""
    lines = [",".join(header)]
    lines.extend(",".join(fmt(cell) for cell in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n", force)


def diagram_rows(diagram):
    for pt in diagram.points:
        m = pt.mean
        yield (pt.p, pt.h, pt.c0, m.c1, m.c2, m.c3, pt.se[0], pt.se[1], pt.se[2])


def trajectory_rows(trajectory):
    for t, row in zip(trajectory.times, trajectory.shares):
        yield (t, row[0], row[1], row[2])


def mfa_scan_rows(scan):
    """Rows from fixed_point_scan output; standard errors are zero by definition."""
    for p, h, c0, res in scan:
        c = res.c_inf
        yield (p, h, c0, c.c1, c.c2, c.c3, 0.0, 0.0, 0.0, int(res.clamped))


def bands_rows(bands):
    for qi, quarter in enumerate(bands.quarters):
        for op in (1, 2, 3):
            yield (int(quarter), op, bands.lower[qi, op - 1],
                   bands.median[qi, op - 1], bands.upper[qi, op - 1])


def fit_rows(fit):
    for p, score in zip(fit.p_grid, fit.scores):
        yield (p, score)


def manifest_path(out_path: str) -> str:
    return out_path + ".manifest.json"


def write_manifest(out_path: str, command: str, params: dict, outputs,
                   seed: int, started, force: bool = False) -> str:
    """Serialize the resolved run configuration next to its outputs."""
    finished = datetime.now(timezone.utc)
    doc = {
        "tool": "oligosim",
        "version": __version__,
        "command": command,
        "params": params,
        "base_seed": seed,
        "outputs": list(outputs),
        "created_utc": finished.isoformat(),
        "duration_s": (finished - started).total_seconds(),
    }
    path = manifest_path(out_path)
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n", force)
    return path


def load_manifest(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("tool", "command", "params"):
        if key not in doc:
            raise ValueError(f"{path}: not a run manifest (missing {key!r})")
    return doc
