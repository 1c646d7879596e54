"""Artifact writers: chart-format field snapshots, JSON, CSV and SVG plots.

Every file is written to a temporary sibling and renamed into place.  An
:class:`ArtifactStage` collects a whole run so that a failure leaves no
partial output behind.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import shutil
import tempfile
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .chart import Chart

__all__ = [
    "atomic_write_text",
    "format_field_snapshot",
    "write_field_snapshot",
    "read_field_snapshot",
    "write_json",
    "write_csv",
    "write_svg_plot",
    "ArtifactStage",
    "to_jsonable",
]


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _num(x: float) -> str:
    return repr(float(x))


def format_field_snapshot(chart: Chart, *fields: np.ndarray) -> str:
    """Header ``nx ny x0 x1 y0 y1 kind`` then ``i j value...`` per node, row-major.

    Complex fields contribute two columns (real, imaginary).
    """
    cols: list[np.ndarray] = []
    for f in fields:
        f = np.asarray(f)
        if f.shape != chart.shape:
            raise ValueError(f"field shape {f.shape} does not match chart {chart.shape}")
        if np.iscomplexobj(f):
            cols += [f.real, f.imag]
        else:
            cols.append(f.astype(float))
    lines = [chart.header()]
    for j in range(chart.ny):
        for i in range(chart.nx):
            lines.append(" ".join([str(i), str(j)] + [_num(c[j, i]) for c in cols]))
    return "\n".join(lines) + "\n"


def write_field_snapshot(path: str | os.PathLike, chart: Chart, *fields: np.ndarray) -> Path:
    return atomic_write_text(path, format_field_snapshot(chart, *fields))


def read_field_snapshot(path: str | os.PathLike) -> tuple[dict[str, Any], np.ndarray]:
    """Inverse of :func:`write_field_snapshot`: header dict and ``(ny, nx, columns)`` values."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 7:
            raise ValueError(f"{path}: malformed header")
        nx, ny = int(head[0]), int(head[1])
        meta = {
            "nx": nx,
            "ny": ny,
            "x0": float(head[2]),
            "x1": float(head[3]),
            "y0": float(head[4]),
            "y1": float(head[5]),
            "kind": head[6],
        }
        rows = np.loadtxt(fh, ndmin=2)
    if rows.shape[0] != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} rows, found {rows.shape[0]}")
    vals = np.empty((ny, nx, rows.shape[1] - 2))
    vals[rows[:, 1].astype(int), rows[:, 0].astype(int)] = rows[:, 2:]
    return meta, vals


def to_jsonable(x: Any) -> Any:
    if isinstance(x, Mapping):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if np.isfinite(v) else None
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def write_json(path: str | os.PathLike, data: Any) -> Path:
    return atomic_write_text(path, json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n")


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return atomic_write_text(path, buf.getvalue())


def write_svg_plot(
    path: str | os.PathLike,
    x: Sequence[float],
    series: Mapping[str, Sequence[float]],
    *,
    xlabel: str = "",
    ylabel: str = "",
    title: str = "",
    logy: bool = False,
) -> Path:
    """Line plot of ``series`` against ``x`` as a self-contained SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "higgslab", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, y in series.items():
            ax.plot(x, y, marker="o", label=label)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        buf = _io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return atomic_write_text(path, buf.getvalue())


class ArtifactStage:
    """Collects run outputs in a hidden staging directory; ``commit`` moves them into ``out``."""

    def __init__(self, out: str | os.PathLike):
        self.out = Path(out)
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.dir = Path(tempfile.mkdtemp(prefix=f".{self.out.name}.stage-", dir=self.out.parent))
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def commit(self) -> list[Path]:
        self.out.mkdir(parents=True, exist_ok=True)
        done = []
        for name in sorted(set(self.files)):
            src = self.dir / name
            if src.exists():
                dst = self.out / name
                dst.parent.mkdir(parents=True, exist_ok=True)
                os.replace(src, dst)
                done.append(dst)
        self.discard()
        return done

    def discard(self) -> None:
        shutil.rmtree(self.dir, ignore_errors=True)

    def __enter__(self) -> ArtifactStage:
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.commit()
        else:
            self.discard()
