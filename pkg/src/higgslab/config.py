"""Experiment configuration documents (YAML or JSON).

Example::

    kind: claims
    chart: {kind: disk, r_max: 0.8, n: 129}
    metric: hyperbolic
    higgs:
      family: hitchin-section
      rank: 2
      q: [[0, 0.3]]        # q_2 = 0.3 z (ascending polynomial coefficients)
    boundary: fuchsian
    solver: {tol: 1.0e-10}
    t: [1, 2, 4, 8]

Holomorphic entries are a number or complex string (constant) or a list of
ascending polynomial coefficients.  Errors carry the dotted field name and,
when known, the line of the offending entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .algebra import HiggsField, PathSpec, build_cyclic, build_hitchin_section, build_sp4_maximal
from .chart import BackgroundMetric, Chart, build_chart, flat_factor, hyperbolic_factor
from .solver import SolverConfig

__all__ = ["ConfigError", "ExperimentConfig", "KINDS", "parse_config", "load_config"]

KINDS = ("solve", "claims", "sweep-t", "decouple", "wkb", "curvature-scan", "domination")


class ConfigError(ValueError):
    def __init__(self, message: str, field_name: str | None = None, line: int | None = None, source: str = "<config>"):
        loc = source
        if line is not None:
            loc += f":{line}"
        if field_name:
            loc += f": field '{field_name}'"
        super().__init__(f"{loc}: {message}")
        self.field = field_name
        self.line = line


def _line_map(text: str) -> dict[str, int]:
    """Dotted key path -> 1-based line, from the YAML node tree."""
    out: dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node: Any, prefix: str) -> None:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[key] = k.start_mark.line + 1
                walk(v, key)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                key = f"{prefix}[{i}]"
                out[key] = v.start_mark.line + 1
                walk(v, key)

    if root is not None:
        walk(root, "")
    return out


def default_t_grid() -> list[float]:
    return [float(x) for x in np.geomspace(1.0, 8.0, 8)]


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    chart: dict[str, Any]
    metric: str
    higgs: dict[str, Any]
    boundary: Any = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    t: tuple[float, ...] = field(default_factory=lambda: tuple(default_t_grid()))
    out: str | None = None
    seed: int = 0
    fraction: float = 0.8
    exclusion_radius: float | None = None
    path: dict[str, Any] | None = None
    random_samples: int = 0
    source: str = "<config>"

    def build_chart(self) -> Chart:
        c = self.chart
        nx = int(c.get("nx", c.get("n", 65)))
        ny = int(c.get("ny", c.get("n", nx)))
        bounds = c.get("bounds")
        return build_chart(c["kind"], nx, ny, r_max=c.get("r_max"), bounds=tuple(bounds) if bounds else None)

    def build_metric(self, chart: Chart) -> BackgroundMetric:
        return hyperbolic_factor(chart) if self.metric == "hyperbolic" else flat_factor(chart)

    def build_higgs(self) -> HiggsField:
        return build_family(self.higgs)

    def build_path(self) -> PathSpec:
        if self.path is None:
            raise ConfigError("wkb experiments need a path", "path", source=self.source)
        return build_path(self.path)

    def with_overrides(self, *, grid: int | None = None, tol: float | None = None, seed: int | None = None,
                       out: str | None = None) -> ExperimentConfig:
        cfg = self
        if grid is not None:
            if grid < 9:
                raise ConfigError("grid must have at least 9 nodes per axis", "--grid", source=self.source)
            ch = {k: v for k, v in cfg.chart.items() if k not in ("nx", "ny")}
            ch["n"] = int(grid)
            cfg = replace(cfg, chart=ch)
        if tol is not None:
            if not tol > 0:
                raise ConfigError("tolerance must be positive", "--tol", source=self.source)
            cfg = replace(cfg, solver=replace(cfg.solver, tol=float(tol)))
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if out is not None:
            cfg = replace(cfg, out=str(out))
        return cfg

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "chart": self.chart,
            "metric": self.metric,
            "higgs": self.higgs,
            "boundary": self.boundary,
            "solver": self.solver.__dict__,
            "t": list(self.t),
            "seed": self.seed,
            "fraction": self.fraction,
            "exclusion_radius": self.exclusion_radius,
            "path": self.path,
        }


def build_family(spec: dict[str, Any]) -> HiggsField:
    fam = spec.get("family", "hitchin-section")
    if fam == "hitchin-section":
        q = spec.get("q")
        rank = spec.get("rank", None if q is None else len(q) + 1)
        if q is None:
            q = [0] * (int(rank) - 1)
        return build_hitchin_section(list(q), rank, normalization=spec.get("normalization", "unit"))
    if fam == "cyclic":
        return build_cyclic(list(spec["gammas"]), weights=spec.get("weights"))
    if fam == "sp4-maximal":
        return build_sp4_maximal(spec.get("q2", 0), spec.get("mu", 0), spec.get("nu", 0))
    raise ValueError(f"unknown Higgs family {fam!r}")


def _point(x: Any) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        return complex(x.replace(" ", "").replace("i", "j"))
    return complex(x)


def build_path(spec: dict[str, Any]) -> PathSpec:
    samples = int(spec.get("samples", 64))
    if spec.get("kind", "segment") == "segment":
        return PathSpec.segment(_point(spec["start"]), _point(spec["end"]), samples)
    if spec["kind"] == "arc":
        return PathSpec.arc(_point(spec.get("center", 0)), float(spec["radius"]), float(spec["theta0"]),
                            float(spec["theta1"]), samples)
    raise ValueError(f"unknown path kind {spec['kind']!r}")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate a configuration document."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"parse error: {getattr(exc, 'problem', exc)}", None, line, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", None, 1, source)
    lines = _line_map(text)

    def err(msg: str, key: str) -> ConfigError:
        probe = key
        while probe and probe not in lines:
            probe = probe.rsplit(".", 1)[0] if "." in probe else ""
        return ConfigError(msg, key, lines.get(probe), source)

    known = {"kind", "chart", "metric", "higgs", "boundary", "solver", "t", "out", "seed", "fraction",
             "exclusion_radius", "path", "random_samples"}
    for k in data:
        if k not in known:
            raise err(f"unknown key (expected one of {sorted(known)})", str(k))

    kind = data.get("kind")
    if kind not in KINDS:
        raise err(f"must be one of {list(KINDS)}", "kind")

    chart = data.get("chart")
    if not isinstance(chart, dict):
        raise err("must be a mapping with at least 'kind'", "chart")
    if chart.get("kind") not in ("disk", "torus"):
        raise err("must be 'disk' or 'torus'", "chart.kind")
    for key in ("n", "nx", "ny"):
        if key in chart and (not isinstance(chart[key], int) or chart[key] < 9):
            raise err("must be an integer >= 9", f"chart.{key}")
    if chart["kind"] == "disk":
        r = chart.get("r_max")
        if not isinstance(r, (int, float)):
            raise err("disk charts need a numeric r_max", "chart.r_max")
        if r >= 1:
            raise err("singular conformal factor: r_max must be < 1", "chart.r_max")
        if not 0 < r <= 0.95:
            raise err("must lie in (0, 0.95]", "chart.r_max")
    if "bounds" in chart:
        b = chart["bounds"]
        if not (isinstance(b, list) and len(b) == 4 and b[1] > b[0] and b[3] > b[2]):
            raise err("must be [x0, x1, y0, y1] with positive extents", "chart.bounds")

    metric = data.get("metric", "hyperbolic" if chart["kind"] == "disk" else "flat")
    if metric not in ("hyperbolic", "flat"):
        raise err("must be 'hyperbolic' or 'flat'", "metric")
    if metric == "hyperbolic" and chart["kind"] != "disk":
        raise err("hyperbolic metric requires a disk chart", "metric")

    higgs = data.get("higgs")
    if not isinstance(higgs, dict):
        raise err("must be a mapping describing the Higgs family", "higgs")
    try:
        build_family(higgs)
    except (ValueError, TypeError, KeyError) as exc:
        raise err(str(exc), "higgs") from None

    solver_kw = data.get("solver") or {}
    if not isinstance(solver_kw, dict):
        raise err("must be a mapping", "solver")
    try:
        solver = SolverConfig(**solver_kw)
    except (TypeError, ValueError) as exc:
        raise err(str(exc), "solver") from None

    t = data.get("t", default_t_grid())
    if isinstance(t, (int, float)):
        t = [t]
    if not isinstance(t, list) or not t:
        raise err("must be a non-empty list of positive numbers", "t")
    for i, v in enumerate(t):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise err(f"t values must be > 0, got {v!r}", f"t[{i}]")
    if any(b <= a for a, b in zip(t, t[1:])):
        raise err("t values must be strictly increasing", "t")

    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise err("must be an integer", "seed")
    fraction = data.get("fraction", 0.8)
    if not isinstance(fraction, (int, float)) or not 0 < fraction <= 1:
        raise err("must lie in (0, 1]", "fraction")
    excl = data.get("exclusion_radius")
    if excl is not None and (not isinstance(excl, (int, float)) or excl < 0):
        raise err("must be a nonnegative number", "exclusion_radius")
    path = data.get("path")
    if path is not None:
        if not isinstance(path, dict):
            raise err("must be a mapping", "path")
        try:
            build_path(path)
        except (ValueError, KeyError, TypeError) as exc:
            raise err(str(exc), "path") from None
    if kind == "wkb" and path is None:
        raise err("wkb experiments need a path", "path")
    rs = data.get("random_samples", 0)
    if not isinstance(rs, int) or rs < 0:
        raise err("must be a nonnegative integer", "random_samples")
    boundary = data.get("boundary")
    if boundary is not None and not (boundary in ("fuchsian", "local", "decoupled") or isinstance(boundary, list)):
        raise err("must be 'fuchsian', 'local', 'decoupled' or a list of u values", "boundary")
    out = data.get("out")
    if out is not None and not isinstance(out, str):
        raise err("must be a path string", "out")

    return ExperimentConfig(
        kind=kind,
        chart=dict(chart),
        metric=metric,
        higgs=dict(higgs),
        boundary=boundary,
        solver=solver,
        t=tuple(float(v) for v in t),
        out=out,
        seed=seed,
        fraction=float(fraction),
        exclusion_radius=None if excl is None else float(excl),
        path=path,
        random_samples=rs,
        source=source,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror}", source=str(path)) from None
    if path.suffix == ".json":
        try:
            json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"parse error: {exc.msg}", None, exc.lineno, str(path)) from None
    return parse_config(text, str(path))

