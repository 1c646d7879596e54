"""Coordinate charts, background conformal metrics and grid operators.

A chart is a uniform rectangular grid in the coordinate ``z = x + iy``.
Two kinds exist:

* ``disk``: the square inscribed in the circle ``|z| = r_max`` inside the
  Poincare disk, with Dirichlet boundary nodes.
* ``torus``: a periodic rectangle; opposite edges are identified and the
  duplicated edge nodes are not stored.

Scalar fields are arrays of shape ``(ny, nx)`` indexed ``[j, i]`` with ``j``
along ``y`` (row-major).  The Wirtinger operator ``d/dzbar d/dz`` is one
quarter of the Euclidean 5-point Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

__all__ = [
    "Chart",
    "BackgroundMetric",
    "build_chart",
    "hyperbolic_factor",
    "flat_factor",
    "wirtinger_laplacian",
    "laplace_beltrami",
    "conformal_norm_sq",
    "d_dz",
    "d_dzbar",
    "integrate",
]

ChartKind = Literal["disk", "torus"]

MIN_NODES = 9
MAX_DISK_RADIUS = 0.95


@dataclass(frozen=True)
class Chart:
    kind: ChartKind
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    r_max: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("disk", "torus"):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.nx < MIN_NODES or self.ny < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes per axis, got {self.nx}x{self.ny}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("chart extents must be positive")

    @property
    def periodic(self) -> bool:
        return self.kind == "torus"

    @property
    def hx(self) -> float:
        if self.periodic:
            return (self.x1 - self.x0) / self.nx
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def hy(self) -> float:
        if self.periodic:
            return (self.y1 - self.y0) / self.ny
        return (self.y1 - self.y0) / (self.ny - 1)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @cached_property
    def x(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx)

    @cached_property
    def y(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny)

    @cached_property
    def z(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.y)
        return X + 1j * Y

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    @cached_property
    def interior(self) -> np.ndarray:
        """Nodes carrying an equation (all nodes on a torus)."""
        mask = np.ones(self.shape, dtype=bool)
        if not self.periodic:
            mask[0, :] = mask[-1, :] = False
            mask[:, 0] = mask[:, -1] = False
        return mask

    def inner(self, fraction: float = 0.8) -> np.ndarray:
        """Nodes inside the centred sub-rectangle scaled by ``fraction``.

        On a torus every node is returned: there is no boundary layer.
        """
        if self.periodic:
            return np.ones(self.shape, dtype=bool)
        c = self.center
        ax = 0.5 * (self.x1 - self.x0) * fraction
        ay = 0.5 * (self.y1 - self.y0) * fraction
        eps = 1e-12 * max(ax, ay)
        z = self.z
        mask = (np.abs(z.real - c.real) <= ax + eps) & (np.abs(z.imag - c.imag) <= ay + eps)
        return mask & self.interior

    def adjacency(self) -> dict[str, bool]:
        return {"periodic_x": self.periodic, "periodic_y": self.periodic}

    def header(self) -> str:
        return " ".join([str(self.nx), str(self.ny)] + [repr(float(v)) for v in (self.x0, self.x1, self.y0, self.y1)] + [self.kind])


def build_chart(
    kind: ChartKind,
    nx: int,
    ny: int | None = None,
    *,
    r_max: float | None = None,
    bounds: tuple[float, float, float, float] | None = None,
) -> Chart:
    """Construct a chart.

    Disk charts take ``r_max`` (corner radius of the inscribed square);
    torus charts take ``bounds = (x0, x1, y0, y1)``, default the unit square.
    """
    ny = nx if ny is None else ny
    if kind == "disk":
        if r_max is None:
            raise ValueError("disk chart needs r_max")
        if r_max >= 1.0:
            raise ValueError(f"singular conformal factor: r_max={r_max} reaches the unit circle")
        if r_max <= 0:
            raise ValueError("chart extents must be positive")
        if r_max > MAX_DISK_RADIUS:
            raise ValueError(f"r_max={r_max} exceeds {MAX_DISK_RADIUS}")
        a = r_max / np.sqrt(2.0)
        return Chart("disk", -a, a, -a, a, int(nx), int(ny), r_max=float(r_max))
    if kind == "torus":
        x0, x1, y0, y1 = bounds if bounds is not None else (0.0, 1.0, 0.0, 1.0)
        return Chart("torus", float(x0), float(x1), float(y0), float(y1), int(nx), int(ny))
    raise ValueError(f"unknown chart kind {kind!r}")


@dataclass(frozen=True)
class BackgroundMetric:
    """Conformal factor ``g0`` of ``g0(z) (dz dzbar + dzbar dz)`` on a chart.

    ``curvature_term`` holds the analytic value of ``d/dzbar d/dz log g0``
    (``g0`` itself for the hyperbolic metric, zero for the flat one) so
    solvers never have to difference ``log g0``.
    """

    kind: Literal["hyperbolic", "flat"]
    chart: Chart
    factor: np.ndarray = field(repr=False)
    curvature_term: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.factor.shape != self.chart.shape:
            raise ValueError("metric factor does not match chart shape")
        if not np.all(self.factor > 0):
            raise ValueError("conformal factor must be positive")

    @property
    def log_factor(self) -> np.ndarray:
        return np.log(self.factor)

    @property
    def volume_density(self) -> np.ndarray:
        """``dvol = 2 g0 dx dy``."""
        return 2.0 * self.factor


def hyperbolic_factor(chart: Chart) -> BackgroundMetric:
    """Poincare disk factor ``g0 = 2 / (1 - |z|^2)^2``; satisfies ``d_zbar d_z log g0 = g0``."""
    if chart.kind != "disk":
        raise ValueError("hyperbolic factor is only defined on disk charts")
    r2 = np.abs(chart.z) ** 2
    g0 = 2.0 / (1.0 - r2) ** 2
    return BackgroundMetric("hyperbolic", chart, g0, g0.copy())


def flat_factor(chart: Chart, value: float = 1.0) -> BackgroundMetric:
    if value <= 0:
        raise ValueError("conformal factor must be positive")
    g0 = np.full(chart.shape, float(value))
    return BackgroundMetric("flat", chart, g0, np.zeros(chart.shape))


def _check_shape(u: np.ndarray, chart: Chart) -> None:
    if u.shape[-2:] != chart.shape:
        raise ValueError(f"field shape {u.shape} does not match chart {chart.shape}")


def wirtinger_laplacian(u: np.ndarray, chart: Chart) -> np.ndarray:
    """``d/dzbar d/dz u`` by the 5-point stencil (leading axes are batched).

    Disk boundary nodes are NaN.
    """
    _check_shape(u, chart)
    ax, ay = u.ndim - 1, u.ndim - 2
    if chart.periodic:
        lap = (np.roll(u, 1, ax) - 2 * u + np.roll(u, -1, ax)) / chart.hx**2
        lap = lap + (np.roll(u, 1, ay) - 2 * u + np.roll(u, -1, ay)) / chart.hy**2
        return 0.25 * lap
    out = np.full(u.shape, np.nan, dtype=np.result_type(u, float))
    c = u[..., 1:-1, 1:-1]
    lap = (u[..., 1:-1, :-2] - 2 * c + u[..., 1:-1, 2:]) / chart.hx**2
    lap = lap + (u[..., :-2, 1:-1] - 2 * c + u[..., 2:, 1:-1]) / chart.hy**2
    out[..., 1:-1, 1:-1] = 0.25 * lap
    return out


def laplace_beltrami(u: np.ndarray, metric: BackgroundMetric) -> np.ndarray:
    """``(1/g0) d/dzbar d/dz u``; NaN on disk boundary nodes."""
    return wirtinger_laplacian(u, metric.chart) / metric.factor


def conformal_norm_sq(q: np.ndarray | complex, degree: int, metric: BackgroundMetric) -> np.ndarray:
    """Pointwise ``|q|^2 g0^-degree`` for a degree-``degree`` differential."""
    if degree < 2:
        raise ValueError("degree must be >= 2")
    q = np.asarray(q)
    if q.ndim:
        _check_shape(q, metric.chart)
    return np.abs(q) ** 2 * metric.factor ** (-float(degree))


def _central(u: np.ndarray, chart: Chart, axis: int, step: float) -> np.ndarray:
    if chart.periodic:
        return (np.roll(u, -1, axis) - np.roll(u, 1, axis)) / (2 * step)
    out = np.full(u.shape, np.nan, dtype=np.result_type(u, float))
    sl_c = [slice(None)] * u.ndim
    sl_p = [slice(None)] * u.ndim
    sl_m = [slice(None)] * u.ndim
    sl_c[axis] = slice(1, -1)
    sl_p[axis] = slice(2, None)
    sl_m[axis] = slice(None, -2)
    out[tuple(sl_c)] = (u[tuple(sl_p)] - u[tuple(sl_m)]) / (2 * step)
    return out


def _axes(u: np.ndarray, trailing: int) -> tuple[int, int]:
    # (y axis, x axis) for fields with `trailing` extra matrix axes
    return u.ndim - 2 - trailing, u.ndim - 1 - trailing


def d_dz(u: np.ndarray, chart: Chart, trailing: int = 0) -> np.ndarray:
    """Central-difference ``d/dz = (d/dx - i d/dy)/2``.

    ``trailing`` counts matrix axes after the two grid axes.
    """
    ay, ax = _axes(u, trailing)
    return 0.5 * (_central(u, chart, ax, chart.hx) - 1j * _central(u, chart, ay, chart.hy))


def d_dzbar(u: np.ndarray, chart: Chart, trailing: int = 0) -> np.ndarray:
    ay, ax = _axes(u, trailing)
    return 0.5 * (_central(u, chart, ax, chart.hx) + 1j * _central(u, chart, ay, chart.hy))


def integrate(f: np.ndarray, chart: Chart) -> float:
    """Integral of ``f dx dy`` over the chart (trapezoid on disks)."""
    _check_shape(f, chart)
    if chart.periodic:
        return float(np.sum(f) * chart.hx * chart.hy)
    w = np.ones(chart.shape)
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return float(np.sum(w * f) * chart.hx * chart.hy)
