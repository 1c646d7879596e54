"""Geometry of the equivariant harmonic map attached to a solved Higgs pair.

All functions take the sampled Higgs matrix ``phi`` (shape ``(..., n, n)``)
and a Hermitian metric matrix ``h`` of the same shape.  The pullback metric
is ``P20 dz^2 + P11 (dz dzbar + dzbar dz) + P02 dzbar^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .algebra import HiggsField, adjoint_higgs, bracket, bracket_norm
from .chart import BackgroundMetric, Chart, integrate, wirtinger_laplacian

__all__ = [
    "energy_density",
    "total_energy",
    "hopf_differential",
    "pullback_metric",
    "sectional_curvature",
    "gaussian_curvature_conformal",
    "GeometryReport",
    "geometry_report",
]


def _tr(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def energy_density(phi: np.ndarray, h: np.ndarray, g0: np.ndarray | float) -> np.ndarray:
    """``e(f) = 2n tr(phi phi^*) / g0`` (real, nonnegative)."""
    n = phi.shape[-1]
    return 2 * n * np.real(_tr(phi @ adjoint_higgs(phi, h))) / np.asarray(g0)


def total_energy(e: np.ndarray, metric: BackgroundMetric) -> float:
    """``int e(f) dvol`` with ``dvol = 2 g0 dx dy`` over the chart."""
    return integrate(e * metric.volume_density, metric.chart)


def hopf_differential(phi: np.ndarray) -> np.ndarray:
    """``2n tr(phi^2)``: the ``dz^2`` coefficient of the pullback metric."""
    n = phi.shape[-1]
    return 2 * n * _tr(phi @ phi)


def pullback_metric(
    phi: np.ndarray, h: np.ndarray, tol_deg: float = 1e-10
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(P20, P11, P02, degenerate)``.

    A node is degenerate (not immersed) when ``P11^2 - |P20|^2 <= tol_deg P11^2``;
    zero ``phi`` is always degenerate.
    """
    n = phi.shape[-1]
    p20 = hopf_differential(phi)
    p11 = 2 * n * np.real(_tr(phi @ adjoint_higgs(phi, h)))
    det = p11**2 - np.abs(p20) ** 2
    degenerate = det <= tol_deg * p11**2
    return p20, p11, np.conj(p20), degenerate


def sectional_curvature(phi: np.ndarray, h: np.ndarray, tol_deg: float = 1e-10) -> np.ndarray:
    """Curvature of the symmetric space along the image tangent plane.

    ``-(1/2n) tr(B^2) / (tr(phi phi^*)^2 - |tr phi^2|^2)`` with ``B = [phi, phi^*]``;
    NaN where the denominator is at most ``tol_deg`` times its scale.
    """
    n = phi.shape[-1]
    ps = adjoint_higgs(phi, h)
    b = bracket(phi, ps)
    num = np.real(_tr(b @ b))
    t11 = np.real(_tr(phi @ ps))
    den = t11**2 - np.abs(_tr(phi @ phi)) ** 2
    ok = den > tol_deg * t11**2
    out = np.full(den.shape, np.nan)
    out[ok] = -num[ok] / (2 * n * den[ok])
    return out


def gaussian_curvature_conformal(
    p11: np.ndarray, chart: Chart, p20: np.ndarray | None = None, tol: float = 1e-10
) -> np.ndarray:
    """Curvature of the conformal metric ``P11 (dz dzbar + dzbar dz)``.

    ``kappa = -(1/P11) d_zbar d_z log P11``.  Requires a vanishing Hopf
    differential when ``p20`` is given; NaN on disk boundary nodes.
    """
    if p20 is not None and np.max(np.abs(p20)) > tol * max(1.0, float(np.max(np.abs(p11)))):
        raise ValueError("non-conformal input: Hopf differential does not vanish")
    if np.any(p11 <= 0):
        raise ValueError("conformal factor must be positive")
    return -wirtinger_laplacian(np.log(p11), chart) / p11


@dataclass
class GeometryReport:
    chart: Chart
    energy_density: np.ndarray = field(repr=False)
    total_energy: float
    hopf: np.ndarray = field(repr=False)
    p11: np.ndarray = field(repr=False)
    degenerate: np.ndarray = field(repr=False)
    sectional: np.ndarray = field(repr=False)
    bracket_norm: np.ndarray = field(repr=False)
    gaussian: np.ndarray | None = field(default=None, repr=False)

    @property
    def p20(self) -> np.ndarray:
        return self.hopf

    @property
    def p02(self) -> np.ndarray:
        return np.conj(self.hopf)

    def fields(self) -> dict[str, np.ndarray]:
        out = {
            "energy_density": self.energy_density,
            "hopf": self.hopf,
            "p11": self.p11,
            "degenerate": self.degenerate.astype(float),
            "sectional_curvature": self.sectional,
            "bracket_norm": self.bracket_norm,
        }
        if self.gaussian is not None:
            out["gaussian_curvature"] = self.gaussian
        return out

    def summary(self, mask: np.ndarray | None = None) -> dict[str, Any]:
        mask = self.chart.inner() if mask is None else mask
        out: dict[str, Any] = {"total_energy": self.total_energy, "degenerate_nodes": int(np.sum(self.degenerate))}
        for name, f in self.fields().items():
            if name == "degenerate":
                continue
            vals = np.abs(f[mask]) if np.iscomplexobj(f) else f[mask]
            vals = vals[np.isfinite(vals)]
            key = f"|{name}|" if np.iscomplexobj(f) else name
            if vals.size == 0:
                out[key] = {"min": None, "max": None, "mean": None, "defined": 0}
            else:
                out[key] = {
                    "min": float(vals.min()),
                    "max": float(vals.max()),
                    "mean": float(vals.mean()),
                    "defined": int(vals.size),
                }
        return out


def geometry_report(phi: HiggsField, h: np.ndarray, metric: BackgroundMetric, tol_deg: float = 1e-10) -> GeometryReport:
    """Evaluate every geometric field of ``(phi, h)`` on the metric's chart."""
    chart = metric.chart
    ph = phi.on(chart)
    g0 = metric.factor
    e = energy_density(ph, h, g0)
    p20, p11, _, deg = pullback_metric(ph, h, tol_deg)
    gauss = None
    scale = max(1.0, float(np.max(np.abs(p11))))
    if np.max(np.abs(p20)) <= tol_deg * scale and np.all(p11 > 0):
        gauss = gaussian_curvature_conformal(p11, chart)
    return GeometryReport(
        chart,
        e,
        total_energy(e, metric),
        p20,
        p11,
        deg,
        sectional_curvature(ph, h, tol_deg),
        bracket_norm(ph, h, g0),
        gauss,
    )
