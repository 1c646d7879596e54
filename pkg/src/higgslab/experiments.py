"""Configuration-driven experiments: claims, scale sweeps, decoupling, WKB and curvature scans.

Each runner takes an :class:`~higgslab.config.ExperimentConfig` and returns a
result dictionary; :func:`run` dispatches on ``config.kind`` and writes the
artifacts (``summary.json``, CSV tables, chart-format snapshots, SVG plots).
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import io
from .algebra import HiggsField, eigen_field, path_alpha, scale_action, vec_distance
from .chart import BackgroundMetric, Chart
from .config import ExperimentConfig
from .geometry import GeometryReport, geometry_report, sectional_curvature
from .solver import (
    Solution,
    SolverError,
    assemble_cyclic,
    claims_margin,
    cooperative_check,
    linearization_coefficients,
    residual_matrix,
    solve_newton,
    vk_coefficients,
)

__all__ = [
    "Problem",
    "run",
    "run_solve",
    "run_claims",
    "sweep_scale",
    "decoupling_rate",
    "wkb_report",
    "curvature_scan",
    "domination_check",
    "fit_exponential",
    "fuchsian_energy",
]

log = logging.getLogger(__name__)

EXPLORATORY = "exploratory: frame-dependent, parallel transport omitted"
EVIDENCE = "numerical evidence on a chart, not a proof"


def fuchsian_energy(n: int) -> float:
    """Energy density of the q = 0 solution, ``(n^4 - n^2)/6``."""
    return (n**4 - n**2) / 6


@dataclass
class Problem:
    """Chart, metric and Higgs field built from a configuration."""

    config: ExperimentConfig
    chart: Chart
    metric: BackgroundMetric
    phi: HiggsField

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> Problem:
        chart = cfg.build_chart()
        return cls(cfg, chart, cfg.build_metric(chart), cfg.build_higgs())

    def solve(self, t: float = 1.0) -> Solution:
        phi = self.phi if t == 1.0 else scale_action(t, self.phi)
        system = assemble_cyclic(phi, self.chart, self.metric, self.config.boundary, symmetry=self.config.solver.symmetry)
        return solve_newton(system, self.config.solver)

    def geometry(self, sol: Solution) -> GeometryReport:
        return geometry_report(sol.system.phi, sol.metric_field.matrix, self.metric)

    @property
    def inner(self) -> np.ndarray:
        return self.chart.inner(self.config.fraction)

    def solve_many(self, ts: tuple[float, ...], workers: int = 1) -> list[Solution]:
        sols, error = self.solve_prefix(ts, workers)
        if error is not None:
            raise error
        return sols

    def solve_prefix(self, ts: tuple[float, ...], workers: int = 1) -> tuple[list[Solution], SolverError | None]:
        """Solve every ``t``; on failure return the converged prefix and the error."""

        def attempt(t: float) -> Solution | SolverError:
            try:
                return self.solve(t)
            except SolverError as exc:
                return exc

        if workers <= 1:
            results = []
            for t in ts:
                results.append(attempt(t))
                if isinstance(results[-1], SolverError):
                    break
        else:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(attempt, ts))
        sols: list[Solution] = []
        for r in results:
            if isinstance(r, SolverError):
                return sols, r
            sols.append(r)
        return sols, None


def _minloc(field: np.ndarray, mask: np.ndarray, chart: Chart, largest: bool = False) -> tuple[float, complex]:
    vals = np.where(mask & np.isfinite(field), field, -np.inf if largest else np.inf)
    j = np.unravel_index(int(np.argmax(vals) if largest else np.argmin(vals)), vals.shape)
    return float(vals[j]), complex(chart.z[j])


def fit_exponential(t: np.ndarray, s: np.ndarray) -> dict[str, Any]:
    """Least-squares fit ``log s = log C - eps t``; reports ``C``, ``eps``, ``R^2`` and residuals."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if t.size < 2:
        return {"status": "no fit (single point)", "C": None, "eps": None, "r2": None, "residuals": []}
    if np.all(s <= 1e-13):
        return {"status": "exact decoupling", "C": 0.0, "eps": None, "r2": None, "residuals": []}
    if np.any(s <= 0):
        return {"status": "no fit (zero values)", "C": None, "eps": None, "r2": None, "residuals": []}
    y = np.log(s)
    slope, icpt = np.polyfit(t, y, 1)
    resid = y - (slope * t + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    eps = -float(slope)
    if r2 >= 0.95:
        status = "decaying" if eps > 0 else "not decaying"
    else:
        status = "inconclusive"
    return {"status": status, "C": float(np.exp(icpt)), "eps": eps, "r2": r2, "residuals": resid.tolist()}


# ----------------------------------------------------------------------------
# Runners; each returns (summary, artifact writer)

Writer = Callable[[io.ArtifactStage], None]


def run_solve(cfg: ExperimentConfig) -> tuple[dict[str, Any], Writer]:
    pb = Problem.from_config(cfg)
    sol = pb.solve()
    geo = pb.geometry(sol)
    res_m, _ = residual_matrix(sol)
    mask = pb.inner
    u = sol.scalar_u
    summary = {
        "solution": sol.summary(),
        "geometry": geo.summary(mask),
        "matrix_residual": res_m,
        "scalar_u_range": [float(u[mask].min()), float(u[mask].max())],
        "energy_density_range": [float(geo.energy_density[mask].min()), float(geo.energy_density[mask].max())],
        "fuchsian_energy": fuchsian_energy(pb.phi.n),
    }

    def write(stage: io.ArtifactStage) -> None:
        _write_solution(stage, pb, sol, geo)

    return summary, write


def _write_solution(stage: io.ArtifactStage, pb: Problem, sol: Solution, geo: GeometryReport, prefix: str = "") -> None:
    io.write_field_snapshot(stage.path(f"{prefix}u.txt"), pb.chart, *sol.u)
    io.write_field_snapshot(stage.path(f"{prefix}log_h.txt"), pb.chart, *sol.log_h)
    for name, f in geo.fields().items():
        io.write_field_snapshot(stage.path(f"{prefix}{name}.txt"), pb.chart, f)
    io.write_csv(stage.path(f"{prefix}residual_history.csv"), ["iteration", "residual"], enumerate(sol.history))
    io.write_svg_plot(stage.path(f"{prefix}residual_history.svg"), list(range(len(sol.history))),
                      {"sup |R|/g0": sol.history}, xlabel="Newton iteration", ylabel="residual", logy=True)


def run_claims(cfg: ExperimentConfig) -> tuple[dict[str, Any], Writer]:
    pb = Problem.from_config(cfg)
    sol = pb.solve()
    rep = claims_margin(sol, fraction=cfg.fraction, exclusion=cfg.exclusion_radius)
    summary: dict[str, Any] = {"solution": sol.summary(), "claims": rep.as_dict()}
    if pb.phi.n % 2 == 0:
        c = linearization_coefficients(sol)["c"]
        region = pb.inner & np.all(np.isfinite(c), axis=0)
        coop = cooperative_check(vk_coefficients(c[:, region]))
        summary["maximum_principle"] = coop.as_dict()

    def write(stage: io.ArtifactStage) -> None:
        io.write_field_snapshot(stage.path("u.txt"), pb.chart, *sol.u)
        io.write_field_snapshot(stage.path("margins.txt"), pb.chart, *rep.margins.values())
        rows = [(k, rep.minima[k], rep.locations[k].real, rep.locations[k].imag) for k in rep.minima]
        io.write_csv(stage.path("claims.csv"), ["claim", "min_margin", "x", "y"], rows)

    return summary, write


def sweep_scale(cfg: ExperimentConfig, workers: int = 1) -> tuple[dict[str, Any], Writer]:
    """Solve ``t phi`` over the t grid; energy, bracket size and pointwise monotonicity."""
    pb = Problem.from_config(cfg)
    mask = pb.inner
    records: list[dict[str, Any]] = []
    densities: list[np.ndarray] = []
    sols, error = pb.solve_prefix(cfg.t, workers)
    for t, sol in zip(cfg.t, sols):
        geo = pb.geometry(sol)
        densities.append(geo.energy_density)
        records.append({
            "t": t,
            "total_energy": geo.total_energy,
            "bracket_sup": float(np.max(geo.bracket_norm[mask])),
            "energy_density_min": float(np.min(geo.energy_density[mask])),
            "converged": sol.converged,
            "iterations": sol.iterations,
            "residual": sol.residual,
        })
    violations = []
    for k in range(1, len(densities)):
        bad = (densities[k - 1] - densities[k] > 1e-8) & mask
        violations.append(int(np.sum(bad)))
        records[k]["violations_vs_previous"] = violations[-1]
    if records:
        records[0]["violations_vs_previous"] = 0
    energies = [r["total_energy"] for r in records]
    summary = {
        "records": records,
        "energy_strictly_increasing": bool(all(b > a for a, b in zip(energies, energies[1:]))),
        "pointwise_violations": int(sum(violations)),
        "bracket_fit": fit_exponential(np.array(cfg.t[: len(records)]), np.array([r["bracket_sup"] for r in records])),
        "complete": error is None,
    }
    if error is not None:
        summary["error"] = str(error)

    def write(stage: io.ArtifactStage) -> None:
        keys = ["t", "total_energy", "bracket_sup", "energy_density_min", "violations_vs_previous", "converged",
                "iterations"]
        io.write_csv(stage.path("sweep.csv"), keys, [[r[k] for k in keys] for r in records])
        if records:
            io.write_svg_plot(stage.path("energy.svg"), [r["t"] for r in records], {"E(t)": energies},
                              xlabel="t", ylabel="total energy")

    if error is not None:
        raise _PartialFailure(summary, write, error)
    return summary, write


class _PartialFailure(Exception):
    def __init__(self, summary: dict[str, Any], write: Writer, cause: Exception):
        super().__init__(str(cause))
        self.summary = summary
        self.write = write


def decoupling_region(pb: Problem, radius: float | None = None, fraction: float | None = None) -> np.ndarray:
    """Inner region minus discs of ``radius`` (default 5 cells) around the discriminant.

    Raises if a discriminant node survives inside the region.
    """
    chart = pb.chart
    radius = 5 * chart.h if radius is None else radius
    region = chart.inner(pb.config.fraction if fraction is None else fraction).copy()
    ph = pb.phi.on(chart)
    _, disc = eigen_field(ph)
    centres: list[complex] = []
    zs = pb.phi.entries[0][pb.phi.n - 1].zeros()
    if zs is not None and not pb.phi.entries[0][pb.phi.n - 1].is_zero:
        centres += list(zs)
    for z0 in centres:
        region &= np.abs(chart.z - z0) >= radius
    if not np.any(region):
        raise ValueError("evaluation region is empty")
    if np.any(disc & region):
        n_bad = int(np.sum(disc & region))
        raise ValueError(
            f"{n_bad} discriminant nodes inside the evaluation region; enlarge the exclusion radius N0"
        )
    return region


def decoupling_rate(cfg: ExperimentConfig, workers: int = 1) -> tuple[dict[str, Any], Writer]:
    """Fit ``log s(t) = log C - eps t`` with ``s(t)`` the sup of ``||[t phi, (t phi)^*]||`` on the region."""
    pb = Problem.from_config(cfg)
    region = decoupling_region(pb, cfg.exclusion_radius)
    sols = pb.solve_many(cfg.t, workers)
    ts = np.array(cfg.t)
    s = []
    for sol in sols:
        geo = pb.geometry(sol)
        s.append(float(np.max(geo.bracket_norm[region])))
    s_arr = np.array(s)
    plain = s_arr / ts**2
    fit = fit_exponential(ts, s_arr)
    summary = {
        "t": list(cfg.t),
        "bracket_sup": s,
        "fit": fit,
        "unscaled_bracket_sup": plain.tolist(),
        "unscaled_fit": fit_exponential(ts, plain),
        "region_nodes": int(np.sum(region)),
        "converged": [sol.converged for sol in sols],
        "note": "bracket_sup(t) = sup ||[t phi, (t phi)^*]|| = t^2 sup ||[phi, phi^*_t]||; fit log s = log C - eps t",
    }

    def write(stage: io.ArtifactStage) -> None:
        io.write_csv(stage.path("decoupling.csv"), ["t", "bracket_sup", "unscaled_bracket_sup"], zip(cfg.t, s, plain))
        if fit["status"] != "exact decoupling" and min(s) > 0:
            io.write_svg_plot(stage.path("decoupling.svg"), list(cfg.t), {"s(t)": s}, xlabel="t",
                              ylabel="sup bracket norm", logy=True)

    return summary, write


def _interp_log_h(sol: Solution, z: complex) -> np.ndarray:
    chart = sol.system.chart
    ell = sol.log_h
    out = np.empty(ell.shape[0])
    for i, f in enumerate(ell):
        interp = RegularGridInterpolator((chart.y, chart.x), f, method="linear")
        out[i] = interp([[z.imag, z.real]])[0]
    return out


def wkb_report(cfg: ExperimentConfig, workers: int = 1) -> tuple[dict[str, Any], Writer]:
    """Compare ``(1/t) d(h_t(gamma(0)), h_t(gamma(1)))`` with ``2 alpha`` along the configured path."""
    pb = Problem.from_config(cfg)
    path = cfg.build_path()
    path.check_inside(pb.chart)
    pa = path_alpha(pb.phi, path)
    two_alpha = 2 * pa.alpha
    z0, z1 = complex(path.gamma(np.array(0.0))), complex(path.gamma(np.array(1.0)))
    rows = []
    for t, sol in zip(cfg.t, pb.solve_many(cfg.t, workers)):
        ha = np.diag(np.exp(_interp_log_h(sol, z0))).astype(complex)
        hb = np.diag(np.exp(_interp_log_h(sol, z1))).astype(complex)
        d = vec_distance(ha, hb) / t
        rows.append({"t": t, "d_over_t": d.tolist()})
    summary = {
        "label": EXPLORATORY,
        "alpha": pa.alpha.tolist(),
        "two_alpha_path_order": two_alpha.tolist(),
        "two_alpha_descending": np.sort(two_alpha)[::-1].tolist(),
        "min_real_gap": pa.min_real_gap,
        "rows": rows,
    }

    def write(stage: io.ArtifactStage) -> None:
        n = pb.phi.n
        header = ["t"] + [f"d{j + 1}_over_t" for j in range(n)] + [f"two_alpha{j + 1}" for j in range(n)] + [
            f"two_alpha_desc{j + 1}" for j in range(n)]
        table = [[r["t"], *r["d_over_t"], *summary["two_alpha_path_order"], *summary["two_alpha_descending"]]
                 for r in rows]
        io.write_csv(stage.path("wkb.csv"), header, table)

    return summary, write


def curvature_scan(cfg: ExperimentConfig, workers: int = 1) -> tuple[dict[str, Any], Writer]:
    """Interior extremes of sectional curvature and bracket size; optional random-sample check."""
    pb = Problem.from_config(cfg)
    records = []
    for t, sol in zip(cfg.t, pb.solve_many(cfg.t, workers)):
        geo = pb.geometry(sol)
        kmax, kloc = _minloc(geo.sectional, pb.inner, pb.chart, largest=True)
        bmin, bloc = _minloc(geo.bracket_norm, pb.inner, pb.chart)
        rec = {"t": t, "max_sectional": kmax, "max_sectional_at": [kloc.real, kloc.imag],
               "min_bracket_norm": bmin, "min_bracket_norm_at": [bloc.real, bloc.imag]}
        if geo.gaussian is not None:
            rec["max_gaussian"], _ = _minloc(geo.gaussian, pb.inner, pb.chart, largest=True)
        records.append(rec)
    summary: dict[str, Any] = {"label": EVIDENCE, "records": records}
    if cfg.random_samples:
        summary["random_samples"] = random_curvature_samples(pb.phi.n, cfg.random_samples, cfg.seed)

    def write(stage: io.ArtifactStage) -> None:
        keys = ["t", "max_sectional", "min_bracket_norm"]
        io.write_csv(stage.path("curvature.csv"), keys, [[r[k] for k in keys] for r in records])

    return summary, write


def random_pairs(n: int, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random traceless ``phi`` and positive-definite unit-determinant ``h``."""
    phi = rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))
    phi -= np.trace(phi, axis1=1, axis2=2)[:, None, None] * np.eye(n) / n
    a = rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))
    h = a @ np.conj(np.swapaxes(a, 1, 2)) + 0.1 * np.eye(n)
    h /= (np.linalg.det(h).real ** (1.0 / n))[:, None, None]
    return phi, h


def random_curvature_samples(n: int, count: int, seed: int) -> dict[str, Any]:
    rng = np.random.default_rng(seed)
    phi, h = random_pairs(n, count, rng)
    k = sectional_curvature(phi, h)
    ok = np.isfinite(k)
    return {"rank": n, "samples": count, "defined": int(ok.sum()), "max": float(np.max(k[ok])),
            "min": float(np.min(k[ok]))}


def domination_check(cfg: ExperimentConfig) -> tuple[dict[str, Any], Writer]:
    """Interior minimum of ``e(f) - (n^4 - n^2)/6``."""
    pb = Problem.from_config(cfg)
    sol = pb.solve()
    geo = pb.geometry(sol)
    base = fuchsian_energy(pb.phi.n)
    margin = geo.energy_density - base
    mmin, loc = _minloc(margin, pb.inner, pb.chart)
    corner_zero = pb.phi.entries[0][pb.phi.n - 1].is_zero
    summary = {
        "rank": pb.phi.n,
        "baseline": base,
        "min_energy_density": mmin + base,
        "min_margin": mmin,
        "min_margin_at": [loc.real, loc.imag],
        "equality_case": bool(corner_zero),
        "dominates": bool(mmin > 0 or (corner_zero and abs(mmin) <= 1e-7)),
    }

    def write(stage: io.ArtifactStage) -> None:
        io.write_field_snapshot(stage.path("energy_margin.txt"), pb.chart, margin)

    return summary, write


RUNNERS: dict[str, Callable[..., tuple[dict[str, Any], Writer]]] = {
    "solve": run_solve,
    "claims": run_claims,
    "sweep-t": sweep_scale,
    "decouple": decoupling_rate,
    "wkb": wkb_report,
    "curvature-scan": curvature_scan,
    "domination": domination_check,
}


def run(cfg: ExperimentConfig, out: str | Path | None = None) -> tuple[int, dict[str, Any]]:
    """Run one experiment and write its artifacts; returns ``(exit status, summary)``.

    Status 0 on success, 1 on a solver or precondition failure (a
    ``failure.json`` with the run metadata is written in that case).
    """
    out = out or cfg.out
    t0 = time.perf_counter()
    meta = {"kind": cfg.kind, "config": cfg.describe()}
    try:
        summary, write = RUNNERS[cfg.kind](cfg)
    except _PartialFailure as exc:
        summary = {**meta, **exc.summary, "status": "failed", "wall_time_s": time.perf_counter() - t0}
        if out:
            with io.ArtifactStage(out) as stage:
                exc.write(stage)
                io.write_json(stage.path("failure.json"), summary)
        return 1, summary
    except (SolverError, ValueError) as exc:
        summary = {**meta, "status": "failed", "error": str(exc), "wall_time_s": time.perf_counter() - t0}
        if isinstance(exc, SolverError):
            summary["residual_history"] = exc.history
        if out:
            with io.ArtifactStage(out) as stage:
                io.write_json(stage.path("failure.json"), summary)
        return 1, summary
    summary = {**meta, **summary, "status": "ok", "wall_time_s": time.perf_counter() - t0}
    if out:
        with io.ArtifactStage(out) as stage:
            write(stage)
            io.write_json(stage.path("summary.json"), summary)
    return 0, summary
