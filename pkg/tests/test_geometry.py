from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from higgslab.algebra import build_cyclic, build_hitchin_section, scale_action
from higgslab.chart import build_chart, conformal_norm_sq, d_dzbar, hyperbolic_factor
from higgslab.geometry import (
    energy_density,
    gaussian_curvature_conformal,
    geometry_report,
    hopf_differential,
    pullback_metric,
    sectional_curvature,
    total_energy,
)
from higgslab.solver import solve

from oracles import random_unitary, rank2_energy_scalar, rank3_energy_scalar


def _solved(chart, metric, phi, **kw):
    sol = solve(phi, chart, metric, **kw)
    assert sol.converged
    return sol, phi.on(chart), sol.metric_field.matrix


def _random_pairs(n, count, rng):
    phi = rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))
    phi -= (np.trace(phi, axis1=-2, axis2=-1) / n)[:, None, None] * np.eye(n)
    a = rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))
    h = a @ np.conj(np.swapaxes(a, -1, -2)) + 0.3 * np.eye(n)
    return phi, h


# ---------------------------------------------------------------- energy


def test_energy_fuchsian_constants(disk65):
    chart, metric = disk65
    inside = chart.interior
    _, ph, h = _solved(chart, metric, build_hitchin_section([0]))
    assert np.allclose(energy_density(ph, h, metric.factor)[inside], 2.0, rtol=1e-9)
    _, ph, h = _solved(chart, metric, build_hitchin_section([0, 0]))
    assert np.allclose(energy_density(ph, h, metric.factor)[inside], 12.0, rtol=1e-9)


def test_energy_matches_scalar_formulas(disk65):
    chart, metric = disk65
    sol, ph, h = _solved(chart, metric, build_hitchin_section([[0.1, 0.4]]))
    q = 0.1 + 0.4 * chart.z
    ref = rank2_energy_scalar(sol.scalar_u, conformal_norm_sq(q, 2, metric))
    assert np.max(np.abs(energy_density(ph, h, metric.factor) - ref)) <= 1e-10 * np.max(ref)
    sol, ph, h = _solved(chart, metric, build_hitchin_section([0, [0.2, 0, 0.5]]))
    q3 = 0.2 + 0.5 * chart.z**2
    ref = rank3_energy_scalar(sol.scalar_u, conformal_norm_sq(q3, 3, metric))
    assert np.max(np.abs(energy_density(ph, h, metric.factor) - ref)) <= 1e-10 * np.max(ref)
    assert np.allclose(sol.energy_density_scalar(), energy_density(ph, h, metric.factor), rtol=1e-12)


def test_total_energy_torus_constant(torus64):
    chart, metric = torus64
    _, ph, h = _solved(chart, metric, build_hitchin_section([0.7]))
    e = energy_density(ph, h, metric.factor)
    assert np.allclose(e, e.flat[0], rtol=1e-12)
    area = (chart.x1 - chart.x0) * (chart.y1 - chart.y0)
    assert total_energy(e, metric) == pytest.approx(e.flat[0] * 2 * area, rel=1e-12)


def test_total_energy_monotone_in_scale(disk65):
    chart, metric = disk65
    phi = build_hitchin_section([[0, 0.3]])
    es = []
    for t in (1.0, 2.0):
        _, ph, h = _solved(chart, metric, scale_action(t, phi))
        es.append(total_energy(energy_density(ph, h, metric.factor), metric))
    assert es[0] < es[1]


def test_total_energy_refinement():
    phi = build_hitchin_section([[0, 0.3]])
    es, hs = [], []
    for k in (33, 65, 129):
        chart = build_chart("disk", k, r_max=0.8)
        metric = hyperbolic_factor(chart)
        _, ph, h = _solved(chart, metric, phi)
        es.append(total_energy(energy_density(ph, h, metric.factor), metric))
        hs.append(chart.h)
    d1, d2 = abs(es[1] - es[0]), abs(es[2] - es[1])
    assert d2 < d1
    c = d1 / hs[1] ** 2
    assert d2 <= 1.5 * c * hs[2] ** 2


def test_energy_unitary_invariance(rng):
    for n in (2, 3, 4):
        phi, h = _random_pairs(n, 50, rng)
        u = np.stack([random_unitary(n, rng) for _ in range(50)])
        us = np.conj(np.swapaxes(u, -1, -2))
        e0 = energy_density(phi, h, 1.3)
        e1 = energy_density(u @ phi @ us, u @ h @ us, 1.3)
        assert np.allclose(e0, e1, rtol=1e-10)
        assert np.all(e0 >= 0)


# ---------------------------------------------------------------- Hopf and pullback


def test_hopf_examples(disk65):
    chart, _ = disk65
    z = chart.z
    ph = build_hitchin_section([[0.1, 0.3, 0.2]]).on(chart)
    assert np.allclose(hopf_differential(ph), 8 * (0.1 + 0.3 * z + 0.2 * z**2))
    corner_only = build_cyclic([0, 0, [0, 1]]).on(chart)
    assert np.allclose(hopf_differential(corner_only), 0)
    t = 1.5 * np.exp(0.4j)
    assert np.allclose(hopf_differential(t * ph), t**2 * hopf_differential(ph))


def test_hopf_discretely_holomorphic(disk65):
    chart, metric = disk65
    _, ph, _ = _solved(chart, metric, build_hitchin_section([[0.1, 0.3, 0.2]]))
    dbar = d_dzbar(hopf_differential(ph), chart)
    inside = chart.interior
    assert np.max(np.abs(dbar[inside])) <= 10 * chart.h**2


def test_pullback_rank2_components(disk65):
    chart, metric = disk65
    sol, ph, h = _solved(chart, metric, build_hitchin_section([[0, 0.3]]))
    p20, p11, p02, deg = pullback_metric(ph, h)
    q = 0.3 * chart.z
    assert np.allclose(p20, 8 * q) and np.allclose(p02, 8 * np.conj(q))
    ref = rank2_energy_scalar(sol.scalar_u, conformal_norm_sq(q, 2, metric)) * metric.factor
    assert np.allclose(p11, ref, rtol=1e-10)
    assert not deg[chart.interior].any()


def test_pullback_zero_field():
    ph = np.zeros((4, 4, 3, 3), dtype=complex)
    h = np.broadcast_to(np.eye(3), ph.shape)
    p20, p11, p02, deg = pullback_metric(ph, h)
    assert np.all(p20 == 0) and np.all(p11 == 0) and np.all(p02 == 0) and deg.all()


def test_pullback_conformal_mask(disk65):
    chart, metric = disk65
    # q = 0: phi vanishes nowhere, so no degenerate node
    _, ph, h = _solved(chart, metric, build_hitchin_section([0, 0]))
    p20, _, _, deg = pullback_metric(ph, h)
    assert np.all(p20 == 0) and not deg.any()


def test_pullback_semidefinite(rng):
    for n in (2, 3, 4, 5):
        phi, h = _random_pairs(n, 500, rng)
        p20, p11, _, _ = pullback_metric(phi, h)
        assert np.all(p11 >= 0)
        assert np.all(p11**2 - np.abs(p20) ** 2 >= -1e-12 * p11**2)


# ---------------------------------------------------------------- curvature


def test_sectional_rank2_constant(rng):
    phi, h = _random_pairs(2, 10_000, rng)
    k = sectional_curvature(phi, h)
    ok = np.isfinite(k)
    assert ok.mean() > 0.99
    assert np.allclose(k[ok], -0.5, atol=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sectional_nonpositive_random(n, rng):
    phi, h = _random_pairs(n, 10_000, rng)
    k = sectional_curvature(phi, h)
    assert np.nanmax(k) <= 1e-9


def test_sectional_normal_phi_is_flat(rng):
    d = np.diag([1.0 + 1j, -0.3 + 0.2j, -0.7 - 1.2j])
    u = random_unitary(3, rng)
    phi = u @ d @ np.conj(u.T)
    k = sectional_curvature(phi, np.eye(3))
    assert np.isfinite(k) and abs(k) <= 1e-12


def test_gaussian_curvature_fuchsian(disk65):
    chart, metric = disk65
    _, ph, h = _solved(chart, metric, build_hitchin_section([0]))
    p20, p11, _, _ = pullback_metric(ph, h)
    assert np.allclose(p11, 2 * metric.factor, rtol=1e-9)
    kappa = gaussian_curvature_conformal(p11, chart, p20)
    inner = chart.inner()
    assert np.allclose(kappa[inner], -0.5, atol=50 * chart.h**2)
    assert np.allclose(gaussian_curvature_conformal(3.0 * p11, chart)[inner], kappa[inner] / 3.0, rtol=1e-12)


def test_gaussian_curvature_blaschke_negative_and_below_sectional(disk65):
    chart, metric = disk65
    _, ph, h = _solved(chart, metric, build_hitchin_section([0, [0.3, 0.5]]))
    rep = geometry_report(build_hitchin_section([0, [0.3, 0.5]]), h, metric)
    assert rep.gaussian is not None
    inner = chart.inner()
    assert np.all(rep.gaussian[inner] < 0)
    ks = rep.sectional[inner]
    assert np.all(rep.gaussian[inner] <= ks + 50 * chart.h**2)
    summary = rep.summary()
    assert summary["degenerate_nodes"] == 0 and summary["gaussian_curvature"]["max"] < 0


def test_gaussian_curvature_rejects_non_conformal(disk65):
    chart, metric = disk65
    _, ph, h = _solved(chart, metric, build_hitchin_section([[0, 0.3]]))
    p20, p11, _, _ = pullback_metric(ph, h)
    with pytest.raises(ValueError, match="non-conformal"):
        gaussian_curvature_conformal(p11, chart, p20)
    rep = geometry_report(build_hitchin_section([[0, 0.3]]), h, metric)
    assert rep.gaussian is None and "gaussian_curvature" not in rep.fields()


def test_report_fields_and_summary(disk65):
    chart, metric = disk65
    phi = build_hitchin_section([[0, 0.3]])
    sol, _, h = _solved(chart, metric, phi)
    rep = geometry_report(phi, h, metric)
    for name, f in rep.fields().items():
        assert f.shape == chart.shape, name
    assert np.all(rep.energy_density >= 0)
    s = rep.summary()
    assert s["sectional_curvature"]["max"] <= 1e-9
    assert s["total_energy"] == pytest.approx(rep.total_energy)


@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_sectional_nonpositive_property(n, seed):
    phi, h = _random_pairs(n, 20, np.random.default_rng(seed))
    k = sectional_curvature(phi, h)
    assert np.all(~np.isfinite(k) | (k <= 1e-9))
