from __future__ import annotations

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from higgslab.algebra import build_cyclic, hitchin_weights
from higgslab.chart import build_chart
from higgslab.experiments import fit_exponential
from higgslab.io import format_field_snapshot
from higgslab.solver import constant_oracle, pointwise_oracle

seeds = st.integers(0, 2**31 - 1)
ranks = st.integers(2, 6)


def _algebraic_residual(u, a, w, kappa0):
    e = a * np.exp(np.roll(u, -1, 0) - u)
    return -w * kappa0 + e - np.roll(e, 1, 0)


@given(ranks, seeds, st.sampled_from([0.0, 1.0]))
def test_constant_oracle_solves_algebraic_system(n, seed, kappa0):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.05, 5.0, size=n)
    w = np.array(hitchin_weights(n))
    u = constant_oracle(a, w, kappa0)
    assert abs(u.sum()) <= 1e-12
    assert np.max(np.abs(_algebraic_residual(u, a, w, kappa0))) <= 1e-10 * max(1.0, a.max())


@given(ranks, seeds)
def test_pointwise_oracle_vectorizes_constant_oracle(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.05, 5.0, size=(n, 5))
    w = np.array(hitchin_weights(n))
    u = pointwise_oracle(a, w, 1.0)
    for k in range(5):
        assert np.allclose(u[:, k], constant_oracle(a[:, k], w, 1.0), atol=1e-10)


@given(ranks, seeds)
def test_flat_oracle_equalizes_pairing_norms(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.05, 5.0, size=n)
    u = constant_oracle(a, np.array(hitchin_weights(n)), 0.0)
    x = a * np.exp(np.roll(u, -1) - u)
    assert np.allclose(x, np.exp(np.mean(np.log(a))), rtol=1e-12)


@given(ranks, seeds, st.floats(0.1, 10.0))
def test_phase_and_scale_of_cyclic_couplings(n, seed, t):
    # |t gamma_i|^2 = t^2 |gamma_i|^2: the flat constant solution is scale invariant
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.2, 2.0, size=n) * np.exp(1j * rng.uniform(0, 6.28, size=n))
    w = np.array(hitchin_weights(n))
    u1 = constant_oracle(np.abs(g) ** 2, w, 0.0)
    u2 = constant_oracle(np.abs(t * g * np.exp(0.3j)) ** 2, w, 0.0)
    assert np.allclose(u1, u2, atol=1e-10)
    assert build_cyclic(list(g)).is_cyclic_shape()


@given(st.floats(0.05, 3.0), st.floats(0.1, 100.0), st.integers(2, 12))
def test_fit_recovers_exact_exponentials(eps, c, k):
    t = np.linspace(1.0, 8.0, k)
    f = fit_exponential(t, c * np.exp(-eps * t))
    assert abs(f["eps"] - eps) <= 1e-8 and abs(f["C"] / c - 1) <= 1e-8 and f["status"] == "decaying"


@given(seeds)
def test_snapshot_text_is_stable(seed):
    chart = build_chart("torus", 9)
    f = np.random.default_rng(seed).normal(size=chart.shape)
    a = format_field_snapshot(chart, f)
    assert a == format_field_snapshot(chart, f.copy())
    rows = a.splitlines()
    assert len(rows) == 1 + 81
    assert np.allclose([float(r.split()[2]) for r in rows[1:]], f.ravel(), rtol=0, atol=0)
