from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from higgslab import kernels
from higgslab.algebra import build_cyclic, build_hitchin_section, build_sp4_maximal
from higgslab.chart import build_chart, hyperbolic_factor, wirtinger_laplacian
from higgslab.solver import (
    SolverConfig,
    SolverError,
    assemble_cyclic,
    claims_margin,
    constant_oracle,
    cooperative_check,
    linearization_coefficients,
    pointwise_oracle,
    residual_matrix,
    solve,
    solve_newton,
    vk_coefficients,
)

from oracles import fuchsian_pairing_norms

ZEROS = SolverConfig(init="zeros")


# ---------------------------------------------------------------- assembly


def test_rank2_reduces_to_single_scalar_equation(disk65, rng):
    chart, metric = disk65
    q = 0.3 * chart.z + 0.1j
    sys_ = assemble_cyclic(build_hitchin_section([[0.1j, 0.3]]), chart, metric)
    assert sys_.symmetric and sys_.m == 1
    y = 0.2 * np.sin(3 * chart.z.real) * np.cos(2 * chart.z.imag)
    r, _ = sys_.residual(sys_.lift(y[None]))
    g0 = metric.factor
    scalar = wirtinger_laplacian(y, chart) - 0.5 * g0 + g0 * np.exp(-2 * y) - np.abs(q) ** 2 / g0 * np.exp(2 * y)
    inside = chart.interior
    assert np.allclose(r[0][inside], scalar[inside], rtol=1e-12, atol=1e-10)
    assert np.allclose(r[1][inside], -scalar[inside], rtol=1e-12, atol=1e-10)


def test_rank3_reduces_to_single_scalar_equation(disk65):
    chart, metric = disk65
    q3 = chart.z**2 - 0.2
    sys_ = assemble_cyclic(build_hitchin_section([0, [-0.2, 0, 1]]), chart, metric)
    assert sys_.symmetric and sys_.m == 1
    y = 0.3 * np.cos(chart.z.real + 2 * chart.z.imag)
    u = sys_.lift(y[None])
    assert np.allclose(u[1], 0)
    r, _ = sys_.residual(u)
    g0 = metric.factor
    scalar = wirtinger_laplacian(y, chart) - g0 + g0 * np.exp(-y) - np.abs(q3) ** 2 / g0**2 * np.exp(2 * y)
    inside = chart.interior
    assert np.allclose(r[0][inside], scalar[inside], rtol=1e-12, atol=1e-10)


def test_rank4_real_cyclic_has_two_unknowns(disk65):
    chart, metric = disk65
    sys_ = assemble_cyclic(build_hitchin_section([0, 0, 0.5]), chart, metric)
    assert sys_.symmetric and sys_.m == 2
    off = assemble_cyclic(build_hitchin_section([0, 0, 0.5]), chart, metric, symmetry="off")
    assert not off.symmetric and off.m == 3


def test_non_cyclic_input_rejected(disk65):
    chart, metric = disk65
    with pytest.raises(ValueError, match="non-cyclic"):
        assemble_cyclic(build_hitchin_section([1, 1]), chart, metric)
    with pytest.raises(ValueError, match="non-cyclic"):
        assemble_cyclic(build_sp4_maximal(1, 1, 1), chart, metric)


def test_symmetry_on_rejects_asymmetric_data(disk65):
    chart, metric = disk65
    with pytest.raises(ValueError, match="not symmetric"):
        assemble_cyclic(build_cyclic([1, 2, 0.5]), chart, metric, symmetry="on")


def test_boundary_options(disk65):
    chart, metric = disk65
    phi = build_hitchin_section([[0, 0.3]])
    for bc in ("fuchsian", "local", "decoupled", [0.2, -0.2]):
        assert assemble_cyclic(phi, chart, metric, bc).boundary is not None
    with pytest.raises(ValueError, match="sum to zero"):
        assemble_cyclic(phi, chart, metric, [0.2, 0.1])
    with pytest.raises(ValueError, match="unknown boundary"):
        assemble_cyclic(phi, chart, metric, "neumann")


def test_jacobian_cooperative_sign_pattern(disk65, torus64):
    # columns of the zeroth-order coefficient matrix: J applied to a constant unit field
    for chart, metric, phi in (
        (*disk65, build_hitchin_section([0, 0, [0.3, 0.5]])),
        (*torus64, build_cyclic([1, 0.5, 2, 0.3])),
    ):
        sys_ = assemble_cyclic(phi, chart, metric, symmetry="off")
        u = pointwise_oracle(sys_.coupling, sys_.weights, sys_.kappa0)
        _, e = sys_.residual(np.nan_to_num(u))
        n = sys_.n
        c = np.empty((n, n) + chart.shape)
        for j in range(n):
            v = np.zeros((n,) + chart.shape)
            v[j] = 1.0
            c[:, j] = kernels.toda_jvp(e, v, 1.0 / chart.hx**2, 1.0 / chart.hy**2, chart.periodic)
        inside = chart.interior
        off = ~np.eye(n, dtype=bool)
        assert np.all(c[off][:, inside] >= 0)
        assert np.allclose(c.sum(axis=0)[:, inside], 0, atol=1e-9 * np.abs(c).max())


# ---------------------------------------------------------------- oracles


def test_constant_oracle_examples():
    # rank 2 torus, q = c: h1 = |c|^{-1/2}
    c = 0.7
    u = constant_oracle(np.array([1.0, c**2]), np.array([0.5, -0.5]), 0.0)
    assert np.isclose(np.exp(u[0]), c**-0.5, rtol=1e-14)
    # rank 2 hyperbolic q = 0: e^{-2u} = 1/2
    u = constant_oracle(np.array([1.0, 0.0]), np.array([0.5, -0.5]), 1.0)
    assert np.isclose(np.exp(-2 * u[0]), 0.5, rtol=1e-14)
    # rank 3 hyperbolic q = 0: e^{-u} = 1
    u = constant_oracle(np.array([1.0, 1.0, 0.0]), np.array([1.0, 0.0, -1.0]), 1.0)
    assert np.allclose(u, 0, atol=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_constant_oracle_fuchsian_norms(n):
    w = np.array([(n + 1 - 2 * i) / 2 for i in range(1, n + 1)])
    a = np.ones(n)
    a[-1] = 0.0
    u = constant_oracle(a, w, 1.0)
    x = a * np.exp(np.roll(u, -1) - u)
    assert np.allclose(x[:-1], fuchsian_pairing_norms(n), rtol=1e-13)
    e = 2 * n * x.sum()
    assert np.isclose(e, (n**4 - n**2) / 6, rtol=1e-13)


def test_constant_oracle_failures():
    with pytest.raises(SolverError, match="no positive solution"):
        constant_oracle(np.array([0.0, 1.0]), np.array([0.5, -0.5]), 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        constant_oracle(np.array([1.0, -1.0]), np.array([0.5, -0.5]), 1.0)


def test_pointwise_oracle_matches_constant(rng):
    a = rng.uniform(0.2, 2.0, size=(4, 7))
    w = np.array([1.5, 0.5, -0.5, -1.5])
    u = pointwise_oracle(a, w, 1.0)
    for k in range(a.shape[1]):
        assert np.allclose(u[:, k], constant_oracle(a[:, k], w, 1.0), atol=1e-12)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
    with pytest.raises(ValueError):
        SolverConfig(linear_solver="gmres")


# ---------------------------------------------------------------- solves


def test_rank2_fuchsian_from_zeros(disk65):
    chart, metric = disk65
    sol = solve(build_hitchin_section([0]), chart, metric, config=ZEROS)
    assert sol.converged and sol.residual <= 1e-10
    assert np.allclose(sol.scalar_u, 0.5 * np.log(2), atol=1e-9)
    assert np.all(np.diff(sol.history) < 0)


def test_rank3_fuchsian_from_zeros(disk65):
    chart, metric = disk65
    sol = solve(build_hitchin_section([0, [0.0]]), chart, metric, bc=[0.0, 0.0, 0.0], config=ZEROS)
    assert sol.converged
    assert np.max(np.abs(sol.scalar_u)) <= 1e-9


def test_torus_constant_rank2(torus64):
    chart, metric = torus64
    c = 0.7
    sol = solve(build_hitchin_section([c]), chart, metric, config=ZEROS)
    assert sol.converged and sol.residual <= 1e-12
    assert np.allclose(sol.h_diag[0], c**-0.5, rtol=1e-12)
    sup, _ = residual_matrix(sol)
    assert sup <= 1e-10


def test_rank4_fuchsian_energy(disk65):
    chart, metric = disk65
    sol = solve(build_hitchin_section([0, 0, 0], 4, normalization="r"), chart, metric, config=ZEROS)
    e = sol.energy_density_scalar()
    assert np.allclose(e[chart.interior], 40.0, rtol=1e-9)


def test_symmetry_off_preserves_real_cyclic_structure(disk65):
    chart, metric = disk65
    sol = solve(build_hitchin_section([0, 0, [0.2, 0.4]]), chart, metric, config=SolverConfig(symmetry="off"))
    assert sol.converged and not sol.system.symmetric
    ell = sol.log_h
    assert np.max(np.abs(ell + ell[::-1])) <= 1e-8
    assert np.max(np.abs(ell.sum(axis=0))) <= 1e-12


def test_history_strictly_decreasing(disk65):
    chart, metric = disk65
    for phi in (build_hitchin_section([[0, 0.8]]), build_hitchin_section([0, 0, [0.5, 0, 0.5]])):
        sol = solve(phi, chart, metric, config=ZEROS)
        assert sol.converged and len(sol.history) >= 3
        assert np.all(np.diff(sol.history) < 0)
        assert all(0 < s <= 1 for s in sol.steps)


def test_direct_and_iterative_linear_solves_agree(disk65):
    chart, metric = disk65
    phi = build_hitchin_section([[0, 0.3]])
    a = solve(phi, chart, metric, config=SolverConfig(init="zeros", linear_solver="cg"))
    b = solve(phi, chart, metric, config=SolverConfig(init="zeros", linear_solver="direct"))
    assert np.max(np.abs(a.u - b.u)) <= 1e-10


def test_non_convergence_reports_history(disk65):
    chart, metric = disk65
    with pytest.raises(SolverError, match="no convergence") as exc:
        solve(build_hitchin_section([[0, 0.3]]), chart, metric, config=SolverConfig(init="zeros", max_iter=1))
    assert len(exc.value.history) >= 1


def test_explicit_initial_guess_shape_checked(disk65):
    chart, metric = disk65
    sys_ = assemble_cyclic(build_hitchin_section([0]), chart, metric)
    with pytest.raises(ValueError, match="wrong shape"):
        solve_newton(sys_, SolverConfig(), init=np.zeros((3,) + chart.shape))


def _solve_on(n_grid: int, phi):
    chart = build_chart("disk", n_grid, r_max=0.8)
    return solve(phi, chart, hyperbolic_factor(chart))


def test_grid_refinement_second_order():
    phi = build_hitchin_section([[0, 0.3]])
    us = [_solve_on(k, phi).scalar_u for k in (33, 65, 129)]
    e1 = np.max(np.abs(us[0] - us[1][::2, ::2]))
    e2 = np.max(np.abs(us[1] - us[2][::2, ::2]))
    assert np.log2(e1 / e2) >= 1.7


def test_matrix_residual_scales_like_h2_and_detects_perturbation(rng):
    phi = build_hitchin_section([[0, 0.3]])
    sups = []
    for k in (65, 129):
        sol = _solve_on(k, phi)
        _, f = residual_matrix(sol)
        inner = sol.system.chart.inner()
        sups.append(np.max(np.abs(f[inner])))
    assert np.log2(sups[0] / sups[1]) >= 1.5
    # constant implied by the refinement pair predicts the finer residual
    h = [2 * 0.8 / np.sqrt(2) / (k - 1) for k in (65, 129)]
    c_est = sups[0] / h[0] ** 2
    assert sups[1] <= 1.2 * c_est * h[1] ** 2
    noise = rng.normal(size=sol.u.shape)
    noise -= noise.mean(axis=0)
    bad = replace(sol, u=sol.u + 0.1 * noise)
    assert residual_matrix(bad)[0] >= 10 * residual_matrix(sol)[0]


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_matrix_residual_constant_stable_across_ranks(n):
    qs = [0] * (n - 2) + [[0.3, 0.2]]
    ratios = []
    for k in (33, 65):
        sol = _solve_on(k, build_hitchin_section(qs, n))
        inner = sol.system.chart.inner()
        ratios.append(np.max(np.abs(residual_matrix(sol)[1][inner])) / sol.system.chart.h ** 2)
    assert 0.5 <= ratios[1] / ratios[0] <= 2.0


# ---------------------------------------------------------------- maximum principle


def test_cooperative_check_rank6_solution(disk65):
    chart, metric = disk65
    sol = solve(build_hitchin_section([0, 0, 0, 0, 0.5], 6, normalization="r"), chart, metric)
    coeffs = linearization_coefficients(sol)
    c = coeffs["c"][:, chart.inner()]
    rep = cooperative_check(vk_coefficients(c))
    assert rep.cooperative and rep.column_dominant and rep.fully_coupled and rep.all_hold


def test_cooperative_check_artificial_failures():
    block = np.array([[-2.0, 1.0, 0, 0], [1.0, -2.0, 0, 0], [0, 0, -2.0, 1.0], [0, 0, 1.0, -2.0]])
    rep = cooperative_check(block)
    assert rep.cooperative and rep.column_dominant and not rep.fully_coupled
    pos = np.array([[-1.0, 2.0], [2.0, -1.0]])
    rep = cooperative_check(pos)
    assert rep.cooperative and not rep.column_dominant and rep.max_column_sum == pytest.approx(1.0)
    neg = np.array([[-2.0, -0.5], [1.0, -2.0]])
    assert not cooperative_check(neg).cooperative
    with pytest.raises(ValueError, match="square"):
        cooperative_check(np.zeros((2, 3)))


def test_vk_coefficients_structure():
    c = np.array([1.0, 2.0, 3.0])
    m = vk_coefficients(c)
    assert np.allclose(m, [[-3, 2, 0], [1, -4, 3], [0, 2, -9]])
    assert np.allclose(vk_coefficients(np.array([1.5])), [[-6.0]])
    # column sums are nonpositive for positive c
    assert np.all(m.sum(axis=0) <= 0)


def test_linearization_requires_even_rank(disk65):
    chart, metric = disk65
    sol = solve(build_hitchin_section([0, 0]), chart, metric)
    with pytest.raises(ValueError, match="even rank"):
        linearization_coefficients(sol)


# ---------------------------------------------------------------- claims


def test_claims_rank2_degenerate_q0(disk65):
    chart, metric = disk65
    rep = claims_margin(solve(build_hitchin_section([0]), chart, metric))
    assert rep.degenerate and any(s.startswith("degenerate: q=0") for s in rep.notes)
    assert abs(rep.minima["i"]) <= 1e-9
    inner = chart.inner()
    assert np.max(np.abs(rep.margins["i"][inner])) <= 1e-9


def test_claims_rank2_linear_q(disk65):
    chart, metric = disk65
    rep = claims_margin(solve(build_hitchin_section([[0, 0.3]]), chart, metric))
    assert rep.strict and not rep.degenerate
    assert rep.excluded_nodes > 0  # zero of q at the origin


def test_claims_rank4_chain(disk65):
    chart, metric = disk65
    rep = claims_margin(solve(build_hitchin_section([0, 0, 0.5], 4, normalization="r"), chart, metric))
    assert set(rep.minima) == {"chain_0", "chain_1"} and rep.strict


def test_claims_undefined_rank(disk65):
    chart, metric = disk65
    sol = solve(build_hitchin_section([0, 0, 0, 0]), chart, metric)
    with pytest.raises(ValueError, match="without a defined claim"):
        claims_margin(sol)
