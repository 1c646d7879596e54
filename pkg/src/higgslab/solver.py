"""Damped Newton solver for the Hitchin equation of cyclic Higgs bundles.

For a cyclic Higgs field the harmonic metric is diagonal, ``h = diag(h_i)``.
Writing ``h_i = g0^{-w_i} e^{u_i}`` (``w_i`` the line-bundle weights) the
Hitchin equation becomes the Toda-type system

    lap(u_i)/4 - w_i K0 + E_i - E_{i-1} = 0,    E_i = g0 a_i exp(u_{i+1} - u_i),

with cyclic indices, ``a_i = |gamma_i|^2 g0^{w_i - w_{i+1} - 1}`` and
``K0 = d_zbar d_z log g0`` (``g0`` on the hyperbolic disk, ``0`` when flat).
Dividing the residual by ``g0`` gives the invariant form
``Lap_g0 u_i - w_i kappa0 + a_i e^{u_{i+1}-u_i} - a_{i-1} e^{u_i-u_{i-1}}``
whose sup-norm is the convergence measure.

The unknowns are reduced by a constant matrix ``P`` (``u = P y``) that
enforces ``sum u_i = 0`` and, for real-cyclic data, ``u_{n+1-i} = -u_i``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, cg, splu

from . import kernels
from .algebra import HermitianMetric, HiggsField, adjoint_higgs, bracket
from .chart import BackgroundMetric, Chart, d_dz, d_dzbar

__all__ = [
    "SolverConfig",
    "SolverError",
    "TodaSystem",
    "Solution",
    "assemble_cyclic",
    "solve_newton",
    "solve",
    "constant_oracle",
    "pointwise_oracle",
    "residual_matrix",
    "linearization_coefficients",
    "vk_coefficients",
    "cooperative_check",
    "CooperativeReport",
    "claims_margin",
    "ClaimsReport",
]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Newton failure; carries the residual history and, if known, a node index."""

    def __init__(self, message: str, history: list[float] | None = None, node: tuple[int, ...] | None = None):
        super().__init__(message)
        self.history = list(history or [])
        self.node = node


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 50
    min_step: float = 2.0**-20
    linear_solver: Literal["cg", "direct"] = "cg"
    linear_rtol: float = 1e-3
    linear_maxiter: int = 5000
    symmetry: Literal["auto", "on", "off"] = "auto"
    init: Literal["oracle", "zeros"] = "oracle"

    def __post_init__(self) -> None:
        if not (self.tol > 0 and self.linear_rtol > 0 and self.min_step > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.linear_solver not in ("cg", "direct"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        if self.symmetry not in ("auto", "on", "off"):
            raise ValueError(f"unknown symmetry mode {self.symmetry!r}")
        if self.init not in ("oracle", "zeros"):
            raise ValueError(f"unknown initial guess {self.init!r}")


# ----------------------------------------------------------------------------
# Algebraic (Laplacian-free) solutions


def _partial_sums(weights: np.ndarray, kappa0: float) -> np.ndarray:
    # s_i = kappa0 * (w_1 + ... + w_i); s_n = 0
    s = kappa0 * np.cumsum(weights)
    s[-1] = 0.0
    return s


def _diffs_to_u(d: np.ndarray) -> np.ndarray:
    """Integrate cyclic differences ``d_i = u_{i+1} - u_i`` to ``u`` with ``sum u = 0``."""
    n = d.shape[0]
    u = np.zeros(d.shape)
    for i in range(1, n):
        u[i] = u[i - 1] + d[i - 1]
    return u - u.mean(axis=0, keepdims=True)


def constant_oracle(a: np.ndarray, weights: np.ndarray, kappa0: float) -> np.ndarray:
    """Exact constant solution of the Laplacian-free system.

    Solves ``-w_i kappa0 + x_i - x_{i-1} = 0`` with ``x_i = a_i e^{u_{i+1}-u_i}``
    and ``sum u_i = 0``.  The chain gives ``x_i = x_n + s_i``; ``x_n`` is fixed
    by ``sum_i log(x_i / a_i) = 0`` (a monotone scalar equation).

    Parameters
    ----------
    a : (n,) nonnegative couplings ``a_1..a_n`` (``a_n`` the corner).
    weights : (n,) line-bundle weights, summing to zero.
    kappa0 : ``1`` for the hyperbolic metric, ``0`` for a flat one.

    Returns
    -------
    u : (n,) array.
    """
    a = np.asarray(a, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = a.size
    if np.any(a < 0):
        raise ValueError("couplings must be nonnegative")
    if np.any(a[:-1] == 0):
        raise SolverError("no positive solution: a subdiagonal coupling vanishes")
    s = _partial_sums(w, kappa0)
    if a[-1] == 0:
        x = s.copy()
        if np.any(x[:-1] <= 0):
            raise SolverError("no positive solution: nilpotent data needs positive partial weight sums")
        d = np.empty(n)
        d[:-1] = np.log(x[:-1] / a[:-1])
        d[-1] = -np.sum(d[:-1])
    else:
        lo = max(0.0, float(np.max(-s)))
        la = np.log(a)

        def g(tau: float) -> float:
            return float(np.sum(np.log(lo + np.exp(tau) + s) - la))

        t0, t1 = -50.0, 50.0
        while g(t0) > 0:
            t0 -= 50.0
        while g(t1) < 0:
            t1 += 50.0
        tau = brentq(g, t0, t1, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        x = lo + np.exp(tau) + s
        if np.any(x <= 0):
            raise SolverError("no positive solution of the algebraic system")
        d = np.log(x / a)
    return _diffs_to_u(d)


def pointwise_oracle(a: np.ndarray, weights: np.ndarray, kappa0: float, *, nilpotent: bool = False) -> np.ndarray:
    """Nodewise algebraic solution; ``a`` has shape ``(n, ...)``.

    With ``nilpotent=True`` the corner coupling is dropped (``a_n := 0``),
    which yields the Fuchsian values.  Nodes with no positive solution are NaN.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    s = _partial_sums(np.asarray(weights, dtype=float), kappa0).reshape((n,) + (1,) * (a.ndim - 1))
    corner0 = np.full(a.shape[1:], True) if nilpotent else (a[-1] == 0)
    d = np.full(a.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        dn = np.log(s[:-1] / a[:-1])
        d[:-1] = np.where(corner0, dn, np.nan)
        d[-1] = np.where(corner0, -np.sum(dn, axis=0), np.nan)
        rest = ~corner0
        if np.any(rest):
            ar = a[:, rest]
            if kappa0 == 0:
                d[:, rest] = np.mean(np.log(ar), axis=0)[None] - np.log(ar)
            else:
                d[:, rest] = _pointwise_root(ar, s.reshape(n, 1))
    with np.errstate(invalid="ignore"):
        u = _diffs_to_u(d)
    return np.where(np.isfinite(u), u, np.nan)


def _pointwise_root(a: np.ndarray, s: np.ndarray) -> np.ndarray:
    # Safeguarded Newton on tau = log(x_n - lo), all nodes at once; a has shape (n, M)
    lo = max(0.0, float(np.max(-s)))
    la = np.log(a)
    tau = np.zeros(a.shape[1])
    left = np.full(tau.shape, -60.0)
    right = np.full(tau.shape, 60.0)
    for _ in range(200):
        x = lo + np.exp(tau)[None] + s
        g = np.sum(np.log(x) - la, axis=0)
        dg = np.sum(np.exp(tau)[None] / x, axis=0)
        left = np.where(g < 0, tau, left)
        right = np.where(g > 0, tau, right)
        step = tau - g / dg
        bad = ~np.isfinite(step) | (step <= left) | (step >= right)
        new = np.where(bad, 0.5 * (left + right), step)
        done = np.all(np.abs(new - tau) <= 1e-15 * np.maximum(1.0, np.abs(tau)))
        tau = new
        if done:
            break
    x = lo + np.exp(tau)[None] + s
    return np.log(x / a)


# ----------------------------------------------------------------------------
# System assembly


@dataclass
class TodaSystem:
    """Discrete Toda system for one cyclic Higgs field on one chart."""

    phi: HiggsField
    chart: Chart
    metric: BackgroundMetric
    weights: np.ndarray
    coupling: np.ndarray  # a_i, shape (n, ny, nx)
    boundary: np.ndarray | None  # u on Dirichlet nodes, shape (n, ny, nx)
    symmetric: bool
    projector: np.ndarray  # P, shape (n, K)
    kappa0: float

    @property
    def n(self) -> int:
        return self.coupling.shape[0]

    @property
    def m(self) -> int:
        """Number of independent unknown fields."""
        return self.projector.shape[1]

    @property
    def ga(self) -> np.ndarray:
        return np.ascontiguousarray(self.metric.factor[None] * self.coupling)

    @property
    def wk(self) -> np.ndarray:
        return np.ascontiguousarray(self.weights[:, None, None] * self.metric.curvature_term[None])

    def residual(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c = self.chart
        return kernels.toda_residual(
            np.ascontiguousarray(u), self.ga, self.wk, 1.0 / c.hx**2, 1.0 / c.hy**2, c.periodic
        )

    def residual_sup(self, r: np.ndarray) -> float:
        """Sup over equation nodes of ``|R| / g0``."""
        return float(np.max(np.abs(r / self.metric.factor[None])[:, self.chart.interior]))

    def lift(self, y: np.ndarray) -> np.ndarray:
        return np.einsum("ik,k...->i...", self.projector, y)

    def restrict(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("ki,k...->i...", self.projector, u)

    def coordinates(self, u: np.ndarray) -> np.ndarray:
        """Least-squares ``y`` with ``P y ~ u``."""
        return np.einsum("ki,i...->k...", np.linalg.pinv(self.projector), u)


def _reduction_matrix(n: int, symmetric: bool) -> np.ndarray:
    if symmetric:
        m = n // 2
        p = np.zeros((n, m))
        for k in range(m):
            p[k, k] = 1.0
            p[n - 1 - k, k] = -1.0
        return p
    p = np.zeros((n, n - 1))
    for k in range(n - 1):
        p[k, k] = 1.0
        p[n - 1, k] = -1.0
    return p


def _is_symmetric(w: np.ndarray, a: np.ndarray, boundary: np.ndarray | None) -> bool:
    n = w.size
    if not np.allclose(w, -w[::-1], rtol=0, atol=1e-14):
        return False
    for k in range(n - 1):  # a_{k+1} = a_{n-1-k}
        if not np.allclose(a[k], a[n - 2 - k], rtol=1e-13, atol=0):
            return False
    if boundary is not None and not np.allclose(boundary, -boundary[::-1], rtol=0, atol=1e-13):
        return False
    return True


def _coupling(phi: HiggsField, chart: Chart, metric: BackgroundMetric, w: np.ndarray) -> np.ndarray:
    n = phi.n
    g0 = metric.factor
    z = chart.z
    a = np.empty((n,) + chart.shape)
    for i, gam in enumerate(phi.gammas):
        expo = w[i] - w[(i + 1) % n] - 1.0
        a[i] = np.abs(gam(z)) ** 2 * g0**expo
    return a


def assemble_cyclic(
    phi: HiggsField,
    chart: Chart,
    metric: BackgroundMetric,
    bc: Any = None,
    *,
    symmetry: Literal["auto", "on", "off"] = "auto",
) -> TodaSystem:
    """Assemble the Toda system of a cyclic Higgs field.

    ``bc`` (disk charts only): ``None`` (Fuchsian values on hyperbolic
    disks, local algebraic values on flat ones), ``"fuchsian"`` (corner
    dropped), ``"local"`` (Laplacian dropped), ``"decoupled"`` (all pairing
    norms equal, so the bracket vanishes on the boundary), a length-``n``
    sequence of constant ``u`` values, or an ``(n, ny, nx)`` array.
    """
    if metric.chart is not chart and metric.chart != chart:
        raise ValueError("metric lives on a different chart")
    if not phi.is_cyclic_shape():
        raise ValueError("non-cyclic Higgs field: entries off the subdiagonal and corner")
    n = phi.n
    w = np.asarray(phi.weights if phi.weights is not None else [(n + 1 - 2 * i) / 2 for i in range(1, n + 1)])
    kappa0 = 1.0 if metric.kind == "hyperbolic" else 0.0
    a = _coupling(phi, chart, metric, w)
    boundary = None
    if not chart.periodic:
        boundary = _boundary_values(bc, a, w, kappa0, chart)
    if symmetry == "off":
        symmetric = False
    else:
        symmetric = n >= 2 and _is_symmetric(w, a, boundary)
        if symmetry == "on" and not symmetric:
            raise ValueError("real-cyclic symmetry requested but data are not symmetric")
    return TodaSystem(phi, chart, metric, w, a, boundary, symmetric, _reduction_matrix(n, symmetric), kappa0)


def _boundary_values(bc: Any, a: np.ndarray, w: np.ndarray, kappa0: float, chart: Chart) -> np.ndarray:
    n = a.shape[0]
    if bc is None:
        bc = "fuchsian" if kappa0 > 0 else "local"
    if isinstance(bc, str):
        if bc not in ("fuchsian", "local", "decoupled"):
            raise ValueError(f"unknown boundary condition {bc!r}")
        if bc == "decoupled":
            u = pointwise_oracle(a, w, 0.0)
        else:
            u = pointwise_oracle(a, w, kappa0, nilpotent=(bc == "fuchsian"))
        edge = ~chart.interior
        if not np.all(np.isfinite(u[:, edge])):
            raise ValueError(f"boundary condition {bc!r} has no positive solution on the boundary")
        return np.where(np.isfinite(u), u, 0.0)
    arr = np.asarray(bc, dtype=float)
    if arr.shape == (n,):
        if abs(arr.sum()) > 1e-12:
            raise ValueError("boundary values must sum to zero (unit determinant)")
        return np.broadcast_to(arr[:, None, None], a.shape).copy()
    if arr.shape == a.shape:
        return arr.copy()
    raise ValueError(f"boundary data of shape {arr.shape} do not match rank {n}")


# ----------------------------------------------------------------------------
# Solutions


@dataclass
class Solution:
    system: TodaSystem
    u: np.ndarray
    history: list[float]
    steps: list[float]
    converged: bool
    iterations: int
    residual: float
    wall_time: float
    linear_iterations: list[int] = field(default_factory=list)

    @property
    def log_h(self) -> np.ndarray:
        """``ell_i = log h_i``."""
        w = self.system.weights[:, None, None]
        return self.u - w * self.system.metric.log_factor[None]

    @property
    def h_diag(self) -> np.ndarray:
        return np.exp(self.log_h)

    @property
    def metric_field(self) -> HermitianMetric:
        return HermitianMetric(diagonal=self.h_diag)

    @property
    def scalar_u(self) -> np.ndarray:
        """The single scalar ``u`` of the rank-2 and rank-3 reductions (``u_1``)."""
        return self.u[0]

    def pairing_norms(self) -> np.ndarray:
        """``||gamma_i||^2 = |gamma_i|^2 h_i^{-1} h_{i+1} / g0 = a_i e^{u_{i+1}-u_i}``."""
        return self.system.coupling * np.exp(np.roll(self.u, -1, 0) - self.u)

    def energy_density_scalar(self) -> np.ndarray:
        """``e(f) = 2n sum ||gamma_i||^2`` from the scalar fields alone."""
        return 2 * self.system.n * np.sum(self.pairing_norms(), axis=0)

    def summary(self) -> dict[str, Any]:
        mask = self.system.chart.inner()
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "residual_history": self.history,
            "step_lengths": self.steps,
            "linear_iterations": self.linear_iterations,
            "wall_time_s": self.wall_time,
            "symmetric_reduction": self.system.symmetric,
            "unknown_fields": self.system.m,
            "u_min": [float(np.min(x[mask])) for x in self.u],
            "u_max": [float(np.max(x[mask])) for x in self.u],
            "backend": kernels.BACKEND,
        }


def _initial_u(system: TodaSystem, init: str | np.ndarray) -> np.ndarray:
    shape = system.coupling.shape
    if isinstance(init, np.ndarray):
        u = np.array(init, dtype=float)
        if u.shape != shape:
            raise ValueError("initial guess has the wrong shape")
    elif init == "zeros":
        u = np.zeros(shape)
    else:
        u = pointwise_oracle(system.coupling, system.weights, system.kappa0)
        u = np.where(np.isfinite(u), u, 0.0)
    if system.boundary is not None:
        edge = ~system.chart.interior
        u[:, edge] = system.boundary[:, edge]
    return system.lift(system.coordinates(u))


class _Newton:
    """Linear algebra of one Newton step in reduced coordinates."""

    def __init__(self, system: TodaSystem, e: np.ndarray):
        self.s = system
        self.e = np.ascontiguousarray(e)
        c = system.chart
        self.ihx2, self.ihy2 = 1.0 / c.hx**2, 1.0 / c.hy**2
        self.edge = ~c.interior
        self.shape = (system.m,) + c.shape

    def matvec(self, v_flat: np.ndarray) -> np.ndarray:
        s = self.s
        v = v_flat.reshape(self.shape).copy()
        vb = v[:, self.edge].copy()
        v[:, self.edge] = 0.0
        jv = kernels.toda_jvp(self.e, np.ascontiguousarray(s.lift(v)), self.ihx2, self.ihy2, s.chart.periodic)
        out = -s.restrict(jv)
        out[:, self.edge] = vb
        return out.ravel()

    def diagonal(self) -> np.ndarray:
        p = self.s.projector
        lap = 0.25 * (2 * self.ihx2 + 2 * self.ihy2)
        dp = np.roll(p, -1, 0) - p  # P[i+1,k] - P[i,k]
        d = np.einsum("ik,i...->k...", dp**2, self.e) + (np.sum(p**2, axis=0) * lap)[:, None, None]
        d[:, self.edge] = 1.0
        return d.ravel()

    def assemble(self) -> sp.csr_matrix:
        """Sparse ``-P^T J P`` with identity rows on Dirichlet nodes."""
        s = self.s
        c = s.chart
        n, ny, nx = s.coupling.shape
        N = ny * nx
        lap = 0.25 * (sp.kron(sp.eye(ny), self.ihx2 * _second_diff(nx, c.periodic))
                      + sp.kron(self.ihy2 * _second_diff(ny, c.periodic), sp.eye(nx)))
        rows, cols, vals = [], [], []
        idx = np.arange(N)
        for i in range(n):
            ip, im = (i + 1) % n, (i - 1) % n
            ei, em = self.e[i].ravel(), self.e[im].ravel()
            for col, val in ((ip, ei), (im, em), (i, -(ei + em))):
                rows.append(i * N + idx)
                cols.append(col * N + idx)
                vals.append(val)
        coup = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * N, n * N))
        jac = sp.kron(sp.eye(n), lap) + coup.tocsr()
        pf = sp.kron(sp.csr_matrix(s.projector), sp.eye(N))
        a = -(pf.T @ jac @ pf).tocsr()
        interior = np.tile(c.interior.ravel(), s.m).astype(float)
        di = sp.diags(interior)
        return (di @ a @ di + sp.diags(1.0 - interior)).tocsc()


def _second_diff(k: int, periodic: bool) -> sp.csr_matrix:
    d = sp.diags([np.ones(k - 1), -2 * np.ones(k), np.ones(k - 1)], [-1, 0, 1], format="lil")
    if periodic:
        d[0, k - 1] = 1.0
        d[k - 1, 0] = 1.0
    return d.tocsr()


def solve_newton(
    system: TodaSystem, config: SolverConfig | None = None, *, init: str | np.ndarray | None = None
) -> Solution:
    """Damped inexact Newton iteration on the reduced Toda system.

    Each step solves ``(-P^T J P) dy = P^T R`` (conjugate gradients with a
    Jacobi preconditioner, or a sparse LU) and backtracks by halving until the
    sup-norm residual strictly decreases.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    u = _initial_u(system, config.init if init is None else init)
    r, e = system.residual(u)
    res = system.residual_sup(r)
    history, steps, lin_its = [res], [], []
    it = 0
    while res > config.tol and it < config.max_iter:
        it += 1
        nw = _Newton(system, e)
        b = system.restrict(r)
        b[:, nw.edge] = 0.0
        dy = _linear_solve(nw, b.ravel(), config, res, history, lin_its).reshape(nw.shape)
        du = system.lift(dy)
        lam = 1.0
        while True:
            u_try = u + lam * du
            r_try, e_try = system.residual(u_try)
            res_try = system.residual_sup(r_try)
            if np.isfinite(res_try) and res_try < res:
                break
            lam *= 0.5
            if lam < config.min_step:
                raise SolverError(
                    f"line search failed at iteration {it}: residual {res:.3e} not reduced", history + [res_try]
                )
        u, r, e, res = u_try, r_try, e_try, res_try
        history.append(res)
        steps.append(lam)
        log.debug("newton %d: residual %.3e step %.3g", it, res, lam)
    converged = res <= config.tol
    sol = Solution(system, u, history, steps, converged, it, res, time.perf_counter() - t0, lin_its)
    if not converged:
        raise SolverError(f"no convergence after {it} iterations: residual {res:.3e}", history)
    return sol


def _linear_solve(nw: _Newton, b: np.ndarray, config: SolverConfig, res: float, history: list[float], lin_its: list[int]) -> np.ndarray:
    if config.linear_solver == "direct":
        a = nw.assemble()
        try:
            x = splu(a).solve(b)
        except RuntimeError as exc:
            diag = np.abs(a.diagonal())
            node = np.unravel_index(int(np.argmin(diag)), nw.shape)
            raise SolverError(f"singular Jacobian near node {node}: {exc}", history, node) from exc
        lin_its.append(1)
        return x
    n = b.size
    op = LinearOperator((n, n), matvec=nw.matvec, dtype=float)
    d = nw.diagonal()
    if np.any(d <= 0):
        node = np.unravel_index(int(np.argmin(d)), nw.shape)
        raise SolverError(f"singular Jacobian near node {node}", history, node)
    prec = LinearOperator((n, n), matvec=lambda x: x / d, dtype=float)
    count = [0]

    def cb(_: np.ndarray) -> None:
        count[0] += 1

    x, info = cg(op, b, rtol=config.linear_rtol, atol=0.0, maxiter=config.linear_maxiter, M=prec, callback=cb)
    if info < 0:
        raise SolverError("conjugate gradients broke down (indefinite Jacobian)", history)
    lin_its.append(count[0])
    return x


def solve(
    phi: HiggsField,
    chart: Chart,
    metric: BackgroundMetric,
    bc: Any = None,
    config: SolverConfig | None = None,
) -> Solution:
    config = config or SolverConfig()
    return solve_newton(assemble_cyclic(phi, chart, metric, bc, symmetry=config.symmetry), config)


# ----------------------------------------------------------------------------
# Cross-checks


def residual_matrix(solution: Solution, phi: HiggsField | None = None) -> tuple[float, np.ndarray]:
    """Full matrix residual ``d_zbar(h^{-1} d_z h) - [phi, phi^*]`` divided by ``g0``.

    Independent of the scalar reduction: ``h`` is assembled as a matrix field
    and differentiated with central differences.  Returns the sup over nodes
    where the stencil is defined, and the ``(ny, nx, n, n)`` field.
    """
    s = solution.system
    phi = phi or s.phi
    chart = s.chart
    h = solution.metric_field.matrix
    ph = phi.on(chart)
    hinv = np.linalg.inv(h)
    conn = hinv @ d_dz(h, chart, trailing=2)
    curv = d_dzbar(conn, chart, trailing=2)
    field_ = (curv - bracket(ph, adjoint_higgs(ph, h, check=False))) / s.metric.factor[..., None, None]
    finite = np.all(np.isfinite(field_), axis=(-2, -1)) & chart.interior
    return float(np.max(np.abs(field_[finite]))), field_


def linearization_coefficients(solution: Solution) -> dict[str, np.ndarray]:
    """Fields of the chain argument for even rank ``n = 2m``.

    ``U_0 = log ||corner||^2``, ``U_k = log ||subdiag_k||^2``; ``v_k = U_{k+1} - U_k``;
    ``c_k`` the mean of ``exp`` on ``[U_k, U_{k+1}]``.
    """
    n = solution.system.n
    if n % 2:
        raise ValueError("the chain system is defined for even rank")
    m = n // 2
    x = solution.pairing_norms()
    with np.errstate(divide="ignore"):
        big_u = np.log(np.concatenate([x[-1:], x[:m]], axis=0))
    lo, hi = big_u[:-1], big_u[1:]
    diff = hi - lo
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        c = (np.exp(hi) - np.exp(lo)) / diff
    near = np.abs(diff) < 1e-8
    c = np.where(near, np.exp(0.5 * (lo + hi)), c)
    return {"U": big_u, "v": diff, "c": c}


def vk_coefficients(c: np.ndarray) -> np.ndarray:
    """Zeroth-order coefficient matrix of the linearized ``v_k`` system, shape ``(m, m, ...)``."""
    c = np.asarray(c, dtype=float)
    m = c.shape[0]
    out = np.zeros((m, m) + c.shape[1:])
    if m == 1:
        out[0, 0] = -4 * c[0]
        return out
    for k in range(m):
        end = k in (0, m - 1)
        out[k, k] = (-3 if end else -2) * c[k]
        if k > 0:
            out[k, k - 1] = c[k - 1]
        if k < m - 1:
            out[k, k + 1] = c[k + 1]
    return out


@dataclass(frozen=True)
class CooperativeReport:
    cooperative: bool
    column_dominant: bool
    fully_coupled: bool
    max_offdiag_violation: float
    max_column_sum: float

    @property
    def all_hold(self) -> bool:
        return self.cooperative and self.column_dominant and self.fully_coupled

    def as_dict(self) -> dict[str, Any]:
        return {
            "cooperative": self.cooperative,
            "column_dominant": self.column_dominant,
            "fully_coupled": self.fully_coupled,
            "max_offdiag_violation": self.max_offdiag_violation,
            "max_column_sum": self.max_column_sum,
        }


def cooperative_check(coeffs: np.ndarray, tol: float = 0.0) -> CooperativeReport:
    """Check the maximum-principle hypotheses on ``c_ij`` (shape ``(k, k, ...)``).

    (a) ``c_ij >= 0`` for ``i != j``; (b) column sums ``<= 0``; (c) the graph
    of couplings positive at every node is irreducible.
    """
    c = np.asarray(coeffs, dtype=float)
    k = c.shape[0]
    if c.ndim < 2 or c.shape[1] != k:
        raise ValueError("coefficient array must be square in its first two axes")
    c = c.reshape(k, k, -1)
    off = ~np.eye(k, dtype=bool)
    offvals = c[off]
    viol = float(max(0.0, -np.min(offvals))) if offvals.size else 0.0
    colsum = float(np.max(np.sum(c, axis=0)))
    linked = np.all(c > 0, axis=-1) & off
    n_comp, _ = connected_components(sp.csr_matrix((linked | linked.T).astype(int)), directed=False)
    strong, _ = connected_components(sp.csr_matrix(linked.astype(int)), directed=True, connection="strong")
    return CooperativeReport(viol <= tol, colsum <= tol, bool(k == 1 or (n_comp == 1 and strong == 1)), viol, colsum)


# ----------------------------------------------------------------------------
# Claims


@dataclass
class ClaimsReport:
    rank: int
    margins: dict[str, np.ndarray]
    minima: dict[str, float]
    locations: dict[str, complex]
    excluded_nodes: int
    degenerate: bool
    notes: list[str]

    @property
    def strict(self) -> bool:
        return all(v > 0 for v in self.minima.values())

    def as_dict(self) -> dict[str, Any]:
        return {
            "rank": self.rank,
            "minima": self.minima,
            "locations": {k: [v.real, v.imag] for k, v in self.locations.items()},
            "excluded_nodes": self.excluded_nodes,
            "degenerate": self.degenerate,
            "strict": self.strict,
            "notes": self.notes,
        }


def _zero_exclusion(phi: HiggsField, chart: Chart, radius: float) -> np.ndarray:
    keep = np.ones(chart.shape, dtype=bool)
    corner = phi.entries[0][phi.n - 1]
    zs = corner.zeros()
    if zs is None:
        return keep
    for z0 in zs:
        keep &= np.abs(chart.z - z0) > radius
    return keep


def claims_margin(solution: Solution, *, fraction: float = 0.8, exclusion: float | None = None) -> ClaimsReport:
    """Slack of the strict inequalities satisfied by Hitchin-section solutions.

    Rank 2: ``e^{-2u} - 1/2`` and ``1 - ||q2||^2 e^{4u}``; rank 3: ``e^{-u} - 1``
    and ``1 - ||q3||^2 e^{3u}``; even rank ``2m``: consecutive gaps of
    ``||q_n||^2 < ||r_1||^2 < ... < ||r_m||^2``.  All are expressed through the
    pairing norms ``x_i`` of the cyclic entries.  Minima are taken on the inner
    sub-domain, excluding nodes within ``exclusion`` (default ``2h``) of zeros
    of the corner entry.
    """
    s = solution.system
    n = s.n
    chart = s.chart
    x = solution.pairing_norms()
    notes: list[str] = []
    if n == 2:
        margins = {"i": x[0] - 0.5, "ii": 1.0 - x[1] / x[0]}
    elif n == 3:
        margins = {"i": x[0] - 1.0, "ii": 1.0 - x[2] / x[0]}
    elif n % 2 == 0:
        m = n // 2
        chain = np.concatenate([x[-1:], x[:m]], axis=0)
        margins = {f"chain_{k}": chain[k + 1] - chain[k] for k in range(m)}
    else:
        raise ValueError(f"rank {n} without a defined claim")
    corner = s.phi.entries[0][n - 1]
    degenerate = corner.is_zero
    if degenerate:
        notes.append("degenerate: q=0 (equality case)")
    radius = 2 * chart.h if exclusion is None else exclusion
    region = chart.inner(fraction) & _zero_exclusion(s.phi, chart, radius)
    excluded = int(np.sum(chart.inner(fraction)) - np.sum(region))
    minima, locs = {}, {}
    for k, f in margins.items():
        vals = np.where(region, f, np.inf)
        j = np.unravel_index(int(np.argmin(vals)), vals.shape)
        minima[k] = float(vals[j])
        locs[k] = complex(chart.z[j])
    return ClaimsReport(n, margins, minima, locs, excluded, degenerate, notes)
