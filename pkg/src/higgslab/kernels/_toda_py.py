"""Numpy implementation of the Toda residual and Jacobian-vector product.

Fields have shape ``(n, ny, nx)``; the first axis is the cyclic index.
"""

from __future__ import annotations

import numpy as np


def _lap4(u: np.ndarray, inv_hx2: float, inv_hy2: float, periodic: bool) -> np.ndarray:
    if periodic:
        lap = inv_hx2 * (np.roll(u, 1, 2) - 2 * u + np.roll(u, -1, 2))
        lap += inv_hy2 * (np.roll(u, 1, 1) - 2 * u + np.roll(u, -1, 1))
        return 0.25 * lap
    out = np.zeros_like(u)
    c = u[:, 1:-1, 1:-1]
    lap = inv_hx2 * (u[:, 1:-1, :-2] - 2 * c + u[:, 1:-1, 2:])
    lap += inv_hy2 * (u[:, :-2, 1:-1] - 2 * c + u[:, 2:, 1:-1])
    out[:, 1:-1, 1:-1] = 0.25 * lap
    return out


def _zero_boundary(r: np.ndarray) -> None:
    r[:, 0, :] = 0.0
    r[:, -1, :] = 0.0
    r[:, :, 0] = 0.0
    r[:, :, -1] = 0.0


def toda_residual(
    u: np.ndarray, ga: np.ndarray, wk: np.ndarray, inv_hx2: float, inv_hy2: float, periodic: bool
) -> tuple[np.ndarray, np.ndarray]:
    """``R_i = lap(u_i)/4 - wk_i + E_i - E_{i-1}`` with ``E_i = ga_i exp(u_{i+1} - u_i)``.

    Dirichlet boundary rows are zero.  Returns ``(R, E)``.
    """
    e = ga * np.exp(np.roll(u, -1, 0) - u)
    r = _lap4(u, inv_hx2, inv_hy2, periodic) - wk + e - np.roll(e, 1, 0)
    if not periodic:
        _zero_boundary(r)
    return r, e


def toda_jvp(e: np.ndarray, v: np.ndarray, inv_hx2: float, inv_hy2: float, periodic: bool) -> np.ndarray:
    """Jacobian of :func:`toda_residual` applied to ``v``; zero on Dirichlet rows."""
    f = e * (np.roll(v, -1, 0) - v)
    out = _lap4(v, inv_hx2, inv_hy2, periodic) + f - np.roll(f, 1, 0)
    if not periodic:
        _zero_boundary(out)
    return out
