"""Pointwise algebra of Higgs fields in a fixed holomorphic frame.

Matrix fields are numpy arrays whose last two axes are the ``n x n`` matrix
axes; every leading axis is a batch (usually the grid).  A :class:`HiggsField`
is a matrix of holomorphic coefficient functions of ``z`` that can be sampled
on a chart or along a path.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import linear_sum_assignment

from .chart import Chart

__all__ = [
    "Holomorphic",
    "HiggsField",
    "HermitianMetric",
    "PathSpec",
    "PathAlpha",
    "DiscriminantError",
    "CriticalPathError",
    "hitchin_weights",
    "build_hitchin_section",
    "build_cyclic",
    "build_sp4_maximal",
    "scale_action",
    "adjoint_higgs",
    "bracket",
    "bracket_contracted",
    "bracket_norm",
    "fibration_base",
    "eigen_field",
    "vec_distance",
    "path_alpha",
]


class DiscriminantError(ValueError):
    def __init__(self, message: str, s: float | None = None):
        super().__init__(message)
        self.s = s


class CriticalPathError(ValueError):
    def __init__(self, message: str, s: float | None = None):
        super().__init__(message)
        self.s = s


def _parse_complex(x: Any) -> complex:
    if isinstance(x, str):
        return complex(x.replace(" ", "").replace("i", "j"))
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        # [re, im] pairs are only accepted through Holomorphic.from_config
        return complex(x[0], x[1])
    return complex(x)


class Holomorphic:
    """A holomorphic coefficient: constant, polynomial in ``z``, callable or sampled array."""

    __slots__ = ("kind", "value")

    def __init__(self, kind: str, value: Any):
        self.kind = kind
        self.value = value

    @classmethod
    def coerce(cls, x: Any) -> Holomorphic:
        if isinstance(x, Holomorphic):
            return x
        if x is None:
            return cls("const", 0j)
        if isinstance(x, Polynomial):
            return cls("poly", Polynomial(np.asarray(x.coef, dtype=complex)))
        if isinstance(x, np.ndarray) and x.ndim >= 1:
            return cls("sampled", np.asarray(x, dtype=complex))
        if isinstance(x, (list, tuple)):
            coef = np.array([_parse_complex(c) for c in x], dtype=complex)
            if coef.size == 0:
                return cls("const", 0j)
            if coef.size == 1:
                return cls("const", complex(coef[0]))
            return cls("poly", Polynomial(coef))
        if callable(x):
            return cls("callable", x)
        return cls("const", _parse_complex(x))

    def __call__(self, z: np.ndarray | complex) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "const":
            return np.full(z.shape, self.value, dtype=complex)
        if self.kind == "poly":
            return np.asarray(self.value(z), dtype=complex)
        if self.kind == "callable":
            return np.broadcast_to(np.asarray(self.value(z), dtype=complex), z.shape).copy()
        if self.value.shape != z.shape:
            raise ValueError("sampled coefficient can only be evaluated on its own grid")
        return self.value.copy()

    @property
    def is_zero(self) -> bool:
        if self.kind == "const":
            return self.value == 0
        if self.kind == "poly":
            return not np.any(self.value.coef)
        if self.kind == "sampled":
            return not np.any(self.value)
        return False

    @property
    def is_constant(self) -> bool:
        if self.kind == "const":
            return True
        if self.kind == "poly":
            return not np.any(self.value.coef[1:])
        return False

    def zeros(self) -> np.ndarray | None:
        """Zeros of the coefficient, or ``None`` when unknown (callables, sampled data)."""
        if self.kind == "const":
            return np.array([], dtype=complex)
        if self.kind == "poly":
            coef = np.trim_zeros(self.value.coef, "b")
            if coef.size <= 1:
                return np.array([], dtype=complex)
            return Polynomial(coef).roots()
        return None

    def scaled(self, c: complex) -> Holomorphic:
        c = complex(c)
        if self.kind == "const":
            return Holomorphic("const", c * self.value)
        if self.kind == "poly":
            return Holomorphic("poly", c * self.value)
        if self.kind == "sampled":
            return Holomorphic("sampled", c * self.value)
        f = self.value
        return Holomorphic("callable", lambda z: c * np.asarray(f(z)))

    def describe(self) -> Any:
        if self.kind == "const":
            return _complex_repr(self.value)
        if self.kind == "poly":
            return [_complex_repr(c) for c in self.value.coef]
        return f"<{self.kind}>"

    def __repr__(self) -> str:
        return f"Holomorphic({self.kind}, {self.describe()!r})"


def _complex_repr(c: complex) -> Any:
    c = complex(c)
    return c.real if c.imag == 0 else [c.real, c.imag]


def hitchin_weights(n: int) -> tuple[float, ...]:
    """Weights ``w_i = (n+1-2i)/2``: ``L_i = K^{w_i}`` along the Hitchin section."""
    return tuple((n + 1 - 2 * i) / 2 for i in range(1, n + 1))


@dataclass(frozen=True)
class HiggsField:
    """The local matrix of a Higgs field, entry ``(i, j)`` a holomorphic function of ``z``.

    ``weights`` record the line-bundle degrees ``L_i = K^{w_i}`` used to split
    ``h_i = g0^{-w_i} e^{u_i}`` when solving.
    """

    n: int
    entries: tuple[tuple[Holomorphic, ...], ...] = field(repr=False)
    tag: str = "generic"
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.entries) != self.n or any(len(r) != self.n for r in self.entries):
            raise ValueError("entries must form an n x n table")
        if self.weights is not None:
            if len(self.weights) != self.n:
                raise ValueError("need one weight per line bundle")
            if abs(sum(self.weights)) > 1e-12:
                raise ValueError("weights must sum to zero (trivial determinant)")

    def sample(self, z: np.ndarray | complex) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape + (self.n, self.n), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, e in enumerate(row):
                if not (e.kind == "const" and e.value == 0):
                    out[..., i, j] = e(z)
        return out

    def on(self, chart: Chart) -> np.ndarray:
        return self.sample(chart.z)

    def support(self) -> np.ndarray:
        return np.array([[not e.is_zero for e in row] for row in self.entries])

    def is_cyclic_shape(self) -> bool:
        allowed = np.zeros((self.n, self.n), dtype=bool)
        for i in range(1, self.n):
            allowed[i, i - 1] = True
        allowed[0, self.n - 1] = True
        return not np.any(self.support() & ~allowed)

    @property
    def gammas(self) -> tuple[Holomorphic, ...]:
        """Cyclic data ``(gamma_1, ..., gamma_n)``: subdiagonal, then the corner."""
        if not self.is_cyclic_shape():
            raise ValueError("Higgs field is not of cyclic shape")
        sub = tuple(self.entries[i][i - 1] for i in range(1, self.n))
        return sub + (self.entries[0][self.n - 1],)

    def with_entries(self, entries: tuple[tuple[Holomorphic, ...], ...]) -> HiggsField:
        return HiggsField(self.n, entries, self.tag, self.weights)

    def describe(self) -> dict[str, Any]:
        return {
            "rank": self.n,
            "family": self.tag,
            "weights": list(self.weights) if self.weights else None,
            "entries": {
                f"{i},{j}": e.describe()
                for i, row in enumerate(self.entries)
                for j, e in enumerate(row)
                if not e.is_zero
            },
        }


def _table(n: int) -> list[list[Holomorphic]]:
    return [[Holomorphic("const", 0j) for _ in range(n)] for _ in range(n)]


def _freeze(t: list[list[Holomorphic]]) -> tuple[tuple[Holomorphic, ...], ...]:
    return tuple(tuple(r) for r in t)


def build_hitchin_section(
    qs: Sequence[Any], n: int | None = None, *, normalization: str = "unit"
) -> HiggsField:
    """Hitchin-section matrix for differentials ``(q_2, ..., q_n)``.

    ``normalization="unit"`` puts ones on the subdiagonal (the worked rank 2
    and rank 3 examples); ``"r"`` uses ``r_i = i(n-i)/2``.
    """
    n = len(qs) + 1 if n is None else n
    if len(qs) != n - 1:
        raise ValueError(f"expected {n - 1} differentials q_2..q_n, got {len(qs)}")
    if n < 2:
        raise ValueError("rank must be at least 2")
    if normalization not in ("unit", "r"):
        raise ValueError("normalization must be 'unit' or 'r'")
    qh = [Holomorphic.coerce(q) for q in qs]
    t = _table(n)
    for i in range(1, n):
        r = 1.0 if normalization == "unit" else i * (n - i) / 2
        t[i][i - 1] = Holomorphic("const", complex(r))
    for i in range(n):
        for j in range(i + 1, n):
            t[i][j] = qh[j - i - 1]
    return HiggsField(n, _freeze(t), "hitchin-section", hitchin_weights(n))


def build_cyclic(
    gammas: Sequence[Any], n: int | None = None, *, weights: Sequence[float] | None = None
) -> HiggsField:
    """Cyclic Higgs field with subdiagonal ``gamma_1..gamma_{n-1}`` and corner ``gamma_n``."""
    n = len(gammas) if n is None else n
    if n < 2:
        raise ValueError("rank must be at least 2")
    if len(gammas) != n:
        raise ValueError(f"expected {n} cyclic entries, got {len(gammas)}")
    g = [Holomorphic.coerce(x) for x in gammas]
    t = _table(n)
    for i in range(1, n):
        t[i][i - 1] = g[i - 1]
    t[0][n - 1] = g[n - 1]
    w = tuple(float(x) for x in weights) if weights is not None else hitchin_weights(n)
    return HiggsField(n, _freeze(t), "cyclic", w)


def build_sp4_maximal(q2: Any, mu: Any, nu: Any, *, weights: Sequence[float] | None = None) -> HiggsField:
    """The rank-4 Higgs field of maximal Sp(4,R) representations.

    Rows: ``(0, q2, 0, nu)``, ``(1, 0, 0, 0)``, ``(0, mu, 0, q2)``, ``(0, 0, 1, 0)``.
    """
    q2, mu, nu = (Holomorphic.coerce(x) for x in (q2, mu, nu))
    one = Holomorphic("const", 1 + 0j)
    t = _table(4)
    t[0][1], t[0][3] = q2, nu
    t[1][0] = one
    t[2][1], t[2][3] = mu, q2
    t[3][2] = one
    w = tuple(float(x) for x in weights) if weights is not None else hitchin_weights(4)
    return HiggsField(4, _freeze(t), "sp4-maximal", w)


def scale_action(t: complex, phi: HiggsField) -> HiggsField:
    """``t . phi`` acting entrywise."""
    t = complex(t)
    return phi.with_entries(tuple(tuple(e.scaled(t) for e in row) for row in phi.entries))


# ----------------------------------------------------------------------------
# Hermitian metrics and pointwise operations


@dataclass(frozen=True)
class HermitianMetric:
    """Pointwise Hermitian metric ``h_ij = H(e_i, e_j)``.

    Either ``diagonal`` (shape ``(n, ...)`` of positive values) or ``full``
    (shape ``(..., n, n)``) is given.
    """

    diagonal: np.ndarray | None = None
    full: np.ndarray | None = None

    def __post_init__(self) -> None:
        if (self.diagonal is None) == (self.full is None):
            raise ValueError("give exactly one of diagonal or full")

    @classmethod
    def from_log_diagonal(cls, ell: np.ndarray) -> HermitianMetric:
        return cls(diagonal=np.exp(np.asarray(ell, dtype=float)))

    @property
    def n(self) -> int:
        return self.diagonal.shape[0] if self.diagonal is not None else self.full.shape[-1]

    @property
    def matrix(self) -> np.ndarray:
        if self.full is not None:
            return self.full
        d = np.moveaxis(self.diagonal, 0, -1)
        out = np.zeros(d.shape + (d.shape[-1],), dtype=complex)
        idx = np.arange(d.shape[-1])
        out[..., idx, idx] = d
        return out

    def check(self, det_tol: float = 1e-10, real_cyclic: bool = False) -> None:
        m = self.matrix
        if not np.allclose(m, np.conj(np.swapaxes(m, -1, -2)), atol=1e-12, rtol=1e-12):
            raise ValueError("metric is not Hermitian")
        _cholesky(m)
        det = np.linalg.det(m).real
        if np.max(np.abs(det - 1.0)) > det_tol:
            raise ValueError(f"determinant deviates from 1 by {np.max(np.abs(det - 1.0)):.3e}")
        if real_cyclic:
            d = np.real(np.diagonal(m, axis1=-2, axis2=-1))
            prod = d * d[..., ::-1]
            if np.max(np.abs(prod - 1.0)) > det_tol:
                raise ValueError("real-cyclic symmetry h_i h_{n+1-i} = 1 violated")


def _as_matrix(h: HermitianMetric | np.ndarray) -> np.ndarray:
    return h.matrix if isinstance(h, HermitianMetric) else np.asarray(h)


def _cholesky(h: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        raise ValueError("metric is not positive definite") from None


def _dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def adjoint_higgs(phi: np.ndarray, h: HermitianMetric | np.ndarray, *, check: bool = True) -> np.ndarray:
    """``h^{-1} conj(phi)^T h``, the adjoint with respect to ``H(s, t) = conj(s)^T h t``."""
    hm = _as_matrix(h)
    if check:
        _cholesky(hm)
    phi = np.asarray(phi)
    hm = np.broadcast_to(hm, phi.shape[:-2] + hm.shape[-2:])
    return np.linalg.solve(hm, _dagger(phi) @ hm)


def bracket(phi: np.ndarray, phi_star: np.ndarray) -> np.ndarray:
    """Matrix commutator; the ``dz ^ dzbar`` coefficient of ``[phi, phi^*]``."""
    return phi @ phi_star - phi_star @ phi


def bracket_contracted(phi: np.ndarray, h: HermitianMetric | np.ndarray, g0: np.ndarray | float) -> np.ndarray:
    """Contraction of the 2-form ``[phi, phi^*]`` against ``omega``: ``-i [phi, phi^*] / g0``.

    Skew-adjoint with respect to ``h``, like a unitary curvature.
    """
    b = bracket(phi, adjoint_higgs(phi, h))
    return -1j * b / np.asarray(g0)[..., None, None]


def bracket_norm(phi: np.ndarray, h: HermitianMetric | np.ndarray, g0: np.ndarray | float) -> np.ndarray:
    """Pointwise ``|| [phi, phi^*] ||`` measured by ``h`` and ``g0``."""
    hm = _as_matrix(h)
    b = bracket(phi, adjoint_higgs(phi, hm))
    bs = adjoint_higgs(b, hm, check=False)
    tr = np.real(np.trace(b @ bs, axis1=-2, axis2=-1))
    return np.sqrt(np.maximum(tr, 0.0)) / np.asarray(g0)


def fibration_base(phi: np.ndarray) -> np.ndarray:
    """Characteristic coefficients ``det(l I - phi) = l^n + p_2 l^{n-2} + ... + p_n``.

    Returns ``(p_2, ..., p_n)`` stacked on axis 0 (Faddeev-LeVerrier).
    """
    phi = np.asarray(phi, dtype=complex)
    n = phi.shape[-1]
    eye = np.eye(n, dtype=complex)
    c = [None] * (n + 1)  # c[k] multiplies l^{n-k}
    m = np.broadcast_to(eye, phi.shape).copy()
    c[0] = np.ones(phi.shape[:-2], dtype=complex)
    for k in range(1, n + 1):
        am = phi @ m
        c[k] = -np.trace(am, axis1=-2, axis2=-1) / k
        m = am + c[k][..., None, None] * eye
    return np.stack(c[2:], axis=0)


def _min_gap(eigs: np.ndarray) -> np.ndarray:
    n = eigs.shape[-1]
    gap = np.full(eigs.shape[:-1], np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            gap = np.minimum(gap, np.abs(eigs[..., i] - eigs[..., j]))
    return gap


def eigen_field(phi: np.ndarray, tol_disc: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise eigenvalues of ``phi`` and the discriminant mask.

    Nilpotent nodes (all characteristic coefficients zero) get exact zero
    eigenvalues; LAPACK would otherwise return ``eps^(1/n)`` noise there.
    """
    phi = np.asarray(phi, dtype=complex)
    eigs = np.linalg.eigvals(phi)
    p = fibration_base(phi)
    scale = np.max(np.abs(phi), axis=(-2, -1))
    deg = np.arange(2, phi.shape[-1] + 1).reshape((-1,) + (1,) * scale.ndim)
    nilp = np.all(np.abs(p) ** (1.0 / deg) <= 1e-10 * scale, axis=0)
    eigs[nilp] = 0.0
    return eigs, _min_gap(eigs) < tol_disc


def vec_distance(h_a: np.ndarray, h_b: np.ndarray) -> np.ndarray:
    """Vector distance ``k_1 >= ... >= k_n`` with ``k_j = log|e_j|_{h_b} - log|e_j|_{h_a}``.

    ``e_j`` diagonalise both metrics; ``k_j`` is half the log of the
    generalized eigenvalues of the pencil ``(h_b, h_a)``.
    """
    h_a = np.asarray(h_a, dtype=complex)
    h_b = np.asarray(h_b, dtype=complex)
    la = _cholesky(h_a)
    _cholesky(h_b)
    li = np.linalg.inv(la)
    m = li @ h_b @ _dagger(li)
    lam = np.linalg.eigvalsh(0.5 * (m + _dagger(m)))
    return 0.5 * np.log(lam)[..., ::-1]


# ----------------------------------------------------------------------------
# Paths and WKB data


@dataclass(frozen=True)
class PathSpec:
    """A C^1 path ``s -> z(s)`` on ``[0, 1]`` with its derivative."""

    gamma: Callable[[np.ndarray], np.ndarray]
    dgamma: Callable[[np.ndarray], np.ndarray]
    samples: int = 64
    label: str = "path"

    def __post_init__(self) -> None:
        if self.samples < 32:
            raise ValueError("a path needs at least 32 samples")

    @classmethod
    def segment(cls, start: complex, end: complex, samples: int = 64) -> PathSpec:
        a, b = complex(start), complex(end)
        return cls(
            lambda s: a + (b - a) * np.asarray(s, dtype=float),
            lambda s: np.full(np.shape(s), b - a, dtype=complex),
            samples,
            f"segment {a} -> {b}",
        )

    @classmethod
    def arc(cls, center: complex, radius: float, theta0: float, theta1: float, samples: int = 64) -> PathSpec:
        c, r, d = complex(center), float(radius), float(theta1 - theta0)
        return cls(
            lambda s: c + r * np.exp(1j * (theta0 + d * np.asarray(s, dtype=float))),
            lambda s: 1j * d * r * np.exp(1j * (theta0 + d * np.asarray(s, dtype=float))),
            samples,
            f"arc c={c} r={r}",
        )

    def check_inside(self, chart: Chart) -> None:
        z = self.gamma(np.linspace(0.0, 1.0, self.samples))
        if chart.periodic:
            return
        inside = (z.real > chart.x0) & (z.real < chart.x1) & (z.imag > chart.y0) & (z.imag < chart.y1)
        if not np.all(inside):
            raise ValueError("path leaves the chart interior")


@dataclass(frozen=True)
class PathAlpha:
    alpha: np.ndarray
    s: np.ndarray
    a: np.ndarray  # (samples, n) complex, ordered so Re a_1 > ... > Re a_n
    min_eigen_gap: float
    min_real_gap: float

    @property
    def alpha_descending(self) -> np.ndarray:
        return np.sort(self.alpha)[::-1]


def _match(prev: np.ndarray, new: np.ndarray) -> tuple[np.ndarray, float]:
    cost = np.abs(prev[:, None] - new[None, :])
    _, col = linear_sum_assignment(cost)
    moved = new[col]
    return moved, float(np.max(np.abs(moved - prev)))


def _track(phi: HiggsField, path: PathSpec, max_depth: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Continue eigenvalues along the path, bisecting where matching is ambiguous."""

    def eig(s: float) -> np.ndarray:
        return np.linalg.eigvals(phi.sample(path.gamma(np.array(s)))[()])

    s_grid = list(np.linspace(0.0, 1.0, path.samples))
    out_s = [s_grid[0]]
    out_l = [eig(s_grid[0])]
    pending = [(s, 0) for s in reversed(s_grid[1:])]
    while pending:
        s, depth = pending.pop()
        lam = eig(s)
        prev = out_l[-1]
        moved, disp = _match(prev, lam)
        gap = float(_min_gap(prev[None])[0]) if prev.size > 1 else np.inf
        if disp > 0.5 * gap and depth < max_depth:
            mid = 0.5 * (out_s[-1] + s)
            pending.append((s, depth + 1))
            pending.append((mid, depth + 1))
            continue
        out_s.append(s)
        out_l.append(moved)
    return np.array(out_s), np.array(out_l)


def path_alpha(
    phi: HiggsField,
    path: PathSpec,
    *,
    tol_disc: float = 1e-8,
    tol_crit: float = 1e-8,
) -> PathAlpha:
    """``alpha_i = -int_0^1 Re a_i(s) ds`` with ``gamma^* phi_i = a_i ds``.

    Raises :class:`DiscriminantError` or :class:`CriticalPathError` naming the
    offending parameter ``s``.
    """
    s, lam = _track(phi, path)
    gaps = _min_gap(lam)
    bad = np.nonzero(gaps < tol_disc)[0]
    if bad.size:
        s_bad = float(s[bad[0]])
        raise DiscriminantError(f"path meets the discriminant at s={s_bad:.6g}", s_bad)
    a = lam * path.dgamma(s)[:, None]
    order = np.argsort(-a[0].real)
    a = a[:, order]
    re = a.real
    rgap = re[:, :-1] - re[:, 1:]
    bad = np.nonzero(np.any(rgap < tol_crit, axis=1))[0]
    if bad.size:
        s_bad = float(s[bad[0]])
        raise CriticalPathError(f"path is critical at s={s_bad:.6g}: Re a_i coincide", s_bad)
    alpha = -np.trapezoid(re, s, axis=0)
    return PathAlpha(alpha, s, a, float(np.min(gaps)), float(np.min(rgap)))

