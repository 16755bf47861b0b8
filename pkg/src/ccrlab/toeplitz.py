"""Toeplitz operators with symbols generated by phi, and their diagnostics.

Every symbol is represented by its time-side convolution generator: the
operator for the symbol ``1 - Laplace(g)`` acts as ``f - g * f`` restricted
to (0, infinity).  The four named symbols are

    M              generator phi           (lower triangular)
    Minv           generator -psi          (lower triangular)
    AbsM2          generator phi + mirror(phi) - autocorrelation(phi)
    AbsM2MinusOne  the AbsM2 convolution part without the identity

Finite compressions to (0, t) are plain matrices; Hilbert-Schmidt norms are
Frobenius norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import toeplitz as _toeplitz

from .grids import (
    Grid,
    GridFunction,
    LambdaGrid,
    convolve,
    grid_transform,
    inner,
    norm2,
    step_transform,
)
from .kernels import PhiSpec, ShiftPerturbation, materialize_phi, solve_renewal
from .cocycles import c_interval, d_interval, imag_cocycle, real_cocycle

__all__ = [
    "BOUNDED",
    "DIVERGING",
    "INCONCLUSIVE",
    "ToeplitzMatrix",
    "generator_lags",
    "toeplitz_apply",
    "toeplitz_matrix",
    "hs_norm",
    "hs_closed_form",
    "phi_block_matrix",
    "gn_vector",
    "fn_transform",
    "fn_plancherel",
    "fn_compact_max",
    "taum_gn_decay",
    "lower_bound_probe",
    "uncertainty_check",
    "j_operator_check",
    "hs_divergence_probe",
    "convolution_block_hs",
]

BOUNDED = "BOUNDED"
DIVERGING = "DIVERGING"
INCONCLUSIVE = "INCONCLUSIVE"

_TAGS_WITH_IDENTITY = ("M", "Minv", "AbsM2", "Custom")


def generator_lags(
    tag: str, phi: GridFunction, psi: Optional[GridFunction] = None
) -> np.ndarray:
    """Convolution generator on the lag axis -(n-1)..(n-1) (center n-1)."""
    n = phi.grid.n
    h = phi.grid.h
    center = n - 1
    out = np.zeros(2 * n - 1)
    pv = phi.values
    if tag == "M":
        out[center:] = pv
    elif tag == "Minv":
        if psi is None:
            raise ValueError("symbol Minv requires the renewal solution psi")
        out[center:] = -psi.values
    elif tag in ("AbsM2", "AbsM2MinusOne"):
        sym = np.zeros(2 * n - 1)
        sym[center:] = pv
        sym[:center] = pv[1:][::-1]
        acorr = h * np.convolve(pv, pv[::-1])
        out = sym - acorr
    else:
        raise ValueError(f"unsupported symbol tag {tag!r}")
    return out


def toeplitz_apply(
    tag: str,
    phi: GridFunction,
    psi: Optional[GridFunction],
    f: GridFunction,
) -> GridFunction:
    """Apply the tagged Toeplitz operator through its convolution form."""
    if f.grid != phi.grid:
        raise ValueError(f"argument grid {f.grid} differs from {phi.grid}")
    if tag == "M":
        return f - convolve(phi, f)
    if tag == "Minv":
        if psi is None:
            raise ValueError("symbol Minv requires the renewal solution psi")
        return f + convolve(psi, f)
    if tag in ("AbsM2", "AbsM2MinusOne"):
        lags = generator_lags("AbsM2", phi)
        part = _twosided_convolve(lags, f)
        if tag == "AbsM2":
            return f - part
        return -part
    raise ValueError(f"unsupported symbol tag {tag!r}")


def _twosided_convolve(lags: np.ndarray, f: GridFunction) -> GridFunction:
    n = f.grid.n
    center = (lags.size - 1) // 2
    full = np.convolve(lags, f.values)
    return GridFunction(f.grid, f.grid.h * full[center : center + n])


def toeplitz_anticausal_apply(psi: GridFunction, f: GridFunction) -> GridFunction:
    """Transpose of the Minv operator: f + anticausal correlation with psi."""
    if f.grid != psi.grid:
        raise ValueError(f"argument grid {f.grid} differs from {psi.grid}")
    rev = np.convolve(f.values[::-1], psi.values)[: f.grid.n][::-1]
    return GridFunction(f.grid, f.values + f.grid.h * rev)


@dataclass(frozen=True)
class ToeplitzMatrix:
    """Compression of a tagged Toeplitz operator to (0, t)."""

    grid: Grid
    t: float
    symbol_tag: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def side(self) -> int:
        return self.matrix.shape[0]


def toeplitz_matrix(
    tag: str,
    phi: GridFunction,
    psi: Optional[GridFunction],
    t: float,
    custom: Optional[np.ndarray] = None,
) -> ToeplitzMatrix:
    """Matrix of the compression P_t T P_t with entries from the lag generator."""
    grid = phi.grid
    q = grid.index_of(t)
    if q < 1:
        raise ValueError(f"compression horizon {t} is below one cell")
    if tag == "Custom":
        if custom is None:
            raise ValueError("Custom tag requires an explicit lag array")
        lags = np.asarray(custom, dtype=float)
        if lags.size % 2 == 0:
            raise ValueError("custom lag array must have odd length")
    else:
        lags = generator_lags(tag, phi, psi)
    center = (lags.size - 1) // 2
    col = _window(lags, center, q, +1)
    row = _window(lags, center, q, -1)
    mat = -grid.h * _toeplitz(col, row)
    if tag in _TAGS_WITH_IDENTITY:
        mat[np.arange(q), np.arange(q)] += 1.0
    return ToeplitzMatrix(grid, q * grid.h, tag, mat)


def _window(lags: np.ndarray, center: int, q: int, sign: int) -> np.ndarray:
    out = np.zeros(q)
    for i in range(q):
        idx = center + sign * i
        if 0 <= idx < lags.size:
            out[i] = lags[idx]
    return out


def hs_norm(matrix) -> float:
    """Frobenius norm, the finite-dimensional Hilbert-Schmidt norm."""
    if isinstance(matrix, ToeplitzMatrix):
        matrix = matrix.matrix
    return float(np.linalg.norm(matrix))


def hs_closed_form(
    phi: GridFunction, t: float, spec: Optional[PhiSpec] = None
) -> float:
    """Closed-form Hilbert-Schmidt norm squared t * ||phi||_2^2 of T_Phi P_t.

    For a power-law spec the generating function is not square integrable
    and the analytic value is infinite.
    """
    if spec is not None and spec.variant == "power_law":
        return math.inf
    return t * inner(phi, phi)


def phi_block_matrix(phi: GridFunction, t: float) -> np.ndarray:
    """Full-height matrix of T_Phi P_t: kernel phi(x - y) on (0,T) x (0,t)."""
    grid = phi.grid
    q = grid.index_of(t)
    col = grid.h * phi.values
    row = np.zeros(q)
    row[0] = col[0]
    return _toeplitz(col, row)


def gn_vector(n: int, grid: Grid) -> GridFunction:
    """Alternating dyadic step function on (0, 1] with n up/down pairs."""
    if n < 1:
        raise ValueError(f"need a positive pair count, got {n}")
    w = 1.0 / (2 * n * grid.h)
    width = int(round(w))
    if abs(w - width) > 1e-9 or width < 1:
        raise ValueError(
            f"grid with h={grid.h} cannot represent 2n={2 * n} dyadic steps per unit"
        )
    if grid.horizon < 1.0 - 1e-12:
        raise ValueError(f"grid horizon {grid.horizon} is below 1")
    pattern = np.concatenate([np.ones(width), -np.ones(width)])
    vals = np.zeros(grid.n)
    vals[: 2 * n * width] = np.tile(pattern, n)
    return GridFunction(grid, vals)


def fn_transform(n: int, lam) -> np.ndarray:
    """Exact transform of the n-pair dyadic step function at frequencies lam."""
    breaks = np.arange(2 * n + 1) / (2.0 * n)
    levels = np.where(np.arange(2 * n) % 2 == 0, 1.0, -1.0)
    return step_transform(breaks, levels, lam)


def fn_plancherel(n: int, lgrid: LambdaGrid) -> float:
    """Frequency-side energy of the n-pair step function; tends to 2 pi."""
    pos = lgrid.points[lgrid.m // 2 :]
    vals = fn_transform(n, pos)
    return float(2.0 * lgrid.spacing * np.sum(np.abs(vals) ** 2))


def fn_compact_max(n: int, lam_max: float = 10.0, samples: int = 4001) -> float:
    """Max of |F_n(i lambda)|^2 over the compact window [-lam_max, lam_max]."""
    lam = np.linspace(-lam_max, lam_max, samples)
    return float(np.max(np.abs(fn_transform(n, lam)) ** 2))


def taum_gn_decay(phi: GridFunction, n_list: Sequence[int]) -> list[float]:
    """Norms of (T_M - I) g_n, i.e. of the causal convolutions phi * g_n."""
    return [norm2(convolve(phi, gn_vector(n, phi.grid))) for n in n_list]


def lower_bound_probe(
    spec: PhiSpec, t: float, resolutions: Sequence[float]
) -> list[float]:
    """Smallest singular value of the T_M compression to (0, t) at each h."""
    out = []
    for h in resolutions:
        grid = _probe_grid(h, t)
        phi = materialize_phi(spec, grid)
        mat = toeplitz_matrix("M", phi, None, t)
        sing = np.linalg.svd(mat.matrix, compute_uv=False)
        out.append(float(sing[-1]))
    return out


def _probe_grid(h: float, t: float) -> Grid:
    horizon = max(1.0, t)
    n = int(round(horizon / h))
    if abs(n * h - horizon) > 1e-9:
        raise ValueError(f"resolution {h} does not divide the horizon {horizon}")
    return Grid(h, n)


def _as_intervals(obj) -> tuple[tuple[float, float], ...]:
    if hasattr(obj, "intervals"):
        return tuple(obj.intervals)
    return tuple((float(a), float(b)) for a, b in obj)


def uncertainty_check(
    f: GridFunction,
    E,
    F,
    nodes_per_interval: int = 512,
) -> tuple[float, float]:
    """Both sides of the time-frequency inequality for f supported in E.

    Returns ``(lhs, rhs)`` with ``lhs`` the spectral energy of f over the
    frequency set F (exact transform of the piecewise-constant f, midpoint
    quadrature over F) and ``rhs = |E| |F| ||f||^2``.
    """
    e_iv = _as_intervals(E)
    f_iv = _as_intervals(F)
    mids = f.grid.midpoints
    inside = np.zeros(f.grid.n, dtype=bool)
    for a, b in e_iv:
        inside |= (mids >= a) & (mids <= b)
    stray = np.abs(f.values[~inside])
    if stray.size and stray.max() > 1e-12 * max(1.0, np.abs(f.values).max()):
        raise ValueError("f has mass outside the prescribed support set E")
    lhs = 0.0
    for a, b in f_iv:
        if not b > a:
            raise ValueError(f"empty frequency interval ({a}, {b})")
        step = (b - a) / nodes_per_interval
        xi = a + (np.arange(nodes_per_interval) + 0.5) * step
        lhs += step * float(np.sum(np.abs(grid_transform(f, xi)) ** 2))
    e_len = sum(b - a for a, b in e_iv)
    f_len = sum(b - a for a, b in f_iv)
    rhs = e_len * f_len * inner(f, f)
    return lhs, rhs


def j_operator_check(
    engine: ShiftPerturbation, boundaries: Sequence[float]
) -> float:
    """Worst relative defect of T_{1/M}^T T_{1/M} c_{p,q} = d_{p,q} on a partition."""
    pts = list(boundaries)
    if len(pts) < 2:
        raise ValueError("partition needs at least two boundaries")
    cM = real_cocycle(engine.phi)
    dM = imag_cocycle(engine.psi)
    worst = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        c = c_interval(cM, a, b)
        d = d_interval(dM, engine, a, b)
        y = toeplitz_apply("Minv", engine.phi, engine.psi, c)
        y = toeplitz_anticausal_apply(engine.psi, y)
        worst = max(worst, norm2(y - d) / norm2(d))
    return worst


def convolution_block_hs(lags: np.ndarray, center: int, q: int, h: float) -> float:
    """Hilbert-Schmidt norm of the q x q convolution block with entries h*g_{i-j}."""
    m = np.arange(-(q - 1), q)
    idx = center + m
    vals = np.where((idx >= 0) & (idx < lags.size), lags[np.clip(idx, 0, lags.size - 1)], 0.0)
    weights = q - np.abs(m)
    return float(h * np.sqrt(np.sum(weights * vals**2)))


def hs_divergence_probe(
    source,
    t: float,
    resolutions: Sequence[float],
    cauchy_tol: float = 0.05,
    growth_tol: float = 0.15,
) -> tuple[list[float], str]:
    """Hilbert-Schmidt norms of the compressed convolution across resolutions.

    ``source`` is either a :class:`PhiSpec` (the generator is the AbsM2 lag
    array of the materialized phi) or a callable ``grid -> (lags, center)``.
    The verdict compares the last two norms: growth beyond ``growth_tol``
    per halving reads as divergence, agreement within ``cauchy_tol`` as
    boundedness.
    """
    res = list(resolutions)
    if len(res) < 3:
        raise ValueError("need at least three resolutions for a verdict")
    if any(b >= a for a, b in zip(res[:-1], res[1:])):
        raise ValueError("resolutions must be strictly decreasing")
    norms = []
    for h in res:
        grid = _probe_grid(h, t)
        if isinstance(source, PhiSpec):
            phi = materialize_phi(source, grid)
            lags = generator_lags("AbsM2", phi)
            center = grid.n - 1
        else:
            lags, center = source(grid)
        q = grid.index_of(t)
        norms.append(convolution_block_hs(np.asarray(lags, float), center, q, grid.h))
    verdict = _growth_verdict(norms, cauchy_tol, growth_tol)
    return norms, verdict


def _growth_verdict(norms: Sequence[float], cauchy_tol: float, growth_tol: float) -> str:
    last, prev = norms[-1], norms[-2]
    if last < 1e-14 and prev < 1e-14:
        return BOUNDED
    if prev == 0.0:
        return DIVERGING
    ratio = last / prev
    if ratio > 1.0 + growth_tol:
        return DIVERGING
    if abs(ratio - 1.0) <= cauchy_tol:
        return BOUNDED
    return INCONCLUSIVE
