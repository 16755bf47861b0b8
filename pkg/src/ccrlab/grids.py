"""Uniform-grid function representation and quadrature.

Functions on (0, T) are stored by their cell averages on a uniform grid of
cell width ``h``.  Cell ``j`` covers ``[j*h, (j+1)*h)``.  All operations here
are pure: inputs are immutable and outputs are fresh objects, so everything
is safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

__all__ = [
    "Grid",
    "GridFunction",
    "GridMismatchError",
    "LambdaGrid",
    "inner",
    "norm1",
    "norm2",
    "convolve",
    "cumint",
    "laplace",
    "shift_cells",
    "symbol_on_lambda",
    "plancherel_sum",
    "grid_transform",
    "step_transform",
]

#: relative slack when deciding whether a time is a grid multiple
_TIME_TOL = 1e-9


class GridMismatchError(ValueError):
    """Raised when two grid functions do not live on the same grid."""


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, n*h) into n cells of width h."""

    h: float
    n: int

    def __post_init__(self) -> None:
        if not self.h > 0.0:
            raise ValueError(f"cell width must be positive, got h={self.h}")
        if self.n < 1:
            raise ValueError(f"cell count must be at least 1, got n={self.n}")

    @property
    def horizon(self) -> float:
        return self.n * self.h

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    def index_of(self, t: float) -> int:
        """Cell count corresponding to a time that must be a grid multiple."""
        p = t / self.h
        rp = int(round(p))
        if abs(p - rp) > _TIME_TOL * max(1.0, abs(p)):
            raise ValueError(
                f"time {t} is not a multiple of the cell width h={self.h}"
            )
        if rp < 0 or rp > self.n:
            raise ValueError(
                f"time {t} is outside the grid horizon {self.horizon}"
            )
        return rp

    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n))

    def indicator(self, a: float, b: float) -> "GridFunction":
        """Cell averages of the indicator of (a, b); endpoints need not be on-grid."""
        if not a < b:
            raise ValueError(f"empty interval ({a}, {b})")
        lo = np.clip(a, self.edges[:-1], self.edges[1:])
        hi = np.clip(b, self.edges[:-1], self.edges[1:])
        return GridFunction(self, (hi - lo) / self.h)


@dataclass(frozen=True)
class GridFunction:
    """Real function sampled by cell averages on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} cell values, got shape {v.shape}"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other, "add")
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other, "subtract")
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)


def _check_same_grid(f: GridFunction, g: GridFunction, op: str) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(
            f"cannot {op} functions on different grids: "
            f"{f.grid} versus {g.grid}"
        )


def inner(f: GridFunction, g: GridFunction) -> float:
    """Real L2 pairing h * sum(f_j * g_j)."""
    _check_same_grid(f, g, "pair")
    return float(f.grid.h * np.dot(f.values, g.values))


def norm2(f: GridFunction) -> float:
    return float(np.sqrt(inner(f, f)))


def norm1(f: GridFunction) -> float:
    return float(f.grid.h * np.sum(np.abs(f.values)))


def convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Causal grid convolution (f*g)_m = h * sum_{j<=m} f_j g_{m-j}.

    The product is truncated at the grid horizon.  FFT evaluation keeps the
    operation bit-for-bit commutative.
    """
    _check_same_grid(f, g, "convolve")
    full = fftconvolve(f.values, g.values)
    return GridFunction(f.grid, f.grid.h * full[: f.grid.n])


def cumint(f: GridFunction) -> GridFunction:
    """Running integral x -> int_0^x f as the cumulative sum h * sum_{j<=m} f_j."""
    return GridFunction(f.grid, f.grid.h * np.cumsum(f.values))


def shift_cells(f: GridFunction, p: int) -> GridFunction:
    """Translate by p cells to the right, filling with zeros."""
    if p < 0:
        raise ValueError(f"shift count must be nonnegative, got {p}")
    out = np.zeros(f.grid.n)
    if p < f.grid.n:
        out[p:] = f.values[: f.grid.n - p]
    return GridFunction(f.grid, out)


def laplace(f: GridFunction, z):
    """Transform h * sum f_j exp(-z x_j) at the cell midpoints x_j.

    ``z`` may be a scalar or an array; the result matches its shape.
    """
    zs = np.asarray(z, dtype=complex)
    expo = np.exp(-np.multiply.outer(zs, f.grid.midpoints))
    out = f.grid.h * (expo @ f.values)
    if np.isscalar(z) or np.ndim(z) == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class LambdaGrid:
    """Symmetric frequency grid of m midpoint samples on [-cutoff, cutoff]."""

    cutoff: float
    m: int

    def __post_init__(self) -> None:
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        if self.m < 2 or self.m % 2:
            raise ValueError(f"sample count must be even and >= 2, got {self.m}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.cutoff / self.m

    @property
    def points(self) -> np.ndarray:
        return -self.cutoff + (np.arange(self.m) + 0.5) * self.spacing


def symbol_on_lambda(phi: GridFunction, lgrid: LambdaGrid) -> np.ndarray:
    """Samples of M(i lambda) = 1 - Laplace(phi)(i lambda) on the frequency grid."""
    return 1.0 - laplace(phi, 1j * lgrid.points)


def plancherel_sum(f: GridFunction, lgrid: LambdaGrid) -> float:
    """Frequency-side energy (1/2pi) * sum |Laplace(f)(i lambda_k)|^2 dlambda.

    Converges to inner(f, f) as the cutoff and sample count grow; the cutoff
    must stay well below pi/h or the midpoint transform aliases.
    """
    vals = laplace(f, 1j * lgrid.points)
    return float(lgrid.spacing / (2.0 * np.pi) * np.sum(np.abs(vals) ** 2))


def step_transform(breaks, levels, xi, chunk: int = 65536) -> np.ndarray:
    """Exact Fourier transform of a piecewise-constant function.

    The function equals ``levels[j]`` on ``(breaks[j], breaks[j+1])`` and
    vanishes elsewhere; the transform convention is
    ``int f(x) exp(-i xi x) dx``.  Evaluation telescopes over the breakpoints
    and is processed in chunks to bound memory.
    """
    breaks = np.asarray(breaks, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if breaks.ndim != 1 or levels.shape != (breaks.size - 1,):
        raise ValueError("need len(breaks) == len(levels) + 1")
    coef = np.empty(breaks.size)
    coef[0] = levels[0]
    coef[1:-1] = levels[1:] - levels[:-1]
    coef[-1] = -levels[-1]
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape, dtype=complex)
    flat = xi.ravel()
    res = out.ravel()
    for start in range(0, flat.size, chunk):
        lam = flat[start : start + chunk]
        phase = np.exp(-1j * np.multiply.outer(lam, breaks))
        num = phase @ coef
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = num / (1j * lam)
        zero = lam == 0.0
        if np.any(zero):
            vals[zero] = np.dot(levels, np.diff(breaks))
        res[start : start + chunk] = vals
    return out


def grid_transform(f: GridFunction, xi, chunk: int = 4096) -> np.ndarray:
    """Exact Fourier transform of the piecewise-constant representative of f."""
    g = f.grid
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape, dtype=complex)
    flat = xi.ravel()
    res = out.ravel()
    cells = np.arange(g.n) * g.h
    for start in range(0, flat.size, chunk):
        lam = flat[start : start + chunk]
        phase = np.exp(-1j * np.multiply.outer(lam, cells))
        poly = phase @ f.values
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = (1.0 - np.exp(-1j * lam * g.h)) / (1j * lam) * poly
        zero = lam == 0.0
        if np.any(zero):
            vals[zero] = g.h * np.sum(f.values)
        res[start : start + chunk] = vals
    return out
