"""Generating functions, the renewal solve, and the perturbed shift semigroup.

The pipeline here turns a declarative :class:`PhiSpec` into a grid function
``phi``, solves the renewal equation ``psi = phi + phi * psi`` by forward
substitution, assembles the two-variable perturbation kernel

    k(x, y) = phi(x + y) + int_0^x phi(x + y - s) psi(s) ds,

and exposes the matrices of the shift ``S_t`` and of its perturbation
``T_t = S_t + K_t`` acting on grid functions, together with the structural
checks (left inverse, idempotents, functional-equation residuals).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grids import Grid, GridFunction, norm1

__all__ = [
    "PhiSpec",
    "Kernel2D",
    "SemigroupOperator",
    "SolverBlowup",
    "materialize_phi",
    "solve_renewal",
    "build_kernel",
    "kernel_cocycle_residual",
    "shift_matrix",
    "perturbed_matrix",
    "left_inverse_residual",
    "idempotent_check",
    "complement_rank",
    "kernel_hs_norm",
    "ShiftPerturbation",
]

#: working normalization for the L1 mass of the generating function
L1_POLICY_BOUND = 1.0 / 3.0


class SolverBlowup(ArithmeticError):
    """Raised when the renewal forward solve loses its diagonal pivot."""


@dataclass(frozen=True)
class PhiSpec:
    """Declarative description of the generating function.

    variant
        ``"zero"``, ``"indicator"`` (constant ``c`` on (0, 1)),
        ``"power_law"`` (``scale * x**(beta-1) * exp(-x)``) or ``"samples"``
        (explicit cell averages).
    truncate_to_unit
        restrict the support to [0, 1) before any rescaling.
    l1_target
        when set, rescale so the grid L1 norm equals this value; must stay
        below the working bound 1/3.
    """

    variant: str
    c: float = 0.25
    beta: float = 0.5
    scale: float = 1.0
    samples: Optional[GridFunction] = None
    truncate_to_unit: bool = False
    l1_target: Optional[float] = None

    def __post_init__(self) -> None:
        if self.variant not in ("zero", "indicator", "power_law", "samples"):
            raise ValueError(f"unknown phi variant {self.variant!r}")
        if self.variant == "power_law":
            if not 0.0 < self.beta <= 0.5:
                raise ValueError(
                    f"power-law exponent must lie in (0, 0.5], got beta={self.beta}"
                )
            if not self.scale > 0.0:
                raise ValueError(f"power-law scale must be positive, got {self.scale}")
        if self.variant == "samples" and self.samples is None:
            raise ValueError("samples variant requires an explicit GridFunction")
        if self.l1_target is not None and not 0.0 < self.l1_target < L1_POLICY_BOUND:
            raise ValueError(
                f"l1_target must lie in (0, 1/3), got {self.l1_target}"
            )

    def to_json(self) -> str:
        obj = {
            "variant": self.variant,
            "c": self.c,
            "beta": self.beta,
            "scale": self.scale,
            "truncate_to_unit": self.truncate_to_unit,
            "l1_target": self.l1_target,
        }
        if self.variant == "samples":
            obj["samples"] = {
                "h": self.samples.grid.h,
                "values": list(self.samples.values),
            }
        return json.dumps(obj, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PhiSpec":
        obj = json.loads(text)
        samples = None
        if obj.get("samples") is not None:
            raw = obj["samples"]
            vals = np.asarray(raw["values"], dtype=float)
            samples = GridFunction(Grid(float(raw["h"]), vals.size), vals)
        return cls(
            variant=obj["variant"],
            c=float(obj.get("c", 0.25)),
            beta=float(obj.get("beta", 0.5)),
            scale=float(obj.get("scale", 1.0)),
            samples=samples,
            truncate_to_unit=bool(obj.get("truncate_to_unit", False)),
            l1_target=obj.get("l1_target"),
        )


def materialize_phi(spec: PhiSpec, grid: Grid) -> GridFunction:
    """Cell averages of the generating function described by ``spec``.

    Power-law cells integrate the pure power exactly and apply the
    exponential at the cell midpoint, so the integrable singularity at 0 is
    represented without point evaluation.
    """
    if spec.truncate_to_unit and grid.horizon < 1.0 - _edge_tol(grid):
        raise ValueError(
            f"grid horizon {grid.horizon} is too short to truncate at 1"
        )
    if spec.variant == "zero":
        vals = np.zeros(grid.n)
    elif spec.variant == "indicator":
        vals = spec.c * grid.indicator(0.0, 1.0).values
    elif spec.variant == "power_law":
        edges = grid.edges
        power_avg = (edges[1:] ** spec.beta - edges[:-1] ** spec.beta) / (
            spec.beta * grid.h
        )
        vals = spec.scale * power_avg * np.exp(-grid.midpoints)
    else:
        if spec.samples.grid != grid:
            raise ValueError(
                f"sampled phi lives on {spec.samples.grid}, requested {grid}"
            )
        vals = spec.samples.values.copy()
    if spec.truncate_to_unit:
        vals = vals * grid.indicator(0.0, 1.0).values
    f = GridFunction(grid, vals)
    if spec.l1_target is not None:
        mass = norm1(f)
        if mass == 0.0:
            raise ValueError("cannot rescale an identically zero phi")
        f = f * (spec.l1_target / mass)
    return f


def _edge_tol(grid: Grid) -> float:
    return 1e-9 * grid.h


def solve_renewal(phi: GridFunction) -> GridFunction:
    """Solve psi = phi + phi * psi by forward substitution.

    The diagonal term h*phi_0*psi_m is handled implicitly, which keeps the
    solve stable when the first cell of a power-law phi is large.  The
    returned psi satisfies the grid renewal identity to round-off.
    """
    h = phi.grid.h
    pv = phi.values
    pivot = 1.0 - h * pv[0]
    if abs(pivot) < 1e-12:
        raise SolverBlowup(
            "renewal solve pivot |1 - h*phi_0| is below 1e-12; "
            "refine the grid or reduce the scale of phi"
        )
    n = phi.grid.n
    psi = np.empty(n)
    psi[0] = pv[0] / pivot
    for m in range(1, n):
        acc = h * np.dot(pv[m:0:-1], psi[:m])
        psi[m] = (pv[m] + acc) / pivot
    return GridFunction(phi.grid, psi)


@dataclass(frozen=True)
class Kernel2D:
    """Cell averages of the perturbation kernel on the square [0, T']^2."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"kernel values must be square, got shape {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def side(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> float:
        return self.side * self.grid.h

    @property
    def hs_proxy(self) -> float:
        """Grid Hilbert-Schmidt proxy (h^2 * sum k^2)^(1/2) over the square."""
        return float(self.grid.h * np.linalg.norm(self.values))


def build_kernel(
    phi: GridFunction, psi: GridFunction, horizon: Optional[float] = None
) -> Kernel2D:
    """Assemble k(x, y) = phi(x+y) + int_0^x phi(x+y-s) psi(s) ds on a grid square.

    The square extends to at most half the grid horizon so that x + y stays
    on-grid.  The integral term accumulates the partial convolutions
    h * sum_{l<i} psi_l phi_{m-l} row by row; with the empty sum in row zero
    the first row reproduces the phi samples exactly.
    """
    if phi.grid != psi.grid:
        raise ValueError(f"phi and psi grids differ: {phi.grid} vs {psi.grid}")
    grid = phi.grid
    half = grid.horizon / 2.0
    if horizon is None:
        horizon = half
    if horizon > half + _edge_tol(grid):
        raise ValueError(
            f"kernel horizon {horizon} exceeds half the grid horizon {half}"
        )
    side = grid.index_of(horizon)
    if side < 1:
        raise ValueError("kernel horizon is below one cell")
    h = grid.h
    pv = phi.values
    sv = psi.values
    k = np.empty((side, side))
    partial = np.zeros(grid.n)
    for i in range(side):
        k[i, :] = pv[i : i + side] + partial[i : i + side]
        partial[i:] += h * sv[i] * pv[: grid.n - i]
    return Kernel2D(grid, k)


def kernel_cocycle_residual(kern: Kernel2D, t: float) -> float:
    """Max-norm defect of k(x+t, y) = k(x, y+t) + int_0^t k(x,s) k(t-s,y) ds."""
    p = kern.grid.index_of(t)
    side = kern.side
    if p < 1 or p >= side:
        raise ValueError(
            f"time {t} must lie strictly inside the kernel square of side "
            f"{side * kern.grid.h}"
        )
    q = side - p
    kv = kern.values
    lhs = kv[p:, :q]
    rhs = kv[:q, p:]
    cross = kern.grid.h * kv[:q, :p] @ kv[p - 1 :: -1, :q]
    return float(np.max(np.abs(lhs - rhs - cross)))


@dataclass(frozen=True)
class SemigroupOperator:
    """Matrix of a semigroup element at time t acting on grid value vectors."""

    grid: Grid
    t: float
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"operator matrix must be {self.grid.n}x{self.grid.n}, got {m.shape}"
            )
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, f: GridFunction) -> GridFunction:
        if f.grid != self.grid:
            raise ValueError(f"function grid {f.grid} differs from {self.grid}")
        return GridFunction(self.grid, self.matrix @ f.values)

    def apply_transpose(self, f: GridFunction) -> GridFunction:
        if f.grid != self.grid:
            raise ValueError(f"function grid {f.grid} differs from {self.grid}")
        return GridFunction(self.grid, self.matrix.T @ f.values)


def shift_matrix(grid: Grid, t: float) -> SemigroupOperator:
    """Right shift by t: ones on the (t/h)-th subdiagonal."""
    p = grid.index_of(t)
    return SemigroupOperator(grid, t, np.eye(grid.n, k=-p))


def perturbed_matrix(grid: Grid, t: float, kern: Kernel2D) -> SemigroupOperator:
    """T_t = S_t + K_t with K_t[i, j] = h * k(t - x_i, y_j) on rows below t.

    The rows of the perturbation block live on x < t, while its columns run
    over the whole represented kernel square: truncating them at y < t would
    break the semigroup identity T_s T_t = T_{s+t} by the kernel mass in
    {y > t}, which the functional equation needs.
    """
    if kern.grid != grid:
        raise ValueError(f"kernel grid {kern.grid} differs from {grid}")
    p = grid.index_of(t)
    if p > kern.side:
        raise ValueError(
            f"time {t} exceeds the kernel square horizon {kern.horizon}"
        )
    m = np.eye(grid.n, k=-p)
    if p > 0:
        m[:p, : kern.side] += grid.h * kern.values[p - 1 :: -1, :]
    return SemigroupOperator(grid, t, m)


def left_inverse_residual(Tt: SemigroupOperator, St: SemigroupOperator) -> float:
    """Deviation of T_t^T S_t from the identity on its natural domain.

    On the truncated grid the product equals the identity on the first
    n - t/h coordinates while the trailing columns (functions pushed past the
    horizon by S_t) vanish; the residual is measured against exactly that
    pattern, so it is round-off-level at every resolution.
    """
    _check_pair(Tt, St)
    p = St.grid.index_of(St.t)
    prod = Tt.matrix.T @ St.matrix
    expected = np.zeros_like(prod)
    keep = St.grid.n - p
    expected[np.arange(keep), np.arange(keep)] = 1.0
    return float(np.max(np.abs(prod - expected)))


def idempotent_check(Tt: SemigroupOperator, St: SemigroupOperator) -> float:
    """Hilbert-Schmidt defect of E^2 = E for E = S_t T_t^T."""
    _check_pair(Tt, St)
    e = St.matrix @ Tt.matrix.T
    return float(np.linalg.norm(e @ e - e))


def complement_rank(
    Tt: SemigroupOperator, St: SemigroupOperator, threshold: float = 1e-8
) -> int:
    """Numerical rank of I - S_t T_t^T via singular values."""
    _check_pair(Tt, St)
    e = St.matrix @ Tt.matrix.T
    sing = np.linalg.svd(np.eye(St.grid.n) - e, compute_uv=False)
    return int(np.sum(sing > threshold))


def _check_pair(Tt: SemigroupOperator, St: SemigroupOperator) -> None:
    if Tt.grid != St.grid:
        raise ValueError(f"operator grids differ: {Tt.grid} vs {St.grid}")
    if abs(Tt.t - St.t) > _TIME_PAIR_TOL * max(1.0, abs(St.t)):
        raise ValueError(f"operator times differ: {Tt.t} vs {St.t}")


_TIME_PAIR_TOL = 1e-9


def kernel_hs_norm(kern: Kernel2D, t: float) -> float:
    """Grid Hilbert-Schmidt norm of K_t, i.e. of S_t - T_t.

    Matches :func:`perturbed_matrix`: rows over x < t, columns over the full
    kernel square.
    """
    p = kern.grid.index_of(t)
    if p > kern.side:
        raise ValueError(f"time {t} exceeds the kernel square {kern.horizon}")
    block = kern.values[:p, :]
    return float(kern.grid.h * np.linalg.norm(block))


class ShiftPerturbation:
    """Bundle of (grid, phi, psi, kernel) with cached semigroup matrices.

    This is the engine handle the cocycle and Toeplitz layers consume: it
    owns the renewal solve and the kernel square and hands out ``S_t`` and
    ``T_t`` matrices for grid-multiple times.
    """

    def __init__(self, phi: GridFunction, kernel_horizon: Optional[float] = None):
        self.grid = phi.grid
        self.phi = phi
        self.psi = solve_renewal(phi)
        self.kernel = build_kernel(phi, self.psi, kernel_horizon)
        self._shifts: dict[int, SemigroupOperator] = {}
        self._perturbed: dict[int, SemigroupOperator] = {}

    @classmethod
    def from_spec(
        cls, spec: PhiSpec, grid: Grid, kernel_horizon: Optional[float] = None
    ) -> "ShiftPerturbation":
        return cls(materialize_phi(spec, grid), kernel_horizon)

    def shift(self, t: float) -> SemigroupOperator:
        p = self.grid.index_of(t)
        if p not in self._shifts:
            self._shifts[p] = shift_matrix(self.grid, p * self.grid.h)
        return self._shifts[p]

    def perturbed(self, t: float) -> SemigroupOperator:
        p = self.grid.index_of(t)
        if p not in self._perturbed:
            self._perturbed[p] = perturbed_matrix(
                self.grid, p * self.grid.h, self.kernel
            )
        return self._perturbed[p]

    def semigroup_residual(self, s: float, t: float) -> float:
        """Hilbert-Schmidt norm of T_s T_t - T_{s+t}."""
        ts = self.perturbed(s)
        tt = self.perturbed(t)
        tst = self.perturbed(s + t)
        return float(np.linalg.norm(ts.matrix @ tt.matrix - tst.matrix))
