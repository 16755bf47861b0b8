"""Exact interval arithmetic for bounded open sets and slowly-shrinking
constructions driven by a decreasing profile.

The symmetric-difference measure |(U+x) minus-or-plus U| is computed by an
exact sweep over the interval endpoints; no grid is involved anywhere in
this module.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

__all__ = [
    "OpenSet",
    "ProfileF",
    "SandwichReport",
    "construct_U",
    "tail_bound",
    "symdiff_measure",
    "sandwich_check",
    "asymptotic_fit",
]

#: endpoints closer than this are merged when normalizing interval lists
MERGE_TOL = 1e-14


@dataclass(frozen=True)
class OpenSet:
    """Finite sorted union of disjoint open intervals in [0, infinity)."""

    intervals: tuple

    def __post_init__(self) -> None:
        arr = np.asarray(self.intervals, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] != 2:
            raise ValueError("an OpenSet needs a nonempty list of (a, b) pairs")
        lo, hi = arr[:, 0], arr[:, 1]
        if not np.all(hi - lo > MERGE_TOL):
            k = int(np.argmin(hi - lo))
            raise ValueError(f"degenerate interval ({lo[k]}, {hi[k]})")
        if lo[0] < 0.0:
            raise ValueError(f"interval ({lo[0]}, {hi[0]}) leaves [0, infinity)")
        if not np.all(lo[1:] > hi[:-1] + MERGE_TOL):
            k = int(np.argmin(lo[1:] - hi[:-1]))
            raise ValueError(
                f"intervals are not sorted and separated near ({lo[k + 1]}, {hi[k + 1]})"
            )
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "intervals", tuple(map(tuple, arr)))
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)

    @property
    def starts(self) -> np.ndarray:
        return self._lo

    @property
    def ends(self) -> np.ndarray:
        return self._hi

    @property
    def measure(self) -> float:
        return float(np.sum(self._hi - self._lo))

    @property
    def sup(self) -> float:
        return float(self._hi[-1])

    def translate(self, x: float) -> "OpenSet":
        return OpenSet(tuple(zip(self._lo + x, self._hi + x)))


def _intersection_arrays(
    al: np.ndarray, ah: np.ndarray, bl: np.ndarray, bh: np.ndarray
) -> float:
    """Intersection measure of two sorted disjoint interval families.

    For each A interval the overlapping run of B intervals is a contiguous
    index range; only its two ends can be clipped, so the middle resolves
    through a prefix sum.
    """
    lo = np.searchsorted(bh, al, side="right")
    hi = np.searchsorted(bl, ah, side="left")
    sel = hi > lo
    if not np.any(sel):
        return 0.0
    lo, hi = lo[sel], hi[sel]
    pref = np.concatenate([[0.0], np.cumsum(bh - bl)])
    full = pref[hi] - pref[lo]
    left_trim = np.maximum(0.0, al[sel] - bl[lo])
    right_trim = np.maximum(0.0, bh[hi - 1] - ah[sel])
    return float(np.sum(full - left_trim - right_trim))


def intersection_measure(A: OpenSet, B: OpenSet) -> float:
    """Lebesgue measure of the intersection, by a sorted sweep."""
    return _intersection_arrays(A.starts, A.ends, B.starts, B.ends)


def symdiff_measure(U: OpenSet, x: float) -> float:
    """Exact measure of (U + x) symmetric-difference U."""
    if x < 0.0:
        raise ValueError(f"shift must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    lo, hi = U.starts, U.ends
    inter = _intersection_arrays(lo + x, hi + x, lo, hi)
    return 2.0 * (U.measure - inter)


@dataclass(frozen=True)
class ProfileF:
    """Decreasing profile f(x) = scale * x**(gamma-1) * log(1 + 1/x)**log_power.

    Must blow up at 0+ and vanish at infinity, so gamma = 1 is only allowed
    together with a positive log power.
    """

    gamma: float
    log_power: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.log_power < 0.0:
            raise ValueError(f"log power must be nonnegative, got {self.log_power}")
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.gamma == 1.0 and self.log_power == 0.0:
            raise ValueError(
                "constant profile rejected: f must diverge at 0+ "
                "(gamma = 1 needs a positive log power)"
            )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            out = self.scale * x ** (self.gamma - 1.0)
            if self.log_power:
                out = out * np.log1p(1.0 / x) ** self.log_power
        return out if out.ndim else float(out)

    def inverse(self, y: float) -> float:
        """Solve f(x) = y for the unique positive x."""
        if not y > 0.0:
            raise ValueError(f"profile values are positive, got {y}")
        if self.log_power == 0.0:
            return float((y / self.scale) ** (-1.0 / (1.0 - self.gamma)))
        lo = hi = 1.0
        while self(lo) < y:
            lo /= 8.0
        while self(hi) > y:
            hi *= 8.0
        return float(brentq(lambda x: self(x) - y, lo, hi, rtol=1e-12))

    def integral(self, x: float) -> float:
        """Integral of f over (0, x]."""
        if self.log_power == 0.0:
            return self.scale * x**self.gamma / self.gamma
        val, _ = quad(self, 0.0, x, limit=200)
        return float(val)


def construct_U(profile: ProfileF, n_max: int) -> OpenSet:
    """Open set built from the profile's inverse level widths.

    With a_0 = 0 and the doubled widths a_{2n-1} = a_{2n} = f^{-1}(n), the
    partial sums b_k alternate interval and gap; the set keeps intervals
    I_0 .. I_{n_max} and drops an analytically bounded tail (see
    :func:`tail_bound`).
    """
    if n_max < 2:
        raise ValueError(f"need n_max >= 2, got {n_max}")
    levels = np.arange(1, n_max + 2)
    if profile.log_power == 0.0:
        widths = (levels / profile.scale) ** (-1.0 / (1.0 - profile.gamma))
    else:
        widths = np.array([profile.inverse(float(y)) for y in levels])
    a = np.zeros(2 * n_max + 2)
    a[1::2] = widths
    a[2::2] = widths[:-1]
    b = np.cumsum(a)
    # drop intervals too narrow to represent at their float position; the
    # lost mass is covered by the analytic tail bound
    floor = 1e3 * np.finfo(float).eps * np.maximum(1.0, b[0::2])
    keep = (b[1::2] - b[0::2]) > floor
    count = int(np.argmin(keep)) if not keep.all() else keep.size
    if count < 2:
        raise ValueError(
            "profile collapses below two representable intervals; "
            "soften the profile or rescale"
        )
    intervals = tuple((b[2 * k], b[2 * k + 1]) for k in range(count))
    return OpenSet(intervals)


def tail_bound(profile: ProfileF, n_max: int) -> float:
    """Analytic bound on the total length of the dropped intervals.

    The dropped interval lengths are f^{-1}(k) for k > n_max + 1, and a
    decreasing-function comparison gives
    sum_{k >= N} f^{-1}(k) <= int_0^{f^{-1}(N)} f - (N-1) f^{-1}(N).
    """
    nn = n_max + 2
    x = profile.inverse(float(nn))
    return float(profile.integral(x) - (nn - 1) * x)


@dataclass(frozen=True)
class SandwichReport:
    rows: tuple  # (x, lower, measure, upper)
    passed: bool


def sandwich_check(U: OpenSet, profile: ProfileF, xs: Sequence[float]) -> SandwichReport:
    """Exact measures against the profile bounds

    (2 f(x) - 1) x <= |(U+x) sym-diff U| <= (2 f(x) + 1) x + 2 int_0^x f,

    valid for 0 < x < f^{-1}(1).  Fails fast when the requested x values
    need more intervals than the construction retained.
    """
    xs = sorted(float(x) for x in xs)
    if not xs:
        raise ValueError("no probe points supplied")
    limit = profile.inverse(1.0)
    if xs[0] <= 0.0 or xs[-1] >= limit:
        raise ValueError(
            f"probe points must lie in (0, f^inv(1)) = (0, {limit})"
        )
    needed = profile(xs[0]) + 2.0
    if needed > len(U.intervals):
        raise ValueError(
            f"truncation too coarse: x={xs[0]} needs about {needed:.0f} "
            f"intervals but only {len(U.intervals)} are retained"
        )
    rows = []
    passed = True
    for x in xs:
        fx = profile(x)
        lower = (2.0 * fx - 1.0) * x
        upper = (2.0 * fx + 1.0) * x + 2.0 * profile.integral(x)
        m = symdiff_measure(U, x)
        rows.append((x, lower, m, upper))
        passed = passed and (lower <= m <= upper)
    return SandwichReport(tuple(rows), passed)


@dataclass(frozen=True)
class FitResult:
    gamma_hat: float
    xs: tuple
    measures: tuple


def asymptotic_fit(
    U: OpenSet, x_range: tuple[float, float], samples: int = 40
) -> FitResult:
    """Log-log slope of the symmetric-difference measure over x_range."""
    lo, hi = float(x_range[0]), float(x_range[1])
    if not 0.0 < lo < hi:
        raise ValueError(f"bad fit range ({lo}, {hi})")
    if hi / lo < 100.0 * (1.0 - 1e-12):
        raise ValueError("fit range must span at least two decades")
    xs = np.geomspace(lo, hi, samples)
    ms = np.array([symdiff_measure(U, float(x)) for x in xs])
    if np.any(ms <= 0.0):
        raise ValueError("symmetric difference vanished inside the fit range")
    slope = np.polyfit(np.log(xs), np.log(ms), 1)[0]
    return FitResult(float(slope), tuple(xs), tuple(ms))
