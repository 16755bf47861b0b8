"""Type I / type III classification for the global flow and local algebras.

All verdicts here are numerical evidence, not proofs: the underlying
criteria are exact convergence/divergence dichotomies of singular integrals,
and any finite computation can only estimate the local exponent of the
integrand near zero.  The detector therefore reports ``Inconclusive``
inside a configurable margin around the critical exponent -1.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn, gammainc

from .grids import Grid, GridFunction
from .kernels import PhiSpec, materialize_phi
from .opensets import OpenSet, ProfileF, construct_U, symdiff_measure
from .toeplitz import (
    BOUNDED,
    DIVERGING,
    INCONCLUSIVE,
    _growth_verdict,
    hs_norm,
    lower_bound_probe,
    toeplitz_matrix,
)

__all__ = [
    "TYPE_I",
    "TYPE_III",
    "TYPE_UNDECIDED",
    "TypeReport",
    "ClassifierConfig",
    "convergence_detector",
    "global_type",
    "local_type",
    "iso_probe",
    "IsoReport",
    "sweep",
    "SweepCell",
    "sumsystem_hs_probe",
    "SumSystemReport",
]

TYPE_I = "TypeI"
TYPE_III = "TypeIII"
TYPE_UNDECIDED = "Inconclusive"


@dataclass(frozen=True)
class TypeReport:
    """Classification verdict plus the evidence trail."""

    verdict: str
    estimated_exponent: Optional[float]
    tail_values: tuple
    method: str
    notes: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tail_values"] = [list(tv) for tv in self.tail_values]
        return d


@dataclass(frozen=True)
class ClassifierConfig:
    """Tunable thresholds and discretization knobs for the classifiers."""

    margin: float = 0.05
    t_min: float = 1e-4
    nodes_per_decade: int = 80
    fit_decades: float = 2.0
    fit_points: int = 12
    n_max: int = 10000
    profile_scale: float = 1.0
    cauchy_tol: float = 0.05
    growth_tol: float = 0.15
    resolutions: tuple = (1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512)
    sample_grid_h: float = 1.0 / 4096
    threads: Optional[int] = None


def convergence_detector(
    tail_samples: Sequence[tuple[float, float]], margin: float = 0.05
) -> tuple[str, float]:
    """Decide convergence of int_0 from samples (t, int_t^1 integrand).

    Fits the local integrand exponent p by log-log least squares on the
    increments between consecutive samples; the integral converges when
    p > -1 + margin and diverges when p < -1 - margin.
    Returns ``("converges" | "diverges" | "inconclusive", p_hat)``.
    """
    pts = sorted((float(t), float(v)) for t, v in tail_samples)
    if len(pts) < 8:
        raise ValueError(f"need at least 8 tail samples, got {len(pts)}")
    ts = np.array([t for t, _ in pts])
    vs = np.array([v for _, v in pts])
    if ts[-1] / ts[0] < 100.0 * (1.0 - 1e-12):
        raise ValueError("tail samples must span at least two decades")
    inc = vs[:-1] - vs[1:]
    mid = np.sqrt(ts[:-1] * ts[1:])
    width = ts[1:] - ts[:-1]
    good = inc > 0.0
    if np.sum(good) < 4:
        return "inconclusive", float("nan")
    # density of the increment: integrand averaged over the sample gap
    dens = inc[good] / width[good]
    slope = np.polyfit(np.log(mid[good]), np.log(dens), 1)[0]
    p_hat = float(slope)
    if p_hat > -1.0 + margin:
        return "converges", p_hat
    if p_hat < -1.0 - margin:
        return "diverges", p_hat
    return "inconclusive", p_hat


# ---------------------------------------------------------------------------
# analytic integrand pieces


def _amplitude(spec: PhiSpec) -> float:
    """Effective amplitude after the optional L1 renormalization (analytic)."""
    if spec.variant == "indicator":
        base, mass = spec.c, abs(spec.c)
    elif spec.variant == "power_law":
        mass_unit = gamma_fn(spec.beta) * (
            gammainc(spec.beta, 1.0) if spec.truncate_to_unit else 1.0
        )
        base, mass = spec.scale, spec.scale * mass_unit
    else:
        raise ValueError(f"no analytic amplitude for variant {spec.variant!r}")
    if spec.l1_target is None:
        return base
    if mass == 0.0:
        raise ValueError("cannot rescale an identically zero phi")
    return base * spec.l1_target / mass


def _analytic_exponent(spec: PhiSpec) -> float:
    """Power of |phi(x)|^2 at 0+."""
    if spec.variant == "indicator":
        return 0.0
    if spec.variant == "power_law":
        return 2.0 * spec.beta - 2.0
    raise ValueError(f"no analytic exponent for variant {spec.variant!r}")


def _squared_phi_pieces(spec: PhiSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact integrals of |phi|^2 over the node intervals (a_k, b_k) in (0, 1]."""
    amp = _amplitude(spec)
    if spec.variant == "indicator":
        lo = np.minimum(a, 1.0)
        hi = np.minimum(b, 1.0)
        return amp**2 * np.maximum(0.0, hi - lo)
    if spec.variant == "power_law":
        p = 2.0 * spec.beta - 1.0
        if abs(p) < 1e-12:
            core = np.log(b / a)
        else:
            core = (b**p - a**p) / p
        out = amp**2 * np.exp(-(a + b)) * core
        if spec.truncate_to_unit:
            out = np.where(a >= 1.0, 0.0, out)
        return out
    raise ValueError(f"no analytic pieces for variant {spec.variant!r}")


def _is_parametric(spec: PhiSpec) -> bool:
    return spec.variant in ("zero", "indicator", "power_law")


# ---------------------------------------------------------------------------
# tail curves


def _log_nodes(cfg: ClassifierConfig) -> np.ndarray:
    decades = np.log10(1.0 / cfg.t_min)
    count = max(8, int(round(decades * cfg.nodes_per_decade)))
    return np.geomspace(cfg.t_min, 1.0, count + 1)


def _tail_curve(contrib: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """V(nodes[j]) = sum of contributions at or beyond node j."""
    out = np.zeros(nodes.size)
    out[:-1] = np.cumsum(contrib[::-1])[::-1]
    return out


def _select_samples(
    nodes: np.ndarray, curve: np.ndarray, count: int, t_max: Optional[float] = None
) -> list[tuple[float, float]]:
    sel = np.arange(nodes.size - 1)
    if t_max is not None:
        sel = sel[nodes[sel] <= t_max * (1.0 + 1e-12)]
    if sel.size > count:
        pick = np.unique(np.linspace(0, sel.size - 1, count).round().astype(int))
        sel = sel[pick]
    return [(float(nodes[j]), float(curve[j])) for j in sel]


def _verdict_to_type(verdict: str) -> str:
    return {"converges": TYPE_I, "diverges": TYPE_III}.get(verdict, TYPE_UNDECIDED)


def _grid_squared_tail(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Suffix sums h * sum_{m >= j} values_m^2 (tail integrals on the grid)."""
    return grid.h * np.concatenate([np.cumsum((values**2)[::-1])[::-1], [0.0]])


# ---------------------------------------------------------------------------
# global classification


def global_type(spec: PhiSpec, cfg: Optional[ClassifierConfig] = None) -> TypeReport:
    """Type of the flow itself: type I exactly when phi is square integrable."""
    cfg = cfg or ClassifierConfig()
    if spec.variant == "zero":
        return TypeReport(
            TYPE_I, None, (), "analytic", "zero perturbation: plain CCR baseline"
        )
    if spec.variant == "samples":
        grid = spec.samples.grid
        tails = _grid_squared_tail(spec.samples.values, grid)
        nodes = grid.edges
        keep = nodes >= cfg.t_min
        samples = _select_samples(
            nodes[keep], tails[keep], cfg.fit_points * 3
        )
        verdict, p_hat = convergence_detector(samples, cfg.margin)
        return TypeReport(
            _verdict_to_type(verdict),
            p_hat,
            tuple(samples[: cfg.fit_points * 3]),
            "tail-fit",
            "sampled phi: square-integrability read off the grid tail "
            "(resolution-limited)",
        )
    nodes = _log_nodes(cfg)
    contrib = _squared_phi_pieces(spec, nodes[:-1], nodes[1:])
    curve = _tail_curve(contrib, nodes)
    samples = _select_samples(nodes, curve, cfg.fit_points * 3)
    fit_window = cfg.t_min * 10.0**cfg.fit_decades
    fit_samples = _select_samples(nodes, curve, cfg.fit_points * 3, t_max=fit_window)
    verdict, p_hat = convergence_detector(fit_samples, cfg.margin)
    exponent = _analytic_exponent(spec)
    if spec.variant == "indicator":
        analytic = TYPE_I
        note = "bounded compactly supported phi is square integrable"
    else:
        analytic = TYPE_III
        note = (
            f"squared power-law exponent {exponent:.3f} <= -1, "
            "so the squared integral diverges"
        )
    if _verdict_to_type(verdict) not in (analytic, TYPE_UNDECIDED):
        note += f"; numeric tail-fit disagreed (p_hat={p_hat:.3f}), analytic route wins"
    elif verdict == "inconclusive":
        note += f"; tail-fit sits at the margin (p_hat={p_hat:.3f})"
    return TypeReport(analytic, exponent, tuple(samples), "analytic", note)


# ---------------------------------------------------------------------------
# local classification


def _measure_slope(U: OpenSet, cfg: ClassifierConfig) -> float:
    xs = np.geomspace(cfg.t_min, min(1.0, cfg.t_min * 100.0), 16)
    ms = np.array([symdiff_measure(U, float(x)) for x in xs])
    if np.any(ms <= 0.0):
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ms), 1)[0])


def local_type(
    spec: PhiSpec, U: OpenSet, cfg: Optional[ClassifierConfig] = None
) -> TypeReport:
    """Type of the local algebra over U via the weighted singular integral."""
    cfg = cfg or ClassifierConfig()
    if spec.variant == "zero":
        return TypeReport(
            TYPE_I, None, (), "analytic", "zero perturbation: every local algebra is type I"
        )
    slope = _measure_slope(U, cfg)
    if abs(slope - 1.0) <= 0.01:
        exponent = (
            _analytic_exponent(spec) + 1.0 if _is_parametric(spec) else None
        )
        return TypeReport(
            TYPE_I,
            exponent,
            (),
            "analytic",
            f"elementary-type set: measure slope {slope:.4f} means "
            "|(U+x) sym-diff U| = O(x) and the weighted integral is finite",
        )
    nodes = _log_nodes(cfg)
    mids = np.sqrt(nodes[:-1] * nodes[1:])
    m_vals = np.array([symdiff_measure(U, float(x)) for x in mids])
    return _local_report_from_nodes(spec, nodes, m_vals, slope, cfg)


def _local_report_from_nodes(
    spec: PhiSpec,
    nodes: np.ndarray,
    m_vals: np.ndarray,
    slope: float,
    cfg: ClassifierConfig,
) -> TypeReport:
    if _is_parametric(spec):
        pieces = _squared_phi_pieces(spec, nodes[:-1], nodes[1:])
        contrib = pieces * m_vals
        note = (
            f"weighted tail-fit; measure slope {slope:.3f}, "
            f"analytic phi-squared exponent {_analytic_exponent(spec):.3f}"
        )
    else:
        contrib = _sampled_weighted_pieces(spec, nodes, m_vals)
        note = (
            "sampled phi: weighted integrand built from grid cell averages; "
            "divergence detection is resolution-limited"
        )
    curve = _tail_curve(contrib, nodes)
    samples = _select_samples(nodes, curve, cfg.fit_points * 3)
    fit_window = cfg.t_min * 10.0**cfg.fit_decades
    fit_samples = _select_samples(nodes, curve, cfg.fit_points * 3, t_max=fit_window)
    verdict, p_hat = convergence_detector(fit_samples, cfg.margin)
    return TypeReport(
        _verdict_to_type(verdict), p_hat, tuple(samples), "tail-fit", note
    )


def _sampled_weighted_pieces(
    spec: PhiSpec, nodes: np.ndarray, m_vals: np.ndarray
) -> np.ndarray:
    """Grid route for samples: |phi - phi * mirror(phi)|^2 weighted by m."""
    f = spec.samples
    grid = f.grid
    pv = f.values
    acorr = grid.h * np.convolve(pv, pv[::-1])[grid.n - 1 :]
    dens_cells = (pv - acorr) ** 2
    cell_idx = np.clip((np.sqrt(nodes[:-1] * nodes[1:]) / grid.h).astype(int), 0, grid.n - 1)
    width = nodes[1:] - nodes[:-1]
    return dens_cells[cell_idx] * width * m_vals


# ---------------------------------------------------------------------------
# iso probe


@dataclass(frozen=True)
class IsoReport:
    t_values: tuple
    r_values: tuple
    s_values: tuple
    verdict: str
    sufficient_isomorphic: bool
    vacuous: bool
    notes: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _phi_in_l2(spec: PhiSpec, cfg: ClassifierConfig) -> bool:
    if spec.variant in ("zero", "indicator"):
        return True
    if spec.variant == "power_law":
        return False
    verdict, _ = _grid_l2_tail_verdict(spec.samples, cfg)
    return verdict == "converges"


def _grid_l2_tail_verdict(f: GridFunction, cfg: ClassifierConfig) -> tuple[str, float]:
    tails = _grid_squared_tail(f.values, f.grid)
    nodes = f.grid.edges
    keep = (nodes >= cfg.t_min) & (nodes <= 1.0 + 1e-12)
    samples = _select_samples(nodes[keep], tails[keep], cfg.fit_points * 3)
    return convergence_detector(samples, cfg.margin)


def iso_probe(
    spec1: PhiSpec,
    spec2: PhiSpec,
    t_list: Optional[Sequence[float]] = None,
    cfg: Optional[ClassifierConfig] = None,
) -> IsoReport:
    """Necessary-condition probe for isomorphism of the two sum systems.

    Reports the tail ratios r(t) = ||phi2|| / ||phi1|| and
    s(t) = ||phi1 - phi2|| / ||phi1|| on L2(t, 1), a FAIL/CONSISTENT trend
    verdict, and the sufficient direction (phi1 - phi2 square integrable
    implies isomorphic).  CONSISTENT never implies isomorphism.
    """
    cfg = cfg or ClassifierConfig()
    h = cfg.sample_grid_h
    grid = Grid(h, int(round(1.0 / h)))
    f1 = materialize_phi(spec1, grid)
    f2 = materialize_phi(spec2, grid)
    tail1 = _grid_squared_tail(f1.values, grid)
    tail2 = _grid_squared_tail(f2.values, grid)
    tail12 = _grid_squared_tail(f1.values - f2.values, grid)
    if t_list is None:
        t_list = np.geomspace(1e-3, 0.25, 12)
    ts = np.sort(np.asarray(list(t_list), dtype=float))
    idx = np.clip((ts / h).round().astype(int), 0, grid.n)
    denom = tail1[idx]
    if np.any(denom <= 0.0):
        raise ValueError("phi1 tail norm vanished on the probe range")
    r = np.sqrt(tail2[idx] / denom)
    s = np.sqrt(tail12[idx] / denom)
    vacuous = _phi_in_l2(spec1, cfg)
    fails = []
    if _trend_away(ts, np.abs(r - 1.0)):
        fails.append("r(t) stays away from 1")
    if _trend_away(ts, np.abs(s)):
        fails.append("s(t) stays away from 0")
    if vacuous:
        verdict = "VACUOUS"
    elif fails:
        verdict = "NECESSARY-CONDITIONS-FAIL"
    else:
        verdict = "CONSISTENT"
    if np.max(np.abs(f1.values - f2.values)) == 0.0:
        sufficient = True
    else:
        diff_verdict, _ = _grid_l2_tail_verdict(f1 - f2, cfg)
        sufficient = diff_verdict == "converges"
    notes = "; ".join(fails)
    if vacuous:
        notes = (
            "phi1 is square integrable so the necessary conditions are vacuous"
            + ("; " + notes if notes else "")
        )
    return IsoReport(
        tuple(float(t) for t in ts),
        tuple(float(v) for v in r),
        tuple(float(v) for v in s),
        verdict,
        bool(sufficient),
        bool(vacuous),
        notes,
    )


def _trend_away(ts: np.ndarray, dev: np.ndarray, tol: float = 0.05) -> bool:
    """True when the deviation neither is small nor shrinks toward t -> 0."""
    sel = ts <= ts[0] * 10.0 * (1.0 + 1e-12)
    d = dev[sel]
    end, start = d[0], d[-1]
    if end <= tol:
        return False
    return end >= 0.9 * start


# ---------------------------------------------------------------------------
# phase-diagram sweep


@dataclass(frozen=True)
class SweepCell:
    beta: float
    gamma: float
    report: TypeReport
    boundary_distance: float


def _threads(cfg: ClassifierConfig, njobs: int) -> int:
    if cfg.threads is not None:
        return max(1, cfg.threads)
    return max(1, min(njobs, os.cpu_count() or 1))


def sweep(
    beta_list: Sequence[float],
    gamma_list: Sequence[float],
    cfg: Optional[ClassifierConfig] = None,
) -> list[SweepCell]:
    """Classify the power-law family against profile-constructed sets.

    The expected phase boundary is gamma = 1 - 2 beta; cells are returned
    sorted by (beta, gamma).
    """
    cfg = cfg or ClassifierConfig()
    betas = sorted(float(b) for b in beta_list)
    gammas = sorted(float(g) for g in gamma_list)
    nodes = _log_nodes(cfg)
    mids = np.sqrt(nodes[:-1] * nodes[1:])

    def per_gamma(gam: float) -> list[SweepCell]:
        profile = ProfileF(gam, scale=cfg.profile_scale)
        if profile(cfg.t_min) + 2.0 > cfg.n_max:
            raise ValueError(
                f"n_max={cfg.n_max} is too small to resolve gamma={gam} "
                f"down to t_min={cfg.t_min}"
            )
        U = construct_U(profile, cfg.n_max)
        m_vals = np.array([symdiff_measure(U, float(x)) for x in mids])
        slope = _measure_slope_from(mids, m_vals)
        cells = []
        for beta in betas:
            spec = PhiSpec("power_law", beta=beta)
            report = _local_report_from_nodes(spec, nodes, m_vals, slope, cfg)
            distance = 2.0 * beta - 2.0 + gam + 1.0
            cells.append(SweepCell(beta, gam, report, distance))
        return cells

    results: list[SweepCell] = []
    with ThreadPoolExecutor(max_workers=_threads(cfg, len(gammas))) as pool:
        for chunk in pool.map(per_gamma, gammas):
            results.extend(chunk)
    results.sort(key=lambda cell: (cell.beta, cell.gamma))
    return results


def _measure_slope_from(mids: np.ndarray, m_vals: np.ndarray) -> float:
    sel = mids <= mids[0] * 100.0 * (1.0 + 1e-12)
    return float(np.polyfit(np.log(mids[sel]), np.log(m_vals[sel]), 1)[0])


# ---------------------------------------------------------------------------
# sum-system Hilbert-Schmidt probe


@dataclass(frozen=True)
class SumSystemReport:
    norms: tuple
    verdict: str
    scale: float

    def to_dict(self) -> dict:
        return asdict(self)


def sumsystem_hs_probe(
    spec1: PhiSpec,
    spec2: PhiSpec,
    t: float,
    resolutions: Sequence[float],
    cfg: Optional[ClassifierConfig] = None,
) -> SumSystemReport:
    """Difference of the two compressed Gram matrices at the fitted scale.

    The scalar is fitted by least squares on the matrix diagonals; the
    verdict follows the same growth thresholds as the divergence probe.
    """
    cfg = cfg or ClassifierConfig()
    res = list(resolutions)
    if len(res) < 3:
        raise ValueError("need at least three resolutions for a verdict")
    floor = 0.05
    for spec in (spec1, spec2):
        sig = lower_bound_probe(spec, t, res[:1])
        if sig[0] < floor:
            raise ValueError(
                "compression is numerically non-invertible "
                f"(smallest singular value {sig[0]:.3g} < {floor})"
            )
    norms = []
    scale = 1.0
    for h in res:
        n = int(round(max(1.0, t) / h))
        grid = Grid(h, n)
        g1 = toeplitz_matrix("AbsM2", materialize_phi(spec1, grid), None, t).matrix
        g2 = toeplitz_matrix("AbsM2", materialize_phi(spec2, grid), None, t).matrix
        d1 = np.diag(g1)
        d2 = np.diag(g2)
        scale = float(np.dot(d1, d2) / np.dot(d2, d2))
        norms.append(hs_norm(g1 - scale * g2))
    verdict = _growth_verdict(norms, cfg.cauchy_tol, cfg.growth_tol)
    return SumSystemReport(tuple(norms), verdict, scale)
