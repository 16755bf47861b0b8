"""Command-line front end: configuration, dispatch, and report emission.

Exit codes: 0 on success, 2 on validation errors (bad flags, violated
config invariants), 3 on numerical failure (solver blow-up, or an
Inconclusive verdict under --strict).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import reports
from .classify import (
    ClassifierConfig,
    TYPE_UNDECIDED,
    global_type,
    iso_probe,
    local_type,
    sweep,
)
from .cocycles import (
    CocyclePair,
    c_interval,
    d_interval,
    interval_overlap,
    pairing,
)
from .grids import Grid, norm1
from .kernels import (
    PhiSpec,
    ShiftPerturbation,
    idempotent_check,
    kernel_cocycle_residual,
    left_inverse_residual,
    materialize_phi,
    solve_renewal,
)
from .opensets import ProfileF, construct_U, sandwich_check
from .toeplitz import toeplitz_matrix

COMMANDS = (
    "classify-global",
    "classify-local",
    "cocycle",
    "kernel-check",
    "openset",
    "toeplitz-diag",
    "iso-probe",
    "sweep",
)

_L1_POLICY = 1.0 / 3.0


def _number(text: str) -> float:
    """Parse a float, accepting fractions like 1/512."""
    try:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad number {text!r}") from exc


def _number_list(text: str) -> list[float]:
    return [_number(part) for part in text.split(",") if part]


def _linspace(text: str) -> list[float]:
    """Parse start:stop:count into an inclusive evenly spaced list."""
    try:
        start, stop, count = text.split(":")
        return [float(v) for v in np.linspace(_number(start), _number(stop), int(count))]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected start:stop:count, got {text!r}"
        ) from exc


@dataclass
class RunConfig:
    """Fully resolved run configuration; embedded in every JSON report."""

    command: str
    phi: dict = field(default_factory=lambda: {"variant": "zero"})
    phi2: Optional[dict] = None
    h: float = 1.0 / 256
    horizon: float = 2.0
    lambda_cutoff: float = 1024.0
    lambda_samples: int = 1 << 14
    gamma: float = 0.5
    log_power: float = 0.0
    n_max: int = 10000
    betas: tuple = (0.1, 0.2, 0.3, 0.4, 0.5)
    gammas: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    t: float = 0.5
    resolutions: tuple = (1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512)
    x_min: float = 1e-4
    x_count: int = 50
    margin: float = 0.05
    cauchy_tol: float = 0.05
    growth_tol: float = 0.15
    seed: int = 0
    strict: bool = False
    plot: bool = True
    pairing_battery: bool = False
    threads: Optional[int] = None
    output: Optional[str] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        d["gammas"] = list(self.gammas)
        d["resolutions"] = list(self.resolutions)
        return d

    def classifier(self) -> ClassifierConfig:
        return ClassifierConfig(
            margin=self.margin,
            cauchy_tol=self.cauchy_tol,
            growth_tol=self.growth_tol,
            n_max=self.n_max,
            resolutions=tuple(self.resolutions),
            threads=self.threads,
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccrlab",
        description="numerical laboratory for perturbed shift semigroups",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, help="JSON config file; flags win")
        p.add_argument("--output", type=str, help="output path (csv or json)")
        p.add_argument("--seed", type=int, help="seed recorded for provenance")
        p.add_argument("--strict", action="store_true", default=None,
                       help="exit 3 on Inconclusive verdicts")
        p.add_argument("--no-plot", dest="plot", action="store_false", default=None,
                       help="skip the companion figure")
        p.add_argument("--threads", type=int, help="parallel worker cap")
        p.add_argument("--margin", type=_number, help="convergence margin around -1")
        p.add_argument("--cauchy-tol", type=_number)
        p.add_argument("--growth-tol", type=_number)

    def phi_flags(p, suffix=""):
        p.add_argument(f"--phi{suffix}", type=str,
                       choices=["zero", "indicator", "power_law", "samples"])
        p.add_argument(f"--c{suffix}", type=_number)
        p.add_argument(f"--beta{suffix}", type=_number)
        p.add_argument(f"--scale{suffix}", type=_number)
        p.add_argument(f"--truncate-to-unit{suffix}", action="store_true", default=None)
        p.add_argument(f"--l1-target{suffix}", type=_number)
        p.add_argument(f"--samples-file{suffix}", type=str)

    def grid_flags(p):
        p.add_argument("--h", type=_number, help="cell width, e.g. 1/512")
        p.add_argument("--horizon", type=_number)

    def openset_flags(p):
        p.add_argument("--gamma", type=_number)
        p.add_argument("--log-power", type=_number)
        p.add_argument("--n-max", type=int)

    p = sub.add_parser("classify-global", help="type of the flow from phi")
    common(p); phi_flags(p)

    p = sub.add_parser("classify-local", help="type of the local algebra over U")
    common(p); phi_flags(p); openset_flags(p)

    p = sub.add_parser("cocycle", help="cocycle profiles and pairing battery")
    common(p); phi_flags(p); grid_flags(p)
    p.add_argument("--pairing-battery", action="store_true", default=None)

    p = sub.add_parser("kernel-check", help="kernel and semigroup residual ladder")
    common(p); phi_flags(p); grid_flags(p)
    p.add_argument("--t", type=_number)
    p.add_argument("--resolutions", type=_number_list)

    p = sub.add_parser("openset", help="profile construction and sandwich bounds")
    common(p); openset_flags(p)
    p.add_argument("--x-min", type=_number)
    p.add_argument("--x-count", type=int)
    p.add_argument("--emit", dest="output", type=str, help="alias for --output")

    p = sub.add_parser("toeplitz-diag", help="compression norms across resolutions")
    common(p); phi_flags(p)
    p.add_argument("--t", type=_number)
    p.add_argument("--resolutions", type=_number_list)

    p = sub.add_parser("iso-probe", help="sum-system isomorphism necessary conditions")
    common(p); phi_flags(p); phi_flags(p, suffix="2")

    p = sub.add_parser("sweep", help="beta-gamma phase diagram")
    common(p)
    p.add_argument("--betas", type=_linspace, help="start:stop:count")
    p.add_argument("--gammas", type=_linspace, help="start:stop:count")
    p.add_argument("--n-max", type=int)

    return parser


_PHI_KEYS = ("phi", "c", "beta", "scale", "truncate_to_unit", "l1_target", "samples_file")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    raw = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"invariant config_keys: unknown config keys {sorted(unknown)}")
    cfg = RunConfig(command=args.command)
    for key, val in file_cfg.items():
        setattr(cfg, key, tuple(val) if isinstance(val, list) else val)
    phi1 = dict(cfg.phi or {})
    phi2 = dict(cfg.phi2 or {})
    for key, val in raw.items():
        if key == "command":
            continue
        if key in _PHI_KEYS:
            phi1[_phi_key(key)] = val
        elif key.rstrip("2") in _PHI_KEYS and key.endswith("2"):
            phi2[_phi_key(key[:-1])] = val
        elif key in ("betas", "gammas", "resolutions"):
            setattr(cfg, key, tuple(val))
        else:
            setattr(cfg, key, val)
    cfg.phi = phi1
    if phi2:
        cfg.phi2 = phi2
    cfg.command = args.command
    return cfg


def _phi_key(flag: str) -> str:
    return {"phi": "variant", "samples_file": "samples_file"}.get(flag, flag)


def _build_phispec(d: dict) -> PhiSpec:
    d = dict(d)
    variant = d.pop("variant", "zero")
    samples = None
    path = d.pop("samples_file", None)
    if variant == "samples":
        if path is None:
            raise ValueError(
                "invariant samples_file: the samples variant needs --samples-file"
            )
        with open(path) as fh:
            raw = json.load(fh)
        vals = np.asarray(raw["values"], dtype=float)
        samples = Grid(float(raw["h"]), vals.size).function(vals)
    return PhiSpec(
        variant=variant,
        c=float(d.pop("c", 0.25)),
        beta=float(d.pop("beta", 0.5)),
        scale=float(d.pop("scale", 1.0)),
        samples=samples,
        truncate_to_unit=bool(d.pop("truncate_to_unit", False)),
        l1_target=d.pop("l1_target", None),
    )


def _engine_grid(cfg: RunConfig) -> Grid:
    if cfg.horizon < 2.0 - 1e-12:
        raise ValueError(
            "invariant kernel_horizon: horizon must be >= 2 when kernels are "
            f"needed, got {cfg.horizon}"
        )
    n = int(round(cfg.horizon / cfg.h))
    if abs(n * cfg.h - cfg.horizon) > 1e-9:
        raise ValueError(
            f"invariant grid_commensurate: h={cfg.h} does not divide the "
            f"horizon {cfg.horizon}"
        )
    return Grid(cfg.h, n)


def _enforce_l1_policy(phi, label: str) -> None:
    mass = norm1(phi)
    if mass >= _L1_POLICY - 1e-12:
        raise ValueError(
            f"invariant l1_policy: ||phi||_1 = {mass:.4f} must stay below 1/3 "
            f"for {label}; set --l1-target"
        )


def _out(cfg: RunConfig, suffix: str) -> Path:
    return Path(cfg.output or f"{cfg.command}{suffix}")


# ---------------------------------------------------------------------------
# command implementations


def _cmd_classify_global(cfg: RunConfig) -> int:
    spec = _build_phispec(cfg.phi)
    report = global_type(spec, cfg.classifier())
    path = reports.write_json(
        _out(cfg, ".json"),
        {"command": cfg.command, "report": report.to_dict(), "config": cfg.to_dict()},
    )
    print(f"classify-global: {report.verdict} ({report.method}) -> {path}")
    return 3 if cfg.strict and report.verdict == TYPE_UNDECIDED else 0


def _cmd_classify_local(cfg: RunConfig) -> int:
    spec = _build_phispec(cfg.phi)
    profile = ProfileF(cfg.gamma, log_power=cfg.log_power)
    U = construct_U(profile, cfg.n_max)
    report = local_type(spec, U, cfg.classifier())
    path = reports.write_json(
        _out(cfg, ".json"),
        {"command": cfg.command, "report": report.to_dict(), "config": cfg.to_dict()},
    )
    print(f"classify-local: {report.verdict} ({report.method}) -> {path}")
    return 3 if cfg.strict and report.verdict == TYPE_UNDECIDED else 0


_BATTERY = (
    (0.0, 0.25, 0.5, 0.75),
    (0.0, 0.5, 0.25, 0.75),
    (0.0, 0.5, 0.0, 0.5),
    (0.25, 0.5, 0.25, 0.5),
    (0.0, 0.75, 0.25, 0.5),
    (0.125, 0.625, 0.25, 0.75),
    (0.0, 1.0, 0.0, 0.5),
    (0.5, 0.75, 0.0, 0.25),
    (0.25, 0.75, 0.5, 1.0),
    (0.0, 0.125, 0.0625, 0.25),
)


def _cmd_cocycle(cfg: RunConfig) -> int:
    spec = _build_phispec(cfg.phi)
    grid = _engine_grid(cfg)
    phi = materialize_phi(spec, grid)
    _enforce_l1_policy(phi, "cocycle construction")
    engine = ShiftPerturbation(phi)
    pair = CocyclePair.from_engine(engine)
    rows = list(zip(grid.midpoints, pair.cM.values, pair.dM.values))
    path = reports.write_csv(_out(cfg, ".csv"), ["x", "cM", "dM"], rows)
    extra = ""
    if cfg.pairing_battery:
        brows = []
        for q, r, s, t in _BATTERY:
            val = pairing(c_interval(pair.cM, q, r), d_interval(pair.dM, engine, s, t))
            ov = interval_overlap(q, r, s, t)
            brows.append((q, r, s, t, val, ov, abs(val - ov)))
        bpath = reports.write_csv(
            path.with_name(path.stem + "_pairing.csv"),
            ["q", "r", "s", "t", "pairing", "overlap", "abs_error"],
            brows,
        )
        extra = f" and {bpath}"
    if cfg.plot:
        fig = reports.render_series(
            reports.figure_path(path),
            [r[0] for r in rows],
            {"cM": [r[1] for r in rows], "dM": [r[2] for r in rows]},
            "additive cocycle profiles",
            "x",
            "profile value",
        )
        extra += f" and {fig}"
    print(f"cocycle: wrote {path} ({len(rows)} rows){extra}")
    return 0


def _cmd_kernel_check(cfg: RunConfig) -> int:
    spec = _build_phispec(cfg.phi)
    t = cfg.t
    rows = []
    for h in cfg.resolutions:
        grid = _engine_grid(RunConfig(command=cfg.command, h=h, horizon=cfg.horizon))
        phi = materialize_phi(spec, grid)
        _enforce_l1_policy(phi, "semigroup construction")
        engine = ShiftPerturbation(phi)
        rows.append(
            (
                h,
                kernel_cocycle_residual(engine.kernel, t),
                engine.semigroup_residual(t, t),
                left_inverse_residual(engine.perturbed(2 * t), engine.shift(2 * t)),
                idempotent_check(engine.perturbed(2 * t), engine.shift(2 * t)),
            )
        )
    path = reports.write_csv(
        _out(cfg, ".csv"),
        ["h", "eqk_residual", "semigroup_residual", "left_inverse_residual",
         "idempotent_residual"],
        rows,
    )
    extra = ""
    if cfg.plot:
        hs = [r[0] for r in rows]
        fig = reports.render_series(
            reports.figure_path(path),
            hs,
            {
                "kernel equation": [r[1] for r in rows],
                "semigroup": [max(r[2], 1e-18) for r in rows],
            },
            "residual refinement ladder",
            "h",
            "residual",
            logx=True,
            logy=True,
        )
        extra = f" and {fig}"
    print(f"kernel-check: wrote {path} ({len(rows)} resolutions){extra}")
    return 0


def _cmd_openset(cfg: RunConfig) -> int:
    profile = ProfileF(cfg.gamma, log_power=cfg.log_power)
    U = construct_U(profile, cfg.n_max)
    x_top = min(1.0, profile.inverse(1.0)) * 0.99
    xs = np.geomspace(cfg.x_min, x_top, cfg.x_count)
    report = sandwich_check(U, profile, xs)
    path = reports.write_csv(
        _out(cfg, ".csv"), ["x", "lower", "measure", "upper"], report.rows
    )
    extra = ""
    if cfg.plot:
        fig = reports.render_sandwich(reports.figure_path(path), report.rows)
        extra = f" and {fig}"
    status = "PASS" if report.passed else "FAIL"
    print(
        f"openset: sandwich {status} over {len(report.rows)} points, "
        f"{len(U.intervals)} intervals -> {path}{extra}"
    )
    return 0 if report.passed else 3


def _cmd_toeplitz_diag(cfg: RunConfig) -> int:
    spec = _build_phispec(cfg.phi)
    t = cfg.t
    rows = []
    for h in cfg.resolutions:
        horizon = max(1.0, t)
        grid = Grid(h, int(round(horizon / h)))
        phi = materialize_phi(spec, grid)
        _enforce_l1_policy(phi, "Toeplitz compressions")
        psi = solve_renewal(phi)
        for tag in ("M", "Minv", "AbsM2"):
            mat = toeplitz_matrix(tag, phi, psi, t)
            sing = np.linalg.svd(mat.matrix, compute_uv=False)
            rows.append((h, tag, float(np.linalg.norm(mat.matrix)), float(sing[-1])))
    path = reports.write_csv(
        _out(cfg, ".csv"),
        ["h", "symbol_tag", "hs_norm", "smallest_singular_value"],
        rows,
    )
    extra = ""
    if cfg.plot:
        hs = sorted({r[0] for r in rows}, reverse=True)
        series = {
            tag: [r[3] for r in rows if r[1] == tag] for tag in ("M", "Minv", "AbsM2")
        }
        fig = reports.render_series(
            reports.figure_path(path), hs, series,
            "smallest singular value of the compression",
            "h", "sigma_min", logx=True,
        )
        extra = f" and {fig}"
    print(f"toeplitz-diag: wrote {path} ({len(rows)} rows){extra}")
    return 0


def _cmd_iso_probe(cfg: RunConfig) -> int:
    spec1 = _build_phispec(cfg.phi)
    if not cfg.phi2:
        raise ValueError("invariant phi2: iso-probe needs a second spec (--phi2 ...)")
    spec2 = _build_phispec(cfg.phi2)
    report = iso_probe(spec1, spec2, cfg=cfg.classifier())
    rows = list(zip(report.t_values, report.r_values, report.s_values))
    path = reports.write_csv(_out(cfg, ".csv"), ["t", "r_ratio", "s_ratio"], rows)
    jpath = reports.write_json(
        path.with_suffix(".json"),
        {"command": cfg.command, "report": report.to_dict(), "config": cfg.to_dict()},
    )
    extra = f" and {jpath}"
    if cfg.plot:
        fig = reports.render_series(
            reports.figure_path(path),
            [r[0] for r in rows],
            {"r(t)": [r[1] for r in rows], "s(t)": [r[2] for r in rows]},
            "isomorphism necessary-condition ratios",
            "t", "ratio", logx=True,
        )
        extra += f" and {fig}"
    print(f"iso-probe: {report.verdict} -> {path}{extra}")
    return 0


def _cmd_sweep(cfg: RunConfig) -> int:
    ccfg = cfg.classifier()
    if cfg.threads is None:
        env = os.environ.get("CCRLAB_THREADS")
        if env:
            ccfg = ClassifierConfig(**{**asdict(ccfg), "threads": int(env)})
    cells = sweep(cfg.betas, cfg.gammas, ccfg)
    rows = [
        (
            c.beta,
            c.gamma,
            c.report.verdict,
            c.report.estimated_exponent,
            c.boundary_distance,
        )
        for c in cells
    ]
    path = reports.write_csv(
        _out(cfg, ".csv"),
        ["beta", "gamma", "verdict", "exponent", "boundary_distance"],
        rows,
    )
    extra = ""
    if cfg.plot:
        fig = reports.render_sweep(reports.figure_path(path), rows)
        extra = f" and {fig}"
    counts = {}
    for r in rows:
        counts[r[2]] = counts.get(r[2], 0) + 1
    print(f"sweep: {len(rows)} cells {counts} -> {path}{extra}")
    return 0


_DISPATCH = {
    "classify-global": _cmd_classify_global,
    "classify-local": _cmd_classify_local,
    "cocycle": _cmd_cocycle,
    "kernel-check": _cmd_kernel_check,
    "openset": _cmd_openset,
    "toeplitz-diag": _cmd_toeplitz_diag,
    "iso-probe": _cmd_iso_probe,
    "sweep": _cmd_sweep,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return _DISPATCH[cfg.command](cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
