"""Experiment drivers, configuration files and result persistence.

Config files are ``key = value`` lines with ``#`` comments. Keys are the
:class:`~spnodal.solver.SolverConfig` fields; anything else is an error.
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .functional import cross_nonlocal, derivative_action, energy, energy_split_check, norm_sq, split_parts
from .grid import RadialFunction, make_grid
from .models import check_V_hypotheses, constant_potential
from .nehari import project_nodal, rescale_parts
from .poisson import newton_potential, nonlocal_energy, potential_values
from .solver import NodalSolveResult, SolverConfig, decay_rate, solve_ground, solve_nodal

FORMAT_VERSION = 1
SWEEP_HEADER = ("R", "c_R", "residual", "nodal_domains", "node_radius", "iterations")


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""


# ---------------------------------------------------------------------------
# configuration


def _field_types() -> dict[str, type]:
    hints = {"int": int, "float": float, "str": str, "float | None": float}
    return {f.name: hints[f.type if isinstance(f.type, str) else f.type.__name__] for f in dataclasses.fields(SolverConfig)}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    types = _field_types()
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            kind = types[key]
            if kind is int:
                val = float(value)
                if val != int(val):
                    raise ValueError
                out[key] = int(val)
            else:
                out[key] = kind(value)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value {value!r} for {key}") from None
    return out


def load_config(path, **overrides) -> SolverConfig:
    """SolverConfig from an optional file plus keyword overrides (None values ignored)."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values = parse_config_text(text, str(path))
    values.update({k: v for k, v in overrides.items() if v is not None})
    # an explicit R without an explicit node guess keeps the default split at R/2
    if "node_guess" not in values:
        values["node_guess"] = None
    try:
        return SolverConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def format_config(config: SolverConfig) -> str:
    lines = [f"{k} = {v}" for k, v in config.to_dict().items()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# experiments


@dataclass
class SweepRow:
    R: float
    c_R: float
    residual: float
    nodal_domains: int
    node_radius: float
    iterations: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.nodal_domains == 2


@dataclass
class LevelReport:
    c0_estimate: float
    c: float
    c_inf: float
    gap: float
    strict: bool
    margin: float
    R_large: float
    degenerate: bool = False
    nodal: NodalSolveResult | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "c0_estimate": self.c0_estimate,
            "c": self.c,
            "c_inf": self.c_inf,
            "gap": self.gap,
            "strict": self.strict,
            "margin": self.margin,
            "R_large": self.R_large,
            "degenerate": self.degenerate,
            "decay_delta": None if self.nodal is None else self.nodal.decay_delta,
        }


def scaled_config(base: SolverConfig, R: float) -> SolverConfig:
    """Copy of ``base`` on B_R with the grid spacing of ``base`` kept fixed."""
    h = base.R_support / base.n
    n = R / h
    if abs(n - round(n)) > 1e-9 * n:
        raise ValueError(f"R = {R} is not a multiple of the spacing {h}")
    ratio = base.node_guess / base.R_support
    return dataclasses.replace(base, R_support=float(R), n=int(round(n)), node_guess=ratio * R)


def _sweep_row(cfg: SolverConfig) -> SweepRow:
    try:
        res = solve_nodal(cfg)
    except Exception as exc:  # recorded in the row, the sweep continues
        best = getattr(exc, "best", None)
        if isinstance(best, NodalSolveResult):
            return SweepRow(cfg.R_support, best.level, best.residual, best.nodal_domains,
                            best.node_radii[0] if best.node_radii else math.nan, best.iterations, repr(exc))
        return SweepRow(cfg.R_support, math.nan, math.nan, 0, math.nan, 0, repr(exc))
    radius = res.node_radii[0] if res.node_radii else math.nan
    return SweepRow(cfg.R_support, res.level, res.residual, res.nodal_domains, radius, res.iterations)


def sweep_R(base: SolverConfig, radii, workers: int = 1) -> list[SweepRow]:
    """One nodal solve per radius, with the spacing of ``base`` held fixed.

    Rows keep the input order. ``workers > 1`` runs rows in separate processes.
    """
    radii = [float(r) for r in radii]
    if not radii:
        raise ValueError("need at least one radius")
    if any(b < a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be non-decreasing")
    if radii[0] < 4:
        raise ValueError("radii must be >= 4")
    configs = [scaled_config(base, R) for R in radii]
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(configs))) as pool:
            return list(pool.map(_sweep_row, configs))
    return [_sweep_row(c) for c in configs]


def check_sweep(rows: list[SweepRow], rel_tol: float = 1e-3) -> dict:
    """Monotonicity of c_R within rel_tol * c_{R_min} and shrinking successive gaps."""
    levels = [r.c_R for r in rows]
    tol = rel_tol * levels[0]
    diffs = np.diff(levels)
    gaps = np.abs(diffs)
    return {
        "all_ok": all(r.ok for r in rows),
        "tol_mono": tol,
        "non_increasing": bool(np.all(diffs <= tol)),
        "gaps": gaps.tolist(),
        "gaps_shrinking": bool(np.all(np.diff(gaps) < 0)),
    }


def level_inequality(base: SolverConfig, R_large: float = 16.0) -> LevelReport:
    """Ground levels with V and with V_inf, and the nodal level, all on B_{R_large}."""
    if R_large < 16:
        raise ValueError("R_large must be >= 16")
    cfg = scaled_config(base, R_large)
    V = cfg.potential_model()
    degenerate = V.kind == "constant"
    if not degenerate and not check_V_hypotheses(V).passed:
        raise ValueError("potential fails the sampled V hypotheses")
    legs = {}
    for name, run in (
        ("ground(V)", lambda: solve_ground(cfg)),
        ("ground(V_inf)", lambda: legs["ground(V)"] if degenerate else solve_ground(cfg, constant_potential(V.V_inf))),
        ("nodal(V)", lambda: solve_nodal(cfg)),
    ):
        try:
            legs[name] = run()
        except Exception as exc:
            raise RuntimeError(f"level_inequality leg {name} failed: {exc}") from exc
    c = legs["ground(V)"].level
    c_inf = legs["ground(V_inf)"].level
    c0 = legs["nodal(V)"].level
    gap = c + c_inf - c0
    margin = 1e-3 * c_inf
    return LevelReport(c0, c, c_inf, gap, bool(gap > margin), margin, float(R_large), degenerate, legs["nodal(V)"])


# ---------------------------------------------------------------------------
# lemma verification


def _random_profile(grid, rng, sign_change: bool):
    R = grid.R_support
    r = grid.nodes
    c = rng.normal(size=3)
    base = (1 + 0.3 * np.cos(c[0] * r + c[1])) * np.exp(-abs(c[2]) * r / R) * (1 - r / R)
    if sign_change:
        base = base * (rng.uniform(0.2, 0.8) * R - r)
    vals = np.where(r < R, base, 0.0)
    return RadialFunction(grid, vals)


def verify_lemmas(config: SolverConfig, samples: int = 10) -> list[tuple[str, bool, str]]:
    """Numerical checks of the structural identities and bounds, plus a nodal solve."""
    rng = np.random.default_rng(config.seed)
    V = config.potential_model()
    fmodel = config.nonlinearity()
    grid = make_grid(config.R_support, config.R_support, config.n)
    h = grid.h_max
    checks = []

    worst_energy = worst_scale = 0.0
    nonneg = True
    for _ in range(samples):
        u = _random_profile(grid, rng, sign_change=False)
        sol = newton_potential(u)
        nl = nonlocal_energy(u)
        worst_energy = max(worst_energy, abs(sol.dirichlet_energy - nl) / (h * h * (1 + nl)))
        nonneg &= bool(np.all(sol.phi.values >= 0))
        for t in (0.5, 2.0, 10.0):
            phi_t = potential_values(grid, (t * u.values) ** 2)
            worst_scale = max(worst_scale, float(np.max(np.abs(phi_t - t * t * sol.phi.values)) / np.max(np.abs(t * t * sol.phi.values))))
    checks.append(("poisson_energy_identity", worst_energy <= 50.0, f"max |grad phi|^2 - phi u^2 defect / h^2(1+.) = {worst_energy:.3g}"))
    checks.append(("poisson_nonneg", nonneg, "phi_u >= 0 at every node"))
    checks.append(("poisson_scaling", worst_scale <= 1e-12, f"phi_tu = t^2 phi_u, max rel defect {worst_scale:.2g}"))

    worst_cert = 0.0
    bound_ok = True
    for _ in range(samples):
        u = _random_profile(grid, rng, sign_change=True)
        pair = project_nodal(u, V, fmodel, config.tol_constraint)
        w = rescale_parts(u, pair.t, pair.s)
        wp, wm = split_parts(w)
        n = norm_sq(w, V)
        worst_cert = max(worst_cert, abs(derivative_action(w, wp, V, fmodel)) / n, abs(derivative_action(w, wm, V, fmodel)) / n)
        up, um = split_parts(u)
        if derivative_action(u, up, V, fmodel) <= 0 and derivative_action(u, um, V, fmodel) <= 0:
            bound_ok &= pair.t <= 1 + 1e-8 and pair.s <= 1 + 1e-8
    checks.append(("projection_certified", worst_cert <= config.tol_constraint, f"max |J'(w)w+-| / ||w||^2 = {worst_cert:.2g}"))
    checks.append(("projection_bound", bound_ok, "t, s <= 1 whenever J'(u)u+- <= 0"))

    ground = solve_ground(config)
    e = energy(ground.profile, V, fmodel)
    checks.append(("nehari_lower_bound", e.J >= e.norm_sq / 4 - config.tol_residual,
                   f"J = {e.J:.6g} >= ||u||^2/4 = {e.norm_sq / 4:.6g}"))

    nodal = solve_nodal(config)
    w = nodal.profile
    wp, wm = split_parts(w)
    n = norm_sq(w, V)
    defect = max(abs(derivative_action(wp, wp, V, fmodel) + cross_nonlocal(wp, wm)),
                 abs(derivative_action(wm, wm, V, fmodel) + cross_nonlocal(wm, wp))) / n
    checks.append(("nodal_converged", nodal.residual <= config.tol_residual and nodal.nodal_domains == 2,
                   f"residual {nodal.residual:.3g}, {nodal.nodal_domains} nodal domains"))
    checks.append(("nodal_part_slopes", defect <= 1e-6 and derivative_action(wp, wp, V, fmodel) < 0
                   and derivative_action(wm, wm, V, fmodel) < 0, f"split defect / ||w||^2 = {defect:.2g}"))
    split = energy_split_check(w, V, fmodel)
    checks.append(("energy_split", split <= 1e-10 * (1 + abs(nodal.level)), f"defect {split:.2g}"))
    checks.append(("nodal_above_ground", nodal.level > ground.level, f"{nodal.level:.6g} > {ground.level:.6g}"))
    R = config.R_support
    try:
        delta = decay_rate(w, (0.5 * R, 0.9 * R))
        ok = delta >= 0.3 * math.sqrt(V.alpha)
        detail = f"delta = {delta:.4g} (threshold {0.3 * math.sqrt(V.alpha):.3g})"
    except ValueError as exc:
        ok, detail = False, str(exc)
    checks.append(("decay", ok, detail))
    return checks


# ---------------------------------------------------------------------------
# persistence


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def result_document(result, config: SolverConfig | None = None, kind: str | None = None) -> dict:
    if isinstance(result, NodalSolveResult):
        body, kind = result.to_dict(), kind or "nodal_solve"
    elif isinstance(result, LevelReport):
        body, kind = result.to_dict(), kind or "level_inequality"
    elif isinstance(result, list) and all(isinstance(r, SweepRow) for r in result):
        body, kind = {"rows": [dataclasses.asdict(r) for r in result], "checks": check_sweep(result)}, kind or "sweep"
    else:
        raise TypeError(f"cannot serialize {type(result).__name__}")
    return {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": None if config is None else config.to_dict(),
        "result": _jsonable(body),
    }


def _write(path: Path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _profile_rows(result: NodalSolveResult, config: SolverConfig | None):
    u = result.profile
    phi = potential_values(u.grid, u.values**2)
    keep = np.ones(u.grid.nodes.size, dtype=bool)
    if config is not None:
        # drop the node inserted at the sign change so rows match the uniform grid
        h = config.R_support / config.n
        idx = u.grid.nodes / h
        keep = np.abs(idx - np.round(idx)) <= 1e-9 * np.maximum(idx, 1.0)
    return zip(u.grid.nodes[keep], u.values[keep], phi[keep])


def write_results(result, out_dir, config: SolverConfig | None = None, kind: str | None = None) -> list[Path]:
    """Write result.json plus profile.csv (solves) or sweep.csv (sweeps) into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    doc = result_document(result, config, kind)
    written = []
    path = out / "result.json"
    _write(path, json.dumps(doc, indent=2, allow_nan=False) + "\n")
    written.append(path)

    if isinstance(result, NodalSolveResult):
        lines = ["r,u,phi"] + [f"{r:.17g},{u:.17g},{p:.17g}" for r, u, p in _profile_rows(result, config)]
        path = out / "profile.csv"
        _write(path, "\n".join(lines) + "\n")
        written.append(path)
    elif isinstance(result, LevelReport) and result.nodal is not None:
        lines = ["r,u,phi"] + [f"{r:.17g},{u:.17g},{p:.17g}" for r, u, p in _profile_rows(result.nodal, config and scaled_config(config, result.R_large))]
        path = out / "profile.csv"
        _write(path, "\n".join(lines) + "\n")
        written.append(path)
    elif isinstance(result, list):
        path = out / "sweep.csv"
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(SWEEP_HEADER)
                for row in result:
                    writer.writerow([f"{row.R:.17g}", f"{row.c_R:.17g}", f"{row.residual:.17g}", row.nodal_domains,
                                     f"{row.node_radius:.17g}", row.iterations])
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return written


def read_result(path) -> dict:
    with open(os.fspath(path), encoding="utf-8") as fh:
        return json.load(fh)
