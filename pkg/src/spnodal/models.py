"""Nonlinearities f and radial potentials V, with sampled hypothesis checks.

The checks are finite-sample: limits at 0 and infinity are replaced by
monotone-trend tests on log-spaced samples, so every report is labelled
``sampled`` rather than proved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class NonlinearityModel:
    """f(s) = |s|^(p-2) s for ``kind == "power"``."""

    p: float = 5.0
    kind: str = "power"

    def __post_init__(self) -> None:
        if self.kind != "power":
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if not (math.isfinite(self.p) and self.p > 2.0):
            raise ValueError("power nonlinearity needs p > 2")

    @property
    def homogeneity(self) -> float:
        """Degree q with f(t s) = t^q f(s) for t > 0."""
        return self.p - 1.0

    def f(self, s):
        s = np.asarray(s, dtype=float)
        return np.abs(s) ** (self.p - 2.0) * s

    def F(self, s):
        s = np.asarray(s, dtype=float)
        return np.abs(s) ** self.p / self.p

    def fprime(self, s):
        s = np.asarray(s, dtype=float)
        return (self.p - 1.0) * np.abs(s) ** (self.p - 2.0)

    def H(self, s):
        """s f(s) - 4 F(s)."""
        s = np.asarray(s, dtype=float)
        return s * self.f(s) - 4.0 * self.F(s)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p}


def eval_nonlinearity(model: NonlinearityModel, s: float) -> tuple[float, float, float]:
    return float(model.f(s)), float(model.F(s)), float(model.fprime(s))


def _default_rho(r):
    return 0.5 / (1.0 + np.asarray(r, dtype=float))


@dataclass(frozen=True)
class PotentialModel:
    """Radial potential V(r) = V_inf - rho(r), or the constant V_inf.

    ``alpha`` is the claimed lower bound of V, ``R_o`` the radius from which
    the deficit bound V <= V_inf - rho is claimed.
    """

    kind: str = "radial_shifted"
    V_inf: float = 1.0
    alpha: float = 0.5
    rho: Callable | None = field(default=_default_rho, compare=False)
    R_o: float = 1.0
    label: str = "1/(2(1+r))"

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "radial_shifted"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "radial_shifted" and self.rho is None:
            raise ValueError("radial_shifted potential needs a deficit rho")

    def V(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.full_like(r, self.V_inf)
        return self.V_inf - self.rho(r)

    def limit(self) -> "PotentialModel":
        """The constant potential V_inf of the limit problem."""
        return constant_potential(self.V_inf)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "V_inf": self.V_inf, "alpha": self.alpha}
        if self.kind != "constant":
            d.update(rho=self.label, R_o=self.R_o)
        return d


def constant_potential(V_inf: float = 1.0) -> PotentialModel:
    return PotentialModel(kind="constant", V_inf=V_inf, alpha=V_inf, rho=None, R_o=0.0, label="0")


def default_potential() -> PotentialModel:
    return PotentialModel()


def make_potential(kind: str, V_inf: float = 1.0) -> PotentialModel:
    if kind == "constant":
        return constant_potential(V_inf)
    if kind == "radial_shifted":
        return PotentialModel(V_inf=V_inf, alpha=V_inf / 2.0)
    raise ValueError(f"unknown potential kind {kind!r}")


@dataclass
class HypothesisReport:
    checks: dict[str, str] = field(default_factory=dict)
    details: dict[str, str] = field(default_factory=dict)
    sampled: bool = True

    def record(self, name: str, ok: bool | None, detail: str = "") -> None:
        self.checks[name] = NOT_APPLICABLE if ok is None else (PASS if ok else FAIL)
        self.details[name] = detail

    @property
    def passed(self) -> bool:
        return all(v != FAIL for v in self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if v == FAIL]

    def lines(self) -> list[str]:
        tag = " (sampled)" if self.sampled else ""
        return [f"{k:<16s} {v.upper():<5s}{tag}  {self.details[k]}" for k, v in self.checks.items()]


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(np.abs(y)), 1)[0])


def _trend(x: np.ndarray, y: np.ndarray, direction: int, slope_tol: float = 1e-8) -> tuple[bool, float]:
    """Strict monotone trend of y along x with a log-log slope of the given sign."""
    y = np.abs(y)
    if np.any(y == 0.0):
        return False, float("nan")
    rel = np.diff(y) / y[:-1]
    slope = _loglog_slope(x, y)
    if direction > 0:
        return bool(np.all(rel > 1e-12) and slope > slope_tol), slope
    return bool(np.all(rel < -1e-12) and slope < -slope_tol), slope


def check_f_hypotheses(model: NonlinearityModel, samples=None, window: int = 20) -> HypothesisReport:
    """Sampled checks of (f1)-(f4) and the H-function properties.

    ``window`` is the number of smallest (largest) samples used for the
    trend tests at 0 (infinity).
    """
    s = np.logspace(-4, 3, 141) if samples is None else np.asarray(samples, dtype=float)
    if s.ndim != 1 or s.size < 2 * window or np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise ValueError(f"samples must be >= {2 * window} strictly increasing positive reals")
    if s[0] > 1e-4 * (1 + 1e-12) or s[-1] < 1e3 * (1 - 1e-12):
        raise ValueError("samples must span at least [1e-4, 1e3]")

    rep = HypothesisReport()
    lo, hi = s[:window], s[-window:]

    # (f1): f(s)/s decreases to 0 as s -> 0, i.e. increases with s on the small window
    ok, k = _trend(lo, model.f(lo) / lo, +1)
    rep.record("f1", ok, f"f(s)/s ~ s^{k:.3g} near 0")
    ok, k = _trend(hi, model.f(hi) / hi**5, -1)
    rep.record("f2", ok, f"f(s)/s^5 ~ s^{k:.3g} at large s")
    ok, k = _trend(hi, model.F(hi) / hi**4, +1)
    rep.record("f3", ok, f"F(s)/s^4 ~ s^{k:.3g} at large s")

    ok4 = True
    for sign in (1.0, -1.0):
        q = model.f(sign * s) / (sign * s) ** 3
        ok4 &= bool(np.all(np.diff(q) > 1e-12 * np.abs(q[:-1])))
    rep.record("f4", ok4, "f(s)/s^3 strictly increasing in |s| on +/- samples")

    both = np.concatenate([-s[::-1], s])
    H = model.H(both)
    rep.record("H_nonneg", bool(np.all(H >= 0.0)), f"min H = {H.min():.3g}")
    Hs = model.H(s)
    rep.record("H_monotone", bool(np.all(np.diff(Hs) >= 0.0)), "H nondecreasing in |s|")
    sHp = both**2 * model.fprime(both) - 3.0 * model.f(both) * both
    rep.record("sH'_pos", bool(np.all(sHp > 0.0)), f"min s^2 f' - 3 f s = {sHp.min():.3g}")
    return rep


def check_V_hypotheses(model: PotentialModel, radii=None, deltas=(0.1, 0.5, 1.0, 2.0), tail: float = 0.25) -> HypothesisReport:
    """Sampled checks of (V1)-(V3) on ``radii``.

    The divergence of rho(r) exp(delta r) is replaced by strict growth of
    that product over the largest ``tail`` fraction of the radii.
    """
    # up to r = 300 so exponentially small deficits stay representable
    r = np.logspace(np.log10(max(model.R_o, 1e-3) * 1.01), np.log10(300.0), 400) if radii is None else np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size < 8 or np.any(np.diff(r) <= 0):
        raise ValueError("radii must be at least 8 strictly increasing values")
    if r[0] <= model.R_o:
        raise ValueError("radii must exceed R_o")

    rep = HypothesisReport()
    V = model.V(r)
    rep.record("V1", bool(model.alpha > 0 and np.all(V >= model.alpha)), f"min V = {V.min():.6g}, alpha = {model.alpha:g}")

    k = max(8, int(tail * r.size))
    gap = model.V_inf - V
    below = bool(np.all(gap >= -1e-15 * abs(model.V_inf)))
    far = gap[-k:]
    approaching = bool(np.all(far == 0.0)) or bool(np.all(np.diff(far) <= 0.0) and far[-1] < far[0])
    rep.record("V2", below and approaching, f"V_inf - V at r={r[-1]:.3g}: {gap[-1]:.3g}")

    if model.kind == "constant":
        rep.record("V3", None, "constant potential (limit problem only)")
        return rep
    rho = model.rho(r)
    ok = bool(np.all(rho > 0.0)) and bool(np.all(V <= model.V_inf - rho + 1e-15 * abs(model.V_inf)))
    rep.record("V3_bound", ok, "V <= V_inf - rho for r >= R_o")
    # the deficit must not grow, otherwise V could not tend to V_inf
    rep.record("V3_rho_monotone", bool(np.all(np.diff(rho) <= 0.0)), "rho non-increasing")
    tail = slice(r.size - k, None)
    representable = bool(np.all(rho[tail] > 0.0))
    for d in deltas:
        if not representable:
            rep.record(f"V3_delta={d:g}", False, "rho underflows on the tail samples")
            continue
        # log(rho e^{delta r}) avoids overflow at large r
        log_prod = np.log(rho[tail]) + d * r[tail]
        rep.record(f"V3_delta={d:g}", bool(np.all(np.diff(log_prod) > 0.0)), "rho(r) exp(delta r) increasing on tail")
    return rep


def growth_constant(model: NonlinearityModel, eps: float, samples=None, safety: float = 1.01) -> float:
    """C with f(s) s <= eps s^2 + C s^6, from the sampled maximum times ``safety``."""
    s = np.logspace(-4, 3, 2001) if samples is None else np.asarray(samples, dtype=float)
    num = model.f(s) * s - eps * s**2
    pos = num > 0
    if not np.any(pos):
        return 0.0
    return safety * float(np.max(num[pos] / s[pos] ** 6))


def check_growth_bound(model: NonlinearityModel, eps: float, samples=None) -> bool:
    """Assert the growth bound on a grid 10x denser than the one C came from."""
    s = np.logspace(-4, 3, 2001) if samples is None else np.asarray(samples, dtype=float)
    C = growth_constant(model, eps, s)
    dense = np.exp(np.linspace(np.log(s[0]), np.log(s[-1]), 10 * s.size))
    dense = np.concatenate([-dense, dense])
    return bool(np.all(model.f(dense) * dense <= eps * dense**2 + C * dense**6))
