"""Projections onto the Nehari set and the nodal set.

For a power nonlinearity, f(t s) = t^q f(s), so the fibering maps
t -> J'(t u)(t u) and (t, s) -> J'(t u+ + s u-)(t u+, s u-) reduce to
polynomials in t and s with coefficients computed once from u. The
nodal projection finds a zero of that 2D map with a box-subdivision
root finder certified by Miranda's theorem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .functional import nonlinear_terms, split_parts
from .grid import FOUR_PI, RadialFunction, at_gauss, gauss_weights, stiffness_form
from .models import NonlinearityModel, PotentialModel
from .poisson import potential_values

T_MIN = 1e-8
T_MAX = 1e8


class NoSignChange(RuntimeError):
    """No bracket for the Nehari root inside [T_MIN, T_MAX]."""


class SignConditionViolated(RuntimeError):
    """The initial box fails the sampled Miranda face conditions."""


class NoCertifiedSubbox(RuntimeError):
    """Subdivision found no child box with a consistent sign configuration."""


class PartVanished(RuntimeError):
    """A sign part of the profile is (numerically) zero."""


# ---------------------------------------------------------------------------
# Miranda box root finder


@dataclass
class MirandaResult:
    point: tuple[float, float]
    box: tuple[tuple[float, float], tuple[float, float]]
    residual: float
    depth: int = 0


def _evaluate(field, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Field values as a (2, N) array; falls back to pointwise calls."""
    try:
        out = np.asarray(field(x, y), dtype=float)
        if out.shape == (2, x.size):
            return out
    except (TypeError, ValueError):
        pass
    return np.array([field(float(a), float(b)) for a, b in zip(x, y)], dtype=float).T


def _faces(box, m: int):
    (a1, b1), (a2, b2) = box
    xs = np.linspace(a1, b1, m)
    ys = np.linspace(a2, b2, m)
    # x = a1, x = b1, y = a2, y = b2
    fx = np.concatenate([np.full(m, a1), np.full(m, b1), xs, xs])
    fy = np.concatenate([ys, ys, np.full(m, a2), np.full(m, b2)])
    return fx, fy


def _orientation(vals: np.ndarray, m: int) -> tuple[int, int] | None:
    """Per-component sign orientation (+1: >= 0 on the low face) or None."""
    c1, c2 = vals
    lo1, hi1 = c1[:m], c1[m : 2 * m]
    lo2, hi2 = c2[2 * m : 3 * m], c2[3 * m :]
    orient = []
    for lo, hi in ((lo1, hi1), (lo2, hi2)):
        if np.all(lo >= 0) and np.all(hi <= 0):
            orient.append(1)
        elif np.all(lo <= 0) and np.all(hi >= 0):
            orient.append(-1)
        else:
            return None
    return orient[0], orient[1]


def _jacobian_inverse(field, cx: float, cy: float, step: tuple[float, float]) -> np.ndarray:
    hx, hy = step
    x = np.array([cx + hx, cx - hx, cx, cx])
    y = np.array([cy, cy, cy + hy, cy - hy])
    v = _evaluate(field, x, y)
    jac = np.column_stack([(v[:, 0] - v[:, 1]) / (2 * hx), (v[:, 2] - v[:, 3]) / (2 * hy)])
    try:
        inv = np.linalg.inv(jac)
    except np.linalg.LinAlgError:
        return np.eye(2)
    return inv if np.all(np.isfinite(inv)) else np.eye(2)


def _local_inverse(field, box) -> np.ndarray:
    (a1, b1), (a2, b2) = box
    return _jacobian_inverse(field, (a1 + b1) / 2, (a2 + b2) / 2, ((b1 - a1) / 8, (b2 - a2) / 8))


def _certifies(field, box, m: int, A: np.ndarray) -> bool:
    fx, fy = _faces(box, m)
    vals = A @ _evaluate(field, fx, fy)
    return _orientation(vals, m) is not None


def _newton_estimate(field, box, iters: int = 30, scan: int = 33) -> tuple[float, float]:
    """Damped Newton iterate kept inside ``box``, started from a coarse scan."""
    (a1, b1), (a2, b2) = box
    gx, gy = np.meshgrid(np.linspace(a1, b1, scan), np.linspace(a2, b2, scan))
    merit = np.max(np.abs(_evaluate(field, gx.ravel(), gy.ravel())), axis=0)
    best = int(np.argmin(merit))
    z = np.array([gx.ravel()[best], gy.ravel()[best]])
    step = ((b1 - a1) * 1e-6, (b2 - a2) * 1e-6)
    for _ in range(iters):
        v = _evaluate(field, z[:1], z[1:])[:, 0]
        dz = -_jacobian_inverse(field, z[0], z[1], step) @ v
        for _ in range(30):
            trial = np.clip(z + dz, [a1, a2], [b1, b2])
            if np.max(np.abs(_evaluate(field, trial[:1], trial[1:])[:, 0])) < np.max(np.abs(v)):
                break
            dz /= 2.0
        else:
            break
        z = trial
    return float(z[0]), float(z[1])


def _children(box, centre: tuple[float, float]):
    (a1, b1), (a2, b2) = box
    x0, y0 = (a1 + b1) / 2, (a2 + b2) / 2
    yield ((a1, x0), (a2, y0))  # SW
    yield ((x0, b1), (a2, y0))  # SE
    yield ((a1, x0), (y0, b2))  # NW
    yield ((x0, b1), (y0, b2))  # NE
    # fallback: shrinking boxes around a root estimate, for roots on a split
    # line or fields too curved for a quadrant to certify
    for shrink in (4, 16, 64, 256):
        hx, hy = (b1 - a1) / shrink, (b2 - a2) / shrink
        cx = min(max(centre[0], a1 + hx), b1 - hx)
        cy = min(max(centre[1], a2 + hy), b2 - hy)
        yield ((cx - hx, cx + hx), (cy - hy, cy + hy))


def _subdivide(field, box, tol: float, xtol: float, m: int, max_depth: int) -> MirandaResult:
    best = None
    for depth in range(max_depth):
        (a1, b1), (a2, b2) = box
        cx, cy = (a1 + b1) / 2, (a2 + b2) / 2
        A = _jacobian_inverse(field, cx, cy, ((b1 - a1) / 8, (b2 - a2) / 8))
        vc = _evaluate(field, np.array([cx]), np.array([cy]))[:, 0]
        newton = np.array([cx, cy]) - A @ vc
        candidates = [(cx, cy)]
        if a1 <= newton[0] <= b1 and a2 <= newton[1] <= b2:
            candidates.append((float(newton[0]), float(newton[1])))
        for px, py in candidates:
            res = float(np.max(np.abs(_evaluate(field, np.array([px]), np.array([py]))[:, 0])))
            if best is None or res < best.residual:
                best = MirandaResult((px, py), box, res, depth)
        if best.residual <= tol or max(b1 - a1, b2 - a2) <= xtol:
            return MirandaResult(best.point, box, best.residual, depth)
        centre = None
        for i, child in enumerate(_children(box, (float(newton[0]), float(newton[1])))):
            if i == 4:
                # quadrants failed; replace the one-step estimate with a converged one
                centre = _newton_estimate(field, box)
                break
            if _certifies(field, child, m, A) or _certifies(field, child, m, _local_inverse(field, child)):
                box = child
                break
        if centre is not None:
            for child in list(_children(box, centre))[4:]:
                if _certifies(field, child, m, _local_inverse(field, child)):
                    box = child
                    break
            else:
                raise NoCertifiedSubbox(f"no certified child at depth {depth} of box {box}")
        best = None
    raise NoCertifiedSubbox("maximum subdivision depth reached")


def miranda_root(field, box, tol: float = 1e-10, m: int = 33, xtol: float | None = None,
                 retries: int = 3, max_depth: int = 200) -> MirandaResult:
    """Zero of a continuous 2D field on a box satisfying Miranda's condition.

    Parameters
    ----------
    field : callable
        ``field(x, y) -> (f1, f2)``; vectorized calls are used when supported.
    box : ((a1, b1), (a2, b2))
    tol : float
        Target max-norm residual.
    m : int
        Sample points per face for the sign checks.
    xtol : float, optional
        Stop once the box diameter falls below this (defaults to ``tol``).
    retries : int
        Times the face sampling density is doubled after a failed subdivision.

    Returns
    -------
    MirandaResult
        The best sampled point of the final certified box.

    Notes
    -----
    Each component may have either orientation (>= 0 on the low face and
    <= 0 on the high face, or the reverse). Child boxes are certified on
    the field premultiplied by an inverse Jacobian estimate, which has a
    zero exactly where the field does but keeps the sign pattern visible
    on small boxes.
    """
    (a1, b1), (a2, b2) = box
    if not (a1 < b1 and a2 < b2):
        raise ValueError("box edges must satisfy a < b")
    if m < 2:
        raise ValueError("need at least 2 samples per face")
    xtol = tol if xtol is None else xtol
    box = ((float(a1), float(b1)), (float(a2), float(b2)))
    fx, fy = _faces(box, m)
    if _orientation(_evaluate(field, fx, fy), m) is None:
        raise SignConditionViolated(f"sampled faces of {box} lack the Miranda sign pattern")
    err = None
    for attempt in range(retries + 1):
        try:
            return _subdivide(field, box, tol, xtol, m * 2**attempt, max_depth)
        except NoCertifiedSubbox as exc:
            err = exc
    raise err


# ---------------------------------------------------------------------------
# Fibering maps


@dataclass(frozen=True)
class NehariFiber:
    """g(t) = J'(t u)(t u) = t^2 a + t^4 A - t^p B."""

    a: float
    A: float
    B: float
    p: float

    @classmethod
    def from_profile(cls, u: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel) -> "NehariFiber":
        g = u.grid
        x = u.values
        w = g.weights
        a = FOUR_PI * (stiffness_form(g, x, x) + float(np.dot(w * V.V(g.nodes), x * x)))
        A = FOUR_PI * float(np.dot(w, potential_values(g, x * x) * x * x))
        B = nonlinear_terms(g, fmodel, x)[1]
        return cls(a, A, B, fmodel.p)

    def slope(self, t):
        t = np.asarray(t, dtype=float)
        return t**2 * self.a + t**4 * self.A - t**self.p * self.B

    def reduced(self, t: float) -> float:
        """g(t)/t^2, same sign as g and better scaled."""
        return self.a + t * t * self.A - t ** (self.p - 2.0) * self.B


def project_nehari(u: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel, tol: float = 1e-12) -> float:
    """Positive t with J'(t u)(t u) = 0.

    The bracket is found by doubling/halving from t = 1; the root is then
    polished with Brent's method.

    Raises
    ------
    NoSignChange
        If no bracket exists within [1e-8, 1e8].
    """
    if not np.any(u.values):
        raise ValueError("cannot project the zero function")
    fib = NehariFiber.from_profile(u, V, fmodel)
    lo = hi = 1.0
    if fib.reduced(1.0) > 0:
        while fib.reduced(hi) > 0:
            hi *= 2.0
            if hi > T_MAX:
                raise NoSignChange("J'(tu)(tu) stays positive up to t = 1e8")
        lo = hi / 2.0
    else:
        while fib.reduced(lo) <= 0:
            lo /= 2.0
            if lo < T_MIN:
                raise NoSignChange("J'(tu)(tu) stays non-positive down to t = 1e-8")
        hi = lo * 2.0
    if fib.reduced(hi) == 0.0:
        return hi
    t = brentq(fib.reduced, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(fib.slope(t)) > tol * fib.a:
        # brentq stops on bracket width; take the better end of the final bracket
        cands = [t, np.nextafter(t, 0), np.nextafter(t, np.inf)]
        t = min(cands, key=lambda c: abs(fib.slope(c)))
    return float(t)


@dataclass(frozen=True, eq=False)
class NodalFiber:
    """Coefficients of the map (t, s) -> J'(t u+ + s u-)(t u+, s u-).

    ``k`` is the Dirichlet cross term of the two parts, nonzero only on
    elements straddling a sign change; ``C_plus = int phi_{u-} (u+)^2`` and
    ``C_minus = int phi_{u+} (u-)^2``. The F and f integrals split into a
    homogeneous part over one-signed elements (``B_*``, ``F_*``) and an
    exact Gauss sum over the straddling elements, where t u+ and s u-
    overlap (``cross_w``, ``cross_a``, ``cross_b``: weights and the two
    interpolants at those Gauss points).
    """

    a_plus: float
    a_minus: float
    k: float
    A_plus: float
    A_minus: float
    C_plus: float
    C_minus: float
    B_plus: float
    B_minus: float
    F_plus: float
    F_minus: float
    fmodel: NonlinearityModel
    cross_w: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cross_a: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cross_b: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def p(self) -> float:
        return self.fmodel.p

    @classmethod
    def from_profile(cls, u: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel) -> "NodalFiber":
        g = u.grid
        w = g.weights
        up, um = (part.values for part in split_parts(u))
        wV = w * V.V(g.nodes)
        phi_p = potential_values(g, up * up)
        phi_m = potential_values(g, um * um)

        W = gauss_weights(g)
        aq = at_gauss(g, up)
        bq = at_gauss(g, um)
        x = u.values
        straddle = x[:-1] * x[1:] < 0
        Ws = np.where(straddle[:, None], 0.0, W)

        def q(val):
            return FOUR_PI * float(val)

        return cls(
            a_plus=q(stiffness_form(g, up, up) + np.dot(wV, up * up)),
            a_minus=q(stiffness_form(g, um, um) + np.dot(wV, um * um)),
            k=q(stiffness_form(g, up, um)),
            A_plus=q(np.dot(w, phi_p * up * up)),
            A_minus=q(np.dot(w, phi_m * um * um)),
            C_plus=q(np.dot(w, phi_m * up * up)),
            C_minus=q(np.dot(w, phi_p * um * um)),
            B_plus=q(np.sum(Ws * fmodel.f(aq) * aq)),
            B_minus=q(np.sum(Ws * fmodel.f(bq) * bq)),
            F_plus=q(np.sum(Ws * fmodel.F(aq))),
            F_minus=q(np.sum(Ws * fmodel.F(bq))),
            fmodel=fmodel,
            cross_w=FOUR_PI * W[straddle].ravel(),
            cross_a=aq[straddle].ravel(),
            cross_b=bq[straddle].ravel(),
        )

    def _cross(self, t, s):
        """Straddling-element sums: signed pieces of int f(w) t u+ and int f(w) s u-, and int F(w)."""
        ta = t[..., None] * self.cross_a
        sb = s[..., None] * self.cross_b
        fw = self.fmodel.f(ta + sb)
        x1 = self.cross_w * fw * ta
        x2 = self.cross_w * fw * sb
        parts = [np.sum(np.maximum(v, 0.0), axis=-1) for v in (x1, x2)]
        parts += [np.sum(np.maximum(-v, 0.0), axis=-1) for v in (x1, x2)]
        return parts, np.sum(self.cross_w * self.fmodel.F(ta + sb), axis=-1)

    def _gain_loss(self, t, s):
        """Psi_i = gain_i - loss_i with both terms non-negative."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        ts = t * s
        (pos1, pos2, neg1, neg2), _ = self._cross(t, s)
        gain1 = t * t * self.a_plus + ts * self.k + t**4 * self.A_plus + ts * ts * self.C_plus + neg1
        gain2 = s * s * self.a_minus + ts * self.k + s**4 * self.A_minus + ts * ts * self.C_minus + neg2
        loss1 = t**self.p * self.B_plus + pos1
        loss2 = s**self.p * self.B_minus + pos2
        return gain1, loss1, gain2, loss2

    def psi(self, t, s):
        gain1, loss1, gain2, loss2 = self._gain_loss(t, s)
        return gain1 - loss1, gain2 - loss2

    def norm_sq(self, t, s):
        return t * t * self.a_plus + s * s * self.a_minus + 2.0 * t * s * self.k

    def normalized(self, t, s):
        psi1, psi2 = self.psi(t, s)
        n = self.norm_sq(t, s)
        return np.stack([psi1 / n, psi2 / n])

    def reduced(self, t, s):
        """(Psi_1 / (t^2 ||u+||^2), Psi_2 / (s^2 ||u-||^2)).

        Same signs and zeros as Psi, no spurious zero as t or s -> 0, and
        each component bounds the corresponding component of
        :meth:`normalized` from above in absolute value (k >= 0).
        """
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        psi1, psi2 = self.psi(t, s)
        return np.stack([psi1 / (t * t * self.a_plus), psi2 / (s * s * self.a_minus)])

    def log_balance(self, x, y):
        """Psi in log coordinates x = log t, y = log s, as log(gain / loss).

        The log of the ratio has the same signs and zeros as Psi and is
        close to linear in (x, y), which keeps box certification cheap.
        """
        with np.errstate(divide="ignore"):
            gain1, loss1, gain2, loss2 = self._gain_loss(np.exp(x), np.exp(y))
            return np.stack([np.log(gain1) - np.log(loss1), np.log(gain2) - np.log(loss2)])

    def energy(self, t, s):
        """J(t u+ + s u-)."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        quad = 0.5 * self.norm_sq(t, s)
        quart = 0.25 * (t**4 * self.A_plus + s**4 * self.A_minus + t * t * s * s * (self.C_plus + self.C_minus))
        _, Fx = self._cross(t, s)
        return quad + quart - t**self.p * self.F_plus - s**self.p * self.F_minus - Fx


@dataclass
class ProjectionPair:
    t: float
    s: float
    residual: float
    box: tuple[tuple[float, float], tuple[float, float]]


def _bracket(fn, start: float) -> tuple[float, float]:
    """lo < hi with fn(lo) > 0 > fn(hi), by halving/doubling from ``start``.

    The bracket always straddles ``start`` so that a root there is interior.
    """
    lo, hi = start / 2.0, start * 2.0
    while fn(lo) <= 0:
        lo /= 2.0
        if lo < T_MIN:
            raise NoSignChange("fiber component non-positive near 0")
    while fn(hi) >= 0:
        hi *= 2.0
        if hi > T_MAX:
            raise NoSignChange("fiber component non-negative up to 1e8")
    return lo, hi


def _initial_box(fib: NodalFiber, m: int):
    t_lo, t_hi = _bracket(lambda t: fib.psi(t, 1.0)[0], 1.0)
    s_lo, s_hi = _bracket(lambda s: fib.psi(1.0, s)[1], 1.0)
    while True:
        box = ((t_lo, t_hi), (s_lo, s_hi))
        fx, fy = _faces(box, m)
        c1, c2 = fib.reduced(fx, fy)
        ok1 = np.all(c1[:m] >= 0) and np.all(c1[m : 2 * m] <= 0)
        ok2 = np.all(c2[2 * m : 3 * m] >= 0) and np.all(c2[3 * m :] <= 0)
        if ok1 and ok2:
            return box
        if not ok1:
            t_lo, t_hi = t_lo / 2.0, t_hi * 2.0
        if not ok2:
            s_lo, s_hi = s_lo / 2.0, s_hi * 2.0
        if min(t_lo, s_lo) < T_MIN or max(t_hi, s_hi) > T_MAX:
            raise SignConditionViolated("no Miranda box for the nodal fiber inside [1e-8, 1e8]^2")


def project_nodal(u: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel, tol: float = 1e-10,
                  floor: float = 1e-10, m: int = 33) -> ProjectionPair:
    """(t, s) > 0 with t u+ + s u- on the nodal set.

    ``tol`` bounds max(|Psi_1|, |Psi_2|) / ||t u+ + s u-||^2.

    Raises
    ------
    PartVanished
        If ||u+|| or ||u-|| is below ``floor``.
    SignConditionViolated, NoCertifiedSubbox
        From the box root finder.
    """
    fib = NodalFiber.from_profile(u, V, fmodel)
    if min(fib.a_plus, fib.a_minus) <= 0 or math.sqrt(min(fib.a_plus, fib.a_minus)) < floor:
        raise PartVanished("a sign part of the profile is below the norm floor")
    box = _initial_box(fib, m)
    # subdivide in (log t, log s) on the log-balance form; the exponential
    # map sends certified boxes to certified boxes
    log_box = tuple((math.log(lo), math.log(hi)) for lo, hi in box)
    inner = tol
    while True:
        res = miranda_root(fib.log_balance, log_box, tol=inner, m=m, xtol=1e-15)
        t, s = (math.exp(c) for c in res.point)
        residual = float(np.max(np.abs(fib.normalized(t, s))))
        if residual <= tol or inner < 1e-15:
            break
        inner /= 100.0
    final = tuple((math.exp(lo), math.exp(hi)) for lo, hi in res.box)
    return ProjectionPair(t, s, residual, final)


def rescale_parts(u: RadialFunction, t: float, s: float) -> RadialFunction:
    up, um = split_parts(u)
    return u.with_values(t * up.values + s * um.values)
