"""Delta2 diagnostics and the center constructions that separate the families.

The probe looks at the growth of ``sup_t Phi(t, 2u) / Phi(t, u)`` along a
geometric u-grid: polynomial growth of Phi gives a flat tail, exponential
growth a ratio that keeps climbing.

The two constructions build explicit centers on a graded grid:

* a center whose Musielak-Orlicz function fails Delta2, certified by a
  direction ``u`` with ``E[phi(c + u)]`` finite and ``E[phi(c + 2u)]`` divergent;
* a center ``c`` for which ``b - c`` lies outside the space attached to ``c``,
  so the family centered at ``b`` is not contained in the one centered at ``c``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ConstructionError, InconclusiveError, NotNormalizedError
from .measure import (GridMeasure, IntegralVerdict, Points, ScalarField, Verdict,
                      integrate, interval_mask, refine, with_breakpoints)
from .morlicz import MOFunction, Membership, classify_membership, mo_from_phi
from .phifunc import PhiFunction


class Delta2Class(str, enum.Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Delta2Report:
    u: np.ndarray
    log_ratio: np.ndarray
    classification: Delta2Class
    constant_K: float | None
    tail_slope: float
    threshold_function: ScalarField | None = None

    @property
    def ratio_curve(self) -> list[tuple[float, float]]:
        with np.errstate(over="ignore"):
            return list(zip(self.u.tolist(), np.exp(self.log_ratio).tolist()))


def delta2_probe(Phi: MOFunction, t_samples: Sequence[float], u_range=(1e-3, 1e6),
                 points: int = 64, slope_tol: float = 0.05,
                 threshold_function: ScalarField | None = None) -> Delta2Report:
    u_min, u_max = map(float, u_range)
    if u_min <= 0 or u_max <= u_min:
        raise ValueError("u_range must satisfy 0 < u_min < u_max")
    if points < 16:
        raise ValueError("need at least 16 points")
    t = np.asarray(t_samples, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("no t samples")
    u = np.geomspace(u_min, u_max, points)
    uu = np.tile(u, t.size)
    coords = _coords_for(Phi, t, points)
    with np.errstate(invalid="ignore"):
        lr = Phi.log_eval(coords, 2.0 * uu) - Phi.log_eval(coords, uu)
    lr = np.where(np.isnan(lr), np.inf, lr).reshape(t.size, points)
    log_ratio = lr.max(axis=0)

    tail = u >= u_max / 10.0
    if tail.sum() < 2:
        tail[-2:] = True
    if not np.all(np.isfinite(log_ratio[tail])):
        return Delta2Report(u, log_ratio, Delta2Class.VIOLATED, None, math.inf, threshold_function)
    slope = float(np.polyfit(np.log(u[tail]), log_ratio[tail], 1)[0])
    growth = float(log_ratio[tail][-1] - log_ratio[tail][0])
    if slope <= slope_tol and np.all(np.isfinite(log_ratio)):
        K = float(np.exp(log_ratio.max()))
        return Delta2Report(u, log_ratio, Delta2Class.SATISFIED, K, slope, threshold_function)
    if slope > slope_tol and growth >= math.log(10.0):
        return Delta2Report(u, log_ratio, Delta2Class.VIOLATED, None, slope, threshold_function)
    return Delta2Report(u, log_ratio, Delta2Class.INCONCLUSIVE, None, slope, threshold_function)


def _coords_for(Phi: MOFunction, t: np.ndarray, points: int):
    center = Phi.center
    if center is not None and not center.refinable:
        grid = center.grid
        idx = np.array([int(np.argmin(np.abs(grid.t - ti))) for ti in t])
        return _IndexedCoords(grid, np.repeat(idx, points))
    return Points(np.repeat(t, points))


@dataclass(frozen=True)
class _IndexedCoords:
    grid: GridMeasure
    index: np.ndarray

    @property
    def interval(self):
        return self.grid.interval

    @property
    def t(self):
        return self.grid.t[self.index]

    @property
    def log_left(self):
        return self.grid.log_left[self.index]

    @property
    def log_right(self):
        return self.grid.log_right[self.index]


# --------------------------------------------------------------------------- constructions

def _check_subinterval(name, iv, grid):
    lo, hi = map(float, iv)
    a, b = grid.interval
    if not (a <= lo < hi <= b):
        raise ConstructionError(f"{name}={iv} is not a subinterval of {grid.interval} with positive length")
    return lo, hi


def _mass(phi: PhiFunction, c: ScalarField) -> IntegralVerdict:
    return integrate(phi.of(c))


@dataclass(frozen=True)
class NonDelta2Center:
    center: ScalarField
    direction: ScalarField
    beta: float
    mass: IntegralVerdict
    mass_at_one: IntegralVerdict
    mass_at_two: IntegralVerdict

    @property
    def certified(self) -> bool:
        return (self.mass.is_finite and abs(self.mass.value - 1.0) <= 1e-8
                and self.mass_at_one.is_finite and self.mass_at_two.is_divergent)


def construct_non_delta2_center(phi: PhiFunction, g: GridMeasure, A, B, f: ScalarField,
                                start_center: ScalarField | None = None) -> NonDelta2Center:
    """Build a center ``c`` for which ``Phi_c`` fails Delta2.

    ``f`` must be positive, non-integrable on ``A`` and dominate ``phi(start)``
    there.  On ``A`` the center is pushed down to ``start - u`` where
    ``phi(start + u) = f``; on ``B`` it is a constant level ``phi^{-1}(beta)``
    chosen to restore unit mass; elsewhere it equals the start center.
    """
    a_lo, a_hi = _check_subinterval("A", A, g)
    b_lo, b_hi = _check_subinterval("B", B, g)
    if min(a_hi, b_hi) > max(a_lo, b_lo):
        raise ConstructionError("A and B must be disjoint")
    grid = with_breakpoints(g, [a_lo, a_hi, b_lo, b_hi])
    if start_center is None:
        start_center = ScalarField.from_rule(
            grid, lambda c: phi.invert_log(c.t, np.zeros(np.shape(c.t))), "uniform center")
    base = start_center.linear().on(grid)
    log_f = (f if f.log_scale else f.map(_log, log_scale=True)).on(grid)

    def on_A(c):
        return interval_mask(c, a_lo, a_hi)

    def on_B(c):
        return interval_mask(c, b_lo, b_hi)

    f_on_A = ScalarField.pointwise(lambda c, lf: np.where(on_A(c), lf, -np.inf), log_f,
                                   log_scale=True)
    v = integrate(f_on_A)
    if not v.is_divergent:
        raise ConstructionError(f"f must be non-integrable on A (verdict {v.kind.value})")
    base_log_phi = phi.log_eval(grid.t, base.data)
    inside = on_A(grid)
    if np.any(log_f.data[inside] < base_log_phi[inside] - 1e-12):
        raise ConstructionError("f must dominate phi(start center) on A")

    u = ScalarField.pointwise(
        lambda c, c0, lf: np.where(on_A(c), phi.invert_log(c.t, lf) - c0, 0.0),
        base, log_f, tag="u")

    rest = ScalarField.pointwise(
        lambda c, c0: np.where(on_A(c) | on_B(c), -np.inf, phi.log_eval(c.t, c0)),
        base, log_scale=True)
    pushed = ScalarField.pointwise(
        lambda c, c0, ud: np.where(on_A(c), phi.log_eval(c.t, c0 - ud), -np.inf),
        base, u, log_scale=True)
    m_rest, m_pushed = integrate(rest), integrate(pushed)
    for name, m in (("outside A and B", m_rest), ("on A", m_pushed)):
        if not m.is_finite:
            raise ConstructionError(f"mass {name} is not finite ({m.kind.value})")
    beta = (1.0 - m_rest.value - m_pushed.value) / (b_hi - b_lo)
    if beta <= 0:
        raise ConstructionError(f"mass balance infeasible (beta = {beta:.6g}); shrink A or f")
    log_beta = math.log(beta)

    def center_rule(c, c0, ud):
        level = phi.invert_log(c.t, np.full(np.shape(c.t), log_beta))
        return np.where(on_A(c), c0 - ud, np.where(on_B(c), level, c0))

    center = ScalarField.pointwise(center_rule, base, u, tag="non-Delta2 center")
    return NonDelta2Center(center, u, beta, _mass(phi, center), _mass(phi, center + u),
                           _mass(phi, center + 2.0 * u))


def _log(d):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(d)


@dataclass(frozen=True)
class ExclusionCenter:
    center: ScalarField
    level: float
    boundary: float
    tail_mass: float
    mass: IntegralVerdict
    included: bool


def construct_exclusion_center(phi: PhiFunction, b: ScalarField, u_witness: ScalarField,
                               n0: float) -> ExclusionCenter:
    """A center ``c`` with ``b - c`` outside the space of ``Phi_c``.

    ``u_witness >= 0`` must have ``E[phi(b + u)]`` finite and
    ``E[phi(b + lam u)]`` divergent for ``lam > 1``, and blow up at the
    singular end of the grid.  The set where the witness exceeds ``n0``
    (a neighbourhood of that end) keeps ``c = b + u``; the rest gets the
    constant level that restores unit mass.
    """
    grid = b.grid
    w = u_witness.linear().on(grid)
    if np.any(w.data < -1e-12):
        raise ConstructionError("witness must be nonnegative")
    at_one = integrate(phi.of(b + w))
    past_one = integrate(phi.of(b + 1.125 * w))
    if not (at_one.is_finite and past_one.is_divergent):
        raise ConstructionError(
            "witness must give a finite mass at lambda = 1 and a divergent one beyond "
            f"(got {at_one.kind.value}, {past_one.kind.value})")
    left, right = grid.singular_ends
    if left == right:
        raise ConstructionError("the grid needs exactly one singular end")
    t_cut = _level_crossing(w, float(n0), from_left=left)
    lo, hi = grid.interval
    grid2 = with_breakpoints(grid, [t_cut])
    bb, ww = b.linear().on(grid2), w.on(grid2)

    def in_tail(c):
        return interval_mask(c, lo, t_cut) if left else interval_mask(c, t_cut, hi)

    tail_field = ScalarField.pointwise(
        lambda c, bd, wd: np.where(in_tail(c), phi.log_eval(c.t, bd + wd), -np.inf),
        bb, ww, log_scale=True)
    tail = integrate(tail_field)
    if not tail.is_finite:
        raise ConstructionError(f"tail mass not certified ({tail.kind.value})")
    measure_A = (hi - t_cut) if left else (t_cut - lo)
    level = (1.0 - tail.value) / measure_A
    if level <= 0:
        raise ConstructionError(f"tail mass {tail.value:.6g} >= 1; choose a larger n0")
    log_level = math.log(level)

    def center_rule(c, bd, wd):
        flat = phi.invert_log(c.t, np.full(np.shape(c.t), log_level))
        return np.where(in_tail(c), bd + wd, flat)

    center = ScalarField.pointwise(center_rule, bb, ww, tag="exclusion center")
    mass = _mass(phi, center)
    if not (mass.is_finite and abs(mass.value - 1.0) <= 1e-8):
        raise ConstructionError(f"constructed center has mass {mass.value}")
    included = inclusion_test(phi, bb, center)
    return ExclusionCenter(center, level, t_cut, tail.value, mass, included)


def _level_crossing(w: ScalarField, n0: float, from_left: bool) -> float:
    """The point nearest the singular end beyond which ``w > n0``."""
    for _ in range(4):
        edge = w.data[0] if from_left else w.data[-1]
        if edge > n0 or not w.refinable:
            break
        w = w.on(refine(w.grid, 2))  # each refinement reaches much deeper
    t, vals = w.grid.t, w.data
    above = vals > n0
    if from_left:
        if not above[0]:
            raise ConstructionError("witness does not exceed n0 near the singular end")
        if above.all():
            raise ConstructionError("n0 too small: the set {u <= n0} is empty")
        k = int(np.argmin(above))
        lo, hi = t[k - 1], t[k]
    else:
        if not above[-1]:
            raise ConstructionError("witness does not exceed n0 near the singular end")
        if above.all():
            raise ConstructionError("n0 too small: the set {u <= n0} is empty")
        k = int(len(above) - np.argmin(above[::-1]) - 1)
        lo, hi = t[k], t[k + 1]
    if not w.refinable:
        return float(0.5 * (lo + hi))

    def gap(x):
        return float(w.evaluate(Points(np.array([x]), w.grid.interval))[0]) - n0

    return float(optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def _aligned(c1: ScalarField, c2: ScalarField):
    if c1.grid is c2.grid:
        return c1.linear(), c2.linear()
    extra = [x for x in c1.grid.breakpoints if x not in c2.grid.breakpoints]
    grid = with_breakpoints(c2.grid, extra) if extra else c2.grid
    return c1.linear().on(grid), c2.linear().on(grid)


def inclusion_test(phi: PhiFunction, c1: ScalarField, c2: ScalarField) -> bool:
    """True when ``c1 - c2`` lies in the space of ``Phi_{c2}``.

    Raises :class:`InconclusiveError` if membership cannot be settled.
    """
    for name, c in (("c1", c1), ("c2", c2)):
        m = _mass(phi, c)
        if not m.is_finite or abs(m.value - 1.0) > 1e-6:
            raise NotNormalizedError(f"{name} is not normalized (mass {m.value})", m.value)
    a, b = _aligned(c1, c2)
    verdict = classify_membership(mo_from_phi(phi, b), a - b)
    if verdict is Membership.UNKNOWN:
        raise InconclusiveError("membership of the center difference is undetermined")
    return verdict is not Membership.OUTSIDE


__all__ = [
    "Delta2Class", "Delta2Report", "delta2_probe", "NonDelta2Center",
    "construct_non_delta2_center", "ExclusionCenter", "construct_exclusion_center",
    "inclusion_test", "Verdict",
]
