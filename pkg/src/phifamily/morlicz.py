"""Musielak-Orlicz functions, modulars, norms and conjugates."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import InconclusiveError, NotInSpaceError
from .measure import Coords, IntegralVerdict, Points, ScalarField, Verdict, integrate
from .phifunc import PhiFunction

LogEval = Callable[[Coords, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MOFunction:
    """Phi(t, u) for u >= 0, with values in [0, inf].

    ``log_eval(coords, u)`` returns ``log Phi`` at each node of ``coords``
    (``-inf`` where Phi vanishes, ``+inf`` where it is infinite).  ``bound``
    is the finiteness boundary ``sup{u : Phi(t, u) < inf}``, taken constant in t.
    """

    log_eval: LogEval
    bound: float = math.inf
    origin: str = "direct"
    phi: PhiFunction | None = None
    center: ScalarField | None = None
    name: str = "Phi"

    def __call__(self, coords: Coords, u) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_eval(coords, np.asarray(u, dtype=float)))

    def finiteness_boundary(self, coords: Coords) -> np.ndarray:
        return np.full(np.shape(coords.t), self.bound)

    def at(self, t: float) -> Callable[[np.ndarray], np.ndarray]:
        """``u -> Phi(t, u)`` at a single point ``t``."""
        coords = _point_coords(self, t)

        def scalar(u):
            u = np.atleast_1d(np.asarray(u, dtype=float))
            out = self(_repeat(coords, u.size), u)
            return out
        return scalar


def _point_coords(Phi: MOFunction, t: float) -> Coords:
    if Phi.center is not None and not Phi.center.refinable:
        grid = Phi.center.grid
        idx = int(np.argmin(np.abs(grid.t - t)))
        if not math.isclose(grid.t[idx], t, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError("center has no closed form; t must be a grid node")
        return _NodeView(grid, idx)
    return Points(np.array([float(t)]))


@dataclass(frozen=True)
class _NodeView:
    """One node of a grid, repeated; lets non-refinable centers be read pointwise."""
    grid: object
    index: int
    size: int = 1

    @property
    def interval(self):
        return self.grid.interval

    @property
    def t(self):
        return np.full(self.size, self.grid.t[self.index])

    @property
    def log_left(self):
        return np.full(self.size, self.grid.log_left[self.index])

    @property
    def log_right(self):
        return np.full(self.size, self.grid.log_right[self.index])


def _repeat(coords, size):
    if isinstance(coords, _NodeView):
        return _NodeView(coords.grid, coords.index, size)
    return Points(np.repeat(coords.t, size), coords.interval)


def _center_values(center: ScalarField, coords) -> np.ndarray:
    if isinstance(coords, _NodeView):
        return np.full(coords.size, center.linear().data[coords.index])
    return center.linear().evaluate(coords)


def mo_from_phi(phi: PhiFunction, c: ScalarField) -> MOFunction:
    """``Phi_c(t, u) = phi(t, c(t) + u) - phi(t, c(t))``."""
    c = c.linear()
    if not np.all(np.isfinite(c.data)):
        raise ValueError("center must be finite at every node")

    def log_eval(coords, u):
        cv = _center_values(c, coords)
        la = phi.log_eval(coords.t, cv + u)
        lb = phi.log_eval(coords.t, cv)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = la + np.log(-np.expm1(lb - la))
        out = np.where(u > 0, out, -np.inf)
        return np.where(np.isposinf(la), np.inf, out)

    return MOFunction(log_eval, math.inf, "from_phi", phi, c, f"Phi[{phi.name}, {c.tag or 'c'}]")


def power_mo(p: float, bound: float | None = None) -> MOFunction:
    """``Phi(u) = u**p``, and ``+inf`` beyond ``bound`` when one is given."""
    p = float(p)
    if p < 1.0:
        raise ValueError("u**p is convex only for p >= 1")
    b = math.inf if bound is None else float(bound)

    def log_eval(coords, u):
        with np.errstate(divide="ignore"):
            out = p * np.log(u)
        return np.where(u < b, out, np.inf) if math.isfinite(b) else out

    return MOFunction(log_eval, b, "direct", name=f"u^{p:g}")


def modular(Phi: MOFunction, u: ScalarField, **integrate_kw) -> IntegralVerdict:
    """``I_Phi(u)``, the integral of ``Phi(t, |u(t)|)``."""
    field = ScalarField.pointwise(lambda c, d: Phi.log_eval(c, np.abs(d)), u.linear(),
                                  tag=f"{Phi.name}(|{u.tag or 'u'}|)", log_scale=True)
    return integrate(field, **integrate_kw)


def _is_zero(u: ScalarField) -> bool:
    return bool(np.all(u.linear().data == 0.0))


def luxemburg_norm(Phi: MOFunction, u: ScalarField, tol: float = 1e-8) -> float:
    """``inf{lam > 0 : I_Phi(u / lam) <= 1}`` by bracketing and bisection in ``log lam``."""
    if _is_zero(u):
        return 0.0
    lin = u.linear()

    def inside(lam):
        v = modular(Phi, lin * (1.0 / lam))
        if v.kind is Verdict.INCONCLUSIVE:
            return False, v
        return v.is_finite and v.value <= 1.0, v

    lo_cap, hi_cap = tol, 1.0 / tol
    lam = 1.0
    ok, _ = inside(lam)
    if ok:
        hi = lam
        while True:
            lo = hi / 2.0
            if lo < lo_cap:
                return hi
            if not inside(lo)[0]:
                break
            hi = lo
    else:
        lo = lam
        while True:
            hi = lo * 2.0
            if hi > hi_cap:
                raise NotInSpaceError(f"no lambda in [{lo_cap:g}, {hi_cap:g}] gives modular <= 1")
            if inside(hi)[0]:
                break
            lo = hi
    while hi / lo - 1.0 > tol:
        mid = math.sqrt(lo * hi)
        if inside(mid)[0]:
            hi = mid
        else:
            lo = mid
    return hi


def orlicz_norm(Phi: MOFunction, u: ScalarField, tol: float = 1e-8) -> float:
    """Orlicz norm via the Amemiya formula ``inf_k (1 + I_Phi(k u)) / k``.

    The map is quasi-convex in ``k``.  Below ``k = 1 / (2 ||u||_lux)`` it
    exceeds ``1 / k > 2 ||u||_lux``, an upper bound for its minimum, so a
    doubling ladder from there brackets the minimizer before a bounded Brent
    search in ``log k``.
    """
    if _is_zero(u):
        return 0.0
    lin = u.linear()
    lux = luxemburg_norm(Phi, lin, tol)

    def amemiya(log_k):
        k = math.exp(log_k)
        v = modular(Phi, lin * k)
        if not v.is_finite:
            return math.inf
        return (1.0 + v.value) / k

    x0 = -math.log(2.0 * lux)
    ladder = [(x0, amemiya(x0))]
    step = math.log(2.0)
    while True:
        x = ladder[-1][0] + step
        f = amemiya(x)
        ladder.append((x, f))
        if f >= ladder[-2][1] or len(ladder) > 80:
            break
    if len(ladder) == 2:
        lo, hi = ladder[0][0], ladder[1][0]
    else:
        lo, hi = ladder[-3][0], ladder[-1][0]
    if not math.isfinite(ladder[-1][1]):
        # the modular blows up inside the last step; keep the search on the finite side
        good, bad = ladder[-2][0], ladder[-1][0]
        for _ in range(60):
            mid = 0.5 * (good + bad)
            if math.isfinite(amemiya(mid)):
                good = mid
            else:
                bad = mid
        hi = good
    best = min(f for _, f in ladder)
    res = optimize.minimize_scalar(amemiya, bounds=(lo, hi), method="bounded",
                                   options={"xatol": max(tol, 1e-10)})
    candidates = [best, amemiya(hi)]
    if res.success and math.isfinite(res.fun):
        candidates.append(float(res.fun))
    return min(candidates)


def fenchel_conjugate(Phi: MOFunction, t: float, v: float, tol: float = 1e-10,
                      cap: float = 1e12) -> float:
    """``Phi*(t, v) = sup_{u >= 0} (u v - Phi(t, u))``; ``inf`` if the sup runs past ``cap``."""
    if v < 0:
        raise ValueError("the conjugate is taken for v >= 0")
    phi_t = Phi.at(t)

    def h(u):
        return float(u * v - phi_t(u)[0])

    top = Phi.bound
    upper = 1.0 if not math.isfinite(top) else min(1.0, 0.5 * top)
    while True:
        nxt = 2.0 * upper
        if math.isfinite(top) and nxt >= top:
            nxt = top * (1.0 - 1e-12)
        if nxt > cap:
            return math.inf
        if h(nxt) <= h(upper) or nxt == upper:
            upper = nxt
            break
        upper = nxt
    res = optimize.minimize_scalar(lambda x: -h(x), bounds=(0.0, upper), method="bounded",
                                   options={"xatol": tol * max(1.0, upper)})
    return max(0.0, -float(res.fun), h(upper))


class Membership(str, enum.Enum):
    E_SPACE = "E_space"
    L_CLASS_ONLY = "L_class_only"
    L_SPACE_ONLY = "L_space_only"
    OUTSIDE = "Outside"
    UNKNOWN = "Unknown"


DEFAULT_PROBES = (0.125, 0.5, 1.0, 2.0, 8.0)
# only finiteness matters here; kinks of |u| make tighter tolerances slow to certify
PROBE_REL_TOL = 1e-6


def classify_membership(Phi: MOFunction, u: ScalarField,
                        probes: Sequence[float] = DEFAULT_PROBES,
                        rel_tol: float = PROBE_REL_TOL) -> Membership:
    """Place ``u`` among E^Phi, the modular class and L^Phi by probing ``I_Phi(lam u)``."""
    probes = sorted(float(p) for p in probes)
    if 1.0 not in probes:
        probes = sorted(probes + [1.0])
    lin = u.linear()
    verdicts = {lam: modular(Phi, lin * lam, rel_tol=rel_tol).kind for lam in probes}
    if all(k is Verdict.FINITE for k in verdicts.values()):
        return Membership.E_SPACE
    at_one = verdicts[1.0]
    if at_one is Verdict.FINITE:
        if any(verdicts[lam] is Verdict.DIVERGENT for lam in probes if lam > 1.0):
            return Membership.L_CLASS_ONLY
        return Membership.UNKNOWN
    if at_one is Verdict.DIVERGENT:
        below = [verdicts[lam] for lam in probes if lam < 1.0]
        if any(k is Verdict.FINITE for k in below):
            return Membership.L_SPACE_ONLY
        if all(k is Verdict.DIVERGENT for k in verdicts.values()):
            return Membership.OUTSIDE
    return Membership.UNKNOWN


def require_finite(v: IntegralVerdict, what: str) -> float:
    if v.is_finite:
        return v.value
    if v.kind is Verdict.INCONCLUSIVE:
        raise InconclusiveError(f"{what}: integral could not be certified")
    raise NotInSpaceError(f"{what}: integral diverges")
