"""phi-functions: positive convex deformations of the exponential.

A phi-function is evaluated through its logarithm so that densities far out
in a singular tail stay representable.  The two built-ins do not depend on
``t``; the ``t`` argument is kept so that user-supplied functions may.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotNormalizedError
from .measure import GridMeasure, Points, Rule, ScalarField, integrate

Pointwise = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _ones(coords) -> np.ndarray:
    return np.ones(np.shape(coords.t))


@dataclass(frozen=True)
class PhiFunction:
    """A phi-function with its right derivative, inverse and companion ``u0``.

    ``log_eval(t, u)`` is ``log phi(t, u)`` and ``invert_log(t, log_v)`` solves
    ``phi(t, u) = v`` for ``u``.
    """

    name: str
    log_eval: Pointwise
    right_deriv: Pointwise
    invert_log: Pointwise
    u0: Rule = _ones
    params: dict = field(default_factory=dict)

    @classmethod
    def from_callables(cls, name, eval, right_deriv, invert_u, u0: Rule = _ones, **params):
        """Wrap plain ``eval``/``invert_u`` callables (no overflow protection)."""
        def log_eval(t, u):
            with np.errstate(divide="ignore"):
                return np.log(eval(t, u))

        def invert_log(t, log_v):
            return invert_u(t, np.exp(log_v))

        return cls(name, log_eval, right_deriv, invert_log, u0, params)

    def eval(self, t, u):
        with np.errstate(over="ignore"):
            return np.exp(self.log_eval(t, np.asarray(u, dtype=float)))

    def invert_u(self, t, v):
        v = np.asarray(v, dtype=float)
        if np.any(v <= 0):
            raise ValueError("phi takes only positive values; cannot invert v <= 0")
        return self.invert_log(t, np.log(v))

    # field-level operators -------------------------------------------------

    def of(self, u: ScalarField) -> ScalarField:
        """The density-like field ``phi(t, u(t))``, held in log scale."""
        return ScalarField.pointwise(lambda c, d: self.log_eval(c.t, d), u.linear(),
                                     tag=f"{self.name}({u.tag or 'u'})", log_scale=True)

    def deriv_of(self, u: ScalarField) -> ScalarField:
        return ScalarField.pointwise(lambda c, d: self.right_deriv(c.t, d), u.linear(),
                                     tag=f"{self.name}'({u.tag or 'u'})")

    def inverse_of(self, q: ScalarField) -> ScalarField:
        """``phi^{-1}(t, q(t))`` for a positive field ``q`` in either scale."""
        logq = q if q.log_scale else q.map(_safe_log, log_scale=True)
        return ScalarField.pointwise(lambda c, d: self.invert_log(c.t, d), logq,
                                     tag=f"{self.name}^-1({q.tag or 'q'})")

    def companion(self, grid: GridMeasure) -> ScalarField:
        return ScalarField.from_rule(grid, self.u0, "u0")


def _safe_log(d):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(d)


def make_exponential() -> PhiFunction:
    return PhiFunction(
        "exp",
        log_eval=lambda t, u: np.asarray(u, dtype=float),
        right_deriv=lambda t, u: np.exp(u),
        invert_log=lambda t, log_v: np.asarray(log_v, dtype=float),
    )


def make_kappa_exponential(kappa: float) -> PhiFunction:
    """Kaniadakis' kappa-exponential ``(k u + sqrt(1 + k^2 u^2))^(1/k)``.

    Written as ``exp(asinh(k u) / k)``; it grows like ``(2 k u)^(1/k)``, a
    polynomial rate, so the Musielak-Orlicz functions it induces satisfy the
    Delta2 condition.
    """
    kappa = float(kappa)
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")

    def log_eval(t, u):
        return np.arcsinh(kappa * np.asarray(u, dtype=float)) / kappa

    def right_deriv(t, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(log_eval(t, u)) / np.sqrt(1.0 + (kappa * u) ** 2)

    def invert_log(t, log_v):
        with np.errstate(over="ignore"):
            return np.sinh(kappa * np.asarray(log_v, dtype=float)) / kappa

    return PhiFunction(f"exp_kappa[{kappa:g}]", log_eval, right_deriv, invert_log,
                       params={"kappa": kappa})


# --------------------------------------------------------------------------- axioms

@dataclass(frozen=True)
class AxiomResult:
    name: str
    passed: bool | None  # None: not probed
    witness: tuple | None = None
    detail: str = ""


@dataclass(frozen=True)
class PhiAxiomReport:
    results: dict[str, AxiomResult]

    @property
    def all_passed(self):
        return all(r.passed is not False for r in self.results.values())

    def __getitem__(self, key):
        return self.results[key]


def verify_phi_axioms(phi: PhiFunction, g: GridMeasure, samples: int = 1000,
                      center: ScalarField | None = None, seed: int = 0) -> PhiAxiomReport:
    """Numerically probe positivity and axioms a1-a3; a4 only when a center is given.

    Convexity (a1) is a midpoint test on random pairs in [-20, 20] plus the
    pair (0, 10).  The limits in (a2) are checked as monotone trends at
    M = 10, 20, 40.  (a4) integrates phi(c + lambda u0) for lambda = 1, 2, 4.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    rng = np.random.default_rng(seed)
    resolved = g.t[(g.t > g.interval[0]) & (g.t < g.interval[1])]
    t_pts = resolved[np.linspace(0, resolved.size - 1, min(16, resolved.size)).astype(int)]
    results: dict[str, AxiomResult] = {}

    u = np.concatenate([[0.0, 10.0], rng.uniform(-20.0, 20.0, 2 * samples)])
    t_rep = rng.choice(t_pts, u.size)
    vals = phi.eval(t_rep, u)
    bad = ~(np.isfinite(vals) & (vals > 0))
    results["positivity"] = AxiomResult(
        "positivity", not bad.any(),
        (float(t_rep[bad][0]), float(u[bad][0])) if bad.any() else None)

    u1 = np.concatenate([[0.0], rng.uniform(-20.0, 20.0, samples)])
    u2 = np.concatenate([[10.0], rng.uniform(-20.0, 20.0, samples)])
    tt = rng.choice(t_pts, u1.size)
    mid = phi.eval(tt, 0.5 * (u1 + u2))
    chord = 0.5 * (phi.eval(tt, u1) + phi.eval(tt, u2))
    viol = mid > chord * (1.0 + 1e-12) + 1e-300
    witness = None
    if viol.any():
        i = int(np.argmax(viol))
        witness = (float(tt[i]), float(u1[i]), float(u2[i]))
    results["a1"] = AxiomResult("a1", not viol.any(), witness,
                                "midpoint convexity in u")

    ms = np.array([10.0, 20.0, 40.0])
    trend_ok = True
    witness = None
    for ti in t_pts:
        low = phi.eval(np.full(3, ti), -ms)
        high = phi.eval(np.full(3, ti), ms)
        if not (np.all(np.diff(low) < 0) and np.all(np.diff(high) > 0)
                and low[-1] < phi.eval(ti, 0.0) < high[-1]):
            trend_ok, witness = False, (float(ti),)
            break
    results["a2"] = AxiomResult("a2", trend_ok, witness, "monotone trend at M = 10, 20, 40")

    grid_u = np.linspace(-20.0, 20.0, 41)
    finite = all(np.isfinite(phi.eval(t_pts, np.full(t_pts.size, ui))).all() for ui in grid_u)
    results["a3"] = AxiomResult("a3", finite, None, "finite samples over t for fixed u")

    if center is None:
        results["a4"] = AxiomResult("a4", None, None, "no center supplied")
    else:
        u0 = phi.companion(center.grid)
        failed = [lam for lam in (1.0, 2.0, 4.0)
                  if not integrate(phi.of(center + lam * u0)).is_finite]
        results["a4"] = AxiomResult("a4", not failed, tuple(failed) or None,
                                    "integrability of phi(c + lambda u0)")
    return PhiAxiomReport(results)


def center_from_density(phi: PhiFunction, p: ScalarField) -> ScalarField:
    """The center ``c`` with ``phi(t, c(t)) = p(t)`` for a probability density ``p``."""
    if not p.log_scale and np.any(p.data <= 0):
        raise ValueError("density must be strictly positive")
    if p.log_scale and np.any(np.isneginf(p.data)):
        raise ValueError("density must be strictly positive")
    mass = integrate(p)
    if not mass.is_finite or abs(mass.value - 1.0) > 1e-6:
        raise NotNormalizedError(f"density has mass {mass.value}", mass.value)
    return phi.inverse_of(p)


__all__ = [
    "PhiFunction", "make_exponential", "make_kappa_exponential", "verify_phi_axioms",
    "center_from_density", "AxiomResult", "PhiAxiomReport", "Points",
]
