"""Charts of the phi-family around a center: normalization, chart maps and boundary sweeps."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .errors import (InconclusiveError, NotInDomainError, NotNormalizedError, NumericFailure,
                     UnsupportedChartError)
from .measure import GridMeasure, IntegralVerdict, ScalarField, Verdict, integrate, quadrature
from .phifunc import PhiFunction

PSI_CAP = 64.0
# zero-mean constant of the sub-critical witness: -1 + 2 e E1(1)
WSUB_CONSTANT = -1.0 + 2.0 * math.e * float(special.exp1(1.0))


@dataclass(frozen=True, eq=False)
class Chart:
    phi: PhiFunction
    c: ScalarField
    u0: ScalarField
    grid: GridMeasure
    deriv_weight: ScalarField
    u0_moment: float  # E[u0 phi'(c)], the projection denominator
    mass: float

    def moment(self, u: ScalarField) -> float:
        """``E[u phi'_+(c)]``."""
        v = integrate(u.linear() * self.deriv_weight)
        if not v.is_finite:
            raise NumericFailure(f"moment E[u phi'(c)] is {v.kind.value}")
        return v.value


def _expect(f: ScalarField, what: str) -> IntegralVerdict:
    v = integrate(f)
    if v.kind is Verdict.INCONCLUSIVE:
        raise InconclusiveError(f"{what}: integral could not be certified")
    return v


def make_chart(phi: PhiFunction, c: ScalarField, u0: ScalarField | None = None) -> Chart:
    c = c.linear()
    m = integrate(phi.of(c))
    if not m.is_finite or abs(m.value - 1.0) > 1e-6:
        raise NotNormalizedError(f"center has mass {m.value} (kind {m.kind.value})", m.value)
    u0 = phi.companion(c.grid) if u0 is None else u0.linear().on(c.grid)
    dw = phi.deriv_of(c)
    denom = integrate(u0 * dw)
    if not denom.is_finite or denom.value <= 0:
        raise NumericFailure("E[u0 phi'(c)] must be finite and positive")
    return Chart(phi, c, u0, c.grid, dw, denom.value, m.value)


def in_K(ch: Chart, u: ScalarField, eps: Sequence[float] = (1 / 8, 1 / 64)) -> bool:
    """Whether ``E[phi(c + lam u)]`` is finite for some ``lam > 1``.

    Probes ``lam = 1 + eps`` for each ``eps`` in turn.  Raises
    :class:`InconclusiveError` when no probe is finite and some are inconclusive.
    """
    u = u.linear().on(ch.grid)
    unsure = False
    for e in eps:
        v = integrate(ch.phi.of(ch.c + (1.0 + e) * u))
        if v.is_finite:
            return True
        unsure |= v.kind is Verdict.INCONCLUSIVE
    if unsure:
        raise InconclusiveError("finiteness of E[phi(c + lam u)] undetermined")
    return False


def project_to_B(ch: Chart, u: ScalarField) -> ScalarField:
    """Remove the ``u0`` component so that ``E[w phi'_+(c)] = 0``."""
    u = u.linear().on(ch.grid)
    coef = ch.moment(u) / ch.u0_moment
    return u - coef * ch.u0


def _shift_rule(ch: Chart, u: ScalarField):
    phi, c, u0 = ch.phi, ch.c, ch.u0

    def rule_at(psi):
        def rule(coords):
            return phi.log_eval(coords.t, c.evaluate(coords) + u.evaluate(coords)
                                - psi * u0.evaluate(coords))
        return rule
    return rule_at


def normalize_psi(ch: Chart, u: ScalarField, tol: float = 1e-8, psi_cap: float = PSI_CAP,
                  check_centering: bool = True) -> float:
    """The ``psi >= 0`` with ``E[phi(c + u - psi u0)] = 1``.

    The mass is evaluated on the grids of a converged integral of
    ``phi(c + u)`` and the root found by Brent's method; the result is then
    re-certified with a fresh adaptive integral.
    """
    u = u.linear().on(ch.grid)
    if check_centering:
        scale = integrate(abs(u) * ch.deriv_weight)
        mom = ch.moment(u)
        if abs(mom) > 1e-6 * max(1.0, scale.value if scale.is_finite else 1.0):
            raise ValueError(f"u is not centered: E[u phi'(c)] = {mom:.3g}")
    top = _expect(ch.phi.of(ch.c + u), "E[phi(c + u)]")
    if top.is_divergent:
        raise NotInDomainError("E[phi(c + u)] diverges; u is outside the chart domain")
    if top.value <= 1.0 + tol:
        return 0.0
    rule_at = _shift_rule(ch, u)
    grids = top.grids

    def excess(psi):
        return quadrature(rule_at(psi), grids, log_scale=True) - 1.0

    cap = psi_cap
    while excess(cap) > 0:
        cap *= 2.0
        if cap > 1e6:
            raise NumericFailure(f"no psi in [0, {cap:g}] brings the mass down to 1")
    psi = optimize.brentq(excess, 0.0, cap, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    check = integrate(ScalarField.from_rule(ch.grid, rule_at(psi), log_scale=True))
    if not check.is_finite or abs(check.value - 1.0) > max(tol, 1e-10):
        raise NumericFailure(f"normalization check failed: mass {check.value} at psi = {psi}")
    return float(psi)


def _chart_image(ch: Chart, u: ScalarField, psi: float) -> ScalarField:
    return ch.phi.of(ch.c + u - psi * ch.u0)


def chart_map(ch: Chart, u: ScalarField, tol: float = 1e-8) -> ScalarField:
    """The density ``phi(c + u - psi(u) u0)``, returned in log scale."""
    u = u.linear().on(ch.grid)
    return _chart_image(ch, u, normalize_psi(ch, u, tol))


def inverse_psi(ch: Chart, q: ScalarField) -> tuple[ScalarField, float]:
    """Chart coordinates ``u`` of a density ``q`` together with ``psi(u)``."""
    q = q.on(ch.grid)
    if np.any(q.log_values == -np.inf) or (not q.log_scale and np.any(q.data <= 0)):
        raise ValueError("q must be strictly positive")
    m = integrate(q)
    if not m.is_finite or abs(m.value - 1.0) > 1e-6:
        raise NotNormalizedError(f"q has mass {m.value}", m.value)
    d = ch.phi.inverse_of(q) - ch.c
    psi_hat = -ch.moment(d) / ch.u0_moment
    return d + psi_hat * ch.u0, float(psi_hat)


def chart_inverse(ch: Chart, q: ScalarField) -> ScalarField:
    return inverse_psi(ch, q)[0]


def transition_map(ch1: Chart, ch2: Chart, u: ScalarField) -> ScalarField:
    """Coordinates in ``ch2`` of the density with coordinates ``u`` in ``ch1``."""
    return chart_inverse(ch2, chart_map(ch1, u))


class WitnessKind(str, enum.Enum):
    WSTAR = "WStar"
    WSUBSTAR = "WSubStar"


def _is_exponential_unit_chart(ch: Chart) -> bool:
    return (ch.phi.name == "exp" and ch.grid.interval == (0.0, 1.0)
            and ch.grid.singular_ends[0] and np.all(ch.c.data == 0.0))


def boundary_witness(ch: Chart, kind: WitnessKind | str) -> ScalarField:
    """Centered directions on the boundary of the exponential chart at ``c = 0``.

    ``WStar`` is ``s - 1`` and ``WSubStar`` is ``s - 2 log(1 + s) + C`` with
    ``s = -log t``.  Along ``lam w`` the mass stays finite for ``lam < 1``;
    at ``lam = 1`` it is infinite for ``WStar`` and finite for ``WSubStar``.
    """
    kind = WitnessKind(kind)
    if not _is_exponential_unit_chart(ch):
        raise UnsupportedChartError(
            "boundary witnesses exist only for the exponential chart with c = 0 on a "
            "left-graded grid of (0, 1)")
    if kind is WitnessKind.WSTAR:
        return ScalarField.from_rule(ch.grid, lambda c: -np.asarray(c.log_left) - 1.0, "w^*")
    return ScalarField.from_rule(ch.grid, _wsub_rule, "w_*")


def _wsub_rule(coords):
    s = -np.asarray(coords.log_left)
    return s - 2.0 * np.log1p(s) + WSUB_CONSTANT


class SweepVerdict(str, enum.Enum):
    CONVERGENT = "ConvergentPsi"
    BLOWUP = "DerivativeBlowup"
    INCONCLUSIVE = "Inconclusive"


DEFAULT_SCHEDULE = (0.5, 0.9, 0.99, 0.999)


@dataclass(frozen=True)
class SweepResult:
    lambdas: tuple[float, ...]
    psi_values: tuple[float, ...]
    right_derivs: tuple[float, ...]
    verdict: SweepVerdict
    alpha: float | None = None
    truncated: bool = False
    error: str | None = None
    blowup_factor: float = field(default=5.0, repr=False)


def _limit_fit(lams: Sequence[float], psis: Sequence[float]) -> float:
    """Extrapolate to ``lam = 1`` with ``psi ~ alpha - e (A log(1/e) + B)``, ``e = 1 - lam``."""
    eps = 1.0 - np.asarray(lams[-3:], dtype=float)
    M = np.column_stack([np.ones(3), -eps * np.log(1.0 / eps), -eps])
    try:
        return float(np.linalg.solve(M, np.asarray(psis[-3:], dtype=float))[0])
    except np.linalg.LinAlgError:
        return float(psis[-1])


def psi_sweep(ch: Chart, u: ScalarField, schedule: Sequence[float] = DEFAULT_SCHEDULE,
              blowup_factor: float = 5.0, cauchy_ratio: float = 0.5) -> SweepResult:
    """``psi(lam u)`` along an increasing schedule in ``[0, 1)``.

    Slopes are forward differences over the schedule.  The verdict is
    DerivativeBlowup when the last slope exceeds the previous one by
    ``blowup_factor``; ConvergentPsi when the last two increments of psi
    contract by ``cauchy_ratio``, with ``alpha`` extrapolated to ``lam = 1``.
    A failed solve stops the sweep and returns what was computed.
    """
    lams = [float(x) for x in schedule]
    if len(lams) < 3:
        raise ValueError("schedule needs at least three points")
    if any(not 0.0 <= x < 1.0 for x in lams) or any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("schedule must be strictly increasing in [0, 1)")
    u = u.linear().on(ch.grid)
    psis: list[float] = []
    error = None
    for lam in lams:
        try:
            psis.append(normalize_psi(ch, lam * u))
        except (NumericFailure, InconclusiveError, ValueError) as exc:
            error = f"lambda={lam:g}: {exc}"
            break
    done = lams[:len(psis)]
    derivs = [(psis[i + 1] - psis[i]) / (done[i + 1] - done[i]) for i in range(len(psis) - 1)]
    if error is not None:
        return SweepResult(tuple(done), tuple(psis), tuple(derivs), SweepVerdict.INCONCLUSIVE,
                           None, True, error, blowup_factor)
    verdict, alpha = SweepVerdict.INCONCLUSIVE, None
    if len(derivs) >= 2 and derivs[-2] > 0 and derivs[-1] >= blowup_factor * derivs[-2]:
        verdict = SweepVerdict.BLOWUP
    else:
        d1, d2 = psis[-2] - psis[-3], psis[-1] - psis[-2]
        bounded = all(math.isfinite(d) for d in derivs)
        if bounded and abs(d2) <= cauchy_ratio * abs(d1):
            verdict, alpha = SweepVerdict.CONVERGENT, _limit_fit(done, psis)
    return SweepResult(tuple(done), tuple(psis), tuple(derivs), verdict, alpha, False, None,
                       blowup_factor)
