import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from phifamily.errors import NotInSpaceError
from phifamily.measure import (Points, ScalarField, Verdict, coordinate_field, depth_field,
                               make_uniform_grid)
from phifamily.morlicz import (Membership, classify_membership, fenchel_conjugate,
                               luxemburg_norm, mo_from_phi, modular, orlicz_norm, power_mo)
from phifamily.phifunc import make_exponential, make_kappa_exponential

G = make_uniform_grid(64)
SQ = power_mo(2)


def exp_mo(grid=G):
    return mo_from_phi(make_exponential(), ScalarField.constant(grid, 0.0))


def test_phi_induced_function_values():
    Phi = exp_mo()
    u = np.array([0.0, math.log(2), 1.0])
    np.testing.assert_allclose(Phi(Points(np.full(3, 0.5)), u), [0.0, 1.0, math.e - 1], rtol=1e-14)
    K = mo_from_phi(make_kappa_exponential(0.5), ScalarField.constant(G, 0.0))
    assert K(Points([0.5]), np.array([0.0]))[0] == 0.0
    assert math.isinf(Phi.finiteness_boundary(Points([0.5]))[0])


def test_phi_induced_function_is_accurate_for_tiny_u():
    Phi = exp_mo()
    u = np.array([1e-12, 1e-8])
    np.testing.assert_allclose(Phi(Points(np.full(2, 0.5)), u), np.expm1(u), rtol=1e-12)


def test_t_dependent_center():
    c = coordinate_field(G).map(lambda t: np.log(2 * t))
    Phi = mo_from_phi(make_exponential(), c)
    pts = Points([0.25, 0.75])
    np.testing.assert_allclose(Phi(pts, np.array([1.0, 1.0])), 2 * pts.t * (math.e - 1), rtol=1e-13)


def test_power_bound_gives_infinity():
    Phi = power_mo(2, bound=3.0)
    vals = Phi(Points(np.full(3, 0.5)), np.array([1.0, 2.9, 3.0]))
    assert vals[0] == 1.0 and math.isinf(vals[2])
    assert modular(Phi, ScalarField.constant(G, 4.0)).kind is Verdict.DIVERGENT
    with pytest.raises(ValueError):
        power_mo(0.5)


def test_modular_examples():
    assert modular(SQ, coordinate_field(G)).value == pytest.approx(1 / 3, abs=1e-9)
    gl = make_uniform_grid(64, singular_ends="left")
    assert modular(exp_mo(gl), depth_field(gl)).kind is Verdict.DIVERGENT
    for Phi in (SQ, exp_mo()):
        v = modular(Phi, ScalarField.constant(G, 0.0))
        assert v.is_finite and v.value == 0.0


def test_modular_uses_absolute_value():
    u = coordinate_field(G) - 0.5
    assert modular(exp_mo(), u).value == pytest.approx(modular(exp_mo(), abs(u)).value, rel=1e-12)


def test_luxemburg_examples():
    one = ScalarField.constant(G, 1.0)
    assert luxemburg_norm(SQ, one) == pytest.approx(1.0, rel=1e-8)
    assert luxemburg_norm(SQ, 2 * one) == pytest.approx(2.0, rel=1e-8)
    assert luxemburg_norm(SQ, coordinate_field(G)) == pytest.approx(1 / math.sqrt(3), rel=1e-8)
    assert luxemburg_norm(SQ, 0 * one) == 0.0


def test_orlicz_examples():
    one = ScalarField.constant(G, 1.0)
    assert orlicz_norm(SQ, one) == pytest.approx(2.0, rel=1e-8)
    assert orlicz_norm(SQ, 2 * one) == pytest.approx(4.0, rel=1e-8)
    assert orlicz_norm(exp_mo(), 0 * one) == 0.0


def test_norms_of_logarithmic_field():
    # I(k s) = k / (1 - k) for k < 1 under e^u - 1
    gl = make_uniform_grid(64, singular_ends="left")
    s = depth_field(gl)
    assert luxemburg_norm(exp_mo(gl), s) == pytest.approx(2.0, rel=1e-8)
    assert orlicz_norm(exp_mo(gl), s) == pytest.approx(4.0, rel=1e-8)


def test_not_in_space():
    Phi = power_mo(2, bound=1.0)
    gl = make_uniform_grid(64, singular_ends="left")
    with pytest.raises(NotInSpaceError):
        luxemburg_norm(Phi, depth_field(gl), tol=1e-3)


def test_unit_ball_property():
    u = coordinate_field(G).map(lambda t: 3 * np.cos(4 * t))
    for Phi in (SQ, exp_mo(), power_mo(3.5)):
        lam = luxemburg_norm(Phi, u)
        assert modular(Phi, u * (1 / lam)).value <= 1 + 1e-8


@given(alpha=st.floats(0.05, 20))
def test_homogeneity(alpha):
    u = coordinate_field(G).map(lambda t: 1 + np.sin(3 * t))
    Phi = exp_mo()
    for norm in (luxemburg_norm, orlicz_norm):
        assert norm(Phi, alpha * u) == pytest.approx(alpha * norm(Phi, u), rel=1e-7)
        assert norm(Phi, -alpha * u) == pytest.approx(alpha * norm(Phi, u), rel=1e-7)


@given(lams=st.lists(st.floats(0.0, 3.0), min_size=3, max_size=3, unique=True))
def test_modular_convex_and_nondecreasing(lams):
    a, b, c = sorted(lams)
    u = coordinate_field(G).map(lambda t: 2 * t - 0.3)
    Phi = exp_mo()
    Ia, Ib, Ic = (modular(Phi, lam * u).value for lam in (a, b, c))
    assert Ia <= Ib + 1e-12 <= Ic + 2e-12
    if c > a:
        w = (b - a) / (c - a)
        assert Ib <= (1 - w) * Ia + w * Ic + 1e-9


def test_conjugate_examples():
    Phi = exp_mo()
    assert fenchel_conjugate(Phi, 0.5, math.e) == pytest.approx(1.0, abs=1e-9)
    assert fenchel_conjugate(Phi, 0.5, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert fenchel_conjugate(Phi, 0.5, 0.3) == 0.0
    assert fenchel_conjugate(SQ, 0.5, 2.0) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        fenchel_conjugate(Phi, 0.5, -1.0)


def test_conjugate_of_linear_growth_is_infinite():
    Phi = power_mo(1.0)
    assert math.isinf(fenchel_conjugate(Phi, 0.5, 2.0))
    assert fenchel_conjugate(Phi, 0.5, 0.5) == 0.0


def test_conjugate_with_finite_bound():
    # sup over [0, 2) of u v - u^2 with v = 10 is attained at the boundary
    Phi = power_mo(2, bound=2.0)
    assert fenchel_conjugate(Phi, 0.5, 10.0) == pytest.approx(20 - 4, rel=1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@given(v=st.floats(0.0, 50.0))
def test_conjugate_of_power(p, v):
    q = p / (p - 1)
    # (u^p)* = (p-1) (v/p)^q
    ref = (p - 1) * (v / p) ** q
    assert fenchel_conjugate(power_mo(p), 0.5, v) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_conjugate_reads_sampled_centers_at_nodes():
    c = ScalarField.from_values(G, np.log(2 * G.t))
    Phi = mo_from_phi(make_exponential(), c)
    t = G.t[10]
    # Phi(t, u) = 2t (e^u - 1); conjugate at v >= 2t is v log(v/2t) - v + 2t
    v = 3.0
    assert fenchel_conjugate(Phi, t, v) == pytest.approx(v * math.log(v / (2 * t)) - v + 2 * t, rel=1e-9)
    with pytest.raises(ValueError):
        fenchel_conjugate(Phi, 0.123456789, v)


def test_membership_examples():
    gl = make_uniform_grid(64, singular_ends="left")
    Phi = exp_mo(gl)
    assert classify_membership(SQ, coordinate_field(G).map(np.cos)) is Membership.E_SPACE
    assert classify_membership(Phi, 0 * depth_field(gl)) is Membership.E_SPACE
    # I(lam s) = lam / (1 - lam): finite below 1 only
    assert classify_membership(Phi, depth_field(gl)) is Membership.L_SPACE_ONLY
    # the sub-critical witness shape: finite at 1, divergent beyond
    w = depth_field(gl).map(lambda s: s - 2 * np.log1p(s))
    assert classify_membership(Phi, w) is Membership.L_CLASS_ONLY
    assert classify_membership(Phi, depth_field(gl).map(lambda s: s ** 2)) is Membership.OUTSIDE


def _dual_orlicz_norm(u, w, conj, deriv):
    """sup E[|u| v] over v >= 0 with E[conj(v)] <= 1 on a finite measure.

    The maximizer has the form v = Phi'(k |u|); k is fixed by the active constraint.
    """
    a = np.abs(u)
    k = optimize.brentq(lambda k: np.dot(w, conj(deriv(k * a))) - 1.0, 1e-9, 20.0, xtol=1e-15)
    return float(np.dot(w, a * deriv(k * a)))


def _exp_conj(v):
    v = np.maximum(v, 1.0)
    return v * np.log(v) - v + 1


@pytest.mark.parametrize("values", [
    [0.3, 1.2, -0.7, 2.0, 0.1, -1.5, 0.8, 0.4],
    [1.0] * 8,
    [0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.5],
])
def test_amemiya_matches_dual_definition_on_toy_grid(values):
    g = make_uniform_grid(8)
    u = ScalarField.from_values(g, values)
    Phi = mo_from_phi(make_exponential(), ScalarField.from_values(g, np.zeros(8)))
    dual = _dual_orlicz_norm(np.asarray(values), g.weights, _exp_conj, np.exp)
    assert orlicz_norm(Phi, u) == pytest.approx(dual, rel=1e-7)
    sq_dual = _dual_orlicz_norm(np.asarray(values), g.weights, lambda v: v ** 2 / 4, lambda x: 2 * x)
    assert orlicz_norm(SQ, u) == pytest.approx(sq_dual, rel=1e-7)
