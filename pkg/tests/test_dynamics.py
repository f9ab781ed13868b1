import math

import numpy as np
import pytest
import sympy as sp

from bpskink.closed_form import alpha_exact, kappa_exact, sample
from bpskink.core import FieldConfig, KinkParams, ModelParams, SingularityError, ValidationError, make_grid
from bpskink.dynamics import (
    StepSizeError,
    bps_residuals,
    el_residuals,
    integrate_bps,
    pq_flow,
    pq_matrix,
    residual_report,
)

# EL2 residual alpha'' - sin(4 alpha) of alpha = (pi/4)(1 + tanh x), kappa = 0, m = 1,
# evaluated symbolically to 20 digits
TANH_TRIAL_EL2 = {
    -1.0: -0.17846851215925971757,
    -0.5: -0.42205030704147007030,
    0.25: 0.33408926360791374185,
    0.5: 0.42205030704147007030,
    1.0: 0.17846851215925971757,
    2.0: 0.0057843857110446258890,
}


def tanh_trial(g, with_derivs=False):
    x = g.x
    alpha = 0.25 * math.pi * (1 + np.tanh(x))
    if with_derivs:
        return FieldConfig(g, np.zeros(g.n), alpha, np.zeros(g.n), 0.25 * math.pi / np.cosh(x) ** 2)
    return FieldConfig(g, np.zeros(g.n), alpha)


def test_el_residuals_small_on_closed_form(unit_model):
    g = make_grid(-15, 15, 30001)
    c = sample(g, unit_model, KinkParams(0.0, 1.0))
    r1, r2 = el_residuals(c, unit_model)
    assert np.max(np.abs(r1[1:-1])) < 1e-5
    assert np.max(np.abs(r2[1:-1])) < 1e-5


def test_el_residuals_vacuum(unit_model):
    g = make_grid(-3, 3, 61)
    r1, r2 = el_residuals(FieldConfig(g, np.zeros(61), np.zeros(61)), unit_model)
    assert np.all(r1 == 0) and np.all(r2 == 0)


def test_el2_symbolic_oracle():
    x = sp.symbols("x")
    a = sp.pi / 4 * (1 + sp.tanh(x))
    residual = sp.lambdify(x, sp.diff(a, x, 2) - sp.sin(4 * a), "math")
    for xv, frozen in TANH_TRIAL_EL2.items():
        assert residual(xv) == pytest.approx(frozen, rel=1e-14)
    model = ModelParams(1.0, 1.0)
    g = make_grid(-4, 4, 8001)
    _, r2 = el_residuals(tanh_trial(g), model)
    for xv, frozen in TANH_TRIAL_EL2.items():
        i = int(round((xv - g.x_min) / g.h))
        assert r2[i] == pytest.approx(frozen, abs=2e-6)
    assert np.max(np.abs(r2)) > 0.4


def test_el_rejects_kappa_at_one(unit_model):
    g = make_grid(0, 1, 5)
    with pytest.raises(SingularityError):
        el_residuals(FieldConfig(g, np.array([0, 0.5, 1.0, 0.5, 0]), np.zeros(5)), unit_model)


def test_el_residual_second_order(unit_model):
    kink = KinkParams(0.0, 1.0)
    maxima = []
    for n in (1501, 3001, 6001):
        rep = residual_report(sample(make_grid(-15, 15, n), unit_model, kink), unit_model)
        maxima.append(rep.el_max)
    assert maxima[0] / maxima[1] == pytest.approx(4, rel=0.1)
    assert maxima[1] / maxima[2] == pytest.approx(4, rel=0.1)


def test_bps_residuals_closed_form_machine_zero():
    model = ModelParams(0.7, 1.8)
    c = sample(make_grid(-30, 30, 3001), model, KinkParams(-1.0, 7.0, -1))
    P, Q = bps_residuals(c, model)
    assert max(np.max(np.abs(P)), np.max(np.abs(Q))) < 1e-14


def test_bps_residuals_trivial_kappa(unit_model):
    c = sample(make_grid(-8, 8, 161), unit_model, KinkParams(q=0.0))
    P, Q = bps_residuals(c, unit_model)
    assert np.all(P == 0) and np.all(Q == 0)


def test_bps_residual_tanh_trial(unit_model):
    g = make_grid(-2, 2, 41)
    P, Q = bps_residuals(tanh_trial(g, with_derivs=True), unit_model)
    assert P[20] == pytest.approx(math.pi / 4 - 1, abs=1e-15)
    assert P[20] == pytest.approx(-0.21460, abs=1e-5)
    assert np.all(Q == 0)


def test_integrate_bps_matches_closed_form(unit_model):
    kink = KinkParams(0.0, 1.0)
    g = make_grid(-15, 15, 30001)
    c = integrate_bps(unit_model, kink, g, check_every=100)
    assert np.max(np.abs(c.kappa - kappa_exact(g.x, unit_model, kink))) < 1e-8
    assert np.max(np.abs(c.alpha - alpha_exact(g.x, unit_model, kink))) < 1e-8


def test_integrate_bps_trivial_and_sign(unit_model):
    g = make_grid(-10, 10, 2001)
    zero = integrate_bps(unit_model, KinkParams(q=0.0), g)
    assert np.all(zero.kappa == 0)
    assert np.max(np.abs(zero.alpha - alpha_exact(g.x, unit_model, KinkParams()))) < 1e-7
    plus = integrate_bps(unit_model, KinkParams(q=2.0, sign=1), g)
    minus = integrate_bps(unit_model, KinkParams(q=2.0, sign=-1), g)
    assert np.array_equal(minus.kappa, -plus.kappa)
    assert np.array_equal(minus.alpha, plus.alpha)


def test_integrate_bps_fourth_order():
    model = ModelParams(1.0, 1.0)
    kink = KinkParams(0.0, 1.0)
    errs = []
    for h in (0.1, 0.05, 0.025):
        g = make_grid(-15, 15, int(round(30 / h)) + 1)
        c = integrate_bps(model, kink, g)
        errs.append(np.max(np.abs(c.kappa - kappa_exact(g.x, model, kink))))
    assert errs[0] / errs[1] >= 12
    assert errs[1] / errs[2] >= 12


def test_integrate_bps_rejects_bad_seed_and_big_steps(unit_model):
    with pytest.raises(ValidationError):
        integrate_bps(unit_model, KinkParams(), make_grid(-0.5, 5, 101))
    with pytest.raises(StepSizeError):
        integrate_bps(unit_model, KinkParams(), make_grid(-15, 15, 31))


def test_pq_matrix_examples():
    for m, A in [(1.0, 1.0), (0.5, 2.0), (3.0, 0.25)]:
        M = pq_matrix(0.0, 0.0, 0.0, ModelParams(m, A))
        assert np.array_equal(M, np.diag([4 * m, 2 * m / A]))
    M = pq_matrix(0.0, math.pi / 4, 0.3, ModelParams())
    np.testing.assert_allclose(M, 0.0, atol=1e-15)
    M = pq_matrix(0.5, 0.0, 0.0, ModelParams())
    np.testing.assert_allclose(M, np.diag([4.0, 0.5]), atol=1e-15)
    M = pq_matrix(0.3, 0.7, 0.2, ModelParams(1.3, 0.9))
    assert M[0, 1] == M[1, 0]
    with pytest.raises(SingularityError):
        pq_matrix(1.0, 0.0, 0.0, ModelParams())


def test_pq_matrix_reproduces_norm_derivative():
    # (P^2 + Q^2)' computed from the flow equations equals -(P,Q) M (P,Q)^T
    model = ModelParams(1.1, 0.8)
    k, a, P, Q = 0.35, 0.6, 0.2, -0.15
    one = 1 - k * k
    dP = -2 * model.m * math.cos(2 * a) * P + 4 * model.m * k * one * math.sin(2 * a) * Q
    dQ = -(k * P * P + model.m * one ** 3 * (1 - 3 * k * k) * math.cos(2 * a) * Q) / (model.A * one ** 3)
    v = np.array([P, Q])
    assert 2 * P * dP + 2 * Q * dQ == pytest.approx(-v @ pq_matrix(k, a, P, model) @ v, rel=1e-13)


def test_pq_flow_zero_data_stays_zero(unit_model):
    rep = pq_flow(sample(make_grid(-10, 10, 2001), unit_model, KinkParams()), 0.0, 0.0, unit_model)
    assert np.all(rep.P_traj == 0) and np.all(rep.Q_traj == 0)
    assert rep.decay_verified


def test_pq_flow_vacuum_background():
    model = ModelParams(1.0, 1.0)
    g = make_grid(0, 5, 1001)
    rep = pq_flow(FieldConfig(g, np.zeros(g.n), np.zeros(g.n)), 1.0, 0.0, model)
    # P' = -2 m P on this background, hence P^2 + Q^2 = exp(-4 m (x - x_min))
    np.testing.assert_allclose(rep.P_traj, np.exp(-2 * model.m * g.x), rtol=1e-9)
    np.testing.assert_allclose(rep.norm_sq, np.exp(-4 * model.m * g.x), rtol=1e-8)
    assert np.all(rep.Q_traj == 0)
    assert rep.measured_rate == pytest.approx(4.0, rel=1e-8)
    assert rep.lambda1 == pytest.approx(2.0) and rep.lambda2 == pytest.approx(4.0)


@pytest.mark.parametrize("m,A", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5), (1.0, 3.0)])
def test_pq_flow_decays_within_envelope(m, A):
    model = ModelParams(m, A)
    g = make_grid(-12 / m, 2, 4001)
    rep = pq_flow(sample(g, model, KinkParams(0.0, 1.0)), 1e-3, -2e-3, model)
    assert rep.decay_verified
    assert 0 < rep.lambda1 < rep.lambda2
    assert rep.lambda1 <= rep.measured_rate <= rep.lambda2
    lo, hi = rep.interval
    sel = (g.x >= lo) & (g.x <= hi)
    assert np.all(rep.M_eigen_min[sel] >= rep.lambda1)
    assert np.all(rep.M_eigen_max[sel] <= rep.lambda2)
    # far left the spectrum approaches {4m, 2m/A}; kappa's tail decays like exp(2mx/A)
    assert rep.M_eigen_min[0] == pytest.approx(min(4 * m, 2 * m / A), rel=1e-2)
    assert rep.M_eigen_max[0] == pytest.approx(max(4 * m, 2 * m / A), rel=1e-2)


def test_pq_flow_singular_background(unit_model):
    g = make_grid(0, 1, 5)
    with pytest.raises(SingularityError):
        pq_flow(FieldConfig(g, np.array([0, 0.5, 1.0, 0.5, 0]), np.zeros(5)), 0.1, 0.1, unit_model)


def test_residual_report_excludes_endpoints(unit_model):
    c = sample(make_grid(-5, 5, 101), unit_model, KinkParams())
    rep = residual_report(c.without_derivatives(), unit_model)
    assert rep.max_abs["el_kappa"] == np.max(np.abs(rep.el_kappa[1:-1]))
    assert set(rep.max_abs) == {"el_kappa", "el_alpha", "P", "Q"}
