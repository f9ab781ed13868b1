import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpskink.closed_form import default_grid, sample
from bpskink.core import FieldConfig, KinkParams, ModelParams, ValidationError, make_grid
from bpskink.energy import (
    EnergyReport,
    bogomolny_decomposition,
    energy_density,
    potential_density,
    quadratic_density,
    topological_density,
    total_energy,
    truncation_defect,
)


def test_potential_density_values(unit_model):
    assert potential_density(0.0, 0.0, unit_model) == 0.0
    assert potential_density(0.0, math.pi / 4, unit_model) == pytest.approx(2.0, rel=1e-15)
    for a in (0.0, 0.3, 1.1, 2.0):
        assert potential_density(1.0, a, unit_model) == 0.0


def test_energy_density_values():
    model = ModelParams(m=1.5, A=0.7, r=2.0)
    assert energy_density(0, 0, 0, 0, model) == 0.0
    value = energy_density(0.0, 0.0, math.pi / 4, model.m, model)
    assert value == pytest.approx(4 * model.m ** 2 * model.r, rel=1e-14)
    assert energy_density(0.0, 0.0, math.pi / 2, 0.0, model) == pytest.approx(0.0, abs=1e-30)


@settings(max_examples=200, deadline=None)
@given(
    k=st.floats(-1, 1),
    kp=st.floats(-10, 10),
    a=st.floats(-4, 4),
    ap=st.floats(-10, 10),
    m=st.floats(0.1, 4),
    A=st.floats(0.1, 4),
)
def test_densities_non_negative(k, kp, a, ap, m, A):
    model = ModelParams(m, A, 1.0)
    assert potential_density(k, a, model) >= 0.0
    assert energy_density(k, kp, a, ap, model) >= 0.0
    assert quadratic_density(k, kp, a, ap, model) >= 0.0


def test_pointwise_bogomolny_identity_random_jets(rng):
    n = 2000
    k = rng.uniform(-1, 1, n)
    kp = rng.normal(0, 3, n)
    a = rng.uniform(-math.pi, math.pi, n)
    ap = rng.normal(0, 3, n)
    model = ModelParams(1.7, 0.6, 2.3)
    lhs = energy_density(k, kp, a, ap, model)
    rhs = quadratic_density(k, kp, a, ap, model) + topological_density(k, kp, a, ap, model)
    scale = np.maximum(np.abs(lhs), quadratic_density(k, kp, a, ap, model)) + 1e-300
    assert np.max(np.abs(lhs - rhs) / scale) < 1e-12


def test_topological_density_is_a_derivative():
    # -2 m r d/dx[(1-k^2)^2 cos 2a] by central differences on a smooth jet
    model = ModelParams(1.2, 0.9, 1.1)
    x, h = 0.37, 1e-5
    k = lambda t: 0.4 * math.sin(t)
    a = lambda t: 0.2 + 0.3 * t ** 2
    phi = lambda t: (1 - k(t) ** 2) ** 2 * math.cos(2 * a(t))
    fd = -2 * model.m * model.r * (phi(x + h) - phi(x - h)) / (2 * h)
    exact = topological_density(k(x), 0.4 * math.cos(x), a(x), 0.6 * x, model)
    assert exact == pytest.approx(fd, rel=1e-8)


@pytest.mark.parametrize("r", [1.0, 2.5])
def test_closed_form_total_energy(r):
    model = ModelParams(1.0, 1.0, r)
    report = total_energy(sample(default_grid(model, KinkParams()), model, KinkParams()), model)
    assert report.total == pytest.approx(4.0 * r, rel=1e-10)
    assert report.bound == 4.0 * r
    parts = report.kinetic_kappa + report.kinetic_alpha + report.potential
    assert parts == pytest.approx(report.total, rel=1e-12)
    assert report.bogomolny_quadratic + report.topological == pytest.approx(report.total, rel=1e-10)


def test_vacuum_energy_zero(unit_model):
    g = make_grid(-5, 5, 11)
    report = total_energy(FieldConfig(g, np.zeros(11), np.zeros(11)), unit_model)
    assert report.total == 0.0
    assert report.topological == 0.0


def test_decomposition_of_closed_form():
    model = ModelParams(0.8, 1.6, 1.3)
    kink = KinkParams(0.5, 3.0, -1)
    quad, topo = bogomolny_decomposition(sample(default_grid(model, kink), model, kink), model)
    assert quad == pytest.approx(0.0, abs=1e-14)
    assert topo == pytest.approx(4 * model.m * model.r, rel=1e-14)


def test_decomposition_trivial_kappa_endpoints():
    model = ModelParams(1.3, 1.0, 0.7)
    g = make_grid(-15, 15, 301)
    c = sample(g, model, KinkParams(q=0.0))
    _, topo = bogomolny_decomposition(c, model)
    assert topo == pytest.approx(4 * model.m * model.r, rel=1e-14)


def test_topological_term_with_truncated_endpoints():
    model = ModelParams(1.0, 1.0, 1.0)
    g = make_grid(-1.0, 1.5, 101)
    c = sample(g, model, KinkParams(q=5.0)).without_derivatives()
    _, topo = bogomolny_decomposition(c, model)
    k, a = c.kappa, c.alpha
    direct = -2 * ((1 - k[-1] ** 2) ** 2 * math.cos(2 * a[-1]) - (1 - k[0] ** 2) ** 2 * math.cos(2 * a[0]))
    assert topo == pytest.approx(direct, rel=1e-14)
    assert 0 < truncation_defect(c, model) == pytest.approx(4 - topo)
    assert topo <= 4.0


def _smooth_bc_config(g, rng, model):
    x = g.x
    s = (x - g.x_min) / (g.x_max - g.x_min)
    window = np.sin(np.pi * s) ** 2
    kappa = window * sum(rng.uniform(-0.3, 0.3) * np.exp(-((x - rng.uniform(-3, 3)) / rng.uniform(0.5, 2)) ** 2)
                         for _ in range(3))
    alpha = 0.5 * math.pi * (np.tanh(x / rng.uniform(0.3, 2)) + 1) / 2
    alpha = alpha + window * rng.uniform(-0.2, 0.2) * np.exp(-x ** 2)
    alpha[0], alpha[-1] = 0.0, 0.5 * math.pi
    return FieldConfig(g, kappa, alpha)


def test_bound_holds_for_admissible_configs(rng):
    model = ModelParams(1.0, 1.0, 1.0)
    g = make_grid(-15, 15, 6001)
    for _ in range(10):
        c = _smooth_bc_config(g, rng, model)
        report = total_energy(c, model)
        delta = truncation_defect(c, model)
        assert report.total >= model.bound - delta - 1e-4
        assert report.bogomolny_quadratic >= 0
        assert report.total == pytest.approx(report.bogomolny_quadratic + report.topological, abs=1e-4)


def test_simpson_convergence_on_closed_form(unit_model):
    kink = KinkParams(0.3, 2.0)
    oracle = total_energy(sample(make_grid(-12, 12, 40001), unit_model, kink), unit_model).total
    errs = [abs(total_energy(sample(make_grid(-12, 12, n), unit_model, kink), unit_model).total - oracle)
            for n in (25, 49, 97)]
    assert errs[0] / errs[1] >= 8
    assert errs[1] / errs[2] >= 8


def test_simpson_fourth_order_on_non_decaying_profile(unit_model):
    def config(n):
        g = make_grid(0.0, 2.0, n)
        x = g.x
        return FieldConfig(g, 0.2 * np.sin(x), 0.5 + 0.3 * x, 0.2 * np.cos(x), np.full(n, 0.3))

    errs = []
    fine = total_energy(config(4097), unit_model).total
    for n in (9, 17, 33):
        errs.append(abs(total_energy(config(n), unit_model).total - fine))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(r >= 8 for r in ratios)
    assert ratios[-1] == pytest.approx(16, rel=0.1)


@pytest.mark.parametrize("derivs", [True, False])
def test_energy_sign_flip_bitwise(derivs):
    model = ModelParams(1.4, 0.7, 1.9)
    c = sample(make_grid(-10, 10, 401), model, KinkParams(0.2, 4.0))
    if not derivs:
        c = c.without_derivatives()
    assert total_energy(c, model) == total_energy(c.negated(), model)


def test_report_serialises_seven_fields(unit_model):
    report = total_energy(sample(make_grid(-10, 10, 201), unit_model, KinkParams()), unit_model)
    d = report.to_dict()
    assert list(d) == ["total", "kinetic_kappa", "kinetic_alpha", "potential",
                       "bogomolny_quadratic", "topological", "bound"]
    assert EnergyReport(**d) == report


def test_too_small_grid_rejected():
    with pytest.raises(ValidationError):
        make_grid(0, 1, 1)
