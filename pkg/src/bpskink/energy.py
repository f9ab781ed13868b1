"""Energy densities, Simpson quadrature of the kink energy and its
Bogomolny (completed-square) decomposition."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import FieldConfig, ModelParams, ValidationError, simpson


@dataclass(frozen=True)
class EnergyReport:
    total: float
    kinetic_kappa: float
    kinetic_alpha: float
    potential: float
    bogomolny_quadratic: float
    topological: float
    bound: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}

    @property
    def relative_excess(self) -> float:
        """(total - bound) / bound."""
        return (self.total - self.bound) / self.bound


def potential_density(kappa, alpha, model: ModelParams):
    """V(kappa, alpha); non-negative for |kappa| <= 1."""
    kappa = np.asarray(kappa, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    m2 = model.m * model.m
    w = (1.0 - kappa * kappa) ** 2
    s = np.sin(2.0 * alpha)
    c = np.cos(2.0 * alpha)
    out = 2.0 * m2 * w * s * s + 4.0 * m2 * kappa * kappa * w * c * c / model.A
    return float(out) if out.ndim == 0 else out


def _kinetic_parts(kappa, kappa_p, alpha_p, model):
    w = (1.0 - kappa * kappa) ** 2
    return model.r * 4.0 * model.A * kappa_p * kappa_p, model.r * 2.0 * w * alpha_p * alpha_p


def energy_density(kappa, kappa_p, alpha, alpha_p, model: ModelParams):
    kappa, kappa_p, alpha, alpha_p = (np.asarray(v, dtype=float) for v in (kappa, kappa_p, alpha, alpha_p))
    kk, ka = _kinetic_parts(kappa, kappa_p, alpha_p, model)
    out = kk + ka + model.r * np.asarray(potential_density(kappa, alpha, model))
    return float(out) if out.ndim == 0 else out


def quadratic_density(kappa, kappa_p, alpha, alpha_p, model: ModelParams):
    """Sum of the two squared BPS deviations, times r."""
    kappa, kappa_p, alpha, alpha_p = (np.asarray(v, dtype=float) for v in (kappa, kappa_p, alpha, alpha_p))
    w = (1.0 - kappa * kappa) ** 2
    dk = kappa_p - (model.m / model.A) * kappa * (1.0 - kappa * kappa) * np.cos(2.0 * alpha)
    da = alpha_p - model.m * np.sin(2.0 * alpha)
    out = model.r * (4.0 * model.A * dk * dk + 2.0 * w * da * da)
    return float(out) if out.ndim == 0 else out


def boundary_function(kappa, alpha):
    """(1 - kappa^2)^2 cos(2 alpha); the energy's total-derivative part
    is -2 m r times its derivative."""
    kappa = np.asarray(kappa, dtype=float)
    return (1.0 - kappa * kappa) ** 2 * np.cos(2.0 * np.asarray(alpha, dtype=float))


def topological_density(kappa, kappa_p, alpha, alpha_p, model: ModelParams):
    """-2 m r d/dx[(1 - kappa^2)^2 cos 2alpha] expanded by the chain rule, so
    that energy_density == quadratic_density + topological_density."""
    kappa, kappa_p, alpha, alpha_p = (np.asarray(v, dtype=float) for v in (kappa, kappa_p, alpha, alpha_p))
    one = 1.0 - kappa * kappa
    d = -4.0 * kappa * kappa_p * one * np.cos(2.0 * alpha) - 2.0 * one * one * np.sin(2.0 * alpha) * alpha_p
    out = -2.0 * model.m * model.r * d
    return float(out) if out.ndim == 0 else out


def _prepare(config: FieldConfig):
    if config.grid.n < 3:
        raise ValidationError("need at least 3 grid points")
    kappa_p, alpha_p = config.derivatives()
    return config.kappa, kappa_p, config.alpha, alpha_p


def bogomolny_decomposition(config: FieldConfig, model: ModelParams) -> tuple[float, float]:
    """(quadratic, topological): Simpson integral of the squared BPS
    deviations, and -2 m r [(1-kappa^2)^2 cos 2alpha] from the endpoints."""
    kappa, kappa_p, alpha, alpha_p = _prepare(config)
    quadratic = simpson(quadratic_density(kappa, kappa_p, alpha, alpha_p, model), config.grid)
    b = boundary_function(kappa[[0, -1]], alpha[[0, -1]])
    topological = -2.0 * model.m * model.r * float(b[1] - b[0])
    return quadratic, topological


def total_energy(config: FieldConfig, model: ModelParams) -> EnergyReport:
    kappa, kappa_p, alpha, alpha_p = _prepare(config)
    grid = config.grid
    kk, ka = _kinetic_parts(kappa, kappa_p, alpha_p, model)
    pot = model.r * potential_density(kappa, alpha, model)
    kinetic_kappa = simpson(kk, grid)
    kinetic_alpha = simpson(ka, grid)
    potential = simpson(pot, grid)
    quadratic, topological = bogomolny_decomposition(config, model)
    return EnergyReport(
        total=simpson(kk + ka + pot, grid),
        kinetic_kappa=kinetic_kappa,
        kinetic_alpha=kinetic_alpha,
        potential=potential,
        bogomolny_quadratic=quadratic,
        topological=topological,
        bound=model.bound,
    )


def truncation_defect(config: FieldConfig, model: ModelParams) -> float:
    """How far the endpoint values alone let the energy dip below 4mr:
    4mr minus the topological term (>= 0 when the endpoints approach the
    kink boundary values from inside)."""
    b = boundary_function(config.kappa[[0, -1]], config.alpha[[0, -1]])
    return model.bound + 2.0 * model.m * model.r * float(b[1] - b[0])
