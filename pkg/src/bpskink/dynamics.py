"""Euler-Lagrange and BPS residuals, BPS initial-value integration and
the (P, Q) deviation flow with its decay-rate matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .closed_form import alpha_exact, bps_rhs, kappa_exact
from .core import (
    FieldConfig,
    Grid,
    KinkParams,
    ModelParams,
    SingularityError,
    ValidationError,
    fd_derivative,
    fd_second_derivative,
)


class StepSizeError(RuntimeError):
    """The integrator's local error estimate exceeded its budget."""


def _interior_max(arr) -> float:
    return float(np.max(np.abs(arr[1:-1]))) if arr.size > 2 else 0.0


@dataclass(frozen=True)
class ResidualReport:
    """Full-grid residual arrays. Entries 0 and -1 use one-sided stencils
    and are left out of ``max_abs``."""

    el_kappa: np.ndarray
    el_alpha: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    max_abs: dict = field(default_factory=dict)

    @property
    def el_max(self) -> float:
        return max(self.max_abs["el_kappa"], self.max_abs["el_alpha"])

    @property
    def pq_max(self) -> float:
        return max(self.max_abs["P"], self.max_abs["Q"])


def el_residuals(config: FieldConfig, model: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the two second-order field equations.

    Second derivatives always come from finite differences, even when the
    config carries analytic first derivatives, so the check stays blind
    to the first-order structure.
    """
    config.require_kink_candidate()
    m, A = model.m, model.A
    k, a, grid = config.kappa, config.alpha, config.grid
    _, a_p = config.derivatives()
    one = 1.0 - k * k
    k_pp = fd_second_derivative(k, grid)
    s2, c2 = np.sin(2.0 * a), np.cos(2.0 * a)
    r1 = k_pp + (k * one / A) * (a_p * a_p + m * m * s2 * s2 - m * m * (1.0 - 3.0 * k * k) * c2 * c2 / A)
    if config.has_derivatives:
        div = fd_derivative(one * one * a_p, grid)
    else:
        div = _flux_divergence(k, a, grid)
    r2 = div - m * m * one * one * (1.0 - 2.0 * k * k / A) * np.sin(4.0 * a)
    return r1, r2


def _flux_divergence(k, a, grid: Grid) -> np.ndarray:
    # ((1-k^2)^2 a')' with a compact three-point stencil: fluxes on cell
    # midpoints, so the interior stencil stays second order and local.
    w = (1.0 - k * k) ** 2
    w_mid = 0.5 * (w[:-1] + w[1:])
    flux = w_mid * np.diff(a) / grid.h
    out = np.empty_like(k)
    out[1:-1] = np.diff(flux) / grid.h
    full = fd_derivative(w * fd_derivative(a, grid), grid)
    out[0], out[-1] = full[0], full[-1]
    return out


def bps_residuals(config: FieldConfig, model: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise deviations P, Q from the two BPS equations."""
    k, a = config.kappa, config.alpha
    k_p, a_p = config.derivatives()
    rhs_k, rhs_a = bps_rhs(k, a, model)
    w = (1.0 - k * k) ** 2
    P = w * a_p - w * rhs_a
    Q = k_p - rhs_k
    return P, Q


def residual_report(config: FieldConfig, model: ModelParams) -> ResidualReport:
    el_k, el_a = el_residuals(config, model)
    P, Q = bps_residuals(config, model)
    max_abs = {
        "el_kappa": _interior_max(el_k),
        "el_alpha": _interior_max(el_a),
        "P": _interior_max(P),
        "Q": _interior_max(Q),
    }
    return ResidualReport(el_k, el_a, P, Q, max_abs)


def _rk4_step(k, a, h, model):
    m_over_a, m = model.m / model.A, model.m

    def f(k, a):
        return m_over_a * k * (1.0 - k * k) * math.cos(2.0 * a), m * math.sin(2.0 * a)

    k1, a1 = f(k, a)
    k2, a2 = f(k + 0.5 * h * k1, a + 0.5 * h * a1)
    k3, a3 = f(k + 0.5 * h * k2, a + 0.5 * h * a2)
    k4, a4 = f(k + h * k3, a + h * a3)
    return (k + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0,
            a + h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0)


def integrate_bps(model: ModelParams, kink: KinkParams, grid: Grid, *,
                  local_tol: float = 1e-6, check_every: int = 1) -> FieldConfig:
    """Classical RK4 march of the BPS system across ``grid``.

    Seeded at ``grid.x_min`` from the closed-form tail (the vacuum itself
    is a fixed point). Each checked step is compared with two half steps;
    a Richardson error estimate above ``local_tol`` raises StepSizeError.
    """
    x0 = grid.x_min
    a_seed = alpha_exact(x0, model, kink)
    if a_seed >= 0.1:
        raise ValidationError(f"x_min={x0} is not in the left tail (alpha seed {a_seed:.3g} >= 0.1)")
    k = float(kappa_exact(x0, model, kink))
    a = float(a_seed)
    h = grid.h
    n = grid.n
    kappa = np.empty(n)
    alpha = np.empty(n)
    kappa[0], alpha[0] = k, a
    for i in range(1, n):
        k_new, a_new = _rk4_step(k, a, h, model)
        if check_every and i % check_every == 0:
            k_half, a_half = _rk4_step(*_rk4_step(k, a, 0.5 * h, model), 0.5 * h, model)
            err = max(abs(k_half - k_new), abs(a_half - a_new)) / 15.0
            if err > local_tol:
                raise StepSizeError(
                    f"local error estimate {err:.3g} > {local_tol:.3g} at x={grid.x_min + i * h:.6g}; "
                    f"reduce the step (h={h:.3g})"
                )
        k, a = k_new, a_new
        if abs(k) >= 1.0:
            raise SingularityError(f"|kappa| reached 1 at x={grid.x_min + i * h:.6g}")
        kappa[i], alpha[i] = k, a
    dk, da = bps_rhs(kappa, alpha, model)
    return FieldConfig(grid, kappa, alpha, dk, da)


def pq_matrix(kappa: float, alpha: float, P: float, model: ModelParams) -> np.ndarray:
    """Symmetric matrix M with (P^2 + Q^2)' = -(P, Q) M (P, Q)^T."""
    if abs(kappa) >= 1.0:
        raise SingularityError(f"pq_matrix is singular at |kappa| = {abs(kappa)}")
    m, A = model.m, model.A
    one = 1.0 - kappa * kappa
    off = -4.0 * m * kappa * one * math.sin(2.0 * alpha) + kappa * P / (A * one ** 3)
    return np.array([
        [4.0 * m * math.cos(2.0 * alpha), off],
        [off, (2.0 * m / A) * (1.0 - 3.0 * kappa * kappa) * math.cos(2.0 * alpha)],
    ])


def _pq_eigen(k, a, P, model):
    """Vectorised eigenvalues (min, max) of pq_matrix."""
    m, A = model.m, model.A
    one = 1.0 - k * k
    c2 = np.cos(2.0 * a)
    d1 = 4.0 * m * c2
    d2 = (2.0 * m / A) * (1.0 - 3.0 * k * k) * c2
    off = -4.0 * m * k * one * np.sin(2.0 * a) + k * P / (A * one ** 3)
    mean = 0.5 * (d1 + d2)
    rad = np.hypot(0.5 * (d1 - d2), off)
    return mean - rad, mean + rad


def _pq_rhs(P, Q, k, a, model):
    m, A = model.m, model.A
    one = 1.0 - k * k
    dP = -2.0 * m * math.cos(2.0 * a) * P + 4.0 * m * k * one * math.sin(2.0 * a) * Q
    dQ = -(k * P * P + m * one ** 3 * (1.0 - 3.0 * k * k) * math.cos(2.0 * a) * Q) / (A * one ** 3)
    return dP, dQ


@dataclass(frozen=True)
class PQReport:
    x: np.ndarray
    P_traj: np.ndarray
    Q_traj: np.ndarray
    M_eigen_min: np.ndarray
    M_eigen_max: np.ndarray
    lambda1: float
    lambda2: float
    interval: tuple[float, float]
    measured_rate: float
    decay_verified: bool

    @property
    def norm_sq(self) -> np.ndarray:
        return self.P_traj ** 2 + self.Q_traj ** 2

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "interval_start": self.interval[0],
            "interval_end": self.interval[1],
            "measured_rate": self.measured_rate,
            "decay_verified": self.decay_verified,
            "P_final": float(self.P_traj[-1]),
            "Q_final": float(self.Q_traj[-1]),
        }


def decay_window(config: FieldConfig, model: ModelParams) -> np.ndarray:
    """Mask of samples with alpha < pi/8 and kappa^2 < min(1, A/2)."""
    k2 = config.kappa ** 2
    return (np.abs(config.alpha) < np.pi / 8.0) & (k2 < min(1.0, 0.5 * model.A))


def _longest_run(mask: np.ndarray) -> Optional[tuple[int, int]]:
    best, start = None, None
    for i, flag in enumerate(np.append(mask, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if best is None or i - start > best[1] - best[0] + 1:
                best = (start, i - 1)
            start = None
    return best


def pq_flow(background: FieldConfig, P0: float, Q0: float, model: ModelParams, *,
            interval: Optional[tuple[float, float]] = None) -> PQReport:
    """Integrate the (P, Q) system along a fixed background.

    RK4 on the background grid; half-step field values come from cubic
    splines of the sampled profiles. lambda1/lambda2 bound M's spectrum on
    the longest stretch of ``interval`` (default: the small-alpha window)
    where M is positive definite.
    """
    background.require_kink_candidate()
    grid = background.grid
    x = grid.x
    k_s = CubicSpline(x, background.kappa)
    a_s = CubicSpline(x, background.alpha)
    xm = x[:-1] + 0.5 * grid.h
    k_mid, a_mid = k_s(xm), a_s(xm)
    if np.any(np.abs(k_mid) >= 1.0):
        raise SingularityError("|kappa| reaches 1 along the background")
    h = grid.h
    P = np.empty(grid.n)
    Q = np.empty(grid.n)
    p, q = float(P0), float(Q0)
    P[0], Q[0] = p, q
    kb, ab = background.kappa, background.alpha
    for i in range(grid.n - 1):
        k0, a0, k1, a1 = kb[i], ab[i], kb[i + 1], ab[i + 1]
        km, am = k_mid[i], a_mid[i]
        p1, q1 = _pq_rhs(p, q, k0, a0, model)
        p2, q2 = _pq_rhs(p + 0.5 * h * p1, q + 0.5 * h * q1, km, am, model)
        p3, q3 = _pq_rhs(p + 0.5 * h * p2, q + 0.5 * h * q2, km, am, model)
        p4, q4 = _pq_rhs(p + h * p3, q + h * q3, k1, a1, model)
        p += h * (p1 + 2.0 * p2 + 2.0 * p3 + p4) / 6.0
        q += h * (q1 + 2.0 * q2 + 2.0 * q3 + q4) / 6.0
        P[i + 1], Q[i + 1] = p, q

    eig_min, eig_max = _pq_eigen(kb, ab, P, model)
    if interval is None:
        window = decay_window(background, model)
    else:
        window = (x >= interval[0]) & (x <= interval[1])
    run = _longest_run(window & (eig_min > 0.0))
    S = P * P + Q * Q
    if run is None or run[1] == run[0]:
        return PQReport(x, P, Q, eig_min, eig_max, math.nan, math.nan,
                        (math.nan, math.nan), math.nan, False)
    lo, hi = run
    lam1 = float(eig_min[lo:hi + 1].min())
    lam2 = float(eig_max[lo:hi + 1].max())
    seg = S[lo:hi + 1]
    non_increasing = bool(np.all(np.diff(seg) <= 0.0))
    if seg[0] > 0.0 and seg[-1] > 0.0:
        rate = float(-math.log(seg[-1] / seg[0]) / (x[hi] - x[lo]))
        in_envelope = lam1 <= rate <= lam2
    else:
        rate = math.nan
        in_envelope = bool(np.all(seg == 0.0))
    return PQReport(x, P, Q, eig_min, eig_max, lam1, lam2, (float(x[lo]), float(x[hi])),
                    rate, non_increasing and in_envelope)
