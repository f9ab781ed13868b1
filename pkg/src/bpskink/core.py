"""Shared types, uniform grids and finite-difference stencils."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import simpson as _simpson


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class SingularityError(ValidationError):
    """Raised when |kappa| reaches 1, where the (1 - kappa^2) factors vanish."""


@dataclass(frozen=True)
class ModelParams:
    """Constants of the energy functional: mass scale ``m``, kinetic
    coefficient ``A`` and overall tension ``r``."""

    m: float = 1.0
    A: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        for name in ("m", "A", "r"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be positive and finite, got {value!r}")

    @property
    def bound(self) -> float:
        """Topological lower bound 4*m*r on the kink energy."""
        return 4.0 * self.m * self.r


@dataclass(frozen=True)
class KinkParams:
    """Moduli of one closed-form kink.

    ``x0`` is the point where alpha = pi/4, ``q`` the kappa amplitude
    (q = 0 is the kappa == 0 kink) and ``sign`` picks the kappa branch.
    """

    x0: float = 0.0
    q: float = 1.0
    sign: int = 1

    def __post_init__(self):
        if not np.isfinite(self.x0):
            raise ValidationError(f"x0 must be finite, got {self.x0!r}")
        if not np.isfinite(self.q) or self.q < 0:
            raise ValidationError(f"q must be finite and >= 0, got {self.q!r}")
        if self.sign not in (1, -1):
            raise ValidationError(f"sign must be +1 or -1, got {self.sign!r}")

    def c(self, model: ModelParams) -> float:
        """Integration constant c in alpha = arctan(c exp(2 m x))."""
        return float(np.exp(-2.0 * model.m * self.x0))

    @classmethod
    def from_c(cls, c: float, model: ModelParams, q: float = 1.0, sign: int = 1) -> "KinkParams":
        if not c > 0:
            raise ValidationError(f"c must be positive, got {c!r}")
        return cls(x0=-float(np.log(c)) / (2.0 * model.m), q=q, sign=sign)


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValidationError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValidationError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n) != self.n or self.n < 3 or self.n % 2 == 0:
            raise ValidationError(f"n must be an odd integer >= 3, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + np.arange(self.n) * self.h

    def shifted(self, s: float) -> "Grid":
        return Grid(self.x_min + s, self.x_max + s, self.n)


def make_grid(x_min: float, x_max: float, n: int) -> Grid:
    """Uniform grid of ``n`` (odd) points spanning [x_min, x_max]."""
    return Grid(float(x_min), float(x_max), n)


@dataclass(frozen=True)
class FieldConfig:
    """Sampled (kappa, alpha) profiles, optionally with exact derivatives."""

    grid: Grid
    kappa: np.ndarray
    alpha: np.ndarray
    kappa_prime: Optional[np.ndarray] = field(default=None)
    alpha_prime: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        for name in ("kappa", "alpha", "kappa_prime", "alpha_prime"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.array(value, dtype=float)
            if arr.shape != (self.grid.n,):
                raise ValidationError(f"{name} has shape {arr.shape}, expected ({self.grid.n},)")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if (self.kappa_prime is None) != (self.alpha_prime is None):
            raise ValidationError("kappa_prime and alpha_prime must be given together")

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def has_derivatives(self) -> bool:
        return self.kappa_prime is not None

    def derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        """Analytic derivatives when stored, second-order differences otherwise."""
        if self.has_derivatives:
            return self.kappa_prime, self.alpha_prime
        return fd_derivative(self.kappa, self.grid), fd_derivative(self.alpha, self.grid)

    def without_derivatives(self) -> "FieldConfig":
        return FieldConfig(self.grid, self.kappa, self.alpha)

    def negated(self) -> "FieldConfig":
        """The (-kappa, alpha) partner configuration."""
        kp = None if self.kappa_prime is None else -self.kappa_prime
        return FieldConfig(self.grid, -self.kappa, self.alpha, kp, self.alpha_prime)

    def require_kink_candidate(self) -> None:
        if np.any(np.abs(self.kappa) >= 1.0):
            raise SingularityError("|kappa| >= 1 somewhere; kink candidates need |kappa| < 1")


def _check_length(values, grid: Grid) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise ValidationError(f"expected {grid.n} samples, got shape {values.shape}")
    return values


def fd_derivative(values, grid: Grid) -> np.ndarray:
    """First derivative: central differences inside, one-sided
    second-order stencils at both ends."""
    values = _check_length(values, grid)
    return np.gradient(values, grid.h, edge_order=2)


def fd_second_derivative(values, grid: Grid) -> np.ndarray:
    """Three-point second difference; ends use the four-point one-sided
    stencil (three-point when n == 3)."""
    f = _check_length(values, grid)
    h2 = grid.h * grid.h
    out = np.empty_like(f)
    out[1:-1] = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / h2
    if grid.n >= 4:
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
        out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h2
    else:
        out[0] = out[-1] = out[1]
    return out


def simpson(values, grid: Grid) -> float:
    """Composite Simpson rule on the (odd-n) uniform grid."""
    values = _check_length(values, grid)
    return float(_simpson(values, dx=grid.h))
