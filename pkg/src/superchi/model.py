"""Model parameters and the two algebraic primitives of the closed forms.

Every rate and detuning is measured in units of the single-atom radiative
rate.  Frequencies only ever enter through the detuning ``omega - Omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class ModelError(ValueError):
    """Invalid model input."""


class UnsupportedSystemSize(ModelError):
    """Atom count outside the range an operation was derived for."""


class PoleError(ZeroDivisionError):
    """A resonance function was evaluated exactly on its pole."""


class IndefiniteLimit(ArithmeticError):
    """Stationary third-order response requested at gamma_d = gamma_n = 0.

    In that corner the population dynamics has a conserved mode and the
    stationary chi3 depends on the order of limits.  Use the transient
    integrator, whose plateau is well defined, or pick a limit direction.
    """


@dataclass(frozen=True)
class DampingRates:
    gamma_r: float = 1.0
    gamma_d: float = 0.0
    gamma_n: float = 0.0

    def __post_init__(self) -> None:
        for name in ("gamma_r", "gamma_d", "gamma_n"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ModelError(f"{name} must be finite and >= 0, got {value}")
        if self.gamma_r <= 0:
            raise ModelError("gamma_r must be > 0; it sets the unit of rate")

    def swapped(self) -> DampingRates:
        """Exchange the dephasing and nonradiative rates."""
        return DampingRates(self.gamma_r, self.gamma_n, self.gamma_d)

    def scaled(self, factor: float) -> DampingRates:
        return DampingRates(
            factor * self.gamma_r, factor * self.gamma_d, factor * self.gamma_n
        )

    @property
    def nonradiative_free(self) -> bool:
        return self.gamma_d == 0 and self.gamma_n == 0


@dataclass(frozen=True)
class SystemDrive:
    n_atoms: int
    detuning: float = 0.0
    field_amplitude: complex = 1.0

    def __post_init__(self) -> None:
        if isinstance(self.n_atoms, bool) or int(self.n_atoms) != self.n_atoms:
            raise ModelError(f"n_atoms must be an integer, got {self.n_atoms!r}")
        if self.n_atoms < 1:
            raise UnsupportedSystemSize(f"n_atoms must be >= 1, got {self.n_atoms}")
        if not math.isfinite(self.detuning):
            raise ModelError(f"detuning must be finite, got {self.detuning}")
        if not (math.isfinite(complex(self.field_amplitude).real)
                and math.isfinite(complex(self.field_amplitude).imag)):
            raise ModelError("field_amplitude must be finite")

    def with_detuning(self, detuning: float) -> SystemDrive:
        return SystemDrive(self.n_atoms, detuning, self.field_amplitude)

    def with_amplitude(self, amplitude: complex) -> SystemDrive:
        return SystemDrive(self.n_atoms, self.detuning, amplitude)


class GammaTriple(NamedTuple):
    """Coefficients multiplying (gamma_r, gamma_d, gamma_n) in a width."""

    a: float
    b: float
    c: float


def gamma_combine(triple: GammaTriple | tuple[float, float, float],
                  rates: DampingRates) -> float:
    """Return ``(a*gamma_r + b*gamma_d + c*gamma_n) / 2``.

    Negative coefficients are rejected: they only appear when a triple such
    as ``2N - 4`` is evaluated for N = 1, outside the derivation domain.
    """
    a, b, c = triple
    for coef in (a, b, c):
        if not math.isfinite(coef):
            raise ModelError(f"non-finite coefficient in {tuple(triple)}")
        if coef < 0:
            raise UnsupportedSystemSize(
                f"negative width coefficient in {tuple(triple)}; "
                "the atom count is too small for this quantity"
            )
    return (a * rates.gamma_r + b * rates.gamma_d + c * rates.gamma_n) / 2


def resonance_fn(triple: GammaTriple | tuple[float, float, float],
                 rates: DampingRates, detuning: float) -> complex:
    """Return ``1 / (detuning + i*Gamma)`` for the width ``Gamma`` of ``triple``."""
    width = gamma_combine(triple, rates)
    if detuning == 0 and width == 0:
        raise PoleError(f"resonance {tuple(triple)} evaluated on its pole")
    return 1.0 / complex(detuning, width)


def inverse_resonance_fn(triple: GammaTriple | tuple[float, float, float],
                         rates: DampingRates, detuning: float) -> complex:
    return complex(detuning, gamma_combine(triple, rates))
