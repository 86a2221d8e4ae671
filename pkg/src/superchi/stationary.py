"""Closed-form stationary moments and per-atom susceptibilities.

All functions take a ``SystemDrive`` (N, detuning, E) and ``DampingRates``
and need N >= 2.  Single-atom questions go to :mod:`superchi.oracle`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hierarchy import relative_residual
from .model import (
    DampingRates,
    IndefiniteLimit,
    ModelError,
    SystemDrive,
    UnsupportedSystemSize,
    gamma_combine,
    inverse_resonance_fn,
    resonance_fn,
)


@dataclass(frozen=True)
class StationaryExpectations:
    s1: complex
    ss: complex
    sds: float
    sdsp: float
    sdss: complex
    sdssp: complex
    s3: complex

    def as_state(self) -> np.ndarray:
        """Pack in hierarchy order (s1, ss, sds, sdsp, s3, sdss, sdssp)."""
        return np.array([self.s1, self.ss, self.sds, self.sdsp,
                         self.s3, self.sdss, self.sdssp], dtype=complex)


@dataclass(frozen=True)
class SpectralPoint:
    detuning: float
    chi1: complex
    chi3: complex
    chi3_gd0: complex
    chi3_approx: complex
    enhancement: float


def _require_pair_variables(drive: SystemDrive) -> None:
    if drive.n_atoms < 2:
        raise UnsupportedSystemSize(
            "closed-form stationary moments need n_atoms >= 2; "
            "use the Lindblad oracle for a single atom"
        )


def _require_nonradiative(rates: DampingRates) -> None:
    if rates.nonradiative_free:
        raise IndefiniteLimit(
            "stationary third-order response is indefinite at "
            "gamma_d = gamma_n = 0"
        )


def first_order(drive: SystemDrive, rates: DampingRates) -> complex:
    _require_pair_variables(drive)
    n = drive.n_atoms
    return resonance_fn((n, 1, 1), rates, drive.detuning) * drive.field_amplitude


def second_order(drive: SystemDrive,
                 rates: DampingRates) -> tuple[complex, float, float]:
    """Return ``(ss, sds, sdsp)``.

    The population pair follows from a 2x2 balance between the drive feed
    and the local/collective decay channels; its determinant vanishes only
    when both gamma_d and gamma_n are zero.
    """
    _require_pair_variables(drive)
    _require_nonradiative(rates)
    n = drive.n_atoms
    gr, gd, gn = rates.gamma_r, rates.gamma_d, rates.gamma_n
    e = complex(drive.field_amplitude)
    f = resonance_fn((n, 1, 1), rates, drive.detuning)
    ss = f * resonance_fn((n - 1, 1, 1), rates, drive.detuning) * e * e
    weight = abs(f) ** 2 * abs(e) ** 2
    prefactor = (n * gr + gd + gn) / (gr * (gd + n * gn) + gn * (gd + gn))
    sds = prefactor * (gd + gn) * weight
    sdsp = prefactor * gn * weight
    return ss, sds, sdsp


def third_order_pair(drive: SystemDrive, rates: DampingRates,
                     second: tuple[complex, float, float]) -> tuple[complex, complex]:
    """Solve the 2x2 system for ``(sdss, sdssp)`` by Cramer's rule."""
    _require_pair_variables(drive)
    n = drive.n_atoms
    d = drive.detuning
    e = complex(drive.field_amplitude)
    ss, sds, sdsp = second
    m11 = inverse_resonance_fn((n + 2, 1, 3), rates, d)
    m12 = 1j * gamma_combine((2 * n - 4, 0, 0), rates)
    m21 = 1j * gamma_combine((4, 0, 0), rates)
    m22 = inverse_resonance_fn((3 * n - 6, 3, 3), rates, d)
    r1 = -e.conjugate() * ss + e * sds + e * sdsp
    r2 = -e.conjugate() * ss + 2 * e * sdsp
    det = m11 * m22 - m12 * m21
    if det == 0:
        raise ModelError("singular 2x2 system for the third-order pair")
    sdss = (r1 * m22 - m12 * r2) / det
    sdssp = (m11 * r2 - m21 * r1) / det
    return sdss, sdssp


def stationary_expectations(drive: SystemDrive,
                            rates: DampingRates) -> StationaryExpectations:
    s1 = first_order(drive, rates)
    second = second_order(drive, rates)
    sdss, sdssp = third_order_pair(drive, rates, second)
    ss, sds, sdsp = second
    n = drive.n_atoms
    e = complex(drive.field_amplitude)
    s3 = resonance_fn((n, 1, 1), rates, drive.detuning) * (
        -2 * e * sds + 1j * gamma_combine((2 * n - 2, 0, 0), rates) * sdss
    )
    return StationaryExpectations(s1, ss, sds, sdsp, sdss, sdssp, s3)


def chi1(drive: SystemDrive, rates: DampingRates) -> complex:
    return resonance_fn((drive.n_atoms, 1, 1), rates, drive.detuning)


def chi3(drive: SystemDrive, rates: DampingRates) -> complex:
    """Per-atom third-order susceptibility ``<s3> / (|E|^2 E)``.

    Evaluated at unit field: every ingredient scales as the matching power
    of E, so the ratio does not depend on the amplitude passed in.
    """
    unit = drive.with_amplitude(1.0)
    return stationary_expectations(unit, rates).s3


def chi3_limit_gd0(drive: SystemDrive, rates: DampingRates) -> complex:
    """chi3 in the gamma_d -> 0 limit (gamma_d in ``rates`` is ignored)."""
    _require_pair_variables(drive)
    n, d = drive.n_atoms, drive.detuning
    f = resonance_fn((n, 0, 1), rates, d)
    return (-2 * abs(f) ** 2 * f * resonance_fn((n - 1, 0, 1), rates, d)
            * inverse_resonance_fn((0, 0, 1), rates, d))


def enhancement_factor(n_atoms: int, rates: DampingRates) -> float:
    """``N (gamma_d + gamma_n) / (gamma_d + N gamma_n)``, between 1 and N."""
    gd, gn = rates.gamma_d, rates.gamma_n
    denom = gd + n_atoms * gn
    if denom <= 0:
        raise IndefiniteLimit("enhancement factor undefined at gamma_d = gamma_n = 0")
    return n_atoms * (gd + gn) / denom


def chi3_approx(drive: SystemDrive, rates: DampingRates) -> complex:
    return enhancement_factor(drive.n_atoms, rates) * chi3_limit_gd0(drive, rates)


def spectral_point(drive: SystemDrive, rates: DampingRates) -> SpectralPoint:
    return SpectralPoint(
        detuning=drive.detuning,
        chi1=chi1(drive, rates),
        chi3=chi3(drive, rates),
        chi3_gd0=chi3_limit_gd0(drive, rates),
        chi3_approx=chi3_approx(drive, rates),
        enhancement=enhancement_factor(drive.n_atoms, rates),
    )


def verify_stationarity(drive: SystemDrive, rates: DampingRates,
                        expectations: StationaryExpectations) -> float:
    """Max relative residual of the seven rotating-frame equations."""
    return relative_residual(expectations.as_state(), drive, rates)


def consistency_identity_gap(drive: SystemDrive, rates: DampingRates) -> float:
    """Gap in -2 + i G_{2N-2,0,0} f_{N-1,0,1} = -2 f^-1_{0,0,1} f_{N-1,0,1}.

    Measured relative to the magnitude of the left-hand terms, since both
    sides vanish together on resonance when gamma_n -> 0.

    This links the general chi3 to its gamma_d -> 0 form; a nonzero gap means
    a coefficient was mistyped somewhere.
    """
    n, d = drive.n_atoms, drive.detuning
    g = resonance_fn((n - 1, 0, 1), rates, d)
    lhs = -2 + 1j * gamma_combine((2 * n - 2, 0, 0), rates) * g
    rhs = -2 * inverse_resonance_fn((0, 0, 1), rates, d) * g
    return abs(lhs - rhs) / (2 + abs(lhs + 2))


__all__ = [
    "SpectralPoint",
    "StationaryExpectations",
    "chi1",
    "chi3",
    "chi3_approx",
    "chi3_limit_gd0",
    "consistency_identity_gap",
    "enhancement_factor",
    "first_order",
    "second_order",
    "spectral_point",
    "stationary_expectations",
    "third_order_pair",
    "verify_stationarity",
]
