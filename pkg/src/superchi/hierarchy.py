"""Rotating-frame equations of motion of the weak-field moment hierarchy.

State vector order is fixed by ``STATE_FIELDS``.  Envelopes: s1, s3, sdss,
sdssp carry exp(-i w t); ss carries exp(-2i w t); sds, sdsp carry nothing.
With those carriers removed the hierarchy is autonomous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DampingRates, SystemDrive, UnsupportedSystemSize, gamma_combine

STATE_FIELDS = ("s1", "ss", "sds", "sdsp", "s3", "sdss", "sdssp")


@dataclass(frozen=True)
class HierarchyWidths:
    """Every Gamma_{a,b,c} the hierarchy needs, for one (N, rates)."""

    coherence: float        # Gamma_{N,1,1}
    pair: float             # Gamma_{2N-2,2,2}
    population: float       # Gamma_{2,0,2}
    feed_collective: float  # Gamma_{2N-2,0,0}
    feed_local: float       # Gamma_{2,0,0}
    triple_diag: float      # Gamma_{N+2,1,3}
    triple_cross: float     # Gamma_{2N-4,0,0}
    triple_other: float     # Gamma_{3N-6,3,3}
    triple_back: float      # Gamma_{4,0,0}


def hierarchy_widths(n_atoms: int, rates: DampingRates) -> HierarchyWidths:
    if n_atoms < 2:
        raise UnsupportedSystemSize(
            f"the moment hierarchy needs n_atoms >= 2, got {n_atoms}"
        )
    n = n_atoms
    return HierarchyWidths(
        coherence=gamma_combine((n, 1, 1), rates),
        pair=gamma_combine((2 * n - 2, 2, 2), rates),
        population=gamma_combine((2, 0, 2), rates),
        feed_collective=gamma_combine((2 * n - 2, 0, 0), rates),
        feed_local=gamma_combine((2, 0, 0), rates),
        triple_diag=gamma_combine((n + 2, 1, 3), rates),
        triple_cross=gamma_combine((2 * n - 4, 0, 0), rates),
        triple_other=gamma_combine((3 * n - 6, 3, 3), rates),
        triple_back=gamma_combine((4, 0, 0), rates),
    )


def equation_terms(y: np.ndarray, drive: SystemDrive,
                   rates: DampingRates) -> list[tuple[complex, ...]]:
    """Individual right-hand-side terms of each of the seven equations.

    Summing each tuple gives the time derivative; the magnitudes give the
    scale against which a residual is judged.
    """
    w = hierarchy_widths(drive.n_atoms, rates)
    d = drive.detuning
    e = complex(drive.field_amplitude)
    ec = e.conjugate()
    s1, ss, sds, sdsp, s3, sdss, sdssp = (complex(v) for v in y)
    drive_pop = 1j * ec * s1
    drive_pop = (drive_pop, drive_pop.conjugate())
    return [
        ((1j * d - w.coherence) * s1, -1j * e),
        ((2j * d - w.pair) * ss, -2j * e * s1),
        (*drive_pop, -w.population * sds, -w.feed_collective * sdsp),
        (*drive_pop, -w.feed_local * sds, -w.pair * sdsp),
        ((1j * d - w.coherence) * s3, 2j * e * sds, w.feed_collective * sdss),
        ((1j * d - w.triple_diag) * sdss, -w.triple_cross * sdssp,
         1j * ec * ss, -1j * e * sds, -1j * e * sdsp),
        ((1j * d - w.triple_other) * sdssp, -w.triple_back * sdss,
         1j * ec * ss, -2j * e * sdsp),
    ]


def make_rhs(drive: SystemDrive, rates: DampingRates):
    """Return ``f(t, y)`` for ``scipy.integrate.solve_ivp`` (complex ``y``)."""
    w = hierarchy_widths(drive.n_atoms, rates)
    d = drive.detuning
    e = complex(drive.field_amplitude)
    ec = e.conjugate()
    lam1 = 1j * d - w.coherence
    lam2 = 2j * d - w.pair
    lam_diag = 1j * d - w.triple_diag
    lam_other = 1j * d - w.triple_other

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        s1, ss, sds, sdsp, s3, sdss, sdssp = y
        feed = 1j * ec * s1
        feed = feed + feed.conjugate()
        out = np.empty(7, dtype=complex)
        out[0] = lam1 * s1 - 1j * e
        out[1] = lam2 * ss - 2j * e * s1
        out[2] = feed - w.population * sds - w.feed_collective * sdsp
        out[3] = feed - w.feed_local * sds - w.pair * sdsp
        out[4] = lam1 * s3 + 2j * e * sds + w.feed_collective * sdss
        out[5] = (lam_diag * sdss - w.triple_cross * sdssp
                  + 1j * ec * ss - 1j * e * (sds + sdsp))
        out[6] = (lam_other * sdssp - w.triple_back * sdss
                  + 1j * ec * ss - 2j * e * sdsp)
        return out

    return rhs


def hierarchy_rhs(y: np.ndarray, drive: SystemDrive,
                  rates: DampingRates) -> np.ndarray:
    return np.array([sum(terms) for terms in equation_terms(y, drive, rates)],
                    dtype=complex)


def relative_residual(y: np.ndarray, drive: SystemDrive,
                      rates: DampingRates) -> float:
    """Largest per-equation |sum of terms| / sum of |terms|."""
    worst = 0.0
    for terms in equation_terms(y, drive, rates):
        scale = sum(abs(t) for t in terms)
        if scale == 0:
            continue
        worst = max(worst, abs(sum(terms)) / scale)
    return worst
