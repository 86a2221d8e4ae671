"""Switch-on dynamics of the perturbative moment hierarchy.

The drive ``E exp(-i w t)`` is turned on at t = 0 with all moments zero.
The transient susceptibility is the envelope ratio
``chi3(t) = s3(t) / (|E|^2 E)`` in the rotating frame, which tends to the
stationary chi3 at long times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.integrate import solve_ivp

from .hierarchy import STATE_FIELDS, hierarchy_widths, make_rhs
from .model import DampingRates, ModelError, SystemDrive, UnsupportedSystemSize


# The stepper controls local error; accumulated over the thousands of steps
# a two-stage run to t ~ 1e4 takes, the global error is a few times larger.  Running
# the stepper this much tighter makes ``rtol`` an honest bound on each
# reported sample.  Step count is stability-limited at these tolerances, so
# the cost is negligible.
LOCAL_TOLERANCE_FACTOR = 0.01


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (at t = {time:.6g})")
        self.time = time


@dataclass(frozen=True)
class PerturbativeState:
    s1: complex = 0j
    ss: complex = 0j
    sds: complex = 0j
    sdsp: complex = 0j
    s3: complex = 0j
    sdss: complex = 0j
    sdssp: complex = 0j

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in STATE_FIELDS], dtype=complex)

    @classmethod
    def from_array(cls, y: np.ndarray) -> PerturbativeState:
        return cls(*(complex(v) for v in y))


assert tuple(f.name for f in fields(PerturbativeState)) == STATE_FIELDS


@dataclass
class Trajectory:
    times: np.ndarray
    chi1_t: np.ndarray
    chi3_t: np.ndarray
    states: np.ndarray  # (n_times, 7) in STATE_FIELDS order

    def column(self, name: str) -> np.ndarray:
        return self.states[:, STATE_FIELDS.index(name)]


@dataclass(frozen=True)
class RelaxationTimes:
    tau1: float
    tau2: float

    @property
    def tau2_finite(self) -> bool:
        return math.isfinite(self.tau2)


def rotating_frame_rhs(state: PerturbativeState, drive: SystemDrive,
                       rates: DampingRates) -> PerturbativeState:
    """Time derivative of the hierarchy with the optical carriers removed."""
    rhs = make_rhs(drive, rates)
    return PerturbativeState.from_array(rhs(0.0, state.to_array()))


def relaxation_times(drive: SystemDrive, rates: DampingRates) -> RelaxationTimes:
    """The two headline timescales: ``1/(N gamma_r)`` and ``1/(2 gamma_d/N + 2 gamma_n)``.

    The second is the conventional quote for the slow size-enhancement
    stage.  It is a factor ~2 shorter than the actual e-folding time of the
    slow population mode; see :func:`population_decay_rates`.
    """
    n = drive.n_atoms
    tau1 = 1.0 / (n * rates.gamma_r)
    slow = 2 * rates.gamma_d / n + 2 * rates.gamma_n
    tau2 = 1.0 / slow if slow > 0 else math.inf
    return RelaxationTimes(tau1, tau2)


def population_decay_rates(drive: SystemDrive, rates: DampingRates) -> tuple[float, float]:
    """Exact (slow, fast) eigen-rates of the (sds, sdsp) relaxation block.

    For gamma_d, gamma_n << gamma_r these are ~(gamma_d/N + gamma_n) and
    ~N gamma_r.
    """
    w = hierarchy_widths(drive.n_atoms, rates)
    block = np.array([[w.population, w.feed_collective],
                      [w.feed_local, w.pair]])
    tr = float(np.trace(block))
    det = float(np.linalg.det(block))
    disc = math.sqrt(max(tr * tr - 4 * det, 0.0))
    fast = 0.5 * (tr + disc)
    slow = det / fast  # avoids cancellation in (tr - disc)/2
    return slow, fast


def settling_time(drive: SystemDrive, rates: DampingRates, e_folds: float = 20.0) -> float:
    """Time after which every mode of the hierarchy has decayed by ``e_folds``."""
    w = hierarchy_widths(drive.n_atoms, rates)
    slow, _ = population_decay_rates(drive, rates)
    # order-by-order triangular: the decay rates are those of the diagonal blocks
    triple = np.linalg.eigvals(np.array([[w.triple_diag, w.triple_cross],
                                         [w.triple_back, w.triple_other]]))
    candidates = [w.coherence, w.pair, slow, *np.real(triple)]
    decaying = [r for r in candidates if r > 0]
    if not decaying:
        raise ModelError("no decaying mode")
    return e_folds / min(decaying)


def time_grid(t_end: float, count: int = 400, spacing: str = "log",
              t_min: float | None = None) -> np.ndarray:
    """Sample times starting at 0.

    ``log`` spacing puts 0 first and then ``count - 1`` geometrically spaced
    points from ``t_min`` (default ``t_end * 1e-5``) to ``t_end``.
    """
    if not t_end > 0:
        raise ModelError(f"t_end must be > 0, got {t_end}")
    if count < 2:
        raise ModelError(f"need at least 2 samples, got {count}")
    if spacing == "linear":
        return np.linspace(0.0, t_end, count)
    if spacing != "log":
        raise ModelError(f"unknown spacing {spacing!r}")
    if t_min is None:
        t_min = t_end * 1e-5
    if not 0 < t_min < t_end:
        raise ModelError("log grid needs 0 < t_min < t_end")
    return np.concatenate([[0.0], np.geomspace(t_min, t_end, count - 1)])


def integrate(drive: SystemDrive, rates: DampingRates, t_end: float,
              times: np.ndarray | None = None, *, count: int = 400,
              spacing: str = "log", t_min: float | None = None,
              rtol: float = 1e-10, atol: float = 1e-14,
              method: str = "DOP853") -> Trajectory:
    """Integrate from the all-zero state at t = 0 to ``t_end``.

    Either pass explicit sample ``times`` (starting at 0, ending at
    ``t_end``) or let :func:`time_grid` build them.  ``rtol``/``atol`` are
    accuracy targets for the reported samples; see
    ``LOCAL_TOLERANCE_FACTOR``.
    """
    if drive.n_atoms < 2:
        raise UnsupportedSystemSize("transient hierarchy needs n_atoms >= 2")
    e = complex(drive.field_amplitude)
    if e == 0:
        raise ModelError("field amplitude must be nonzero to define chi(t)")
    if not t_end > 0:
        raise ModelError(f"t_end must be > 0, got {t_end}")
    if times is None:
        times = time_grid(t_end, count, spacing, t_min)
    times = np.asarray(times, dtype=float)
    if times[0] != 0 or np.any(np.diff(times) <= 0) or not math.isclose(times[-1], t_end):
        raise ModelError("times must start at 0, increase strictly and end at t_end")

    sol = solve_ivp(make_rhs(drive, rates), (0.0, float(times[-1])),
                    np.zeros(7, dtype=complex), method=method, t_eval=times,
                    rtol=rtol * LOCAL_TOLERANCE_FACTOR,
                    atol=atol * LOCAL_TOLERANCE_FACTOR)
    if sol.status != 0:
        failed_at = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(sol.message, failed_at)
    states = sol.y.T
    chi1_t = states[:, 0] / e
    chi3_t = states[:, 4] / (abs(e) ** 2 * e)
    return Trajectory(sol.t, chi1_t, chi3_t, states)


def half_rise_time(trajectory: Trajectory, plateau: float, final: float,
                   after: float = 0.0) -> float:
    """First time after ``after`` at which |chi3(t)| crosses the midpoint
    between ``plateau`` and ``final``, linearly interpolated in log t.
    """
    target = 0.5 * (plateau + final)
    t = trajectory.times
    mag = np.abs(trajectory.chi3_t)
    rising = np.sign(final - plateau)
    idx = np.nonzero((t > after) & (rising * (mag - target) >= 0))[0]
    if idx.size == 0:
        raise ModelError("trajectory never reaches the half-rise level")
    k = int(idx[0])
    if k == 0 or t[k - 1] <= 0:
        return float(t[k])
    t0, t1 = math.log(t[k - 1]), math.log(t[k])
    m0, m1 = mag[k - 1], mag[k]
    return float(math.exp(t0 + (target - m0) * (t1 - t0) / (m1 - m0)))
