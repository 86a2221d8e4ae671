"""Brute-force master-equation oracle on the full 2^N Hilbert space.

The generator is assembled in the frame rotating at the drive frequency,
where it is time independent:

    H = -detuning * sum_j n_j + E S^dag + E^* S
    D[rho] = gamma_r D_S + gamma_d sum_j D_{n_j} + gamma_n sum_j D_{s_j}

with ``D_L rho = L rho L^dag - {L^dag L, rho}/2`` and ``n_j = s_j^dag s_j``.
The pure-dephasing double commutator equals ``D_{n_j}`` because n_j is a
projector.  Nothing here touches the closed forms of the other modules.

Vectorisation is row-major (numpy ``reshape``), so
``vec(A rho B) = kron(A, B.T) vec(rho)``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, expm_multiply, gmres, spsolve

from .model import DampingRates, ModelError, SystemDrive, UnsupportedSystemSize

logger = logging.getLogger(__name__)

MAX_ATOMS = 8
MAX_DENSE_ATOMS = 5
DEFAULT_AMPLITUDES = (0.02, 0.01, 0.005)


class OracleError(RuntimeError):
    """Numerical failure inside the oracle."""


class SymmetryViolation(OracleError):
    """Site-resolved moments of one symmetry class disagree."""


class UnstableFit(OracleError):
    """Weak-field fit changed too much when the amplitudes were halved."""

    def __init__(self, message: str, stability: float):
        super().__init__(message)
        self.stability = stability


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

_LOWER = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))  # basis (g, e)


@lru_cache(maxsize=None)
def lowering_operators(n_atoms: int) -> tuple[sp.csr_matrix, ...]:
    """Site lowering operators s_j on (C^2)^{otimes N}, site 0 leftmost."""
    ops = []
    for j in range(n_atoms):
        op = sp.identity(1, format="csr")
        for k in range(n_atoms):
            op = sp.kron(op, _LOWER if k == j else sp.identity(2), format="csr")
        ops.append(op.astype(complex))
    return tuple(ops)


def collective_lowering(n_atoms: int) -> sp.csr_matrix:
    return sum(lowering_operators(n_atoms)[1:], lowering_operators(n_atoms)[0])


def _check_size(n_atoms: int) -> None:
    if n_atoms > MAX_ATOMS:
        raise UnsupportedSystemSize(
            f"oracle supports at most {MAX_ATOMS} atoms, got {n_atoms}"
        )


def _spre(a: sp.spmatrix) -> sp.csr_matrix:
    return sp.kron(a, sp.identity(a.shape[0]), format="csr")


def _spost(a: sp.spmatrix) -> sp.csr_matrix:
    return sp.kron(sp.identity(a.shape[0]), a.T, format="csr")


def _dissipator(op: sp.spmatrix) -> sp.csr_matrix:
    opd = op.conj().T
    opdop = (opd @ op).tocsr()
    return (sp.kron(op, op.conj(), format="csr")
            - 0.5 * _spre(opdop) - 0.5 * _spost(opdop))


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------

@dataclass
class LiouvillianOperator:
    """Rotating-frame generator acting on row-major vectorised density matrices."""

    matrix: sp.csr_matrix
    n_atoms: int
    drive: SystemDrive
    rates: DampingRates

    @property
    def dim(self) -> int:
        return 2 ** self.n_atoms

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(rho).reshape(-1)).reshape(self.dim, self.dim)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def build_generator(drive: SystemDrive, rates: DampingRates) -> LiouvillianOperator:
    n = drive.n_atoms
    _check_size(n)
    lows = lowering_operators(n)
    big_s = collective_lowering(n)
    e = complex(drive.field_amplitude)
    numbers = [(s.conj().T @ s).tocsr() for s in lows]
    ham = -drive.detuning * sum(numbers[1:], numbers[0])
    ham = ham + e * big_s.conj().T + e.conjugate() * big_s
    gen = -1j * (_spre(ham) - _spost(ham))
    gen = gen + rates.gamma_r * _dissipator(big_s)
    if rates.gamma_d:
        for num in numbers:
            gen = gen + rates.gamma_d * _dissipator(num)
    if rates.gamma_n:
        for s in lows:
            gen = gen + rates.gamma_n * _dissipator(s)
    gen = sp.csr_matrix(gen)
    gen.eliminate_zeros()
    return LiouvillianOperator(gen, n, drive, rates)


# ---------------------------------------------------------------------------
# Density matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    @property
    def trace_error(self) -> float:
        return float(abs(np.trace(self.entries) - 1.0))

    @property
    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def check(self, tol: float = 1e-12, positivity_tol: float = 1e-8) -> None:
        if self.hermiticity_error > tol:
            raise OracleError(f"density matrix not Hermitian ({self.hermiticity_error:.3g})")
        if self.trace_error > tol:
            raise OracleError(f"density matrix trace off by {self.trace_error:.3g}")
        if self.min_eigenvalue < -positivity_tol:
            raise OracleError(f"negative eigenvalue {self.min_eigenvalue:.3g}")


def ground_state(n_atoms: int) -> DensityMatrix:
    rho = np.zeros((2 ** n_atoms, 2 ** n_atoms), dtype=complex)
    rho[0, 0] = 1.0
    return DensityMatrix(rho)


def excited_state(n_atoms: int) -> DensityMatrix:
    rho = np.zeros((2 ** n_atoms, 2 ** n_atoms), dtype=complex)
    rho[-1, -1] = 1.0
    return DensityMatrix(rho)


def steady_state(generator: LiouvillianOperator, residual_tol: float = 1e-11,
                 dense: bool | None = None) -> DensityMatrix:
    """Null vector of the generator with unit trace.

    Systems up to ``MAX_DENSE_ATOMS`` use a dense LU solve in which the
    equation for rho_00 is replaced by the trace condition.  Larger ones pin
    rho_00 = 1 instead (keeps the matrix sparse), solve iteratively and
    normalise afterwards.
    """
    dim = generator.dim
    if generator.rates.gamma_r <= 0:
        raise ModelError("steady state needs gamma_r > 0")
    if generator.n_atoms >= 2 and generator.rates.nonradiative_free:
        # subradiant states never decay: the null space is degenerate
        raise OracleError(
            "steady state is not unique for N >= 2 with gamma_d = gamma_n = 0; "
            "propagate from the ground state instead"
        )
    trace_row = np.zeros(dim * dim, dtype=complex)
    trace_row[:: dim + 1] = 1.0
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    if dense is None:
        dense = generator.n_atoms <= MAX_DENSE_ATOMS
    if dense:
        mat = generator.dense()
        mat[0, :] = trace_row
        vec = la.solve(mat, rhs)
    else:
        vec = _sparse_null_vector(generator)
    rho = vec.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    residual = float(np.max(np.abs(generator.matrix @ rho.reshape(-1))))
    if residual > residual_tol:
        raise OracleError(f"steady-state residual {residual:.3g} above {residual_tol:.3g}")
    out = DensityMatrix(rho)
    out.check()
    return out


def _sparse_null_vector(generator: LiouvillianOperator, rtol: float = 1e-14,
                        maxiter: int = 20) -> np.ndarray:
    """Pin rho_00 = 1 and solve; Jacobi-GMRES first, sparse LU if it stalls.

    Weak drives converge in a few dozen Krylov steps; strong drives can
    stall, and the direct factorisation (costly, but exact) takes over.
    """
    dim = generator.dim
    mat = generator.matrix.tolil()
    mat[0, :] = 0
    mat[0, 0] = 1.0
    mat = mat.tocsr()
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    diag = mat.diagonal()
    precond = LinearOperator(mat.shape, lambda v: v / diag, dtype=complex)
    vec, info = gmres(mat, rhs, M=precond, rtol=rtol, atol=0.0,
                      restart=200, maxiter=maxiter)
    if info != 0:
        logger.info("GMRES stalled (info=%d) for N=%d; using sparse LU",
                    info, generator.n_atoms)
        vec = spsolve(mat.tocsc(), rhs)
    return vec


@dataclass
class Propagation:
    times: np.ndarray
    states: np.ndarray  # (n_times, dim, dim)
    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = 0.0

    def density(self, k: int) -> DensityMatrix:
        return DensityMatrix(self.states[k])


def propagate(generator: LiouvillianOperator, rho0: DensityMatrix,
              times: Sequence[float]) -> Propagation:
    """Exact propagation ``rho(t) = exp(L t) rho0`` sampled at ``times``.

    Each interval is advanced with ``expm_multiply``; sanity diagnostics are
    recorded for every sample.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ModelError("times must be nonnegative and strictly increasing")
    dim = generator.dim
    vec = rho0.entries.reshape(-1).astype(complex)
    states = np.empty((times.size, dim, dim), dtype=complex)
    t_prev = 0.0
    mat = generator.matrix.tocsc()
    for k, t in enumerate(times):
        if t > t_prev:
            vec = expm_multiply(mat * (t - t_prev), vec)
        states[k] = vec.reshape(dim, dim)
        t_prev = t
    result = Propagation(times, states)
    diag = [DensityMatrix(r) for r in states]
    result.max_trace_error = max(d.trace_error for d in diag)
    result.max_hermiticity_error = max(d.hermiticity_error for d in diag)
    result.min_eigenvalue = min(d.min_eigenvalue for d in diag)
    return result


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollectiveMoments:
    """Site-symmetric moment classes; pair/triple classes are None when N is too small."""

    s: complex
    sds: float
    ss: complex | None = None
    sdsp: complex | None = None
    sdss: complex | None = None
    sdssp: complex | None = None
    polarization: complex = 0.0  # Tr(rho S) / N
    max_class_spread: float = 0.0


def _expect(rho: np.ndarray, op: sp.spmatrix) -> complex:
    # Tr(rho A) = sum_ij rho_ji A_ij
    coo = op.tocoo()
    return complex(np.sum(rho[coo.col, coo.row] * coo.data))


def _class_value(values: list[complex], name: str, tol: float) -> tuple[complex, float]:
    arr = np.asarray(values, dtype=complex)
    mean = complex(arr.mean())
    spread = float(np.max(np.abs(arr - mean)))
    if spread > tol * max(1.0, abs(mean)):
        raise SymmetryViolation(f"site class {name} spread {spread:.3g}")
    return mean, spread


def expectations(rho: DensityMatrix, n_atoms: int | None = None,
                 tol: float = 1e-10) -> CollectiveMoments:
    dim = rho.dim
    if n_atoms is None:
        n_atoms = int(round(np.log2(dim)))
    if 2 ** n_atoms != dim:
        raise ModelError(f"dimension {dim} is not 2^{n_atoms}")
    r = rho.entries
    lows = lowering_operators(n_atoms)
    raises = [s.conj().T.tocsr() for s in lows]
    sites = range(n_atoms)
    spread = 0.0

    s, d = _class_value([_expect(r, lows[i]) for i in sites], "s", tol)
    spread = max(spread, d)
    sds, d = _class_value([_expect(r, raises[i] @ lows[i]) for i in sites], "sds", tol)
    spread = max(spread, d)
    out = {"s": s, "sds": sds.real}
    if n_atoms >= 2:
        pairs = list(itertools.permutations(sites, 2))
        out["ss"], d = _class_value([_expect(r, lows[i] @ lows[j]) for i, j in pairs], "ss", tol)
        spread = max(spread, d)
        out["sdsp"], d = _class_value(
            [_expect(r, raises[i] @ lows[j]) for i, j in pairs], "sdsp", tol)
        spread = max(spread, d)
        # s_i^dag s_i s_k and s_k^dag s_j s_k (i = j or i = k, j != k)
        vals = [_expect(r, raises[i] @ lows[i] @ lows[k]) for i, k in pairs]
        vals += [_expect(r, raises[k] @ lows[j] @ lows[k]) for j, k in pairs]
        out["sdss"], d = _class_value(vals, "sdss", tol)
        spread = max(spread, d)
    if n_atoms >= 3:
        triples = list(itertools.permutations(sites, 3))
        out["sdssp"], d = _class_value(
            [_expect(r, raises[i] @ lows[j] @ lows[k]) for i, j, k in triples],
            "sdssp", tol)
        spread = max(spread, d)
    pol = _expect(r, collective_lowering(n_atoms)) / n_atoms
    return CollectiveMoments(polarization=pol, max_class_spread=spread, **out)


# ---------------------------------------------------------------------------
# Weak-field extraction
# ---------------------------------------------------------------------------

@dataclass
class ExtractionReport:
    chi1: complex
    chi3: complex
    amplitudes: list[float]
    fit_residual: float
    stability: float
    polarizations: list[complex] = field(default_factory=list)


def steady_polarization(drive: SystemDrive, rates: DampingRates) -> complex:
    """Per-atom steady-state polarisation Tr(rho S) / N."""
    gen = build_generator(drive, rates)
    rho = steady_state(gen)
    return _expect(rho.entries, collective_lowering(drive.n_atoms)) / drive.n_atoms


def _fit_odd_series(amplitudes: Sequence[complex], values: Sequence[complex],
                    order: int = 5) -> tuple[complex, complex, float]:
    """Least-squares fit of <s>/E as a polynomial in |E|^2 up to E^order.

    Returns (chi1, chi3, max residual relative to the chi3 term).
    """
    amps = np.asarray(amplitudes, dtype=complex)
    y = np.asarray(values, dtype=complex) / amps
    x = np.abs(amps) ** 2
    n_coef = (order + 1) // 2
    if n_coef < 2 or len(amps) < n_coef:
        raise ModelError(f"cannot fit order {order} with {len(amps)} amplitudes")
    design = np.vander(x, n_coef, increasing=True).astype(complex)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = design @ coef - y
    scale = np.max(np.abs(coef[1] * x)) if coef[1] != 0 else 1.0
    return complex(coef[0]), complex(coef[1]), float(np.max(np.abs(resid)) / scale)


def extract_susceptibilities(
    drive: SystemDrive,
    rates: DampingRates,
    amplitudes: Sequence[float] = DEFAULT_AMPLITUDES,
    tolerance: float = 1e-4,
    phase: float = 0.0,
    order: int = 5,
) -> ExtractionReport:
    """Weak-field chi1/chi3 from steady states at several drive amplitudes.

    ``drive.field_amplitude`` is ignored; the field is ``a * exp(i phase)``
    for each ``a`` in ``amplitudes``.  ``order`` is the highest odd power
    kept in the series; the default 5 absorbs the leading contamination of
    chi3 so the default amplitudes stay well above solver noise.  The fit is repeated on the halved
    amplitude set and the relative shift of chi3 is reported as
    ``stability``; a shift above ``10 * tolerance`` raises ``UnstableFit``.
    """
    if len(amplitudes) < 2:
        raise ModelError("need at least two amplitudes")
    if any(a <= 0 for a in amplitudes):
        raise ModelError("amplitudes must be positive")
    rot = np.exp(1j * phase)

    def run(amps):
        fields = [a * rot for a in amps]
        pols = [steady_polarization(drive.with_amplitude(e), rates) for e in fields]
        return fields, pols

    fields, pols = run(amplitudes)
    c1, c3, resid = _fit_odd_series(fields, pols, order)
    fields_h, pols_h = run([a / 2 for a in amplitudes])
    _, c3_h, _ = _fit_odd_series(fields_h, pols_h, order)
    stability = abs(c3_h - c3) / abs(c3) if c3 != 0 else abs(c3_h)
    logger.debug("extraction N=%d det=%g: chi3=%s stability=%.3g",
                 drive.n_atoms, drive.detuning, c3, stability)
    if stability > 10 * tolerance:
        raise UnstableFit(
            f"chi3 shifted by {stability:.3g} (relative) on halving amplitudes",
            stability)
    return ExtractionReport(c1, c3, list(amplitudes), resid, stability, pols)
