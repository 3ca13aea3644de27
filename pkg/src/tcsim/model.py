"""Four-level driven-dissipative mean-field model.

State and parameter types, the nonlinear mean-field Hamiltonian, the
Lindblad dissipator, and the equation-of-motion right-hand side.

Conventions
-----------
* Basis order is |1>, |2> (ground doublet), |3>, |4> (excited doublet),
  mapped to array indices 0..3.
* User-facing frequencies (detunings, drive amplitude, interaction shift)
  are plain numbers in Hz.  ``SystemParams.unit_convention`` selects how
  they enter the internal angular-frequency Hamiltonian (rad/s):

  - ``"ordinary"``: multiplied by 2*pi (value is an ordinary frequency).
  - ``"angular"``:  used verbatim (value is already an angular frequency).

  The bundled reference configurations use ``"angular"``; that is the
  reading under which the reference oscillation lands at ~46.4 kHz.
* Decay, relaxation, and dephasing rates are always plain rates in 1/s;
  no 2*pi is ever applied to them.
* Density matrices are plain 4x4 complex ``numpy`` arrays; vectorization
  is row-major, ``vec(rho)[4*i + j] == rho[i, j]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidParams, InvalidState

TWO_PI = 2.0 * np.pi
DIM = 4

ORDINARY = "ordinary"
ANGULAR = "angular"

# (level_from, level_to) pairs driven with amplitude omega*t1 and omega*t2.
T1_COUPLINGS = ((0, 2), (1, 3))
T2_COUPLINGS = ((0, 3), (1, 2))

# Upper-triangle pair order used for the Hermitian (real) decomposition.
PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


# ---------------------------------------------------------------------------
# density matrices
# ---------------------------------------------------------------------------

def sigma(j: int, k: int) -> np.ndarray:
    """Matrix unit |j><k| (0-based level indices)."""
    m = np.zeros((DIM, DIM), dtype=complex)
    m[j, k] = 1.0
    return m


def basis_state(level: int) -> np.ndarray:
    """Pure state |level><level|, 0-based."""
    return sigma(level, level)


def equal_mixed() -> np.ndarray:
    """Equally populated mixed state, rho_nn = 1/4."""
    return np.eye(DIM, dtype=complex) / DIM


def ground_doublet_mixed() -> np.ndarray:
    """Thermalized ground doublet, rho_11 = rho_22 = 1/2."""
    return np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)


def validate_density_matrix(rho: np.ndarray, herm_tol: float = 1e-12,
                            trace_tol: float = 1e-10,
                            psd_tol: float = 1e-9) -> None:
    """Raise InvalidState unless rho is a valid physical state.

    Checks Hermiticity, unit trace, positive semidefiniteness (to
    numerical slack), and that the diagonal is real in [0, 1].
    """
    rho = np.asarray(rho)
    if rho.shape != (DIM, DIM):
        raise InvalidState(f"expected {DIM}x{DIM} matrix, got {rho.shape}")
    if not np.all(np.isfinite(rho.view(float))):
        raise InvalidState("non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise InvalidState("not Hermitian within tolerance")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise InvalidState(f"trace {np.trace(rho)} not 1 within tolerance")
    diag = np.diag(rho)
    if np.max(np.abs(diag.imag)) > herm_tol:
        raise InvalidState("diagonal not real")
    if np.min(diag.real) < -psd_tol or np.max(diag.real) > 1.0 + psd_tol:
        raise InvalidState("diagonal outside [0, 1]")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -psd_tol:
        raise InvalidState(f"smallest eigenvalue {evals.min()} < -{psd_tol}")


def random_density_matrix(rng: np.random.Generator) -> np.ndarray:
    """Random full-rank valid state (Wishart construction)."""
    a = rng.normal(size=(DIM, DIM)) + 1j * rng.normal(size=(DIM, DIM))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    return rho


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemParams:
    """Detunings, drive, coupling coefficients, and mean-field strength.

    All frequencies in Hz; interpretation per ``unit_convention``.
    """

    delta2: float
    delta3: float
    delta4: float
    omega: float
    t1: float
    t2: float
    delta_s: float
    unit_convention: str = ORDINARY

    def __post_init__(self):
        values = (self.delta2, self.delta3, self.delta4, self.omega,
                  self.t1, self.t2, self.delta_s)
        if not all(np.isfinite(v) for v in values):
            raise InvalidParams("non-finite system parameter")
        if self.omega < 0:
            raise InvalidParams("omega must be >= 0")
        if self.t1 <= 0:
            raise InvalidParams("t1 must be > 0")
        if self.t2 < 0:
            raise InvalidParams("t2 must be >= 0")
        if self.unit_convention not in (ORDINARY, ANGULAR):
            raise InvalidParams(
                f"unit_convention must be '{ORDINARY}' or '{ANGULAR}'")

    @property
    def angular_scale(self) -> float:
        """Factor converting user frequencies to rad/s."""
        return TWO_PI if self.unit_convention == ORDINARY else 1.0

    def max_hamiltonian_scale(self) -> float:
        """Upper bound on |H| elements (rad/s), worst-case mean field."""
        s = self.angular_scale
        return s * max(abs(self.delta2),
                       abs(self.delta3) + abs(self.delta_s),
                       abs(self.delta4) + abs(self.delta_s),
                       self.omega * self.t1, self.omega * self.t2)


@dataclass(frozen=True)
class LossModel:
    """Lindblad rates (1/s) and thermal occupations for the nine channels.

    gamma12, gamma34        spin relaxation |2>->|1>, |4>->|3>
    gamma31, gamma32        optical decay |3>->|1>, |3>->|2>
    gamma41, gamma42        optical decay |4>->|1>, |4>->|2>
    gamma22, gamma33, gamma44   pure dephasing (projector operators)

    Each n_* is the thermal photon number weighting the reverse process
    of the corresponding channel (default 0: net effective rates).
    """

    gamma12: float = 0.0
    gamma34: float = 0.0
    gamma31: float = 0.0
    gamma32: float = 0.0
    gamma41: float = 0.0
    gamma42: float = 0.0
    gamma22: float = 0.0
    gamma33: float = 0.0
    gamma44: float = 0.0
    n12: float = 0.0
    n34: float = 0.0
    n31: float = 0.0
    n32: float = 0.0
    n41: float = 0.0
    n42: float = 0.0
    n22: float = 0.0
    n33: float = 0.0
    n44: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidParams(f"{name} must be finite and >= 0")

    @classmethod
    def from_lifetimes(cls, optical_lifetime: float, spin_t1: float,
                       dephasing: float, t1: float = 1.0, t2: float = 1.0,
                       branching: str = "coupling") -> "LossModel":
        """Build rates from an optical lifetime, a spin T1, and a dephasing rate.

        The total decay 1/optical_lifetime of each excited level is split
        between its two channels.  ``branching="coupling"`` weights them by
        the squared drive coefficients (t1^2 : t2^2 following each level's
        couplings); ``"equal"`` splits evenly.
        """
        if optical_lifetime <= 0 or spin_t1 <= 0:
            raise InvalidParams("lifetimes must be > 0")
        total = 1.0 / optical_lifetime
        if branching == "coupling":
            w1 = t1 ** 2 / (t1 ** 2 + t2 ** 2)
            w2 = t2 ** 2 / (t1 ** 2 + t2 ** 2)
        elif branching == "equal":
            w1 = w2 = 0.5
        else:
            raise InvalidParams(f"unknown branching '{branching}'")
        # |3> couples to |1> with t1 and to |2> with t2; |4> the reverse.
        return cls(gamma12=1.0 / spin_t1, gamma34=1.0 / spin_t1,
                   gamma31=total * w1, gamma32=total * w2,
                   gamma41=total * w2, gamma42=total * w1,
                   gamma22=dephasing, gamma33=dephasing, gamma44=dephasing)

    def channels(self) -> Iterable[tuple[np.ndarray, float, float]]:
        """Yield (collapse operator, rate, thermal n) for all nine channels."""
        yield sigma(0, 1), self.gamma12, self.n12
        yield sigma(2, 3), self.gamma34, self.n34
        yield sigma(0, 2), self.gamma31, self.n31
        yield sigma(1, 2), self.gamma32, self.n32
        yield sigma(0, 3), self.gamma41, self.n41
        yield sigma(1, 3), self.gamma42, self.n42
        yield sigma(1, 1), self.gamma22, self.n22
        yield sigma(2, 2), self.gamma33, self.n33
        yield sigma(3, 3), self.gamma44, self.n44


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

def mean_field_shift(rho: np.ndarray, delta_s: float) -> float:
    """Excitation-dependent shift delta_s * (rho44 + rho33 - rho22 - rho11).

    Returned in the same units as ``delta_s``; applied to the diagonal
    entries of levels |3> and |4>.
    """
    return delta_s * float(
        (rho[3, 3] + rho[2, 2] - rho[1, 1] - rho[0, 0]).real)


def drive_matrix(params: SystemParams, drive_phase: float = 0.0) -> np.ndarray:
    """Drive coupling block: (1,3)=(2,4)=omega*t1, (1,4)=(2,3)=omega*t2.

    ``drive_phase`` multiplies the upper-triangle couplings by
    exp(i*phase) (Hermitian-conjugated below), in rad/s.
    """
    s = params.angular_scale
    ph = np.exp(1j * drive_phase)
    h = np.zeros((DIM, DIM), dtype=complex)
    for (i, j) in T1_COUPLINGS:
        h[i, j] = s * params.omega * params.t1 * ph
        h[j, i] = np.conj(h[i, j])
    for (i, j) in T2_COUPLINGS:
        h[i, j] = s * params.omega * params.t2 * ph
        h[j, i] = np.conj(h[i, j])
    return h


def build_hamiltonian(params: SystemParams, rho: np.ndarray,
                      drive_phase: float = 0.0) -> np.ndarray:
    """Mean-field Hamiltonian H0 + Hr + Hm in rad/s.

    H0 = diag(0, delta2, delta3, delta4); Hr the drive couplings; Hm adds
    the mean-field shift evaluated at ``rho`` to entries (3,3) and (4,4).
    Energy is referenced to level |1>, so H[0, 0] == 0.
    """
    s = params.angular_scale
    h = drive_matrix(params, drive_phase)
    h[1, 1] = s * params.delta2
    h[2, 2] = s * params.delta3
    h[3, 3] = s * params.delta4
    shift = mean_field_shift(rho, s * params.delta_s)
    h[2, 2] += shift
    h[3, 3] += shift
    return h


# ---------------------------------------------------------------------------
# dissipator and right-hand side
# ---------------------------------------------------------------------------

def _lindblad_term(a: np.ndarray, rho: np.ndarray) -> np.ndarray:
    ad = a.conj().T
    ada = ad @ a
    return a @ rho @ ad - 0.5 * (ada @ rho + rho @ ada)


def dissipator(rho: np.ndarray, loss: LossModel) -> np.ndarray:
    """Sum of the nine Lindblad channels; traceless and Hermitian.

    Each channel contributes rate*(n+1) times the forward collapse plus
    rate*n times the reverse (thermal) collapse.
    """
    out = np.zeros((DIM, DIM), dtype=complex)
    for a, rate, n in loss.channels():
        if rate == 0.0:
            continue
        out += rate * (n + 1.0) * _lindblad_term(a, rho)
        if n > 0.0:
            out += rate * n * _lindblad_term(a.conj().T, rho)
    return out


def rhs(rho: np.ndarray, params: SystemParams, loss: LossModel,
        drive_phase: float = 0.0) -> np.ndarray:
    """Equation-of-motion right-hand side -i[H(rho), rho] + dissipator(rho)."""
    h = build_hamiltonian(params, rho, drive_phase)
    return -1j * (h @ rho - rho @ h) + dissipator(rho, loss)


# ---------------------------------------------------------------------------
# superoperators (row-major vectorization)
# ---------------------------------------------------------------------------

_I4 = np.eye(DIM, dtype=complex)


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Row-major flatten: vec(rho)[4*i + j] = rho[i, j]."""
    return np.asarray(rho, dtype=complex).reshape(DIM * DIM)


def unvectorize(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(DIM, DIM)


def left_right_superop(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> x @ rho @ y under row-major vec."""
    return np.kron(x, y.T)


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> -i (h rho - rho h)."""
    return -1j * (left_right_superop(h, _I4) - left_right_superop(_I4, h))


def dissipator_superop(loss: LossModel) -> np.ndarray:
    """16x16 matrix form of the dissipator."""
    m = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
    for a, rate, n in loss.channels():
        if rate == 0.0:
            continue
        for op, r in ((a, rate * (n + 1.0)), (a.conj().T, rate * n)):
            if r == 0.0:
                continue
            opd = op.conj().T
            opdo = opd @ op
            m += r * (left_right_superop(op, opd)
                      - 0.5 * (left_right_superop(opdo, _I4)
                               + left_right_superop(_I4, opdo)))
    return m


# Superoperator of rho -> -i [P34, rho] with P34 = diag(0,0,1,1); the
# mean-field contribution is delta_s_angular * s(rho) times this matrix.
MEAN_FIELD_SUPEROP = commutator_superop(np.diag([0, 0, 1.0, 1.0]).astype(complex))


def liouvillian_matrix(params: SystemParams, loss: LossModel,
                       rho_frozen: np.ndarray,
                       drive_phase: float = 0.0) -> np.ndarray:
    """16x16 generator M with the mean-field shift frozen at ``rho_frozen``.

    vec(rhs(rho)) == M @ vec(rho) for all rho while the shift is held at
    its rho_frozen value; exact equality (not just linearization) because
    the mean field is the only nonlinearity.
    """
    h = build_hamiltonian(params, rho_frozen, drive_phase)
    return commutator_superop(h) + dissipator_superop(loss)


# ---------------------------------------------------------------------------
# Hermitian (real) decomposition used by the fast integrator
# ---------------------------------------------------------------------------

def hermitian_basis() -> np.ndarray:
    """Columns are vec() of the 16 Hermitian basis matrices.

    Order: the four projectors |k><k|, then (E_ij + E_ji) over PAIRS,
    then i(E_ij - E_ji) over PAIRS.  For Hermitian rho the coordinates
    are (populations, Re rho_ij, Im rho_ij), all real.
    """
    cols = [sigma(k, k) for k in range(DIM)]
    cols += [sigma(i, j) + sigma(j, i) for (i, j) in PAIRS]
    cols += [1j * (sigma(i, j) - sigma(j, i)) for (i, j) in PAIRS]
    return np.column_stack([vectorize(m) for m in cols])


_B = hermitian_basis()
_B_INV = np.linalg.inv(_B)


def to_real_coords(rho: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in the hermitian_basis()."""
    x = _B_INV @ vectorize(rho)
    return np.ascontiguousarray(x.real)


def from_real_coords(x: np.ndarray) -> np.ndarray:
    """Inverse of to_real_coords."""
    return unvectorize(_B @ np.asarray(x, dtype=complex))


def superop_to_real(m: np.ndarray) -> np.ndarray:
    """Transform a Hermiticity-preserving superoperator to the real basis.

    Raises if the transformed matrix has a non-negligible imaginary part,
    which would indicate the superoperator does not preserve Hermiticity.
    """
    mr = _B_INV @ m @ _B
    scale = max(1.0, np.max(np.abs(mr.real)))
    if np.max(np.abs(mr.imag)) > 1e-10 * scale:
        raise InvalidParams("superoperator does not preserve Hermiticity")
    return np.ascontiguousarray(mr.real)
