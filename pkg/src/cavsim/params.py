"""Physical parameters and the canonical moment state vector.

All rates and detunings are dimensionless, expressed in units of the cavity
decay rate kappa.  kappa itself is stored explicitly (normally 1.0) so that
inputs quoted in physical units can be rescaled at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolation, DomainError, ParameterError

__all__ = [
    "SystemParams",
    "MomentState",
    "MOMENT_NAMES",
    "STATE_DIM",
    "FLAG_HERMITICITY",
    "FLAG_POPULATION",
    "FLAG_PHOTON",
]

#: Canonical ordering of the twelve stored moments.  The real-valued packing
#: used by the integrator interleaves (Re, Im) pairs in exactly this order;
#: both orderings are part of the public contract.
MOMENT_NAMES = (
    "m_a",     # <a>
    "m_s",     # <sigma_1>
    "m_aa",    # <a^2>
    "m_ada",   # <a^dag a>
    "m_sds",   # <sigma_1^dag sigma_1>
    "m_ss",    # <sigma_1 sigma_2>
    "m_sds2",  # <sigma_1^dag sigma_2>
    "m_zz",    # <sigma_1z sigma_2z>
    "m_sz",    # <sigma_1 sigma_2z>
    "m_as",    # <a sigma_1>
    "m_ads",   # <a^dag sigma_1>
    "m_az",    # <a sigma_1z>
)

#: Real dimension of the packed state vector (12 complex moments).
STATE_DIM = 2 * len(MOMENT_NAMES)

# Physicality-flag bits, reported per trace sample.
FLAG_HERMITICITY = 1  # canonically real moment has imaginary part beyond tol
FLAG_POPULATION = 2   # Re<sigma^dag sigma> outside [0, 1] beyond tol
FLAG_PHOTON = 4       # Re<a^dag a> below 0 beyond tol


@dataclass(frozen=True)
class SystemParams:
    """Rates and detunings defining one simulation, in units of kappa.

    n_emitters   ensemble size N
    g1           single-emitter coupling rate
    kappa        cavity (field) decay rate, the unit of time
    gamma1       longitudinal relaxation rate
    gamma2_star  pure-dephasing rate
    omega_rabi   driving Rabi frequency
    delta0       emitter-drive detuning  (omega_0 - omega_l)
    delta_c      cavity-drive detuning   (omega_c - omega_l)
    n_bar        thermal bath occupancy
    """

    n_emitters: int
    g1: float = 0.0
    kappa: float = 1.0
    gamma1: float = 0.0
    gamma2_star: float = 0.0
    omega_rabi: float = 0.0
    delta0: float = 0.0
    delta_c: float = 0.0
    n_bar: float = 0.0

    def __post_init__(self):
        if int(self.n_emitters) != self.n_emitters or self.n_emitters < 1:
            raise ParameterError(f"n_emitters must be a positive integer, got {self.n_emitters}")
        for name in ("g1", "kappa", "gamma1", "gamma2_star", "omega_rabi", "n_bar"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {value}")
        for name in ("delta0", "delta_c"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    # -- derived rates (computed on demand, never stored) --------------------

    @property
    def gamma_transverse(self) -> float:
        """Total transverse decay rate gamma_1/2 + gamma_2* + n_bar*gamma_1."""
        return 0.5 * self.gamma1 + self.gamma2_star + self.n_bar * self.gamma1

    @property
    def gamma_t(self) -> complex:
        """Complex emitter rate: gamma_transverse + i*delta0."""
        return self.gamma_transverse + 1j * self.delta0

    @property
    def gamma_c(self) -> complex:
        """Complex cavity rate: kappa + i*delta_c."""
        return self.kappa + 1j * self.delta_c

    @property
    def collective_coupling(self) -> float:
        """Ensemble-enhanced coupling sqrt(N) * g1."""
        return math.sqrt(self.n_emitters) * self.g1

    def omega_for_scaled_drive(self, z: float) -> float:
        """Rabi frequency corresponding to z = (Omega/|gamma_t|)^2."""
        if z < 0:
            raise ParameterError(f"scaled drive z must be >= 0, got {z}")
        return abs(self.gamma_t) * math.sqrt(z)

    def scaled_drive(self) -> float:
        """z = (Omega/|gamma_t|)^2 for the stored Rabi frequency."""
        gt = abs(self.gamma_t)
        if gt == 0:
            raise DomainError("scaled drive undefined: |gamma_t| = 0")
        return (self.omega_rabi / gt) ** 2

    def replace(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class MomentState:
    """The twelve complex first/second moments forming the ODE state.

    Only one member of each conjugate pair is stored.  The accessor
    properties implement the exact conjugation rules; note in particular
    that <a^dag sigma^dag> is the conjugate of <a sigma>, NOT of
    <a^dag sigma>.
    """

    m_a: complex = 0j
    m_s: complex = 0j
    m_aa: complex = 0j
    m_ada: complex = 0j
    m_sds: complex = 0j
    m_ss: complex = 0j
    m_sds2: complex = 0j
    m_zz: complex = 0j
    m_sz: complex = 0j
    m_as: complex = 0j
    m_ads: complex = 0j
    m_az: complex = 0j

    # -- derived and conjugate accessors -------------------------------------

    @property
    def sigma_z(self) -> complex:
        """<sigma_1z> = 2<sigma^dag sigma> - 1 (spin-1/2 identity)."""
        return 2.0 * self.m_sds - 1.0

    @property
    def m_adad(self) -> complex:
        """<a^dag a^dag> = conj(<a a>)."""
        return np.conj(self.m_aa)

    @property
    def m_asd(self) -> complex:
        """<a sigma_1^dag> = conj(<a^dag sigma_1>)."""
        return np.conj(self.m_ads)

    @property
    def m_adsd(self) -> complex:
        """<a^dag sigma_1^dag> = conj(<a sigma_1>)."""
        return np.conj(self.m_as)

    @property
    def m_adz(self) -> complex:
        """<a^dag sigma_1z> = conj(<a sigma_1z>)."""
        return np.conj(self.m_az)

    @property
    def m_sdz(self) -> complex:
        """<sigma_1^dag sigma_2z> = conj(<sigma_1 sigma_2z>)."""
        return np.conj(self.m_sz)

    @property
    def m_ssd(self) -> complex:
        """<sigma_1 sigma_2^dag> = conj(<sigma_1^dag sigma_2>)."""
        return np.conj(self.m_sds2)

    # -- packing --------------------------------------------------------------

    def to_complex(self) -> np.ndarray:
        """Length-12 complex vector in canonical order."""
        return np.array([getattr(self, name) for name in MOMENT_NAMES], dtype=complex)

    def to_vector(self) -> np.ndarray:
        """Length-24 real vector, (Re, Im) interleaved in canonical order."""
        return self.to_complex().view(np.float64).copy()

    @classmethod
    def from_complex(cls, values) -> "MomentState":
        values = np.asarray(values, dtype=complex)
        if values.shape != (len(MOMENT_NAMES),):
            raise ContractViolation(
                f"expected (12,) complex moments, got shape {values.shape}")
        return cls(**{name: complex(values[i]) for i, name in enumerate(MOMENT_NAMES)})

    @classmethod
    def from_vector(cls, vector) -> "MomentState":
        vector = np.ascontiguousarray(vector, dtype=np.float64)
        if vector.shape != (STATE_DIM,):
            raise ContractViolation(
                f"expected ({STATE_DIM},) packed reals, got shape {vector.shape}")
        return cls.from_complex(vector.view(np.complex128))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_vector())))


def initial_thermal_state(params: SystemParams) -> MomentState:
    """State with <sigma_z> = 0 (maximally mixed spins) and a thermal field:
    <sigma^dag sigma> = 1/2, <a^dag a> = n_bar, all other moments zero."""
    return MomentState(m_sds=0.5 + 0j, m_ada=params.n_bar + 0j)


def physicality_flags(values, hermiticity_tol: float = 1e-8) -> int:
    """Bitmask of physicality violations for one moment vector.

    `values` is a length-12 complex vector (canonical order) or MomentState.
    Imaginary parts of the canonically real moments (m_ada, m_sds, m_sds2,
    m_zz) are compared against hermiticity_tol * |moment| + 1e-10; the same
    tolerance guards the population and photon-number ranges.
    """
    if isinstance(values, MomentState):
        values = values.to_complex()
    flags = 0
    for idx in (3, 4, 6, 7):  # m_ada, m_sds, m_sds2, m_zz
        allowed = hermiticity_tol * abs(values[idx]) + 1e-10
        if abs(values[idx].imag) > allowed:
            flags |= FLAG_HERMITICITY
    pop = values[4].real
    pop_tol = hermiticity_tol * abs(values[4]) + 1e-10
    if pop < -pop_tol or pop > 1.0 + pop_tol:
        flags |= FLAG_POPULATION
    photons = values[3].real
    if photons < -(hermiticity_tol * abs(values[3]) + 1e-10):
        flags |= FLAG_PHOTON
    return flags
