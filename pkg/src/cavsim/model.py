"""Moment equations of motion for the driven cavity-ensemble system.

The twelve coupled equations propagate first and second moments of the
field and (site-symmetric) spin operators.  Third-order moments that mix
the field with two spin sites, or two field operators with one spin, are
closed by discarding the third-order joint cumulant; products of two
operators on the *same* spin site are reduced exactly with the spin-1/2
algebra before any closure is applied.

Two variants of the pair-moment damping are provided:

``"lindblad"`` (default)
    Every coefficient re-derived from the master-equation generator.  This
    is the form validated against the exact small-N solver and used by all
    presets.

``"verbatim"``
    Compatibility transcription of an earlier circulated form of the
    equation set, which differs in the <sigma_1 sigma_2z> damping (the real rate
    2*Gamma in place of gamma_t, and a sigma sigma^dag ordering in its
    relaxation term) and couples <a sigma_1z> to <sigma_1^dag sigma_2>
    instead of <sigma_1^dag sigma_2z>.  With gamma_2* = n_bar = 0 this
    variant leaves <sigma_1 sigma_2z> with zero linear damping and a
    nonzero source, so it drifts secularly; it exists only for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .params import MOMENT_NAMES, STATE_DIM, MomentState, SystemParams

__all__ = [
    "EOM_VARIANTS",
    "cumulant_close",
    "pauli_reduce_same_site",
    "evaluate_reduction",
    "rhs",
    "make_rhs",
    "RateCoefficients",
]

EOM_VARIANTS = ("lindblad", "verbatim")

# indices into the complex state vector, canonical order
_A, _S, _AA, _ADA, _SDS, _SS, _SDS2, _ZZ, _SZ, _AS, _ADS, _AZ = range(12)


def cumulant_close(pair_ab, pair_ac, pair_bc, mean_a, mean_b, mean_c):
    """Third-order moment <abc> with the joint third cumulant set to zero:

        <abc> = <ab><c> + <ac><b> + <bc><a> - 2<a><b><c>
    """
    return (pair_ab * mean_c + pair_ac * mean_b + pair_bc * mean_a
            - 2.0 * mean_a * mean_b * mean_c)


# Exact same-site reductions, expressed as (constant, {moment_name: coeff}).
# sigma sigma^dag = (1 - sigma_z)/2, sigma^dag sigma = (1 + sigma_z)/2,
# sigma sigma = 0, sigma_z sigma = -sigma, sigma sigma_z = sigma, and the
# conjugates thereof.  <sigma_z> itself expands to 2*m_sds - 1.
_SAME_SITE_REDUCTIONS = {
    # second order, one site
    "s1*s1": (0.0, {}),
    "s1d*s1d": (0.0, {}),
    "s1*s1d": (1.0, {"m_sds": -1.0}),
    "s1d*s1": (0.0, {"m_sds": 1.0}),
    "s1*s1z": (0.0, {"m_s": 1.0}),
    "s1z*s1": (0.0, {"m_s": -1.0}),
    # third order: field x same-site pair
    "a*s1d*s1": (0.0, {"m_a": 0.5, "m_az": 0.5}),
    "a*s1*s1d": (0.0, {"m_a": 0.5, "m_az": -0.5}),
    # third order: cross-site with a same-site pair on site 2
    "s1*s2*s2d": (0.0, {"m_s": 0.5, "m_sz": -0.5}),
    "s1*s2d*s2": (0.0, {"m_s": 0.5, "m_sz": 0.5}),
    # third order: population x inversion
    "s1d*s1*s2z": (-0.5, {"m_sds": 1.0, "m_zz": 0.5}),
}


def pauli_reduce_same_site(moment_id: str):
    """Exact reduction of a product containing two operators on one site.

    Returns ``(constant, terms)`` where ``terms`` maps stored-moment names
    to coefficients, such that the moment equals
    ``constant + sum(coeff * moment)``.  Unknown identifiers violate the
    contract.
    """
    try:
        constant, terms = _SAME_SITE_REDUCTIONS[moment_id]
    except KeyError:
        raise ContractViolation(
            f"unknown same-site moment id {moment_id!r}; "
            f"known: {sorted(_SAME_SITE_REDUCTIONS)}") from None
    return constant, dict(terms)


def evaluate_reduction(moment_id: str, state: MomentState) -> complex:
    """Numeric value of a same-site reduction on a given state."""
    constant, terms = pauli_reduce_same_site(moment_id)
    return constant + sum(coeff * getattr(state, name) for name, coeff in terms.items())


@dataclass(frozen=True)
class RateCoefficients:
    """Scalar coefficients of the moment equations for one parameter set."""

    gamma_c: complex
    gamma_t: complex
    gamma: float        # transverse rate, real part of gamma_t
    kappa: float
    gamma1: float
    n_bar: float
    omega: float
    g1: float
    g1_n: float         # g1 * N
    g1_nm1: float       # g1 * (N - 1)

    @classmethod
    def from_params(cls, params: SystemParams) -> "RateCoefficients":
        return cls(
            gamma_c=params.gamma_c,
            gamma_t=params.gamma_t,
            gamma=params.gamma_transverse,
            kappa=params.kappa,
            gamma1=params.gamma1,
            n_bar=params.n_bar,
            omega=params.omega_rabi,
            g1=params.g1,
            g1_n=params.g1 * params.n_emitters,
            g1_nm1=params.g1 * (params.n_emitters - 1),
        )


def _rhs_complex(c: RateCoefficients, m: np.ndarray, verbatim: bool) -> np.ndarray:
    """Derivative of the 12 complex moments.  Hot path: scalar arithmetic only."""
    a = m[_A]; s = m[_S]; aa = m[_AA]; ada = m[_ADA]; sds = m[_SDS]
    ss = m[_SS]; sds2 = m[_SDS2]; zz = m[_ZZ]; sz = m[_SZ]
    as_ = m[_AS]; ads = m[_ADS]; az = m[_AZ]

    w = 2.0 * sds - 1.0               # <sigma_z>
    ad = np.conj(a)
    sd = np.conj(s)
    asd = np.conj(ads)                # <a sigma^dag>
    adsd = np.conj(as_)               # <a^dag sigma^dag>
    adz = np.conj(az)                 # <a^dag sigma_z>
    sdz = np.conj(sz)                 # <sigma_1^dag sigma_2z>
    ssd = np.conj(sds2)               # <sigma_1 sigma_2^dag>

    g1 = c.g1; om = c.omega; nbar = c.n_bar; gamma1 = c.gamma1

    # third-order closures (genuinely tri-partite moments only)
    a_s_z = cumulant_close(as_, az, sz, a, s, w)         # <a s1 s2z>
    ad_s_z = cumulant_close(ads, adz, sz, ad, s, w)      # <ad s1 s2z>
    a_sd_z = cumulant_close(asd, az, sdz, a, sd, w)      # <a s1d s2z>
    ad_sd_z = cumulant_close(adsd, adz, sdz, ad, sd, w)  # <ad s1d s2z>
    a_z_z = cumulant_close(az, az, zz, a, w, w)          # <a s1z s2z>
    ad_z_z = cumulant_close(adz, adz, zz, ad, w, w)      # <ad s1z s2z>
    aa_z = cumulant_close(aa, az, az, a, a, w)           # <a a s1z>
    ada_z = cumulant_close(ada, adz, az, ad, a, w)       # <ad a s1z>
    adad_z = np.conj(aa_z)                               # <ad ad s1z>
    aa_s = cumulant_close(aa, as_, as_, a, a, s)         # <a a s1>
    aa_sd = cumulant_close(aa, asd, asd, a, a, sd)       # <a a s1d>
    ada_s = cumulant_close(ada, ads, as_, ad, a, s)      # <ad a s1>
    ada_sd = cumulant_close(ada, adsd, asd, ad, a, sd)   # <ad a s1d>
    ad_s_s = cumulant_close(ads, ads, ss, ad, s, s)      # <ad s1 s2>
    a_s_sd = cumulant_close(as_, asd, ssd, a, s, sd)     # <a s1 s2d>
    a_s_s = cumulant_close(as_, as_, ss, a, s, s)        # <a s1 s2>
    ad_s_sd = cumulant_close(ads, adsd, ssd, ad, s, sd)  # <ad s1 s2d>

    pair_drive = sz - sdz             # <s1 s2z> - <s1d s2z>
    quad_sum = ad_s_z + a_sd_z + a_s_z + ad_sd_z

    out = np.empty(12, dtype=complex)
    out[_A] = -c.gamma_c * a + c.g1_n * (s - sd)
    out[_S] = -c.gamma_t * s + g1 * (az + adz) + 0.5j * om * w
    out[_AA] = -2.0 * c.gamma_c * aa + 2.0 * c.g1_n * (as_ - asd)
    out[_ADA] = (c.g1_n * (ads + asd - as_ - adsd)
                 - 2.0 * c.kappa * ada + 2.0 * c.kappa * nbar)
    out[_SDS] = (-g1 * (ads + asd + as_ + adsd) - gamma1 * sds
                 - nbar * gamma1 * w - 0.5j * om * (sd - s))
    out[_SS] = -2.0 * c.gamma_t * ss + 2.0 * g1 * (a_s_z + ad_s_z) + 1j * om * sz
    out[_SDS2] = -2.0 * c.gamma * sds2 + g1 * quad_sum - 0.5j * om * pair_drive
    out[_ZZ] = (-4.0 * gamma1 * (0.5 * (w + zz) + nbar * zz)
                - 4.0 * g1 * quad_sum - 2j * om * (sdz - sz))
    if verbatim:
        # legacy transcription: 2*Gamma damping, sigma2 sigma2^dag ordering,
        # and unit coefficients on the last two coupling terms
        out[_SZ] = (-2.0 * c.gamma * sz
                    - 2.0 * gamma1 * (0.5 * (s - sz) + nbar * sz)
                    + g1 * (a_z_z + ad_z_z - 2.0 * (ad_s_s + a_s_sd) + a_s_s + ad_s_sd)
                    - 0.5j * om * (2.0 * (ssd - ss) - zz))
    else:
        out[_SZ] = (-c.gamma_t * sz
                    - 2.0 * gamma1 * (0.5 * (s + sz) + nbar * sz)
                    + g1 * (a_z_z + ad_z_z - 2.0 * (ad_s_s + a_s_sd + a_s_s + ad_s_sd))
                    - 0.5j * om * (2.0 * (ssd - ss) - zz))
    out[_AS] = (-(c.gamma_t + c.gamma_c) * as_
                + g1 * (aa_z + ada_z - (1.0 - sds))
                + c.g1_nm1 * (ss - ssd) + 0.5j * om * az)
    out[_ADS] = (-(c.gamma_t + np.conj(c.gamma_c)) * ads
                 + g1 * (sds + ada_z + adad_z)
                 + c.g1_nm1 * (ssd - ss) + 0.5j * om * adz)
    pair_az = (sz - sds2) if verbatim else (sz - sdz)
    out[_AZ] = (-c.gamma_c * az - 2.0 * gamma1 * (0.5 * (a + az) + nbar * az)
                - g1 * (2.0 * (aa_s + aa_sd + ada_s + ada_sd) + s + sd)
                + c.g1_nm1 * pair_az - 1j * om * (asd - as_))
    return out


def make_rhs(params: SystemParams, variant: str = "lindblad"):
    """Packed-vector derivative function ``f(t, y) -> dy`` for integrators.

    ``y`` is the 24-real interleaved packing of MomentState.  The callable
    is pure and N-independent in cost; it raises ContractViolation on
    non-finite input.
    """
    if variant not in EOM_VARIANTS:
        raise ContractViolation(f"unknown EOM variant {variant!r}; known: {EOM_VARIANTS}")
    coeffs = RateCoefficients.from_params(params)
    verbatim = variant == "verbatim"

    def f(t, y):
        y = np.ascontiguousarray(y, dtype=np.float64)
        if not np.all(np.isfinite(y)):
            raise ContractViolation("non-finite moment components passed to rhs")
        dm = _rhs_complex(coeffs, y.view(np.complex128), verbatim)
        return dm.view(np.float64)

    return f


def rhs(params: SystemParams, state: MomentState, variant: str = "lindblad") -> MomentState:
    """Time derivative of every stored moment for the given parameters."""
    f = make_rhs(params, variant)
    return MomentState.from_vector(f(0.0, state.to_vector()))
