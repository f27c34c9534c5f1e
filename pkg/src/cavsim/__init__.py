"""cavsim: driven cavity-ensemble squeezing simulator.

Moment-closure dynamics of N two-level emitters coupled to one cavity mode
and driven by an off-axis coherent field, with quadrature- and spin-
squeezing observables, an exact small-N density-matrix oracle, spectral
estimation of modulated traces, and a deterministic sweep harness.
"""

from .errors import (CavsimError, ConfigError, ContractViolation, DomainError,
                     IntegrationFailure, NoSteadyStateError, ParameterError,
                     SchemaError, TruncationError, UnpolarizedStateError)
from .integrate import (IntegrationConfig, SteadyState, Trace,
                        find_steady_state, integrate_trace, verify_steady)
from .model import (EOM_VARIANTS, RateCoefficients, cumulant_close, make_rhs,
                    pauli_reduce_same_site, rhs)
from .observables import (CLASSIFICATIONS, CouplingEstimate, QuadratureResult,
                          SpinMetrics, analytic_free_space_variance,
                          cavity_quadrature_variance, ensemble_quadrature_variance,
                          estimate_coupling, lasing_threshold_margin,
                          min_cavity_quadrature, min_ensemble_quadrature,
                          spin_metrics, to_db, transfer_factor)
from .oracle import (ComparisonReport, DensityMatrix, OracleConfig, OracleRun,
                     build_generator, compare_with_cumulant, evolve,
                     extract_moments, spin_steady_state)
from .params import (MOMENT_NAMES, STATE_DIM, MomentState, SystemParams,
                     initial_thermal_state, physicality_flags)
from .spectral import (PsdEstimate, dominant_frequency,
                       normally_ordered_variance_series, scale_spectral_density,
                       welch_psd)
from .sweep import (CSV_HEADER, PRESET_NAMES, PsdSettings, SweepAxis,
                    SweepRecord, SweepResult, SweepSpec, figure_preset,
                    read_csv, run_sweep, write_csv)

__version__ = "0.1.0"
