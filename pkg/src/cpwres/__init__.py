"""Design, fitting and loss analysis for superconducting CPW resonators."""

__version__ = "0.1.0"

from .constants import CODATA, PhysicalConstants
from .design import (ConformalMapFactors, CpwGeometry, TransmissionLineParams, WaferStack,
                     characteristic_impedance, conformal_factors, design_frequency, design_report,
                     effective_permittivity, extract_kinetic_inductance, extract_resistance,
                     geometric_line_params, substrate_permittivity)
from .errors import (CpwresError, DegenerateCircleError, DegenerateGeometryError, DomainError,
                     MalformedHeaderError, NonFiniteSampleError, NonMonotonicGridError, SchemaError,
                     TraceFormatError, UnphysicalParameterError)
from .ingest import (ManifestEntry, SweepManifest, dumps_record, format_trace, parse_manifest,
                     parse_observations, parse_trace, write_trace)
from .loss import (IllConditionedWarning, LossObservation, TlsFit, TlsFitParams, fit_tls,
                   relaxation_bound, tls_inverse_q, total_qi)
from .notchfit import (CouplingDiagnostics, NotchFitResult, coupling_diagnostics, estimate_delay,
                       fit_notch, fit_phase)
from .numerics import (Circle2D, LeastSquaresOptions, LeastSquaresReport, agm, ellip_k, fit_circle,
                       least_squares)
from .photon import PhotonCalc, PowerContext, input_power, photon_number
from .s21 import (ComplexTrace, NotchParams, TraceMetadata, noise_sigma_for_snr, notch_s21,
                  synthesize_trace)
