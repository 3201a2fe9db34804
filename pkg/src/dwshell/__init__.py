"""Davis-Wielandt shell separation certificates for converter-penetrated grids.

The package splits into the geometry of shells (``shells``, ``geometry``),
the static network reduction (``network``), converter small-signal models
(``converters``), the frequency-sweep certificate (``stability``), and
independent ground-truth oracles (``verify``).  ``sysio`` and ``cli`` are
the file format and command-line surface.
"""

from .converters import (ConverterFleet, LtiBlock, aggregate_fleet,
                         aggregate_state_space, bundled_gfl_model, freq_response,
                         transfer_at)
from .errors import (AlgebraicLoopError, DwshellError, InputError,
                     MarginalLocusError, NotGroundedError, SingularInteriorError,
                     UnstableBlockError, ZeroMatrixError)
from .network import (NetworkDescription, ParabolaSegment, ReducedNetwork,
                      build_laplacian, grid_admittance, kron_reduce,
                      network_shell_segment, reduce_network)
from .shells import (PhaseInterval, SamplerSpec, ShellCloud, ShellPoint,
                     dw_shell_samples, numerical_range_boundary,
                     sectoriality_and_phases, xy_projection)
from .stability import (FrequencySweep, SeparationResult, StabilityReport,
                        TOL_SEP, centralized_certify, classify_margin,
                        decentralized_certify, default_sweep, xz_margin)
from .sysio import (SweepSettings, SystemDescription, ToleranceSettings,
                    bundled_system_names, bundled_system_path, load_system,
                    save_system)
from .verify import (ClosedLoopModel, ClosedLoopSpectrum, GncResult, TimeSeries,
                     build_closed_loop, closed_loop_eigs, det_identity_check,
                     gnc_locus, simulate_step)

__version__ = "0.1.0"

__all__ = [
    "AlgebraicLoopError", "ClosedLoopModel", "ClosedLoopSpectrum",
    "ConverterFleet", "DwshellError", "FrequencySweep", "GncResult",
    "InputError", "LtiBlock", "MarginalLocusError", "NetworkDescription",
    "NotGroundedError", "ParabolaSegment", "PhaseInterval", "ReducedNetwork",
    "SamplerSpec", "SeparationResult", "ShellCloud", "ShellPoint",
    "StabilityReport", "SweepSettings", "SystemDescription", "TOL_SEP",
    "TimeSeries", "ToleranceSettings", "UnstableBlockError", "ZeroMatrixError",
    "aggregate_fleet", "aggregate_state_space", "build_closed_loop",
    "build_laplacian", "bundled_gfl_model", "bundled_system_names",
    "bundled_system_path", "centralized_certify", "classify_margin",
    "closed_loop_eigs", "decentralized_certify", "default_sweep",
    "det_identity_check", "dw_shell_samples", "freq_response", "gnc_locus",
    "grid_admittance", "kron_reduce", "load_system", "network_shell_segment",
    "numerical_range_boundary", "reduce_network", "save_system",
    "sectoriality_and_phases", "simulate_step", "transfer_at", "xy_projection",
    "xz_margin",
]
