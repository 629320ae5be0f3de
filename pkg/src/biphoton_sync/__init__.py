"""Clock synchronization with time-correlated photon pairs: correlation-shape
physics, Monte-Carlo tag-stream simulation, histogram analysis, and the
swap-measurement solver."""

__version__ = "0.1.0"

from .channel import (
    DetectorModel,
    FiberChannel,
    PhotonRole,
    Routing,
    SideMode,
    SwapState,
    fiber_dispersion,
    propagation_delay,
    route,
)
from .config import load_config, load_scenario, scenario_from_dict
from .correlate import (
    CenterMethod,
    CorrelationHistogram,
    FitContext,
    FitResult,
    Peak,
    TrackPoint,
    cross_correlate,
    find_peaks,
    peak_center,
    track_offset,
)
from .protocol import (
    Estimate,
    MeasurementResult,
    MultiPathSolution,
    R1Estimate,
    SyncSolution,
    delta_minus,
    solution_csv,
    solution_report,
    solve_dispersion,
    solve_multi_r2,
    solve_r1,
    solve_t0,
    solve_t0_symmetric,
)
from .simulate import (
    Scenario,
    benchtop_scenario,
    pair_delay_density,
    sample_pair_delay,
    scenario_broadening,
    simulate_run,
)
from .spdc import (
    BroadeningModel,
    CorrelationDensity,
    PhaseMatching,
    SpectralModel,
    convolve_jitter,
    farfield_g2,
    fwhm,
    natural_g2,
    spectral_amplitude,
)
from .timetags import (
    CHANNEL_D1,
    CHANNEL_D2,
    ClockModel,
    TagStream,
    TimeTag,
    apply_clock,
    decode_stream,
    encode_stream,
    read_stream,
    shift_stream,
    write_stream,
)
from . import errors

__all__ = [
    "__version__",
    "errors",
    # spdc
    "PhaseMatching",
    "SpectralModel",
    "BroadeningModel",
    "CorrelationDensity",
    "spectral_amplitude",
    "natural_g2",
    "farfield_g2",
    "convolve_jitter",
    "fwhm",
    # channel
    "PhotonRole",
    "SwapState",
    "Routing",
    "route",
    "SideMode",
    "FiberChannel",
    "DetectorModel",
    "propagation_delay",
    "fiber_dispersion",
    # timetags
    "TimeTag",
    "ClockModel",
    "TagStream",
    "apply_clock",
    "shift_stream",
    "encode_stream",
    "decode_stream",
    "read_stream",
    "write_stream",
    "CHANNEL_D1",
    "CHANNEL_D2",
    # simulate
    "Scenario",
    "benchtop_scenario",
    "scenario_broadening",
    "pair_delay_density",
    "sample_pair_delay",
    "simulate_run",
    # correlate
    "CorrelationHistogram",
    "Peak",
    "CenterMethod",
    "FitContext",
    "FitResult",
    "TrackPoint",
    "cross_correlate",
    "find_peaks",
    "peak_center",
    "track_offset",
    # protocol
    "Estimate",
    "MeasurementResult",
    "R1Estimate",
    "MultiPathSolution",
    "SyncSolution",
    "delta_minus",
    "solve_dispersion",
    "solve_r1",
    "solve_t0",
    "solve_t0_symmetric",
    "solve_multi_r2",
    "solution_report",
    "solution_csv",
    # config
    "load_config",
    "load_scenario",
    "scenario_from_dict",
]
