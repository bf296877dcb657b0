"""Stokes/anti-Stokes photon pair statistics for pulsed Raman scattering:
a calibrated stochastic pulse model, time-tag Monte Carlo, a coincidence
correlator, and power-law fitting."""

from .model import (
    CalibrationError,
    CalibrationTargets,
    CoincidenceForecast,
    LaserConfig,
    MaterialConfig,
    ModelConfig,
    RateConstants,
    RateReport,
    calibrate,
    coincidence_prob,
    default_config,
    enumerated_forecast,
    expected_rates,
    forecast,
    g2_closed_form,
    read_probability,
    thermal_occupation,
)
from .simulate import (
    MomentTally,
    PulseOutcome,
    RunSummary,
    SweepRow,
    sample_pulse,
    simulate_counts,
    simulate_run,
    sweep,
)
from .tagstore import (
    TagFileHeader,
    TagFormatError,
    TagStream,
    read_stream,
    read_tags,
    write_stream,
    write_tags,
)
from .correlate import (
    CorrelationHistogram,
    G2Estimate,
    PeakSeries,
    autocorrelate_hbt,
    cauchy_schwarz_factor,
    cross_correlate,
    extract_peaks,
    g2_from_peaks,
)
from .powerfit import (
    DataSeries,
    ExponentFit,
    FitError,
    FitResult,
    IllConditionedError,
    fit_exponent,
    fit_poly,
    poisson_sigma,
    select_model,
)
from .config import ConfigError, RunConfig, config_digest, parse_config

__version__ = "0.1.0"
