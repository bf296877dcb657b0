"""Closed-form per-pulse model of pulsed Stokes / anti-Stokes Raman scattering.

Every pulse is statistically independent (the repetition period of ~13 ns is
far longer than the optical-phonon lifetime).  Per pulse, at average laser
power P (mW):

    m_S       = k_S * P                 mean Stokes photons generated
    r         = min(k_r * P, 1)         read probability per Stokes phonon
    m_aS,pair = r * m_S                 mean phonon-read anti-Stokes photons
    m_aS,th   = k_th * P                mean thermally seeded anti-Stokes
    m_aS      = m_aS,pair + m_aS,th

Stokes photon number is Poissonian or thermal (Bose-Einstein) per
``RateConstants.stokes_statistics``; each Stokes-generated phonon is read out
with probability r; detection is independent binomial thinning with
efficiencies eta_S and eta_aS.

"Coincidence" quantities below are expected photon-pair counts: per pulse for
the zero-delay peak, per ordered pulse pair for any off-zero peak.  They
coincide with coincidence probabilities when much smaller than one, and the
all-pairs correlator estimates exactly these expectations at any size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "LaserConfig",
    "MaterialConfig",
    "RateConstants",
    "ModelConfig",
    "RateReport",
    "CoincidenceForecast",
    "CalibrationTargets",
    "CalibrationError",
    "thermal_occupation",
    "read_probability",
    "expected_rates",
    "g2_closed_form",
    "coincidence_prob",
    "forecast",
    "enumerated_forecast",
    "calibrate",
    "default_config",
]

# Second radiation constant hc/k_B in cm*K.
_HC_OVER_KB_CM_K = 1.4388

PS_PER_SECOND = 10**12


def thermal_occupation(wavenumber_invcm: float, temperature_k: float) -> float:
    """Bose-Einstein mean phonon occupation 1/(exp(1.4388*nu/T) - 1).

    Returns 0 in the zero-temperature limit.
    """
    if wavenumber_invcm <= 0:
        raise ValueError(f"wavenumber must be positive, got {wavenumber_invcm}")
    if temperature_k < 0:
        raise ValueError(f"temperature must be non-negative, got {temperature_k}")
    if temperature_k == 0:
        return 0.0
    x = _HC_OVER_KB_CM_K * wavenumber_invcm / temperature_k
    if x > 700.0:  # expm1 would overflow; occupation ~ exp(-x)
        return math.exp(-x)
    return 1.0 / math.expm1(x)


@dataclass(frozen=True)
class LaserConfig:
    """Pulsed excitation laser. ``power_mw`` is a default; most operations
    take power as an explicit argument so it can be swept."""

    wavelength_nm: float = 785.0
    rep_rate_hz: float = 76e6
    pulse_duration_fs: float = 130.0
    power_mw: float = 5.0

    def __post_init__(self) -> None:
        if self.rep_rate_hz <= 0:
            raise ValueError("rep_rate_hz must be positive")
        if self.pulse_duration_fs <= 0:
            raise ValueError("pulse_duration_fs must be positive")
        if self.power_mw < 0:
            raise ValueError("power_mw must be non-negative")
        period = PS_PER_SECOND / self.rep_rate_hz
        rounded = round(period)
        if rounded < 1 or abs(period - rounded) > 1.0:
            raise ValueError(
                f"repetition period {period} ps is not an integer picosecond count"
            )

    @property
    def rep_period_ps(self) -> int:
        return round(PS_PER_SECOND / self.rep_rate_hz)


@dataclass(frozen=True)
class MaterialConfig:
    """Raman-active medium; defaults describe the 1332 cm^-1 phonon of diamond."""

    phonon_wavenumber_invcm: float = 1332.0
    temperature_k: float = 300.0
    stokes_wavelength_nm: float = 880.0
    antistokes_wavelength_nm: float = 710.0

    def __post_init__(self) -> None:
        if self.phonon_wavenumber_invcm <= 0:
            raise ValueError("phonon_wavenumber_invcm must be positive")
        if self.temperature_k < 0:
            raise ValueError("temperature_k must be non-negative")

    def thermal_occupation(self) -> float:
        return thermal_occupation(self.phonon_wavenumber_invcm, self.temperature_k)


STOKES_STATISTICS = ("poissonian", "thermal")


@dataclass(frozen=True)
class RateConstants:
    """Effective per-mW rate constants of the stochastic model.

    All geometric and phase-matching factors are absorbed into these
    constants; they are calibrated to observed count rates, not derived
    from first principles.
    """

    k_s_per_mw: float = 0.8
    k_r_per_mw: float = 1e-4
    k_th_per_mw: float = 1e-5
    eta_s: float = 8.0324e-6
    eta_as: float = 4.3839e-4
    stokes_statistics: str = "poissonian"

    def __post_init__(self) -> None:
        for name in ("k_s_per_mw", "k_r_per_mw", "k_th_per_mw"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("eta_s", "eta_as"):
            eta = getattr(self, name)
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {eta}")
        if self.stokes_statistics not in STOKES_STATISTICS:
            raise ValueError(
                f"stokes_statistics must be one of {STOKES_STATISTICS}, "
                f"got {self.stokes_statistics!r}"
            )


@dataclass(frozen=True)
class ModelConfig:
    """Full model: laser, material, rate constants, detection chain."""

    laser: LaserConfig
    material: MaterialConfig
    rates: RateConstants
    detector_jitter_ps: float = 350.0
    coincidence_window_ps: int = 1000
    dead_time_ps: int = 0

    def __post_init__(self) -> None:
        if self.detector_jitter_ps < 0:
            raise ValueError("detector_jitter_ps must be non-negative")
        if self.coincidence_window_ps < 0:
            raise ValueError("coincidence_window_ps must be non-negative")
        if self.dead_time_ps < 0:
            raise ValueError("dead_time_ps must be non-negative")
        if self.coincidence_window_ps >= self.laser.rep_period_ps:
            raise ValueError(
                "coincidence_window_ps must be smaller than the repetition period"
            )
        if not (
            self.material.stokes_wavelength_nm
            > self.laser.wavelength_nm
            > self.material.antistokes_wavelength_nm
        ):
            raise ValueError(
                "wavelength ordering violated: need stokes > laser > anti-stokes"
            )

    @property
    def rep_period_ps(self) -> int:
        return self.laser.rep_period_ps

    def with_rates(self, **changes) -> "ModelConfig":
        return replace(self, rates=replace(self.rates, **changes))


def default_config() -> ModelConfig:
    """Calibrated defaults: 4 Stokes photons/pulse at 5 mW, 4.2 kHz Stokes and
    200 Hz anti-Stokes detected at 8.6 mW."""
    return ModelConfig(laser=LaserConfig(), material=MaterialConfig(), rates=RateConstants())


@dataclass(frozen=True)
class RateReport:
    """Per-pulse means and detected count rates at one power."""

    m_s: float
    m_as_pair: float
    m_as_thermal: float
    detected_s_hz: float
    detected_as_hz: float

    @property
    def m_as_total(self) -> float:
        return self.m_as_pair + self.m_as_thermal


@dataclass(frozen=True)
class CoincidenceForecast:
    """Expected pair counts: ``p_center`` per pulse at zero delay, ``p_side``
    per ordered pulse pair at any nonzero comb delay, and their ratio g2."""

    p_center: float
    p_side: float
    g2: float

    def __post_init__(self) -> None:
        if self.p_center < 0 or self.p_side < 0:
            raise ValueError("pair-count expectations must be non-negative")
        if self.p_side > 0 and not math.isclose(
            self.g2, self.p_center / self.p_side, rel_tol=1e-9, abs_tol=0.0
        ):
            raise ValueError("g2 must equal p_center / p_side")


def read_probability(cfg: ModelConfig, power_mw: float) -> float:
    """Probability that one Stokes-generated phonon is read out as an
    anti-Stokes photon; clamped at 1 (phonon depletion stand-in)."""
    return min(cfg.rates.k_r_per_mw * power_mw, 1.0)


def expected_rates(cfg: ModelConfig, power_mw: float) -> RateReport:
    """Closed-form per-pulse means and detected rates at ``power_mw``.

    Detected rates use the click form rep_rate * (1 - exp(-eta * m)): a
    non-resolving detector clicks at most once per pulse.  For the small
    eta*m of any realistic calibration this equals rep_rate * eta * m.
    """
    if power_mw < 0:
        raise ValueError("power_mw must be non-negative")
    k = cfg.rates
    m_s = k.k_s_per_mw * power_mw
    r = read_probability(cfg, power_mw)
    m_as_pair = r * m_s
    m_as_thermal = k.k_th_per_mw * power_mw
    rep = cfg.laser.rep_rate_hz
    detected_s = rep * -math.expm1(-k.eta_s * m_s)
    detected_as = rep * -math.expm1(-k.eta_as * (m_as_pair + m_as_thermal))
    return RateReport(
        m_s=m_s,
        m_as_pair=m_as_pair,
        m_as_thermal=m_as_thermal,
        detected_s_hz=detected_s,
        detected_as_hz=detected_as,
    )


def g2_closed_form(cfg: ModelConfig, power_mw: float) -> float:
    """Zero-delay cross-correlation for Poissonian Stokes statistics:

        g2 = 1 + k_r / (k_S * k_r * P + k_th)

    valid below the read-probability clamp.  Falls off as 1/P at high power,
    plateaus at 1 + k_r/k_th at low power, and for k_th = 0 reduces to
    1 + 1/(k_S * P), unbounded as P -> 0.
    """
    if power_mw <= 0:
        raise ValueError("g2_closed_form requires power_mw > 0")
    k = cfg.rates
    if k.stokes_statistics != "poissonian":
        raise ValueError(
            "closed-form g2 holds for poissonian Stokes statistics only; "
            "use enumerated_forecast for thermal statistics"
        )
    r = read_probability(cfg, power_mw)
    m_as = r * k.k_s_per_mw * power_mw + k.k_th_per_mw * power_mw
    if m_as == 0:
        raise ValueError("anti-Stokes mean is zero; g2 undefined")
    return 1.0 + r / m_as


def coincidence_prob(cfg: ModelConfig, power_mw: float, peak_index: int) -> float:
    """Expected pair count for one comb peak (Poissonian Stokes statistics).

    peak_index = 0: per pulse, correlated pairs plus same-pulse accidentals,
        eta_S * eta_aS * (r * m_S + m_S * m_aS).
    peak_index != 0: per ordered pulse pair, eta_S * m_S * eta_aS * m_aS,
        independent of the peak index.
    """
    if power_mw < 0:
        raise ValueError("power_mw must be non-negative")
    k = cfg.rates
    if k.stokes_statistics != "poissonian":
        raise ValueError(
            "coincidence_prob holds for poissonian Stokes statistics only; "
            "use enumerated_forecast for thermal statistics"
        )
    rates = expected_rates(cfg, power_mw)
    m_s, m_as = rates.m_s, rates.m_as_total
    eta2 = k.eta_s * k.eta_as
    if peak_index == 0:
        r = read_probability(cfg, power_mw)
        return eta2 * (r * m_s + m_s * m_as)
    return eta2 * m_s * m_as


def forecast(cfg: ModelConfig, power_mw: float) -> CoincidenceForecast:
    """Center and side pair-count expectations plus their ratio."""
    p_center = coincidence_prob(cfg, power_mw, 0)
    p_side = coincidence_prob(cfg, power_mw, 1)
    g2 = p_center / p_side if p_side > 0 else math.inf
    return CoincidenceForecast(p_center=p_center, p_side=p_side, g2=g2)


def _photon_number_pmf(cfg: ModelConfig, mean: float, tail_mass: float) -> list[float]:
    if mean == 0:
        return [1.0]
    if cfg.rates.stokes_statistics == "poissonian":
        pmf = [math.exp(-mean)]
        n = 0
        # cumulative tail bound: stop once remaining mass < tail_mass
        while 1.0 - math.fsum(pmf) > tail_mass:
            n += 1
            pmf.append(pmf[-1] * mean / n)
    else:
        q = mean / (1.0 + mean)
        pmf = [1.0 - q]
        while 1.0 - math.fsum(pmf) > tail_mass:
            pmf.append(pmf[-1] * q)
    return pmf


def enumerated_forecast(
    cfg: ModelConfig, power_mw: float, tail_mass: float = 1e-12
) -> CoincidenceForecast:
    """Brute-force oracle for the coincidence expectations.

    Enumerates the Stokes photon-number distribution up to a truncation with
    tail mass below ``tail_mass`` and sums the exact conditional moments; no
    closed-form shortcut on the n-dependence.  Valid for either statistics
    choice, so it independently checks g2_closed_form and coincidence_prob
    and is the only oracle for thermal Stokes statistics.
    """
    if power_mw < 0:
        raise ValueError("power_mw must be non-negative")
    k = cfg.rates
    m_s = k.k_s_per_mw * power_mw
    r = read_probability(cfg, power_mw)
    m_th = k.k_th_per_mw * power_mw
    pmf = _photon_number_pmf(cfg, m_s, tail_mass)
    e_n = math.fsum(p * n for n, p in enumerate(pmf))
    e_n2 = math.fsum(p * n * n for n, p in enumerate(pmf))
    # E[n_S * n_aS] with n_aS = Binomial(n_S, r) + Poisson(m_th)
    e_cross = r * e_n2 + e_n * m_th
    m_as = r * e_n + m_th
    eta2 = k.eta_s * k.eta_as
    p_center = eta2 * e_cross
    p_side = eta2 * e_n * m_as
    g2 = p_center / p_side if p_side > 0 else math.inf
    return CoincidenceForecast(p_center=p_center, p_side=p_side, g2=g2)


class CalibrationError(ValueError):
    """Raised when calibration targets are infeasible; names the constraint."""


@dataclass(frozen=True)
class CalibrationTargets:
    """Observables to invert: detected rates and g2 quoted at ``power_mw``,
    plus the generated Stokes photons per pulse quoted at ``phonons_power_mw``."""

    detected_s_hz: float
    detected_as_hz: float
    g2: float
    power_mw: float
    phonons_per_pulse: float
    phonons_power_mw: float = 5.0


def calibrate(
    targets: CalibrationTargets, laser: LaserConfig | None = None
) -> RateConstants:
    """Invert expected_rates and g2_closed_form for the rate constants.

    Solve order: k_S from phonons per pulse; k_r and k_th jointly from the g2
    value and the anti-Stokes rate; efficiencies from the detected rates.
    The targets cannot separate eta_aS from the anti-Stokes generation
    magnitude, so the convention eta_aS = eta_S closes the system.  The
    returned constants reproduce every target to better than 1e-6 relative.
    """
    laser = laser or LaserConfig()
    t = targets
    for name in (
        "detected_s_hz",
        "detected_as_hz",
        "g2",
        "power_mw",
        "phonons_per_pulse",
        "phonons_power_mw",
    ):
        if getattr(t, name) <= 0:
            raise CalibrationError(f"target {name} must be positive")
    if t.g2 <= 1.0:
        raise CalibrationError(
            "target g2 must exceed 1: the phonon-read channel always adds "
            "correlated pairs on top of the accidental floor"
        )
    rep = laser.rep_rate_hz
    if t.detected_s_hz >= rep or t.detected_as_hz >= rep:
        raise CalibrationError("detected rate targets must be below the rep rate")

    k_s = t.phonons_per_pulse / t.phonons_power_mw
    m_s = k_s * t.power_mw
    # invert the click form for the Stokes efficiency
    eta_s = -math.log1p(-t.detected_s_hz / rep) / m_s
    if eta_s > 1.0:
        raise CalibrationError(
            f"implied eta_s = {eta_s:.3g} exceeds 1; Stokes rate target is "
            "too high for the implied photon flux"
        )
    eta_as = eta_s
    m_as = -math.log1p(-t.detected_as_hz / rep) / eta_as
    # g2 - 1 = k_r*P / m_as  and  m_as = k_s*k_r*P^2 + k_th*P
    k_r = (t.g2 - 1.0) * m_as / t.power_mw
    if k_r * t.power_mw > 1.0:
        raise CalibrationError(
            "implied read probability exceeds 1 at the target power; "
            "g2 target is too large for the anti-Stokes rate"
        )
    k_th = (m_as - k_s * k_r * t.power_mw**2) / t.power_mw
    if k_th < 0:
        raise CalibrationError(
            "implied k_th is negative: the g2 target exceeds the maximum "
            f"1 + 1/(k_S*P) = {1.0 + 1.0 / (k_s * t.power_mw):.4g} attainable "
            "at the target power"
        )
    return RateConstants(
        k_s_per_mw=k_s,
        k_r_per_mw=k_r,
        k_th_per_mw=k_th,
        eta_s=eta_s,
        eta_as=eta_as,
    )
