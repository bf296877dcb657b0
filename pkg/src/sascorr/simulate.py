"""Monte Carlo sampler for per-pulse photon statistics and time-tag streams.

Emulates the two-detector experiment: every laser pulse independently
generates Stokes photons, phonon-read anti-Stokes photons, and thermally
seeded anti-Stokes photons; detection is binomial thinning; each detected
photon becomes a picosecond time tag with Gaussian jitter, optionally
filtered by per-channel dead time.

Randomness is counter-based: pulses are partitioned into fixed blocks of
``BLOCK_PULSES`` and block b draws from a Philox generator keyed on
(seed, b) with a fixed draw order, so identical (config, power, n_pulses,
seed) give bit-identical output no matter how many workers execute the
blocks.  Within a block the samplers use exact pooled equivalents (Poisson
splitting, uniform-subset binomial thinning) when means or thinning
probabilities are small; these are exact samplers of the same per-pulse law,
chosen only for speed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import ModelConfig, expected_rates, read_probability
from .tagstore import TagStream

__all__ = [
    "BLOCK_PULSES",
    "PulseOutcome",
    "RunSummary",
    "MomentTally",
    "SweepRow",
    "sample_pulse",
    "simulate_run",
    "simulate_counts",
    "sweep",
]

BLOCK_PULSES = 1 << 20

# epoch of pulse i is (i + 1) * rep_period, so jitter cannot go negative
_EPOCH_OFFSET_PULSES = 1

_POOLED_POISSON_MAX_MEAN = 2.0
_POOLED_BINOMIAL_MAX_P = 0.02


@dataclass(frozen=True)
class PulseOutcome:
    """Photon counts generated and detected in a single pulse."""

    pulse_index: int
    n_stokes_generated: int
    n_as_pair: int
    n_as_thermal: int
    n_stokes_detected: int
    n_as_detected: int

    def __post_init__(self) -> None:
        if self.n_as_pair > self.n_stokes_generated:
            raise ValueError("n_as_pair cannot exceed n_stokes_generated")
        if self.n_stokes_detected > self.n_stokes_generated:
            raise ValueError("detected Stokes count cannot exceed generated")
        if self.n_as_detected > self.n_as_pair + self.n_as_thermal:
            raise ValueError("detected anti-Stokes count cannot exceed generated")


@dataclass(frozen=True)
class RunSummary:
    """Aggregated counts for one run."""

    n_pulses: int
    rng_seed: int
    total_stokes_generated: int
    total_as_pair: int
    total_as_thermal: int
    total_stokes_detected: int
    total_as_detected: int
    elapsed_s: float

    @property
    def rate_s_hz(self) -> float:
        return self.total_stokes_detected / self.elapsed_s

    @property
    def rate_as_hz(self) -> float:
        return self.total_as_detected / self.elapsed_s

    @property
    def mean_stokes_per_pulse(self) -> float:
        return self.total_stokes_generated / self.n_pulses

    @property
    def mean_as_pair_per_pulse(self) -> float:
        return self.total_as_pair / self.n_pulses

    @property
    def mean_as_thermal_per_pulse(self) -> float:
        return self.total_as_thermal / self.n_pulses


@dataclass
class MomentTally:
    """First and second moments of the per-pulse quantities needed for
    coincidence statistics and standard-error estimates.

    ``center`` is the same-pulse detected pair product n_S_det * n_aS_det;
    ``side`` is the adjacent-pulse product n_S_det[i] * n_aS_det[i+1],
    accumulated within sampling blocks (boundary pairs are skipped, which
    only reduces the side-pair count, never biases it).
    """

    n_pulses: int = 0
    n_side_pairs: int = 0
    stokes_sum: int = 0
    stokes_sumsq: int = 0
    as_sum: int = 0
    as_sumsq: int = 0
    center_sum: int = 0
    center_sumsq: int = 0
    side_sum: int = 0
    side_sumsq: int = 0

    def add(self, other: "MomentTally") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def _mean_sem(self, total: int, sumsq: int, n: int) -> tuple[float, float]:
        if n == 0:
            return math.nan, math.nan
        mean = total / n
        var = max(sumsq / n - mean * mean, 0.0)
        return mean, math.sqrt(var / n)

    def stokes_mean(self):
        return self._mean_sem(self.stokes_sum, self.stokes_sumsq, self.n_pulses)

    def as_mean(self):
        return self._mean_sem(self.as_sum, self.as_sumsq, self.n_pulses)

    def center_mean(self):
        return self._mean_sem(self.center_sum, self.center_sumsq, self.n_pulses)

    def side_mean(self):
        return self._mean_sem(self.side_sum, self.side_sumsq, self.n_side_pairs)

    def g2(self) -> tuple[float, float]:
        """Ratio of center to side pair expectations with a propagated
        standard error (covariance between the two sums is ignored, which
        overestimates the error slightly)."""
        c, sc = self.center_mean()
        s, ss = self.side_mean()
        if not s > 0:
            return math.inf, math.inf
        g2 = c / s
        sigma = g2 * math.sqrt((sc / c) ** 2 + (ss / s) ** 2) if c > 0 else math.inf
        return g2, sigma


@dataclass(frozen=True)
class SweepRow:
    power_mw: float
    summary: RunSummary
    tally: MomentTally

    @property
    def rate_s_hz(self) -> float:
        return self.summary.rate_s_hz

    @property
    def rate_as_hz(self) -> float:
        return self.summary.rate_as_hz


def _block_generator(seed: int, block_index: int) -> np.random.Generator:
    key = (int(seed) & (2**64 - 1)) * 2**64 + block_index
    return np.random.Generator(np.random.Philox(key=key))


def _pooled_poisson(
    rng: np.random.Generator, mean: float, size: int
) -> np.ndarray:
    """Poisson(mean) per pulse via splitting: total ~ Poisson(size*mean),
    each event lands on a uniform pulse."""
    total = rng.poisson(mean * size)
    if total == 0:
        return np.zeros(size, dtype=np.int64)
    where = rng.integers(0, size, size=total)
    return np.bincount(where, minlength=size).astype(np.int64)


def _distinct_uniform(rng: np.random.Generator, n: int, total: int) -> np.ndarray:
    """n distinct uniform integers from [0, total)."""
    picks = np.unique(rng.integers(0, total, size=n))
    while picks.size < n:
        extra = rng.integers(0, total, size=n - picks.size)
        picks = np.unique(np.concatenate([picks, extra]))
    return picks


def _pooled_binomial(
    rng: np.random.Generator, counts: np.ndarray, p: float
) -> np.ndarray:
    """Binomial(counts[i], p) per pulse via pooled thinning: the number of
    survivors is Binomial(sum, p) and survivors are a uniform subset of the
    pooled photons."""
    total = int(counts.sum())
    out = np.zeros(len(counts), dtype=np.int64)
    if total == 0 or p == 0.0:
        return out
    n_kept = rng.binomial(total, p)
    if n_kept == 0:
        return out
    picks = _distinct_uniform(rng, n_kept, total)
    ends = np.cumsum(counts)
    pulse_of = np.searchsorted(ends, picks, side="right")
    np.add.at(out, pulse_of, 1)
    return out


def _draw_counts(rng, mean: float, size: int) -> np.ndarray:
    if mean == 0.0:
        return np.zeros(size, dtype=np.int64)
    if mean <= _POOLED_POISSON_MAX_MEAN:
        return _pooled_poisson(rng, mean, size)
    return rng.poisson(mean, size=size).astype(np.int64)


def _thin(rng, counts: np.ndarray, p: float) -> np.ndarray:
    if p == 0.0:
        return np.zeros(len(counts), dtype=np.int64)
    if p == 1.0:
        return counts.copy()
    if p <= _POOLED_BINOMIAL_MAX_P:
        return _pooled_binomial(rng, counts, p)
    return rng.binomial(counts, p).astype(np.int64)


@dataclass
class _BlockCounts:
    n_s: np.ndarray
    n_pair: np.ndarray
    n_th: np.ndarray
    d_s: np.ndarray
    d_as: np.ndarray


def _sample_block(cfg: ModelConfig, power_mw: float, size: int, rng) -> _BlockCounts:
    """Fixed draw order: Stokes counts, pair reads, thermal counts, Stokes
    detection, anti-Stokes detection."""
    k = cfg.rates
    m_s = k.k_s_per_mw * power_mw
    if k.stokes_statistics == "thermal" and m_s > 0:
        n_s = (rng.geometric(1.0 / (1.0 + m_s), size=size) - 1).astype(np.int64)
    else:
        n_s = _draw_counts(rng, m_s, size)
    n_pair = _thin(rng, n_s, read_probability(cfg, power_mw))
    n_th = _draw_counts(rng, k.k_th_per_mw * power_mw, size)
    d_s = _thin(rng, n_s, k.eta_s)
    d_as = _thin(rng, n_pair + n_th, k.eta_as)
    return _BlockCounts(n_s=n_s, n_pair=n_pair, n_th=n_th, d_s=d_s, d_as=d_as)


def sample_pulse(cfg: ModelConfig, power_mw: float, rng: np.random.Generator,
                 pulse_index: int = 0) -> PulseOutcome:
    """Draw one pulse from the model using the supplied generator."""
    if power_mw < 0:
        raise ValueError("power_mw must be non-negative")
    k = cfg.rates
    m_s = k.k_s_per_mw * power_mw
    if k.stokes_statistics == "thermal" and m_s > 0:
        n_s = int(rng.geometric(1.0 / (1.0 + m_s))) - 1
    else:
        n_s = int(rng.poisson(m_s)) if m_s > 0 else 0
    n_pair = int(rng.binomial(n_s, read_probability(cfg, power_mw))) if n_s else 0
    m_th = k.k_th_per_mw * power_mw
    n_th = int(rng.poisson(m_th)) if m_th > 0 else 0
    d_s = int(rng.binomial(n_s, k.eta_s)) if n_s else 0
    d_as = int(rng.binomial(n_pair + n_th, k.eta_as)) if n_pair + n_th else 0
    return PulseOutcome(
        pulse_index=pulse_index,
        n_stokes_generated=n_s,
        n_as_pair=n_pair,
        n_as_thermal=n_th,
        n_stokes_detected=d_s,
        n_as_detected=d_as,
    )


def _tally_block(counts: _BlockCounts) -> MomentTally:
    d_s, d_as = counts.d_s, counts.d_as
    center = d_s * d_as
    side = d_s[:-1] * d_as[1:]
    n_as = counts.n_pair + counts.n_th
    return MomentTally(
        n_pulses=len(d_s),
        n_side_pairs=max(len(d_s) - 1, 0),
        stokes_sum=int(counts.n_s.sum()),
        stokes_sumsq=int((counts.n_s * counts.n_s).sum()),
        as_sum=int(n_as.sum()),
        as_sumsq=int((n_as * n_as).sum()),
        center_sum=int(center.sum()),
        center_sumsq=int((center * center).sum()),
        side_sum=int(side.sum()),
        side_sumsq=int((side * side).sum()),
    )


def _summary_block(counts: _BlockCounts) -> tuple[int, int, int, int, int]:
    return (
        int(counts.n_s.sum()),
        int(counts.n_pair.sum()),
        int(counts.n_th.sum()),
        int(counts.d_s.sum()),
        int(counts.d_as.sum()),
    )


def _block_sizes(n_pulses: int) -> list[int]:
    n_blocks = (n_pulses + BLOCK_PULSES - 1) // BLOCK_PULSES
    return [
        min(BLOCK_PULSES, n_pulses - b * BLOCK_PULSES) for b in range(n_blocks)
    ]


def _tags_for_block(
    cfg: ModelConfig,
    counts: _BlockCounts,
    rng: np.random.Generator,
    first_pulse: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Timestamps for one block, channel by channel.  Jitter draws follow the
    count draws in a fixed order (Stokes first)."""
    rep = cfg.rep_period_ps
    jitter = cfg.detector_jitter_ps
    out = []
    for det in (counts.d_s, counts.d_as):
        hit = np.nonzero(det)[0]
        reps = det[hit]
        pulse = np.repeat(hit.astype(np.int64) + first_pulse + _EPOCH_OFFSET_PULSES, reps)
        t = pulse * rep
        if jitter > 0:
            t = t + np.rint(rng.normal(0.0, jitter, size=len(t))).astype(np.int64)
            np.maximum(t, 0, out=t)
        out.append(t.astype(np.uint64))
    return out[0], out[1]


def _apply_dead_time(times: np.ndarray, dead_time_ps: int) -> np.ndarray:
    """Keep a tag when it is at least dead_time_ps after the last kept tag."""
    if dead_time_ps <= 0 or len(times) == 0:
        return times
    keep = np.empty(len(times), dtype=bool)
    last = -1 - dead_time_ps
    for i, t in enumerate(times):
        ti = int(t)
        ok = ti - last >= dead_time_ps
        keep[i] = ok
        if ok:
            last = ti
    return times[keep]


def _check_timestamp_range(cfg: ModelConfig, n_pulses: int) -> None:
    horizon = (n_pulses + _EPOCH_OFFSET_PULSES) * cfg.rep_period_ps
    horizon += int(8 * cfg.detector_jitter_ps) + 1
    if horizon >= 2**64:
        raise OverflowError(
            f"{n_pulses} pulses at {cfg.rep_period_ps} ps per pulse overflow "
            "the 64-bit picosecond timestamp range"
        )


def _run_blocks(cfg, power_mw, n_pulses, seed, n_workers, make_result):
    sizes = _block_sizes(n_pulses)

    def one(block_index: int):
        rng = _block_generator(seed, block_index)
        first = block_index * BLOCK_PULSES
        counts = _sample_block(cfg, power_mw, sizes[block_index], rng)
        return make_result(counts, rng, first)

    if n_workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(one, range(len(sizes))))
    else:
        results = [one(b) for b in range(len(sizes))]
    return results


def simulate_counts(
    cfg: ModelConfig,
    power_mw: float,
    n_pulses: int,
    seed: int,
    n_workers: int = 1,
) -> tuple[RunSummary, MomentTally]:
    """Run the per-pulse model without materializing time tags."""
    if n_pulses < 1:
        raise ValueError("n_pulses must be at least 1")
    if power_mw < 0:
        raise ValueError("power_mw must be non-negative")

    def make(counts, rng, first):
        return _summary_block(counts), _tally_block(counts)

    results = _run_blocks(cfg, power_mw, n_pulses, seed, n_workers, make)
    totals = [0] * 5
    tally = MomentTally()
    for block_sums, block_tally in results:
        totals = [a + b for a, b in zip(totals, block_sums)]
        tally.add(block_tally)
    summary = RunSummary(
        n_pulses=n_pulses,
        rng_seed=seed,
        total_stokes_generated=totals[0],
        total_as_pair=totals[1],
        total_as_thermal=totals[2],
        total_stokes_detected=totals[3],
        total_as_detected=totals[4],
        elapsed_s=n_pulses / cfg.laser.rep_rate_hz,
    )
    return summary, tally


def simulate_run(
    cfg: ModelConfig,
    power_mw: float,
    n_pulses: int,
    seed: int,
    n_workers: int = 1,
) -> tuple[TagStream, RunSummary]:
    """Run the model and emit the detected-photon time-tag stream.

    Each detected photon gets timestamp (pulse_index + 1) * rep_period_ps
    plus rounded Gaussian jitter; per-channel streams are sorted and then
    dead-time filtered in timestamp order.  Output is bit-identical for
    identical (cfg, power_mw, n_pulses, seed) at any worker count.
    """
    if n_pulses < 1:
        raise ValueError("n_pulses must be at least 1")
    if power_mw < 0:
        raise ValueError("power_mw must be non-negative")
    _check_timestamp_range(cfg, n_pulses)

    def make(counts, rng, first):
        tags_s, tags_as = _tags_for_block(cfg, counts, rng, first)
        return _summary_block(counts), tags_s, tags_as

    results = _run_blocks(cfg, power_mw, n_pulses, seed, n_workers, make)
    totals = [0] * 5
    parts_s, parts_as = [], []
    for block_sums, tags_s, tags_as in results:
        totals = [a + b for a, b in zip(totals, block_sums)]
        parts_s.append(tags_s)
        parts_as.append(tags_as)
    stokes = np.sort(np.concatenate(parts_s)) if parts_s else np.empty(0, np.uint64)
    antistokes = (
        np.sort(np.concatenate(parts_as)) if parts_as else np.empty(0, np.uint64)
    )
    stokes = _apply_dead_time(stokes, cfg.dead_time_ps)
    antistokes = _apply_dead_time(antistokes, cfg.dead_time_ps)
    summary = RunSummary(
        n_pulses=n_pulses,
        rng_seed=seed,
        total_stokes_generated=totals[0],
        total_as_pair=totals[1],
        total_as_thermal=totals[2],
        total_stokes_detected=totals[3],
        total_as_detected=totals[4],
        elapsed_s=n_pulses / cfg.laser.rep_rate_hz,
    )
    stream = TagStream(
        stokes=stokes, antistokes=antistokes, rep_period_ps=cfg.rep_period_ps
    )
    return stream, summary


def _subseed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sweep(
    cfg: ModelConfig,
    powers,
    n_pulses,
    seed: int,
    n_workers: int = 1,
) -> list[SweepRow]:
    """One independent count-level run per power.

    ``n_pulses`` may be a scalar or a per-power sequence.  Each power gets
    its own derived sub-seed, so duplicate powers give independent runs and
    inserting a power does not perturb the others.
    """
    powers = list(powers)
    if not powers:
        raise ValueError("powers must be non-empty")
    if any(p < 0 for p in powers):
        raise ValueError("powers must be non-negative")
    if isinstance(n_pulses, (int, np.integer)):
        pulses = [int(n_pulses)] * len(powers)
    else:
        pulses = [int(n) for n in n_pulses]
        if len(pulses) != len(powers):
            raise ValueError("n_pulses sequence must match powers in length")
    rows = []
    for i, (p, n) in enumerate(zip(powers, pulses)):
        summary, tally = simulate_counts(
            cfg, p, n, _subseed(seed, i), n_workers=n_workers
        )
        rows.append(SweepRow(power_mw=p, summary=summary, tally=tally))
    return rows
