"""Cross/auto-correlation histograms, pulse-comb peak extraction, and g2
estimation from time-tag streams.

The correlator counts ALL tag pairs whose lag t_b - t_a falls inside the
histogram span (not first-match-only), by a sort-merge sweep that is exact
and runs in O(n_a + n_b + pairs).  Lags map to bins symmetrically around
zero: lag L belongs to bin j = sign(L) * floor((|L| + w//2) / w), so
swapping the input streams mirrors the histogram exactly, for even bin
widths too (bin 0 is then one picosecond narrower than the rest).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CorrelationHistogram",
    "PeakSeries",
    "G2Estimate",
    "cross_correlate",
    "autocorrelate_hbt",
    "extract_peaks",
    "g2_from_peaks",
    "cauchy_schwarz_factor",
]

_PAIR_CHUNK = 4_000_000


@dataclass(frozen=True)
class CorrelationHistogram:
    """Pair counts over lag bins j = -K..K centered at j * bin_width_ps."""

    bin_width_ps: int
    max_lag_ps: int
    counts: np.ndarray
    n_a: int
    n_b: int
    duration_ps: int

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    @property
    def k_max(self) -> int:
        return (len(self.counts) - 1) // 2

    def lag_centers(self) -> np.ndarray:
        k = self.k_max
        return np.arange(-k, k + 1, dtype=np.int64) * self.bin_width_ps

    def count_at(self, bin_index: int) -> int:
        return int(self.counts[bin_index + self.k_max])


@dataclass(frozen=True)
class PeakSeries:
    """Coincidence counts summed around each pulse-comb peak; key k is the
    peak at lag k * rep_period_ps."""

    rep_period_ps: int
    window_ps: int
    peak_counts: dict[int, int]

    def __post_init__(self) -> None:
        if 2 * self.window_ps > self.rep_period_ps:
            raise ValueError("window_ps must not exceed half the repetition period")
        if 0 not in self.peak_counts:
            raise ValueError("peak index 0 must be present")

    @property
    def side_indices(self) -> list[int]:
        return sorted(k for k in self.peak_counts if k != 0)


@dataclass(frozen=True)
class G2Estimate:
    g2: float
    sigma: float
    center_count: int
    side_mean: float
    n_side_peaks: int

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.g2)


def _bin_of(lags: np.ndarray, width: int) -> np.ndarray:
    half = width // 2
    a = np.abs(lags)
    return np.sign(lags) * ((a + half) // width)


def _require_sorted(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if len(arr) > 1 and np.any(arr[1:] < arr[:-1]):
        raise ValueError(f"{name} is not sorted by timestamp")
    return arr.astype(np.int64, copy=False)


def cross_correlate(
    stream_a, stream_b, bin_width_ps: int, max_lag_ps: int
) -> CorrelationHistogram:
    """Histogram of lags t_b - t_a over all pairs within +-max_lag_ps.

    Both streams must be sorted.  max_lag_ps must be a positive multiple of
    bin_width_ps; the result has 2 * (max_lag_ps // bin_width_ps) + 1 bins.
    """
    if bin_width_ps <= 0:
        raise ValueError("bin_width_ps must be positive")
    if max_lag_ps <= 0 or max_lag_ps % bin_width_ps != 0:
        raise ValueError("max_lag_ps must be a positive multiple of bin_width_ps")
    a = _require_sorted(stream_a, "stream_a")
    b = _require_sorted(stream_b, "stream_b")
    w = int(bin_width_ps)
    k_max = max_lag_ps // w
    counts = np.zeros(2 * k_max + 1, dtype=np.int64)
    duration = 0
    if len(a) and len(b):
        lo_t = min(int(a[0]), int(b[0]))
        hi_t = max(int(a[-1]), int(b[-1]))
        duration = hi_t - lo_t
    elif len(a) > 1:
        duration = int(a[-1]) - int(a[0])
    elif len(b) > 1:
        duration = int(b[-1]) - int(b[0])
    if len(a) == 0 or len(b) == 0:
        return CorrelationHistogram(
            bin_width_ps=w, max_lag_ps=max_lag_ps, counts=counts,
            n_a=len(a), n_b=len(b), duration_ps=duration,
        )
    # widest lag that can still land in bin +-k_max
    reach = k_max * w + (w - w // 2 - 1)
    lo = np.searchsorted(b, a - reach, side="left")
    hi = np.searchsorted(b, a + reach, side="right")
    per_a = hi - lo
    boundaries = np.concatenate(([0], np.cumsum(per_a)))
    total = int(boundaries[-1])
    start = 0
    while start < total:
        stop = min(start + _PAIR_CHUNK, total)
        first_a = int(np.searchsorted(boundaries, start, side="right") - 1)
        last_a = int(np.searchsorted(boundaries, stop, side="left"))
        sel = slice(first_a, last_a)
        cnt = per_a[sel].copy()
        # clip the chunk edges inside the first and last selected a-tags
        cnt[0] -= start - int(boundaries[first_a])
        cnt[-1] -= int(boundaries[last_a]) - stop
        reps = cnt
        a_vals = np.repeat(a[sel], reps)
        starts = lo[sel].copy()
        starts[0] += start - int(boundaries[first_a])
        offs = np.arange(stop - start) - np.repeat(
            np.concatenate(([0], np.cumsum(reps)[:-1])), reps
        )
        b_idx = np.repeat(starts, reps) + offs
        lags = b[b_idx] - a_vals
        bins = _bin_of(lags, w)
        np.clip(bins, -k_max - 1, k_max + 1, out=bins)
        inside = np.abs(bins) <= k_max
        counts += np.bincount(
            (bins[inside] + k_max).astype(np.intp), minlength=2 * k_max + 1
        )
        start = stop
    return CorrelationHistogram(
        bin_width_ps=w,
        max_lag_ps=max_lag_ps,
        counts=counts,
        n_a=len(a),
        n_b=len(b),
        duration_ps=duration,
    )


def autocorrelate_hbt(
    stream, splitter_seed: int, bin_width_ps: int, max_lag_ps: int
) -> CorrelationHistogram:
    """Autocorrelation via a virtual 50/50 beamsplitter: tags are split
    deterministically per ``splitter_seed`` into two sub-streams which are
    then cross-correlated.  Avoids counting a tag against itself."""
    arr = _require_sorted(stream, "stream")
    rng = np.random.Generator(np.random.PCG64(splitter_seed))
    to_b = rng.random(len(arr)) < 0.5
    return cross_correlate(arr[~to_b], arr[to_b], bin_width_ps, max_lag_ps)


def extract_peaks(
    hist: CorrelationHistogram, rep_period_ps: int, window_ps: int
) -> PeakSeries:
    """Sum histogram bins within +-window_ps of every comb position
    k * rep_period_ps that lies fully inside the histogram span.

    Requires bin_width_ps to divide rep_period_ps so the comb aligns with
    bin centers.
    """
    if 2 * window_ps > rep_period_ps:
        raise ValueError("window_ps must not exceed half the repetition period")
    w = hist.bin_width_ps
    if rep_period_ps % w != 0:
        raise ValueError(
            f"bin width {w} ps does not divide the repetition period "
            f"{rep_period_ps} ps; choose a divisor so peaks align with bins"
        )
    bins_per_rep = rep_period_ps // w
    half_bins = window_ps // w
    k_max_peak = (hist.k_max - half_bins) // bins_per_rep
    if k_max_peak < 0:
        raise ValueError("histogram span too small for even the central peak")
    peaks: dict[int, int] = {}
    for k in range(-k_max_peak, k_max_peak + 1):
        center = k * bins_per_rep
        window = hist.counts[
            center - half_bins + hist.k_max : center + half_bins + hist.k_max + 1
        ]
        peaks[k] = int(window.sum())
    return PeakSeries(
        rep_period_ps=rep_period_ps, window_ps=window_ps, peak_counts=peaks
    )


def g2_from_peaks(peaks: PeakSeries) -> G2Estimate:
    """Center peak over the mean of the side peaks.

    sigma propagates Poisson errors on the raw counts:
    g2 * sqrt(1/center + 1/(n_side * side_mean)).  A zero side mean is
    reported as an infinite estimate, never a silent division.
    """
    side = peaks.side_indices
    if len(side) < 2:
        raise ValueError("need at least 2 side peaks to normalize g2")
    center = peaks.peak_counts[0]
    side_counts = [peaks.peak_counts[k] for k in side]
    side_mean = sum(side_counts) / len(side_counts)
    if side_mean == 0:
        return G2Estimate(
            g2=math.inf,
            sigma=math.inf,
            center_count=center,
            side_mean=0.0,
            n_side_peaks=len(side_counts),
        )
    g2 = center / side_mean
    sigma = (
        g2 * math.sqrt(1.0 / center + 1.0 / (len(side_counts) * side_mean))
        if center > 0
        else math.inf
    )
    return G2Estimate(
        g2=g2,
        sigma=sigma,
        center_count=center,
        side_mean=side_mean,
        n_side_peaks=len(side_counts),
    )


def cauchy_schwarz_factor(g2_sas: float, g2_ss: float, g2_asas: float) -> float:
    """R = g2_sas^2 / (g2_ss * g2_asas); R > 1 cannot be produced by
    classical fields."""
    if g2_sas <= 0 or g2_ss <= 0 or g2_asas <= 0:
        raise ValueError("all correlation inputs must be positive")
    return g2_sas**2 / (g2_ss * g2_asas)
