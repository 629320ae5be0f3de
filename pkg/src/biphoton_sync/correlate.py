"""Cross-correlation of tag streams into t1 - t2 histograms, peak detection,
and model fitting of the broadened correlation shape.

The histogram is built by a merge-style sweep over the two sorted streams:
for each tag in stream 1 the matching window of stream 2 advances
monotonically, so the cost is linear in tags plus matches.  Bins are
half-open [lo, hi) on the integer femtosecond grid, which makes shift
covariance and refinement properties exact rather than approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
import scipy.optimize
import scipy.signal

from .errors import (
    FitError,
    NoPeakError,
    ResourceLimitError,
    UsageError,
    ValidationError,
)
from .spdc import (
    GAUSSIAN_FWHM_PER_SIGMA,
    SpectralModel,
    spectral_amplitude,
)
from .timetags import FS_PER_PS, TagStream

_CHUNK = 1 << 16
_MAX_CHUNK_MATCHES = 1 << 27
_MATCH_GUARD = (1 << 63) - 1


@dataclass(frozen=True, eq=False)
class CorrelationHistogram:
    """Counts of pair time differences t1 - t2 in half-open bins.

    Bin geometry lives on the integer femtosecond grid (bin_fs wide starting
    at tau_min_fs); counts are int64 with a match guard keeping totals far
    from overflow.  Histograms over the same geometry form a monoid under
    addition, so shards can be correlated independently and merged.

    lattice_fs records the spacing of the grid the differences actually
    live on (the gcd of the two clocks' quantization steps).  Quantized
    tags rarely sit at the geometric bin center, so center and width
    estimates use bin_positions_ps(), the mean lattice position per bin.
    """

    bin_fs: int
    tau_min_fs: int
    counts: np.ndarray
    n1: int
    n2: int
    lattice_fs: int = 1

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValidationError("counts must be a nonempty 1-d array")
        if self.bin_fs <= 0 or self.lattice_fs <= 0:
            raise ValidationError("bin width and lattice spacing must be positive")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def bin_width_ps(self) -> float:
        return self.bin_fs / FS_PER_PS

    @property
    def tau_min_ps(self) -> float:
        return self.tau_min_fs / FS_PER_PS

    @property
    def tau_max_ps(self) -> float:
        return (self.tau_min_fs + self.counts.size * self.bin_fs) / FS_PER_PS

    @property
    def coincidences(self) -> int:
        return int(self.counts.sum())

    def bin_centers_ps(self) -> np.ndarray:
        edges = self.tau_min_fs + np.arange(self.counts.size, dtype=np.int64) * self.bin_fs
        return (edges + 0.5 * self.bin_fs) / FS_PER_PS

    def bin_positions_ps(self) -> np.ndarray:
        """Mean position of the difference lattice inside each bin."""
        g = self.lattice_fs
        lo = self.tau_min_fs + np.arange(self.counts.size, dtype=np.int64) * self.bin_fs
        if g <= 1:
            return (lo + 0.5 * (self.bin_fs - 1)) / FS_PER_PS
        first = -((-lo) // g) * g
        last = ((lo + self.bin_fs - 1) // g) * g
        empty = first > last
        mid = 0.5 * (first + last)
        geometric = lo + 0.5 * self.bin_fs
        return np.where(empty, geometric, mid) / FS_PER_PS

    def __add__(self, other: "CorrelationHistogram") -> "CorrelationHistogram":
        if not isinstance(other, CorrelationHistogram):
            return NotImplemented
        if (
            self.bin_fs != other.bin_fs
            or self.tau_min_fs != other.tau_min_fs
            or self.counts.size != other.counts.size
            or self.lattice_fs != other.lattice_fs
        ):
            raise UsageError("cannot merge histograms with different bin geometry")
        return CorrelationHistogram(
            bin_fs=self.bin_fs,
            tau_min_fs=self.tau_min_fs,
            counts=self.counts + other.counts,
            n1=self.n1 + other.n1,
            n2=self.n2 + other.n2,
            lattice_fs=self.lattice_fs,
        )


def _as_sorted_fs(stream) -> np.ndarray:
    if isinstance(stream, TagStream):
        return stream.timestamps_fs
    arr = np.asarray(stream)
    if arr.dtype.kind not in "iu":
        raise UsageError("tag input must be integer femtoseconds")
    arr = np.ascontiguousarray(arr, dtype=np.int64)
    if arr.ndim != 1:
        raise UsageError("tag input must be one-dimensional")
    if arr.size > 1 and np.any(np.diff(arr) < 0):
        raise UsageError("tag timestamps must be sorted nondecreasing")
    return arr


def cross_correlate(
    s1,
    s2,
    bin_width_ps: float = 3.0,
    window_ps: tuple[float, float] = (-50_000.0, 50_000.0),
    lattice_fs: int | None = None,
) -> CorrelationHistogram:
    """Histogram all pair differences t1 - t2 falling inside the window.

    Accepts TagStreams or sorted int64 femtosecond arrays.  The window is
    [tau_min, tau_max) in ps; tau_max is stretched up to the next full bin.
    lattice_fs declares the quantization grid the differences live on; by
    default it is inferred from the streams' clock resolutions (1 fs for
    raw arrays).
    """
    if lattice_fs is None:
        if isinstance(s1, TagStream) and isinstance(s2, TagStream):
            lattice_fs = math.gcd(s1.resolution_ps * FS_PER_PS, s2.resolution_ps * FS_PER_PS)
        else:
            lattice_fs = 1
    t1 = _as_sorted_fs(s1)
    t2 = _as_sorted_fs(s2)
    bin_fs = int(round(bin_width_ps * FS_PER_PS))
    if bin_fs <= 0 or abs(bin_fs - bin_width_ps * FS_PER_PS) > 1e-6:
        raise ValidationError("bin width must be a positive whole number of femtoseconds")
    lo_fs = int(round(window_ps[0] * FS_PER_PS))
    hi_fs = int(round(window_ps[1] * FS_PER_PS))
    if hi_fs - lo_fs < bin_fs:
        raise ValidationError("window must be at least one bin wide")
    nbins = -((lo_fs - hi_fs) // bin_fs)  # ceil division
    hi_fs = lo_fs + nbins * bin_fs

    counts = np.zeros(nbins, dtype=np.int64)
    total = 0
    for start in range(0, t1.size, _CHUNK):
        t1c = t1[start : start + _CHUNK]
        # tau in [lo, hi)  <=>  t2 in (t1 - hi, t1 - lo]
        left = np.searchsorted(t2, t1c - hi_fs, side="right")
        right = np.searchsorted(t2, t1c - lo_fs, side="right")
        mult = right - left
        chunk_total = int(mult.sum())
        if chunk_total == 0:
            continue
        total += chunk_total
        if total > _MATCH_GUARD:
            raise ResourceLimitError("match count would overflow the 64-bit counter")
        for lo_i, hi_i in _split_by_matches(mult, _MAX_CHUNK_MATCHES):
            m = mult[lo_i:hi_i]
            tot = int(m.sum())
            if tot == 0:
                continue
            starts = left[lo_i:hi_i]
            offsets = np.arange(tot, dtype=np.int64) - np.repeat(
                np.concatenate(([0], np.cumsum(m)[:-1])), m
            )
            idx2 = np.repeat(starts, m) + offsets
            diffs = np.repeat(t1c[lo_i:hi_i], m) - t2[idx2]
            bins = (diffs - lo_fs) // bin_fs
            counts += np.bincount(bins, minlength=nbins)
    return CorrelationHistogram(
        bin_fs=bin_fs,
        tau_min_fs=lo_fs,
        counts=counts,
        n1=int(t1.size),
        n2=int(t2.size),
        lattice_fs=lattice_fs,
    )


def _split_by_matches(mult: np.ndarray, cap: int):
    """Split a chunk into index ranges whose match totals stay under cap."""
    csum = np.cumsum(mult)
    lo = 0
    while lo < mult.size:
        base = csum[lo - 1] if lo else 0
        hi = int(np.searchsorted(csum, base + cap, side="right"))
        hi = max(hi, lo + 1)
        yield lo, hi
        lo = hi


@dataclass(frozen=True)
class Peak:
    """One detected histogram peak: center estimate, smoothed height,
    interpolated FWHM, share of all coincidences, and the bin index range
    (inclusive) between its half-max crossings."""

    center_ps: float
    height: float
    fwhm_ps: float
    area_fraction: float
    support: tuple[int, int] = field(compare=False, default=(0, 0))


def _moving_average(y: np.ndarray, width: int) -> np.ndarray:
    width = min(width if width % 2 else width + 1, y.size if y.size % 2 else y.size - 1)
    width = max(width, 1)
    return np.convolve(y, np.ones(width) / width, mode="same")


def find_peaks(hist: CorrelationHistogram, min_prominence: float = 0.05) -> list[Peak]:
    """Locate peaks in a histogram after 3-bin moving-average smoothing.

    Keeps local maxima whose topographic prominence is at least
    min_prominence times the smoothed global maximum; annotates each with an
    interpolated FWHM and its coincidence share; returns them sorted by
    height descending, ties broken by center ascending.  Raises NoPeakError
    when nothing rises above the background floor.

    For peaks many bins wide, the half-max crossings are re-measured on a
    curve re-smoothed to ~1/8 of the preliminary width; otherwise the
    walk-out search stops at the first shot-noise dip and reads the width
    low.
    """
    raw = hist.counts.astype(np.float64)
    smooth = _moving_average(raw, 3)
    background = float(np.median(smooth))
    # Poisson floor: isolated accidentals are not peaks.
    floor = background + 3.0 * np.sqrt(background + 1.0)
    top = float(smooth.max())
    if top <= 0 or top <= background:
        raise NoPeakError("no bin rises above the background floor")

    idx, _props = scipy.signal.find_peaks(smooth, prominence=min_prominence * top)
    idx = idx[smooth[idx] >= floor]
    if idx.size == 0:
        raise NoPeakError("no peak exceeds the prominence threshold")

    positions = hist.bin_positions_ps()
    total = hist.coincidences
    step = hist.bin_width_ps
    peaks = []
    for p in idx:
        y = smooth
        bg = background
        half = bg + 0.5 * (y[p] - bg)
        li, left = _walk_crossing(y, positions, p, half, -1)
        ri, right = _walk_crossing(y, positions, p, half, +1)
        if ri - li + 1 >= 12:
            y = _moving_average(raw, max((ri - li + 1) // 8, 3))
            bg = float(np.median(y))
            segment = y[li : ri + 1]
            flat = np.nonzero(segment >= segment.max() * (1 - 1e-12))[0]
            p = li + int(flat[flat.size // 2])
            half = bg + 0.5 * (y[p] - bg)
            li, left = _walk_crossing(y, positions, p, half, -1)
            ri, right = _walk_crossing(y, positions, p, half, +1)
        area = int(raw[li : ri + 1].sum())
        peaks.append(
            Peak(
                center_ps=float(positions[p]),
                height=float(y[p]),
                fwhm_ps=max(float(right - left), step),
                area_fraction=(area / total) if total else 0.0,
                support=(int(li), int(ri)),
            )
        )
    peaks.sort(key=lambda pk: (-pk.height, pk.center_ps))
    # Shot noise can raise several local maxima on one physical peak; maxima
    # whose half-max supports overlap an already-accepted peak are duplicates.
    accepted: list[Peak] = []
    for pk in peaks:
        lo, hi = pk.support
        if all(hi < a.support[0] or lo > a.support[1] for a in accepted):
            accepted.append(pk)
    return accepted


def _walk_crossing(y, x, start: int, level: float, direction: int):
    """March from a peak until y drops below level; interpolate the crossing.
    Returns (last index at/above level, crossing coordinate)."""
    i = start
    while 0 <= i + direction < y.size and y[i + direction] >= level:
        i += direction
    j = i + direction
    if j < 0 or j >= y.size:
        return i, float(x[i])  # ran off the histogram edge
    frac = (y[i] - level) / (y[i] - y[j])
    return i, float(x[i] + frac * (x[j] - x[i]))


class CenterMethod(Enum):
    CENTROID = "centroid"
    MODEL_FIT = "model_fit"


@dataclass(frozen=True)
class FitContext:
    """Everything the shape fit needs besides the histogram: the crystal
    model, the two path lengths, the combined jitter, and starting values
    for the two fiber dispersion coefficients (s^2/cm).

    With equal path lengths the data only pins the weighted sum of the two
    dispersion coefficients; gvd_ridge breaks that exact degeneracy by
    penalizing relative deviation from the starting values, so the split
    stays near the nominal coefficients while the sum follows the data.
    """

    spectral: SpectralModel
    signal_path_km: float
    idler_path_km: float
    jitter_fwhm_ps: float
    gvd_init_s2_per_cm: tuple[float, float] = (2.8e-28, 2.8e-28)
    gvd_ridge: float = 100.0


@dataclass(frozen=True)
class FitResult:
    center_ps: float
    amplitude: float
    background: float
    gvd_signal_s2_per_cm: float
    gvd_idler_s2_per_cm: float
    chi2: float
    n_eval: int


class CenterEstimate(NamedTuple):
    center_ps: float
    sigma_ps: float
    fit: FitResult | None = None


def peak_center(
    hist: CorrelationHistogram,
    peak: Peak,
    method: CenterMethod = CenterMethod.CENTROID,
    fit_context: FitContext | None = None,
) -> CenterEstimate:
    """Refine a peak's center.

    CENTROID: count-weighted mean over the peak's half-max support, with
    sigma = fwhm / (2.355 sqrt(N)).  MODEL_FIT: least-squares fit of the
    far-field correlation shape convolved with jitter; free parameters are
    center, amplitude, background, and the two fiber dispersion
    coefficients.
    """
    if method is CenterMethod.CENTROID:
        return _centroid(hist, peak)
    if method is CenterMethod.MODEL_FIT:
        if fit_context is None:
            raise UsageError("MODEL_FIT requires a FitContext")
        return _model_fit(hist, peak, fit_context)
    raise UsageError(f"unknown center method {method!r}")


def _centroid(hist: CorrelationHistogram, peak: Peak) -> CenterEstimate:
    # Iterate with a symmetric window re-centered on the running centroid:
    # this removes the first-order sensitivity to where the noisy half-max
    # crossings happened to land.  The window spans one FWHM either side of
    # the center; truncating at half max instead would amplify the counting
    # noise ~2.5x, because the edge density there is half the peak density.
    # Edge bins enter fractionally so the window boundary is continuous
    # rather than jumping by whole bins.  Moment arms use the lattice
    # positions of the quantized differences, not the geometric centers.
    counts = hist.counts.astype(np.float64)
    step = hist.bin_width_ps
    positions = hist.bin_positions_ps()
    lo, hi = peak.support
    center = 0.5 * (positions[lo] + positions[hi])
    half = peak.fwhm_ps
    n = 0.0
    for _ in range(4):
        overlap_lo = np.maximum(positions - 0.5 * step, center - half)
        overlap_hi = np.minimum(positions + 0.5 * step, center + half)
        frac = np.clip((overlap_hi - overlap_lo) / step, 0.0, 1.0)
        weights = frac * counts
        n = weights.sum()
        if n <= 0:
            raise NoPeakError("peak support holds no counts")
        arms = np.where(frac < 1.0, 0.5 * (overlap_lo + overlap_hi), positions)
        center = float(np.sum(weights * arms) / n)
    sigma = peak.fwhm_ps / (GAUSSIAN_FWHM_PER_SIGMA * np.sqrt(n))
    return CenterEstimate(center_ps=center, sigma_ps=float(sigma))


def _shape_on_grid(ctx: FitContext, tau_ps, center_ps, gvd_s, gvd_i, step_ps):
    """Far-field shape (peak-normalized) on a regular grid of bin centers."""
    b_ps2 = (gvd_s * ctx.signal_path_km + gvd_i * ctx.idler_path_km) * 1e5 * 1e24
    amp = spectral_amplitude(ctx.spectral, (tau_ps - center_ps) / b_ps2)
    shape = np.asarray(amp) ** 2
    if ctx.jitter_fwhm_ps > 0:
        sigma = ctx.jitter_fwhm_ps / GAUSSIAN_FWHM_PER_SIGMA
        half = max(int(np.ceil(4 * sigma / step_ps)), 1)
        x = np.arange(-half, half + 1) * step_ps
        kernel = np.exp(-0.5 * (x / sigma) ** 2)
        shape = np.convolve(shape, kernel / kernel.sum(), mode="same")
    top = shape.max()
    return shape / top if top > 0 else shape


def _model_fit(hist: CorrelationHistogram, peak: Peak, ctx: FitContext) -> CenterEstimate:
    centers = hist.bin_positions_ps()
    lo, hi = peak.support
    span = max(3 * (hi - lo + 1), 16)
    mid = (lo + hi) // 2
    lo_f = max(mid - span, 0)
    hi_f = min(mid + span, hist.counts.size - 1)
    tau = centers[lo_f : hi_f + 1]
    data = hist.counts[lo_f : hi_f + 1].astype(np.float64)
    weights = 1.0 / np.maximum(data, 1.0)
    step = hist.bin_width_ps

    g0_s, g0_i = ctx.gvd_init_s2_per_cm
    background0 = float(np.median(data))
    bg_scale = background0 if background0 > 0 else 1.0
    amplitude0 = max(float(data.max()) - background0, 1.0)
    # Parameters scaled to O(1): center in units of fwhm, gvd in 1e-28 s^2/cm.
    scale_c = max(peak.fwhm_ps, step)

    def data_chi2(theta):
        c, a, b, gs, gi = theta
        if gs <= 0 or gi <= 0 or a <= 0:
            return 1e300
        shape = _shape_on_grid(
            ctx, tau, peak.center_ps + c * scale_c, gs * 1e-28, gi * 1e-28, step
        )
        model = a * amplitude0 * shape + b * bg_scale
        return float(np.sum(weights * (data - model) ** 2))

    g0s_scaled, g0i_scaled = g0_s / 1e-28, g0_i / 1e-28

    def chi2(theta):
        value = data_chi2(theta)
        if value >= 1e300:
            return value
        gs, gi = theta[3], theta[4]
        split = ((gs - g0s_scaled) / g0s_scaled) ** 2 + ((gi - g0i_scaled) / g0i_scaled) ** 2
        return value + ctx.gvd_ridge * split

    theta0 = np.array([0.0, 1.0, 1.0, g0s_scaled, g0i_scaled])
    spread = np.array([0.1, 0.15, 0.5, 0.35, 0.35])
    best_fun = np.inf
    best_x = theta0
    n_eval = 0
    for _attempt in range(3):
        # Fresh, deliberately wide simplex each round: a collapsed simplex
        # cannot slide along the nearly flat dispersion-split direction.
        simplex = np.vstack([theta0, theta0 + np.diag(spread)])
        res = scipy.optimize.minimize(
            chi2, theta0, method="Nelder-Mead",
            options={
                "maxiter": 500,
                "xatol": 1e-6,
                "fatol": 1e-9,
                "adaptive": True,
                "initial_simplex": simplex,
            },
        )
        n_eval += res.nfev
        improved = res.fun < best_fun * (1 - 1e-9)
        if res.fun < best_fun:
            best_fun, best_x = float(res.fun), res.x
        theta0 = res.x
        spread = spread * 0.3
        if res.success and not improved:
            break
    if not np.isfinite(best_fun) or best_fun >= 1e300:
        raise FitError("shape fit did not converge", last_chi2=best_fun)

    c, a, b, gs, gi = best_x
    center = float(peak.center_ps + c * scale_c)
    # Statistical center error, same estimator as the centroid path.
    n_peak = max(hist.counts[lo : hi + 1].sum(), 1)
    sigma = peak.fwhm_ps / (GAUSSIAN_FWHM_PER_SIGMA * np.sqrt(n_peak))
    fit = FitResult(
        center_ps=center,
        amplitude=float(a * amplitude0),
        background=float(b * bg_scale),
        gvd_signal_s2_per_cm=float(gs * 1e-28),
        gvd_idler_s2_per_cm=float(gi * 1e-28),
        chi2=data_chi2(best_x),
        n_eval=n_eval,
    )
    return CenterEstimate(center_ps=center, sigma_ps=float(sigma), fit=fit)


class TrackPoint(NamedTuple):
    window_start_s: float
    center_ps: float | None


def track_offset(
    s1: TagStream,
    s2: TagStream,
    window_length_s: float,
    stride_s: float,
    *,
    bin_width_ps: float = 3.0,
    corr_window_ps: tuple[float, float] = (-50_000.0, 50_000.0),
    min_prominence: float = 0.05,
) -> list[TrackPoint]:
    """Peak-center time series over sliding windows: the live view of how far
    the two clocks have drifted apart.  Windows with no usable peak yield a
    gap marker (center None).
    """
    if window_length_s <= 0 or stride_s <= 0:
        raise ValidationError("window length and stride must be positive")
    if len(s1) == 0 or len(s2) == 0:
        raise UsageError("both streams must contain tags")
    t1 = s1.timestamps_fs
    t2 = s2.timestamps_fs
    fs_per_s = FS_PER_PS * 1_000_000_000_000
    start_fs = min(int(t1[0]), int(t2[0]))
    end_fs = max(int(t1[-1]), int(t2[-1]))
    window_fs = int(window_length_s * fs_per_s)
    stride_fs = int(stride_s * fs_per_s)
    if end_fs - start_fs < window_fs:
        raise UsageError("streams are shorter than one window")
    # Stream-2 windows widen by the correlation span so edge pairs survive.
    margin = int(abs(corr_window_ps[0]) + abs(corr_window_ps[1])) * FS_PER_PS

    series = []
    w0 = start_fs
    while w0 + window_fs <= end_fs:
        a1, b1 = np.searchsorted(t1, [w0, w0 + window_fs])
        a2, b2 = np.searchsorted(t2, [w0 - margin, w0 + window_fs + margin])
        center = None
        if b1 > a1 and b2 > a2:
            hist = cross_correlate(
                t1[a1:b1],
                t2[a2:b2],
                bin_width_ps=bin_width_ps,
                window_ps=corr_window_ps,
                lattice_fs=math.gcd(s1.resolution_ps * FS_PER_PS, s2.resolution_ps * FS_PER_PS),
            )
            try:
                top = find_peaks(hist, min_prominence=min_prominence)[0]
                center = peak_center(hist, top).center_ps
            except NoPeakError:
                center = None
        series.append(TrackPoint(window_start_s=(w0 - start_fs) / fs_per_s, center_ps=center))
        w0 += stride_fs
    return series
