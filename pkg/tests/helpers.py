"""Shared builders for the test suite."""

from dataclasses import replace

import numpy as np

import biphoton_sync as bs


def make_stream(timestamps_fs, *, clock_id=1, swap=bs.SwapState.PLATE0, resolution_ps=3,
                duration_s=1, channel=bs.CHANNEL_D1):
    ts = np.asarray(sorted(int(t) for t in timestamps_fs), dtype=np.int64)
    return bs.TagStream(
        clock_id=clock_id,
        swap_state=swap,
        resolution_ps=resolution_ps,
        duration_s=duration_s,
        timestamps_fs=ts,
        channels=np.full(ts.size, channel, dtype=np.uint8),
    )


def noiseless_scenario(swap=bs.SwapState.PLATE0, *, rng_seed=7, duration_s=5.0,
                       pair_rate_per_s=5e3, offset_ps=40369.0):
    """Benchtop geometry with every stochastic width switched off: a 1 fs
    correlation width, no fiber dispersion, no jitter, no darks, unit
    efficiency.  Differences are then deterministic up to quantization."""
    base = bs.benchtop_scenario(swap, rng_seed=rng_seed, duration_s=duration_s,
                                pair_rate_per_s=pair_rate_per_s, offset_ps=offset_ps)
    det = bs.DetectorModel(jitter_fwhm_ps=0.0, efficiency=1.0, dark_rate_per_s=0.0,
                           dead_time_ps=0.0)
    spectral = bs.SpectralModel(kind=bs.PhaseMatching.TYPE_II, length_mm=8.0,
                                gvm_fs_per_mm=0.125)
    fiber = replace(base.fiber1, gvd_signal_s2_per_cm=0.0, gvd_idler_s2_per_cm=0.0,
                    side_modes=())
    return replace(base, spectral=spectral, det1=det, det2=det, fiber1=fiber, fiber2=fiber)


def brute_force_counts(t1_fs, t2_fs, bin_fs, lo_fs, nbins):
    """O(n1*n2) oracle for the correlation histogram."""
    t1 = np.asarray(t1_fs, dtype=np.int64)
    t2 = np.asarray(t2_fs, dtype=np.int64)
    d = (t1[:, None] - t2[None, :]).ravel()
    d = d[(d >= lo_fs) & (d < lo_fs + nbins * bin_fs)]
    return np.bincount((d - lo_fs) // bin_fs, minlength=nbins).astype(np.int64)


def bisect_root(fn, lo, hi, iterations=200):
    """Bisection for fn decreasing through zero in [lo, hi]."""
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
