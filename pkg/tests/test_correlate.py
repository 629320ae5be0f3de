import numpy as np
import pytest

import biphoton_sync as bs
from biphoton_sync.errors import NoPeakError, UsageError, ValidationError

from helpers import brute_force_counts, make_stream


class TestCrossCorrelate:
    def test_single_pair_lands_in_zero_bin(self):
        s1 = make_stream([0])
        s2 = make_stream([0])
        h = bs.cross_correlate(s1, s2, bin_width_ps=3.0, window_ps=(-9.0, 9.0))
        assert h.coincidences == 1
        hit = int(np.argmax(h.counts))
        lo = h.tau_min_fs + hit * h.bin_fs
        assert lo <= 0 < lo + h.bin_fs

    def test_two_by_one_enumeration(self):
        s1 = make_stream([0, 100_000])
        s2 = make_stream([50_000])
        h = bs.cross_correlate(s1, s2, bin_width_ps=3.0, window_ps=(-60.0, 60.0))
        assert h.coincidences == 2
        nonzero = np.nonzero(h.counts)[0]
        lows = h.tau_min_fs + nonzero * h.bin_fs
        assert any(lo <= -50_000 < lo + h.bin_fs for lo in lows)
        assert any(lo <= 50_000 < lo + h.bin_fs for lo in lows)

    def test_matches_brute_force_exactly(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            n1, n2 = rng.integers(1, 1000, 2)
            t1 = np.sort(rng.integers(0, 50_000_000, n1))
            t2 = np.sort(rng.integers(0, 50_000_000, n2))
            h = bs.cross_correlate(make_stream(t1), make_stream(t2))
            oracle = brute_force_counts(
                t1, t2, h.bin_fs, h.tau_min_fs, h.counts.size
            )
            assert np.array_equal(h.counts, oracle)
            assert h.coincidences == oracle.sum()

    def test_unsorted_array_rejected(self):
        with pytest.raises(UsageError):
            bs.cross_correlate(np.array([5, 1], dtype=np.int64), np.array([0], dtype=np.int64))

    def test_window_narrower_than_bin_rejected(self):
        with pytest.raises(ValidationError):
            bs.cross_correlate(make_stream([0]), make_stream([0]), 3.0, (0.0, 1.0))

    def test_shift_covariance_bin_exact(self):
        rng = np.random.default_rng(32)
        t1 = np.sort(rng.integers(0, 10_000_000, 300))
        t2 = np.sort(rng.integers(0, 10_000_000, 300))
        s1, s2 = make_stream(t1), make_stream(t2)
        delta = 300.0  # multiple of the 3 ps bin
        shifted = bs.cross_correlate(s1, bs.shift_stream(s2, delta), 3.0, (-3000.0, 3000.0))
        reference = bs.cross_correlate(s1, s2, 3.0, (-3000.0 + delta, 3000.0 + delta))
        assert np.array_equal(shifted.counts, reference.counts)

    def test_mirror_symmetry_interior_bins(self):
        rng = np.random.default_rng(33)
        t1 = np.sort(rng.integers(0, 5_000_000, 400))
        t2 = np.sort(rng.integers(0, 5_000_000, 400))
        h12 = bs.cross_correlate(make_stream(t1), make_stream(t2), 0.001, (-900.0, 900.0))
        h21 = bs.cross_correlate(make_stream(t2), make_stream(t1), 0.001, (-900.0, 900.0))
        # Half-open bins make the two boundary bins asymmetric; interiors mirror.
        assert np.array_equal(h12.counts[1:], h21.counts[1:][::-1])

    def test_total_conserved_under_refinement(self):
        rng = np.random.default_rng(34)
        t1 = np.sort(rng.integers(0, 5_000_000, 500))
        t2 = np.sort(rng.integers(0, 5_000_000, 500))
        s1, s2 = make_stream(t1), make_stream(t2)
        window = (-30.0, 30.0)
        totals = {
            bin_ps: bs.cross_correlate(s1, s2, bin_ps, window).coincidences
            for bin_ps in (6.0, 3.0, 2.0, 1.0)
        }
        assert len(set(totals.values())) == 1

    def test_merge_is_binwise_sum(self):
        rng = np.random.default_rng(35)
        t1 = np.sort(rng.integers(0, 20_000_000, 800))
        t2 = np.sort(rng.integers(0, 20_000_000, 800))
        cut1, cut2 = np.searchsorted(t1, 10_000_000), np.searchsorted(t2, 10_000_000)
        whole = bs.cross_correlate(make_stream(t1), make_stream(t2))
        first = bs.cross_correlate(make_stream(t1[:cut1]), make_stream(t2))
        second = bs.cross_correlate(make_stream(t1[cut1:]), make_stream(t2))
        merged = first + second
        assert np.array_equal(merged.counts, whole.counts)
        assert merged.coincidences == whole.coincidences

    def test_merge_rejects_mismatched_geometry(self):
        h1 = bs.cross_correlate(make_stream([0]), make_stream([0]), 3.0, (-9.0, 9.0))
        h2 = bs.cross_correlate(make_stream([0]), make_stream([0]), 3.0, (-12.0, 12.0))
        with pytest.raises(UsageError):
            h1 + h2


def synthetic_histogram(shape_counts, *, bin_fs=3000, tau_min_fs=0, lattice_fs=1000):
    counts = np.asarray(shape_counts, dtype=np.int64)
    return bs.CorrelationHistogram(
        bin_fs=bin_fs,
        tau_min_fs=tau_min_fs,
        counts=counts,
        n1=int(counts.sum()),
        n2=int(counts.sum()),
        lattice_fs=lattice_fs,
    )


class TestFindPeaks:
    def test_single_rectangle(self):
        counts = np.zeros(201, dtype=np.int64)
        counts[90:111] = 500
        h = synthetic_histogram(counts)
        peaks = bs.find_peaks(h)
        assert len(peaks) == 1
        assert peaks[0].center_ps == pytest.approx(h.bin_positions_ps()[100], abs=1e-9)

    def test_main_and_satellite_ordering(self):
        x = np.arange(4000)
        main = 1000 * np.exp(-0.5 * ((x - 1000) / 80.0) ** 2)
        satellite = 300 * np.exp(-0.5 * ((x - 2700) / 80.0) ** 2)
        h = synthetic_histogram((main + satellite).astype(np.int64))
        peaks = bs.find_peaks(h, min_prominence=0.05)
        assert len(peaks) == 2
        assert peaks[0].height > peaks[1].height
        assert peaks[0].center_ps == pytest.approx(h.bin_positions_ps()[1000], abs=3.0)
        assert peaks[1].center_ps == pytest.approx(h.bin_positions_ps()[2700], abs=3.0)
        assert peaks[1].area_fraction / peaks[0].area_fraction == pytest.approx(0.3, rel=0.05)

    def test_flat_histogram_has_no_peak(self):
        with pytest.raises(NoPeakError):
            bs.find_peaks(synthetic_histogram(np.full(100, 7)))

    def test_all_zero_has_no_peak(self):
        with pytest.raises(NoPeakError):
            bs.find_peaks(synthetic_histogram(np.zeros(100, dtype=np.int64)))

    def test_gaussian_fwhm_annotation(self):
        x = np.arange(3000)
        sigma_bins = 100.0
        counts = (20000 * np.exp(-0.5 * ((x - 1500) / sigma_bins) ** 2)).astype(np.int64)
        h = synthetic_histogram(counts)
        peak = bs.find_peaks(h)[0]
        expected = 2.3548 * sigma_bins * h.bin_width_ps
        assert peak.fwhm_ps == pytest.approx(expected, rel=0.03)


class TestPeakCenter:
    def test_centroid_of_symmetric_peak_hits_construction_point(self):
        # Lattice positions: bins [a, a+3000) fs with 1 ps clock lattice hold
        # points {a, a+1000, a+2000}, mean a+1000.  With tau_min = 2731000 fs
        # bin 900 averages to exactly 5432000 fs = 5432 ps.
        x = np.arange(1801)
        counts = (50000 * np.exp(-0.5 * ((x - 900) / 60.0) ** 2)).astype(np.int64)
        h = synthetic_histogram(counts, tau_min_fs=2_731_000, lattice_fs=1000)
        assert h.bin_positions_ps()[900] == pytest.approx(5432.0, abs=1e-9)
        peak = bs.find_peaks(h)[0]
        est = bs.peak_center(h, peak)
        assert est.center_ps == pytest.approx(5432.0, abs=0.05)
        assert est.sigma_ps > 0

    def test_single_bin_peak_returns_that_position(self):
        counts = np.zeros(31, dtype=np.int64)
        counts[15] = 100
        h = synthetic_histogram(counts)
        peak = bs.find_peaks(h)[0]
        est = bs.peak_center(h, peak)
        assert est.center_ps == pytest.approx(h.bin_positions_ps()[15], abs=1e-9)

    def test_model_fit_requires_context(self):
        counts = np.zeros(31, dtype=np.int64)
        counts[15] = 100
        h = synthetic_histogram(counts)
        peak = bs.find_peaks(h)[0]
        with pytest.raises(UsageError):
            bs.peak_center(h, peak, method=bs.CenterMethod.MODEL_FIT)

    def test_model_fit_recovers_synthetic_truth(self):
        # Forward-generate a histogram from the far-field model itself, then
        # check the fit finds the center and the dispersion-sum scale.
        rng = np.random.default_rng(77)
        spectral = bs.SpectralModel(
            kind=bs.PhaseMatching.TYPE_II, length_mm=8.0, gvm_fs_per_mm=100.0
        )
        broadening = bs.BroadeningModel.from_fiber_paths(
            2.76e-28, 1.5, 2.96e-28, 1.5, jitter_fwhm_ps=450.0
        )
        density = bs.farfield_g2(spectral, broadening)
        center_true = 43068.0
        n = 200_000
        taus = bs.sample_pair_delay(density, rng, size=n) + center_true
        bins = np.arange(40_000.0, 46_000.0, 3.0)
        counts, _ = np.histogram(taus, bins=bins)
        h = bs.CorrelationHistogram(
            bin_fs=3000,
            tau_min_fs=40_000_000,
            counts=counts.astype(np.int64),
            n1=n,
            n2=n,
            lattice_fs=1,
        )
        peak = bs.find_peaks(h)[0]
        ctx = bs.FitContext(
            spectral=spectral,
            signal_path_km=1.5,
            idler_path_km=1.5,
            jitter_fwhm_ps=450.0,
        )
        est = bs.peak_center(h, peak, method=bs.CenterMethod.MODEL_FIT, fit_context=ctx)
        assert est.fit is not None
        assert est.center_ps == pytest.approx(center_true, abs=3.0)
        fitted_b = (est.fit.gvd_signal_s2_per_cm + est.fit.gvd_idler_s2_per_cm) * 1.5e5
        # abs=0: approx's default absolute tolerance would swallow 1e-23.
        assert fitted_b == pytest.approx(8.58e-23, rel=0.05, abs=0.0)


class TestTrackOffset:
    def run_pair(self, drift_ps_per_s, duration_s=30.0, offset_step=None):
        from dataclasses import replace

        scenario = bs.benchtop_scenario(
            rng_seed=404, duration_s=duration_s, pair_rate_per_s=4e3
        )
        scenario = replace(
            scenario,
            clock1=bs.ClockModel(offset_ps=40369.0, drift_ps_per_s=drift_ps_per_s, resolution_ps=3),
        )
        return bs.simulate_run(scenario)

    def test_constant_series_without_drift(self):
        s1, s2 = self.run_pair(0.0)
        series = bs.track_offset(s1, s2, window_length_s=5.0, stride_s=5.0)
        centers = [p.center_ps for p in series if p.center_ps is not None]
        assert len(centers) >= 5
        assert np.ptp(centers) < 15.0
        slope = np.polyfit([p.window_start_s for p in series], centers, 1)[0]
        assert abs(slope) < 0.5

    def test_drift_appears_as_slope(self):
        drift = 10.0
        s1, s2 = self.run_pair(drift)
        series = bs.track_offset(s1, s2, window_length_s=5.0, stride_s=5.0)
        xs = np.array([p.window_start_s for p in series])
        ys = np.array([p.center_ps for p in series])
        assert not any(y is None for y in ys)
        slope = np.polyfit(xs, ys.astype(float), 1)[0]
        assert slope == pytest.approx(drift, abs=1.5)

    def test_offset_step_detected(self):
        s1, s2 = self.run_pair(0.0, duration_s=20.0)
        step_ps = 120.0
        cut = int(10 * 1e15)
        idx = np.searchsorted(s1.timestamps_fs, cut)
        stepped = np.concatenate(
            [s1.timestamps_fs[:idx], s1.timestamps_fs[idx:] + int(step_ps * 1000)]
        )
        s1b = bs.TagStream(
            clock_id=s1.clock_id,
            swap_state=s1.swap_state,
            resolution_ps=s1.resolution_ps,
            duration_s=s1.duration_s,
            timestamps_fs=stepped,
            channels=s1.channels,
        )
        series = bs.track_offset(s1b, s2, window_length_s=2.0, stride_s=2.0)
        centers = np.array([p.center_ps for p in series], dtype=float)
        early = centers[:4].mean()
        late = centers[-4:].mean()
        assert late - early == pytest.approx(step_ps, abs=10.0)

    def test_disjoint_windows_marked_as_gaps(self):
        # Stream 2 only overlaps the first half of stream 1.
        s1, s2 = self.run_pair(0.0, duration_s=20.0)
        half = np.searchsorted(s2.timestamps_fs, int(8 * 1e15))
        s2b = bs.TagStream(
            clock_id=s2.clock_id,
            swap_state=s2.swap_state,
            resolution_ps=s2.resolution_ps,
            duration_s=s2.duration_s,
            timestamps_fs=np.concatenate(
                [s2.timestamps_fs[:half], s2.timestamps_fs[-1:] + 12_000_000_000]
            ),
            channels=s2.channels[: half + 1],
        )
        series = bs.track_offset(s1, s2b, window_length_s=2.0, stride_s=2.0)
        assert any(p.center_ps is None for p in series)
        assert any(p.center_ps is not None for p in series)

    def test_streams_shorter_than_window_rejected(self):
        s1, s2 = self.run_pair(0.0, duration_s=5.0)
        with pytest.raises(UsageError):
            bs.track_offset(s1, s2, window_length_s=100.0, stride_s=10.0)
