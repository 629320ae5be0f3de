#!/usr/bin/env python3
"""Coincidence histogram with intermodal satellites.

The fibers in the reference bench are single-mode at a longer wavelength
than the pair light, so higher-order modes travel too, arriving a few ns
late.  Simulating with two side modes on the detector-1 arm reproduces the
characteristic multi-peak histogram; each satellite's share of coincidences
tracks its mode amplitude.
"""

import biphoton_sync as bs

scenario = bs.benchtop_scenario(
    rng_seed=2026,
    duration_s=20.0,
    side_modes=((5_000.0, 0.30), (9_000.0, 0.10)),
)
print("simulating %.0f s with side modes (amp 0.3 @ +5 ns, 0.1 @ +9 ns)..." % scenario.duration_s)
s1, s2 = bs.simulate_run(scenario)
print("detector 1: %d tags, detector 2: %d tags" % (len(s1), len(s2)))

hist = bs.cross_correlate(s1, s2, bin_width_ps=3.0, window_ps=(20_000.0, 70_000.0))
peaks = bs.find_peaks(hist, min_prominence=0.03)
print("\n%d peaks over %d coincidences:" % (len(peaks), hist.coincidences))
main = peaks[0]
for i, peak in enumerate(peaks, 1):
    est = bs.peak_center(hist, peak)
    print(
        "  peak %d: center %9.1f ps (main %+7.1f ps), fwhm %5.0f ps, area share %.3f"
        % (i, est.center_ps, est.center_ps - main.center_ps, peak.fwhm_ps, peak.area_fraction)
    )

# Shares are integrated over each peak's half-max support, so compare the
# satellite/main ratios, which the support truncation cancels out of.
print("\nsatellite/main area ratios: measured %.3f and %.3f, mode amplitudes 0.300 and 0.100"
      % (peaks[1].area_fraction / main.area_fraction,
         peaks[2].area_fraction / main.area_fraction))

with open("side_peak_histogram.csv", "w") as fh:
    fh.write("bin_center_ps,counts\n")
    for center, count in zip(hist.bin_centers_ps(), hist.counts):
        if count:
            fh.write(f"{center:.1f},{int(count)}\n")
print("saved nonzero bins to side_peak_histogram.csv")
