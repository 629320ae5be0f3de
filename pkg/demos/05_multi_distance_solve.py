#!/usr/bin/env python3
"""Solving dispersion and an unknown distance at the same time.

When neither the fiber dispersion nor the remote path length is known,
repeating the swap measurement at several known laboratory path lengths
turns the problem into a straight line: slope = dispersion, intercept over
slope = remote length.
"""

from dataclasses import replace

import biphoton_sync as bs
from biphoton_sync.channel import propagation_delay, route

R2_VALUES = (0.5, 1.0, 2.0, 3.0)

points = []
for r2 in R2_VALUES:
    per_swap = {}
    for swap in (bs.SwapState.PLATE0, bs.SwapState.PLATE45):
        scenario = bs.benchtop_scenario(swap, rng_seed=1618, duration_s=25.0)
        scenario = replace(scenario, fiber2=replace(scenario.fiber2, length_km=r2))
        s1, s2 = bs.simulate_run(scenario)
        routing = route(swap)
        expected = propagation_delay(scenario.fiber1, routing.d1) - propagation_delay(
            scenario.fiber2, routing.d2
        )
        per_swap[swap] = bs.MeasurementResult.from_streams(
            s1, s2, r2_km=r2, window_ps=(expected - 1e6, expected + 1e6)
        )
    delta = bs.delta_minus(per_swap[bs.SwapState.PLATE0], per_swap[bs.SwapState.PLATE45])
    points.append((r2, delta.value, delta.sigma))
    print("r2 = %.1f km: swap difference %9.2f +/- %.2f ps" % (r2, delta.value, delta.sigma))

solution = bs.solve_multi_r2(points)
d, r1 = solution.dispersion_ps_per_km, solution.r1_km
print("\njoint solve over %d path lengths:" % len(points))
print("  dispersion = %8.2f +/- %.2f ps/km   (true 1799.90)" % (d.value, d.sigma))
print("  r1         = %8.4f +/- %.4f km      (true 1.5000)" % (r1.value, r1.sigma))
