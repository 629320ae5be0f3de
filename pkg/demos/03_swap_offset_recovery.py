#!/usr/bin/env python3
"""The full one-way synchronization protocol, end to end.

Clock 1 is deliberately wrong by 40.369 ns.  One run per wave-plate
position, one histogram per run, and the difference of the two peak centers
calibrates the fiber dispersion; substituting back solves the clock offset
to picoseconds without ever moving a clock.
"""

import biphoton_sync as bs

T0_TRUE = 40_369.0  # ps, injected offset of clock 1
INV_U_S = 4.9e6 + 1799.9  # ps/km at the signal wavelength
INV_U_I = 4.9e6

measurements = {}
for swap in (bs.SwapState.PLATE0, bs.SwapState.PLATE45):
    scenario = bs.benchtop_scenario(swap, rng_seed=31415, duration_s=50.0, offset_ps=T0_TRUE)
    s1, s2 = bs.simulate_run(scenario)
    m = bs.MeasurementResult.from_streams(s1, s2, r2_km=1.5)
    measurements[swap] = m
    print(
        "%s:  t1-t2 peak at %12.2f +/- %.2f ps  (%d coincidences)"
        % (swap.name, m.delta_t_ps, m.sigma_ps, m.metadata["n_coincidences"])
    )

m0, m45 = measurements[bs.SwapState.PLATE0], measurements[bs.SwapState.PLATE45]
delta = bs.delta_minus(m0, m45)
print("\nswap difference: %.2f +/- %.2f ps" % (delta.value, delta.sigma))

dispersion = bs.solve_dispersion(delta, r1_km=1.5, r2_km=1.5)
print("fiber dispersion: %.2f +/- %.2f ps/km  (true 1799.90)" % (dispersion.value, dispersion.sigma))

t0 = bs.solve_t0(m0, INV_U_S, INV_U_I, r1_km=1.5, r2_km=1.5)
t0_sym = bs.solve_t0_symmetric(m0, m45)
print("\nclock offset, single measurement : %.2f +/- %.2f ps" % (t0.value, t0.sigma))
print("clock offset, symmetric combine  : %.2f +/- %.2f ps" % (t0_sym.value, t0_sym.sigma))
print("injected offset                  : %.2f ps" % T0_TRUE)
print("\nerrors: %+.2f ps and %+.2f ps" % (t0.value - T0_TRUE, t0_sym.value - T0_TRUE))
