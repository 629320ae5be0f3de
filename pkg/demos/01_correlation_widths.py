#!/usr/bin/env python3
"""Correlation widths from crystal to detector.

Walks the chain of scales: the femtosecond-wide pair correlation straight
out of the crystal, the broadened shape after kilometers of dispersive
fiber, and the further smearing from detector jitter.  Optionally saves the
three curves as PNG if matplotlib is around.
"""

import biphoton_sync as bs

crystal2 = bs.SpectralModel(kind=bs.PhaseMatching.TYPE_II, length_mm=8.0, gvm_fs_per_mm=100.0)
crystal1 = bs.SpectralModel(kind=bs.PhaseMatching.TYPE_I_DEGENERATE, length_mm=8.0)

natural2 = bs.natural_g2(crystal2)
natural1 = bs.natural_g2(crystal1)
print("natural correlation width, type-II 8 mm crystal : %7.1f fs" % (bs.fwhm(natural2) * 1e3))
print("natural correlation width, type-I  8 mm crystal : %7.1f fs" % (bs.fwhm(natural1) * 1e3))

# two 1.5 km fibers, dispersion at the 901/931 nm pair wavelengths
fiber_only = bs.BroadeningModel.from_fiber_paths(2.76e-28, 1.5, 2.96e-28, 1.5)
farfield = bs.farfield_g2(crystal2, fiber_only)
print("after 2 x 1.5 km fiber (no jitter)              : %7.1f ps" % bs.fwhm(farfield))

with_jitter = bs.BroadeningModel.from_fiber_paths(
    2.76e-28, 1.5, 2.96e-28, 1.5, jitter_fwhm_ps=450.0
)
measured = bs.farfield_g2(crystal2, with_jitter)
print("plus 450 ps combined detector jitter            : %7.1f ps" % bs.fwhm(measured))

print()
print("The fiber stretches the femtosecond correlation by ~750x; the")
print("detectors smear it further. The peak POSITION is what carries the")
print("timing information, and it survives both effects.")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
    axes[0].plot(natural2.tau_ps * 1e3, natural2.pdf_per_ps)
    axes[0].set_xlabel("tau (fs)")
    axes[0].set_title("at the crystal (type-II)")
    axes[1].plot(farfield.tau_ps, farfield.pdf_per_ps)
    axes[1].set_xlabel("tau (ps)")
    axes[1].set_title("after 3 km of fiber")
    axes[2].plot(measured.tau_ps, measured.pdf_per_ps)
    axes[2].set_xlabel("tau (ps)")
    axes[2].set_title("plus detector jitter")
    for ax in axes:
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig("correlation_widths.png", dpi=120)
    print("\nsaved correlation_widths.png")
except ImportError:
    print("\n(matplotlib not installed; skipping the plot)")
