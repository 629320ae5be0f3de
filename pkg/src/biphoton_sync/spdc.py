"""Biphoton correlation densities for a CW-pumped parametric pair source.

The joint detection probability of a signal/idler pair depends only on the
detection-time difference tau = t1 - t2 (after subtracting the deterministic
path delays).  Its density is the squared Fourier transform of the pair
spectral amplitude.  Two regimes are modeled:

* natural: the density straight out of the crystal.  A type-II crystal has a
  sinc-shaped spectral amplitude whose transform is a rectangle of full width
  gvm * length (hundreds of femtoseconds); a degenerate type-I crystal has a
  sinc(quadratic) amplitude whose transform is evaluated numerically (tens of
  femtoseconds).
* far-field: after long dispersive fibers the density takes the shape of the
  spectrum itself, |f(tau / b)|^2, where b sums the fiber group-velocity
  dispersion along both arms.  Detector jitter is folded in as a Gaussian.

All densities are sampled on a uniform, symmetric tau grid (picoseconds) and
normalized to unit integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NoPeakError, ResolutionError, ValidationError

SPEED_OF_LIGHT_NM_PER_PS = 299792.458

# Half-max abscissa of sin^2(x)/x^2, i.e. sinc^2 drops to 1/2 at |x| = this.
SINC2_HALF_MAX_X = 1.3915573782515103

# FWHM of |integral sinc(u^2) exp(-iuv) du|^2 in the scaled variable v.
# Sets the width of the degenerate type-I density: fwhm = sqrt(gvd*L/2) * W0.
TYPE_I_WIDTH_CONST = 2.23697147905

GAUSSIAN_FWHM_PER_SIGMA = 2.3548200450309493  # 2*sqrt(2*ln 2)

# Crystal defaults, back-solved so an 8 mm crystal reproduces the reference
# widths: 100 fs/mm -> 800 fs rectangle; 44.9637 fs^2/mm -> 30 fs type-I peak.
DEFAULT_GVM_FS_PER_MM = 100.0
DEFAULT_GVD_FS2_PER_MM = 44.9637

_MIN_POINTS_ACROSS_FWHM = 16
_OMEGA_SAMPLES = 8192
_OMEGA_SPAN_ZEROS = 6
# The slowly decaying type-II amplitude needs a far wider span before the
# squared Gibbs overshoot stops distorting the reconstructed rectangle.
_OMEGA_SPAN_ZEROS_SLOW_DECAY = 128


class PhaseMatching(Enum):
    """Crystal phase-matching configuration."""

    TYPE_II = "type2"
    TYPE_I_DEGENERATE = "type1_degenerate"


@dataclass(frozen=True)
class SpectralModel:
    """Crystal parameters defining the pair spectral amplitude.

    For TYPE_II the relevant dispersion number is the inverse-group-velocity
    difference between signal and idler inside the crystal (gvm, fs/mm); for
    TYPE_I_DEGENERATE it is the second derivative of the crystal dispersion
    function (gvd, fs^2/mm).  Wavelengths only set the central frequencies,
    which drop out of the correlation shape.
    """

    kind: PhaseMatching
    length_mm: float
    gvm_fs_per_mm: float = DEFAULT_GVM_FS_PER_MM
    gvd_fs2_per_mm: float = DEFAULT_GVD_FS2_PER_MM
    signal_wavelength_nm: float = 901.0
    idler_wavelength_nm: float = 931.0

    def __post_init__(self):
        if self.length_mm <= 0:
            raise ValidationError(f"crystal length must be positive, got {self.length_mm}")
        if self.kind is PhaseMatching.TYPE_II and self.gvm_fs_per_mm == 0:
            raise ValidationError("type-II model requires nonzero gvm_fs_per_mm")
        if self.kind is PhaseMatching.TYPE_I_DEGENERATE and self.gvd_fs2_per_mm == 0:
            raise ValidationError("type-I model requires nonzero gvd_fs2_per_mm")
        if self.signal_wavelength_nm <= 0 or self.idler_wavelength_nm <= 0:
            raise ValidationError("wavelengths must be positive")

    @property
    def omega_signal_rad_per_ps(self) -> float:
        return 2 * np.pi * SPEED_OF_LIGHT_NM_PER_PS / self.signal_wavelength_nm

    @property
    def omega_idler_rad_per_ps(self) -> float:
        return 2 * np.pi * SPEED_OF_LIGHT_NM_PER_PS / self.idler_wavelength_nm

    @property
    def natural_width_ps(self) -> float:
        """Characteristic width of the natural correlation density."""
        if self.kind is PhaseMatching.TYPE_II:
            return abs(self.gvm_fs_per_mm) * self.length_mm * 1e-3
        beta_ps2 = 0.5 * abs(self.gvd_fs2_per_mm) * self.length_mm * 1e-6
        return float(np.sqrt(beta_ps2) * TYPE_I_WIDTH_CONST)


@dataclass(frozen=True)
class BroadeningModel:
    """Far-field mapping coefficient plus combined detector jitter.

    b_s2 is the spectral-to-temporal mapping coefficient (s^2): the fiber
    group-velocity dispersion at the signal wavelength times the signal path
    length, plus the idler counterpart.  jitter_fwhm_ps folds both detectors
    into a single Gaussian.
    """

    b_s2: float
    jitter_fwhm_ps: float = 0.0

    def __post_init__(self):
        if self.b_s2 < 0:
            raise ValidationError(f"broadening coefficient must be >= 0, got {self.b_s2}")
        if self.jitter_fwhm_ps < 0:
            raise ValidationError(f"jitter FWHM must be >= 0, got {self.jitter_fwhm_ps}")

    @classmethod
    def from_fiber_paths(
        cls,
        gvd_signal_s2_per_cm: float,
        signal_path_km: float,
        gvd_idler_s2_per_cm: float,
        idler_path_km: float,
        jitter_fwhm_ps: float = 0.0,
    ) -> "BroadeningModel":
        cm_per_km = 1e5
        b = gvd_signal_s2_per_cm * signal_path_km * cm_per_km
        b += gvd_idler_s2_per_cm * idler_path_km * cm_per_km
        return cls(b_s2=b, jitter_fwhm_ps=jitter_fwhm_ps)

    @property
    def b_ps2(self) -> float:
        return self.b_s2 * 1e24


@dataclass(frozen=True)
class CorrelationDensity:
    """A probability density of the detection-time difference, sampled on a
    uniform tau grid (ps), normalized to unit trapezoidal integral."""

    tau_ps: np.ndarray
    pdf_per_ps: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau_ps, dtype=np.float64)
        pdf = np.asarray(self.pdf_per_ps, dtype=np.float64)
        if tau.ndim != 1 or tau.shape != pdf.shape:
            raise ValidationError("tau and pdf must be 1-d arrays of equal length")
        if tau.size < 2:
            raise ValidationError("density needs at least two samples")
        tau.setflags(write=False)
        pdf.setflags(write=False)
        object.__setattr__(self, "tau_ps", tau)
        object.__setattr__(self, "pdf_per_ps", pdf)

    @property
    def step_ps(self) -> float:
        return float(self.tau_ps[1] - self.tau_ps[0])

    def integral(self) -> float:
        return float(np.trapezoid(self.pdf_per_ps, self.tau_ps))


def spectral_amplitude(model: SpectralModel, omega_rad_per_ps):
    """Pair spectral amplitude f at detuning omega from degeneracy.

    Type-II: sinc of a linear argument; degenerate type-I: sinc of a
    quadratic argument.  Even in omega, equal to 1 at omega = 0, and
    bounded by 1 in magnitude.  Accepts scalars or arrays.
    """
    omega = np.asarray(omega_rad_per_ps, dtype=np.float64)
    if model.kind is PhaseMatching.TYPE_II:
        width_ps = model.gvm_fs_per_mm * model.length_mm * 1e-3
        arg = 0.5 * width_ps * omega
    else:
        beta_ps2 = 0.5 * model.gvd_fs2_per_mm * model.length_mm * 1e-6
        arg = beta_ps2 * omega * omega
    # np.sinc(x) = sin(pi x)/(pi x)
    out = np.sinc(arg / np.pi)
    return out if out.ndim else float(out)


def _symmetric_grid(half_span_ps: float, step_ps: float) -> np.ndarray:
    n = max(int(np.ceil(half_span_ps / step_ps)), 8)
    return np.arange(-n, n + 1, dtype=np.float64) * step_ps


def _normalize(tau: np.ndarray, pdf: np.ndarray) -> CorrelationDensity:
    total = np.trapezoid(pdf, tau)
    if total <= 0:
        raise ValidationError("density integrates to zero")
    return CorrelationDensity(tau_ps=tau, pdf_per_ps=pdf / total)


def _check_resolution(density: CorrelationDensity) -> CorrelationDensity:
    try:
        width = fwhm(density)
    except NoPeakError:
        raise ResolutionError("grid cannot resolve the correlation peak at all")
    points = width / density.step_ps
    if points < _MIN_POINTS_ACROSS_FWHM:
        raise ResolutionError(
            f"only {points:.1f} grid points across the {width:.4g} ps FWHM; "
            f"need at least {_MIN_POINTS_ACROSS_FWHM}"
        )
    return density

def _numeric_transform(model: SpectralModel, tau: np.ndarray) -> np.ndarray:
    """|F{f}|^2 on the tau grid via direct cosine quadrature (f is even)."""
    if model.kind is PhaseMatching.TYPE_II:
        width_ps = abs(model.gvm_fs_per_mm) * model.length_mm * 1e-3
        omega_max = _OMEGA_SPAN_ZEROS_SLOW_DECAY * 2 * np.pi / width_ps
    else:
        beta_ps2 = 0.5 * abs(model.gvd_fs2_per_mm) * model.length_mm * 1e-6
        omega_max = np.sqrt(_OMEGA_SPAN_ZEROS * np.pi / beta_ps2)
    omega = np.linspace(-omega_max, omega_max, _OMEGA_SAMPLES)
    f_omega = spectral_amplitude(model, omega)
    out = np.empty_like(tau)
    chunk = 512
    for i in range(0, tau.size, chunk):
        block = tau[i : i + chunk, None] * omega[None, :]
        out[i : i + chunk] = np.trapezoid(f_omega[None, :] * np.cos(block), omega, axis=1)
    return out * out


def natural_g2(
    model: SpectralModel,
    *,
    resolution_ps: float = 0.001,
    span_factor: float = 8.0,
    method: str = "auto",
) -> CorrelationDensity:
    """Correlation density straight out of the crystal, centered at tau = 0.

    Type-II gives a rectangle of full width gvm * length (analytic unless
    method="numeric" forces the quadrature path, used for cross-checks);
    type-I is always evaluated numerically.  Raises ResolutionError if the
    grid puts fewer than 16 points across the FWHM.
    """
    if method not in ("auto", "analytic", "numeric"):
        raise ValidationError(f"unknown method {method!r}")
    if resolution_ps <= 0:
        raise ValidationError("resolution must be positive")
    width = model.natural_width_ps
    tau = _symmetric_grid(0.5 * span_factor * width, resolution_ps)

    if model.kind is PhaseMatching.TYPE_II and method != "numeric":
        half = 0.5 * width
        pdf = np.where(np.abs(tau) < half, 1.0, 0.0)
        on_edge = np.isclose(np.abs(tau), half, rtol=0.0, atol=resolution_ps * 1e-9)
        pdf[on_edge] = 0.5
    else:
        if model.kind is PhaseMatching.TYPE_I_DEGENERATE and method == "analytic":
            raise ValidationError("type-I density has no analytic form; use auto or numeric")
        pdf = _numeric_transform(model, tau)
    return _check_resolution(_normalize(tau, pdf))


def _gaussian_kernel(step_ps: float, fwhm_ps: float) -> np.ndarray:
    sigma = fwhm_ps / GAUSSIAN_FWHM_PER_SIGMA
    half = max(int(np.ceil(5 * sigma / step_ps)), 1)
    x = np.arange(-half, half + 1) * step_ps
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def convolve_jitter(density: CorrelationDensity, jitter_fwhm_ps: float) -> CorrelationDensity:
    """Convolve a density with a Gaussian timing-jitter kernel of the given
    FWHM.  Returns the input unchanged for zero jitter."""
    if jitter_fwhm_ps < 0:
        raise ValidationError("jitter FWHM must be >= 0")
    if jitter_fwhm_ps == 0:
        return density
    kernel = _gaussian_kernel(density.step_ps, jitter_fwhm_ps)
    if kernel.size > density.tau_ps.size:
        # Pad so 'same' keeps the original grid even for narrow densities.
        pad = kernel.size // 2
        pdf = np.concatenate([np.zeros(pad), density.pdf_per_ps, np.zeros(pad)])
        smeared = np.convolve(pdf, kernel, mode="same")[pad:-pad]
    else:
        smeared = np.convolve(density.pdf_per_ps, kernel, mode="same")
    return _normalize(density.tau_ps, smeared)


def farfield_g2(
    model: SpectralModel,
    broadening: BroadeningModel,
    *,
    resolution_ps: float | None = None,
    span_factor: float = 8.0,
) -> CorrelationDensity:
    """Correlation density after long dispersive fibers.

    In the far-field regime the density is |f(tau / b)|^2: the spectrum
    shape replayed in time, with the mapping coefficient b (converted to
    ps^2) setting the scale.  Detector jitter is then folded in as a
    Gaussian of the combined FWHM.  For b = 0 this falls back to the
    natural density convolved with jitter (documented behavior).
    """
    if broadening.b_s2 == 0:
        step = resolution_ps if resolution_ps is not None else 0.001
        base = natural_g2(model, resolution_ps=step, span_factor=span_factor)
        if broadening.jitter_fwhm_ps > 0:
            width = float(np.hypot(model.natural_width_ps, broadening.jitter_fwhm_ps))
            step = resolution_ps if resolution_ps is not None else width / 1000.0
            tau = _symmetric_grid(0.5 * span_factor * width, step)
            pdf = np.interp(tau, base.tau_ps, base.pdf_per_ps, left=0.0, right=0.0)
            base = convolve_jitter(_normalize(tau, pdf), broadening.jitter_fwhm_ps)
        return _check_resolution(base)

    b_ps2 = broadening.b_ps2
    scale_width = _farfield_fwhm_estimate(model, b_ps2)
    grid_width = float(np.hypot(scale_width, broadening.jitter_fwhm_ps))
    step = resolution_ps if resolution_ps is not None else grid_width / 1000.0
    tau = _symmetric_grid(0.5 * span_factor * grid_width, step)
    amp = spectral_amplitude(model, tau / b_ps2)
    density = _normalize(tau, np.asarray(amp) ** 2)
    density = convolve_jitter(density, broadening.jitter_fwhm_ps)
    return _check_resolution(density)


def _farfield_fwhm_estimate(model: SpectralModel, b_ps2: float) -> float:
    """Closed-form FWHM of |f(tau/b)|^2, used for grid sizing."""
    if model.kind is PhaseMatching.TYPE_II:
        width_ps = abs(model.gvm_fs_per_mm) * model.length_mm * 1e-3
        return 4.0 * SINC2_HALF_MAX_X * b_ps2 / width_ps
    beta_ps2 = 0.5 * abs(model.gvd_fs2_per_mm) * model.length_mm * 1e-6
    return 2.0 * b_ps2 * float(np.sqrt(SINC2_HALF_MAX_X / beta_ps2))


def fwhm(density: CorrelationDensity) -> float:
    """Full width at half maximum of a sampled curve, in ps.

    Crossings are located by linear interpolation between grid points; a
    flat-topped curve (rectangle) reports its plateau width.  Raises
    NoPeakError for all-zero or monotonic curves.
    """
    y = density.pdf_per_ps
    x = density.tau_ps
    peak = float(y.max())
    if peak <= 0:
        raise NoPeakError("curve has no positive maximum")
    half = 0.5 * peak
    i_max = int(np.argmax(y))

    left = None
    for i in range(i_max, -1, -1):
        if y[i] < half:
            left = x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
            break
    right = None
    for i in range(i_max, y.size):
        if y[i] < half:
            right = x[i - 1] + (half - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1])
            break
    if left is None or right is None:
        raise NoPeakError("curve does not fall below half maximum on both sides")
    return float(right - left)
