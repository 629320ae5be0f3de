"""Synchronization algebra over swap-state measurements.

Each measurement is the correlation-peak center of t1 - t2 for one plate
position.  The two positions route the slow and fast wavelengths down
opposite arms, so subtracting the two centers cancels the clock offset and
leaves the fiber dispersion times the total path length.  From there the
dispersion, the unknown path length, or the clock offset itself can be
solved, with 1-sigma uncertainties propagated linearly throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .channel import SwapState
from .correlate import CenterMethod, FitContext, cross_correlate, find_peaks, peak_center
from .errors import (
    DegenerateDispersionError,
    RankDeficiencyError,
    UsageError,
    ValidationError,
)
from .timetags import TagStream


class Estimate(NamedTuple):
    """A value with its 1-sigma uncertainty."""

    value: float
    sigma: float


@dataclass(frozen=True)
class MeasurementResult:
    """Peak center of t1 - t2 for one plate position, plus the known
    laboratory path length it was taken with."""

    swap_state: SwapState
    delta_t_ps: float
    sigma_ps: float
    r2_km: float
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sigma_ps <= 0:
            raise ValidationError("measurement sigma must be positive")

    @classmethod
    def from_streams(
        cls,
        s1: TagStream,
        s2: TagStream,
        r2_km: float,
        *,
        bin_width_ps: float = 3.0,
        window_ps: tuple[float, float] = (-50_000.0, 50_000.0),
        method: CenterMethod = CenterMethod.CENTROID,
        fit_context: FitContext | None = None,
        min_prominence: float = 0.05,
    ) -> "MeasurementResult":
        """Correlate two streams and take the tallest peak as the
        registration-time difference for their (shared) swap state."""
        if s1.swap_state != s2.swap_state:
            raise UsageError("streams were recorded under different swap states")
        hist = cross_correlate(s1, s2, bin_width_ps=bin_width_ps, window_ps=window_ps)
        top = find_peaks(hist, min_prominence=min_prominence)[0]
        est = peak_center(hist, top, method=method, fit_context=fit_context)
        return cls(
            swap_state=s1.swap_state,
            delta_t_ps=est.center_ps,
            sigma_ps=est.sigma_ps,
            r2_km=r2_km,
            metadata={"n_coincidences": hist.coincidences},
        )


@dataclass(frozen=True)
class SyncSolution:
    """Solved synchronization quantities; fields are None when not solved."""

    dispersion_ps_per_km: Estimate | None = None
    r1_km: Estimate | None = None
    r1_unphysical: bool = False
    t0_ps: Estimate | None = None
    t0_symmetric_ps: Estimate | None = None


def delta_minus(m0: MeasurementResult, m45: MeasurementResult) -> Estimate:
    """Difference of the two swap-state registration-time differences.

    Equals the fiber dispersion times the summed path lengths; the clock
    offset and the common path delays cancel.
    """
    if m0.swap_state is not SwapState.PLATE0 or m45.swap_state is not SwapState.PLATE45:
        raise UsageError("delta_minus needs one PLATE0 and one PLATE45 measurement, in order")
    if not math.isclose(m0.r2_km, m45.r2_km, rel_tol=1e-12, abs_tol=1e-12):
        raise UsageError(f"measurements used different r2 ({m0.r2_km} vs {m45.r2_km} km)")
    return Estimate(
        value=m0.delta_t_ps - m45.delta_t_ps,
        sigma=math.hypot(m0.sigma_ps, m45.sigma_ps),
    )


def solve_dispersion(delta: Estimate, r1_km: float, r2_km: float) -> Estimate:
    """Per-kilometer wavelength walk-off from a swap difference and known
    path lengths."""
    total = r1_km + r2_km
    if total <= 0:
        raise ValidationError("total path length must be positive")
    return Estimate(value=delta.value / total, sigma=delta.sigma / total)


@dataclass(frozen=True)
class R1Estimate:
    """Recovered remote path length; flagged when the geometry came out
    negative (unphysical)."""

    value_km: float
    sigma_km: float
    unphysical: bool = False


def solve_r1(delta: Estimate, dispersion, r2_km: float) -> R1Estimate:
    """Remote path length from a swap difference and a known dispersion.

    dispersion may be a float (ps/km) or an Estimate; its uncertainty is
    propagated to first order when given.
    """
    d, d_sigma = _as_estimate(dispersion)
    if d == 0:
        raise DegenerateDispersionError("cannot invert a zero dispersion")
    value = delta.value / d - r2_km
    sigma = math.hypot(delta.sigma / d, delta.value * d_sigma / d**2)
    return R1Estimate(value_km=value, sigma_km=sigma, unphysical=value < 0)


def _as_estimate(x) -> Estimate:
    if isinstance(x, Estimate):
        return x
    return Estimate(value=float(x), sigma=0.0)


def solve_t0(
    m: MeasurementResult,
    inv_vg_signal_ps_per_km: float,
    inv_vg_idler_ps_per_km: float,
    r1_km: float,
    r2_km: float,
) -> Estimate:
    """Clock offset from one measurement, subtracting the known path delays.

    The plate position decides which wavelength traveled which arm, hence
    which inverse group velocity multiplies which length.
    """
    if m.swap_state is SwapState.PLATE0:
        paths = r1_km * inv_vg_signal_ps_per_km - r2_km * inv_vg_idler_ps_per_km
    else:
        paths = r1_km * inv_vg_idler_ps_per_km - r2_km * inv_vg_signal_ps_per_km
    return Estimate(value=m.delta_t_ps - paths, sigma=m.sigma_ps)


def solve_t0_symmetric(
    m0: MeasurementResult,
    m45: MeasurementResult,
    *,
    r1_km: float | None = None,
    r2_km: float | None = None,
) -> Estimate:
    """Clock offset as the mean of the two swap-state measurements.

    Valid only when both paths have equal length: the sum of the two
    routings then cancels the group-velocity terms entirely, so no absolute
    inverse group velocities are needed.  Callers declaring unequal lengths
    get a UsageError.
    """
    if m0.swap_state is not SwapState.PLATE0 or m45.swap_state is not SwapState.PLATE45:
        raise UsageError("solve_t0_symmetric needs one PLATE0 and one PLATE45 measurement")
    if r1_km is not None and r2_km is not None:
        if not math.isclose(r1_km, r2_km, rel_tol=1e-12, abs_tol=1e-12):
            raise UsageError("symmetric offset solve requires r1 = r2")
    return Estimate(
        value=0.5 * (m0.delta_t_ps + m45.delta_t_ps),
        sigma=0.5 * math.hypot(m0.sigma_ps, m45.sigma_ps),
    )


class MultiPathSolution(NamedTuple):
    dispersion_ps_per_km: Estimate
    r1_km: Estimate


def solve_multi_r2(points: Iterable[Sequence[float]]) -> MultiPathSolution:
    """Joint (dispersion, remote length) solve from swap differences taken
    at several known laboratory path lengths.

    Each point is (r2_km, delta_minus_ps, sigma_ps).  The model is a line
    in r2 with slope = dispersion and intercept = dispersion * r1; the fit
    is weighted least squares with first-order error propagation including
    the slope/intercept covariance.
    """
    pts = [(float(r2), float(v), float(s)) for r2, v, s in points]
    if len(pts) < 2:
        raise RankDeficiencyError("need at least two points")
    r2 = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    sigma = np.array([p[2] for p in pts])
    if np.any(sigma <= 0):
        raise ValidationError("point uncertainties must be positive")
    if np.ptp(r2) <= 1e-12 * max(1.0, float(np.abs(r2).max())):
        raise RankDeficiencyError("all r2 values coincide; the line is underdetermined")

    w = 1.0 / sigma**2
    s0 = w.sum()
    sx = (w * r2).sum()
    sxx = (w * r2 * r2).sum()
    sy = (w * y).sum()
    sxy = (w * r2 * y).sum()
    det = s0 * sxx - sx * sx
    slope = (s0 * sxy - sx * sy) / det
    intercept = (sxx * sy - sx * sxy) / det
    var_slope = s0 / det
    var_intercept = sxx / det
    cov = -sx / det

    if slope == 0 or abs(slope) < 1e-12 * max(1.0, abs(intercept)):
        raise DegenerateDispersionError("fitted dispersion is consistent with zero")

    r1 = intercept / slope
    # d r1 / d intercept = 1/slope ; d r1 / d slope = -intercept/slope^2
    j_i = 1.0 / slope
    j_s = -intercept / slope**2
    var_r1 = j_i * j_i * var_intercept + j_s * j_s * var_slope + 2 * j_i * j_s * cov
    return MultiPathSolution(
        dispersion_ps_per_km=Estimate(value=float(slope), sigma=float(np.sqrt(var_slope))),
        r1_km=Estimate(value=float(r1), sigma=float(np.sqrt(max(var_r1, 0.0)))),
    )


def solution_report(solution: SyncSolution) -> str:
    """Human-readable key: value report of a solution."""
    lines = []
    if solution.dispersion_ps_per_km is not None:
        d = solution.dispersion_ps_per_km
        lines.append(f"dispersion_ps_per_km: {d.value:.4f}")
        lines.append(f"dispersion_sigma_ps_per_km: {d.sigma:.4f}")
    if solution.r1_km is not None:
        lines.append(f"r1_km: {solution.r1_km.value:.6f}")
        lines.append(f"r1_sigma_km: {solution.r1_km.sigma:.6f}")
        if solution.r1_unphysical:
            lines.append("r1_warning: negative path length (unphysical geometry)")
    if solution.t0_ps is not None:
        lines.append(f"t0_ps: {solution.t0_ps.value:.3f}")
        lines.append(f"t0_sigma_ps: {solution.t0_ps.sigma:.3f}")
    if solution.t0_symmetric_ps is not None:
        lines.append(f"t0_symmetric_ps: {solution.t0_symmetric_ps.value:.3f}")
        lines.append(f"t0_symmetric_sigma_ps: {solution.t0_symmetric_ps.sigma:.3f}")
    return "\n".join(lines)


_CSV_FIELDS = (
    "dispersion_ps_per_km",
    "dispersion_sigma_ps_per_km",
    "r1_km",
    "r1_sigma_km",
    "t0_ps",
    "t0_sigma_ps",
    "t0_symmetric_ps",
    "t0_symmetric_sigma_ps",
)


def solution_csv(solution: SyncSolution) -> str:
    """Machine-readable one-row CSV rendering (header + row)."""
    values: dict[str, float | None] = {k: None for k in _CSV_FIELDS}
    if solution.dispersion_ps_per_km is not None:
        values["dispersion_ps_per_km"] = solution.dispersion_ps_per_km.value
        values["dispersion_sigma_ps_per_km"] = solution.dispersion_ps_per_km.sigma
    if solution.r1_km is not None:
        values["r1_km"] = solution.r1_km.value
        values["r1_sigma_km"] = solution.r1_km.sigma
    if solution.t0_ps is not None:
        values["t0_ps"] = solution.t0_ps.value
        values["t0_sigma_ps"] = solution.t0_ps.sigma
    if solution.t0_symmetric_ps is not None:
        values["t0_symmetric_ps"] = solution.t0_symmetric_ps.value
        values["t0_symmetric_sigma_ps"] = solution.t0_symmetric_ps.sigma
    header = ",".join(_CSV_FIELDS)
    row = ",".join("" if values[k] is None else f"{values[k]:.6f}" for k in _CSV_FIELDS)
    return header + "\n" + row + "\n"
