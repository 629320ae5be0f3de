"""Optical paths and detectors: per-arm propagation delay, fiber dispersion
parameters, intermodal side modes, and detector imperfections.

Each arm of the experiment is a fiber feeding one detector.  A half-wave
plate upstream of the splitter decides which photon (signal or idler) enters
which arm; rotating it between its two positions swaps the roles, which is
the handle the synchronization protocol pulls on.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from .errors import ValidationError


class PhotonRole(Enum):
    SIGNAL = "signal"
    IDLER = "idler"


class SwapState(Enum):
    """Half-wave plate position: PLATE0 routes the signal to detector 1,
    PLATE45 routes the idler to detector 1."""

    PLATE0 = 0
    PLATE45 = 1

    def toggled(self) -> "SwapState":
        return SwapState.PLATE45 if self is SwapState.PLATE0 else SwapState.PLATE0


class Routing(NamedTuple):
    d1: PhotonRole
    d2: PhotonRole


def route(swap_state: SwapState) -> Routing:
    """Which photon reaches which detector for a given plate position."""
    if swap_state is SwapState.PLATE0:
        return Routing(d1=PhotonRole.SIGNAL, d2=PhotonRole.IDLER)
    return Routing(d1=PhotonRole.IDLER, d2=PhotonRole.SIGNAL)


class SideMode(NamedTuple):
    """A delayed, attenuated intermodal copy of the main fiber mode."""

    delay_ps: float
    amplitude: float


@dataclass(frozen=True)
class FiberChannel:
    """One fiber arm: length, inverse group velocities at the two pair
    wavelengths, group-velocity dispersion at each, and optional intermodal
    side modes (delay, relative amplitude) that spawn satellite peaks."""

    length_km: float
    inv_vg_signal_ps_per_km: float
    inv_vg_idler_ps_per_km: float
    gvd_signal_s2_per_cm: float = 0.0
    gvd_idler_s2_per_cm: float = 0.0
    side_modes: tuple[SideMode, ...] = ()

    def __post_init__(self):
        if self.length_km < 0:
            raise ValidationError(f"fiber length must be >= 0, got {self.length_km}")
        if self.inv_vg_signal_ps_per_km <= 0 or self.inv_vg_idler_ps_per_km <= 0:
            raise ValidationError("inverse group velocities must be positive")
        modes = tuple(SideMode(float(d), float(a)) for d, a in self.side_modes)
        last = 0.0
        for mode in modes:
            if not 0 < mode.amplitude <= 1:
                raise ValidationError(f"side-mode amplitude {mode.amplitude} not in (0, 1]")
            if mode.delay_ps <= last:
                raise ValidationError("side-mode delays must be positive and strictly increasing")
            last = mode.delay_ps
        object.__setattr__(self, "side_modes", modes)


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector: Gaussian timing jitter, detection efficiency,
    dark counts, and a blanking dead time between recorded events."""

    jitter_fwhm_ps: float = 0.0
    efficiency: float = 1.0
    dark_rate_per_s: float = 0.0
    dead_time_ps: float = 0.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ValidationError(f"efficiency {self.efficiency} not in [0, 1]")
        if self.jitter_fwhm_ps < 0 or self.dark_rate_per_s < 0 or self.dead_time_ps < 0:
            raise ValidationError("jitter, dark rate and dead time must be >= 0")


def propagation_delay(channel: FiberChannel, role: PhotonRole) -> float:
    """Main-mode group delay (ps) of the given photon through the fiber."""
    if role is PhotonRole.SIGNAL:
        return channel.length_km * channel.inv_vg_signal_ps_per_km
    return channel.length_km * channel.inv_vg_idler_ps_per_km


def fiber_dispersion(channel: FiberChannel) -> float:
    """Inverse-group-velocity difference signal minus idler (ps/km).

    This is the quantity the swap measurement calibrates: the per-kilometer
    walk-off between the two pair wavelengths.
    """
    return channel.inv_vg_signal_ps_per_km - channel.inv_vg_idler_ps_per_km
