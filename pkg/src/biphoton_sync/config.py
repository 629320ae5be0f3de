"""Scenario configuration files.

Scenarios are described in TOML with units spelled out in the key names
(*_ps, *_km, *_s2_per_cm, ...).  Every key is optional except rng_seed and
falls back to the benchtop reference scenario; unknown keys are rejected so
typos cannot silently change the physics.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .channel import DetectorModel, FiberChannel, SwapState
from .errors import ValidationError
from .simulate import Scenario, benchtop_scenario
from .spdc import PhaseMatching, SpectralModel
from .timetags import ClockModel

_SWAP_NAMES = {"plate0": SwapState.PLATE0, "plate45": SwapState.PLATE45}
_KIND_NAMES = {"type2": PhaseMatching.TYPE_II, "type1_degenerate": PhaseMatching.TYPE_I_DEGENERATE}

_TOP_KEYS = {
    "rng_seed",
    "pair_rate_per_s",
    "duration_s",
    "swap_state",
    "max_expected_events",
    "spectral",
    "fiber1",
    "fiber2",
    "detector1",
    "detector2",
    "clock1",
    "clock2",
}
_SPECTRAL_KEYS = {
    "kind",
    "length_mm",
    "gvm_fs_per_mm",
    "gvd_fs2_per_mm",
    "signal_wavelength_nm",
    "idler_wavelength_nm",
}
_FIBER_KEYS = {
    "length_km",
    "inv_vg_signal_ps_per_km",
    "inv_vg_idler_ps_per_km",
    "gvd_signal_s2_per_cm",
    "gvd_idler_s2_per_cm",
    "side_modes",
}
_DETECTOR_KEYS = {"jitter_fwhm_ps", "efficiency", "dark_rate_per_s", "dead_time_ps"}
_CLOCK_KEYS = {"offset_ps", "drift_ps_per_s", "resolution_ps"}


def parse_config(text: str) -> dict:
    """Parse TOML text into a plain dict; parse errors carry line numbers."""
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config parse error: {exc}") from exc


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        names = ", ".join(sorted(f"{where}.{k}" if where else k for k in unknown))
        raise ValidationError(f"unknown config key(s): {names}")


def _number(section: dict, key: str, default: float, where: str) -> float:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}.{key} must be a number, got {value!r}")
    return float(value)


def _integer(section: dict, key: str, default: int, where: str) -> int:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}.{key} must be an integer, got {value!r}")
    return value


def _spectral(section: dict, default: SpectralModel) -> SpectralModel:
    _reject_unknown(section, _SPECTRAL_KEYS, "spectral")
    kind_name = section.get("kind", default.kind.value)
    if kind_name not in _KIND_NAMES:
        raise ValidationError(
            f"spectral.kind must be one of {sorted(_KIND_NAMES)}, got {kind_name!r}"
        )
    return SpectralModel(
        kind=_KIND_NAMES[kind_name],
        length_mm=_number(section, "length_mm", default.length_mm, "spectral"),
        gvm_fs_per_mm=_number(section, "gvm_fs_per_mm", default.gvm_fs_per_mm, "spectral"),
        gvd_fs2_per_mm=_number(section, "gvd_fs2_per_mm", default.gvd_fs2_per_mm, "spectral"),
        signal_wavelength_nm=_number(
            section, "signal_wavelength_nm", default.signal_wavelength_nm, "spectral"
        ),
        idler_wavelength_nm=_number(
            section, "idler_wavelength_nm", default.idler_wavelength_nm, "spectral"
        ),
    )


def _fiber(section: dict, default: FiberChannel, where: str) -> FiberChannel:
    _reject_unknown(section, _FIBER_KEYS, where)
    side_modes = section.get("side_modes", [list(m) for m in default.side_modes])
    if not isinstance(side_modes, list):
        raise ValidationError(f"{where}.side_modes must be a list of [delay_ps, amplitude]")
    modes = []
    for entry in side_modes:
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise ValidationError(f"{where}.side_modes entries must be [delay_ps, amplitude]")
        modes.append((float(entry[0]), float(entry[1])))
    return FiberChannel(
        length_km=_number(section, "length_km", default.length_km, where),
        inv_vg_signal_ps_per_km=_number(
            section, "inv_vg_signal_ps_per_km", default.inv_vg_signal_ps_per_km, where
        ),
        inv_vg_idler_ps_per_km=_number(
            section, "inv_vg_idler_ps_per_km", default.inv_vg_idler_ps_per_km, where
        ),
        gvd_signal_s2_per_cm=_number(
            section, "gvd_signal_s2_per_cm", default.gvd_signal_s2_per_cm, where
        ),
        gvd_idler_s2_per_cm=_number(
            section, "gvd_idler_s2_per_cm", default.gvd_idler_s2_per_cm, where
        ),
        side_modes=tuple(modes),
    )


def _detector(section: dict, default: DetectorModel, where: str) -> DetectorModel:
    _reject_unknown(section, _DETECTOR_KEYS, where)
    return DetectorModel(
        jitter_fwhm_ps=_number(section, "jitter_fwhm_ps", default.jitter_fwhm_ps, where),
        efficiency=_number(section, "efficiency", default.efficiency, where),
        dark_rate_per_s=_number(section, "dark_rate_per_s", default.dark_rate_per_s, where),
        dead_time_ps=_number(section, "dead_time_ps", default.dead_time_ps, where),
    )


def _clock(section: dict, default: ClockModel, where: str) -> ClockModel:
    _reject_unknown(section, _CLOCK_KEYS, where)
    return ClockModel(
        offset_ps=_number(section, "offset_ps", default.offset_ps, where),
        drift_ps_per_s=_number(section, "drift_ps_per_s", default.drift_ps_per_s, where),
        resolution_ps=_integer(section, "resolution_ps", default.resolution_ps, where),
    )


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a validated Scenario from a parsed config document."""
    if not isinstance(doc, dict):
        raise ValidationError("config root must be a table")
    _reject_unknown(doc, _TOP_KEYS, "")
    if "rng_seed" not in doc:
        raise ValidationError("config must set rng_seed")
    base = benchtop_scenario()

    swap_name = doc.get("swap_state", "plate0")
    if isinstance(swap_name, SwapState):
        swap_name = "plate0" if swap_name is SwapState.PLATE0 else "plate45"
    if swap_name not in _SWAP_NAMES:
        raise ValidationError(f"swap_state must be one of {sorted(_SWAP_NAMES)}, got {swap_name!r}")

    def section(name):
        value = doc.get(name, {})
        if not isinstance(value, dict):
            raise ValidationError(f"{name} must be a table")
        return value

    return Scenario(
        spectral=_spectral(section("spectral"), base.spectral),
        fiber1=_fiber(section("fiber1"), base.fiber1, "fiber1"),
        fiber2=_fiber(section("fiber2"), base.fiber2, "fiber2"),
        det1=_detector(section("detector1"), base.det1, "detector1"),
        det2=_detector(section("detector2"), base.det2, "detector2"),
        clock1=_clock(section("clock1"), base.clock1, "clock1"),
        clock2=_clock(section("clock2"), base.clock2, "clock2"),
        swap_state=_SWAP_NAMES[swap_name],
        pair_rate_per_s=_number(doc, "pair_rate_per_s", base.pair_rate_per_s, ""),
        duration_s=_number(doc, "duration_s", base.duration_s, ""),
        rng_seed=_integer(doc, "rng_seed", 0, ""),
        max_expected_events=_number(doc, "max_expected_events", base.max_expected_events, ""),
    )


def load_scenario(path) -> Scenario:
    return scenario_from_dict(load_config(path))


def override_key(doc: dict, dotted_key: str, value) -> dict:
    """Return a copy of the document with one dotted key replaced.

    Used by parameter sweeps; the key must address a scalar (or side_modes
    list), e.g. "fiber2.length_km" or "swap_state".
    """
    parts = dotted_key.split(".")
    out = dict(doc)
    node = out
    for part in parts[:-1]:
        child = dict(node.get(part, {}))
        if not isinstance(child, dict):
            raise ValidationError(f"cannot descend into {part!r} in {dotted_key!r}")
        node[part] = child
        node = child
    node[parts[-1]] = value
    return out
