"""Monte-Carlo generation of paired detection-tag streams.

A run draws pair emissions as a Poisson process, routes the two photons per
the plate position, adds per-arm propagation delays and intermodal
side-mode delays, draws the pair time difference from the broadened
correlation density, applies per-detector jitter, efficiency thinning, dark
counts and dead time, and finally records everything through the two local
clocks.

Determinism contract: the run is cut into fixed one-second seed slabs, each
generated from a seed derived from (scenario seed, slab index).  The
``slabs`` argument only groups those units for parallel execution, so the
output is byte-identical for any slab count.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .channel import DetectorModel, FiberChannel, PhotonRole, SwapState, propagation_delay, route
from .errors import ResourceLimitError, UsageError, ValidationError
from .spdc import (
    BroadeningModel,
    CorrelationDensity,
    GAUSSIAN_FWHM_PER_SIGMA,
    PhaseMatching,
    SpectralModel,
    farfield_g2,
    natural_g2,
)
from .timetags import CHANNEL_D1, CHANNEL_D2, ClockModel, TagStream, apply_clock

PS_PER_S = 1e12


@dataclass(frozen=True)
class Scenario:
    """Full experiment description: source, two fiber arms, two detectors,
    two clocks, plate position, pair rate, run length, and the RNG seed."""

    spectral: SpectralModel
    fiber1: FiberChannel
    fiber2: FiberChannel
    det1: DetectorModel
    det2: DetectorModel
    clock1: ClockModel
    clock2: ClockModel
    swap_state: SwapState = SwapState.PLATE0
    pair_rate_per_s: float = 1e4
    duration_s: float = 50.0
    rng_seed: int = 0
    max_expected_events: float = 1e8

    def __post_init__(self):
        if self.pair_rate_per_s <= 0:
            raise ValidationError("pair rate must be positive")
        if self.duration_s <= 0:
            raise ValidationError("duration must be positive")
        if not 0 <= self.rng_seed < 2**64:
            raise ValidationError("rng_seed must fit in u64")

    def digest(self) -> str:
        """Stable 16-hex-digit fingerprint of every scenario parameter."""
        blob = json.dumps(asdict(self), sort_keys=True, default=_jsonable)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(obj):
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"not JSON serializable: {obj!r}")


def scenario_broadening(scenario: Scenario, include_jitter: bool = True) -> BroadeningModel:
    """Combined far-field broadening for the scenario's current routing.

    The mapping coefficient sums each photon's fiber dispersion over the
    path it actually traverses under the current plate position; jitter
    folds both detectors into one Gaussian FWHM.
    """
    routing = route(scenario.swap_state)
    fibers = {1: scenario.fiber1, 2: scenario.fiber2}
    b = 0.0
    for det, role in ((1, routing.d1), (2, routing.d2)):
        fiber = fibers[det]
        gvd = (
            fiber.gvd_signal_s2_per_cm
            if role is PhotonRole.SIGNAL
            else fiber.gvd_idler_s2_per_cm
        )
        b += gvd * fiber.length_km * 1e5
    jitter = 0.0
    if include_jitter:
        jitter = float(np.hypot(scenario.det1.jitter_fwhm_ps, scenario.det2.jitter_fwhm_ps))
    return BroadeningModel(b_s2=b, jitter_fwhm_ps=jitter)


def pair_delay_density(scenario: Scenario) -> CorrelationDensity:
    """Density of the pair detection-time difference before detector jitter,
    at a resolution fine enough for faithful sampling."""
    broadening = scenario_broadening(scenario, include_jitter=False)
    if broadening.b_s2 > 0:
        return farfield_g2(scenario.spectral, broadening)
    width = scenario.spectral.natural_width_ps
    return natural_g2(scenario.spectral, resolution_ps=width / 64.0)


def sample_pair_delay(density: CorrelationDensity, rng: np.random.Generator, size=None):
    """Draw pair time differences from a sampled density via inverse-CDF
    with linear interpolation on the grid."""
    pdf = density.pdf_per_ps
    tau = density.tau_ps
    total = density.integral()
    if not math.isclose(total, 1.0, rel_tol=1e-3):
        raise UsageError(f"density must be normalized (integral {total:.4g})")
    segments = 0.5 * (pdf[1:] + pdf[:-1]) * np.diff(tau)
    cdf = np.concatenate(([0.0], np.cumsum(segments)))
    cdf /= cdf[-1]
    # Keep both endpoints of every rising segment; flat runs (zero density)
    # collapse so the interpolant never maps into them.
    rise = np.diff(cdf) > 0
    keep = np.zeros(cdf.size, dtype=bool)
    keep[:-1] |= rise
    keep[1:] |= rise
    u = rng.random(size)
    out = np.interp(u, cdf[keep], tau[keep])
    return out if size is not None else float(out)


def _side_mode_extra(fiber: FiberChannel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Per-photon extra delay from intermodal side modes (0 for main mode)."""
    if not fiber.side_modes or n == 0:
        return np.zeros(n)
    delays = np.array([0.0] + [m.delay_ps for m in fiber.side_modes])
    weights = np.array([1.0] + [m.amplitude for m in fiber.side_modes])
    weights /= weights.sum()
    picks = rng.choice(delays.size, size=n, p=weights)
    return delays[picks]


def _slab_events(scenario: Scenario, density: CorrelationDensity, slab_index: int, seed_children):
    """True detection times (ps) for one one-second seed slab.

    Draw order is fixed: pair count, emission times, pair delays, side
    modes per arm, jitter per detector, efficiency thinning, dark counts.
    """
    rng = np.random.default_rng(seed_children[slab_index])
    t0 = float(slab_index)
    t1 = min(t0 + 1.0, scenario.duration_s)
    span_s = t1 - t0

    n_pairs = rng.poisson(scenario.pair_rate_per_s * span_s)
    emission = (t0 + rng.random(n_pairs) * span_s) * PS_PER_S

    delta = np.asarray(sample_pair_delay(density, rng, size=n_pairs))

    routing = route(scenario.swap_state)
    arrive1 = emission + propagation_delay(scenario.fiber1, routing.d1)
    arrive2 = emission + propagation_delay(scenario.fiber2, routing.d2) + delta
    arrive1 = arrive1 + _side_mode_extra(scenario.fiber1, rng, n_pairs)
    arrive2 = arrive2 + _side_mode_extra(scenario.fiber2, rng, n_pairs)

    for det, arr in ((scenario.det1, arrive1), (scenario.det2, arrive2)):
        if det.jitter_fwhm_ps > 0:
            arr += rng.normal(0.0, det.jitter_fwhm_ps / GAUSSIAN_FWHM_PER_SIGMA, n_pairs)

    keep1 = rng.random(n_pairs) < scenario.det1.efficiency
    keep2 = rng.random(n_pairs) < scenario.det2.efficiency

    darks = []
    for det in (scenario.det1, scenario.det2):
        n_dark = rng.poisson(det.dark_rate_per_s * span_s)
        darks.append((t0 + rng.random(n_dark) * span_s) * PS_PER_S)

    return arrive1[keep1], arrive2[keep2], darks[0], darks[1]


def _dead_time_filter(timestamps_fs: np.ndarray, dead_fs: int) -> np.ndarray:
    """Blanking window: drop events closer than dead_fs to the last kept one."""
    if dead_fs <= 0 or timestamps_fs.size == 0:
        return timestamps_fs
    if timestamps_fs.size == 1 or np.all(np.diff(timestamps_fs) >= dead_fs):
        return timestamps_fs
    keep = np.empty(timestamps_fs.size, dtype=bool)
    last = -np.inf
    for i, t in enumerate(timestamps_fs):
        ok = t - last >= dead_fs
        keep[i] = ok
        if ok:
            last = t
    return timestamps_fs[keep]


def benchtop_scenario(
    swap_state: SwapState = SwapState.PLATE0,
    *,
    rng_seed: int = 20260808,
    duration_s: float = 50.0,
    pair_rate_per_s: float = 1e4,
    offset_ps: float = 40369.0,
    drift_ps_per_s: float = 0.0,
    side_modes: tuple = (),
) -> Scenario:
    """The benchtop reference scenario: an 8 mm type-II crystal feeding two
    1.5 km fibers, 3 ps timing electronics, 450 ps combined detector jitter,
    and a ~40 ns offset on clock 1.

    Only the fiber inverse-group-velocity difference (1799.9 ps/km) is
    physically pinned; the absolute scale (4.9e6 ps/km, a typical silica
    group index) just moves both paths' bookkeeping together.
    """
    inv_vg_idler = 4.9e6
    inv_vg_signal = inv_vg_idler + 1799.9
    fiber = FiberChannel(
        length_km=1.5,
        inv_vg_signal_ps_per_km=inv_vg_signal,
        inv_vg_idler_ps_per_km=inv_vg_idler,
        gvd_signal_s2_per_cm=2.76e-28,
        gvd_idler_s2_per_cm=2.96e-28,
    )
    det = DetectorModel(
        jitter_fwhm_ps=450.0 / math.sqrt(2.0),
        efficiency=0.9,
        dark_rate_per_s=50.0,
        dead_time_ps=1000.0,
    )
    return Scenario(
        spectral=SpectralModel(kind=PhaseMatching.TYPE_II, length_mm=8.0, gvm_fs_per_mm=100.0),
        fiber1=replace(fiber, side_modes=side_modes),
        fiber2=fiber,
        det1=det,
        det2=det,
        clock1=ClockModel(offset_ps=offset_ps, drift_ps_per_s=drift_ps_per_s, resolution_ps=3),
        clock2=ClockModel(offset_ps=0.0, drift_ps_per_s=0.0, resolution_ps=3),
        swap_state=swap_state,
        pair_rate_per_s=pair_rate_per_s,
        duration_s=duration_s,
        rng_seed=rng_seed,
    )


def simulate_run(scenario: Scenario, slabs: int = 1) -> tuple[TagStream, TagStream]:
    """Generate the two detectors' tag streams for one run.

    Returns (stream for detector 1 on clock 1, stream for detector 2 on
    clock 2), both time-sorted and sealed.  Deterministic in (scenario,
    seed) regardless of the slab count used for parallel generation.
    """
    if slabs < 1:
        raise ValidationError("slabs must be >= 1")
    expected = (
        2.0 * scenario.pair_rate_per_s
        + scenario.det1.dark_rate_per_s
        + scenario.det2.dark_rate_per_s
    ) * scenario.duration_s
    if expected > scenario.max_expected_events:
        raise ResourceLimitError(
            f"expected ~{expected:.3g} events exceeds the cap of "
            f"{scenario.max_expected_events:.3g}"
        )

    density = pair_delay_density(scenario)
    n_slabs = max(int(math.ceil(scenario.duration_s)), 1)
    seed_children = np.random.SeedSequence(scenario.rng_seed).spawn(n_slabs)

    def job(i):
        return _slab_events(scenario, density, i, seed_children)

    if slabs == 1:
        results = [job(i) for i in range(n_slabs)]
    else:
        with ThreadPoolExecutor(max_workers=slabs) as pool:
            results = list(pool.map(job, range(n_slabs)))

    true1 = np.concatenate([r[0] for r in results] + [r[2] for r in results])
    true2 = np.concatenate([r[1] for r in results] + [r[3] for r in results])
    true1.sort(kind="stable")
    true2.sort(kind="stable")

    meta = {"seed": scenario.rng_seed, "scenario": scenario.digest()}
    duration = int(math.ceil(scenario.duration_s))
    streams = []
    for channel, clock, det, true_times in (
        (CHANNEL_D1, scenario.clock1, scenario.det1, true1),
        (CHANNEL_D2, scenario.clock2, scenario.det2, true2),
    ):
        recorded = np.atleast_1d(apply_clock(true_times, clock))
        recorded = _dead_time_filter(recorded, int(round(det.dead_time_ps * 1000)))
        streams.append(
            TagStream(
                clock_id=channel,
                swap_state=scenario.swap_state,
                resolution_ps=clock.resolution_ps,
                duration_s=duration,
                timestamps_fs=recorded,
                channels=np.full(recorded.size, channel, dtype=np.uint8),
                metadata=dict(meta),
            )
        )
    return streams[0], streams[1]
