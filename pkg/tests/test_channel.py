import pytest

import biphoton_sync as bs
from biphoton_sync.errors import ValidationError


def paper_fiber(**overrides):
    fields = dict(
        length_km=1.5,
        inv_vg_signal_ps_per_km=4.9e6 + 1799.9,
        inv_vg_idler_ps_per_km=4.9e6,
        gvd_signal_s2_per_cm=2.76e-28,
        gvd_idler_s2_per_cm=2.96e-28,
    )
    fields.update(overrides)
    return bs.FiberChannel(**fields)


class TestPropagationDelay:
    def test_direct_product(self):
        ch = bs.FiberChannel(
            length_km=1.0, inv_vg_signal_ps_per_km=5e6, inv_vg_idler_ps_per_km=5e6
        )
        assert bs.propagation_delay(ch, bs.PhotonRole.SIGNAL) == 5e6

    def test_zero_length(self):
        ch = bs.FiberChannel(
            length_km=0.0, inv_vg_signal_ps_per_km=5e6, inv_vg_idler_ps_per_km=5e6
        )
        assert bs.propagation_delay(ch, bs.PhotonRole.IDLER) == 0.0

    def test_paper_walkoff_over_both_arms(self):
        ch = paper_fiber()
        diff = bs.propagation_delay(ch, bs.PhotonRole.SIGNAL) - bs.propagation_delay(
            ch, bs.PhotonRole.IDLER
        )
        assert diff == pytest.approx(2699.85, abs=1e-6)


class TestFiberDispersion:
    def test_degenerate_wavelengths(self):
        ch = bs.FiberChannel(
            length_km=1.0, inv_vg_signal_ps_per_km=4.9e6, inv_vg_idler_ps_per_km=4.9e6
        )
        assert bs.fiber_dispersion(ch) == 0.0

    def test_paper_value(self):
        assert bs.fiber_dispersion(paper_fiber()) == pytest.approx(1799.9, abs=1e-9)

    def test_role_swap_flips_sign(self):
        ch = paper_fiber()
        swapped = paper_fiber(
            inv_vg_signal_ps_per_km=ch.inv_vg_idler_ps_per_km,
            inv_vg_idler_ps_per_km=ch.inv_vg_signal_ps_per_km,
        )
        assert bs.fiber_dispersion(swapped) == -bs.fiber_dispersion(ch)

    def test_consistency_with_delays(self):
        ch = paper_fiber()
        per_km = (
            bs.propagation_delay(ch, bs.PhotonRole.SIGNAL)
            - bs.propagation_delay(ch, bs.PhotonRole.IDLER)
        ) / ch.length_km
        assert per_km == pytest.approx(bs.fiber_dispersion(ch), rel=1e-12)


class TestRouting:
    def test_plate0_sends_signal_to_d1(self):
        routing = bs.route(bs.SwapState.PLATE0)
        assert routing.d1 is bs.PhotonRole.SIGNAL
        assert routing.d2 is bs.PhotonRole.IDLER

    def test_plate45_sends_idler_to_d1(self):
        routing = bs.route(bs.SwapState.PLATE45)
        assert routing.d1 is bs.PhotonRole.IDLER
        assert routing.d2 is bs.PhotonRole.SIGNAL

    def test_double_toggle_is_identity(self):
        state = bs.SwapState.PLATE0
        assert bs.route(state.toggled().toggled()) == bs.route(state)


class TestValidation:
    def test_negative_length_rejected(self):
        with pytest.raises(ValidationError):
            paper_fiber(length_km=-1.0)

    def test_side_mode_amplitude_range(self):
        with pytest.raises(ValidationError):
            paper_fiber(side_modes=((5000.0, 1.5),))
        with pytest.raises(ValidationError):
            paper_fiber(side_modes=((5000.0, 0.0),))

    def test_side_mode_delays_strictly_increasing(self):
        with pytest.raises(ValidationError):
            paper_fiber(side_modes=((5000.0, 0.3), (5000.0, 0.1)))
        with pytest.raises(ValidationError):
            paper_fiber(side_modes=((-100.0, 0.3),))
        # a valid ladder is accepted and normalized to SideMode tuples
        ch = paper_fiber(side_modes=[(5000.0, 0.3), (9000.0, 0.1)])
        assert ch.side_modes == (bs.SideMode(5000.0, 0.3), bs.SideMode(9000.0, 0.1))

    def test_detector_ranges(self):
        with pytest.raises(ValidationError):
            bs.DetectorModel(efficiency=1.2)
        with pytest.raises(ValidationError):
            bs.DetectorModel(jitter_fwhm_ps=-1.0)
