import math
from dataclasses import replace

import numpy as np
import pytest

import biphoton_sync as bs
from biphoton_sync.errors import (
    DegenerateDispersionError,
    RankDeficiencyError,
    UsageError,
    ValidationError,
)

from helpers import noiseless_scenario


def measurement(swap, delta_t, sigma=1.0, r2=1.5):
    return bs.MeasurementResult(swap_state=swap, delta_t_ps=delta_t, sigma_ps=sigma, r2_km=r2)


class TestDeltaMinus:
    def test_paper_style_difference(self):
        m0 = measurement(bs.SwapState.PLATE0, 43069.0, sigma=0.7)
        m45 = measurement(bs.SwapState.PLATE45, 43069.0 - 5432.0, sigma=0.7)
        delta = bs.delta_minus(m0, m45)
        assert delta.value == pytest.approx(5432.0)
        assert delta.sigma == pytest.approx(math.hypot(0.7, 0.7))

    def test_identical_measurements_cancel(self):
        m0 = measurement(bs.SwapState.PLATE0, 12345.0)
        m45 = measurement(bs.SwapState.PLATE45, 12345.0)
        assert bs.delta_minus(m0, m45).value == 0.0

    def test_swap_and_path_consistency_enforced(self):
        m0 = measurement(bs.SwapState.PLATE0, 1.0)
        with pytest.raises(UsageError):
            bs.delta_minus(m0, m0)
        m45_other_r2 = measurement(bs.SwapState.PLATE45, 1.0, r2=2.0)
        with pytest.raises(UsageError):
            bs.delta_minus(m0, m45_other_r2)


class TestSolveDispersion:
    def test_paper_numbers_back_out(self):
        # 5432 ps over an effective 3.0179 km round total.
        delta = bs.Estimate(5432.0, 1.0)
        d = bs.solve_dispersion(delta, 1.5179, 1.5)
        assert d.value == pytest.approx(1799.9, abs=0.1)

    def test_zero_difference(self):
        assert bs.solve_dispersion(bs.Estimate(0.0, 1.0), 1.5, 1.5).value == 0.0

    def test_consistent_forward_model(self):
        d = bs.solve_dispersion(bs.Estimate(5399.7, 1.0), 1.5, 1.5)
        assert d.value == pytest.approx(1799.9, rel=1e-12)
        assert d.sigma == pytest.approx(1.0 / 3.0)

    def test_zero_total_length_rejected(self):
        with pytest.raises(ValidationError):
            bs.solve_dispersion(bs.Estimate(1.0, 1.0), 0.0, 0.0)


class TestSolveR1:
    def test_inverts_forward_model(self):
        r1 = bs.solve_r1(bs.Estimate(5399.7, 1.0), 1799.9, 1.5)
        assert r1.value_km == pytest.approx(1.5, rel=1e-12)
        assert not r1.unphysical

    def test_zero_remote_path(self):
        r1 = bs.solve_r1(bs.Estimate(1799.9 * 1.5, 0.5), 1799.9, 1.5)
        assert r1.value_km == pytest.approx(0.0, abs=1e-12)

    def test_negative_flagged_unphysical(self):
        r1 = bs.solve_r1(bs.Estimate(100.0, 1.0), 1799.9, 1.5)
        assert r1.value_km < 0
        assert r1.unphysical

    def test_dispersion_uncertainty_propagates(self):
        with_sigma = bs.solve_r1(bs.Estimate(5399.7, 0.0), bs.Estimate(1799.9, 0.4), 1.5)
        expected = 5399.7 * 0.4 / 1799.9**2
        assert with_sigma.sigma_km == pytest.approx(expected, rel=1e-9)

    def test_zero_dispersion_rejected(self):
        with pytest.raises(DegenerateDispersionError):
            bs.solve_r1(bs.Estimate(1.0, 1.0), 0.0, 1.5)


class TestSolveT0:
    def test_zero_paths_pass_through(self):
        m = measurement(bs.SwapState.PLATE0, 40369.0)
        t0 = bs.solve_t0(m, 4.9e6, 4.9e6, 0.0, 0.0)
        assert t0.value == 40369.0

    def test_plate0_and_plate45_agree_on_truth(self):
        inv_s, inv_i = 4.9e6 + 1799.9, 4.9e6
        r1, r2, truth = 1.5, 1.5, 40369.0
        m0 = measurement(bs.SwapState.PLATE0, r1 * inv_s - r2 * inv_i + truth)
        m45 = measurement(bs.SwapState.PLATE45, r1 * inv_i - r2 * inv_s + truth)
        t0_a = bs.solve_t0(m0, inv_s, inv_i, r1, r2)
        t0_b = bs.solve_t0(m45, inv_s, inv_i, r1, r2)
        assert t0_a.value == pytest.approx(truth, abs=1e-9)
        assert t0_b.value == pytest.approx(truth, abs=1e-9)

    def test_symmetric_combination(self):
        m0 = measurement(bs.SwapState.PLATE0, 41000.0, sigma=1.0)
        m45 = measurement(bs.SwapState.PLATE45, 39738.0, sigma=1.0)
        t0 = bs.solve_t0_symmetric(m0, m45)
        assert t0.value == pytest.approx(40369.0)
        assert t0.sigma == pytest.approx(0.5 * math.hypot(1.0, 1.0))

    def test_symmetric_identity_when_equal(self):
        m0 = measurement(bs.SwapState.PLATE0, 777.0)
        m45 = measurement(bs.SwapState.PLATE45, 777.0)
        assert bs.solve_t0_symmetric(m0, m45).value == 777.0

    def test_symmetric_rejects_declared_unequal_paths(self):
        m0 = measurement(bs.SwapState.PLATE0, 1.0)
        m45 = measurement(bs.SwapState.PLATE45, 1.0)
        with pytest.raises(UsageError):
            bs.solve_t0_symmetric(m0, m45, r1_km=1.5, r2_km=2.0)

    def test_symmetric_invariant_to_group_velocity_scale(self):
        # Two simulations identical except for the absolute inverse-group-
        # velocity scale; the symmetric solve must not see the difference.
        results = []
        for base_inv in (4.9e6, 5.1e6):
            values = {}
            for swap in (bs.SwapState.PLATE0, bs.SwapState.PLATE45):
                scenario = noiseless_scenario(swap, rng_seed=17, duration_s=2.0,
                                              pair_rate_per_s=2e3)
                fiber = replace(
                    scenario.fiber1,
                    inv_vg_signal_ps_per_km=base_inv + 1799.9,
                    inv_vg_idler_ps_per_km=base_inv,
                )
                scenario = replace(scenario, fiber1=fiber, fiber2=fiber)
                s1, s2 = bs.simulate_run(scenario)
                m = bs.MeasurementResult.from_streams(s1, s2, r2_km=1.5)
                values[swap] = m
            t0 = bs.solve_t0_symmetric(values[bs.SwapState.PLATE0], values[bs.SwapState.PLATE45])
            results.append(t0.value)
        assert results[0] == pytest.approx(results[1], abs=0.5)
        assert results[0] == pytest.approx(40369.0, abs=1.0)


class TestSolveMultiR2:
    def forward_points(self, d, r1, r2s, sigma=1.0):
        return [(r2, d * (r1 + r2), sigma) for r2 in r2s]

    def test_exact_fixtures_recover_parameters(self):
        points = self.forward_points(1799.9, 1.5, [1.0, 2.0, 3.0, 4.5])
        out = bs.solve_multi_r2(points)
        assert out.dispersion_ps_per_km.value == pytest.approx(1799.9, rel=1e-12)
        assert out.r1_km.value == pytest.approx(1.5, rel=1e-12)

    def test_two_points_interpolate_exactly(self):
        points = self.forward_points(1799.9, 1.5, [1.0, 2.0])
        out = bs.solve_multi_r2(points)
        assert out.dispersion_ps_per_km.value == pytest.approx(1799.9, rel=1e-12)
        assert out.r1_km.value == pytest.approx(1.5, rel=1e-12)

    def test_noisy_coverage_calibration(self):
        # 100 trials of 10 points with 1 ps noise: both parameters should sit
        # within 3 propagated sigma in at least 95 trials.
        rng = np.random.default_rng(2718)
        d_true, r1_true = 1799.9, 1.5
        r2s = np.linspace(0.5, 5.0, 10)
        hits = 0
        for _ in range(100):
            noisy = [
                (r2, d_true * (r1_true + r2) + rng.normal(0.0, 1.0), 1.0) for r2 in r2s
            ]
            out = bs.solve_multi_r2(noisy)
            ok_d = abs(out.dispersion_ps_per_km.value - d_true) <= 3 * out.dispersion_ps_per_km.sigma
            ok_r = abs(out.r1_km.value - r1_true) <= 3 * out.r1_km.sigma
            hits += ok_d and ok_r
        assert hits >= 95

    def test_rank_deficiency_detected(self):
        with pytest.raises(RankDeficiencyError):
            bs.solve_multi_r2([(1.5, 100.0, 1.0)])
        with pytest.raises(RankDeficiencyError):
            bs.solve_multi_r2([(1.5, 100.0, 1.0), (1.5, 101.0, 1.0)])

    def test_zero_slope_detected(self):
        with pytest.raises(DegenerateDispersionError):
            bs.solve_multi_r2([(1.0, 0.0, 1.0), (2.0, 0.0, 1.0), (3.0, 0.0, 1.0)])


class TestReports:
    def solution(self):
        return bs.SyncSolution(
            dispersion_ps_per_km=bs.Estimate(1799.9, 0.4),
            r1_km=bs.Estimate(1.5, 0.001),
            t0_ps=bs.Estimate(40369.0, 1.0),
            t0_symmetric_ps=bs.Estimate(40369.2, 0.7),
        )

    def test_report_lines(self):
        text = bs.solution_report(self.solution())
        assert "dispersion_ps_per_km: 1799.9000" in text
        assert "t0_ps: 40369.000" in text
        for line in text.splitlines():
            key, _, value = line.partition(": ")
            assert key and value

    def test_csv_round_trip(self):
        text = bs.solution_csv(self.solution())
        header, row, trailer = text.split("\n")
        assert trailer == ""
        names = header.split(",")
        values = row.split(",")
        assert len(names) == len(values)
        record = dict(zip(names, values))
        assert float(record["dispersion_ps_per_km"]) == pytest.approx(1799.9)
        assert float(record["t0_sigma_ps"]) == pytest.approx(1.0)

    def test_measurement_requires_positive_sigma(self):
        with pytest.raises(ValidationError):
            measurement(bs.SwapState.PLATE0, 1.0, sigma=0.0)
