"""Noisy-cycle search and the initial-excitation scan."""

import json
import math

import numpy as np
import pytest

from ionsculpt.fock import fidelity_mixed, phase_state
from ionsculpt.noise import NoiseParams, sculpt_noisy_single_cycle
from ionsculpt.optimize import (
    DEFAULT_SCAN_EXCITATIONS,
    PARAM_NAMES,
    SearchSpace,
    batched_cycle_figures,
    optimize_noisy,
    scan_initial_excitation,
    scan_to_csv,
)
from ionsculpt.solver import rate

P_NOISY = NoiseParams.from_eta(gamma=1e-8)


def random_settings(rng, count):
    """Random pulse durations (seconds) and phases for the batched route."""
    return (
        rng.uniform(1e-8, 1.2e-6, count),
        rng.uniform(0.0, 2.0 * math.pi, count),
        rng.uniform(1e-8, 6e-6, count),
        rng.uniform(0.0, 2.0 * math.pi, count),
        rng.uniform(1e-8, 1.2e-6, count),
        rng.uniform(0.0, 2.0 * math.pi, count),
    )


class TestBatchedFigures:
    def test_matches_scalar_pipeline(self, rng):
        target = phase_state(2, 10)
        sets = random_settings(rng, 40)
        f_b, p_b = batched_cycle_figures(0.5, target, *sets, P_NOISY, 10)
        for k in range(40):
            pulses = tuple(arr[k] for arr in sets)
            rho, prob = sculpt_noisy_single_cycle(0.5, pulses, P_NOISY, 10)
            assert f_b[k] == pytest.approx(
                fidelity_mixed(target, rho), abs=1e-12
            )
            assert p_b[k] == pytest.approx(prob, abs=1e-12)

    def test_phase_periodicity(self, rng):
        target = phase_state(2, 10)
        sets = random_settings(rng, 12)
        shifted = (
            sets[0],
            sets[1] + 2.0 * math.pi,
            sets[2],
            sets[3] - 2.0 * math.pi,
            sets[4],
            sets[5] + 4.0 * math.pi,
        )
        f_a, p_a = batched_cycle_figures(0.5, target, *sets, P_NOISY, 10)
        f_b, p_b = batched_cycle_figures(0.5, target, *shifted, P_NOISY, 10)
        assert np.max(np.abs(f_a - f_b)) < 1e-12
        assert np.max(np.abs(p_a - p_b)) < 1e-12

    def test_scalar_inputs_allowed(self):
        target = phase_state(2, 10)
        f, p = batched_cycle_figures(
            0.5, target, 5e-7, 0.1, 2e-6, 0.2, 5e-7, 0.3, P_NOISY, 10
        )
        assert f.shape == ()
        assert 0.0 <= float(f) <= 1.0
        assert 0.0 < float(p) <= 1.0

    def test_window_mismatch_rejected(self):
        with pytest.raises(ValueError):
            batched_cycle_figures(
                0.5, phase_state(2, 8), 5e-7, 0.0, 2e-6, 0.0, 5e-7, 0.0,
                P_NOISY, 10,
            )


class TestOptimizer:
    def small_run(self, objective="rate", budget=2000, seed=3):
        target = phase_state(2, 12)
        return optimize_noisy(
            target, SearchSpace(), P_NOISY, budget, seed, objective
        )

    def test_deterministic(self):
        a = self.small_run()
        b = self.small_run()
        assert a.to_json() == b.to_json()

    def test_trace_is_monotone(self):
        result = self.small_run()
        values = [r for _, r in result.trace]
        assert values == sorted(values)
        assert values[-1] == pytest.approx(result.r, abs=1e-12)

    def test_reported_figures_recompute(self):
        result = self.small_run()
        q = result.params
        pulses = (
            q["w_t1"] / P_NOISY.omega,
            q["phi1"],
            q["g_t2"] / P_NOISY.g,
            q["phi2"],
            q["w_t3"] / P_NOISY.omega,
            q["phi3"],
        )
        target = phase_state(2, 12)
        rho, prob = sculpt_noisy_single_cycle(
            math.sqrt(q["n_bar"]), pulses, P_NOISY, 12
        )
        assert result.f == pytest.approx(fidelity_mixed(target, rho), abs=1e-9)
        assert result.p == pytest.approx(prob, abs=1e-9)
        assert result.r == pytest.approx(rate(result.f, result.p), abs=1e-9)

    def test_small_budget_flags_exhaustion(self):
        result = self.small_run(budget=2000)
        # 2000 < the 8^6 grid, so everything goes into the grid stage.
        assert result.evaluations == 2000
        assert result.budget_exhausted

    def test_single_evaluation_budget(self):
        result = self.small_run(budget=1)
        assert result.evaluations == 1
        assert result.budget_exhausted
        assert len(result.trace) == 1
        assert 0.0 <= result.f <= 1.0

    def test_fidelity_objective_dominates_on_shared_grid(self):
        # Equal (seed, budget) below the grid size evaluate the same
        # points, so the fidelity pick cannot have lower F.
        by_rate = self.small_run("rate")
        by_fid = self.small_run("fidelity")
        assert by_fid.objective == "fidelity"
        assert by_fid.f >= by_rate.f - 1e-12

    def test_result_serializes(self):
        blob = json.loads(self.small_run(budget=500).to_json())
        assert set(blob["params"]) == set(PARAM_NAMES)
        assert blob["objective"] == "rate"
        assert blob["evaluations"] == 500
        assert isinstance(blob["trace"], list)

    def test_degenerate_bounds_pin_parameters(self):
        space = SearchSpace(
            w_t1=(0.38, 0.38),
            g_t2=(3.79, 3.79),
            w_t3=(1.53, 1.53),
            n_bar=(0.25, 0.25),
        )
        result = optimize_noisy(
            phase_state(2, 12), space, P_NOISY, 300, 0
        )
        assert result.params["w_t1"] == pytest.approx(0.38)
        assert result.params["g_t2"] == pytest.approx(3.79)
        assert result.params["w_t3"] == pytest.approx(1.53)
        assert result.params["n_bar"] == pytest.approx(0.25)

    def test_argument_validation(self):
        target = phase_state(2, 12)
        with pytest.raises(ValueError):
            optimize_noisy(target, SearchSpace(), P_NOISY, 0, 0)
        with pytest.raises(ValueError):
            optimize_noisy(target, SearchSpace(), P_NOISY, 10, 0, "speed")


class TestSearchSpace:
    def test_bounds_order_matches_parameter_names(self):
        space = SearchSpace()
        assert len(space.bounds()) == len(PARAM_NAMES)
        assert space.bounds()[0] == space.w_t1
        assert space.bounds()[6] == space.n_bar

    def test_validation(self):
        with pytest.raises(ValueError):
            SearchSpace(w_t1=(2.0, 1.0))
        with pytest.raises(ValueError):
            SearchSpace(g_t2=(-0.1, 1.0))
        with pytest.raises(ValueError):
            SearchSpace(n_bar=(math.inf, math.inf))


class TestScan:
    def test_reference_row(self):
        rows = scan_initial_excitation(phase_state(2, 14), [0.25])
        assert len(rows) == 1
        row = rows[0]
        assert row.n_bar == 0.25
        assert row.p == pytest.approx(0.38286114564503837, abs=1e-9)
        assert row.f == pytest.approx(0.9942106018326472, abs=1e-9)
        assert row.r == pytest.approx(0.6045527584495185, abs=1e-9)
        assert row.r == pytest.approx(rate(row.f, row.p), abs=1e-12)

    def test_csv_form(self):
        rows = scan_initial_excitation(phase_state(2, 12), [0.16])
        text = scan_to_csv(rows)
        lines = text.splitlines()
        assert lines[0] == "n_bar,g_tau1,phi1,P,F,R"
        assert len(lines) == 2
        assert lines[1].startswith("0.16,")

    def test_default_ladder(self):
        assert DEFAULT_SCAN_EXCITATIONS == (
            0.04, 0.09, 0.16, 0.25, 0.36, 0.49, 0.64,
        )

    def test_validation(self):
        with pytest.raises(ValueError):
            scan_initial_excitation(phase_state(2, 12), [])
        with pytest.raises(ValueError):
            scan_initial_excitation(phase_state(2, 12), [-0.1])
        with pytest.raises(ValueError):
            scan_initial_excitation(phase_state(3, 12), [0.25])
