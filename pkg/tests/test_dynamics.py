"""Ideal two-level/ladder pulse dynamics and the single-cycle pipeline."""

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ionsculpt.dynamics import (
    CycleParams,
    DegenerateProjection,
    PulseKind,
    PulseSpec,
    attach_electronic_up,
    beta_to_pulse,
    carrier_evolve,
    cycle_amplitudes,
    epsilon_to_pulse,
    jc_evolve,
    sculpt_cycle_ideal,
    sculpt_cycle_pipeline,
    sculpt_run_ideal,
)
from ionsculpt.fock import (
    JointState,
    MotionalAmplitudes,
    TruncationError,
    basis_state,
    coherent_amplitudes,
    fidelity_pure,
    phase_state,
)

from conftest import random_joint, random_motional, sector_weights

angles = st.floats(min_value=0.0, max_value=4.0 * math.pi)
phases = st.floats(min_value=0.0, max_value=2.0 * math.pi)
seeds = st.integers(min_value=0, max_value=10 ** 6)


class TestCarrier:
    def test_full_angle_convention_on_ground(self):
        state = attach_electronic_up(basis_state(0, 2))
        out = carrier_evolve(state, math.pi / 2.0, 0.0)
        assert out.up[0] == pytest.approx(0.0, abs=1e-15)
        assert out.down[0] == pytest.approx(-1j, abs=1e-15)

    def test_phase_convention(self):
        phi = 0.7
        state = attach_electronic_up(basis_state(0, 2))
        out = carrier_evolve(state, math.pi / 2.0, phi)
        assert out.down[0] == pytest.approx(-1j * np.exp(1j * phi), abs=1e-14)
        flipped = JointState(np.zeros(3), basis_state(0, 2).amps, 2)
        back = carrier_evolve(flipped, math.pi / 2.0, phi)
        assert back.up[0] == pytest.approx(-1j * np.exp(-1j * phi), abs=1e-14)

    @given(seeds, angles, phases)
    def test_norm_preserved(self, seed, w_t, phi):
        state = random_joint(np.random.default_rng(seed), 6)
        out = carrier_evolve(state, w_t, phi)
        assert out.norm() == pytest.approx(1.0, abs=1e-12)

    @given(seeds, angles, angles, phases)
    def test_same_phase_pulses_compose(self, seed, w1, w2, phi):
        state = random_joint(np.random.default_rng(seed), 6)
        split = carrier_evolve(carrier_evolve(state, w1, phi), w2, phi)
        whole = carrier_evolve(state, w1 + w2, phi)
        assert np.allclose(split.up, whole.up, atol=1e-12)
        assert np.allclose(split.down, whole.down, atol=1e-12)

    def test_motional_index_untouched(self, rng):
        state = random_joint(rng, 6)
        out = carrier_evolve(state, 1.3, 0.4)
        for n in range(7):
            before = abs(state.up[n]) ** 2 + abs(state.down[n]) ** 2
            after = abs(out.up[n]) ** 2 + abs(out.down[n]) ** 2
            assert after == pytest.approx(before, abs=1e-12)


class TestBlueSideband:
    def test_full_angle_convention_on_ground(self):
        phi = 0.7
        state = attach_electronic_up(basis_state(0, 3))
        out = jc_evolve(state, math.pi / 2.0, phi)
        assert out.up[0] == pytest.approx(0.0, abs=1e-15)
        assert out.down[1] == pytest.approx(-np.exp(-1j * phi), abs=1e-14)

    def test_ground_lower_branch_is_dark(self):
        state = JointState(np.zeros(4), basis_state(0, 3).amps, 3)
        out = jc_evolve(state, 2.1, 0.3)
        assert out.down[0] == pytest.approx(1.0)
        assert np.allclose(out.up, 0.0, atol=1e-15)

    @given(seeds, angles, phases)
    def test_norm_preserved(self, seed, g_tau, phi):
        state = random_joint(np.random.default_rng(seed), 8, clear_top=1)
        out = jc_evolve(state, g_tau, phi)
        assert out.norm() == pytest.approx(1.0, abs=1e-12)

    @given(seeds, angles, phases)
    def test_doublet_weights_conserved(self, seed, g_tau, phi):
        state = random_joint(np.random.default_rng(seed), 8, clear_top=1)
        before = sector_weights(state)
        after = sector_weights(jc_evolve(state, g_tau, phi))
        for k, w in before.items():
            assert after[k] == pytest.approx(w, abs=1e-12)

    def test_truncation_spill_guard(self):
        state = attach_electronic_up(basis_state(3, 3))
        with pytest.raises(TruncationError):
            jc_evolve(state, 1.0, 0.0)


class TestPulseParameterMaps:
    @given(seeds)
    def test_beta_map_sets_branch_ratio(self, seed):
        gen = np.random.default_rng(seed)
        beta = gen.standard_normal() + 1j * gen.standard_normal()
        w_t, phi = beta_to_pulse(beta)
        out = carrier_evolve(attach_electronic_up(basis_state(0, 2)), w_t, phi)
        assert out.down[0] / out.up[0] == pytest.approx(beta, abs=1e-12)

    @given(seeds)
    def test_epsilon_map_empties_lower_branch(self, seed):
        gen = np.random.default_rng(seed)
        eps = gen.standard_normal() + 1j * gen.standard_normal()
        # The map is defined so the pulse rotates |up> + conj(eps)|down>
        # back onto the upper branch with a positive amplitude.
        up = np.zeros(3, complex)
        down = np.zeros(3, complex)
        up[0] = 1.0
        down[0] = np.conj(eps)
        norm = math.sqrt(1.0 + abs(eps) ** 2)
        state = JointState(up / norm, down / norm, 2)
        w_t, phi = epsilon_to_pulse(eps)
        out = carrier_evolve(state, w_t, phi)
        assert out.down[0] == pytest.approx(0.0, abs=1e-12)
        assert out.up[0].imag == pytest.approx(0.0, abs=1e-12)
        assert out.up[0].real == pytest.approx(1.0, abs=1e-12)


class TestCycleRoutes:
    @given(seeds)
    def test_closed_form_matches_pulse_pipeline(self, seed):
        gen = np.random.default_rng(seed)
        state = random_motional(gen, 10)
        # Zero the top two rungs: the sideband pulse climbs one rung and
        # must not spill past the cutoff on either route.
        amps = state.amps.copy()
        amps[-2:] = 0.0
        state = MotionalAmplitudes(amps, 10).normalized()
        params = CycleParams(
            beta=gen.standard_normal() + 1j * gen.standard_normal(),
            epsilon=gen.standard_normal() + 1j * gen.standard_normal(),
            g_tau=gen.uniform(0.1, 6.0),
            phi=gen.uniform(0.0, 2.0 * math.pi),
        )
        n_beta = 1.0 / math.sqrt(1.0 + abs(params.beta) ** 2)
        n_eps = 1.0 / math.sqrt(1.0 + abs(params.epsilon) ** 2)
        closed = n_beta * n_eps * cycle_amplitudes(state.amps, params)
        piped, prob = sculpt_cycle_pipeline(state, params)
        assert np.allclose(closed, piped, atol=1e-12)
        assert prob == pytest.approx(np.sum(np.abs(piped) ** 2), abs=1e-12)

    def test_projection_weight_is_output_probability(self, rng):
        state = random_motional(rng, 8)
        amps = state.amps.copy()
        amps[-2:] = 0.0
        state = MotionalAmplitudes(amps, 8).normalized()
        params = CycleParams(0.4 - 0.2j, 1.5 + 0.1j, 2.0, 0.3)
        out, prob = sculpt_cycle_ideal(state, params)
        assert out.norm() == pytest.approx(1.0, abs=1e-12)
        assert 0.0 < prob <= 1.0
        weight = np.sum(np.abs(cycle_amplitudes(state.amps, params)) ** 2)
        scale = (1.0 + abs(params.beta) ** 2) * (1.0 + abs(params.epsilon) ** 2)
        assert prob == pytest.approx(weight / scale, abs=1e-12)

    def test_degenerate_projection_raises(self):
        # beta = epsilon = 0 with a quarter sideband period on the vacuum
        # drives all population to the discarded branch.
        with pytest.raises(DegenerateProjection):
            sculpt_cycle_ideal(
                basis_state(0, 4), CycleParams(0.0, 0.0, math.pi / 2.0, 0.0)
            )


class TestRunner:
    def test_zero_cycles_returns_initial_state(self):
        target = phase_state(2, 12)
        state, f, p = sculpt_run_ideal(0.5, (), target)
        assert p == pytest.approx(1.0)
        assert fidelity_pure(state, coherent_amplitudes(0.5, 12)) == (
            pytest.approx(1.0, abs=1e-12)
        )
        assert f == pytest.approx(fidelity_pure(target, state), abs=1e-15)

    def test_single_cycle_worked_point(self):
        # Reference operating point for the two-phonon phase target from a
        # 0.5 displacement; figures frozen from this implementation.
        params = CycleParams(-0.3994 - 6.408e-5j, 25.6159 - 0.0379j, 3.79, 3.14)
        target = phase_state(2, 12)
        state, f, p = sculpt_run_ideal(0.5, (params,), target)
        assert f == pytest.approx(0.9942376531616459, abs=1e-9)
        assert p == pytest.approx(0.38287149975396145, abs=1e-9)
        assert state.norm() == pytest.approx(1.0, abs=1e-12)


class TestParameterValidation:
    def test_cycle_params_json_round_trip(self):
        params = CycleParams(0.3 - 0.1j, 1.2 + 0.4j, 2.5, 1.1)
        back = CycleParams.from_json(json.loads(json.dumps(params.to_json())))
        assert back.beta == pytest.approx(params.beta)
        assert back.epsilon == pytest.approx(params.epsilon)
        assert back.g_tau == params.g_tau
        assert back.phi == params.phi

    def test_negative_sideband_area_rejected(self):
        with pytest.raises(ValueError):
            CycleParams(0.0, 0.0, -1.0, 0.0)

    def test_pulse_spec_guards(self):
        PulseSpec(PulseKind.CARRIER, 1e-6, 0.0, 1e6, 0.2)
        with pytest.raises(ValueError):
            PulseSpec(PulseKind.CARRIER, -1e-6, 0.0, 1e6, 0.2)
        with pytest.raises(ValueError):
            PulseSpec(PulseKind.JAYNES_CUMMINGS, 1e-6, 0.0, 1e6, 1.2)
        with pytest.raises(ValueError):
            PulseSpec(PulseKind.JAYNES_CUMMINGS, 1e-6, 0.0, 0.0, 0.2)

    def test_pulse_spec_coupling(self):
        spec = PulseSpec(PulseKind.JAYNES_CUMMINGS, 1e-6, 0.0, 2.0e6, 0.25)
        assert spec.g == pytest.approx(0.5e6)
