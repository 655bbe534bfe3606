"""Truncated ladder-space primitives: closed forms, guards, serialization."""

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ionsculpt.fock import (
    DensityMatrix,
    DimensionMismatch,
    MotionalAmplitudes,
    TruncationError,
    basis_state,
    coherent_amplitudes,
    default_n_max,
    fidelity_mixed,
    fidelity_pure,
    inner,
    phase_state,
    significant_excitation,
)


class TestCoherentAmplitudes:
    @pytest.mark.parametrize("alpha", [0.3, 0.5 + 0.2j, 1.0])
    def test_matches_factorial_closed_form(self, alpha):
        state = coherent_amplitudes(alpha, 24)
        for n in range(12):
            want = (
                math.exp(-abs(alpha) ** 2 / 2.0)
                * alpha**n
                / math.sqrt(math.factorial(n))
            )
            assert state.amps[n] == pytest.approx(want, abs=1e-14)

    def test_norm_matches_retained_weight(self):
        state = coherent_amplitudes(0.5, 12)
        # Truncation discards < 1e-10 of the population, so the norm of the
        # first n_max + 1 closed-form terms must match to the same order.
        assert abs(state.norm() - 1.0) < 1e-10

    def test_truncation_guard_boundary(self):
        # |alpha| = 1.0 leaves 6.4e-11 above n_max = 12 and passes; pushing
        # the displacement to 1.05 raises the tail to 2.1e-10 and trips it.
        coherent_amplitudes(1.0, 12)
        with pytest.raises(TruncationError):
            coherent_amplitudes(1.05, 12)

    def test_truncation_error_is_informative(self):
        with pytest.raises(TruncationError, match="n_max"):
            coherent_amplitudes(2.0, 6)

    def test_vacuum_limit(self):
        state = coherent_amplitudes(0.0, 4)
        assert state.amps[0] == pytest.approx(1.0)
        assert np.all(state.amps[1:] == 0.0)

    def test_negative_n_max_rejected(self):
        with pytest.raises(ValueError):
            coherent_amplitudes(0.5, -1)


class TestBasisAndPhaseStates:
    def test_basis_state_is_unit_vector(self):
        state = basis_state(3, 6)
        assert state.amps[3] == 1.0
        assert state.norm() == pytest.approx(1.0)
        assert np.count_nonzero(state.amps) == 1

    def test_basis_state_out_of_range(self):
        with pytest.raises(ValueError):
            basis_state(7, 6)

    def test_phase_state_uniform_support(self):
        state = phase_state(2, 14)
        assert np.allclose(state.amps[:3], 1.0 / math.sqrt(3.0))
        assert np.all(state.amps[3:] == 0.0)
        assert state.norm() == pytest.approx(1.0)

    def test_phase_state_requires_room(self):
        with pytest.raises(ValueError):
            phase_state(5, 3)


class TestOverlapsAndFidelity:
    def test_inner_dimension_guard(self):
        with pytest.raises(DimensionMismatch):
            inner(basis_state(0, 4), basis_state(0, 5))

    @given(st.integers(min_value=0, max_value=10 ** 6))
    def test_overlap_bounded_by_one(self, seed):
        gen = np.random.default_rng(seed)
        a = gen.standard_normal(7) + 1j * gen.standard_normal(7)
        b = gen.standard_normal(7) + 1j * gen.standard_normal(7)
        sa = MotionalAmplitudes(a, 6).normalized()
        sb = MotionalAmplitudes(b, 6).normalized()
        assert fidelity_pure(sa, sb) <= 1.0 + 1e-12
        assert fidelity_pure(sa, sa) == pytest.approx(1.0, abs=1e-12)

    def test_mixed_fidelity_consistent_with_pure(self, rng):
        a = random_state(rng)
        b = random_state(rng)
        rho = DensityMatrix.from_pure(b)
        assert fidelity_mixed(a, rho) == pytest.approx(
            fidelity_pure(a, b), abs=1e-12
        )


def random_state(rng, n_max=8):
    amps = rng.standard_normal(n_max + 1) + 1j * rng.standard_normal(n_max + 1)
    return MotionalAmplitudes(amps, n_max).normalized()


class TestDensityMatrix:
    def test_metrics_on_balanced_projector(self):
        rho = DensityMatrix(np.full((2, 2), 0.5), 1)
        assert rho.trace() == pytest.approx(1.0)
        assert rho.purity() == pytest.approx(1.0)
        assert rho.hermiticity_defect() == 0.0
        assert rho.min_eigenvalue() == pytest.approx(0.0, abs=1e-15)

    def test_from_pure_matches_outer_product(self, rng):
        state = random_state(rng, 5)
        rho = DensityMatrix.from_pure(state)
        assert np.allclose(rho.rho, np.outer(state.amps, state.amps.conj()))

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.zeros((2, 3)), 1)

    def test_normalized_zero_trace_rejected(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.zeros((3, 3)), 2).normalized()

    def test_json_round_trip(self, rng):
        state = random_state(rng, 4)
        rho = DensityMatrix.from_pure(state)
        back = DensityMatrix.from_json(json.loads(json.dumps(rho.to_json())))
        assert back.n_max == rho.n_max
        assert np.allclose(back.rho, rho.rho, atol=1e-15)


class TestMotionalAmplitudes:
    def test_json_round_trip_preserves_complex_entries(self, rng):
        state = random_state(rng, 6)
        back = MotionalAmplitudes.from_json(
            json.loads(json.dumps(state.to_json()))
        )
        assert back.n_max == 6
        assert np.allclose(back.amps, state.amps, atol=1e-15)

    def test_amps_are_read_only(self):
        state = basis_state(0, 3)
        with pytest.raises(ValueError):
            state.amps[1] = 0.5

    def test_normalize_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            MotionalAmplitudes(np.zeros(4), 3).normalized()

    def test_length_must_match_n_max(self):
        with pytest.raises(ValueError):
            MotionalAmplitudes(np.zeros(4), 4)


class TestSupportHelpers:
    def test_significant_excitation(self):
        amps = np.array([0.6, 0.0, 0.8, 1e-14, 0.0])
        state = MotionalAmplitudes(amps, 4).normalized()
        assert significant_excitation(state) == 2

    def test_significant_excitation_vacuum(self):
        assert significant_excitation(basis_state(0, 4)) == 0

    def test_default_n_max_reference_points(self):
        assert default_n_max(2, 1, 0.5) == 12
        assert default_n_max(2, 1, 0.8) == 14

    def test_default_n_max_monotone_in_displacement(self):
        sizes = [default_n_max(2, 1, a) for a in (0.2, 0.5, 0.8, 1.1)]
        assert sizes == sorted(sizes)

    def test_default_n_max_leaves_headroom(self):
        for n_d, m in [(2, 1), (4, 2), (6, 3)]:
            assert default_n_max(n_d, m, 0.5) >= n_d + 2 * m + 5
