"""Shared test helpers: random-state factories and hypothesis profiles."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ionsculpt.fock import JointState, MotionalAmplitudes

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def random_motional(rng, n_max):
    """Normalized random complex ladder amplitudes."""
    amps = rng.standard_normal(n_max + 1) + 1j * rng.standard_normal(n_max + 1)
    return MotionalAmplitudes(amps, n_max).normalized()


def random_joint(rng, n_max, clear_top=0):
    """Normalized random joint state; optionally zero the top rungs of the
    excited branch so a sideband pulse cannot spill past the cutoff."""
    up = rng.standard_normal(n_max + 1) + 1j * rng.standard_normal(n_max + 1)
    down = rng.standard_normal(n_max + 1) + 1j * rng.standard_normal(n_max + 1)
    if clear_top:
        up[-clear_top:] = 0.0
    norm = np.sqrt(np.sum(np.abs(up) ** 2) + np.sum(np.abs(down) ** 2))
    return JointState(up / norm, down / norm, n_max)


def sector_weights(state):
    """Weight in each doublet {|n, up>, |n+1, down>}; index -1 is the dark
    ground doublet containing only |0, down>."""
    weights = {-1: abs(state.down[0]) ** 2}
    for k in range(state.n_max):
        weights[k] = abs(state.up[k]) ** 2 + abs(state.down[k + 1]) ** 2
    weights[state.n_max] = abs(state.up[state.n_max]) ** 2
    return weights


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
