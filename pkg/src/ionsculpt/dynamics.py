"""Ideal (noise-free) pulse dynamics and the sculpture cycle.

Two resonant interactions act on the ion:

* carrier pulse: rotates only the electronic qubit,
    |n,up>   -> cos(Wt)|n,up>   - i e^{+i phi} sin(Wt)|n,down>
    |n,down> -> cos(Wt)|n,down> - i e^{-i phi} sin(Wt)|n,up>

* red-sideband (Jaynes-Cummings) pulse, with C_n = cos(g tau sqrt(n+1)) and
  S_n = sin(g tau sqrt(n+1)):
    |n,up>   -> C_n |n,up> - e^{-i phi} S_n |n+1,down>
    |n,down> -> C_{n-1} |n,down> + e^{+i phi} S_{n-1} |n-1,up>
  so |0,down> is dark.

One sculpture cycle is carrier (prepare a beta superposition from |up>),
JC pulse, carrier (rotate the epsilon analysis superposition back onto
|up>), then a fluorescence check whose null outcome projects onto |up>.
The surviving motional amplitudes follow the closed recurrence implemented
in ``sculpt_cycle_ideal``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fock import (
    DimensionMismatch,
    JointState,
    MotionalAmplitudes,
    TruncationError,
    coherent_amplitudes,
    fidelity_pure,
    inner,
)


class PulseKind(Enum):
    CARRIER = "carrier"
    JAYNES_CUMMINGS = "jc"


class DegenerateProjection(ValueError):
    """The synthesized measurement outcome has vanishing probability."""


@dataclass(frozen=True)
class PulseSpec:
    """One laser pulse with physical (dimensionful) parameters."""

    kind: PulseKind
    t: float  # duration, seconds
    phi: float  # laser phase, radians
    omega: float  # Rabi frequency, rad/s
    eta: float  # Lamb-Dicke parameter
    gamma: float = 0.0  # intensity-noise scale, seconds

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("pulse duration must be >= 0")
        if self.omega <= 0:
            raise ValueError("Rabi frequency must be > 0")
        if not 0 < self.eta < 1:
            raise ValueError("Lamb-Dicke parameter must lie in (0, 1)")
        if self.gamma < 0:
            raise ValueError("noise scale must be >= 0")

    @property
    def g(self) -> float:
        """Sideband Rabi frequency g = Omega * eta."""
        return self.omega * self.eta


@dataclass(frozen=True)
class CycleParams:
    """Free parameters of one sculpture cycle.

    ``beta`` fixes the preparation superposition |up> + beta|down>,
    ``epsilon`` the analysis superposition, ``g_tau`` the dimensionless JC
    pulse area g*tau, and ``phi`` the JC laser phase.  Only the product
    g*tau enters the ideal dynamics, so the dimensionless area is stored.
    """

    beta: complex
    epsilon: complex
    g_tau: float
    phi: float

    def __post_init__(self):
        if self.g_tau < 0:
            raise ValueError("g_tau must be >= 0")

    def to_json(self) -> str:
        return json.dumps(
            {
                "beta": [self.beta.real, self.beta.imag],
                "epsilon": [self.epsilon.real, self.epsilon.imag],
                "g_tau": self.g_tau,
                "phi": self.phi,
            }
        )

    @staticmethod
    def from_json(text: str) -> "CycleParams":
        d = json.loads(text)
        return CycleParams(
            beta=complex(*d["beta"]),
            epsilon=complex(*d["epsilon"]),
            g_tau=float(d["g_tau"]),
            phi=float(d["phi"]),
        )


def carrier_evolve(state: JointState, w_t: float, phi: float) -> JointState:
    """Apply the carrier rotation by angle Wt with laser phase phi."""
    c = math.cos(w_t)
    s = math.sin(w_t)
    e_plus = cmath.exp(1j * phi)
    up = c * state.up - 1j * e_plus.conjugate() * s * state.down
    down = c * state.down - 1j * e_plus * s * state.up
    return JointState(up, down, state.n_max)


def jc_evolve(state: JointState, g_tau: float, phi: float) -> JointState:
    """Apply the red-sideband pulse with area g*tau and phase phi."""
    n_max = state.n_max
    if abs(state.up[n_max]) > 1e-12:
        raise TruncationError(
            "population at |n_max, up> would spill past the truncation "
            f"(|amp| = {abs(state.up[n_max]):.3e})"
        )
    n = np.arange(n_max + 1)
    c = np.cos(g_tau * np.sqrt(n + 1.0))  # C_n
    s = np.sin(g_tau * np.sqrt(n + 1.0))  # S_n
    e_plus = cmath.exp(1j * phi)

    up = np.zeros_like(state.up)
    down = np.zeros_like(state.down)
    # |n,up> -> C_n |n,up> - e^{-i phi} S_n |n+1,down>
    up += c * state.up
    down[1:] += -e_plus.conjugate() * s[:-1] * state.up[:-1]
    # |n,down> -> C_{n-1}|n,down> + e^{+i phi} S_{n-1}|n-1,up>
    down[0] += state.down[0]  # C_{-1} = 1: dark ground state
    down[1:] += c[:-1] * state.down[1:]
    up[:-1] += e_plus * s[:-1] * state.down[1:]
    return JointState(up, down, n_max)


def beta_to_pulse(beta: complex) -> tuple[float, float]:
    """Carrier pulse (Wt, phi) rotating |up> into N(|up> + beta|down>)."""
    if beta == 0:
        return 0.0, 0.0
    return math.atan(abs(beta)), cmath.phase(1j * beta)


def epsilon_to_pulse(epsilon: complex) -> tuple[float, float]:
    """Carrier pulse (Wt, phi) rotating N(|up> + conj(epsilon)|down>) onto |up>.

    The rotated |up> coefficient comes out real and positive, so projecting
    onto |up> afterwards reproduces the epsilon-weighted analysis overlap
    with no extra phase.
    """
    if epsilon == 0:
        return 0.0, 0.0
    return math.atan(abs(epsilon)), cmath.phase(-1j * epsilon.conjugate())


def attach_electronic_up(state: MotionalAmplitudes) -> JointState:
    up = state.amps.copy()
    down = np.zeros_like(up)
    return JointState(up, down, state.n_max)


def cycle_amplitudes(lam: np.ndarray, p: CycleParams) -> np.ndarray:
    """Unnormalized post-cycle amplitudes Gamma_n (no N_beta/N_eps factors).

    Gamma_n = (C_n + eps beta C_{n-1}) lam_n
              + e^{+i phi} beta S_n lam_{n+1}
              - e^{-i phi} eps S_{n-1} lam_{n-1}   (last term absent at n=0)
    """
    n_max = lam.shape[0] - 1
    n = np.arange(n_max + 1)
    c = np.cos(p.g_tau * np.sqrt(n + 1.0))  # C_n
    s = np.sin(p.g_tau * np.sqrt(n + 1.0))  # S_n
    c_prev = np.empty(n_max + 1)
    c_prev[0] = 1.0  # C_{-1}
    c_prev[1:] = c[:-1]
    e_plus = cmath.exp(1j * p.phi)

    gam = (c + p.epsilon * p.beta * c_prev) * lam
    gam[:-1] += e_plus * p.beta * s[:-1] * lam[1:]
    gam[1:] += -e_plus.conjugate() * p.epsilon * s[:-1] * lam[:-1]
    return gam


def sculpt_cycle_ideal(
    lam_in: MotionalAmplitudes, p: CycleParams
) -> tuple[MotionalAmplitudes, float]:
    """One ideal sculpture cycle: renormalized output state and its
    no-fluorescence probability P = N_eps^2 N_beta^2 sum |Gamma_n|^2."""
    gam = cycle_amplitudes(lam_in.amps, p)
    weight = float(np.sum(np.abs(gam) ** 2))
    if weight < 1e-14:
        raise DegenerateProjection(
            "projection weight below 1e-14; measurement never succeeds"
        )
    n_beta_sq = 1.0 / (1.0 + abs(p.beta) ** 2)
    n_eps_sq = 1.0 / (1.0 + abs(p.epsilon) ** 2)
    prob = n_beta_sq * n_eps_sq * weight
    out = MotionalAmplitudes(gam / math.sqrt(weight), lam_in.n_max)
    return out, prob


def sculpt_cycle_pipeline(
    lam_in: MotionalAmplitudes, p: CycleParams
) -> tuple[np.ndarray, float]:
    """Same cycle as explicit unitaries plus projection (cross-check route).

    Returns the unnormalized motional amplitudes after projecting onto
    |up> and the projection probability.  Equals N_beta N_eps Gamma_n of
    the recurrence exactly, including prefactors.
    """
    w1, phi1 = beta_to_pulse(p.beta)
    w3, phi3 = epsilon_to_pulse(p.epsilon)
    joint = attach_electronic_up(lam_in)
    joint = carrier_evolve(joint, w1, phi1)
    joint = jc_evolve(joint, p.g_tau, p.phi)
    joint = carrier_evolve(joint, w3, phi3)
    return joint.project_up()


def sculpt_run_ideal(
    alpha: complex,
    plan: list[CycleParams],
    target: MotionalAmplitudes,
) -> tuple[MotionalAmplitudes, float, float]:
    """Chain cycles from a coherent start; returns (state, F, P)."""
    state = coherent_amplitudes(alpha, target.n_max).normalized()
    total_p = 1.0
    for p in plan:
        state, prob = sculpt_cycle_ideal(state, p)
        total_p *= prob
    f = fidelity_pure(target, state)
    return state, f, total_p
