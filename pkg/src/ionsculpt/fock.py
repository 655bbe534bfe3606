"""Truncated Fock-space primitives shared by every other module.

States live in a hard-truncated harmonic oscillator basis |0>..|n_max>,
optionally tensored with a two-level electronic system {up, down}.  All
amplitudes are complex128.  Nothing in this module renormalizes silently:
truncation loss raises, and callers invoke ``normalized()`` explicitly,
because the normalization constants carry physical meaning (success
probabilities) elsewhere in the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

TRUNCATION_TOL = 1e-10


class TruncationError(ValueError):
    """Raised when weight beyond the truncation index n_max is not negligible."""


class DimensionMismatch(ValueError):
    """Raised when two states or operators disagree on n_max."""


def _as_complex_vector(x, length: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.complex128)
    if arr.shape != (length,):
        raise ValueError(f"{name} must have shape ({length},), got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MotionalAmplitudes:
    """A pure motional state: complex amplitudes over |0>..|n_max>."""

    amps: np.ndarray
    n_max: int

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        object.__setattr__(
            self, "amps", _as_complex_vector(self.amps, self.n_max + 1, "amps")
        )

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def normalized(self) -> "MotionalAmplitudes":
        n = self.norm()
        if n < 1e-300:
            raise ValueError("cannot normalize a zero vector")
        return MotionalAmplitudes(self.amps / n, self.n_max)

    def to_json(self) -> str:
        return json.dumps(
            {"n_max": self.n_max, "amps": [[z.real, z.imag] for z in self.amps]}
        )

    @staticmethod
    def from_json(text: str) -> "MotionalAmplitudes":
        data = json.loads(text)
        amps = np.array([complex(re, im) for re, im in data["amps"]])
        return MotionalAmplitudes(amps, int(data["n_max"]))


@dataclass(frozen=True, eq=False)
class JointState:
    """Entangled electronic/motional pure state.

    ``up[n]`` is the coefficient of |n, up>, ``down[n]`` of |n, down>.
    """

    up: np.ndarray
    down: np.ndarray
    n_max: int

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        object.__setattr__(
            self, "up", _as_complex_vector(self.up, self.n_max + 1, "up")
        )
        object.__setattr__(
            self, "down", _as_complex_vector(self.down, self.n_max + 1, "down")
        )

    def norm(self) -> float:
        return float(
            np.sqrt(np.sum(np.abs(self.up) ** 2) + np.sum(np.abs(self.down) ** 2))
        )

    def normalized(self) -> "JointState":
        n = self.norm()
        if n < 1e-300:
            raise ValueError("cannot normalize a zero vector")
        return JointState(self.up / n, self.down / n, self.n_max)

    def project_up(self) -> tuple[np.ndarray, float]:
        """Project onto the electronic |up> state.

        Returns the unnormalized motional amplitude vector and the
        projection probability (its squared norm).
        """
        prob = float(np.sum(np.abs(self.up) ** 2))
        return self.up.copy(), prob


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Motional density matrix over the truncated Fock basis."""

    rho: np.ndarray
    n_max: int

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        arr = np.asarray(self.rho, dtype=np.complex128)
        d = self.n_max + 1
        if arr.shape != (d, d):
            raise ValueError(f"rho must have shape ({d},{d}), got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "rho", arr)

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.min(np.linalg.eigvalsh(herm)))

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def normalized(self) -> "DensityMatrix":
        tr = np.trace(self.rho)
        if abs(tr) < 1e-300:
            raise ValueError("cannot normalize a traceless matrix")
        return DensityMatrix(self.rho / tr, self.n_max)

    def to_json(self) -> str:
        rows = [[[z.real, z.imag] for z in row] for row in self.rho]
        return json.dumps({"n_max": self.n_max, "rho": rows})

    @staticmethod
    def from_json(text: str) -> "DensityMatrix":
        data = json.loads(text)
        rho = np.array(
            [[complex(re, im) for re, im in row] for row in data["rho"]]
        )
        return DensityMatrix(rho, int(data["n_max"]))

    @staticmethod
    def from_pure(state: MotionalAmplitudes) -> "DensityMatrix":
        v = state.amps
        return DensityMatrix(np.outer(v, v.conj()), state.n_max)


def coherent_amplitudes(alpha: complex, n_max: int) -> MotionalAmplitudes:
    """Coherent-state amplitudes exp(-|alpha|^2/2) alpha^n / sqrt(n!).

    Computed by the stable recursion amp[n+1] = amp[n] * alpha / sqrt(n+1).
    Not renormalized: if the truncated tail carries more than 1e-10 of the
    population (closed form via the regularized incomplete gamma of the
    Poisson photon-number tail) a TruncationError is raised instead.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    nbar = abs(alpha) ** 2
    tail = float(gammainc(n_max + 1, nbar))
    if tail > TRUNCATION_TOL:
        raise TruncationError(
            f"coherent state |alpha|^2={nbar:g} keeps {tail:.3e} of its "
            f"population above n_max={n_max}"
        )
    amps = np.zeros(n_max + 1, dtype=np.complex128)
    amps[0] = math.exp(-nbar / 2.0)
    for n in range(n_max):
        amps[n + 1] = amps[n] * alpha / math.sqrt(n + 1)
    return MotionalAmplitudes(amps, n_max)


def basis_state(n: int, n_max: int) -> MotionalAmplitudes:
    if not 0 <= n <= n_max:
        raise ValueError("need 0 <= n <= n_max")
    amps = np.zeros(n_max + 1, dtype=np.complex128)
    amps[n] = 1.0
    return MotionalAmplitudes(amps, n_max)


def phase_state(n_d: int, n_max: int) -> MotionalAmplitudes:
    """Truncated phase state (|0> + |1> + ... + |n_d>)/sqrt(n_d+1)."""
    if not 0 <= n_d <= n_max:
        raise ValueError("need 0 <= n_d <= n_max")
    amps = np.zeros(n_max + 1, dtype=np.complex128)
    amps[: n_d + 1] = 1.0 / math.sqrt(n_d + 1)
    return MotionalAmplitudes(amps, n_max)


def inner(a: MotionalAmplitudes, b: MotionalAmplitudes) -> complex:
    """<a|b> = sum_n conj(a[n]) b[n]."""
    if a.n_max != b.n_max:
        raise DimensionMismatch(f"n_max {a.n_max} != {b.n_max}")
    return complex(np.vdot(a.amps, b.amps))


def fidelity_pure(target: MotionalAmplitudes, state: MotionalAmplitudes) -> float:
    """|<target|state>|^2 for normalized pure states."""
    return float(abs(inner(target, state)) ** 2)


def fidelity_mixed(target: MotionalAmplitudes, rho: DensityMatrix) -> float:
    """<target| rho |target> for a normalized target and unit-trace rho."""
    if target.n_max != rho.n_max:
        raise DimensionMismatch(f"n_max {target.n_max} != {rho.n_max}")
    v = target.amps
    return float(np.real(np.vdot(v, rho.rho @ v)))


def significant_excitation(state: MotionalAmplitudes, tol: float = 1e-12) -> int:
    """Largest n with |amps[n]| > tol (0 for an all-zero tail)."""
    idx = np.nonzero(np.abs(state.amps) > tol)[0]
    return int(idx[-1]) if idx.size else 0


def default_n_max(n_d: int, m_cycles: int, alpha: complex) -> int:
    """Truncation policy: covers both the target support widened by the
    cycle count and the coherent tail (10 sigma above the Poisson mean)."""
    nbar = abs(alpha) ** 2
    return max(n_d + 2 * m_cycles + 5, math.ceil(nbar + 10.0 * math.sqrt(nbar + 1.0)))
