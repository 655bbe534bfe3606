"""Phase-space tools: Wigner grids and iso-fidelity constructions.

The Wigner convention is fixed by calibration against the coherent state:
for real alpha > 0 the grid is a normalized Gaussian peaked at
(q, p) = (-alpha, 0) with peak value 2/pi,

    W(q, p) = (2/pi) exp[-2 (q + alpha)^2 - 2 p^2].

Equivalently, W here is the standard displaced-parity Wigner function
evaluated at beta = -(q + i p).  Note the unit-width variant
(2/pi) exp[-(q+alpha)^2 - p^2] sometimes quoted for this picture cannot
be a Wigner function in any convention: it integrates to 2, so it is
incompatible with Sum W dq dp = 1.  This package keeps the peak location
and the 2/pi peak value and the normalization, which forces the widths
above.  The general Fock-basis kernel (Laguerre closed form) is derived
in that convention; tests check it against a displacement-parity oracle.

The iso-fidelity constructions produce the two-level states and mixtures
that share a fixed overlap F with the balanced superposition
(|0> + |1>)/sqrt(2): a one-parameter family, demonstrating that a single
fidelity number does not determine the state (their Wigner grids differ
by much more than the fidelity gap of zero).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .fock import (
    DensityMatrix,
    DimensionMismatch,
    MotionalAmplitudes,
)

TWO_OVER_PI = 2.0 / math.pi

#: Default quadrature axes: covers every state this package produces
#: (|alpha| <= 1, few-phonon targets) with normalization error < 1e-3.
DEFAULT_GRID_EDGE = 4.0
DEFAULT_GRID_POINTS = 161

NORMALIZATION_TOL = 1e-2


class GridTooCoarse(ValueError):
    """Wigner grid fails its normalization self-check."""


class OutOfCone(ValueError):
    """Requested fidelity is unreachable at the given mixing weights."""


def default_axes() -> tuple[np.ndarray, np.ndarray]:
    q = np.linspace(-DEFAULT_GRID_EDGE, DEFAULT_GRID_EDGE, DEFAULT_GRID_POINTS)
    return q, q.copy()


@dataclass(frozen=True)
class WignerGrid:
    """Wigner values on a uniform quadrature grid.

    ``values[i, j]`` is W(q_axis[i], p_axis[j]).
    """

    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q_axis, dtype=float)
        p = np.asarray(self.p_axis, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if q.ndim != 1 or p.ndim != 1 or q.size < 2 or p.size < 2:
            raise ValueError("axes must be 1-D with at least two points")
        if v.shape != (q.size, p.size):
            raise ValueError(
                f"values must have shape ({q.size},{p.size}), got {v.shape}"
            )
        for name, ax in (("q_axis", q), ("p_axis", p)):
            steps = np.diff(ax)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise ValueError(f"{name} must be uniform")
        for name, arr in (("q_axis", q), ("p_axis", p), ("values", v)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def dq(self) -> float:
        return float(self.q_axis[1] - self.q_axis[0])

    @property
    def dp(self) -> float:
        return float(self.p_axis[1] - self.p_axis[0])

    def normalization(self) -> float:
        return float(self.values.sum() * self.dq * self.dp)

    def sup_distance(self, other: "WignerGrid") -> float:
        if self.values.shape != other.values.shape:
            raise DimensionMismatch("grids have different shapes")
        if not (
            np.array_equal(self.q_axis, other.q_axis)
            and np.array_equal(self.p_axis, other.p_axis)
        ):
            raise ValueError("grids use different axes")
        return float(np.max(np.abs(self.values - other.values)))

    def to_json(self) -> str:
        return json.dumps(
            {
                "q_axis": self.q_axis.tolist(),
                "p_axis": self.p_axis.tolist(),
                "values": self.values.tolist(),
            }
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["q", "p", "w"])
        for i, q in enumerate(self.q_axis):
            for j, p in enumerate(self.p_axis):
                w.writerow([repr(float(q)), repr(float(p)), repr(float(self.values[i, j]))])
        return buf.getvalue()


def wigner_kernel(n: int, m: int, q, p):
    """Wigner transform of |n><m| at beta = -(q + i p) (complex-valued).

    Closed Laguerre form of the displaced-parity expectation; for m > n
    the Hermitian partner conj(kernel(m, n)) is returned.  ``q`` and ``p``
    broadcast.
    """
    if n < 0 or m < 0:
        raise IndexError("Fock indices must be >= 0")
    if m > n:
        return np.conj(wigner_kernel(m, n, q, p))
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    beta = -(q + 1j * p)
    r2 = 4.0 * (q * q + p * p)
    pref = TWO_OVER_PI * (-1.0) ** m * math.exp(
        0.5 * (gammaln(m + 1) - gammaln(n + 1))
    )
    return (
        pref
        * (2.0 * np.conj(beta)) ** (n - m)
        * np.exp(-r2 / 2.0)
        * eval_genlaguerre(m, n - m, r2)
    )


def wigner(
    state: DensityMatrix | MotionalAmplitudes,
    q_axis: np.ndarray | None = None,
    p_axis: np.ndarray | None = None,
) -> WignerGrid:
    """Wigner grid of a motional state (pure states become rank-1 rho).

    Raises GridTooCoarse when the grid sum misses unit normalization by
    more than 1e-2 (either because the axes clip the state or because
    the spacing undersamples it).
    """
    if isinstance(state, MotionalAmplitudes):
        rho = np.outer(state.amps, state.amps.conj())
        n_max = state.n_max
    else:
        rho = state.rho
        n_max = state.n_max
    if q_axis is None or p_axis is None:
        dq_ax, dp_ax = default_axes()
        q_axis = dq_ax if q_axis is None else q_axis
        p_axis = dp_ax if p_axis is None else p_axis
    q = np.asarray(q_axis, dtype=float)
    p = np.asarray(p_axis, dtype=float)
    qq = q[:, None]
    pp = p[None, :]
    acc = np.zeros((q.size, p.size), dtype=np.complex128)
    for n in range(n_max + 1):
        acc += rho[n, n] * wigner_kernel(n, n, qq, pp)
        for m in range(n):
            k = wigner_kernel(n, m, qq, pp)
            acc += rho[n, m] * k + rho[m, n] * np.conj(k)
    grid = WignerGrid(q, p, acc.real)
    err = abs(grid.normalization() - 1.0)
    if err > NORMALIZATION_TOL:
        raise GridTooCoarse(
            f"grid normalization off by {err:.3e}; widen or refine the axes"
        )
    return grid


# ---------------------------------------------------------------------------
# Iso-fidelity constructions on the {|0>, |1>} subspace

@dataclass(frozen=True)
class BlochVector:
    r_x: float
    r_y: float
    r_z: float

    def __post_init__(self):
        if self.norm2() > 1.0 + 1e-12:
            raise ValueError("Bloch vector lies outside the unit ball")

    def norm2(self) -> float:
        return self.r_x**2 + self.r_y**2 + self.r_z**2


def _cone_phase(deviation: float, amplitude: float) -> float:
    """arccos(deviation / amplitude) with the degenerate rim handled."""
    if amplitude <= 0.0:
        if abs(deviation) > 1e-12:
            raise OutOfCone(
                f"overlap offset {deviation:+.3e} unreachable with zero "
                "coherence amplitude"
            )
        return 0.0
    ratio = deviation / amplitude
    if abs(ratio) > 1.0 + 1e-12:
        raise OutOfCone(
            f"requested fidelity needs |cos phi| = {abs(ratio):.6f} > 1"
        )
    return math.acos(min(1.0, max(-1.0, ratio)))


def iso_fidelity_state(lam: float, f: float, sign: int) -> MotionalAmplitudes:
    """Two-level state lam|0> + e^{i sign phi} sqrt(1-lam^2)|1> with
    overlap ``f`` against the balanced superposition (|0>+|1>)/sqrt(2).

    All such states form a cone at fixed ``f``; ``sign`` (+1 or -1)
    selects the branch of phi and is never inferred.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    amp = lam * math.sqrt(1.0 - lam * lam)
    phi = _cone_phase(f - 0.5, amp)
    amps = np.array(
        [lam, np.exp(1j * sign * phi) * math.sqrt(1.0 - lam * lam)],
        dtype=np.complex128,
    )
    return MotionalAmplitudes(amps, 1)


def iso_fidelity_mixture(lam: float, kappa: float, f: float) -> DensityMatrix:
    """Two-level mixed state with overlap ``f`` against the balanced
    superposition and off-diagonal coherence damped by ``kappa``.

    kappa = 1 reproduces the pure iso_fidelity_state (sign +1); smaller
    kappa lowers the purity while the fidelity stays pinned at ``f``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    amp = kappa * lam * math.sqrt(1.0 - lam * lam)
    phi = _cone_phase(f - 0.5, amp)
    off = amp * np.exp(-1j * phi)
    rho = np.array(
        [[lam * lam, off], [np.conj(off), 1.0 - lam * lam]],
        dtype=np.complex128,
    )
    return DensityMatrix(rho, 1)


def bloch_vector(state: MotionalAmplitudes | DensityMatrix) -> BlochVector:
    """Pauli expectations of a two-level motional state (|0> is spin-up:
    basis_state(0, 1) maps to (0, 0, 1))."""
    if state.n_max != 1:
        raise DimensionMismatch(
            f"need a two-level state (n_max = 1), got n_max = {state.n_max}"
        )
    if isinstance(state, MotionalAmplitudes):
        rho = np.outer(state.amps, state.amps.conj())
        nrm = state.norm() ** 2
        if nrm > 0:
            rho = rho / nrm
    else:
        rho = state.rho
    r_x = float(2.0 * np.real(rho[0, 1]))
    r_y = float(-2.0 * np.imag(rho[0, 1]))
    r_z = float(np.real(rho[0, 0] - rho[1, 1]))
    return BlochVector(r_x, r_y, r_z)


def cone_weights(f: float) -> tuple[float, float]:
    """The [lam_min, lam_max] interval on which overlap ``f`` is reachable
    by a pure two-level state (endpoints are the two phi = 0 states)."""
    d = abs(f - 0.5)
    disc = 1.0 - 4.0 * d * d
    if disc < -1e-12:
        raise OutOfCone(
            f"no pure two-level state has overlap {f} with the "
            "balanced superposition"
        )
    root = math.sqrt(max(disc, 0.0))
    return math.sqrt((1.0 - root) / 2.0), math.sqrt((1.0 + root) / 2.0)


def cone_sweep(f: float, count: int = 101, sign: int = 1) -> list[BlochVector]:
    """Bloch vectors of the pure iso-fidelity family across its full
    weight interval; for any valid ``f`` every entry shares r_x = 2f - 1."""
    lo, hi = cone_weights(f)
    return [
        bloch_vector(iso_fidelity_state(lam, f, sign))
        for lam in np.linspace(lo, hi, count)
    ]


#: The two parameter sets quoted for the worked mixed-state example
#: (kappa, f, lam); sources quote both, and the checks here use the first.
MIXTURE_EXAMPLE = (0.9, 0.8, 0.7)
MIXTURE_EXAMPLE_VARIANT = (0.90, 0.85, 0.70)
