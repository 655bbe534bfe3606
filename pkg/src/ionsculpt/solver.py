"""Solvers for the free cycle parameters (beta_k, epsilon_k).

The post-cycle amplitudes are bilinear in (beta, epsilon):

    Gamma_n = a_n + b_n beta + c_n epsilon + d_n beta epsilon

with a_n = C_n lam_n, b_n = e^{i phi} S_n lam_{n+1},
c_n = -e^{-i phi} S_{n-1} lam_{n-1} (absent at n = 0), d_n = C_{n-1} lam_n.
Demanding that the sculpted ratios match a three-component target gives two
coupled bilinear equations; eliminating beta leaves a polynomial in epsilon
whose companion-matrix roots seed a two-variable Newton polish.  Up to four
root pairs are returned (the bilinear system's mixed volume caps the number
of finite solutions below the naive degree count, so fewer usually appear).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .fock import (
    MotionalAmplitudes,
    coherent_amplitudes,
    default_n_max,
    significant_excitation,
)
from .dynamics import CycleParams, cycle_amplitudes

RESIDUAL_TOL = 1e-9
CONVERGENCE_TOL = 1e-6


class NoFiniteRoot(RuntimeError):
    """All elimination roots diverge or fail the residual check."""


class ConvergenceFailure(RuntimeError):
    """No multistart run reached the residual tolerance."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass(frozen=True)
class SculptPlan:
    """A full sculpting prescription plus the rate exponents."""

    alpha: complex
    cycles: tuple[CycleParams, ...]
    target: MotionalAmplitudes
    xi: float = 4.0
    zeta: float = 0.5
    residual: float | None = None

    def __post_init__(self):
        if self.xi <= 0:
            raise ValueError("xi must be > 0")
        if self.zeta < 0:
            raise ValueError("zeta must be >= 0")

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": [self.alpha.real, self.alpha.imag],
                "cycles": [json.loads(c.to_json()) for c in self.cycles],
                "target": json.loads(self.target.to_json()),
                "xi": self.xi,
                "zeta": self.zeta,
                "residual": self.residual,
            }
        )


def min_cycles(target: MotionalAmplitudes) -> int:
    """Minimum cycle count int[(N_d + 1)/2] for a target reaching |N_d>."""
    n_d = significant_excitation(target)
    return (n_d + 1) // 2


def rate(f: float, p: float, xi: float = 4.0, zeta: float = 0.5) -> float:
    """Cost-benefit rate R = F^xi * P^zeta."""
    if not -1e-12 <= f <= 1 + 1e-12 or not -1e-12 <= p <= 1 + 1e-12:
        raise ValueError("F and P must lie in [0, 1]")
    f = min(max(f, 0.0), 1.0)
    p = min(max(p, 0.0), 1.0)
    if p == 0.0 and zeta == 0.0:
        return f**xi
    return f**xi * p**zeta


def _bilinear_coefficients(lam: np.ndarray, g_tau: float, phi: float):
    """(a_n, b_n, c_n, d_n) for n = 0, 1, 2."""
    c = [math.cos(g_tau * math.sqrt(k + 1.0)) for k in range(3)]  # C_0..C_2
    s = [math.sin(g_tau * math.sqrt(k + 1.0)) for k in range(3)]  # S_0..S_2
    e = complex(math.cos(phi), math.sin(phi))
    a = [c[n] * lam[n] for n in range(3)]
    b = [e * s[n] * lam[n + 1] for n in range(3)]
    cc = [0.0 + 0.0j] + [-e.conjugate() * s[n - 1] * lam[n - 1] for n in (1, 2)]
    d = [lam[0]] + [c[n - 1] * lam[n] for n in (1, 2)]
    return a, b, cc, d


def _newton_polish(coefA, coefB, beta: complex, eps: complex, iters: int = 25):
    """Newton iteration on the two bilinear equations (holomorphic 2x2)."""
    a0, a1, a2, a3 = coefA
    b0, b1, b2, b3 = coefB
    for _ in range(iters):
        f1 = a0 + a1 * beta + a2 * eps + a3 * beta * eps
        f2 = b0 + b1 * beta + b2 * eps + b3 * beta * eps
        if max(abs(f1), abs(f2)) < 1e-14:
            break
        j11 = a1 + a3 * eps
        j12 = a2 + a3 * beta
        j21 = b1 + b3 * eps
        j22 = b2 + b3 * beta
        det = j11 * j22 - j12 * j21
        if abs(det) < 1e-300:
            break
        beta -= (f1 * j22 - f2 * j12) / det
        eps -= (f2 * j11 - f1 * j21) / det
    f1 = a0 + a1 * beta + a2 * eps + a3 * beta * eps
    f2 = b0 + b1 * beta + b2 * eps + b3 * beta * eps
    return beta, eps, max(abs(f1), abs(f2))


def solve_single_cycle(
    alpha: complex,
    target: MotionalAmplitudes,
    g_tau: float,
    phi: float,
) -> list[tuple[complex, complex]]:
    """All finite (beta, epsilon) pairs sculpting a three-component target
    in one cycle, each satisfying both cross-ratio equations to 1e-9.

    Roots are ordered by |epsilon| ascending (deterministic tie-break).
    """
    t = target.normalized().amps
    if significant_excitation(target) != 2:
        raise ValueError("single-cycle solver expects a target ending at |2>")
    n_safe = max(target.n_max, default_n_max(2, 1, alpha))
    lam = coherent_amplitudes(alpha, n_safe).normalized().amps

    a, b, cc, d = _bilinear_coefficients(lam, g_tau, phi)
    # equation A: Gamma_2 t_0 - Gamma_0 t_2 = 0; equation B: same for (1, 0)
    coefA = tuple(x[2] * t[0] - x[0] * t[2] for x in (a, b, cc, d))
    coefB = tuple(x[1] * t[0] - x[0] * t[1] for x in (a, b, cc, d))
    A0, A1, A2, A3 = coefA
    B0, B1, B2, B3 = coefB

    # eliminate beta: (B0 + B2 e)(A1 + A3 e) - (B1 + B3 e)(A0 + A2 e) = 0
    q2 = B2 * A3 - B3 * A2
    q1 = B0 * A3 + B2 * A1 - B1 * A2 - B3 * A0
    q0 = B0 * A1 - B1 * A0
    scale = max(abs(q2), abs(q1), abs(q0))
    if scale < 1e-300:
        raise NoFiniteRoot("elimination polynomial vanishes identically")
    poly = [x / scale for x in (q2, q1, q0)]
    while len(poly) > 1 and abs(poly[0]) < 1e-14:
        poly = poly[1:]
    if len(poly) <= 1:
        raise NoFiniteRoot("elimination polynomial has no finite roots")
    eps_roots = np.roots(poly)

    pairs: list[tuple[complex, complex]] = []
    for eps in eps_roots:
        eps = complex(eps)
        beta = None
        denA = A1 + A3 * eps
        denB = B1 + B3 * eps
        if abs(denA) > 1e-12:
            beta = -(A0 + A2 * eps) / denA
        elif abs(denB) > 1e-12:
            beta = -(B0 + B2 * eps) / denB
        if beta is None:
            continue
        beta, eps, res = _newton_polish(coefA, coefB, beta, eps)
        if not (np.isfinite(beta) and np.isfinite(eps)):
            continue
        if res > RESIDUAL_TOL:
            continue
        if any(abs(eps - e2) < 1e-8 * (1.0 + abs(e2)) for _, e2 in pairs):
            continue
        pairs.append((beta, eps))
    if not pairs:
        raise NoFiniteRoot("no elimination root passed the residual filter")
    pairs.sort(key=lambda be: abs(be[1]))
    return pairs


def _chain_residual(
    x: np.ndarray,
    lam0: np.ndarray,
    t: np.ndarray,
    g_taus: list[float],
    phis: list[float],
    support: np.ndarray,
    anchor: int,
) -> np.ndarray:
    m = len(g_taus)
    lam = lam0
    for k in range(m):
        beta = complex(x[4 * k], x[4 * k + 1])
        eps = complex(x[4 * k + 2], x[4 * k + 3])
        p = CycleParams(beta, eps, g_taus[k], phis[k])
        lam = cycle_amplitudes(lam, p)
        nrm = np.linalg.norm(lam)
        if nrm < 1e-200:
            return np.full(2 * len(support), 1e6)
        lam = lam / nrm
    res = lam[support] * t[anchor] - lam[anchor] * t[support]
    return np.concatenate([res.real, res.imag])


def solve_multi_cycle(
    alpha: complex,
    target: MotionalAmplitudes,
    g_taus: list[float],
    phis: list[float],
    seeds: int = 24,
) -> SculptPlan:
    """Multistart least-squares solve of the cross-ratio system for M cycles.

    ``seeds`` counts the random starts (log-uniform magnitudes in
    [1e-2, 1e2], uniform phases); for M = 1 the closed single-cycle roots
    are used as additional starts, so the two solvers agree there.  The
    returned plan records the best scale-invariant residual; below 1e-8 it
    flags an exact solution of the truncated system.
    """
    if len(g_taus) != len(phis):
        raise ValueError("g_taus and phis must have equal length")
    m = len(g_taus)
    t_state = target.normalized()
    t = t_state.amps
    n_d = significant_excitation(t_state)
    n_safe = max(target.n_max, default_n_max(n_d, max(m, 1), alpha))
    lam0 = coherent_amplitudes(alpha, n_safe).normalized().amps
    t_pad = np.zeros(n_safe + 1, dtype=np.complex128)
    t_pad[: t.shape[0]] = t

    anchor = int(np.argmax(np.abs(t_pad)))
    support = np.array(
        [n for n in range(n_d + 1) if n != anchor], dtype=np.intp
    )

    if m == 0:
        res = _chain_residual(
            np.zeros(0), lam0, t_pad, [], [], support, anchor
        )
        return SculptPlan(
            alpha=alpha,
            cycles=(),
            target=target,
            residual=float(np.linalg.norm(res)),
        )

    starts: list[np.ndarray] = []
    if m == 1 and n_d == 2:
        try:
            for beta, eps in solve_single_cycle(alpha, target, g_taus[0], phis[0]):
                starts.append(
                    np.array([beta.real, beta.imag, eps.real, eps.imag])
                )
        except NoFiniteRoot:
            pass
    for i in range(seeds):
        rng = np.random.default_rng(i)
        mag = 10.0 ** rng.uniform(-2.0, 2.0, size=2 * m)
        ang = rng.uniform(0.0, 2.0 * np.pi, size=2 * m)
        z = mag * np.exp(1j * ang)
        starts.append(np.column_stack([z.real, z.imag]).ravel())

    best_x = None
    best_res = np.inf
    for x0 in starts:
        sol = least_squares(
            _chain_residual,
            x0,
            args=(lam0, t_pad, list(g_taus), list(phis), support, anchor),
            method="trf",
            xtol=1e-14,
            ftol=1e-14,
            gtol=1e-14,
            max_nfev=400,
        )
        res = float(np.linalg.norm(sol.fun))
        if res < best_res - 1e-15:
            best_res = res
            best_x = sol.x
    if best_x is None or best_res > CONVERGENCE_TOL:
        raise ConvergenceFailure(
            f"best residual {best_res:.3e} above {CONVERGENCE_TOL:g}", best_res
        )
    cycles = tuple(
        CycleParams(
            complex(best_x[4 * k], best_x[4 * k + 1]),
            complex(best_x[4 * k + 2], best_x[4 * k + 3]),
            g_taus[k],
            phis[k],
        )
        for k in range(m)
    )
    return SculptPlan(alpha=alpha, cycles=cycles, target=target, residual=best_res)
