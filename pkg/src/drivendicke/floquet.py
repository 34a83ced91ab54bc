"""Floquet states of the periodically driven system.

The one-cycle propagator is built by fixed-step exponential integration, its
eigenvectors give the Floquet states at t = 0 and the periodic parts sampled
over one period give the Fourier components by a discrete Fourier transform.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import linear_sum_assignment

from .errors import AmbiguousLabelError, ConfigError, FourierCutoffError, UnitarityError
from .model import (
    DEGENERACY_TOL,
    Eigensystem,
    ModelParams,
    Operators,
    canonical_subspace_basis,
    clusters,
    fix_phases,
    laser_coefficient,
)

log = logging.getLogger(__name__)

UNITARITY_TOL = 1e-10
FOURIER_TAIL_TOL = 1e-6
FOURIER_MARGIN = 6
MIN_STEPS = 256
# transition elements below this fraction of the largest are FFT roundoff
TRANSITION_NOISE_FLOOR = 1e-13

# fourth-order commutator-free Magnus: Gauss nodes and mixing weights
_C1 = 0.5 - np.sqrt(3) / 6
_C2 = 0.5 + np.sqrt(3) / 6
_A1 = 0.25 + np.sqrt(3) / 6
_A2 = 0.25 - np.sqrt(3) / 6


def resolve_numerics(params: ModelParams, energies: np.ndarray) -> tuple[int, int]:
    """Return ``(n_fourier, n_steps)``, filling in automatic choices.

    The Fourier window must cover the largest system energy measured in
    units of the drive frequency, plus room for sidebands.
    """
    F = params.n_fourier
    if not F:
        F = int(np.ceil(np.max(np.abs(energies)) / params.omega_d)) + FOURIER_MARGIN
    K = params.n_steps
    if not K:
        K = 1 << int(np.ceil(np.log2(max(4 * F, MIN_STEPS))))
    if K < 4 * F:
        raise ConfigError(f"n_steps={K} must be >= 4*n_fourier={4 * F}")
    return F, K


def _expm_herm(H: np.ndarray, dt: float) -> np.ndarray:
    e, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * e * dt)) @ v.conj().T


def unitarity_defect(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


@dataclass(frozen=True)
class Propagation:
    """U(t_j, 0) at the sample times t_j = j * T_d / n_steps, j = 0..n_steps."""

    times: np.ndarray
    U: np.ndarray
    period: float

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def one_cycle(self) -> np.ndarray:
        return self.U[-1]


def one_cycle_propagator(params: ModelParams, ops: Operators, H_D: np.ndarray,
                         n_steps: int) -> Propagation:
    """Integrate the Schroedinger equation over one drive period.

    ``params.integrator`` selects the exponential midpoint rule (second
    order) or the fourth-order commutator-free Magnus scheme.  Both are
    exactly unitary per step.  Without drive the exact exponential is used.
    """
    T_d = params.period
    K = n_steps
    dt = T_d / K
    times = np.arange(K + 1) * dt
    d = H_D.shape[0]
    U = np.empty((K + 1, d, d), dtype=complex)

    if not params.driven:
        e, v = np.linalg.eigh(H_D)
        phases = np.exp(-1j * np.outer(times, e))
        U[:] = np.einsum("ik,tk,jk->tij", v, phases, v.conj())
    else:
        def H(t):
            c = laser_coefficient(params, t)
            return H_D + c * ops.a + np.conj(c) * ops.a_dag

        U[0] = np.eye(d)
        for j in range(K):
            t = times[j]
            if params.integrator == "midpoint":
                step = _expm_herm(H(t + 0.5 * dt), dt)
            else:
                H1, H2 = H(t + _C1 * dt), H(t + _C2 * dt)
                step = _expm_herm(_A2 * H1 + _A1 * H2, dt) @ _expm_herm(_A1 * H1 + _A2 * H2, dt)
            U[j + 1] = step @ U[j]

    defect = unitarity_defect(U[-1])
    if defect > UNITARITY_TOL:
        raise UnitarityError(
            f"one-cycle propagator unitarity defect {defect:.2e}; increase n_steps")
    U.setflags(write=False)
    return Propagation(times=times, U=U, period=T_d)


def fold_to_zone(eps, omega_d: float, tol: float = DEGENERACY_TOL):
    """Map quasienergies into [-omega_d/2, omega_d/2).

    Values within ``tol`` below +omega_d/2 are treated as -omega_d/2.
    """
    eps = np.mod(np.asarray(eps, dtype=float) + 0.5 * omega_d, omega_d) - 0.5 * omega_d
    return np.where(eps >= 0.5 * omega_d - tol, eps - omega_d, eps)


@dataclass(frozen=True)
class Labels:
    energies: np.ndarray    # E_n of the assigned H_D eigenstate
    nu: np.ndarray          # Fourier mode with E_n = eps_n + nu_n omega_d
    eig_index: np.ndarray
    overlap: np.ndarray
    residual: np.ndarray    # |E_n - eps_n - nu_n omega_d|
    ambiguous: tuple


@dataclass(frozen=True)
class FloquetBasis:
    """Quasienergies and Fourier components of the periodic Floquet states.

    ``phi_tilde[n, i, :]`` is the component with mode number ``modes[i]``;
    ``psi0[:, n]`` is the Floquet state at t = 0.
    """

    omega_d: float
    eps: np.ndarray
    psi0: np.ndarray
    modes: np.ndarray
    phi_tilde: np.ndarray
    outside_weight: np.ndarray
    labels: Labels | None = None

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega_d

    @property
    def n_fourier(self) -> int:
        return int(self.modes[-1])

    def __len__(self):
        return len(self.eps)

    def periodic_states(self, t: float) -> np.ndarray:
        """|phi_n(t)> as columns, reconstructed from the Fourier components."""
        phases = np.exp(-1j * self.modes * self.omega_d * t)
        return np.einsum("m,nmd->dn", phases, self.phi_tilde)

    def fourier_overlap(self) -> np.ndarray:
        """Matrix sum_nu <phi_n(nu)|phi_m(nu)>; the identity for a good basis."""
        return np.einsum("nmd,kmd->nk", self.phi_tilde.conj(), self.phi_tilde)

    def averaged_state(self, populations: np.ndarray) -> np.ndarray:
        """Period average of sum_n p_n |phi_n(t)><phi_n(t)|."""
        return np.einsum("n,nmd,nme->de", populations, self.phi_tilde,
                         self.phi_tilde.conj())


def floquet_basis(prop: Propagation, params: ModelParams, H_D: np.ndarray,
                  n_fourier: int) -> FloquetBasis:
    """Diagonalize the one-cycle propagator and Fourier-analyse the states."""
    omega_d = params.omega_d
    T_d = prop.period
    K = prop.n_steps
    F = n_fourier
    if K < 4 * F:
        raise ConfigError(f"n_steps={K} must be >= 4*n_fourier={4 * F}")

    # Schur vectors of a normal matrix are orthonormal eigenvectors
    tri, Z = la.schur(prop.one_cycle, output="complex")
    lam = np.diag(tri)
    eps = fold_to_zone(-np.angle(lam) / T_d, omega_d)
    order = np.argsort(eps, kind="stable")
    eps, Z = eps[order], Z[:, order]

    for group in clusters(eps, DEGENERACY_TOL):
        if len(group) == 1:
            continue
        Q = Z[:, group]
        e_sub, w = np.linalg.eigh(Q.conj().T @ H_D @ Q)
        Q = Q @ w
        for sub in clusters(e_sub, DEGENERACY_TOL):
            Q[:, sub] = canonical_subspace_basis(Q[:, sub])
        Z[:, group] = Q
    psi0 = fix_phases(Z)

    samples = prop.U[:-1] @ psi0                              # (K, d, D)
    samples *= np.exp(1j * np.outer(prop.times[:-1], eps))[:, None, :]
    coeffs = np.fft.ifft(samples, axis=0)                     # index nu mod K
    modes = np.arange(-F, F + 1)
    window = modes % K
    weights = np.sum(np.abs(coeffs) ** 2, axis=1)             # (K, D)
    outside = np.delete(weights, window, axis=0).sum(axis=0)
    worst = float(outside.max())
    if worst > FOURIER_TAIL_TOL:
        raise FourierCutoffError(
            f"Floquet state carries weight {worst:.2e} outside |nu| <= {F}; "
            "increase n_fourier (and n_steps)")
    phi_tilde = np.ascontiguousarray(np.transpose(coeffs[window], (2, 0, 1)))
    for arr in (eps, psi0, modes, phi_tilde, outside):
        arr.setflags(write=False)
    return FloquetBasis(omega_d=omega_d, eps=eps, psi0=psi0, modes=modes,
                        phi_tilde=phi_tilde, outside_weight=outside)


def label_states(basis: FloquetBasis, system: Eigensystem, strict: bool = False,
                 ambiguity: float = 0.9) -> Labels:
    """Assign each Floquet state to an eigenstate of H_D and a Fourier mode.

    The assignment maximizes |<E|phi_n(nu)>| over nu and is made a bijection
    by solving the linear assignment problem.  A state whose runner-up
    overlap is within 10% of the chosen one is reported as ambiguous; with
    ``strict`` it raises instead.
    """
    ov = np.abs(np.einsum("de,nmd->nem", system.vectors.conj(), basis.phi_tilde))
    best_nu = np.argmax(ov, axis=2)
    best = np.max(ov, axis=2)                                  # (D, E)
    rows, cols = linear_sum_assignment(-best)
    eig_index = np.empty(len(basis), dtype=int)
    eig_index[rows] = cols
    n_idx = np.arange(len(basis))
    nu = basis.modes[best_nu[n_idx, eig_index]]
    chosen = best[n_idx, eig_index]
    ambiguous = []
    for n in n_idx:
        others = np.delete(best[n], eig_index[n])
        if others.size and others.max() > ambiguity * chosen[n]:
            ambiguous.append(int(n))
    if ambiguous and strict:
        raise AmbiguousLabelError(f"ambiguous Floquet labels for states {ambiguous}")
    E = system.energies[eig_index]
    residual = np.abs(E - basis.eps - nu * basis.omega_d)
    return Labels(energies=E, nu=nu, eig_index=eig_index, overlap=chosen,
                  residual=residual, ambiguous=tuple(ambiguous))


def with_labels(basis: FloquetBasis, labels: Labels) -> FloquetBasis:
    return FloquetBasis(omega_d=basis.omega_d, eps=basis.eps, psi0=basis.psi0,
                        modes=basis.modes, phi_tilde=basis.phi_tilde,
                        outside_weight=basis.outside_weight, labels=labels)


@dataclass(frozen=True)
class TransitionTable:
    """X_{n,k,nu} = sum_mu <phi_n(mu - nu)|X|phi_k(mu)> for |nu| <= 2 n_fourier.

    ``omega[n, k, i] = eps_k - eps_n + nus[i] * omega_d`` is the energy
    released in the transition k -> n through that Fourier channel.
    """

    elements: np.ndarray
    omega: np.ndarray
    nus: np.ndarray
    eps: np.ndarray
    omega_d: float

    def __len__(self):
        return self.elements.shape[0]

    def diagonal(self) -> np.ndarray:
        """X_{m,m,nu} as an array (state, nu)."""
        idx = np.arange(len(self))
        return self.elements[idx, idx, :]


def transition_operators(basis: FloquetBasis, X: np.ndarray) -> TransitionTable:
    F = basis.n_fourier
    L = 4 * F + 2
    # f_n(theta_j) = sum_mu exp(-i mu theta_j) phi_n(mu) on an alias-free grid
    padded = np.zeros((L,) + basis.phi_tilde.shape[::2], dtype=complex)   # (L, D, d)
    padded[basis.modes % L] = np.transpose(basis.phi_tilde, (1, 0, 2))
    f = np.fft.fft(padded, axis=0)
    G = np.einsum("jnd,de,jke->jnk", f.conj(), X, f, optimize=True)
    coeffs = np.fft.ifft(G, axis=0)
    nus = np.arange(-2 * F, 2 * F + 1)
    elements = np.ascontiguousarray(np.transpose(coeffs[nus % L], (1, 2, 0)))
    # channels that are absent by structure must be exactly zero: at low
    # temperature they get multiplied by populations many decades apart
    elements[np.abs(elements) < TRANSITION_NOISE_FLOOR * np.abs(elements).max()] = 0.0
    eps = basis.eps
    omega = (eps[None, :, None] - eps[:, None, None]
             + nus[None, None, :] * basis.omega_d)
    for arr in (elements, omega, nus):
        arr.setflags(write=False)
    return TransitionTable(elements=elements, omega=omega, nus=nus, eps=eps,
                           omega_d=basis.omega_d)
