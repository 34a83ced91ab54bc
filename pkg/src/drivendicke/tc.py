"""Closed-form solution of the resonantly driven Jaynes-Cummings model.

In the frame rotating with the drive the Hamiltonian becomes static,

    H' = g (a sigma_+ + a_dag sigma_-) + Omega/2 (a + a_dag),

and its eigenstates are squeezed, displaced oscillator states dressed with
the non-orthogonal emitter states |M>, |P>.  The eigenvalues are the
quasienergies of the driven problem modulo omega_d, which makes this a
reference for the Floquet solver.

Vectors use the package basis ordering ``fock * 2 + spin`` with spin 0 the
ground state |-> and spin 1 the excited state |+>.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import ConfigError, NumericalError

TAIL_TOL = 1e-8
PADDING = 60

_GROUND = np.array([1.0, 0.0])
_EXCITED = np.array([0.0, 1.0])


def _kappa(g: float, Omega: float) -> float:
    if g <= 0:
        raise ConfigError("the closed form needs g > 0")
    kappa = Omega / g
    if not 0 <= kappa < 1:
        raise ConfigError(f"closed form requires 0 <= Omega/g < 1, got {kappa}")
    return kappa


@dataclass(frozen=True)
class TCSolution:
    g: float
    Omega: float

    @property
    def kappa(self) -> float:
        return _kappa(self.g, self.Omega)

    @property
    def root(self) -> float:
        return np.sqrt(1 - self.kappa ** 2)

    @property
    def eta(self) -> float:
        """Squeezing parameter with exp(2 eta) = (1 - kappa^2)^(-1/2)."""
        return -0.25 * np.log(1 - self.kappa ** 2)

    def alpha(self, n: int, sign: int) -> float:
        return -sign * np.sqrt(n) * self.kappa

    def energy(self, n: int, sign: int) -> float:
        if n == 0:
            return 0.0
        return sign * np.sqrt(n) * self.g * (1 - self.kappa ** 2) ** 0.75

    @property
    def M(self) -> np.ndarray:
        r = self.root
        return (np.sqrt(1 + r) * _GROUND - np.sqrt(1 - r) * _EXCITED) / np.sqrt(2)

    @property
    def P(self) -> np.ndarray:
        r = self.root
        return (np.sqrt(1 + r) * _EXCITED - np.sqrt(1 - r) * _GROUND) / np.sqrt(2)


def tc_quasienergies(n: int, g: float, Omega: float) -> tuple[float, float]:
    """(E_plus, E_minus) of the n-th dressed doublet."""
    if n < 1:
        raise ConfigError("doublet index n must be >= 1")
    sol = TCSolution(g, Omega)
    return sol.energy(n, +1), sol.energy(n, -1)


def _ladder(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


def tc_hamiltonian(g: float, Omega: float, n_ph: int) -> np.ndarray:
    """Static rotating-frame Hamiltonian on Fock x emitter, dimension 2 (n_ph + 1)."""
    a = np.kron(_ladder(n_ph), np.eye(2))
    sp = np.kron(np.eye(n_ph + 1), np.outer(_EXCITED, _GROUND))
    H = g * (a @ sp + a.T @ sp.T) + 0.5 * Omega * (a + a.T)
    return H.astype(complex)


def displacement(alpha: complex, n_max: int) -> np.ndarray:
    a = _ladder(n_max).astype(complex)
    return la.expm(alpha * a.conj().T - np.conj(alpha) * a)


def squeezing(eta: complex, n_max: int) -> np.ndarray:
    a = _ladder(n_max).astype(complex)
    return la.expm(0.5 * (eta * a.conj().T @ a.conj().T - np.conj(eta) * a @ a))


def _truncate(v: np.ndarray, n_ph: int) -> np.ndarray:
    keep = 2 * (n_ph + 1)
    tail = float(np.sum(np.abs(v[keep:]) ** 2))
    if tail > TAIL_TOL:
        raise NumericalError(
            f"closed-form state has weight {tail:.2e} above n_ph={n_ph}; increase n_ph")
    v = v[:keep]
    return v / np.linalg.norm(v)


def tc_eigenstates(n: int, g: float, Omega: float, n_ph: int) -> dict:
    """Exact eigenvectors of the rotating-frame Hamiltonian.

    ``n = 0`` returns ``{0: ground}``; ``n >= 1`` returns ``{+1: v, -1: v}``.
    The oscillator parts are S(eta) D(alpha)|k>: squeezing acts after the
    displacement.
    """
    sol = TCSolution(g, Omega)
    n_max = n_ph + PADDING + 4 * n
    S = squeezing(sol.eta, n_max)
    fock = np.eye(n_max + 1)
    if n == 0:
        return {0: _truncate(np.kron(S @ fock[:, 0], sol.M), n_ph)}
    out = {}
    for sign in (+1, -1):
        osc = S @ displacement(sol.alpha(n, sign), n_max)
        v = (np.kron(osc @ fock[:, n - 1], sol.P) + sign * np.kron(osc @ fock[:, n], sol.M)) / np.sqrt(2)
        out[sign] = _truncate(v, n_ph)
    return out


def weak_driving_expansion(n: int, kappa: float, n_ph: int) -> dict:
    """First-order-in-kappa eigenvectors, unnormalized, in the same layout."""
    dim = 2 * (n_ph + 1)

    def ket(k, spin):
        v = np.zeros(dim)
        if 0 <= k <= n_ph:
            v[2 * k + spin] = 1.0
        return v

    if n == 0:
        return {0: ket(0, 0) - 0.5 * kappa * ket(0, 1)}
    if n + 1 > n_ph:
        raise ConfigError("n_ph too small for the requested doublet")
    out = {}
    for s in (+1, -1):
        base = (ket(n - 1, 1) + s * ket(n, 0)) / np.sqrt(2)
        corr = (np.sqrt(n * (n - 1)) * ket(n - 2, 1) + s * (n - 0.5) * ket(n - 1, 0)
                - (n + 0.5) * ket(n, 1) - s * np.sqrt(n * (n + 1)) * ket(n + 1, 0))
        out[s] = base + s * kappa / np.sqrt(2) * corr
    return out
