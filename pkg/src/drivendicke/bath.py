"""Thermal Ohmic bath and the secular Floquet master equation.

In the Floquet basis the master equation decouples: populations obey a
Pauli rate equation with generator ``L`` and every coherence decays on its
own with a complex rate ``Z[m, n]``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.integrate import quad
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, NonUniqueStationaryStateError, QuadratureError
from .floquet import TransitionTable

log = logging.getLogger(__name__)

EDGE_THRESHOLD = 1e-26
SMALL_DECAY = 1e-12
# transition weights below this fraction of the largest are skipped when
# evaluating Lamb-shift quadratures
LAMB_WEIGHT_CUT = 1e-16


@dataclass(frozen=True)
class BathSpec:
    """Ohmic bath with spectral function gamma * omega / omega_0."""

    gamma: float = 1e-3
    T: float = 0.1
    omega_0: float = 1.0
    cutoff: float = 50.0
    lamb_shift: bool = False

    def __post_init__(self):
        for name in ("gamma", "T", "cutoff"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"bath {name} must be finite and >= 0, got {value}")
        if not self.omega_0 > 0:
            raise ConfigError("omega_0 must be > 0")

    @classmethod
    def from_params(cls, params) -> "BathSpec":
        return cls(gamma=params.gamma, T=params.T, cutoff=params.cutoff,
                   lamb_shift=params.lamb_shift)

    def spectral(self, omega):
        return self.gamma * np.asarray(omega, dtype=float) / self.omega_0


def occupation(omega, T: float):
    """Bose-Einstein occupation for omega > 0; identically zero at T = 0."""
    omega = np.asarray(omega, dtype=float)
    if T == 0:
        return np.zeros_like(omega)
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / np.expm1(omega / T)


def chi(omega, bath: BathSpec):
    """Even bath transform: emission rate for omega > 0, absorption for omega < 0."""
    omega = np.asarray(omega, dtype=float)
    w = np.abs(omega)
    safe = np.where(w > 0, w, 1.0)
    n = occupation(safe, bath.T)
    out = np.where(omega > 0, bath.spectral(safe) * (n + 1), bath.spectral(safe) * n)
    return np.where(omega == 0, bath.gamma * bath.T / bath.omega_0, out)


def re_gamma(omega: float, bath: BathSpec) -> float:
    """(1/pi) PV int_0^cutoff gamma(u) / (omega - u) du by singularity subtraction."""
    lam = bath.cutoff
    f = bath.spectral
    if lam == 0:
        return 0.0
    if 0 < omega < lam:
        f0 = float(f(omega))

        def regular(u):
            return (f(u) - f0) / (omega - u) if u != omega else -bath.gamma / bath.omega_0

        val, err = quad(regular, 0.0, lam, points=[omega], limit=200)
        val += f0 * np.log(omega / (lam - omega))
    else:
        val, err = quad(lambda u: f(u) / (omega - u), 0.0, lam, limit=200)
    if not np.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
        raise QuadratureError(f"principal value at omega={omega} did not converge (err={err})")
    return float(val / np.pi)


def pv_term(omega, bath: BathSpec):
    """Temperature-independent part of xi: sign(omega) * Re Gamma(|omega|)."""
    omega = np.asarray(omega, dtype=float)
    flat = omega.ravel()
    out = np.array([np.sign(w) * re_gamma(abs(w), bath) for w in flat])
    return out.reshape(omega.shape)


def xi(omega, bath: BathSpec):
    """Odd bath transform (Lamb shift); zero when the shift is disabled.

    At omega = 0 the two one-sided branches diverge with opposite sign and
    their mean, Re Gamma(0) / 2, is used.
    """
    omega = np.asarray(omega, dtype=float)
    if not bath.lamb_shift:
        return np.zeros_like(omega)
    flat = omega.ravel()
    uniq, inv = np.unique(np.abs(flat), return_inverse=True)
    rg = np.array([re_gamma(w, bath) for w in uniq])
    rg, w = rg[inv], np.abs(flat)
    safe = np.where(w > 0, w, 1.0)
    n = occupation(safe, bath.T)
    out = np.where(flat > 0, rg * (n + 1), -rg * n)
    out = np.where(flat == 0, 0.5 * rg, out)
    return out.reshape(omega.shape)


def _xi_on_table(table: TransitionTable, weights: np.ndarray, bath: BathSpec) -> np.ndarray:
    """xi on the transition grid, skipping channels with negligible weight."""
    out = np.zeros(weights.shape)
    if not bath.lamb_shift:
        return out
    mask = weights > LAMB_WEIGHT_CUT * weights.max()
    # quadratures are shared between frequencies equal to 1e-12
    freqs = np.round(table.omega[mask], 12)
    uniq, inv = np.unique(freqs, return_inverse=True)
    out[mask] = xi(uniq, bath)[inv]
    return out


def pauli_generator(table: TransitionTable, bath: BathSpec, rates=None) -> np.ndarray:
    """Rate matrix L with d p_n / dt = sum_k L[n, k] p_k.

    ``rates`` may pass a precomputed ``chi(table.omega)``.
    """
    if rates is None:
        rates = chi(table.omega, bath)
    W = np.sum(rates * np.abs(table.elements) ** 2, axis=2)
    np.fill_diagonal(W, 0.0)
    L = W - np.diag(W.sum(axis=0))
    return L


def _decay_sums(table, rates, shifts):
    w2 = np.abs(table.elements) ** 2
    # Gamma_m = sum_{k, nu} (chi + i xi)(omega[k, m, nu]) |X[k, m, nu]|^2
    return np.einsum("kmv,kmv->m", rates + 1j * shifts, w2)


def offdiag_decay(table: TransitionTable, bath: BathSpec, rates=None, shifts=None) -> np.ndarray:
    """Complex decay constants Z[m, n] of the coherences; the diagonal is zero."""
    if rates is None:
        rates = chi(table.omega, bath)
    if shifts is None:
        shifts = _xi_on_table(table, np.abs(table.elements) ** 2, bath)
    G = _decay_sums(table, rates, shifts)
    diag = table.diagonal()                                   # (D, nu)
    cross = np.einsum("v,mv,nv->mn", chi(table.nus * table.omega_d, bath),
                      diag, diag.conj())
    Z = 0.5 * G[:, None] + 0.5 * G.conj()[None, :] - cross
    np.fill_diagonal(Z, 0.0)
    return Z


def offdiag_decay_real(table: TransitionTable, bath: BathSpec, rates=None) -> np.ndarray:
    """Re Z written as a sum of manifestly non-negative terms."""
    if rates is None:
        rates = chi(table.omega, bath)
    w2 = np.abs(table.elements) ** 2
    D = len(table)
    idx = np.arange(D)
    out_rate = np.einsum("kmv,kmv->m", rates, w2) - np.einsum(
        "mv,mv->m", rates[idx, idx], w2[idx, idx])
    diag = table.diagonal()
    zero_rate = chi(table.nus * table.omega_d, bath)
    dephasing = 0.5 * np.einsum("v,mnv->mn", zero_rate,
                                np.abs(diag[:, None, :] - diag[None, :, :]) ** 2)
    R = dephasing + 0.5 * (out_rate[:, None] + out_rate[None, :])
    np.fill_diagonal(R, 0.0)
    return R


def _gth(Q: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible chain with rates Q[i, j] (i -> j).

    Grassmann-Taksar-Heyman elimination: no subtractions, so tiny
    populations keep full relative accuracy.
    """
    Q = np.array(Q, dtype=float)
    np.fill_diagonal(Q, 0.0)
    n = Q.shape[0]
    for k in range(n - 1, 0, -1):
        s = Q[k, :k].sum()
        Q[:k, k] /= s
        Q[:k, :k] += np.outer(Q[:k, k], Q[k, :k])
    p = np.zeros(n)
    p[0] = 1.0
    for k in range(1, n):
        p[k] = p[:k] @ Q[:k, k]
        # populations can span more decades than a double holds; keep the
        # running maximum at one
        if p[k] > 1.0:
            p[:k + 1] /= p[k]
    return p / p.sum()


def closed_classes(L: np.ndarray, threshold: float = EDGE_THRESHOLD) -> tuple[list, np.ndarray]:
    """Closed communicating classes of the rate graph and the class labels."""
    W = np.array(L, dtype=float)
    np.fill_diagonal(W, 0.0)
    scale = W.max() if W.size else 0.0
    adj = (W.T > threshold * scale) if scale > 0 else np.zeros_like(W, dtype=bool)
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    src, dst = np.nonzero(adj)
    leaves = np.ones(n_comp, dtype=bool)
    leaves[labels[src][labels[src] != labels[dst]]] = False
    closed = [np.flatnonzero(labels == c) for c in range(n_comp) if leaves[c]]
    return closed, labels


def stationary_populations(L: np.ndarray) -> np.ndarray:
    """Unique normalized null vector of the Pauli generator.

    States outside the single closed class are transient and get zero
    weight.  More than one closed class means the stationary state is not
    unique, which is reported as an error.
    """
    closed, _ = closed_classes(L)
    if len(closed) != 1:
        raise NonUniqueStationaryStateError(
            f"transition graph has {len(closed)} closed classes; stationary state not unique")
    cls = closed[0]
    p = np.zeros(L.shape[0])
    p[cls] = _gth(L[np.ix_(cls, cls)].T) if len(cls) > 1 else 1.0
    return p


def propagate(rho: np.ndarray, tau: float, L: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Evolve a Floquet-basis density matrix by ``tau`` under the secular equation."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    rho = np.asarray(rho, dtype=complex)
    out = rho * np.exp(-Z * tau)
    pops = la.expm(L * tau) @ np.diag(rho)
    np.fill_diagonal(out, pops)
    return out


@dataclass(frozen=True)
class RateSet:
    chi: np.ndarray
    xi: np.ndarray
    pauli: np.ndarray
    Z: np.ndarray
    small_decay: tuple = ()

    def populations(self) -> np.ndarray:
        return stationary_populations(self.pauli)


def rate_set(table: TransitionTable, bath: BathSpec) -> RateSet:
    rates = chi(table.omega, bath)
    shifts = _xi_on_table(table, np.abs(table.elements) ** 2, bath)
    L = pauli_generator(table, bath, rates)
    Z = offdiag_decay(table, bath, rates, shifts)
    off = ~np.eye(len(table), dtype=bool)
    small = tuple(zip(*np.nonzero(off & (Z.real < SMALL_DECAY * max(bath.gamma, 1e-300)))))
    if small:
        log.warning("%d coherence pairs with Re Z below %.0e gamma", len(small), SMALL_DECAY)
    for arr in (rates, shifts, L, Z):
        arr.setflags(write=False)
    return RateSet(chi=rates, xi=shifts, pauli=L, Z=Z,
                   small_decay=tuple((int(a), int(b)) for a, b in small))
