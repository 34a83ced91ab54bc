"""Emission observables built from the positive-frequency output operator.

Throughout, the output operator is written in the Floquet frame as

    Xdot_-(t) = sum_{m,n,nu} c[m, n, nu] exp(-i w[m, n, nu] t) |m><n|,
    w[m, n, nu] = eps_n - eps_m + nu * omega_d,

so that in the same frame the stationary state is the constant diagonal
matrix of populations and the secular propagator acts element-wise.
Averages over one drive period then reduce to selecting matching Fourier
indices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.special import xlogy

from .bath import BathSpec
from .errors import ConfigError, PeakNotFoundError, UndefinedObservableError
from .floquet import FloquetBasis, TransitionTable

log = logging.getLogger(__name__)

PRUNE_REL = 1e-12
DARK_THRESHOLD = 1e-300
ANTICROSSING_RATIO = 0.3
X_FORM_TOL = 1e-8


@dataclass(frozen=True)
class OutputDecomposition:
    """Coefficients of the positive-frequency output operator.

    ``coeffs[m, n, i]`` multiplies ``exp(-i freqs[m, n, i] t) |m><n|``;
    entries with non-positive frequency are exactly zero.
    """

    coeffs: np.ndarray
    freqs: np.ndarray
    nus: np.ndarray
    eps: np.ndarray
    omega_d: float

    def __len__(self):
        return self.coeffs.shape[0]

    def terms(self, rel_cut: float = 0.0) -> list[tuple[int, int, int, float, complex]]:
        """Nonzero terms as (m, n, nu, frequency, weight) tuples."""
        mag = np.abs(self.coeffs)
        cut = rel_cut * mag.max() if mag.size else 0.0
        out = []
        for m, n, i in zip(*np.nonzero(mag > cut)):
            out.append((int(m), int(n), int(self.nus[i]), float(self.freqs[m, n, i]),
                        complex(self.coeffs[m, n, i])))
        return out

    def floquet_matrix(self) -> np.ndarray:
        """sum_nu c[:, :, nu]: the operator at t = 0 in the Floquet basis."""
        return self.coeffs.sum(axis=2)

    def matrix_at_zero(self, basis: FloquetBasis) -> np.ndarray:
        """The operator at t = 0 on the working Hilbert space."""
        return basis.psi0 @ self.floquet_matrix() @ basis.psi0.conj().T

    def trimmed(self) -> tuple[np.ndarray, np.ndarray]:
        """(nus, coeffs with the nu axis first) restricted to the nonzero range."""
        active = np.flatnonzero(np.abs(self.coeffs).max(axis=(0, 1)) > 0)
        if active.size == 0:
            return self.nus[:1], np.zeros((1,) + self.coeffs.shape[:2], dtype=complex)
        sl = slice(active[0], active[-1] + 1)
        return self.nus[sl], np.transpose(self.coeffs[:, :, sl], (2, 0, 1))


def output_operator(basis: FloquetBasis, table: TransitionTable) -> OutputDecomposition:
    """Project -i d/dt of the coupling operator onto emitting transitions.

    The step function is taken as zero at zero frequency, where the
    prefactor vanishes anyway.
    """
    freqs = table.omega
    coeffs = np.where(freqs > 0, -1j * freqs * table.elements, 0.0)
    coeffs.setflags(write=False)
    return OutputDecomposition(coeffs=coeffs, freqs=freqs, nus=table.nus,
                               eps=table.eps, omega_d=table.omega_d)


def _pair_products(decomp: OutputDecomposition, combine, left, right):
    """Accumulate ``left(C_i) @ right(C_j)`` into bins keyed by ``combine(nu_i, nu_j)``.

    Products are formed directly rather than through FFTs so that exact
    zeros (for instance "emission" out of the ground state) stay exact; at
    low temperature these are weighted by populations many orders of
    magnitude apart.
    """
    nus, C = decomp.trimmed()
    active = [i for i in range(len(nus)) if np.any(C[i])]
    bins = {}
    for i in active:
        li = left(C[i])
        for j in active:
            key = int(combine(nus[i], nus[j]))
            prod = li @ right(C[j])
            if key in bins:
                bins[key] += prod
            else:
                bins[key] = prod
    keys = np.array(sorted(bins), dtype=int)
    D = C.shape[1]
    stack = np.array([bins[k] for k in keys]) if len(keys) else np.zeros((0, D, D), complex)
    return keys, stack


def mean_intensity(decomp: OutputDecomposition, populations: np.ndarray) -> float:
    """Period average of <Xdot_+ Xdot_-> in the stationary state."""
    return float(np.einsum("n,mnv->", populations, np.abs(decomp.coeffs) ** 2))


def output_flux(decomp: OutputDecomposition, populations: np.ndarray, bath: BathSpec) -> float:
    """Period-averaged photon number in the output channel."""
    return 4 * np.pi ** 2 * (bath.gamma / bath.omega_0) ** 2 * mean_intensity(decomp, populations)


def _denominator(decomp, populations):
    denom = mean_intensity(decomp, populations)
    if denom < DARK_THRESHOLD:
        raise UndefinedObservableError(
            f"mean output intensity {denom:.3e} vanishes; g2 is undefined")
    return denom


def g2_zero(decomp: OutputDecomposition, populations: np.ndarray) -> float:
    """Second-order Glauber function at zero delay, averaged over one period."""
    denom = _denominator(decomp, populations)
    # Xdot_- squared has Fourier blocks B_q = sum_nu C_nu C_{q - nu}
    _, B = _pair_products(decomp, lambda a, b: a + b, lambda x: x, lambda x: x)
    num = np.einsum("n,qmn->", populations, np.abs(B) ** 2)
    return float(num / denom ** 2)


@dataclass(frozen=True)
class _CorrelationTerms:
    qs: np.ndarray
    A: np.ndarray   # (q, D, D): Fourier blocks of C(t)^dagger C(t), e^{+i q w t}
    M: np.ndarray   # (q, D, D): Fourier blocks of C(t) P C(t)^dagger, e^{-i q w t}
    denom: float


def _correlation_terms(decomp, populations) -> _CorrelationTerms:
    denom = _denominator(decomp, populations)
    # M_q = sum_nu C_nu P C_{nu-q}^dagger and A_q = sum_nu C_nu^dagger C_{nu-q}
    qs, M = _pair_products(decomp, lambda a, b: a - b,
                           lambda x: x * populations[None, :], lambda x: x.conj().T)
    qa, A = _pair_products(decomp, lambda a, b: a - b, lambda x: x.conj().T, lambda x: x)
    assert np.array_equal(qs, qa)
    return _CorrelationTerms(qs=qs, A=A, M=M, denom=denom)


def g2_tau(decomp: OutputDecomposition, Z: np.ndarray, L: np.ndarray,
           populations: np.ndarray, tau_grid) -> np.ndarray:
    """Glauber function g2(tau) averaged over the emission time in one period.

    Coherences of the dressed state decay with ``exp(-Z tau)`` and its
    diagonal evolves with the Pauli generator.
    """
    tau_grid = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if np.any(tau_grid < 0):
        raise ValueError("tau must be >= 0")
    terms = _correlation_terms(decomp, populations)
    eps, w = decomp.eps, decomp.omega_d
    D = len(eps)
    off = ~np.eye(D, dtype=bool)
    # coherence part: sum_q sum_{m != m'} A_q[m', m] M_q[m, m'] e^{rate tau}
    amp = np.einsum("qnm,qmn->qmn", terms.A, terms.M)[:, off]
    rates = (1j * (eps[None, None, :] - eps[None, :, None] + terms.qs[:, None, None] * w)
             - Z[None, :, :])[:, off]
    idx = np.arange(D)
    a_diag = terms.A[:, idx, idx]
    m_diag = terms.M[:, idx, idx]
    evals, V = la.eig(L)
    Vinv = la.inv(V)
    left = a_diag @ V                     # (q, modes)
    right = m_diag @ Vinv.T               # (q, modes)
    out = np.empty(len(tau_grid))
    for i, tau in enumerate(tau_grid):
        coh = np.sum(amp * np.exp(rates * tau))
        pop = np.sum(np.exp(1j * terms.qs * w * tau)[:, None] * left * right
                     * np.exp(evals * tau)[None, :])
        out[i] = (coh + pop).real
    return out / terms.denom ** 2


@dataclass(frozen=True)
class Peak:
    """One complex Lorentzian: Re[weight / (decay + i (omega - frequency))].

    The visible center is ``frequency - decay.imag`` and the half width
    ``decay.real``.
    """

    frequency: float
    decay: complex
    weight: complex
    kind: str
    source: tuple

    @property
    def center(self) -> float:
        return self.frequency - self.decay.imag

    @property
    def half_width(self) -> float:
        return self.decay.real

    @property
    def strength(self) -> float:
        """Integrated area of the line before the bath prefactor, over pi."""
        return self.weight.real


@dataclass(frozen=True)
class PeakList:
    peaks: tuple
    elastic: tuple = ()             # (frequency, weight) delta lines
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.peaks)

    def evaluate(self, omega_grid, bath: BathSpec) -> np.ndarray:
        """Sampled S(omega), excluding the elastic delta lines."""
        omega = np.asarray(omega_grid, dtype=float)
        if not self.peaks:
            return np.zeros_like(omega)
        f = np.array([p.frequency for p in self.peaks])
        z = np.array([p.decay for p in self.peaks])
        wt = np.array([p.weight for p in self.peaks])
        total = np.zeros(omega.shape, dtype=complex)
        for chunk in np.array_split(np.arange(len(f)), max(1, len(f) // 256)):
            total += np.sum(wt[chunk, None] / (z[chunk, None]
                            + 1j * (omega[None, :] - f[chunk, None])), axis=0)
        prefactor = np.where(omega > 0, bath.spectral(np.abs(omega)), 0.0) / np.pi
        return prefactor * total.real

    def to_records(self) -> list[dict]:
        return [dict(center=p.center, half_width=p.half_width, frequency=p.frequency,
                     weight_re=p.weight.real, weight_im=p.weight.imag, kind=p.kind,
                     source=list(p.source)) for p in self.peaks]


def _population_modes(L):
    evals, V = la.eig(L)
    Vinv = la.inv(V)
    zero = int(np.argmin(np.abs(evals)))
    return evals, V, Vinv, zero


def emission_spectrum(decomp: OutputDecomposition, Z: np.ndarray, L: np.ndarray,
                      populations: np.ndarray, bath: BathSpec, omega_grid=None,
                      prune: float = PRUNE_REL):
    """Emission spectrum as a list of Lorentzian lines and optionally sampled.

    Coherence (m, n) carries lines at the transition frequencies with weight
    p_n |c[m, n, nu]|^2 and complex width Z[m, n].  Diagonal terms of the
    output operator, which only exist with drive, relax through the Pauli
    generator; its stationary mode is an elastic delta line at the drive
    harmonic and is kept separate from the sampled curve.

    Returns the ``PeakList`` and, if ``omega_grid`` is given, the sampled
    spectrum as a second value.
    """
    C = decomp.coeffs
    D = len(decomp)
    peaks = []
    m_idx, n_idx, v_idx = np.nonzero(C)
    off = m_idx != n_idx
    for m, n, v in zip(m_idx[off], n_idx[off], v_idx[off]):
        w = populations[n] * abs(C[m, n, v]) ** 2
        if w == 0:
            continue
        peaks.append(Peak(frequency=float(decomp.freqs[m, n, v]), decay=complex(Z[m, n]),
                          weight=complex(w), kind="coherence", source=(int(m), int(n), int(decomp.nus[v]))))

    elastic = []
    idx = np.arange(D)
    diag = C[idx, idx, :]                                   # (D, nu)
    active = np.flatnonzero(np.abs(diag).max(axis=0) > 0)
    if active.size:
        evals, V, Vinv, zero = _population_modes(L)
        for v in active:
            c = diag[:, v]
            left = c.conj() @ V
            right = Vinv @ (c * populations)
            freq = float(decomp.nus[v] * decomp.omega_d)
            elastic.append((freq, float(abs(np.sum(populations * c)) ** 2)))
            for j in range(D):
                if j == zero:
                    continue
                w = complex(left[j] * right[j])
                if w == 0:
                    continue
                peaks.append(Peak(frequency=freq, decay=complex(-evals[j]), weight=w,
                                  kind="population", source=(int(j), int(decomp.nus[v]))))

    if peaks:
        scale = max(abs(p.weight) for p in peaks)
        peaks = [p for p in peaks if abs(p.weight) >= prune * scale]
    peaks.sort(key=lambda p: (p.center, p.kind, p.source))
    plist = PeakList(peaks=tuple(peaks), elastic=tuple(elastic))
    if omega_grid is None:
        return plist
    return plist, plist.evaluate(omega_grid, bath)


@dataclass(frozen=True)
class Line:
    center: float
    strength: float
    members: int


def merge_lines(peaks: PeakList, tol: float = 1e-6) -> list[Line]:
    """Group peaks with coincident centers and add their strengths."""
    lines = []
    for p in sorted(peaks.peaks, key=lambda p: p.center):
        if lines and p.center - lines[-1][0][-1] < tol:
            lines[-1][0].append(p.center)
            lines[-1][1].append(p.strength)
        else:
            lines.append(([p.center], [p.strength]))
    out = []
    for centers, strengths in lines:
        s = np.array(strengths)
        wts = np.abs(s)
        c = float(np.average(centers, weights=wts)) if wts.sum() > 0 else float(np.mean(centers))
        out.append(Line(center=c, strength=float(s.sum()), members=len(centers)))
    return out


def dominant_line(peaks: PeakList, window: tuple[float, float]):
    """Strongest merged line inside ``window`` and the runner-up ratio."""
    lo, hi = window
    inside = [ln for ln in merge_lines(peaks) if lo <= ln.center <= hi and ln.strength > 0]
    if not inside:
        raise PeakNotFoundError(f"no emission line in window [{lo}, {hi}]")
    inside.sort(key=lambda ln: -ln.strength)
    ratio = inside[1].strength / inside[0].strength if len(inside) > 1 else 0.0
    return inside[0], ratio


@dataclass(frozen=True)
class ShiftSeries:
    Omega: np.ndarray
    center: np.ndarray
    strength: np.ndarray
    anticrossing: np.ndarray
    fit_offset: float
    fit_scale: float
    fit_residual: np.ndarray

    @property
    def total_shift(self) -> float:
        return float(np.max(self.center) - np.min(self.center))


def stark_profile(Omega, g):
    """[1 - (Omega/g)^2]^(3/4), the reduction factor of the driven doublet splitting."""
    kappa2 = (np.asarray(Omega, dtype=float) / g) ** 2
    return np.clip(1 - kappa2, 0, None) ** 0.75


def peak_shift_tracker(params, Omega_grid, window, drive_prime=None, solver=None) -> ShiftSeries:
    """Follow the dominant line in ``window`` as the drive strength varies.

    ``drive_prime`` sets Omega' = Omega (the full drive) and defaults to
    whether the counter-rotating coupling is switched on.  The centers are
    fitted by offset + scale * [1 - (Omega/g)^2]^(3/4).
    """
    if solver is None:
        from .pipeline import solve as solver
    if drive_prime is None:
        drive_prime = params.g_prime > 0
    Omega_grid = np.asarray(Omega_grid, dtype=float)
    centers, strengths, flags = [], [], []
    for Om in Omega_grid:
        sol = solver(params.replace(Omega=float(Om), Omega_prime=float(Om) if drive_prime else 0.0))
        line, ratio = dominant_line(sol.peaks(), window)
        centers.append(line.center)
        strengths.append(line.strength)
        flags.append(ratio > ANTICROSSING_RATIO)
    centers = np.array(centers)
    if params.g > 0:
        basis_fn = stark_profile(Omega_grid, params.g)
        design = np.column_stack([np.ones_like(basis_fn), basis_fn])
        (offset, scale), *_ = np.linalg.lstsq(design, centers, rcond=None)
        residual = centers - design @ np.array([offset, scale])
    else:
        offset, scale, residual = float(centers.mean()), 0.0, centers - centers.mean()
    return ShiftSeries(Omega=Omega_grid, center=centers, strength=np.array(strengths),
                       anticrossing=np.array(flags), fit_offset=float(offset),
                       fit_scale=float(scale), fit_residual=residual)


@dataclass(frozen=True)
class EmitterState:
    """Reduced two-emitter density matrix in the basis |gg>, |ge>, |eg>, |ee>."""

    rho4: np.ndarray

    @property
    def x_form_residual(self) -> float:
        mask = ~(np.eye(4, dtype=bool) | np.fliplr(np.eye(4, dtype=bool)))
        return float(np.max(np.abs(self.rho4[mask])))

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho4).real)


def reduce_to_emitters(rho_bar: np.ndarray, ops) -> EmitterState:
    """Trace the cavity out of a working-space density matrix of two emitters."""
    if ops.N != 2:
        raise ConfigError(f"emitter reduction needs N = 2, got N = {ops.N}")
    rho = ops.to_full(rho_bar)
    if ops.isometry is not None:
        rho = rho @ ops.isometry.T
    n = ops.n_ph + 1
    rho4 = np.einsum("aiaj->ij", rho.reshape(n, 4, n, 4))
    rho4 = 0.5 * (rho4 + rho4.conj().T)
    return EmitterState(rho4=rho4)


_SY2 = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def _check_density(rho4, tol=1e-8):
    rho4 = np.asarray(rho4, dtype=complex)
    if rho4.shape != (4, 4):
        raise ValueError("expected a 4x4 density matrix")
    if np.max(np.abs(rho4 - rho4.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho4) - 1) > tol:
        raise ValueError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho4).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho4


def concurrence_x(rho4) -> float:
    r = np.asarray(rho4)
    c = max(0.0,
            abs(r[0, 3]) - np.sqrt(max(r[1, 1].real, 0) * max(r[2, 2].real, 0)),
            abs(r[1, 2]) - np.sqrt(max(r[0, 0].real, 0) * max(r[3, 3].real, 0)))
    return float(min(2 * c, 1.0))


def concurrence_wootters(rho4) -> float:
    """General two-qubit concurrence from the spin-flipped state."""
    rho = np.asarray(rho4, dtype=complex)
    flipped = _SY2 @ rho.conj() @ _SY2
    e, v = np.linalg.eigh(rho)
    sqrt_rho = (v * np.sqrt(np.clip(e, 0, None))) @ v.conj().T
    R = sqrt_rho @ flipped @ sqrt_rho
    lam = np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (R + R.conj().T)), 0, None))[::-1]
    return float(np.clip(lam[0] - lam[1:].sum(), 0.0, 1.0))


def concurrence(rho4, tol: float = X_FORM_TOL) -> float:
    """Concurrence, by the X-state formula when the state has that form."""
    rho4 = _check_density(rho4)
    if EmitterState(rho4).x_form_residual < tol:
        return concurrence_x(rho4)
    return concurrence_wootters(rho4)


def eof(C) -> float:
    """Entanglement of formation of a two-qubit state with concurrence C."""
    C = float(C)
    if not 0 <= C <= 1:
        raise ValueError(f"concurrence must lie in [0, 1], got {C}")
    eta = 0.5 * (1 + np.sqrt(1 - C * C))
    return float(-(xlogy(eta, eta) + xlogy(1 - eta, 1 - eta)) / np.log(2)) + 0.0
