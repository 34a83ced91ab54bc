"""Hilbert space, operators and Hamiltonians of the laser-driven Dicke model.

Basis ordering: the cavity Fock index is the slow index and the emitter
configuration the fast one, ``index = fock * 2**N + spin``.  Within ``spin``
emitter 0 is the most significant bit and a set bit means "excited".

All energies are in units of the reference frequency omega_0 = 1.
"""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.linalg as la

from .errors import ConfigError, DimensionError, EigensolverError

DEFAULT_MAX_DIM = 4096
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """All physical and numerical parameters of one simulation point.

    ``n_fourier = 0`` and ``n_steps = 0`` request automatic choices based on
    the spectrum of the undriven Hamiltonian (see ``floquet.resolve_numerics``).
    ``symmetric`` restricts N >= 2 emitters to the permutation-symmetric
    (collective spin N/2) subspace.
    """

    N: int = 1
    omega_c: float = 1.0
    omega_x: float = 1.0
    omega_d: float = 1.0
    g: float = 0.0
    g_prime: float = 0.0
    Omega: float = 0.0
    Omega_prime: float = 0.0
    n_ph: int = 10
    n_fourier: int = 0
    n_steps: int = 0
    gamma: float = 1e-3
    T: float = 0.1
    lamb_shift: bool = False
    cutoff: float = 50.0
    symmetric: bool = True
    integrator: str = "cfm4"
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        if not 1 <= self.N <= 3:
            raise ConfigError(f"N must be 1, 2 or 3 emitters, got {self.N}")
        for name in ("omega_c", "omega_x", "g", "g_prime", "Omega", "Omega_prime",
                     "gamma", "cutoff", "T"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {value}")
        if not self.omega_d > 0:
            raise ConfigError(f"omega_d must be > 0, got {self.omega_d}")
        if self.n_ph < 1:
            raise ConfigError(f"n_ph must be >= 1, got {self.n_ph}")
        if self.n_fourier < 0 or self.n_steps < 0:
            raise ConfigError("n_fourier and n_steps must be >= 0 (0 = automatic)")
        if self.n_fourier and self.n_steps and self.n_steps < 4 * self.n_fourier:
            raise ConfigError(
                f"n_steps={self.n_steps} must be >= 4*n_fourier={4 * self.n_fourier}")
        if self.integrator not in ("midpoint", "cfm4"):
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        full_dim = (self.n_ph + 1) * 2 ** self.N
        if full_dim > self.max_dim:
            raise DimensionError(
                f"Hilbert dimension {full_dim} exceeds max_dim={self.max_dim}")

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega_d

    @property
    def driven(self) -> bool:
        return self.Omega != 0 or self.Omega_prime != 0

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Operators:
    """Operators on a (possibly symmetry-reduced) working space.

    ``sigma_plus``/``sigma_minus`` hold the single-emitter operators and are
    empty on the symmetric subspace, where only the collective sums
    ``J_plus``/``J_minus`` act invariantly.  ``isometry`` maps working-space
    vectors into the full tensor-product space.
    """

    n_ph: int
    N: int
    a: np.ndarray
    a_dag: np.ndarray
    J_plus: np.ndarray
    J_minus: np.ndarray
    X: np.ndarray
    n_photon: np.ndarray
    n_exc: np.ndarray
    sigma_plus: tuple = ()
    sigma_minus: tuple = ()
    isometry: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def full_dim(self) -> int:
        return (self.n_ph + 1) * 2 ** self.N

    def to_full(self, vectors: np.ndarray) -> np.ndarray:
        """Embed working-space column vectors into the full space."""
        if self.isometry is None:
            return vectors
        return self.isometry @ vectors


def basis_index(fock: int, spins, N: int) -> int:
    spin = 0
    for s in spins:
        spin = 2 * spin + int(s)
    return fock * 2 ** N + spin


def basis_state(index: int, N: int) -> tuple[int, tuple[int, ...]]:
    fock, spin = divmod(index, 2 ** N)
    spins = tuple((spin >> (N - 1 - j)) & 1 for j in range(N))
    return fock, spins


def _freeze(*arrays):
    for arr in arrays:
        if isinstance(arr, np.ndarray):
            arr.setflags(write=False)


def build_operators(params: ModelParams) -> Operators:
    """Ladder, spin and coupling operators on the full tensor-product space.

    The cavity is truncated at ``n_ph`` photons; operators act on the
    truncated space as-is, so ``[a, a_dag] = 1`` fails on the top Fock level.
    """
    n_ph, N = params.n_ph, params.N
    dim = (n_ph + 1) * 2 ** N
    if dim > params.max_dim:
        raise DimensionError(f"Hilbert dimension {dim} exceeds max_dim={params.max_dim}")

    a_c = np.diag(np.sqrt(np.arange(1, n_ph + 1, dtype=float)), 1).astype(complex)
    id_spin = np.eye(2 ** N)
    a = np.kron(a_c, id_spin)
    a_dag = a.conj().T

    # single emitter: index 0 = ground, 1 = excited
    sp1 = np.array([[0, 0], [1, 0]], dtype=complex)
    id_fock = np.eye(n_ph + 1)
    sigma_plus = []
    for j in range(N):
        factors = [np.eye(2)] * N
        factors[j] = sp1
        spin_op = factors[0]
        for f in factors[1:]:
            spin_op = np.kron(spin_op, f)
        sigma_plus.append(np.kron(id_fock, spin_op))
    sigma_minus = [s.conj().T for s in sigma_plus]
    J_plus = sum(sigma_plus)
    J_minus = J_plus.conj().T
    X = -1j * (a - a_dag)
    n_photon = a_dag @ a
    n_exc = sum(sp @ sm for sp, sm in zip(sigma_plus, sigma_minus))
    _freeze(a, a_dag, J_plus, J_minus, X, n_photon, n_exc, *sigma_plus, *sigma_minus)
    return Operators(n_ph=n_ph, N=N, a=a, a_dag=a_dag, J_plus=J_plus, J_minus=J_minus,
                     X=X, n_photon=n_photon, n_exc=n_exc,
                     sigma_plus=tuple(sigma_plus), sigma_minus=tuple(sigma_minus))


def symmetric_isometry(n_ph: int, N: int) -> np.ndarray:
    """Columns span Fock x {symmetric Dicke states}, ordered ``fock * (N+1) + k``.

    ``k`` is the number of excited emitters.
    """
    dicke = np.zeros((2 ** N, N + 1))
    for spins in itertools.product((0, 1), repeat=N):
        k = sum(spins)
        dicke[basis_index(0, spins, N), k] = 1 / np.sqrt(comb(N, k))
    return np.kron(np.eye(n_ph + 1), dicke)


def working_operators(params: ModelParams) -> Operators:
    """Operators on the space the simulation runs in.

    For a single emitter, or with ``symmetric=False``, this is the full space.
    Otherwise everything is projected onto the permutation-symmetric
    subspace, which is invariant under the Hamiltonian and the bath coupling.
    """
    full = build_operators(params)
    if params.N == 1 or not params.symmetric:
        return full
    P = symmetric_isometry(params.n_ph, params.N)

    def proj(op):
        return P.T @ op @ P

    mats = [proj(op) for op in (full.a, full.J_plus, full.n_photon, full.n_exc)]
    a, J_plus, n_photon, n_exc = mats
    a_dag = a.conj().T
    J_minus = J_plus.conj().T
    X = -1j * (a - a_dag)
    _freeze(a, a_dag, J_plus, J_minus, X, n_photon, n_exc, P)
    return Operators(n_ph=params.n_ph, N=params.N, a=a, a_dag=a_dag, J_plus=J_plus,
                     J_minus=J_minus, X=X, n_photon=n_photon, n_exc=n_exc, isometry=P)


def dicke_hamiltonian(params: ModelParams, ops: Operators) -> np.ndarray:
    a, ad, Jp, Jm = ops.a, ops.a_dag, ops.J_plus, ops.J_minus
    H = (params.omega_c * ops.n_photon + params.omega_x * ops.n_exc
         + params.g * (ad @ Jm + a @ Jp)
         + params.g_prime * (a @ Jm + ad @ Jp))
    H = 0.5 * (H + H.conj().T)
    H.setflags(write=False)
    return H


def laser_coefficient(params: ModelParams, t: float) -> complex:
    """Coefficient c(t) with H_L(t) = c(t) a + conj(c(t)) a_dag."""
    phase = params.omega_d * t
    return 0.5 * (params.Omega * np.exp(1j * phase) + params.Omega_prime * np.exp(-1j * phase))


def laser_hamiltonian(params: ModelParams, ops: Operators, t: float) -> np.ndarray:
    c = laser_coefficient(params, t)
    return c * ops.a + np.conj(c) * ops.a_dag


@dataclass(frozen=True)
class Eigensystem:
    energies: np.ndarray
    vectors: np.ndarray  # columns

    def __len__(self):
        return len(self.energies)


def clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Split sorted ``values`` into index groups separated by gaps >= tol."""
    if len(values) == 0:
        return []
    breaks = np.nonzero(np.diff(values) >= tol)[0] + 1
    return np.split(np.arange(len(values)), breaks)


def canonical_subspace_basis(Q: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis for the span of the columns of ``Q``.

    The result depends only on the subspace (through its projector), not on
    the particular basis ``Q`` handed in.
    """
    k = Q.shape[1]
    if k == 1:
        return fix_phases(Q.copy())
    proj = Q @ Q.conj().T
    _, _, piv = la.qr(Q.conj().T, pivoting=True, mode="economic")
    cols = proj[:, np.sort(piv[:k])]
    basis, _ = np.linalg.qr(cols)
    return fix_phases(basis)


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    vectors = np.array(vectors, dtype=complex)
    idx = np.argmax(np.abs(vectors) - 1e-12 * np.arange(vectors.shape[0])[:, None], axis=0)
    lead = vectors[idx, np.arange(vectors.shape[1])]
    return vectors * (np.abs(lead) / lead)[None, :]


def system_energies(H: np.ndarray, tol: float = DEGENERACY_TOL) -> Eigensystem:
    """Eigenvalues of H_D in ascending order with deterministic eigenvectors.

    Degenerate clusters (gap below ``tol``) get a canonical orthonormal basis
    and every vector has its largest component real positive.
    """
    try:
        energies, vectors = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigh failed to converge: {exc}") from exc
    vectors = vectors.astype(complex)
    for group in clusters(energies, tol):
        vectors[:, group] = canonical_subspace_basis(vectors[:, group])
    energies.setflags(write=False)
    vectors.setflags(write=False)
    return Eigensystem(energies, vectors)
