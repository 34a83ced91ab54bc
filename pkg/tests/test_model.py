import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from drivendicke.errors import ConfigError, DimensionError
from drivendicke.model import (
    ModelParams,
    basis_index,
    basis_state,
    build_operators,
    canonical_subspace_basis,
    dicke_hamiltonian,
    laser_coefficient,
    laser_hamiltonian,
    symmetric_isometry,
    system_energies,
    working_operators,
)


def test_defaults_are_valid():
    p = ModelParams()
    assert p.period == pytest.approx(2 * np.pi)
    assert not p.driven
    assert p.replace(Omega=0.1).driven


@pytest.mark.parametrize("changes", [
    dict(N=0), dict(N=4), dict(g=-0.1), dict(T=float("nan")), dict(omega_d=0.0),
    dict(n_ph=0), dict(n_fourier=10, n_steps=20), dict(integrator="rk4"),
])
def test_invalid_params_rejected(changes):
    with pytest.raises(ConfigError):
        ModelParams(**changes)


def test_dimension_budget():
    with pytest.raises(DimensionError):
        ModelParams(N=3, n_ph=600)


@given(st.integers(0, 20), st.integers(1, 3), st.data())
def test_basis_index_roundtrip(fock, N, data):
    spins = tuple(data.draw(st.lists(st.integers(0, 1), min_size=N, max_size=N)))
    idx = basis_index(fock, spins, N)
    assert basis_state(idx, N) == (fock, spins)


def test_ladder_operators():
    ops = build_operators(ModelParams(N=2, n_ph=6))
    comm = ops.a @ ops.a_dag - ops.a_dag @ ops.a
    # canonical commutator everywhere except on the truncation edge
    top = 6 * 4
    assert np.allclose(comm[:top, :top], np.eye(top))
    assert np.allclose(ops.X, -1j * (ops.a - ops.a_dag))
    assert np.allclose(ops.X, ops.X.conj().T)
    assert np.allclose(np.diag(ops.n_exc), [bin(i % 4).count("1") for i in range(ops.dim)])


def test_sigma_plus_excites_the_right_emitter():
    ops = build_operators(ModelParams(N=2, n_ph=1))
    v = np.zeros(ops.dim)
    v[basis_index(0, (0, 0), 2)] = 1
    out = ops.sigma_plus[1] @ v
    assert out[basis_index(0, (0, 1), 2)] == 1
    assert np.count_nonzero(out) == 1


def test_jaynes_cummings_spectrum():
    # resonant RWA: E = n +- g sqrt(n) and a ground state at 0
    g = 0.3
    p = ModelParams(g=g, n_ph=30)
    E = system_energies(dicke_hamiltonian(p, working_operators(p))).energies
    expected = [0.0] + [n + s * g * np.sqrt(n) for n in range(1, 8) for s in (-1, 1)]
    for e in expected:
        assert np.min(np.abs(E - e)) < 1e-12


def test_excitation_number_conserved_in_rwa():
    p = ModelParams(N=2, g=0.4, n_ph=5)
    ops = working_operators(p)
    H = dicke_hamiltonian(p, ops)
    n_tot = ops.n_photon + ops.n_exc
    assert np.allclose(H @ n_tot, n_tot @ H)
    p2 = p.replace(g_prime=0.4)
    assert not np.allclose(dicke_hamiltonian(p2, ops) @ n_tot, n_tot @ dicke_hamiltonian(p2, ops))


@pytest.mark.parametrize("N", [2, 3])
def test_symmetric_subspace_is_invariant(N):
    p = ModelParams(N=N, g=0.6, g_prime=0.6, n_ph=4, symmetric=False)
    full = build_operators(p)
    H = dicke_hamiltonian(p, full)
    P = symmetric_isometry(p.n_ph, N)
    assert np.allclose(P.T @ P, np.eye(P.shape[1]))
    # H maps the symmetric subspace into itself
    assert np.allclose(H @ P, P @ (P.T @ H @ P))
    sym = working_operators(p.replace(symmetric=True))
    E_sym = system_energies(dicke_hamiltonian(p, sym)).energies
    E_full = np.linalg.eigvalsh(H)
    for e in E_sym:
        assert np.min(np.abs(E_full - e)) < 1e-10


def test_laser_hamiltonian_is_hermitian_and_periodic():
    p = ModelParams(g=0.5, Omega=0.2, Omega_prime=0.1)
    ops = working_operators(p)
    H1 = laser_hamiltonian(p, ops, 0.3)
    assert np.allclose(H1, H1.conj().T)
    assert np.allclose(H1, laser_hamiltonian(p, ops, 0.3 + p.period))
    # Omega' = 0: H_L = Omega/2 (a e^{iwt} + h.c.)
    c = laser_coefficient(p.replace(Omega_prime=0.0), 0.7)
    assert c == pytest.approx(0.1 * np.exp(0.7j))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_canonical_basis_depends_only_on_subspace(seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3)))
    R = unitary_group.rvs(3, random_state=seed)
    B1 = canonical_subspace_basis(Q)
    B2 = canonical_subspace_basis(Q @ R)
    assert np.allclose(B1, B2, atol=1e-10)
    assert np.allclose(B1.conj().T @ B1, np.eye(3), atol=1e-12)


def test_degenerate_eigenvectors_are_deterministic():
    # bare cavity and emitter at resonance: |n, e> and |n+1, g> are degenerate
    p = ModelParams(n_ph=6)
    H = dicke_hamiltonian(p, working_operators(p))
    s1 = system_energies(H)
    U = np.kron(np.eye(7), unitary_group.rvs(2, random_state=3))
    s2 = system_energies(U @ H @ U.conj().T)
    # same canonical construction in the rotated frame gives rotated projectors
    for E in (1.0, 2.0):
        idx = np.flatnonzero(np.abs(s1.energies - E) < 1e-9)
        P1 = s1.vectors[:, idx] @ s1.vectors[:, idx].conj().T
        P2 = s2.vectors[:, idx] @ s2.vectors[:, idx].conj().T
        assert np.allclose(U @ P1 @ U.conj().T, P2)
    again = system_energies(H)
    assert np.array_equal(again.vectors, s1.vectors)
