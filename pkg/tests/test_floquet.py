import numpy as np
import pytest
from hypothesis import given, strategies as st

from drivendicke.errors import AmbiguousLabelError, ConfigError, FourierCutoffError
from drivendicke.floquet import (
    fold_to_zone,
    floquet_basis,
    label_states,
    one_cycle_propagator,
    resolve_numerics,
    transition_operators,
    unitarity_defect,
)
from drivendicke.model import ModelParams, dicke_hamiltonian, system_energies, working_operators
from drivendicke.tc import tc_quasienergies


def build(params):
    ops = working_operators(params)
    H = dicke_hamiltonian(params, ops)
    system = system_energies(H)
    F, K = resolve_numerics(params, system.energies)
    prop = one_cycle_propagator(params, ops, H, K)
    return ops, H, system, prop, floquet_basis(prop, params, H, F)


@pytest.fixture(scope="module")
def driven():
    return build(ModelParams(g=0.5, g_prime=0.5, Omega=0.1, Omega_prime=0.1, n_ph=10))


@pytest.fixture(scope="module")
def undriven():
    return build(ModelParams(g=0.6, g_prime=0.6, n_ph=10))


@given(st.floats(-50, 50, allow_nan=False), st.floats(0.2, 3.0))
def test_fold_to_zone(eps, omega_d):
    f = float(fold_to_zone(eps, omega_d))
    assert -omega_d / 2 <= f < omega_d / 2
    k = (eps - f) / omega_d
    assert abs(k - round(k)) < 1e-9


def test_zone_edge_maps_to_lower_boundary():
    assert fold_to_zone(0.5 - 1e-12, 1.0) == pytest.approx(-0.5)


def test_every_stored_propagator_is_unitary(driven):
    _, _, _, prop, _ = driven
    assert max(unitarity_defect(U) for U in prop.U) < 1e-10


def test_floquet_eigenvalue_equation(driven):
    _, _, _, prop, basis = driven
    U = prop.one_cycle
    lhs = U @ basis.psi0
    rhs = basis.psi0 * np.exp(-1j * basis.eps * basis.period)
    assert np.allclose(lhs, rhs, atol=1e-9)
    assert np.allclose(basis.psi0.conj().T @ basis.psi0, np.eye(len(basis)), atol=1e-10)


def test_fourier_components_reconstruct_periodic_states(driven):
    _, _, _, prop, basis = driven
    for j in (0, 17, prop.n_steps // 2):
        t = prop.times[j]
        direct = prop.U[j] @ basis.psi0 * np.exp(1j * basis.eps * t)
        assert np.allclose(basis.periodic_states(t), direct, atol=1e-9)
    assert np.allclose(basis.fourier_overlap(), np.eye(len(basis)), atol=1e-9)
    assert basis.outside_weight.max() < 1e-6


def test_undriven_basis_is_the_eigenbasis(undriven):
    _, H, system, _, basis = undriven
    labels = label_states(basis, system)
    assert np.allclose(labels.overlap, 1.0, atol=1e-10)
    assert labels.residual.max() < 1e-10
    assert sorted(labels.eig_index) == list(range(len(system)))
    assert np.allclose(basis.eps, fold_to_zone(labels.energies, 1.0), atol=1e-10)
    # a single Fourier mode per state
    weights = np.sum(np.abs(basis.phi_tilde) ** 2, axis=2)
    assert np.allclose(weights.max(axis=1), 1.0, atol=1e-10)


def test_quasienergies_match_closed_form():
    g, Omega = 0.5, 0.2
    _, _, _, _, basis = build(ModelParams(g=g, Omega=Omega, n_ph=15))
    for n in (1, 2):
        for E in tc_quasienergies(n, g, Omega):
            assert np.min(np.abs(basis.eps - fold_to_zone(E, 1.0))) < 1e-6


def test_integrators_agree():
    p = ModelParams(g=0.5, Omega=0.2, n_ph=8, n_fourier=16)
    ops = working_operators(p)
    H = dicke_hamiltonian(p, ops)
    cfm = floquet_basis(one_cycle_propagator(p, ops, H, 256), p, H, 16)
    mid_p = p.replace(integrator="midpoint")
    mid = floquet_basis(one_cycle_propagator(mid_p, ops, H, 4096), mid_p, H, 16)
    assert np.allclose(np.sort(cfm.eps), np.sort(mid.eps), atol=1e-7)


def test_fourier_cutoff_detected():
    p = ModelParams(g=0.5, n_ph=10, n_fourier=2, n_steps=64)
    ops = working_operators(p)
    H = dicke_hamiltonian(p, ops)
    prop = one_cycle_propagator(p, ops, H, 64)
    with pytest.raises(FourierCutoffError):
        floquet_basis(prop, p, H, 2)


def test_too_few_steps_rejected():
    p = ModelParams(g=0.5, n_ph=4)
    ops = working_operators(p)
    H = dicke_hamiltonian(p, ops)
    prop = one_cycle_propagator(p, ops, H, 16)
    with pytest.raises(ConfigError):
        floquet_basis(prop, p, H, 8)


def test_ambiguous_labels_strict():
    ops, H, system, _, basis = build(ModelParams(g=0.5, Omega=0.2, n_ph=15))
    labels = label_states(basis, system)
    assert labels.ambiguous
    with pytest.raises(AmbiguousLabelError):
        label_states(basis, system, strict=True)


def test_transition_table_matches_direct_sum(driven):
    ops, _, _, _, basis = driven
    table = transition_operators(basis, ops.X)
    F = basis.n_fourier
    phi = basis.phi_tilde
    rng = np.random.default_rng(0)
    for _ in range(20):
        n, k = rng.integers(len(basis), size=2)
        nu = int(rng.integers(-2 * F, 2 * F + 1))
        direct = 0j
        for i, mu in enumerate(basis.modes):
            j = mu - nu + F
            if 0 <= j <= 2 * F:
                direct += phi[n, j].conj() @ ops.X @ phi[k, i]
        assert table.elements[n, k, nu + 2 * F] == pytest.approx(direct, abs=1e-12)
    eps = basis.eps
    assert table.omega[2, 5, 2 * F + 1] == pytest.approx(eps[5] - eps[2] + 1.0)


def test_transition_table_hermiticity(driven):
    ops, _, _, _, basis = driven
    X = transition_operators(basis, ops.X).elements
    # X is Hermitian: X_{n,k,nu} = conj(X_{k,n,-nu})
    assert np.allclose(X, np.conj(np.transpose(X, (1, 0, 2))[:, :, ::-1]), atol=1e-12)


def test_sidebands_scale_quadratically():
    # weight outside the dominant Fourier mode of the ground state ~ kappa^2
    g = 0.5
    side = []
    for kappa in (0.02, 0.04):
        ops, H, system, _, basis = build(ModelParams(g=g, Omega=kappa * g, n_ph=10))
        labels = label_states(basis, system)
        n0 = int(np.flatnonzero(labels.eig_index == 0)[0])
        w = np.sum(np.abs(basis.phi_tilde[n0]) ** 2, axis=1)
        side.append(1 - w.max())
    assert side[1] / side[0] == pytest.approx(4, rel=0.05)
