import numpy as np
import pytest
from conftest import rand_channels, rand_density, rand_hermitian

from rkgrape.liouville import build_superoperator
from rkgrape.operators import (
    DissipationChannel,
    LindbladAction,
    annihilation,
    coherent_state,
    dag,
    expectation,
    fock_state,
    lindblad_adjoint_rhs,
    lindblad_rhs,
    number_operator,
    truncation_leak,
)


def test_annihilation_2x2():
    assert np.array_equal(annihilation(2), np.array([[0, 1], [0, 0]], dtype=complex))


def test_number_operator_spectrum():
    a = annihilation(3)
    assert np.allclose(np.diag(dag(a) @ a), [0, 1, 2])


def test_annihilation_rejects_small_dim():
    with pytest.raises(ValueError):
        annihilation(1)


def test_canonical_commutator_below_truncation_edge():
    a = annihilation(6)
    comm = a @ dag(a) - dag(a) @ a
    block = comm[:5, :5] - np.eye(5)
    assert np.max(np.abs(block)) < 1e-14


def test_rhs_trivial_zero():
    rho = rand_density(np.random.default_rng(0), 3)
    out = lindblad_rhs(rho, np.zeros((3, 3), dtype=complex), [])
    assert np.max(np.abs(out)) == 0.0


def test_rhs_single_photon_decay():
    kappa = 0.2
    a = annihilation(2)
    out = lindblad_rhs(fock_state(2, 1), np.zeros((2, 2)), [DissipationChannel(kappa, a)])
    expected = kappa * (fock_state(2, 0) - fock_state(2, 1))
    assert np.allclose(out, expected, atol=1e-14)


def test_rhs_matches_superoperator_oracle():
    rng = np.random.default_rng(11)
    d = 4
    H = rand_hermitian(rng, d)
    channels = rand_channels(rng, d)
    L = build_superoperator(H, channels)
    for _ in range(20):
        rho = rand_density(rng, d)
        direct = lindblad_rhs(rho, H, channels)
        assert np.max(np.abs(direct - L.apply(rho))) < 1e-12


def test_rhs_shape_mismatch():
    with pytest.raises(ValueError):
        lindblad_rhs(np.eye(3), np.eye(2), [])


def test_adjoint_is_unital():
    rng = np.random.default_rng(3)
    d = 5
    out = lindblad_adjoint_rhs(np.eye(d, dtype=complex), rand_hermitian(rng, d),
                               rand_channels(rng, d, 2))
    assert np.max(np.abs(out)) < 1e-13


def test_adjoint_vacuum_projector_pumps_up():
    kappa = 0.35
    a = annihilation(2)
    out = lindblad_adjoint_rhs(fock_state(2, 0), np.zeros((2, 2)), [DissipationChannel(kappa, a)])
    assert np.allclose(out, kappa * fock_state(2, 1), atol=1e-14)


def test_adjointness_identity():
    rng = np.random.default_rng(7)
    d = 4
    H = rand_hermitian(rng, d)
    channels = rand_channels(rng, d, 2)
    for _ in range(20):
        rho = rand_density(rng, d)
        lam = rand_hermitian(rng, d) + 0.3j * (rand_hermitian(rng, d) @ rand_hermitian(rng, d)
                                               - rand_hermitian(rng, d))
        lhs = np.trace(dag(lam) @ lindblad_rhs(rho, H, channels))
        rhs = np.trace(dag(lindblad_adjoint_rhs(lam, H, channels)) @ rho)
        assert abs(lhs - rhs) < 1e-12


def test_trace_annihilation_randomized():
    rng = np.random.default_rng(21)
    for _ in range(100):
        d = int(rng.integers(2, 9))
        out = lindblad_rhs(rand_density(rng, d), rand_hermitian(rng, d),
                           rand_channels(rng, d, int(rng.integers(1, 3))))
        assert abs(np.trace(out)) < 1e-12 * max(1.0, np.max(np.abs(out)))


def test_hermiticity_preservation():
    rng = np.random.default_rng(5)
    d = 6
    H = rand_hermitian(rng, d)
    channels = rand_channels(rng, d)
    rho = rand_density(rng, d)
    for op in (lindblad_rhs, lindblad_adjoint_rhs):
        out = op(rho, H, channels)
        assert np.max(np.abs(out - dag(out))) < 1e-12 * np.max(np.abs(out))


def test_adjoint_matches_superoperator_adjoint():
    rng = np.random.default_rng(13)
    for d in range(2, 9):
        H = rand_hermitian(rng, d)
        channels = rand_channels(rng, d)
        L = build_superoperator(H, channels).entries
        Ldag = build_superoperator(H, channels)
        Ldag.entries = L.conj().T
        lam = rand_hermitian(rng, d)
        direct = lindblad_adjoint_rhs(lam, H, channels)
        assert np.max(np.abs(direct - Ldag.apply(lam))) < 1e-12


def test_expectation_values():
    assert abs(expectation(np.eye(3, dtype=complex), rand_density(np.random.default_rng(1), 3)) - 1) < 1e-10
    d = 30
    num = number_operator(d)
    assert abs(expectation(num, fock_state(d, 0))) == 0.0
    rho = coherent_state(d, 1.2)
    assert abs(expectation(num, rho).real - 1.44) < 1e-6


def test_expectation_real_for_hermitian():
    rng = np.random.default_rng(9)
    val = expectation(rand_hermitian(rng, 5), rand_density(rng, 5))
    assert abs(val.imag) < 1e-10


def test_truncation_leak():
    rho = fock_state(5, 4)
    assert truncation_leak(rho) == 1.0
    assert truncation_leak(fock_state(5, 0)) == 0.0


def test_lindblad_action_matches_generic():
    rng = np.random.default_rng(17)
    d = 5
    H = rand_hermitian(rng, d)
    channels = rand_channels(rng, d, 2)
    action = LindbladAction(H, channels)
    rho = rand_density(rng, d)
    lam = rand_hermitian(rng, d)
    assert np.max(np.abs(action.forward(rho) - lindblad_rhs(rho, H, channels))) < 1e-13
    assert np.max(np.abs(action.adjoint(lam) - lindblad_adjoint_rhs(lam, H, channels))) < 1e-13
