import numpy as np
import pytest
from conftest import rand_channels, rand_density, rand_hermitian

from rkgrape.liouville import (
    Superoperator,
    build_superoperator,
    expm_propagator,
    unvec,
    vec,
)
from rkgrape.operators import DissipationChannel, annihilation, fock_state, lindblad_rhs


def test_vec_column_stacking():
    X = np.array([[1, 2], [3, 4]], dtype=complex)
    assert np.array_equal(vec(X), np.array([1, 3, 2, 4], dtype=complex))
    assert np.array_equal(unvec(vec(X)), X)


def test_vec_kron_identity():
    # vec(A X B) = (B^T kron A) vec(X), the convention everything here rests on
    rng = np.random.default_rng(2)
    A, X, B = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(np.kron(B.T, A) @ vec(X), vec(A @ X @ B))


def test_zero_generator():
    L = build_superoperator(np.zeros((3, 3), dtype=complex), [])
    assert np.max(np.abs(L.entries)) == 0.0


def test_superoperator_matches_direct_generator():
    rng = np.random.default_rng(4)
    d = 4
    H = rand_hermitian(rng, d)
    channels = rand_channels(rng, d, 2)
    L = build_superoperator(H, channels)
    for _ in range(50):
        rho = rand_density(rng, d)
        assert np.max(np.abs(L.apply(rho) - lindblad_rhs(rho, H, channels))) < 1e-12


def test_trace_preservation_left_null_vector():
    rng = np.random.default_rng(6)
    d = 5
    L = build_superoperator(rand_hermitian(rng, d), rand_channels(rng, d, 2))
    left = vec(np.eye(d)).conj() @ L.entries
    assert np.max(np.abs(left)) < 1e-12


def test_amplitude_damping_spectrum():
    kappa = 0.7
    L = build_superoperator(np.zeros((2, 2), dtype=complex),
                            [DissipationChannel(kappa, annihilation(2))])
    eig = np.sort_complex(np.linalg.eigvals(L.entries))
    expected = np.sort_complex(np.array([0, -kappa, -kappa / 2, -kappa / 2]))
    assert np.max(np.abs(eig - expected)) < 1e-10


def test_expm_zero_time_is_identity():
    rng = np.random.default_rng(8)
    L = build_superoperator(rand_hermitian(rng, 3), rand_channels(rng, 3))
    P = expm_propagator(L, 0.0)
    assert np.max(np.abs(P.entries - np.eye(9))) == 0.0


def test_expm_diagonal_generator():
    diag = np.array([-0.5, -0.1, 0.0, -0.9])
    L = Superoperator(dim=2, entries=np.diag(diag).astype(complex))
    P = expm_propagator(L, 2.0)
    assert np.max(np.abs(np.diag(P.entries) - np.exp(2.0 * diag))) < 1e-14


def test_expm_decay_closed_form():
    kappa = 0.31
    t = 3.7
    L = build_superoperator(np.zeros((2, 2), dtype=complex),
                            [DissipationChannel(kappa, annihilation(2))])
    P = expm_propagator(L, t)
    rho_t = P.apply(fock_state(2, 1))
    assert abs(rho_t[1, 1].real - np.exp(-kappa * t)) < 1e-12


def test_expm_rejects_negative_time():
    L = Superoperator(dim=2, entries=np.zeros((4, 4), dtype=complex))
    with pytest.raises(ValueError):
        expm_propagator(L, -1.0)


def test_expm_preserves_trace():
    rng = np.random.default_rng(10)
    d = 4
    L = build_superoperator(rand_hermitian(rng, d), rand_channels(rng, d, 2))
    P = expm_propagator(L, 1.5)
    rho = rand_density(rng, d)
    assert abs(np.trace(P.apply(rho)).real - 1.0) < 1e-10
