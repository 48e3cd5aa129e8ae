"""Shared random-instance builders for the test suite."""

import numpy as np

from rkgrape.operators import DissipationChannel


def rand_hermitian(rng, d, scale=0.3):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (X + X.conj().T) / 2


def rand_density(rng, d):
    """Random full-rank density matrix (PSD, unit trace)."""
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def rand_pure_density(rng, d):
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def rand_channels(rng, d, n_channels=1, rate_range=(0.05, 0.3)):
    channels = []
    for _ in range(n_channels):
        A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rate = rng.uniform(*rate_range)
        channels.append(DissipationChannel(rate=rate, collapse=A / np.linalg.norm(A)))
    return channels
