"""Dense complex operator algebra and the Lindblad generator.

Operators and density matrices are plain complex128 numpy arrays of shape
(d, d).  The Lindblad generator and its adjoint act directly on matrices;
no d^2 x d^2 superoperator is ever formed here (see `liouville` for the
conventional representation used as an oracle).

Internal units: time in ns, angular frequencies in rad/ns.
"""

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class DissipationChannel:
    """A Lindblad damping channel: rate (rad/ns) and collapse operator."""

    rate: float
    collapse: np.ndarray

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"dissipation rate must be >= 0, got {self.rate}")


def annihilation(dim: int) -> np.ndarray:
    """Fock-space lowering operator: <n-1|a|n> = sqrt(n)."""
    if dim < 2:
        raise ValueError(f"annihilation operator needs dim >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def number_operator(dim: int) -> np.ndarray:
    """Photon-number operator a^dag a, diagonal 0..dim-1."""
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def coherent_state(dim: int, alpha: complex) -> np.ndarray:
    """Density matrix of a truncated coherent state |alpha><alpha|."""
    vec = np.zeros(dim, dtype=complex)
    vec[0] = 1.0
    for k in range(1, dim):
        vec[k] = vec[k - 1] * alpha / np.sqrt(k)
    vec *= np.exp(-abs(alpha) ** 2 / 2)
    rho = np.outer(vec, vec.conj())
    return rho / np.trace(rho).real


def fock_state(dim: int, n: int) -> np.ndarray:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1.0
    return rho


def dag(op: np.ndarray) -> np.ndarray:
    return op.conj().T


def _check_same_dim(*ops):
    dims = {op.shape for op in ops}
    if len(dims) != 1 or any(s[0] != s[1] for s in dims):
        raise ValueError(f"operator shapes disagree: {sorted(dims)}")


def lindblad_rhs(state, H, channels) -> np.ndarray:
    """Right-hand side of the master equation applied to `state`.

    Returns -i[H, rho] + sum_j gamma_j (a_j rho a_j^dag - {a_j^dag a_j, rho}/2).
    """
    _check_same_dim(state, H, *(ch.collapse for ch in channels))
    out = -1j * (H @ state - state @ H)
    for ch in channels:
        a = ch.collapse
        ada = dag(a) @ a
        out += ch.rate * (a @ state @ dag(a) - 0.5 * (ada @ state + state @ ada))
    return out


def lindblad_adjoint_rhs(costate, H, channels) -> np.ndarray:
    """Adjoint generator under the Hilbert-Schmidt inner product Tr(A^dag B).

    Returns +i[H, lam] + sum_j gamma_j (a_j^dag lam a_j - {a_j^dag a_j, lam}/2).
    """
    _check_same_dim(costate, H, *(ch.collapse for ch in channels))
    out = 1j * (H @ costate - costate @ H)
    for ch in channels:
        a = ch.collapse
        ada = dag(a) @ a
        out += ch.rate * (dag(a) @ costate @ a - 0.5 * (ada @ costate + costate @ ada))
    return out


def expectation(obs, state) -> complex:
    """Tr(obs @ state), evaluated without forming the product matrix."""
    _check_same_dim(obs, state)
    return complex(np.einsum("ij,ji->", obs, state))


def is_hermitian(op, tol=HERMITIAN_TOL) -> bool:
    scale = np.max(np.abs(op))
    if scale == 0.0:
        return True
    return np.max(np.abs(op - dag(op))) <= tol * scale


def hermitize(op) -> np.ndarray:
    """Project onto the Hermitian part, (X + X^dag)/2."""
    return 0.5 * (op + dag(op))


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of rho - sigma."""
    return 0.5 * float(np.sum(np.linalg.svd(rho - sigma, compute_uv=False)))


def truncation_leak(state) -> float:
    """Population of the top two Fock levels; flags a too-small Hilbert space."""
    d = state.shape[0]
    return float(state[d - 2, d - 2].real + state[d - 1, d - 1].real)


class LindbladAction:
    """Precompiled Lindblad generator for the propagation hot path.

    Exploits Hermiticity of the operand: for Hermitian rho,
    (G rho)^dag = rho G^dag with G = -iH - (1/2) sum_j gamma_j a_j^dag a_j,
    so the full right-hand side is G rho + (G rho)^dag + sum_j b_j rho b_j^dag
    with b_j = sqrt(gamma_j) a_j.  Three matrix products per evaluation
    instead of six.  Results are exactly Hermitian by construction; callers
    must only feed Hermitian operands (density matrices and costates are).
    """

    def __init__(self, H, channels):
        _check_same_dim(H, *(ch.collapse for ch in channels))
        self.dim = H.shape[0]
        damp = np.zeros_like(H)
        for ch in channels:
            damp += 0.5 * ch.rate * (dag(ch.collapse) @ ch.collapse)
        # G for the forward generator; its dagger drives the adjoint.
        self.G = -1j * H - damp
        self.Gdag = dag(self.G)
        self.jump = [np.sqrt(ch.rate) * ch.collapse for ch in channels]
        self.jump_dag = [dag(b) for b in self.jump]

    def forward(self, rho) -> np.ndarray:
        out = self.G @ rho
        out += dag(out)
        for b, bd in zip(self.jump, self.jump_dag):
            out += b @ rho @ bd
        return out

    def adjoint(self, lam) -> np.ndarray:
        out = self.Gdag @ lam
        out += dag(out)
        for b, bd in zip(self.jump, self.jump_dag):
            out += bd @ lam @ b
        return out
