"""Stepwise Runge-Kutta propagation of the master equation.

Time evolution under a piecewise-constant generator is integrated one
subpixel at a time: the state reached at a subpixel boundary is cached and
becomes the initial condition of the next subpixel.  The backward costate
sweep integrates the adjoint generator in reversed time, optionally adding a
fixed source matrix to the costate at every boundary (used by the
photon-number penalty recursion).

The integrators act on d x d complex matrices directly; the per-evaluation
cost is a handful of dense matrix products.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, IntegrationError
from .operators import DissipationChannel, dag, hermitize

# Fehlberg embedded 4(5) tableau.  The error estimate is the difference of
# the 4th- and 5th-order solutions; the 5th-order solution is advanced.
_RKF_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_RKF_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_RKF_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_RKF_ERR = _RKF_B5 - _RKF_B4
_STAGES = 6

_MAX_GROW = 5.0
_MIN_SHRINK = 0.1
_SAFETY = 0.9


@dataclass
class PiecewiseGenerator:
    """Lindblad generator that is constant on each subpixel.

    The Hamiltonian on subpixel n is drift + sum_k amplitudes[n, k] *
    control_ops[k]; the dissipation channels are time-independent.
    """

    drift: np.ndarray
    control_ops: list
    channels: list
    amplitudes: np.ndarray  # (M, R), rad/ns
    subpixel_dt: float

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.amplitudes.ndim == 1:
            self.amplitudes = self.amplitudes[:, None]
        if self.amplitudes.shape[1] != len(self.control_ops):
            raise ValueError(
                f"amplitude columns ({self.amplitudes.shape[1]}) != "
                f"control operators ({len(self.control_ops)})"
            )
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValueError("control amplitudes must be finite")
        if self.subpixel_dt <= 0:
            raise ValueError("subpixel_dt must be positive")
        dims = {op.shape[0] for op in [self.drift, *self.control_ops]}
        dims |= {ch.collapse.shape[0] for ch in self.channels}
        if len(dims) != 1:
            raise ValueError(f"operator dimensions disagree: {sorted(dims)}")

    @property
    def n_subpixels(self):
        return self.amplitudes.shape[0]

    @property
    def dim(self):
        return self.drift.shape[0]


@dataclass
class IntegratorConfig:
    method: str = "rkf45"  # "rkf45" (adaptive embedded 4(5)) or "rk4" (fixed step)
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps_per_subpixel: int = 10_000
    rehermitize_every: int = 10  # snapshots between (X + X^dag)/2 projections
    fixed_substeps: int = 10  # RK4 steps per subpixel when method == "rk4"

    def __post_init__(self):
        if self.method not in ("rkf45", "rk4"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("integrator tolerances must be positive")


@dataclass
class Trajectory:
    """Snapshots at subpixel boundaries plus step-count accounting.

    states[n] is the state at t = n * subpixel_dt for both directions; the
    supplied initial condition sits at index 0 (forward) or M (backward).
    """

    states: np.ndarray | None
    rk_step_count: int
    direction: str
    rejected_steps: int = 0
    observable_series: np.ndarray | None = None
    subpixel_dt: float = 0.0

    @property
    def final_state(self):
        idx = -1 if self.direction == "forward" else 0
        return self.states[idx]


def rk_step_budget(traj: Trajectory) -> int:
    """Accepted Runge-Kutta steps accumulated over the trajectory."""
    return traj.rk_step_count


def trajectory_memory_bytes(n_subpixels: int, dim: int) -> int:
    """Memory held by one full-snapshot trajectory: (M+1) d^2 complex entries."""
    return (n_subpixels + 1) * dim * dim * 16


class CompiledGenerator:
    """Per-direction precompilation of a PiecewiseGenerator.

    For the forward generator, the constant part is G0 = -i H0 - (1/2)
    sum_j gamma_j a_j^dag a_j and each control contributes -i s_k H_k; the
    right-hand side on a Hermitian operand is G y + (G y)^dag + sum b y b^dag.
    The adjoint direction flips the Hamiltonian sign and conjugates the jump
    sandwich.
    """

    def __init__(self, gen: PiecewiseGenerator, adjoint: bool):
        sign = 1j if adjoint else -1j
        damp = np.zeros_like(gen.drift)
        for ch in gen.channels:
            damp += 0.5 * ch.rate * (dag(ch.collapse) @ ch.collapse)
        self.base = sign * gen.drift - damp
        self.ctrl = [sign * op for op in gen.control_ops]
        if adjoint:
            self.jump_left = [np.sqrt(ch.rate) * dag(ch.collapse) for ch in gen.channels]
        else:
            self.jump_left = [np.sqrt(ch.rate) * ch.collapse for ch in gen.channels]
        self.jump_right = [dag(b) for b in self.jump_left]
        self.amplitudes = gen.amplitudes
        self.dt = gen.subpixel_dt
        self.dim = gen.drift.shape[0]

    def effective_drift(self, n: int) -> np.ndarray:
        """Constant generator matrix G for subpixel n (0-based row index)."""
        G = self.base.copy()
        for k, op in enumerate(self.ctrl):
            s = self.amplitudes[n, k]
            if s != 0.0:
                G += s * op
        return G

    def rhs(self, G, y):
        out = G @ y
        out += dag(out)
        for bl, br in zip(self.jump_left, self.jump_right):
            out += bl @ y @ br
        return out


def _advance_subpixel(y, G, compiled, cfg, subpixel_index):
    """Integrate one subpixel of duration compiled.dt under constant G.

    Returns (state, accepted_steps, rejected_steps).
    """
    dt = compiled.dt
    rhs = compiled.rhs
    if cfg.method == "rk4":
        n = cfg.fixed_substeps
        h = dt / n
        for _ in range(n):
            k1 = rhs(G, y)
            k2 = rhs(G, y + (0.5 * h) * k1)
            k3 = rhs(G, y + (0.5 * h) * k2)
            k4 = rhs(G, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        return y, n, 0

    K = np.empty((_STAGES, y.shape[0], y.shape[1]), dtype=complex)
    t = 0.0
    h = dt  # per-subpixel step reset: each subpixel starts with one full-width trial
    accepted = 0
    rejected = 0
    attempts = 0
    while t < dt - 1e-15 * dt:
        h = min(h, dt - t)
        attempts += 1
        if attempts > cfg.max_steps_per_subpixel:
            raise IntegrationError(
                f"step budget ({cfg.max_steps_per_subpixel}) exhausted in subpixel "
                f"{subpixel_index}",
                subpixel=subpixel_index,
            )
        K[0] = rhs(G, y)
        for i in range(1, _STAGES):
            yi = y + h * np.tensordot(_RKF_A[i], K[:i], axes=1)
            K[i] = rhs(G, yi)
        y_new = y + h * np.tensordot(_RKF_B5, K, axes=1)
        err = h * np.tensordot(_RKF_ERR, K, axes=1)
        weight = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        ratio = float(np.max(np.abs(err) / weight))
        if not np.isfinite(ratio):
            rejected += 1
            h *= _MIN_SHRINK
            continue
        if ratio <= 1.0:
            y = y_new
            t += h
            accepted += 1
            factor = _MAX_GROW if ratio == 0.0 else min(_MAX_GROW, _SAFETY * ratio ** -0.2)
            h = min(dt, h * max(factor, _MIN_SHRINK))
        else:
            rejected += 1
            h *= max(_MIN_SHRINK, _SAFETY * ratio ** -0.2)
    return y, accepted, rejected


def _check_finite(y, subpixel_index):
    if not np.all(np.isfinite(y)):
        raise DivergenceError(
            f"state became non-finite after subpixel {subpixel_index}",
            subpixel=subpixel_index,
        )


def propagate_forward(initial, gen, cfg=None, store_states=True, observable=None):
    """Propagate `initial` through all subpixels of `gen`, caching boundaries.

    states[n] approximates rho at t = n * subpixel_dt; snapshot n seeds
    subpixel n+1.  With `observable` set, Re Tr(obs rho) is recorded at every
    boundary in Trajectory.observable_series.
    """
    cfg = cfg or IntegratorConfig()
    tr = complex(np.trace(initial)).real
    if abs(tr - 1.0) > 1e-6:
        raise ValueError(f"initial state trace {tr} is not 1 within 1e-6")
    if initial.shape != (gen.dim, gen.dim):
        raise ValueError(f"state shape {initial.shape} != generator dim {gen.dim}")

    compiled = CompiledGenerator(gen, adjoint=False)
    M = gen.n_subpixels
    y = initial.astype(complex).copy()
    states = np.empty((M + 1, gen.dim, gen.dim), dtype=complex) if store_states else None
    series = np.empty(M + 1) if observable is not None else None
    if store_states:
        states[0] = initial  # bit-for-bit copy of the supplied initial condition
    if observable is not None:
        series[0] = np.einsum("ij,ji->", observable, y).real

    steps = 0
    rejected = 0
    for n in range(1, M + 1):
        G = compiled.effective_drift(n - 1)
        y, acc, rej = _advance_subpixel(y, G, compiled, cfg, n)
        steps += acc
        rejected += rej
        _check_finite(y, n)
        if cfg.rehermitize_every and n % cfg.rehermitize_every == 0:
            y = hermitize(y)
        if store_states:
            states[n] = y
        if observable is not None:
            series[n] = np.einsum("ij,ji->", observable, y).real
    return Trajectory(
        states=states,
        rk_step_count=steps,
        direction="forward",
        rejected_steps=rejected,
        observable_series=series,
        subpixel_dt=gen.subpixel_dt,
    )


def propagate_backward(target, gen, cfg=None, store_states=True, boundary_source=None):
    """Costate sweep: states[M] = target, states[n-1] = Ldag_n applied over one
    subpixel, visiting the generators in reverse order.

    The costate lam(t) solves d lam/dt = -Ldag lam terminal-valued at T, i.e.
    integrating the adjoint generator forward in the reversed time variable;
    this keeps Tr(lam(t) rho(t)) constant under a matched forward evolution.
    With `boundary_source` set, the matrix is added to the costate at t = T
    and again after every completed subpixel (photon-penalty recursion).
    """
    cfg = cfg or IntegratorConfig()
    scale = np.max(np.abs(target))
    if scale > 0 and np.max(np.abs(target - dag(target))) > 1e-10 * scale:
        raise ValueError("backward target must be Hermitian within 1e-10 (relative)")
    if target.shape != (gen.dim, gen.dim):
        raise ValueError(f"target shape {target.shape} != generator dim {gen.dim}")

    compiled = CompiledGenerator(gen, adjoint=True)
    M = gen.n_subpixels
    y = target.astype(complex).copy()
    if boundary_source is not None:
        y = y + boundary_source
    states = np.empty((M + 1, gen.dim, gen.dim), dtype=complex) if store_states else None
    if store_states:
        states[M] = target  # the supplied target, bit-for-bit
        if boundary_source is not None:
            states[M] = y

    steps = 0
    rejected = 0
    snapshots = 0
    for n in range(M, 0, -1):
        G = compiled.effective_drift(n - 1)
        y, acc, rej = _advance_subpixel(y, G, compiled, cfg, n)
        steps += acc
        rejected += rej
        _check_finite(y, n)
        if boundary_source is not None:
            y = y + boundary_source
        snapshots += 1
        if cfg.rehermitize_every and snapshots % cfg.rehermitize_every == 0:
            y = hermitize(y)
        if store_states:
            states[n - 1] = y
    return Trajectory(
        states=states,
        rk_step_count=steps,
        direction="backward",
        rejected_steps=rejected,
        subpixel_dt=gen.subpixel_dt,
    )


def constant_generator(H, channels, duration, n_subpixels=1):
    """PiecewiseGenerator for a time-independent Hamiltonian."""
    return PiecewiseGenerator(
        drift=H,
        control_ops=[],
        channels=list(channels),
        amplitudes=np.zeros((n_subpixels, 0)),
        subpixel_dt=duration / n_subpixels,
    )
