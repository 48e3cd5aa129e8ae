"""Performance index, analytic gradient, and the pulse optimization loop.

The objective is the weighted overlap of forward-propagated states with a
target (or an operator expectation), optionally reduced by a photon-number
penalty.  Its gradient with respect to the filtered subpixel amplitudes is
assembled from one forward sweep per input state plus one backward costate
sweep; the penalty contributes through the same backward pass by adding the
penalty observable to the costate at every subpixel boundary, so the cost of
a penalized gradient stays at one forward and one (modified) backward
integration per state.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import bfgs
from .errors import DivergenceError, IntegrationError
from .filters import ControlGrid, TransferMatrix, apply_filter, backprop_gradient
from .propagation import (
    CompiledGenerator,
    IntegratorConfig,
    PiecewiseGenerator,
    Trajectory,
    _advance_subpixel,
    propagate_forward,
)

GRADIENT_IMAG_WARN = 1e-8


@dataclass
class WeightedState:
    """One propagated branch: initial state, objective weight, its drift."""

    state: np.ndarray
    weight: float
    drift: np.ndarray

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("state weights must be positive")


@dataclass
class OptimizationProblem:
    """Everything a gradient evaluation needs besides the pixel controls.

    Exactly one of `target` (state-overlap objective, bounded [0, 1] for a
    pure target) or `observable` (operator-expectation objective) is set.
    Reported objective terms are normalized by the total state weight, so a
    perfect reset scores 1 regardless of how many branches are averaged.
    """

    states: list
    control_ops: list
    channels: list
    transfer: TransferMatrix
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    target: np.ndarray | None = None
    observable: np.ndarray | None = None
    penalty_observable: np.ndarray | None = None
    penalty_weight: float = 0.0  # beta; 0 disables the penalty entirely
    stream_gradients: bool = False  # assemble during the backward sweep, no costate snapshots

    def __post_init__(self):
        if (self.target is None) == (self.observable is None):
            raise ValueError("set exactly one of target / observable")
        if not self.states:
            raise ValueError("need at least one input state")
        if self.penalty_weight != 0.0 and self.penalty_observable is None:
            raise ValueError("penalty_weight set without a penalty observable")

    @property
    def objective_op(self):
        return self.target if self.target is not None else self.observable

    @property
    def total_weight(self):
        return sum(ws.weight for ws in self.states)

    def generator_for(self, ws: WeightedState, amplitudes) -> PiecewiseGenerator:
        return PiecewiseGenerator(
            drift=ws.drift,
            control_ops=self.control_ops,
            channels=self.channels,
            amplitudes=amplitudes,
            subpixel_dt=self.transfer.subpixel_dt,
        )


@dataclass
class GradientResult:
    objective: float  # overlap - beta * penalty (weight-normalized)
    overlap: float
    penalty: float
    pixel_gradient: np.ndarray  # (N, R), pinned entries zeroed
    subpixel_gradient: np.ndarray  # (M, R)
    rk_steps: int
    imag_residual: float = 0.0


def _overlap_and_penalty(problem, traj: Trajectory):
    overlap = np.einsum("ij,ji->", problem.objective_op, traj.final_state).real
    penalty = 0.0
    if traj.observable_series is not None:
        penalty = traj.subpixel_dt * float(np.sum(traj.observable_series))
    return overlap, penalty


def _forward(problem, ws, amplitudes, store_states, index):
    gen = problem.generator_for(ws, amplitudes)
    obs = problem.penalty_observable if problem.penalty_weight != 0.0 else None
    try:
        return propagate_forward(
            ws.state, gen, problem.integrator, store_states=store_states, observable=obs
        )
    except (IntegrationError, DivergenceError) as exc:
        raise type(exc)(f"input state {index}: {exc}", subpixel=exc.subpixel) from exc


def evaluate_objective(problem: OptimizationProblem, controls: ControlGrid) -> float:
    """Filter the controls, propagate every input state, score the result."""
    sub = apply_filter(problem.transfer, controls)
    total_w = problem.total_weight
    overlap = 0.0
    penalty = 0.0
    for i, ws in enumerate(problem.states):
        traj = _forward(problem, ws, sub.values, store_states=False, index=i)
        o, p = _overlap_and_penalty(problem, traj)
        overlap += ws.weight * o
        penalty += ws.weight * p
    return (overlap - problem.penalty_weight * penalty) / total_w


def photon_penalty(trajectories, observable) -> float:
    """Discretized time integral of Tr(obs rho) summed over trajectories.

    Uses the subpixel sum over all M+1 cached boundaries of each forward
    trajectory (the n = 0 term is control-independent but belongs to the
    discretized integral).
    """
    total = 0.0
    for traj in trajectories:
        vals = np.einsum("ij,nji->n", observable, traj.states).real
        total += traj.subpixel_dt * float(np.sum(vals))
    return total


def _assemble_gradient(problem, ws, fwd: Trajectory, amplitudes):
    """Backward costate sweep with in-loop gradient assembly for one state.

    Returns (subpixel gradient of overlap - beta * penalty for this state,
    accepted backward steps, max imaginary residual).  The costate starts
    from the objective operator; with an active penalty, -beta * dt * obs is
    added at t = T and after every completed subpixel, which realizes the
    penalty's recursive ladder inside the single backward pass.
    """
    gen = problem.generator_for(ws, amplitudes)
    compiled = CompiledGenerator(gen, adjoint=True)
    cfg = problem.integrator
    dt = gen.subpixel_dt
    M = gen.n_subpixels
    R = len(problem.control_ops)

    source = None
    if problem.penalty_weight != 0.0:
        source = (-problem.penalty_weight * dt) * problem.penalty_observable

    lam = problem.objective_op.astype(complex).copy()
    if source is not None:
        lam = lam + source

    gsub = np.empty((M, R))
    scaled_ctrl = [(-1j * dt) * op for op in problem.control_ops]
    max_imag = 0.0
    steps = 0
    snapshots = 0
    states = fwd.states
    for n in range(M, 0, -1):
        rho_prev = states[n - 1]
        comm = rho_prev @ lam
        comm -= lam @ rho_prev
        for k in range(R):
            val = np.einsum("ij,ji->", scaled_ctrl[k], comm)
            gsub[n - 1, k] = val.real
            if abs(val.imag) > max_imag:
                max_imag = abs(val.imag)
        G = compiled.effective_drift(n - 1)
        lam, acc, _ = _advance_subpixel(lam, G, compiled, cfg, n)
        steps += acc
        if source is not None:
            lam = lam + source
        snapshots += 1
        if cfg.rehermitize_every and snapshots % cfg.rehermitize_every == 0:
            lam = 0.5 * (lam + lam.conj().T)
    return gsub, steps, max_imag


def _assemble_from_stored(problem, ws, fwd: Trajectory, amplitudes):
    """Stored-costate variant: full backward trajectory first, then pairing.

    Same arithmetic as the streaming assembly, but the costate snapshots are
    materialized (doubles peak memory, matching the reference bookkeeping).
    """
    from .propagation import propagate_backward

    gen = problem.generator_for(ws, amplitudes)
    dt = gen.subpixel_dt
    M = gen.n_subpixels
    R = len(problem.control_ops)
    source = None
    if problem.penalty_weight != 0.0:
        source = (-problem.penalty_weight * dt) * problem.penalty_observable
    bwd = propagate_backward(
        problem.objective_op, gen, problem.integrator, store_states=True,
        boundary_source=source,
    )
    gsub = np.empty((M, R))
    scaled_ctrl = [(-1j * dt) * op for op in problem.control_ops]
    max_imag = 0.0
    for n in range(M, 0, -1):
        rho_prev = fwd.states[n - 1]
        lam = bwd.states[n]
        comm = rho_prev @ lam
        comm -= lam @ rho_prev
        for k in range(R):
            val = np.einsum("ij,ji->", scaled_ctrl[k], comm)
            gsub[n - 1, k] = val.real
            if abs(val.imag) > max_imag:
                max_imag = abs(val.imag)
    return gsub, bwd.rk_step_count, max_imag


def compute_gradient(problem: OptimizationProblem, controls: ControlGrid) -> GradientResult:
    """Objective value and its gradient at pixel and subpixel resolution.

    Per input state: one forward pass caching every boundary state, one
    backward costate pass.  The subpixel entry pairs the costate at boundary
    n with the forward state at boundary n-1 through the control commutator;
    the imaginary part of the trace (zero in exact arithmetic for Hermitian
    operands) is monitored as a health check.
    """
    sub = apply_filter(problem.transfer, controls)
    M, R = sub.values.shape
    total_w = problem.total_weight
    assemble = _assemble_gradient if problem.stream_gradients else _assemble_from_stored

    overlap = 0.0
    penalty = 0.0
    gsub = np.zeros((M, R))
    rk_steps = 0
    max_imag = 0.0
    for i, ws in enumerate(problem.states):
        fwd = _forward(problem, ws, sub.values, store_states=True, index=i)
        rk_steps += fwd.rk_step_count
        o, p = _overlap_and_penalty(problem, fwd)
        overlap += ws.weight * o
        penalty += ws.weight * p
        g_i, back_steps, imag_i = assemble(problem, ws, fwd, sub.values)
        rk_steps += back_steps
        gsub += (ws.weight / total_w) * g_i
        max_imag = max(max_imag, imag_i)

    if max_imag > GRADIENT_IMAG_WARN:
        warnings.warn(
            f"gradient trace has imaginary residual {max_imag:.2e}; "
            "inputs may not be Hermitian",
            RuntimeWarning,
            stacklevel=2,
        )
    overlap /= total_w
    penalty /= total_w
    pixel_grad = backprop_gradient(problem.transfer, gsub, pinned=controls.pinned)
    return GradientResult(
        objective=overlap - problem.penalty_weight * penalty,
        overlap=overlap,
        penalty=penalty,
        pixel_gradient=pixel_grad,
        subpixel_gradient=gsub,
        rk_steps=rk_steps,
        imag_residual=max_imag,
    )


def photon_penalty_gradient(problem: OptimizationProblem, controls: ControlGrid) -> np.ndarray:
    """Subpixel gradient of the raw (unweighted) photon-number penalty.

    Runs the penalty ladder on its own: the costate starts from dt * obs at
    t = T and gains another dt * obs after each backward subpixel, which is
    the recursive accumulation of backward evolutions started at every
    boundary.  Cost: one extra backward pass per state.
    """
    if problem.penalty_observable is None:
        raise ValueError("problem has no penalty observable")
    sub = apply_filter(problem.transfer, controls)
    M, R = sub.values.shape
    if M == 0:
        return np.zeros((0, R))
    obs = problem.penalty_observable
    dt = problem.transfer.subpixel_dt

    gsub = np.zeros((M, R))
    scaled_ctrl = [(-1j * dt) * op for op in problem.control_ops]
    for i, ws in enumerate(problem.states):
        gen = problem.generator_for(ws, sub.values)
        fwd = _forward(problem, ws, sub.values, store_states=True, index=i)
        compiled = CompiledGenerator(gen, adjoint=True)
        ladder = dt * obs.astype(complex)
        for n in range(M, 0, -1):
            rho_prev = fwd.states[n - 1]
            comm = rho_prev @ ladder - ladder @ rho_prev
            for k in range(R):
                gsub[n - 1, k] += np.einsum("ij,ji->", scaled_ctrl[k], comm).real
            G = compiled.effective_drift(n - 1)
            ladder, _, _ = _advance_subpixel(ladder, G, compiled, problem.integrator, n)
            ladder = ladder + dt * obs
    return gsub


def pack_free(controls: ControlGrid) -> np.ndarray:
    return controls.values[controls.free_mask()]


def unpack_free(controls: ControlGrid, x) -> ControlGrid:
    values = controls.values.copy()
    values[controls.free_mask()] = x
    return controls.replace_values(values)


def optimize(problem: OptimizationProblem, initial_controls: ControlGrid,
             optimizer_cfg: bfgs.OptimizerConfig | None = None, seed=None):
    """BFGS ascent over the unpinned pixel controls.

    Returns (best ControlGrid, OptimizerState).  A line-search failure flags
    the state as stalled and returns the best iterate instead of raising.
    """
    opt_cfg = optimizer_cfg or bfgs.OptimizerConfig()

    def value_and_grad(x):
        grid = unpack_free(initial_controls, x)
        res = compute_gradient(problem, grid)
        info = {
            "overlap": res.overlap,
            "penalty": res.penalty,
            "rk_steps": res.rk_steps,
        }
        return res.objective, res.pixel_gradient[initial_controls.free_mask()], info

    x0 = pack_free(initial_controls)
    x_best, state = bfgs.maximize(value_and_grad, x0, opt_cfg, seed=seed)
    return unpack_free(initial_controls, x_best), state
