"""Conventional Liouville-space propagation: superoperator + matrix exponential.

Serves two purposes: a correctness oracle for the direct matrix-form
generators at small dimension, and the baseline side of the d^3-vs-d^6
propagation cost comparison.

Vectorization convention: column stacking.  vec(X) stacks the columns of X,
so vec(A X B) = (B^T kron A) vec(X).
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from threadpoolctl import threadpool_limits

from .operators import DissipationChannel, annihilation, dag, trace_distance
from .propagation import IntegratorConfig, PiecewiseGenerator, propagate_forward


def vec(X) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(X).flatten(order="F")


def unvec(v) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((d, d), order="F")


@dataclass
class Superoperator:
    dim: int
    entries: np.ndarray  # (d^2, d^2) complex

    def apply(self, rho) -> np.ndarray:
        return unvec(self.entries @ vec(rho))


def build_superoperator(H, channels) -> Superoperator:
    """Matrix form of the Lindblad generator under column stacking.

    L = -i (I kron H - H^T kron I)
        + sum_j gamma_j [conj(a_j) kron a_j
                         - (1/2) I kron (a_j^dag a_j)
                         - (1/2) (a_j^dag a_j)^T kron I]
    """
    d = H.shape[0]
    if H.shape != (d, d):
        raise ValueError("Hamiltonian must be square")
    eye = np.eye(d)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for ch in channels:
        a = ch.collapse
        if a.shape != (d, d):
            raise ValueError("collapse operator dimension mismatch")
        ada = dag(a) @ a
        L += ch.rate * (
            np.kron(a.conj(), a)
            - 0.5 * np.kron(eye, ada)
            - 0.5 * np.kron(ada.T, eye)
        )
    return Superoperator(dim=d, entries=L)


def expm_propagator(L: Superoperator, dt: float) -> Superoperator:
    """exp(L dt) by scaling-and-squaring with the degree-13 Pade approximant."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    P = scipy.linalg.expm(L.entries * dt)
    if not np.all(np.isfinite(P)):
        norm = np.linalg.norm(L.entries * dt, 1)
        raise OverflowError(f"matrix exponential overflowed (1-norm of L*dt = {norm:.3e})")
    return Superoperator(dim=L.dim, entries=P)


def _driven_cavity_problem(d, n_pixels, pixel_dt=1.0):
    """Reference benchmark physics: a linearly driven, decaying cavity.

    The drive amplitude ramps across pixels so every pixel has a distinct
    generator (each one costs a fresh matrix exponential on the expm path).
    """
    a = annihilation(d)
    num = dag(a) @ a
    twopi = 2 * np.pi
    detuning = twopi * 0.5e-3  # rad/ns
    kappa = twopi * 1.1e-3
    drive_scale = twopi * 1.0e-3
    H0 = detuning * num
    HX = a + dag(a)
    channels = [DissipationChannel(rate=kappa, collapse=a)]
    amps = drive_scale * np.sin(np.linspace(0.0, np.pi, n_pixels))[:, None]
    gen = PiecewiseGenerator(
        drift=H0,
        control_ops=[HX],
        channels=channels,
        amplitudes=amps,
        subpixel_dt=pixel_dt,
    )
    # two input states, as in the branch-averaged reset objective
    rho_a = np.zeros((d, d), dtype=complex)
    rho_a[0, 0] = 1.0
    rho_b = np.zeros((d, d), dtype=complex)
    rho_b[0, 0] = 0.5
    rho_b[1, 1] = 0.5
    rho_b[0, 1] = rho_b[1, 0] = 0.4
    return gen, H0, HX, channels, [rho_a, rho_b]


def _propagate_expm(gen, H0, HX, channels, states, pixel_dt):
    L0 = build_superoperator(H0, channels).entries
    LX = build_superoperator(HX, []).entries
    vecs = [vec(r) for r in states]
    for amp in gen.amplitudes[:, 0]:
        P = scipy.linalg.expm((L0 + amp * LX) * pixel_dt)
        vecs = [P @ v for v in vecs]
    return [unvec(v) for v in vecs]


def _propagate_rk(gen, states, cfg):
    finals = []
    n_steps = 0
    for rho in states:
        traj = propagate_forward(rho, gen, cfg, store_states=False)
        finals.append(traj.final_state)
        n_steps += traj.rk_step_count
    return finals, n_steps


def benchmark_scaling(dims, n_pixels=100, repetitions=3, rk_config=None):
    """Wall-time comparison of expm-based and RK-based propagation.

    For each dimension the same driven-cavity schedule is propagated two
    ways: (a) build one matrix exponential per pixel and apply it to the
    vectorized states, (b) Runge-Kutta integrate the states directly.  Runs
    single-threaded so timings reflect algorithmic scaling.  Returns a dict
    with per-dimension rows and fitted log-log slopes.
    """
    if list(dims) != sorted(dims):
        raise ValueError("dims must be sorted ascending")
    cfg = rk_config or IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    pixel_dt = 1.0
    rows = []
    with threadpool_limits(limits=1):
        for d in dims:
            gen, H0, HX, channels, states = _driven_cavity_problem(d, n_pixels, pixel_dt)
            # short warm-up (2 pixels) keeps allocation and library setup out
            # of the timed passes without re-running the full schedule
            warm_gen, *_ , warm_states = _driven_cavity_problem(d, 2, pixel_dt)
            _propagate_expm(warm_gen, H0, HX, channels, warm_states, pixel_dt)
            _propagate_rk(warm_gen, warm_states, cfg)

            t_expm = []
            t_rk = []
            finals_expm = finals_rk = None
            n_rk = 0
            for _ in range(repetitions):
                t0 = time.perf_counter()
                finals_expm = _propagate_expm(gen, H0, HX, channels, states, pixel_dt)
                t_expm.append(time.perf_counter() - t0)
                t0 = time.perf_counter()
                finals_rk, n_rk = _propagate_rk(gen, states, cfg)
                t_rk.append(time.perf_counter() - t0)
            dist = max(
                trace_distance(fe, fr) for fe, fr in zip(finals_expm, finals_rk)
            )
            rows.append(
                {
                    "d": d,
                    "t_expm_ms": 1e3 * float(np.median(t_expm)),
                    "t_rk_ms": 1e3 * float(np.median(t_rk)),
                    "n_rk": int(n_rk),
                    "trace_dist": float(dist),
                }
            )
    logd = np.log([r["d"] for r in rows])
    slope_expm = float(np.polyfit(logd, np.log([r["t_expm_ms"] for r in rows]), 1)[0])
    slope_rk = float(np.polyfit(logd, np.log([r["t_rk_ms"] for r in rows]), 1)[0])
    return {"rows": rows, "slope_expm": slope_expm, "slope_rk": slope_rk}
