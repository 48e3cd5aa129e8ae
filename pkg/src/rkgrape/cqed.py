"""Dispersive-cavity reset: model, calibration, scenarios, and sweeps.

A readout resonator with a qubit-state-dependent frequency shift (+/- chi)
and a weak Kerr correction is driven through one or two quadratures to
empty measurement photons as fast as possible.  The rotating frame sits at
the drive frequency; with zero frame detuning the qubit term contributes
only a global phase per branch and drops out.
"""

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import bfgs, grape
from .errors import (
    CalibrationError,
    DimensionTooSmallError,
    DivergenceError,
    IntegrationError,
)
from .filters import ControlGrid, apply_filter, build_gaussian_transfer
from .operators import (
    DissipationChannel,
    annihilation,
    dag,
    fock_state,
    number_operator,
    truncation_leak,
)
from .propagation import IntegratorConfig, PiecewiseGenerator, propagate_forward

TWO_PI = 2.0 * np.pi

# branching detection for the speed-limit study: a run fails when either
# branch keeps more than FAILURE_PHOTON photons, or the branches separate by
# more than FAILURE_RATIO while at least one of them is non-negligible
FAILURE_PHOTON = 1e-2
FAILURE_RATIO = 10.0
RATIO_FLOOR = 1e-3

TRUNCATION_LIMIT = 1e-6


@dataclass
class DispersiveModel:
    """Rotating-frame cavity parameters, all rates in rad/ns."""

    chi: float
    kerr: float
    kappa: float
    detuning: float = 0.0  # omega_r - omega_d
    fock_dim: int = 40
    n_crit: float = 29.0
    ground_shift_sign: int = 1  # ground branch sees +chi by default

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.fock_dim < 3:
            raise ValueError("fock_dim too small")

    def branch_shift(self, qubit_state: str) -> float:
        if qubit_state == "ground":
            return self.ground_shift_sign * self.chi
        if qubit_state == "excited":
            return -self.ground_shift_sign * self.chi
        raise ValueError(f"unknown qubit state {qubit_state!r}")


@dataclass
class MeasurementPulse:
    """Constant readout drive reaching amplitude sqrt(P_norm * P_1ph).

    The resonator starts in vacuum at t = -duration; the pixel value at
    t = -pixel_dt fixes the reset pulse's first pixel.
    """

    duration: float  # ns
    amplitude: float  # rad/ns
    amplitude_schedule: np.ndarray | None = None  # filtered subpixel values


@dataclass
class CalibrationResult:
    eps_one_photon: float  # rad/ns
    method: str
    residual: float


@dataclass
class ResetScenario:
    model: DispersiveModel
    p_norm: float
    horizon: float  # ns
    pixel_dt: float = 1.0
    subpixel_dt: float = 0.1
    bandwidth_3db: float = TWO_PI * 100e-3  # rad/ns (100 MHz)
    quadratures: str = "x"  # "x" or "xy"
    penalty_beta: float = 0.0  # 0 disables the photon-number penalty
    seed: int = 0
    measurement_kappa_multiples: float = 5.0
    eps_one_photon: float | None = None  # filled from calibration when unset
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.p_norm <= 0:
            raise ValueError("p_norm must be positive")
        if self.quadratures not in ("x", "xy"):
            raise ValueError("quadratures must be 'x' or 'xy'")

    def one_photon_amplitude(self) -> float:
        if self.eps_one_photon is None:
            self.eps_one_photon = calibrate_one_photon(self.model, "analytic").eps_one_photon
        return self.eps_one_photon

    def drive_amplitude(self) -> float:
        """Steady measurement amplitude sqrt(P_norm) * sqrt(P_1ph)."""
        return np.sqrt(self.p_norm) * self.one_photon_amplitude()

    def measurement(self) -> MeasurementPulse:
        n_px = int(np.ceil(self.measurement_kappa_multiples / self.model.kappa / self.pixel_dt))
        return MeasurementPulse(duration=n_px * self.pixel_dt, amplitude=self.drive_amplitude())

    @property
    def n_pixels(self):
        return int(round(self.horizon / self.pixel_dt))

    @property
    def n_controls(self):
        return 1 if self.quadratures == "x" else 2


def build_branch_hamiltonians(model: DispersiveModel, qubit_state: str):
    """Rotating-frame drift and the two drive quadrature operators.

    H0 = (detuning +/- chi) n + K n^2,  H_X = a^dag + a,  H_Y = i (a^dag - a).
    """
    d = model.fock_dim
    a = annihilation(d)
    num = number_operator(d)
    shift = model.branch_shift(qubit_state)
    H0 = (model.detuning + shift) * num + model.kerr * (num @ num)
    HX = a + dag(a)
    HY = 1j * (dag(a) - a)
    return H0, [HX, HY]


def steady_state_photon_analytic(model: DispersiveModel, qubit_state: str, eps: float) -> float:
    """Linear-cavity steady state: eps^2 / ((detuning +/- chi)^2 + (kappa/2)^2)."""
    delta = model.detuning + model.branch_shift(qubit_state)
    return eps**2 / (delta**2 + (model.kappa / 2.0) ** 2)


def _analytic_one_photon(model) -> float:
    inv = 0.0
    for qs in ("ground", "excited"):
        delta = model.detuning + model.branch_shift(qs)
        inv += 0.5 / (delta**2 + (model.kappa / 2.0) ** 2)
    return float(1.0 / np.sqrt(inv))


def _steady_photon_numeric(model, eps, cfg=None):
    """Branch-averaged photon number after 10 damping times of constant drive."""
    cfg = cfg or IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11, rehermitize_every=1)
    d = model.fock_dim
    a = annihilation(d)
    num = number_operator(d)
    channels = [DissipationChannel(rate=model.kappa, collapse=a)]
    horizon = 10.0 / model.kappa
    total = 0.0
    for qs in ("ground", "excited"):
        H0, (HX, _) = build_branch_hamiltonians(model, qs)
        gen = PiecewiseGenerator(
            drift=H0 + eps * HX,
            control_ops=[],
            channels=channels,
            amplitudes=np.zeros((16, 0)),
            subpixel_dt=horizon / 16,
        )
        traj = propagate_forward(fock_state(d, 0), gen, cfg, store_states=False)
        total += 0.5 * np.einsum("ij,ji->", num, traj.final_state).real
    return total


def calibrate_one_photon(model: DispersiveModel, method: str = "numeric") -> CalibrationResult:
    """Drive amplitude giving one steady-state photon on branch average.

    "analytic" inverts the linear-cavity closed form; "numeric" root-finds on
    long-time propagation of the full nonlinear model.
    """
    eps_a = _analytic_one_photon(model)
    if method == "analytic":
        return CalibrationResult(eps_one_photon=eps_a, method="analytic", residual=0.0)
    if method != "numeric":
        raise ValueError(f"unknown calibration method {method!r}")

    scan = []

    def objective(eps):
        val = _steady_photon_numeric(model, eps) - 1.0
        scan.append((float(eps), float(val + 1.0)))
        return val

    lo, hi = 0.3 * eps_a, 3.0 * eps_a
    f_lo, f_hi = objective(lo), objective(hi)
    if f_lo * f_hi > 0:
        raise CalibrationError(
            f"no sign change in [{lo:.4e}, {hi:.4e}] rad/ns", scan=scan
        )
    eps = brentq(objective, lo, hi, xtol=1e-8, rtol=1e-6)
    residual = abs(_steady_photon_numeric(model, eps) - 1.0)
    return CalibrationResult(eps_one_photon=float(eps), method="numeric", residual=residual)


@dataclass
class PreparedStates:
    rho_ground: np.ndarray
    rho_excited: np.ndarray
    final_amplitude: float
    leak: float
    measurement: MeasurementPulse


_PREP_CACHE: dict = {}


def _prep_cache_key(scenario: ResetScenario):
    m = scenario.model
    return (
        m.chi, m.kerr, m.kappa, m.detuning, m.fock_dim, m.ground_shift_sign,
        scenario.p_norm, scenario.pixel_dt, scenario.subpixel_dt,
        scenario.bandwidth_3db, scenario.measurement_kappa_multiples,
        round(scenario.one_photon_amplitude(), 15),
        scenario.integrator.method, scenario.integrator.rel_tol,
        scenario.integrator.abs_tol,
    )


def prepare_measurement_state(scenario: ResetScenario) -> PreparedStates:
    """Steady measurement states: vacuum driven for the measurement duration.

    The first pixel is held at zero (the resonator starts undriven in
    vacuum); the remaining pixels sit at the steady amplitude and pass
    through the same Gaussian filter as the reset pulse.  Results are cached
    per scenario since every reset mode and horizon shares them.
    """
    key = _prep_cache_key(scenario)
    if key in _PREP_CACHE:
        return _PREP_CACHE[key]

    model = scenario.model
    pulse = scenario.measurement()
    n_px = int(round(pulse.duration / scenario.pixel_dt))
    values = np.full((n_px, 1), pulse.amplitude)
    values[0, 0] = 0.0
    grid = ControlGrid(pixel_dt=scenario.pixel_dt, values=values,
                       pinned=np.array([[True, False]]))
    tm = build_gaussian_transfer(n_px, scenario.pixel_dt, scenario.subpixel_dt,
                                 scenario.bandwidth_3db)
    schedule = apply_filter(tm, grid)
    pulse.amplitude_schedule = schedule.values[:, 0]

    d = model.fock_dim
    a = annihilation(d)
    channels = [DissipationChannel(rate=model.kappa, collapse=a)]
    vacuum = fock_state(d, 0)
    states = {}
    leak = 0.0
    for qs in ("ground", "excited"):
        H0, (HX, _) = build_branch_hamiltonians(model, qs)
        gen = PiecewiseGenerator(
            drift=H0,
            control_ops=[HX],
            channels=channels,
            amplitudes=schedule.values,
            subpixel_dt=scenario.subpixel_dt,
        )
        traj = propagate_forward(vacuum, gen, scenario.integrator, store_states=False)
        rho = traj.final_state
        leak = max(leak, truncation_leak(rho))
        states[qs] = rho
    if leak > TRUNCATION_LIMIT:
        raise DimensionTooSmallError(
            f"top-two-level population {leak:.2e} exceeds {TRUNCATION_LIMIT:g} at "
            f"fock_dim={d}; increase the Hilbert space"
        )
    prepared = PreparedStates(
        rho_ground=states["ground"],
        rho_excited=states["excited"],
        final_amplitude=pulse.amplitude,
        leak=leak,
        measurement=pulse,
    )
    _PREP_CACHE[key] = prepared
    return prepared


def _reset_control_grid(scenario: ResetScenario, first_amplitude: float) -> ControlGrid:
    """Zeroed pixel grid with the reset boundary conditions pinned.

    The X quadrature starts at the measurement pulse's steady amplitude and
    ends at zero; the Y quadrature is pinned to zero at both ends.
    """
    N = scenario.n_pixels
    R = scenario.n_controls
    values = np.zeros((N, R))
    values[0, 0] = first_amplitude
    pinned = np.ones((R, 2), dtype=bool)
    return ControlGrid(pixel_dt=scenario.pixel_dt, values=values, pinned=pinned)


def build_problem(scenario: ResetScenario, prepared: PreparedStates,
                  penalty_beta: float = 0.0) -> grape.OptimizationProblem:
    """Branch-averaged vacuum-overlap objective for the reset pulse."""
    model = scenario.model
    d = model.fock_dim
    a = annihilation(d)
    num = number_operator(d)
    channels = [DissipationChannel(rate=model.kappa, collapse=a)]
    tm = build_gaussian_transfer(scenario.n_pixels, scenario.pixel_dt,
                                 scenario.subpixel_dt, scenario.bandwidth_3db)
    states = []
    control_ops = None
    for qs, rho in (("ground", prepared.rho_ground), ("excited", prepared.rho_excited)):
        H0, quads = build_branch_hamiltonians(model, qs)
        states.append(grape.WeightedState(state=rho, weight=1.0, drift=H0))
        control_ops = quads[: scenario.n_controls]  # identical for both branches
    return grape.OptimizationProblem(
        states=states,
        control_ops=control_ops,
        channels=channels,
        transfer=tm,
        integrator=scenario.integrator,
        target=fock_state(d, 0),
        penalty_observable=num if penalty_beta != 0.0 else None,
        penalty_weight=penalty_beta,
        stream_gradients=True,  # halves peak memory on the long scenarios
    )


def clear_initial_guess(scenario: ResetScenario, prepared: PreparedStates | None = None,
                        budget: int = 200) -> ControlGrid:
    """Two-segment active-reset pulse fitted by coordinate descent.

    The X quadrature takes two free amplitudes over the two halves of the
    horizon (boundary pixels stay pinned); each is tuned in turn by a
    bounded scalar search on the overlap objective, evaluated with a relaxed
    integrator tolerance.  The Y quadrature, when enabled, is seeded
    uniformly in [-eps0/10, eps0/10] from the scenario seed.
    """
    prepared = prepared or prepare_measurement_state(scenario)
    eps0 = prepared.final_amplitude
    grid = _reset_control_grid(scenario, eps0)
    N = scenario.n_pixels
    half = max(1, N // 2)

    relaxed = replace(scenario.integrator, rel_tol=1e-6, abs_tol=1e-8)
    problem = build_problem(scenario, prepared)
    problem = replace_integrator(problem, relaxed)

    evals = 0

    def overlap_for(a1, a2):
        nonlocal evals
        evals += 1
        values = grid.values.copy()
        values[1:half, 0] = a1
        values[half:N - 1, 0] = a2
        try:
            return grape.evaluate_objective(problem, grid.replace_values(values))
        except (IntegrationError, DivergenceError):
            return -1e9  # extreme trial amplitude; score it out of the running

    best = np.array([0.0, 0.0])
    best_val = overlap_for(*best)
    bound = 3.0 * max(eps0, scenario.one_photon_amplitude())
    for _ in range(2):
        for coord in (0, 1):
            if evals >= budget:
                break

            def neg(x, coord=coord):
                trial = best.copy()
                trial[coord] = x
                return -overlap_for(*trial)

            res = minimize_scalar(neg, bounds=(-bound, bound), method="bounded",
                                  options={"maxiter": min(20, budget - evals)})
            if -res.fun > best_val:
                best_val = -res.fun
                best[coord] = res.x

    values = grid.values.copy()
    values[1:half, 0] = best[0]
    values[half:N - 1, 0] = best[1]
    if scenario.n_controls == 2:
        rng = np.random.default_rng(scenario.seed)
        values[1:N - 1, 1] = rng.uniform(-eps0 / 10, eps0 / 10, size=N - 2)
    return grid.replace_values(values)


def replace_integrator(problem: grape.OptimizationProblem, cfg: IntegratorConfig):
    return replace(problem, integrator=cfg)


@dataclass
class ResetReport:
    mode: str
    scenario: ResetScenario
    times: np.ndarray  # (M+1,) ns
    photons_ground: np.ndarray
    photons_excited: np.ndarray
    final_photon: dict
    transient_max: float
    controls: ControlGrid
    filtered: np.ndarray  # (M, R)
    history: list
    iterations: int
    stalled: bool
    objective: float
    overlap: float
    penalty: float
    rk_steps_optimization: int
    rk_steps_forward: dict  # per-branch accepted steps of the final simulation
    truncation_leak: float
    eps_measurement: float
    wall_time_s: float

    @property
    def n_rk_per_subpixel(self):
        M = len(self.times) - 1
        return {k: v / M for k, v in self.rk_steps_forward.items()}


def _simulate(scenario, prepared, controls):
    """Photon-number time series for both branches under the given pulse."""
    model = scenario.model
    d = model.fock_dim
    a = annihilation(d)
    num = number_operator(d)
    channels = [DissipationChannel(rate=model.kappa, collapse=a)]
    tm = build_gaussian_transfer(scenario.n_pixels, scenario.pixel_dt,
                                 scenario.subpixel_dt, scenario.bandwidth_3db)
    sub = apply_filter(tm, controls)
    series = {}
    steps = {}
    leak = 0.0
    finals = {}
    for qs, rho in (("ground", prepared.rho_ground), ("excited", prepared.rho_excited)):
        H0, quads = build_branch_hamiltonians(model, qs)
        gen = PiecewiseGenerator(
            drift=H0,
            control_ops=quads[: scenario.n_controls],
            channels=channels,
            amplitudes=sub.values,
            subpixel_dt=scenario.subpixel_dt,
        )
        traj = propagate_forward(rho, gen, scenario.integrator,
                                 store_states=False, observable=num)
        series[qs] = traj.observable_series
        steps[qs] = traj.rk_step_count
        finals[qs] = traj.final_state
        leak = max(leak, truncation_leak(traj.final_state))
    times = scenario.subpixel_dt * np.arange(sub.n_subpixels + 1)
    return times, series, steps, leak, sub.values, finals


def run_reset(scenario: ResetScenario, mode: str,
              optimizer_cfg: bfgs.OptimizerConfig | None = None) -> ResetReport:
    """Execute one reset scheme and collect its report.

    Modes: "passive" (drive off), "clear" (two-segment guess), "grape"
    (gradient-optimized), "grape_penalized" (photon-penalty objective,
    initialized from the unpenalized optimum).
    """
    t_start = time.perf_counter()
    prepared = prepare_measurement_state(scenario)
    history = []
    iterations = 0
    stalled = False
    rk_opt = 0
    objective = overlap = penalty = float("nan")

    if mode == "passive":
        controls = ControlGrid(pixel_dt=scenario.pixel_dt,
                               values=np.zeros((scenario.n_pixels, scenario.n_controls)))
    elif mode == "clear":
        controls = clear_initial_guess(scenario, prepared)
    elif mode in ("grape", "grape_penalized"):
        guess = clear_initial_guess(scenario, prepared)
        problem = build_problem(scenario, prepared)
        controls, state = grape.optimize(problem, guess, optimizer_cfg, seed=scenario.seed)
        history = state.history
        iterations = state.iteration
        stalled = state.stalled
        rk_opt = sum(row.get("rk_steps", 0) for row in history)
        if mode == "grape_penalized":
            beta = scenario.penalty_beta or 0.2 / scenario.horizon
            problem_p = build_problem(scenario, prepared, penalty_beta=beta)
            controls, state_p = grape.optimize(problem_p, controls, optimizer_cfg,
                                               seed=scenario.seed)
            history = history + state_p.history
            iterations += state_p.iteration
            stalled = state_p.stalled
            rk_opt += sum(row.get("rk_steps", 0) for row in state_p.history)
    else:
        raise ValueError(f"unknown reset mode {mode!r}")

    if history:
        objective = history[-1]["value"]
        overlap = history[-1].get("overlap", objective)
        penalty = history[-1].get("penalty", 0.0)

    times, series, steps, leak, filtered, _ = _simulate(scenario, prepared, controls)
    if leak > TRUNCATION_LIMIT:
        warnings.warn(
            f"truncation leak {leak:.2e} exceeds {TRUNCATION_LIMIT:g} in mode "
            f"{mode!r}; results may be dimension-limited",
            RuntimeWarning,
            stacklevel=2,
        )
    return ResetReport(
        mode=mode,
        scenario=scenario,
        times=times,
        photons_ground=series["ground"],
        photons_excited=series["excited"],
        final_photon={"ground": float(series["ground"][-1]),
                      "excited": float(series["excited"][-1])},
        transient_max=float(max(series["ground"].max(), series["excited"].max())),
        controls=controls,
        filtered=filtered,
        history=history,
        iterations=iterations,
        stalled=stalled,
        objective=objective,
        overlap=overlap,
        penalty=penalty,
        rk_steps_optimization=rk_opt,
        rk_steps_forward=steps,
        truncation_leak=leak,
        eps_measurement=prepared.final_amplitude,
        wall_time_s=time.perf_counter() - t_start,
    )


def is_failed_reset(final_ground: float, final_excited: float) -> bool:
    """Branching/failure detection for the speed-limit study."""
    worst = max(final_ground, final_excited)
    if worst > FAILURE_PHOTON:
        return True
    best = max(min(final_ground, final_excited), 1e-300)
    return worst / best > FAILURE_RATIO and worst > RATIO_FLOOR


@dataclass
class SweepResult:
    rows: list  # dicts: p_norm, horizon, final_ground, final_excited, failed
    speed_limits: dict  # p_norm -> smallest non-failing horizon (or None)
    alpha: float | None
    alpha_stderr: float | None
    notes: list


def _sweep_single_power(model, p, horizon_list, scenario_kwargs, optimizer_cfg):
    """Ascending-horizon scan for one drive power; stops at the first success."""
    rows = []
    limit = None
    for T in sorted(horizon_list):
        scenario = ResetScenario(model=model, p_norm=p, horizon=T, **scenario_kwargs)
        report = run_reset(scenario, "grape", optimizer_cfg)
        failed = is_failed_reset(report.final_photon["ground"],
                                 report.final_photon["excited"])
        rows.append({
            "p_norm": p,
            "horizon": T,
            "final_ground": report.final_photon["ground"],
            "final_excited": report.final_photon["excited"],
            "failed": failed,
            "stalled": report.stalled,
            "iterations": report.iterations,
        })
        if not failed:
            limit = T
            break
    return rows, limit


def speed_limit_sweep(model: DispersiveModel, p_norm_list, horizon_list,
                      scenario_kwargs=None, optimizer_cfg=None, jobs=1) -> SweepResult:
    """Empirical speed limit: smallest horizon whose optimization succeeds.

    For each drive power the horizons are tried in ascending order until one
    passes the failure test; the passing horizon is that power's speed
    limit.  A power law T* ~ P^alpha is fitted through the limits by least
    squares on the log-log points.  Powers are independent and may run in
    parallel worker processes (jobs > 1).
    """
    if not p_norm_list or not horizon_list:
        raise ValueError("sweep lists must be non-empty")
    scenario_kwargs = dict(scenario_kwargs or {})
    scenario_kwargs.setdefault("quadratures", "xy")
    rows = []
    limits = {}
    notes = []
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_sweep_single_power, model, p, horizon_list,
                            scenario_kwargs, optimizer_cfg)
                for p in p_norm_list
            ]
            results = [f.result() for f in futures]
    else:
        results = [
            _sweep_single_power(model, p, horizon_list, scenario_kwargs, optimizer_cfg)
            for p in p_norm_list
        ]
    for p, (p_rows, limit) in zip(p_norm_list, results):
        rows.extend(p_rows)
        limits[p] = limit
        if limit is None:
            notes.append(f"P_norm={p}: no horizon in the list succeeded")

    fitted = [(p, t) for p, t in limits.items() if t is not None]
    alpha = alpha_err = None
    if len(fitted) >= 2:
        x = np.log([p for p, _ in fitted])
        y = np.log([t for _, t in fitted])
        coeffs, cov = np.polyfit(x, y, 1, cov=True) if len(fitted) > 2 else (
            np.polyfit(x, y, 1), None)
        alpha = float(coeffs[0])
        alpha_err = float(np.sqrt(cov[0, 0])) if cov is not None else float("nan")
    ts = [t for _, t in fitted]
    if any(b < a for a, b in zip(ts, ts[1:])):
        notes.append("speed limit is not monotone in drive power")
    return SweepResult(rows=rows, speed_limits=limits, alpha=alpha,
                       alpha_stderr=alpha_err, notes=notes)
