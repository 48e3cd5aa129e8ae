"""BFGS ascent with a strong-Wolfe line search.

Generic dense/limited-memory quasi-Newton maximizer used by the pulse
optimizer.  The caller supplies a fused value-and-gradient callable; each
line-search trial evaluates both (the curvature condition needs the
directional derivative), and the evaluation at the accepted point is reused
as the next iteration's gradient.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerConfig:
    max_iters: int = 500
    tol_grad: float = 1e-7  # sup-norm of the gradient
    tol_value: float = 1e-10  # absolute change of the objective
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_trials: int = 40
    memory: int | None = None  # None: full inverse-Hessian; else L-BFGS pairs
    curvature_floor: float = 1e-12  # skip updates with y.s below this (relative)


@dataclass
class OptimizerState:
    iteration: int = 0
    inverse_hessian: np.ndarray | None = None
    history: list = field(default_factory=list)
    rng_seed: int | None = None
    stalled: bool = False
    stop_reason: str = ""

    @property
    def values(self):
        return [row["value"] for row in self.history]


class _LineSearchFailure(Exception):
    pass


def _cubic_min(a, fa, dfa, b, fb, dfb):
    """Minimizer of the cubic interpolant on [a, b]; None if degenerate."""
    d1 = dfa + dfb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - dfa * dfb
    if disc < 0:
        return None
    d2 = np.sqrt(disc) * np.sign(b - a)
    denom = dfb - dfa + 2 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (dfb + d2 - d1) / denom
    if not np.isfinite(t):
        return None
    return t


def _zoom(phi, a_lo, a_hi, f_lo, df_lo, f_hi, df_hi, f0, df0, c1, c2, budget):
    """Nocedal-Wright zoom on a bracket known to contain a Wolfe point."""
    evals = 0
    while evals < budget:
        t = _cubic_min(a_lo, f_lo, df_lo, a_hi, f_hi, df_hi)
        width = abs(a_hi - a_lo)
        lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
        if t is None or not (lo + 0.05 * width < t < hi - 0.05 * width):
            t = 0.5 * (a_lo + a_hi)
        ft, dft, payload = phi(t)
        evals += 1
        if ft > f0 + c1 * t * df0 or ft >= f_lo:
            a_hi, f_hi, df_hi = t, ft, dft
        else:
            if abs(dft) <= -c2 * df0:
                return t, ft, dft, payload, evals
            if dft * (a_hi - a_lo) >= 0:
                a_hi, f_hi, df_hi = a_lo, f_lo, df_lo
            a_lo, f_lo, df_lo = t, ft, dft
        if abs(a_hi - a_lo) < 1e-16:
            break
    raise _LineSearchFailure


def _wolfe_search(phi, f0, df0, c1, c2, max_trials, alpha0=1.0):
    """Strong-Wolfe step along a descent direction (df0 < 0).

    phi(alpha) returns (value, directional derivative, payload).  Returns
    (alpha, value, derivative, payload, n_evals).
    """
    if df0 >= 0:
        raise _LineSearchFailure
    a_prev, f_prev, df_prev = 0.0, f0, df0
    a = alpha0
    evals = 0
    while evals < max_trials:
        fa, dfa, payload = phi(a)
        evals += 1
        if fa > f0 + c1 * a * df0 or (evals > 1 and fa >= f_prev):
            return _zoom(phi, a_prev, a, f_prev, df_prev, fa, dfa,
                         f0, df0, c1, c2, max_trials - evals)
        if abs(dfa) <= -c2 * df0:
            return a, fa, dfa, payload, evals
        if dfa >= 0:
            return _zoom(phi, a, a_prev, fa, dfa, f_prev, df_prev,
                         f0, df0, c1, c2, max_trials - evals)
        a_prev, f_prev, df_prev = a, fa, dfa
        a = min(2.5 * a, 1e6)
    raise _LineSearchFailure


def maximize(value_and_grad, x0, cfg: OptimizerConfig | None = None, seed=None):
    """BFGS ascent of a smooth objective.

    value_and_grad(x) must return (value, gradient, info) where `info` is an
    arbitrary dict merged into the per-iteration history.  Returns
    (x_best, OptimizerState).  A failed line search sets `stalled` and
    returns the best iterate seen instead of raising.
    """
    cfg = cfg or OptimizerConfig()
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    state = OptimizerState(rng_seed=seed)

    value, grad, info = value_and_grad(x)
    if not np.isfinite(value):
        raise FloatingPointError(f"objective is non-finite at the initial point: {value}")
    f = -value
    g = -grad

    x_best = x.copy()
    f_best = f
    H = np.eye(n)
    pairs = []  # (s, y, rho) for the limited-memory variant
    first_update_done = False

    def record(step_len, n_evals, cur_info):
        row = {
            "iteration": state.iteration,
            "value": -f,
            "grad_inf_norm": float(np.max(np.abs(g))) if n else 0.0,
            "step_length": step_len,
            "line_search_evals": n_evals,
        }
        row.update(cur_info or {})
        state.history.append(row)

    record(0.0, 1, info)

    for it in range(1, cfg.max_iters + 1):
        state.iteration = it
        gnorm = float(np.max(np.abs(g))) if n else 0.0
        if gnorm < cfg.tol_grad:
            state.stop_reason = "gradient"
            break

        if cfg.memory is None:
            p = -(H @ g)
        else:
            p = _two_loop_direction(g, pairs)
        if float(p @ g) >= 0:
            # not a descent direction (stale curvature); restart from steepest
            H = np.eye(n)
            pairs.clear()
            first_update_done = False
            p = -g

        def phi(alpha, _x=x, _p=p):
            v, gr, inf = value_and_grad(_x + alpha * _p)
            return -v, float(-(gr @ _p)), (gr, inf)

        df0 = float(g @ p)
        try:
            alpha, f_new, _, (grad_new, info_new), n_evals = _wolfe_search(
                phi, f, df0, cfg.wolfe_c1, cfg.wolfe_c2, cfg.max_line_search_trials
            )
        except _LineSearchFailure:
            state.stalled = True
            state.stop_reason = "line-search"
            break
        if not np.isfinite(f_new):
            raise FloatingPointError("objective became non-finite during ascent")

        s = alpha * p
        x = x + s
        g_new = -grad_new
        y = g_new - g
        delta_f = f - f_new
        f, g = f_new, g_new
        record(alpha, n_evals, info_new)
        if f < f_best:
            f_best = f
            x_best = x.copy()

        ys = float(y @ s)
        if ys > cfg.curvature_floor * np.linalg.norm(y) * np.linalg.norm(s):
            if cfg.memory is None:
                if not first_update_done:
                    H *= ys / float(y @ y)
                    first_update_done = True
                Hy = H @ y
                rho = 1.0 / ys
                # H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
                H -= rho * (np.outer(s, Hy) + np.outer(Hy, s))
                H += rho * (1.0 + rho * float(y @ Hy)) * np.outer(s, s)
            else:
                pairs.append((s, y, 1.0 / ys))
                if len(pairs) > cfg.memory:
                    pairs.pop(0)

        if abs(delta_f) < cfg.tol_value:
            state.stop_reason = "value"
            break
    else:
        state.stop_reason = "max-iters"

    state.inverse_hessian = H if cfg.memory is None else None
    return x_best, state


def _two_loop_direction(g, pairs):
    """L-BFGS two-loop recursion for -H g."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q
