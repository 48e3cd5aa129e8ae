"""Figure rendering for the CLI report path.

Figures are written next to the delimited output they visualize; the core
library never imports matplotlib.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

MHZ = 2.0 * np.pi * 1e-3


def _style(ax, xlabel, ylabel, title=None):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)


def render_reset_figures(report, out_dir):
    """Photon-number decay and pulse shapes for one reset run."""
    paths = []
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    t = report.times
    ax1.plot(t, report.photons_ground, label="ground")
    ax1.plot(t, report.photons_excited, "--", label="excited")
    _style(ax1, "", "mean photon number", f"reset: {report.mode}")
    ax1.legend()
    floor = 1e-8
    ax2.semilogy(t, np.maximum(report.photons_ground, floor))
    ax2.semilogy(t, np.maximum(report.photons_excited, floor), "--")
    _style(ax2, "time (ns)", "mean photon number (log)")
    fig.tight_layout()
    p = f"{out_dir}/photon_vs_time.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.append(p)

    if report.mode != "passive":
        fig, ax = plt.subplots(figsize=(7, 4))
        M = report.filtered.shape[0]
        t_sub = report.scenario.subpixel_dt * np.arange(M)
        labels = ["X", "Y"]
        for k in range(report.filtered.shape[1]):
            ax.plot(t_sub, report.filtered[:, k] / MHZ, label=f"{labels[k]} (filtered)")
        t_px = report.scenario.pixel_dt * np.arange(report.controls.n_pixels)
        for k in range(report.controls.n_controls):
            ax.step(t_px, report.controls.values[:, k] / MHZ, where="post",
                    alpha=0.5, label=f"{labels[k]} (pixels)")
        _style(ax, "time (ns)", "drive amplitude (MHz)")
        ax.legend()
        fig.tight_layout()
        p = f"{out_dir}/pulse.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        paths.append(p)
    return paths


def render_benchmark_figure(result, out_dir):
    rows = result["rows"]
    d = [r["d"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(d, [r["t_expm_ms"] for r in rows], "o-",
              label=f"matrix exponential (slope {result['slope_expm']:.2f})")
    ax.loglog(d, [r["t_rk_ms"] for r in rows], "s-",
              label=f"Runge-Kutta (slope {result['slope_rk']:.2f})")
    _style(ax, "Hilbert-space dimension d", "propagation time (ms)")
    ax.legend()
    fig.tight_layout()
    p = f"{out_dir}/benchmark_scaling.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    return [p]


def render_sweep_figure(result, out_dir):
    fitted = [(p, t) for p, t in result.speed_limits.items() if t is not None]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if fitted:
        ps = np.array([p for p, _ in fitted], dtype=float)
        ts = np.array([t for _, t in fitted], dtype=float)
        ax.loglog(ps, ts, "o", label="empirical speed limit")
        if result.alpha is not None:
            x = np.linspace(ps.min(), ps.max(), 50)
            scale = np.exp(np.mean(np.log(ts) - result.alpha * np.log(ps)))
            ax.loglog(x, scale * x**result.alpha, "--",
                      label=f"power-law fit, exponent {result.alpha:.2f}")
    _style(ax, "normalized drive power", "shortest successful reset (ns)")
    ax.legend()
    fig.tight_layout()
    p = f"{out_dir}/speed_limit.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    return [p]
