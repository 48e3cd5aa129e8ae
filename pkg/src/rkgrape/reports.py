"""Report files: delimited CSV payloads, JSON summaries, run manifests.

CSV writers format floats with repr (shortest round-trip), so reruns with an
identical manifest reproduce byte-identical payloads.
"""

import hashlib
import json
import time
from pathlib import Path

import numpy as np

MHZ = 2.0 * np.pi * 1e-3  # rad/ns per MHz

__version__ = "0.1.0"


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, rows):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_pulse_csv(path, dt, values_radns, prefix="u"):
    """Pixel ('u') or subpixel ('s') pulse table, controls in MHz."""
    values = np.atleast_2d(np.asarray(values_radns, dtype=float))
    if values.shape[0] == 1 and values.size > values.shape[1]:
        values = values.T
    header = ["t_ns"] + [f"{prefix}_{k}" for k in range(values.shape[1])]
    rows = [
        [i * dt] + list(values[i] / MHZ)
        for i in range(values.shape[0])
    ]
    return write_csv(path, header, rows)


def read_pulse_csv(path):
    """Inverse of write_pulse_csv: (times_ns, values in rad/ns)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.array([[float(v) for v in line.split(",")] for line in fh if line.strip()])
    if header[0] != "t_ns":
        raise ValueError(f"unexpected pulse header {header}")
    return data[:, 0], data[:, 1:] * MHZ


def write_photon_csv(path, times, n_ground, n_excited):
    rows = zip(times, n_ground, n_excited)
    return write_csv(path, ["t_ns", "n_ground", "n_excited"], rows)


def write_history_csv(path, history):
    rows = [
        [
            row["iteration"],
            row["value"],
            row.get("overlap", row["value"]),
            row.get("penalty", 0.0),
            row["grad_inf_norm"],
            row["step_length"],
            row.get("rk_steps", 0),
        ]
        for row in history
    ]
    return write_csv(
        path, ["iter", "phi", "phi0", "phi_p", "grad_inf_norm", "step_len", "rk_steps"], rows
    )


def write_benchmark_csv(path, rows):
    table = [
        [r["d"], r["t_expm_ms"], r["t_rk_ms"], r["n_rk"], r["trace_dist"]]
        for r in rows
    ]
    return write_csv(path, ["d", "t_expm_ms", "t_rk_ms", "n_rk", "trace_dist"], table)


def write_sweep_csv(path, rows):
    table = [
        [r["p_norm"], r["horizon"], r["final_ground"], r["final_excited"], r["failed"]]
        for r in rows
    ]
    return write_csv(
        path, ["p_norm", "horizon_ns", "final_n_ground", "final_n_excited", "failed"], table
    )


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "__dataclass_fields__"):
        return {k: getattr(obj, k) for k in obj.__dataclass_fields__}
    raise TypeError(f"cannot serialize {type(obj)}")


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return Path(path)


def reset_report_summary(report) -> dict:
    """JSON-friendly summary of a ResetReport (time series live in the CSVs)."""
    sc = report.scenario
    return {
        "mode": report.mode,
        "final_photon": report.final_photon,
        "transient_max": report.transient_max,
        "objective": report.objective,
        "overlap": report.overlap,
        "penalty": report.penalty,
        "iterations": report.iterations,
        "stalled": report.stalled,
        "rk_steps_optimization": report.rk_steps_optimization,
        "rk_steps_forward": report.rk_steps_forward,
        "n_rk_per_subpixel": report.n_rk_per_subpixel,
        "truncation_leak": report.truncation_leak,
        "eps_measurement_mhz": report.eps_measurement / MHZ,
        "wall_time_s": report.wall_time_s,
        "objective_normalization": "averaged over input-state weights",
        "scenario": {
            "p_norm": sc.p_norm,
            "horizon_ns": sc.horizon,
            "pixel_dt_ns": sc.pixel_dt,
            "subpixel_dt_ns": sc.subpixel_dt,
            "bandwidth_mhz": sc.bandwidth_3db / MHZ,
            "quadratures": sc.quadratures,
            "penalty_beta_per_ns": sc.penalty_beta,
            "seed": sc.seed,
            "fock_dim": sc.model.fock_dim,
            "chi_mhz": sc.model.chi / MHZ,
            "kerr_mhz": sc.model.kerr / MHZ,
            "kappa_mhz": sc.model.kappa / MHZ,
            "detuning_mhz": sc.model.detuning / MHZ,
        },
    }


def write_manifest(out_dir, command, config_path, seed, extra=None):
    """One manifest per output directory; timing fields are informational."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_path = Path(config_path) if config_path else None
    digest = None
    if config_path and config_path.exists():
        digest = hashlib.sha256(config_path.read_bytes()).hexdigest()
    payload = {
        "command": command,
        "config_path": str(config_path) if config_path else None,
        "config_sha256": digest,
        "output_dir": str(out_dir),
        "seed": seed,
        "versions": {"rkgrape": __version__, "config_schema": "1"},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        payload.update(extra)
    return write_json(out_dir / "manifest.json", payload)
