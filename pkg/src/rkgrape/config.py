"""Run configuration: JSON key-value files with MHz/kHz/ns units.

All frequencies enter as cycles (f / 2pi): chi_mhz, kappa_mhz, bandwidth_mhz
in MHz, kerr_khz in kHz.  Times are in ns.  Conversion to internal angular
units (rad/ns) happens once, when a model or scenario is built.
"""

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .cqed import DispersiveModel, ResetScenario
from .errors import ConfigError
from .propagation import IntegratorConfig

SCHEMA_VERSION = "1"

MHZ = 2.0 * np.pi * 1e-3  # MHz -> rad/ns
KHZ = 2.0 * np.pi * 1e-6  # kHz -> rad/ns

MODEL_KEYS = ("chi_mhz", "kerr_khz", "kappa_mhz")
SCENARIO_KEYS = MODEL_KEYS + ("p_norm", "horizon_ns", "mode")


def default_fock_dim(p_norm: float) -> int:
    """Hilbert-space size rule of thumb; the truncation diagnostic verifies it."""
    return 40 if p_norm <= 6 else 60


@dataclass
class RunConfig:
    """Raw configuration values, units as in the file."""

    chi_mhz: float = 1.3
    kerr_khz: float = -2.1
    kappa_mhz: float = 1.1
    detuning_mhz: float = 0.0
    fock_dim: int | None = None
    p_norm: float = 4.0
    horizon_ns: float = 300.0
    pixel_dt_ns: float = 1.0
    subpixel_dt_ns: float = 0.1
    bandwidth_mhz: float = 100.0
    beta_over_T: float = 0.0
    quadratures: str = "x"
    seed: int = 0
    mode: str = "grape"
    calibration_method: str = "analytic"
    max_iters: int = 500
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    # sweep inputs
    p_norm_list: list = field(default_factory=list)
    horizon_list_ns: list = field(default_factory=list)
    # benchmark inputs
    dims: list = field(default_factory=lambda: [8, 12, 16, 24, 32, 48])
    n_pixels: int = 100
    repetitions: int = 3

    def to_model(self) -> DispersiveModel:
        fock = self.fock_dim if self.fock_dim is not None else default_fock_dim(self.p_norm)
        return DispersiveModel(
            chi=self.chi_mhz * MHZ,
            kerr=self.kerr_khz * KHZ,
            kappa=self.kappa_mhz * MHZ,
            detuning=self.detuning_mhz * MHZ,
            fock_dim=int(fock),
        )

    def to_integrator(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol)

    def to_scenario(self) -> ResetScenario:
        return ResetScenario(
            model=self.to_model(),
            p_norm=self.p_norm,
            horizon=self.horizon_ns,
            pixel_dt=self.pixel_dt_ns,
            subpixel_dt=self.subpixel_dt_ns,
            bandwidth_3db=self.bandwidth_mhz * MHZ,
            quadratures=self.quadratures,
            penalty_beta=(self.beta_over_T / self.horizon_ns) if self.beta_over_T else 0.0,
            seed=self.seed,
            integrator=self.to_integrator(),
        )

    def quick(self) -> "RunConfig":
        """Scaled-down variant for CI: small Hilbert space, coarse subpixels."""
        cfg = RunConfig(**asdict(self))
        cfg.fock_dim = 20
        cfg.subpixel_dt_ns = 0.5
        cfg.max_iters = 50
        return cfg


_VALID_KEYS = {f.name for f in fields(RunConfig)}


def parse_config(path, required=SCENARIO_KEYS) -> RunConfig:
    """Load and validate a JSON config; missing keys name themselves."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = set(raw) - _VALID_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in required if k not in raw]
    if missing:
        raise ConfigError(f"missing required config keys: {missing}")
    cfg = RunConfig(**raw)
    if cfg.mode not in ("passive", "clear", "grape", "grape_penalized"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.quadratures not in ("x", "xy"):
        raise ConfigError(f"quadratures must be 'x' or 'xy', got {cfg.quadratures!r}")
    return cfg


def serialize_config(cfg: RunConfig, path):
    with open(path, "w") as fh:
        json.dump(asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
