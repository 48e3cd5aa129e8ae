"""Piecewise-constant control grids and the Gaussian bandwidth filter.

Optimization variables live on a coarse pixel grid (N pixels of width
pixel_dt); the dynamics see a smoothed pulse resampled onto M >> N subpixels
through a transfer matrix with closed-form error-function entries.  The
transpose of the same matrix carries subpixel gradients back to the pixels.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import GridMismatchError

# reference bandwidth: w0 = w_B / sqrt(-ln(1/sqrt(2))), approximately w_B / 0.5887
BANDWIDTH_RATIO = float(np.sqrt(-np.log(1.0 / np.sqrt(2.0))))


@dataclass
class ControlGrid:
    """Pixel-resolution control amplitudes, (N, R) in rad/ns.

    `pinned` holds one (first, last) flag pair per control; pinned pixels are
    boundary conditions and are never touched by updates.
    """

    pixel_dt: float
    values: np.ndarray
    pinned: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.pinned is None:
            self.pinned = np.zeros((self.values.shape[1], 2), dtype=bool)
        self.pinned = np.asarray(self.pinned, dtype=bool).reshape(-1, 2)
        if self.pinned.shape[0] != self.values.shape[1]:
            raise ValueError("need one (first, last) pin pair per control")
        if np.any(self.pinned) and self.values.shape[0] < 2:
            raise ValueError("pinning requires at least 2 pixels")

    @property
    def n_pixels(self):
        return self.values.shape[0]

    @property
    def n_controls(self):
        return self.values.shape[1]

    @property
    def duration(self):
        return self.n_pixels * self.pixel_dt

    def free_mask(self) -> np.ndarray:
        """Boolean (N, R) mask of pixels the optimizer may change."""
        mask = np.ones_like(self.values, dtype=bool)
        for k in range(self.n_controls):
            if self.pinned[k, 0]:
                mask[0, k] = False
            if self.pinned[k, 1]:
                mask[-1, k] = False
        return mask

    def replace_values(self, values) -> "ControlGrid":
        return ControlGrid(pixel_dt=self.pixel_dt, values=np.array(values, dtype=float),
                           pinned=self.pinned.copy())


@dataclass
class SubpixelGrid:
    """Filtered amplitudes on the fine grid, (M, R) in rad/ns."""

    subpixel_dt: float
    values: np.ndarray

    @property
    def n_subpixels(self):
        return self.values.shape[0]

    @property
    def duration(self):
        return self.n_subpixels * self.subpixel_dt


@dataclass
class TransferMatrix:
    """Gaussian-filter pixel-to-subpixel map, shared by all controls.

    entries[n, j] = ( erf(w0 (n dt_sub - j dt_px) / 2)
                    - erf(w0 (n dt_sub - (j+1) dt_px) / 2) ) / 2
    with 0-based n, j.  The pulse is taken to vanish outside [0, T]: no
    pixels exist beyond the grid, so filter tails simply lose weight near
    the ends (interior row sums are 1).
    """

    entries: np.ndarray  # (M, N)
    bandwidth_3db: float  # w_B, rad/ns
    reference_bandwidth: float  # w0, rad/ns
    pixel_dt: float
    subpixel_dt: float

    @property
    def n_subpixels(self):
        return self.entries.shape[0]

    @property
    def n_pixels(self):
        return self.entries.shape[1]


def subpixels_per_pixel(pixel_dt, subpixel_dt):
    ratio = pixel_dt / subpixel_dt
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise GridMismatchError(
            f"pixel_dt/subpixel_dt = {ratio} is not a positive integer"
        )
    return n


def build_gaussian_transfer(n_pixels, pixel_dt, subpixel_dt, bandwidth_3db) -> TransferMatrix:
    """Closed-form transfer matrix for a Gaussian filter of 3dB bandwidth w_B."""
    if bandwidth_3db <= 0:
        raise ValueError("bandwidth must be positive")
    per = subpixels_per_pixel(pixel_dt, subpixel_dt)
    M = n_pixels * per
    w0 = bandwidth_3db / BANDWIDTH_RATIO
    t_sub = subpixel_dt * np.arange(M)
    pixel_edges = pixel_dt * np.arange(n_pixels + 1)
    E = 0.5 * erf(0.5 * w0 * (t_sub[:, None] - pixel_edges[None, :]))
    entries = E[:, :-1] - E[:, 1:]
    return TransferMatrix(
        entries=entries,
        bandwidth_3db=bandwidth_3db,
        reference_bandwidth=w0,
        pixel_dt=pixel_dt,
        subpixel_dt=subpixel_dt,
    )


def apply_filter(tm: TransferMatrix, controls: ControlGrid) -> SubpixelGrid:
    """Filtered subpixel amplitudes: one matrix-vector product per control."""
    if controls.n_pixels != tm.n_pixels:
        raise ValueError(
            f"control grid has {controls.n_pixels} pixels, transfer matrix expects "
            f"{tm.n_pixels}"
        )
    return SubpixelGrid(subpixel_dt=tm.subpixel_dt, values=tm.entries @ controls.values)


def backprop_gradient(tm: TransferMatrix, subpixel_grad, pinned=None) -> np.ndarray:
    """Chain rule back to pixel controls: the exact transpose of apply_filter.

    Rows belonging to pinned boundary pixels are zeroed so pinned values
    never move under gradient updates.
    """
    subpixel_grad = np.asarray(subpixel_grad, dtype=float)
    if subpixel_grad.ndim == 1:
        subpixel_grad = subpixel_grad[:, None]
    if subpixel_grad.shape[0] != tm.n_subpixels:
        raise ValueError(
            f"gradient has {subpixel_grad.shape[0]} subpixels, transfer matrix expects "
            f"{tm.n_subpixels}"
        )
    pixel_grad = tm.entries.T @ subpixel_grad
    if pinned is not None:
        pinned = np.asarray(pinned, dtype=bool).reshape(-1, 2)
        for k in range(pixel_grad.shape[1]):
            if pinned[k, 0]:
                pixel_grad[0, k] = 0.0
            if pinned[k, 1]:
                pixel_grad[-1, k] = 0.0
    return pixel_grad
