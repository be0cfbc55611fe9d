"""From sparse signal + ROI to a binary mask volume.

Per frame: edge-preserving diffusion, fixed threshold restricted to the ROI,
morphological opening; then 3D connected components filter out small blobs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .roi import WindowRect


@dataclass(frozen=True)
class DiffusionParams:
    iterations: int = 10
    kappa: float = 0.15  # edge threshold on [0, 1] intensities
    step: float = 0.2    # explicit scheme stable for step <= 0.25
    # conduction is exponential: c(g) = exp(-(g / kappa)^2)

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not 0 < self.step <= 0.25:
            raise ConfigError("step must be in (0, 0.25] for stability")
        if self.kappa <= 0:
            raise ConfigError("kappa must be > 0")


def anisotropic_diffuse(frame: np.ndarray, params: DiffusionParams = DiffusionParams()) -> np.ndarray:
    """Perona-Malik diffusion, 4-neighbor flux form with Neumann borders.

    Pairwise fluxes cancel exactly, so total intensity is conserved.
    """
    img = np.asarray(frame, dtype=np.float64).copy()
    if img.ndim != 2:
        raise ValueError(f"expected 2D frame, got {img.shape}")
    inv_k2 = 1.0 / (params.kappa * params.kappa)
    for _ in range(params.iterations):
        grad_n = np.zeros_like(img)
        grad_s = np.zeros_like(img)
        grad_w = np.zeros_like(img)
        grad_e = np.zeros_like(img)
        grad_n[1:, :] = img[:-1, :] - img[1:, :]
        grad_s[:-1, :] = img[1:, :] - img[:-1, :]
        grad_w[:, 1:] = img[:, :-1] - img[:, 1:]
        grad_e[:, :-1] = img[:, 1:] - img[:, :-1]
        flux = sum(np.exp(-(g * g) * inv_k2) * g for g in (grad_n, grad_s, grad_w, grad_e))
        img += params.step * flux
    return img


def threshold_mask(
    sparse: np.ndarray,
    roi: WindowRect,
    tau_s: float = 0.12,
    params: DiffusionParams = DiffusionParams(),
) -> np.ndarray:
    """Per-frame diffused sparse signal thresholded at tau_s inside the ROI."""
    sparse = np.asarray(sparse, dtype=np.float64)
    if sparse.ndim != 3:
        raise ValueError(f"expected (h, w, T) volume, got {sparse.shape}")
    h, w, n_frames = sparse.shape
    if not roi.fits(h, w):
        raise ValueError(f"roi {roi} outside {h}x{w} frame")
    inside = roi.to_mask(h, w)
    mask = np.zeros(sparse.shape, dtype=bool)
    for t in range(n_frames):
        diffused = anisotropic_diffuse(sparse[:, :, t], params)
        mask[:, :, t] = (diffused > tau_s) & inside
    return mask


def disk_element(radius: int) -> np.ndarray:
    """Disk structuring element; radius 0 is a single pixel."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    r = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(r, r, indexing="ij")
    return yy * yy + xx * xx <= radius * radius


def morphological_open(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Per-frame opening (erosion then dilation) with a disk element."""
    mask = np.asarray(mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    element = disk_element(radius)
    out = np.zeros_like(mask)
    for t in range(mask.shape[2]):
        eroded = ndimage.binary_erosion(mask[:, :, t], structure=element)
        out[:, :, t] = ndimage.binary_dilation(eroded, structure=element)
    return out


def filter_components_3d(mask: np.ndarray, min_voxels: int, connectivity: int = 6) -> np.ndarray:
    """Drop 3D connected components smaller than min_voxels.

    connectivity 6 joins voxels differing by 1 in exactly one of (row, col, t);
    26 joins the full neighborhood.
    """
    if min_voxels < 0:
        raise ValueError("min_voxels must be >= 0")
    if connectivity not in (6, 26):
        raise ValueError("connectivity must be 6 or 26")
    mask = np.asarray(mask, dtype=bool)
    if min_voxels == 0:
        return mask.copy()
    structure = ndimage.generate_binary_structure(3, 1 if connectivity == 6 else 3)
    labels, count = ndimage.label(mask, structure=structure)
    if count == 0:
        return mask.copy()
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_voxels
    keep[0] = False
    return keep[labels]


def default_min_voxels(roi: WindowRect, n_frames: int, fraction: float = 0.005) -> int:
    """Component-size floor: a fixed fraction of the ROI volume."""
    return int(round(fraction * roi.height * roi.width * n_frames))
