"""Dense optical-flow magnitude of a volume, in pixels per frame."""

from __future__ import annotations

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter1d


def dense_flow_magnitude(
    volume: np.ndarray,
    sigma_t: float = 3.5,
    pyramid_levels: int = 2,
    window_size: int = 5,
    poly_sigma: float = 1.1,
) -> np.ndarray:
    """Per-pixel Euclidean norm of the dense optical flow between consecutive frames.

    The volume is first smoothed along t with a Gaussian of std sigma_t
    (truncated at 3 sigma; sigma_t=0 disables smoothing), then flow is
    estimated per frame pair with Farneback polynomial expansion.  The output
    has the input's shape; the last frame duplicates the previous magnitudes
    since it has no forward pair.
    """
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim != 3:
        raise ValueError(f"expected (h, w, T) volume, got {volume.shape}")
    n_frames = volume.shape[2]
    if n_frames < 2:
        raise ValueError("optical flow needs at least 2 frames")

    if sigma_t > 0:
        volume = gaussian_filter1d(volume, sigma_t, axis=2, mode="nearest", truncate=3.0)

    # Farneback wants 8-bit frames; scaling by the global max keeps the
    # result invariant to positive intensity scaling of the input.
    peak = volume.max()
    scaled = volume / peak if peak > 0 else volume
    frames8 = np.clip(scaled * 255.0, 0, 255).astype(np.uint8)

    mags = np.zeros_like(volume)
    for t in range(n_frames - 1):
        flow = cv2.calcOpticalFlowFarneback(
            frames8[:, :, t],
            frames8[:, :, t + 1],
            None,
            pyr_scale=0.5,
            levels=pyramid_levels,
            winsize=window_size,
            iterations=3,
            poly_n=5,
            poly_sigma=poly_sigma,
            flags=0,
        )
        mags[:, :, t] = np.hypot(flow[..., 0], flow[..., 1])
    mags[:, :, n_frames - 1] = mags[:, :, n_frames - 2]
    return mags
