"""Video ingestion, preprocessing and pixel-matrix reshaping."""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from . import container
from .errors import VideoFormatError


@dataclass
class Video:
    """Grayscale intensity volume of shape (h, w, T), all values finite and >= 0."""

    data: np.ndarray
    frame_rate_hz: float = 30.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValueError(f"video must be (h, w, T) with all dims >= 1, got {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValueError("video contains non-finite intensities")
        if self.data.min() < 0:
            raise ValueError("video contains negative intensities")
        if not self.frame_rate_hz > 0:
            raise ValueError(f"frame rate must be positive, got {self.frame_rate_hz}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def frames(self) -> int:
        return self.data.shape[2]


@dataclass
class PixelMatrix:
    """Flattened video: column t holds frame t in row-major pixel order.

    Shape (N, T) with N = height * width; entries are expected in [0, 1]
    once preprocessing has normalized the video.
    """

    data: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"pixel matrix must be 2D, got {self.data.shape}")
        if self.data.shape[0] != self.height * self.width:
            raise ValueError(
                f"N={self.data.shape[0]} does not match {self.height}x{self.width}"
            )

    @property
    def n_pixels(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]


def load_video(path) -> Video:
    """Load a raw container file into a Video."""
    data, rate = container.read_volume(path)
    if data.min() < 0:
        # locate first offending payload value for the error message
        order = np.moveaxis(data, 2, 0).ravel()
        idx = int(np.flatnonzero(order < 0)[0])
        with open(path, "rb") as fh:
            header_len = fh.read(4096).find(b"\n") + 1
        raise VideoFormatError(f"{path}: negative intensity at byte offset {header_len + 4 * idx}")
    return Video(data=data, frame_rate_hz=rate)


def save_video(path, video: Video) -> None:
    container.write_volume(path, video.data, video.frame_rate_hz)


def flatten(video: Video) -> PixelMatrix:
    """Reshape (h, w, T) into an (N, T) matrix, one row-major frame per column."""
    h, w, t = video.data.shape
    return PixelMatrix(data=video.data.reshape(h * w, t), height=h, width=w)


def unflatten(matrix: PixelMatrix) -> Video:
    """Inverse of flatten; raises on inconsistent dimensions."""
    n, t = matrix.data.shape
    if n != matrix.height * matrix.width:
        raise ValueError(f"N={n} does not match {matrix.height}x{matrix.width}")
    return Video(data=matrix.data.reshape(matrix.height, matrix.width, t))


def unflatten_values(values: np.ndarray, height: int, width: int) -> np.ndarray:
    """Reshape an (N, T) array of arbitrary sign into an (h, w, T) volume."""
    n, t = values.shape
    if n != height * width:
        raise ValueError(f"N={n} does not match {height}x{width}")
    return values.reshape(height, width, t)


def pad_to_square(data: np.ndarray) -> np.ndarray:
    """Zero-pad the shorter spatial side symmetrically (excess to bottom/right)."""
    h, w, _ = data.shape
    side = max(h, w)
    dh, dw = side - h, side - w
    pads = ((dh // 2, dh - dh // 2), (dw // 2, dw - dw // 2), (0, 0))
    return np.pad(data, pads, mode="constant")


def preprocess(video: Video, target_side: int) -> Video:
    """Square, resample and normalize a video.

    The shorter spatial side is zero-padded symmetrically to a square, each
    frame is then area-averaged down (or bilinearly up) to target_side, and
    intensities are rescaled to [0, 1] by the global maximum.  target_side=0
    keeps the padded side length (no resampling).
    """
    if target_side < 0:
        raise ValueError("target_side must be >= 0")
    data = pad_to_square(video.data)
    side = data.shape[0]
    if target_side == 0:
        target_side = side
    if target_side != side:
        interp = cv2.INTER_AREA if target_side < side else cv2.INTER_LINEAR
        out = np.empty((target_side, target_side, data.shape[2]))
        for t in range(data.shape[2]):
            out[:, :, t] = cv2.resize(data[:, :, t], (target_side, target_side), interpolation=interp)
        data = out
    peak = data.max()
    if peak > 0:
        data = data / peak
    return Video(data=np.clip(data, 0.0, None), frame_rate_hz=video.frame_rate_hz)
