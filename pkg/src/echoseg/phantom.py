"""Synthetic phantoms with analytic ground truth.

A phantom is a low-rank background (smooth spatial patterns modulated by
smooth periodic time courses) plus a bright elongated leaflet blob sweeping
inside a window, an optional phase-shifted distractor blob, and Gaussian
speckle.  The construction is exact, so a noise-free phantom doubles as an
oracle for every downstream stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .roi import WindowRect
from .video import Video

# Intensity budget: background + blob stays inside [0, 1] so that the
# noise-free phantom is exactly equal to its constructed parts (no clamping).
BACKGROUND_AMPLITUDE = 0.52
BLOB_AMPLITUDE = 0.42
ENVELOPE_FLOOR = 0.60
# The distractor mimics a second, slightly stronger valve so that
# time-unweighted window detection tends to prefer it.
DISTRACTOR_GAIN = 1.15
DISTRACTOR_SIZE_GAIN = 1.10
SWEEP_RADIANS = 0.6


@dataclass(frozen=True)
class PhantomConfig:
    height: int = 64
    width: int = 64
    frames: int = 48
    background_rank: int = 2
    valve_window: WindowRect = field(default_factory=lambda: WindowRect(23, 37, 18, 20))
    valve_period_frames: int = 16
    distractor_window: WindowRect | None = None
    distractor_phase_frames: float = 0.0
    speckle_std: float = 0.02
    seed: int = 0


@dataclass
class PhantomTruth:
    """Everything the generator knows: masks, windows and exact components."""

    valve_mask: np.ndarray  # (h, w, T) bool, per-frame leaflet support
    valve_window: WindowRect
    distractor_window: WindowRect | None
    background_rank: int
    valve_activity: np.ndarray  # (T,) summed leaflet intensity per frame
    distractor_activity: np.ndarray | None
    background: np.ndarray  # (h, w, T) clean low-rank component
    foreground: np.ndarray  # (h, w, T) leaflet + distractor contribution


def standard_phantom_config(seed: int = 0) -> PhantomConfig:
    """64x64x48, rank-2 background, one valve blob, mild speckle."""
    return PhantomConfig(seed=seed)


def two_blob_phantom_config(seed: int = 0) -> PhantomConfig:
    """Valve blob on the right, anti-phase distractor on the left."""
    return PhantomConfig(
        distractor_window=WindowRect(23, 7, 18, 20),
        distractor_phase_frames=8.0,
        seed=seed,
    )


def _validate(cfg: PhantomConfig) -> None:
    if min(cfg.height, cfg.width, cfg.frames) < 1:
        raise ConfigError(f"degenerate phantom dimensions {cfg.height}x{cfg.width}x{cfg.frames}")
    if cfg.background_rank < 1:
        raise ConfigError("background_rank must be >= 1")
    if cfg.valve_period_frames < 4:
        raise ConfigError("valve_period_frames must be >= 4")
    if cfg.speckle_std < 0:
        raise ConfigError("speckle_std must be >= 0")
    if not cfg.valve_window.fits(cfg.height, cfg.width):
        raise ConfigError(f"valve window {cfg.valve_window} outside {cfg.height}x{cfg.width} frame")
    if cfg.distractor_window is not None:
        if not cfg.distractor_window.fits(cfg.height, cfg.width):
            raise ConfigError(f"distractor window {cfg.distractor_window} outside frame")
        if cfg.distractor_window.overlaps(cfg.valve_window):
            raise ConfigError("valve and distractor windows overlap")


def _background(cfg: PhantomConfig, rng: np.random.Generator) -> np.ndarray:
    """Sum of rank-1 terms: smooth spatial bumps times periodic time courses.

    The first time course shares the valve's period and phase (wall motion and
    valve follow the same cycle); further courses drift slowly so the temporal
    factors stay well separated.
    """
    h, w, t_len, rank = cfg.height, cfg.width, cfg.frames, cfg.background_rank
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    t = np.arange(t_len, dtype=np.float64)
    amp = BACKGROUND_AMPLITUDE / rank
    total = np.zeros((h, w, t_len))
    band = h / rank
    for i in range(rank):
        pattern = np.zeros((h, w))
        for _ in range(3):
            cy = rng.uniform(i * band, (i + 1) * band)
            cx = rng.uniform(0, w)
            sigma = rng.uniform(0.15, 0.35) * max(h, w)
            pattern += np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2 * sigma**2))
        pattern /= pattern.max()
        if i == 0:
            course = 0.5 + 0.5 * np.sin(2 * np.pi * t / cfg.valve_period_frames)
        else:
            phase = rng.uniform(0, 2 * np.pi)
            course = 0.5 + 0.5 * np.sin(2 * np.pi * i * t / t_len + phase)
        total += amp * pattern[:, :, None] * course[None, None, :]
    return total


def _leaflet(
    window: WindowRect,
    h: int,
    w: int,
    t_len: int,
    period: int,
    phase_frames: float,
    amplitude: float,
    size_gain: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Oriented Gaussian ellipse thresholded at half max, pivoting in its window.

    The brightness envelope and the sweep share one cycle: the leaflet is
    brightest exactly when it moves fastest.  Returns (contribution volume,
    support masks, per-frame activity).
    """
    cy = window.top + (window.height - 1) / 2.0
    cx = window.left + (window.width - 1) / 2.0
    half_min = min(window.height, window.width) / 2.0
    major = min(0.44 * size_gain * min(window.height, window.width), half_min - 1.0)
    minor = max(0.3 * major, 1.0)

    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    t = np.arange(t_len, dtype=np.float64)
    arg = 2 * np.pi * (t + phase_frames) / period
    envelope = ENVELOPE_FLOOR + (1 - ENVELOPE_FLOOR) * (1 + np.sin(arg)) / 2
    angle = SWEEP_RADIANS * (-np.cos(arg))

    volume = np.zeros((h, w, t_len))
    masks = np.zeros((h, w, t_len), dtype=bool)
    for k in range(t_len):
        ca, sa = np.cos(angle[k]), np.sin(angle[k])
        du = (cols - cx) * ca + (rows - cy) * sa
        dv = -(cols - cx) * sa + (rows - cy) * ca
        q = (du / major) ** 2 + (dv / minor) ** 2
        support = q <= 1.0
        shape = np.exp(-np.log(2.0) * q) * support
        volume[:, :, k] = amplitude * envelope[k] * shape
        masks[:, :, k] = support
    activity = volume.sum(axis=(0, 1))
    return volume, masks, activity


def generate_phantom(cfg: PhantomConfig) -> tuple[Video, PhantomTruth]:
    """Deterministically synthesize a phantom video and its ground truth."""
    _validate(cfg)
    rng = np.random.default_rng(cfg.seed)

    background = _background(cfg, rng)
    valve, valve_masks, valve_activity = _leaflet(
        cfg.valve_window,
        cfg.height,
        cfg.width,
        cfg.frames,
        cfg.valve_period_frames,
        0.0,
        BLOB_AMPLITUDE,
        1.0,
    )
    foreground = valve
    distractor_activity = None
    if cfg.distractor_window is not None:
        distractor, _, distractor_activity = _leaflet(
            cfg.distractor_window,
            cfg.height,
            cfg.width,
            cfg.frames,
            cfg.valve_period_frames,
            cfg.distractor_phase_frames,
            BLOB_AMPLITUDE * DISTRACTOR_GAIN,
            DISTRACTOR_SIZE_GAIN,
        )
        foreground = valve + distractor

    data = background + foreground
    if cfg.speckle_std > 0:
        data = data + rng.normal(0.0, cfg.speckle_std, size=data.shape)
    data = np.clip(data, 0.0, 1.0)

    truth = PhantomTruth(
        valve_mask=valve_masks,
        valve_window=cfg.valve_window,
        distractor_window=cfg.distractor_window,
        background_rank=cfg.background_rank,
        valve_activity=valve_activity,
        distractor_activity=distractor_activity,
        background=background,
        foreground=foreground,
    )
    return Video(data=data), truth
