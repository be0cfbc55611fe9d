"""Sliding-window ROI selection on a motion-saliency volume.

The score of a candidate window is the time-weighted sum of squared
saliency inside it; the scan over all stride-aligned positions is O(h*w)
via a summed-area table of the time-reduced squared saliency.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .flow import dense_flow_magnitude

DEFAULT_WINDOW_H = 60
DEFAULT_WINDOW_W = 80
REFERENCE_SIDE = 400


@dataclass(frozen=True)
class WindowRect:
    """Axis-aligned rectangle in frame coordinates, [top, top+height) x [left, left+width)."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"degenerate window {self}")
        if self.top < 0 or self.left < 0:
            raise ValueError(f"negative window origin {self}")

    @property
    def bottom(self) -> int:
        return self.top + self.height

    @property
    def right(self) -> int:
        return self.left + self.width

    def fits(self, frame_h: int, frame_w: int) -> bool:
        return self.bottom <= frame_h and self.right <= frame_w

    def overlaps(self, other: "WindowRect") -> bool:
        return not (
            self.bottom <= other.top
            or other.bottom <= self.top
            or self.right <= other.left
            or other.right <= self.left
        )

    def to_mask(self, frame_h: int, frame_w: int) -> np.ndarray:
        mask = np.zeros((frame_h, frame_w), dtype=bool)
        mask[self.top : self.bottom, self.left : self.right] = True
        return mask

    def to_dict(self) -> dict:
        return asdict(self)


def scaled_window_size(frame_h: int, frame_w: int) -> tuple[int, int]:
    """Default detection window, scaled from 60x80 at a 400-pixel frame side."""

    def scale(ref: int, side: int) -> int:
        even = int(round(ref * side / REFERENCE_SIDE / 2.0)) * 2
        return max(2, min(even, side))

    return scale(DEFAULT_WINDOW_H, frame_h), scale(DEFAULT_WINDOW_W, frame_w)


def scaled_stride(frame_h: int, frame_w: int) -> int:
    """Default scan stride: 4 pixels at a 400-pixel side, 1 at small scales."""
    return max(1, int(round(4 * max(frame_h, frame_w) / REFERENCE_SIDE)))


def saliency_volume(
    sparse: np.ndarray, mode: str, to_threshold: float = 0.1, flow_sigma_t: float = 3.5
) -> np.ndarray:
    """Motion saliency of the sparse signal.

    mode "to": elementwise threshold keep (values <= to_threshold zeroed);
    mode "of": dense optical-flow magnitude.
    """
    sparse = np.asarray(sparse, dtype=np.float64)
    if mode == "to":
        return np.where(sparse > to_threshold, sparse, 0.0)
    if mode == "of":
        return dense_flow_magnitude(sparse, sigma_t=flow_sigma_t)
    raise ValueError(f"unknown saliency mode {mode!r} (expected 'to' or 'of')")


def _reduced_energy(sal: np.ndarray, weights: np.ndarray) -> np.ndarray:
    sal = np.asarray(sal, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if sal.ndim != 3:
        raise ValueError(f"expected (h, w, T) saliency volume, got {sal.shape}")
    if weights.shape != (sal.shape[2],):
        raise ValueError(f"need {sal.shape[2]} time weights, got shape {weights.shape}")
    if weights.min() < 0 or not weights.any():
        raise ValueError("time weights must be non-negative and not all zero")
    return np.einsum("ijt,t->ij", sal * sal, weights)


def detect_window(
    sal: np.ndarray, weights: np.ndarray, win_h: int, win_w: int, stride: int = 1
) -> WindowRect:
    """Exact argmax of the windowed weighted saliency energy over the stride grid.

    Ties break toward the smallest top, then smallest left.
    """
    energy = _reduced_energy(sal, weights)
    h, w = energy.shape
    if win_h > h or win_w > w:
        raise ValueError(f"window {win_h}x{win_w} larger than frame {h}x{w}")
    if stride < 1:
        raise ValueError("stride must be >= 1")

    sat = np.zeros((h + 1, w + 1))
    sat[1:, 1:] = energy.cumsum(axis=0).cumsum(axis=1)
    tops = np.arange(0, h - win_h + 1, stride)
    lefts = np.arange(0, w - win_w + 1, stride)
    scores = (
        sat[np.ix_(tops + win_h, lefts + win_w)]
        - sat[np.ix_(tops, lefts + win_w)]
        - sat[np.ix_(tops + win_h, lefts)]
        + sat[np.ix_(tops, lefts)]
    )
    i, j = np.unravel_index(int(np.argmax(scores)), scores.shape)
    return WindowRect(top=int(tops[i]), left=int(lefts[j]), height=win_h, width=win_w)


def time_masked_detect(
    sal: np.ndarray,
    frame_components: np.ndarray,
    win_h: int,
    win_w: int,
    stride: int = 1,
) -> tuple[WindowRect, list[WindowRect]]:
    """Run detect_window once per frame-embedding component and keep the right-most hit.

    frame_components is (T, K); component k supplies the time weights of
    candidate k.  Ties on the left coordinate break toward the largest top,
    then the earliest component.  Returns (chosen, all candidates).
    """
    frame_components = np.asarray(frame_components, dtype=np.float64)
    if frame_components.ndim != 2 or frame_components.shape[1] < 1:
        raise ValueError(f"expected (T, K) frame components, got {frame_components.shape}")
    candidates = [
        detect_window(sal, frame_components[:, k], win_h, win_w, stride)
        for k in range(frame_components.shape[1])
    ]
    chosen = candidates[0]
    for cand in candidates[1:]:
        if (cand.left, cand.top) > (chosen.left, chosen.top):
            chosen = cand
    return chosen, candidates
