"""Raw volume container.

A volume file is a single ASCII header line

    LRSE1 <h> <w> <T> <frame_rate_hz>\n

followed by h*w*T little-endian float32 values, frame-major then
row-major (index = t*h*w + row*w + col).  Mask volumes use the same
container with values restricted to {0.0, 1.0}.
"""

from __future__ import annotations

import numpy as np

from .errors import VideoFormatError

MAGIC = b"LRSE1"


def write_volume(path, data: np.ndarray, frame_rate_hz: float = 1.0) -> None:
    """Write an (h, w, T) volume to the raw container format."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"expected (h, w, T) volume, got shape {data.shape}")
    h, w, t = data.shape
    header = f"LRSE1 {h} {w} {t} {frame_rate_hz!r}\n".encode("ascii")
    # (h, w, T) -> frame-major row-major payload
    payload = np.ascontiguousarray(np.moveaxis(data, 2, 0), dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_volume(path) -> tuple[np.ndarray, float]:
    """Read a raw container file, returning ((h, w, T) float64 array, frame rate).

    Raises VideoFormatError naming the byte offset of the first problem.
    """
    with open(path, "rb") as fh:
        raw = fh.read()

    nl = raw.find(b"\n")
    if nl < 0:
        raise VideoFormatError(f"{path}: no header line terminator in first {len(raw)} bytes")
    header = raw[:nl]
    fields = header.split(b" ")
    if len(fields) != 5 or fields[0] != MAGIC:
        raise VideoFormatError(f"{path}: malformed header at byte 0: {header[:60]!r}")
    try:
        h, w, t = (int(fields[i]) for i in (1, 2, 3))
        rate = float(fields[4])
    except ValueError as exc:
        raise VideoFormatError(f"{path}: malformed header at byte 0: {exc}") from exc
    if t == 0:
        raise VideoFormatError(f"{path}: empty video (T=0 in header)")
    if h < 1 or w < 1 or t < 0:
        raise VideoFormatError(f"{path}: non-positive dimensions {h}x{w}x{t} in header")
    if not (rate > 0 and np.isfinite(rate)):
        raise VideoFormatError(f"{path}: frame rate must be positive, got {rate}")

    offset = nl + 1
    expected = h * w * t * 4
    if len(raw) - offset < expected:
        raise VideoFormatError(
            f"{path}: truncated payload, expected {expected} bytes at offset {offset}, "
            f"found {len(raw) - offset}"
        )
    if len(raw) - offset > expected:
        raise VideoFormatError(f"{path}: {len(raw) - offset - expected} trailing bytes at offset {offset + expected}")

    flat = np.frombuffer(raw, dtype="<f4", count=h * w * t, offset=offset)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise VideoFormatError(f"{path}: non-finite value at byte offset {offset + 4 * int(bad[0])}")
    data = flat.astype(np.float64).reshape(t, h, w)
    return np.moveaxis(data, 0, 2), rate


def read_mask_volume(path) -> np.ndarray:
    """Read a mask container; values must be exactly 0.0 or 1.0."""
    data, _ = read_volume(path)
    if not np.isin(data, (0.0, 1.0)).all():
        raise VideoFormatError(f"{path}: mask volume contains values outside {{0, 1}}")
    return data.astype(bool)


def write_mask_volume(path, mask: np.ndarray) -> None:
    write_volume(path, np.asarray(mask, dtype=np.float64))
