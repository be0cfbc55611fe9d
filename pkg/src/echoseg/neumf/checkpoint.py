"""Versioned binary checkpoints.

Layout: magic "NMF1", four little-endian uint32 dims (N, T, K, K'), then all
parameter blocks as little-endian float32 in declared order: embedding
tables, reconstruction network, threshold network.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import VideoFormatError
from .model import (
    EMBEDDING_ORDER,
    RECON_PARAM_ORDER,
    THRESH_PARAM_ORDER,
    EmbeddingTables,
    HIDDEN,
    NeuMFModel,
)

MAGIC = b"NMF1"


def _block_shapes(n: int, t: int, k: int, kp: int) -> list[tuple[str, str, tuple]]:
    shapes = [
        ("emb", "pixel_mf", (n, k)),
        ("emb", "frame_mf", (t, k)),
        ("emb", "pixel_mlp", (n, kp)),
        ("emb", "frame_mlp", (t, kp)),
    ]
    branch_sizes = [2 * kp, HIDDEN, HIDDEN, HIDDEN]
    head_sizes = [k + HIDDEN, HIDDEN, HIDDEN, HIDDEN, 1]
    thr_sizes = [1, HIDDEN, HIDDEN, HIDDEN, 1]
    for prefix, sizes, group in (("branch", branch_sizes, "recon"), ("head", head_sizes, "recon"), ("thr", thr_sizes, "thresh")):
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
            shapes.append((group, f"{prefix}_w{i}", (fan_in, fan_out)))
            shapes.append((group, f"{prefix}_b{i}", (fan_out,)))
    return shapes


def save_checkpoint(path, model: NeuMFModel) -> None:
    emb = model.embeddings.as_dict()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<4I", model.n_pixels, model.n_frames, model.mf_dim, model.mlp_dim))
        for group, name, shape in _block_shapes(model.n_pixels, model.n_frames, model.mf_dim, model.mlp_dim):
            source = {"emb": emb, "recon": model.recon_params, "thresh": model.thresh_params}[group]
            block = source[name]
            assert block.shape == shape, f"{name}: {block.shape} != {shape}"
            fh.write(np.ascontiguousarray(block, dtype="<f4").tobytes())


def load_checkpoint(path) -> NeuMFModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise VideoFormatError(f"{path}: bad checkpoint magic {raw[:4]!r}")
    n, t, k, kp = struct.unpack("<4I", raw[4:20])
    offset = 20
    emb: dict[str, np.ndarray] = {}
    recon: dict[str, np.ndarray] = {}
    thresh: dict[str, np.ndarray] = {}
    for group, name, shape in _block_shapes(n, t, k, kp):
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(raw):
            raise VideoFormatError(f"{path}: truncated checkpoint at byte {offset} ({name})")
        block = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).astype(np.float64).reshape(shape)
        {"emb": emb, "recon": recon, "thresh": thresh}[group][name] = block
        offset = end
    if offset != len(raw):
        raise VideoFormatError(f"{path}: {len(raw) - offset} trailing bytes")
    tables = EmbeddingTables(**{name: emb[name] for name in EMBEDDING_ORDER})
    for order, params in ((RECON_PARAM_ORDER, recon), (THRESH_PARAM_ORDER, thresh)):
        missing = set(order) - set(params)
        if missing:
            raise VideoFormatError(f"{path}: missing parameter blocks {sorted(missing)}")
    return NeuMFModel(embeddings=tables, recon_params=recon, thresh_params=thresh, mf_dim=k, mlp_dim=kp)
