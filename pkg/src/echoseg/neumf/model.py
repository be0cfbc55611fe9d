"""Neural matrix-factorization model.

Two embedding families per axis feed two branches: the MF branch multiplies
pixel and frame vectors elementwise, the MLP branch runs their concatenation
through a small network.  Both are merged by a head network ending in a
sigmoid, so reconstructions live in (0, 1).  A separate scalar threshold
network maps reconstruction residuals to a non-negative sparse signal.

Embeddings are stored as unconstrained pre-activations; the effective
(strictly positive) embedding is softplus of the stored value.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

HIDDEN = 10

# Parameter blocks in checkpoint order.  Reconstruction network: an MLP over
# the concatenated pixel/frame MLP embeddings, then a head over the MF
# product concatenated with the branch output.
RECON_PARAM_ORDER = (
    "branch_w1", "branch_b1", "branch_w2", "branch_b2", "branch_w3", "branch_b3",
    "head_w1", "head_b1", "head_w2", "head_b2", "head_w3", "head_b3",
    "head_w4", "head_b4",
)
THRESH_PARAM_ORDER = (
    "thr_w1", "thr_b1", "thr_w2", "thr_b2", "thr_w3", "thr_b3", "thr_w4", "thr_b4",
)
EMBEDDING_ORDER = ("pixel_mf", "frame_mf", "pixel_mlp", "frame_mlp")


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_deriv(x):
    # d/dx log(1 + e^x) = sigmoid(x)
    return sigmoid(x)


def inv_softplus(y):
    """Inverse of softplus for y > 0."""
    y = np.asarray(y, dtype=np.float64)
    return np.log(np.expm1(y))


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class EmbeddingTables:
    """Pre-activation embedding tables; effective embedding is softplus(table)."""

    pixel_mf: np.ndarray  # (N, K)
    frame_mf: np.ndarray  # (T, K)
    pixel_mlp: np.ndarray  # (N, K')
    frame_mlp: np.ndarray  # (T, K')

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in EMBEDDING_ORDER}

    def effective(self, name: str, rows=None) -> np.ndarray:
        table = getattr(self, name)
        return softplus(table if rows is None else table[rows])


@dataclass
class NeuMFModel:
    embeddings: EmbeddingTables
    recon_params: dict[str, np.ndarray]
    thresh_params: dict[str, np.ndarray]
    mf_dim: int
    mlp_dim: int

    @property
    def n_pixels(self) -> int:
        return self.embeddings.pixel_mf.shape[0]

    @property
    def n_frames(self) -> int:
        return self.embeddings.frame_mf.shape[0]

    def copy(self) -> "NeuMFModel":
        return copy.deepcopy(self)


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _init_embedding(rng: np.random.Generator, shape, mean=0.5, std=0.01) -> np.ndarray:
    target = np.maximum(rng.normal(mean, std, size=shape), 1e-6)
    return inv_softplus(target)


def _mlp_params(rng: np.random.Generator, sizes: list[int], prefix: str) -> dict[str, np.ndarray]:
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
        params[f"{prefix}_w{i}"] = _xavier(rng, fan_in, fan_out)
        params[f"{prefix}_b{i}"] = np.zeros(fan_out)
    return params


def init_random(n_pixels: int, n_frames: int, cfg, seed: int | None = None) -> NeuMFModel:
    """Xavier-uniform weights, zero biases, softplus-Gaussian embeddings.

    Effective embeddings are Gaussian with mean 0.5 and std 0.01 (the stored
    pre-activations are the inverse softplus of the sampled targets).
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    k, kp = cfg.mf_dim, cfg.mlp_dim
    emb = EmbeddingTables(
        pixel_mf=_init_embedding(rng, (n_pixels, k)),
        frame_mf=_init_embedding(rng, (n_frames, k)),
        pixel_mlp=_init_embedding(rng, (n_pixels, kp)),
        frame_mlp=_init_embedding(rng, (n_frames, kp)),
    )
    recon = _mlp_params(rng, [2 * kp, HIDDEN, HIDDEN, HIDDEN], "branch")
    recon.update(_mlp_params(rng, [k + HIDDEN, HIDDEN, HIDDEN, HIDDEN, 1], "head"))
    thresh = _mlp_params(rng, [1, HIDDEN, HIDDEN, HIDDEN, 1], "thr")
    return NeuMFModel(embeddings=emb, recon_params=recon, thresh_params=thresh, mf_dim=k, mlp_dim=kp)


def init_mfi(rnmf_result, n_pixels: int, n_frames: int, cfg, seed: int | None = None) -> NeuMFModel:
    """Random init, then seed the MF embeddings from factorization output.

    Factor entries are clamped to 1e-4 before the inverse softplus (zero has
    no pre-image).  A factor V with fewer rows than n_frames seeds only the
    leading frame rows, leaving the rest at their random initialization.
    """
    if rnmf_result.rank != cfg.mf_dim:
        raise ValueError(f"factorization rank {rnmf_result.rank} != configured mf_dim {cfg.mf_dim}")
    if rnmf_result.U.shape[0] != n_pixels or rnmf_result.V.shape[0] > n_frames:
        raise ValueError(
            f"factor shapes {rnmf_result.U.shape}/{rnmf_result.V.shape} do not fit "
            f"{n_pixels} pixels x {n_frames} frames"
        )
    model = init_random(n_pixels, n_frames, cfg, seed)
    model.embeddings.pixel_mf = inv_softplus(np.maximum(rnmf_result.U, 1e-4))
    rows = rnmf_result.V.shape[0]
    model.embeddings.frame_mf[:rows] = inv_softplus(np.maximum(rnmf_result.V, 1e-4))
    return model


def _affine_relu_chain(x, params, prefix, n_layers):
    """Run x through affine+ReLU layers, returning pre/post activations."""
    pre, post = [], []
    h = x
    for i in range(1, n_layers + 1):
        a = h @ params[f"{prefix}_w{i}"] + params[f"{prefix}_b{i}"]
        h = np.maximum(a, 0.0)
        pre.append(a)
        post.append(h)
    return pre, post


def forward_batch(
    model: NeuMFModel,
    n_idx: np.ndarray,
    t_idx: np.ndarray,
    linear_output: bool = False,
    want_cache: bool = False,
):
    """Reconstruction values for index pairs (n_idx[i], t_idx[i]).

    linear_output replaces the final sigmoid with identity; it exists only
    for the factorization-subsumption test harness.
    """
    emb = model.embeddings
    p = model.recon_params
    ug = emb.effective("pixel_mf", n_idx)
    vg = emb.effective("frame_mf", t_idx)
    um = emb.effective("pixel_mlp", n_idx)
    vm = emb.effective("frame_mlp", t_idx)

    product = ug * vg
    m0 = np.concatenate([um, vm], axis=1)
    branch_pre, branch_post = _affine_relu_chain(m0, p, "branch", 3)
    z = np.concatenate([product, branch_post[-1]], axis=1)
    head_pre, head_post = _affine_relu_chain(z, p, "head", 3)
    out = head_post[-1] @ p["head_w4"] + p["head_b4"]
    xhat = out[:, 0] if linear_output else sigmoid(out[:, 0])

    if not want_cache:
        return xhat
    cache = {
        "ug": ug, "vg": vg, "um": um, "vm": vm,
        "m0": m0, "branch_pre": branch_pre, "branch_post": branch_post,
        "z": z, "head_pre": head_pre, "head_post": head_post,
        "out": out[:, 0], "xhat": xhat, "linear_output": linear_output,
    }
    return xhat, cache


def forward(model: NeuMFModel, n: int, t: int, linear_output: bool = False) -> float:
    """Single-entry reconstruction; raises IndexError out of range."""
    if not (0 <= n < model.n_pixels and 0 <= t < model.n_frames):
        raise IndexError(f"index ({n}, {t}) outside {model.n_pixels} x {model.n_frames}")
    return float(forward_batch(model, np.array([n]), np.array([t]), linear_output)[0])


def reconstruct_full(model: NeuMFModel, chunk: int = 1 << 18) -> np.ndarray:
    """Reconstruction of the full (N, T) matrix, computed in chunks."""
    n, t = model.n_pixels, model.n_frames
    flat = np.empty(n * t)
    for start in range(0, n * t, chunk):
        idx = np.arange(start, min(start + chunk, n * t))
        flat[idx] = forward_batch(model, idx // t, idx % t)
    return flat.reshape(n, t)


def threshold_forward(model: NeuMFModel, residual: np.ndarray, want_cache: bool = False):
    """Threshold-network output for a batch of residual scalars (>= 0 by softplus)."""
    p = model.thresh_params
    r = np.asarray(residual, dtype=np.float64).reshape(-1, 1)
    pre, post = _affine_relu_chain(r, p, "thr", 3)
    a4 = post[-1] @ p["thr_w4"] + p["thr_b4"]
    s = softplus(a4[:, 0])
    if not want_cache:
        return s
    return s, {"r": r, "pre": pre, "post": post, "a4": a4[:, 0], "s": s}


def threshold_apply(model: NeuMFModel, residual) -> np.ndarray | float:
    """Elementwise sparse-signal map of reconstruction residuals."""
    arr = np.asarray(residual, dtype=np.float64)
    out = threshold_forward(model, arr.ravel()).reshape(arr.shape)
    return float(out) if np.isscalar(residual) or arr.ndim == 0 else out
