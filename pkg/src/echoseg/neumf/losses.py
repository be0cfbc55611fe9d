"""Losses of the factorization model and their analytic gradients.

All gradients are hand-derived reverse-mode passes over the fixed
architecture; finite-difference tests pin them down.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate, correlate1d

from .model import EMBEDDING_ORDER, EmbeddingTables, NeuMFModel, forward_batch, sigmoid, softplus, threshold_forward


def _scatter_rows(n_rows: int, idx: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Accumulate per-entry gradients into table rows (duplicates sum)."""
    out = np.empty((n_rows, values.shape[1]))
    for c in range(values.shape[1]):
        out[:, c] = np.bincount(idx, weights=values[:, c], minlength=n_rows)
    return out


def _backprop_chain(delta, params, prefix, n_layers, pre, post, x0, grads):
    """Backprop through an affine+ReLU chain; returns the gradient at its input."""
    for i in range(n_layers, 0, -1):
        da = delta * (pre[i - 1] > 0)
        inp = post[i - 2] if i > 1 else x0
        grads[f"{prefix}_w{i}"] = inp.T @ da
        grads[f"{prefix}_b{i}"] = da.sum(axis=0)
        delta = da @ params[f"{prefix}_w{i}"].T
    return delta


def recon_loss_and_grads(
    model: NeuMFModel,
    X: np.ndarray,
    n_idx: np.ndarray,
    t_idx: np.ndarray,
    l2_reg: float,
    want_theta: bool = True,
    want_emb: bool = True,
):
    """Reconstruction loss on a batch of entries.

    The loss is the batch mean of squared residuals plus l2_reg times the
    batch mean of the total squared norm of the four effective embedding
    vectors each entry touches.  Returns (loss, theta gradients, embedding
    pre-activation gradients as dense tables).
    """
    n_idx = np.asarray(n_idx)
    t_idx = np.asarray(t_idx)
    batch = len(n_idx)
    xhat, cache = forward_batch(model, n_idx, t_idx, want_cache=True)
    x = X[n_idx, t_idx]
    resid = x - xhat

    ug, vg, um, vm = cache["ug"], cache["vg"], cache["um"], cache["vm"]
    reg = (ug * ug).sum() + (vg * vg).sum() + (um * um).sum() + (vm * vm).sum()
    loss = float((resid * resid).mean() + l2_reg * reg / batch)
    if not (want_theta or want_emb):
        return loss, None, None

    p = model.recon_params
    dxhat = -2.0 * resid / batch
    dout = dxhat if cache["linear_output"] else dxhat * xhat * (1.0 - xhat)

    grads_theta: dict[str, np.ndarray] = {}
    da4 = dout[:, None]
    grads_theta["head_w4"] = cache["head_post"][-1].T @ da4
    grads_theta["head_b4"] = da4.sum(axis=0)
    delta = da4 @ p["head_w4"].T
    dz = _backprop_chain(delta, p, "head", 3, cache["head_pre"], cache["head_post"], cache["z"], grads_theta)

    k = model.mf_dim
    dproduct = dz[:, :k]
    dbranch_out = dz[:, k:]
    dm0 = _backprop_chain(
        dbranch_out, p, "branch", 3, cache["branch_pre"], cache["branch_post"], cache["m0"], grads_theta
    )

    if not want_emb:
        return loss, grads_theta, None

    kp = model.mlp_dim
    scale = 2.0 * l2_reg / batch
    dug = dproduct * vg + scale * ug
    dvg = dproduct * ug + scale * vg
    dum = dm0[:, :kp] + scale * um
    dvm = dm0[:, kp:] + scale * vm

    emb = model.embeddings
    grads_emb = {}
    for name, idx, d_eff, eff in (
        ("pixel_mf", n_idx, dug, ug),
        ("frame_mf", t_idx, dvg, vg),
        ("pixel_mlp", n_idx, dum, um),
        ("frame_mlp", t_idx, dvm, vm),
    ):
        # softplus'(pre) = sigmoid(pre) = 1 - exp(-softplus(pre))
        d_pre = d_eff * (1.0 - np.exp(-eff))
        grads_emb[name] = _scatter_rows(getattr(emb, name).shape[0], idx, d_pre)

    return loss, (grads_theta if want_theta else None), grads_emb


def recon_loss(model: NeuMFModel, X: np.ndarray, n_idx, t_idx, l2_reg: float) -> float:
    loss, _, _ = recon_loss_and_grads(model, X, n_idx, t_idx, l2_reg, want_theta=False, want_emb=False)
    return loss


def sparse_loss_and_grads(model: NeuMFModel, residual: np.ndarray, sparsity_weight: float, want_grads: bool = True):
    """Sparse-signal loss on a batch of precomputed residuals.

    Batch mean of (residual - s)^2 + sparsity_weight * s, with s the
    (non-negative) threshold-network output; gradients flow only into the
    threshold parameters.
    """
    residual = np.asarray(residual, dtype=np.float64).ravel()
    batch = residual.size
    s, cache = threshold_forward(model, residual, want_cache=True)
    diff = residual - s
    loss = float((diff * diff).mean() + sparsity_weight * s.mean())
    if not want_grads:
        return loss, None

    ds = (-2.0 * diff + sparsity_weight) / batch
    da4 = (ds * sigmoid(cache["a4"]))[:, None]
    p = model.thresh_params
    grads: dict[str, np.ndarray] = {}
    grads["thr_w4"] = cache["post"][-1].T @ da4
    grads["thr_b4"] = da4.sum(axis=0)
    delta = da4 @ p["thr_w4"].T
    _backprop_chain(delta, p, "thr", 3, cache["pre"], cache["post"], cache["r"], grads)
    return loss, grads


def sparse_loss(model: NeuMFModel, residual, sparsity_weight: float) -> float:
    loss, _ = sparse_loss_and_grads(model, residual, sparsity_weight, want_grads=False)
    return loss


def _gauss1d(length: int, sigma: float = 1.0) -> np.ndarray:
    radius = length // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _odd_clamp(kernel_len: int, grid_len: int) -> int:
    if kernel_len <= grid_len:
        return kernel_len
    return grid_len if grid_len % 2 == 1 else max(grid_len - 1, 1)


def smoothing_kernels(height: int, width: int, n_frames: int, size: int = 15, sigma: float = 1.0):
    """Spatial (2D) and temporal (1D) Gaussian kernels, clamped to the grid."""
    k_h = _gauss1d(_odd_clamp(size, height), sigma)
    k_w = _gauss1d(_odd_clamp(size, width), sigma)
    k_t = _gauss1d(_odd_clamp(size, n_frames), sigma)
    return np.outer(k_h, k_w), k_t


def gaussian_smoothing_loss_and_grads(
    embeddings: EmbeddingTables,
    height: int,
    width: int,
    kernel_size: int = 15,
    sigma: float = 1.0,
    want_grads: bool = True,
):
    """Penalty on spatial/temporal variation of the effective embeddings.

    Each embedding family E contributes ||E - Ker * E||_F^2, with spatial
    tables reshaped to (h, w, channels) and blurred per channel by a 2D
    Gaussian, temporal tables blurred along t (reflective borders).  With
    reflective borders and a symmetric kernel the blur operator is symmetric,
    so the gradient is 2 (I - Ker)((I - Ker) E).
    """
    n_pixels = embeddings.pixel_mf.shape[0]
    n_frames = embeddings.frame_mf.shape[0]
    if n_pixels != height * width:
        raise ValueError(f"N={n_pixels} does not match {height}x{width}")
    kernel2d, kernel1d = smoothing_kernels(height, width, n_frames, kernel_size, sigma)

    loss = 0.0
    grads: dict[str, np.ndarray] = {}
    for name in EMBEDDING_ORDER:
        pre = getattr(embeddings, name)
        eff = softplus(pre)
        spatial = name.startswith("pixel")
        if spatial:
            field = eff.reshape(height, width, -1)
            blur = lambda f: np.stack(
                [correlate(f[:, :, c], kernel2d, mode="reflect") for c in range(f.shape[2])], axis=2
            )
        else:
            field = eff
            blur = lambda f: correlate1d(f, kernel1d, axis=0, mode="reflect")
        diff = field - blur(field)
        loss += float((diff * diff).sum())
        if want_grads:
            d_eff = 2.0 * (diff - blur(diff))
            d_eff = d_eff.reshape(eff.shape)
            grads[name] = d_eff * (1.0 - np.exp(-eff))
    return loss, (grads if want_grads else None)


def gaussian_smoothing_loss(embeddings: EmbeddingTables, height: int, width: int, **kwargs) -> float:
    loss, _ = gaussian_smoothing_loss_and_grads(embeddings, height, width, want_grads=False, **kwargs)
    return loss
