"""Alternating training of the factorization model.

Each batch runs three Adam sub-steps: reconstruction loss into the network
weights, reconstruction loss into the embeddings (optionally plus the
smoothing penalty), then the sparse loss into the threshold network with the
reconstruction recomputed.  Every group keeps its own optimizer state, and
embedding tables use lazy (touched-rows-only) moment updates so untouched
rows stay bit-identical to their initialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericError
from ..rnmf import rnmf_decompose
from ..video import PixelMatrix
from .losses import (
    gaussian_smoothing_loss_and_grads,
    recon_loss_and_grads,
    sparse_loss_and_grads,
)
from .model import NeuMFModel, forward_batch, init_mfi, init_random, reconstruct_full, threshold_forward


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    batch_size: int = 10_000
    epochs: int = 15
    l2_reg: float = 0.1          # embedding norm penalty in the reconstruction loss
    sparsity_weight: float = 0.3  # l1 coefficient in the sparse loss
    mf_dim: int = 2
    mlp_dim: int = 1
    gs_weight: float = 0.0       # smoothing penalty weight; 0 disables it
    alternation: str = "batch"   # "batch" or "epoch" granularity of the freeze schedule
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("learning_rate, batch_size, epochs must be positive")
        if self.mf_dim < 1 or self.mlp_dim < 1 or self.l2_reg < 0 or self.gs_weight < 0:
            raise ConfigError("invalid model hyperparameters")
        if self.alternation not in ("batch", "epoch"):
            raise ConfigError(f"unknown alternation {self.alternation!r}")


@dataclass
class LossTrace:
    """Per-epoch reconstruction/sparsity diagnostics, per-entry normalized."""

    epochs: list[int] = field(default_factory=list)
    l2x: list[float] = field(default_factory=list)
    l1: list[float] = field(default_factory=list)
    l2xs: list[float] = field(default_factory=list)

    def append(self, epoch: int, l2x: float, l1: float, l2xs: float) -> None:
        if not (np.isfinite(l2x) and np.isfinite(l1) and np.isfinite(l2xs)):
            raise NumericError(f"non-finite loss trace at epoch {epoch}")
        self.epochs.append(epoch)
        self.l2x.append(l2x)
        self.l1.append(l1)
        self.l2xs.append(l2xs)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,l2x,l1,l2xs\n")
            for row in zip(self.epochs, self.l2x, self.l1, self.l2xs):
                fh.write("{},{!r},{!r},{!r}\n".format(*row))

    @classmethod
    def from_csv(cls, path) -> "LossTrace":
        trace = cls()
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "epoch,l2x,l1,l2xs":
                raise ValueError(f"unexpected trace header {header!r}")
            for line in fh:
                e, a, b, c = line.strip().split(",")
                trace.append(int(e), float(a), float(b), float(c))
        return trace


class Adam:
    """Adam with optional lazy row updates for embedding tables."""

    def __init__(self, shapes: dict[str, tuple], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], rows=None) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            sel = slice(None) if rows is None or rows.get(k) is None else rows[k]
            gs = g[sel]
            m[sel] = self.beta1 * m[sel] + (1 - self.beta1) * gs
            v[sel] = self.beta2 * v[sel] + (1 - self.beta2) * (gs * gs)
            params[k][sel] -= self.lr * (m[sel] / bc1) / (np.sqrt(v[sel] / bc2) + self.eps)


def _trace_values(model: NeuMFModel, M: np.ndarray) -> tuple[float, float, float]:
    """Full-matrix l2x, l1, l2xs normalized by the entry count."""
    xhat = reconstruct_full(model)
    resid = M - xhat
    s = threshold_forward(model, resid.ravel()).reshape(resid.shape)
    count = M.size
    l2x = float(np.linalg.norm(resid) / np.sqrt(count))
    l1 = float(np.abs(s).sum() / count)
    l2xs = float(np.linalg.norm(resid - s) / np.sqrt(count))
    return l2x, l1, l2xs


def _emb_shapes(model: NeuMFModel) -> dict[str, tuple]:
    return {k: v.shape for k, v in model.embeddings.as_dict().items()}


def _shapes(params: dict[str, np.ndarray]) -> dict[str, tuple]:
    return {k: v.shape for k, v in params.items()}


class _Trainer:
    def __init__(self, model: NeuMFModel, M: np.ndarray, cfg: TrainConfig, t_limit: int | None, height=None, width=None):
        self.model = model
        self.M = M
        self.cfg = cfg
        self.t_limit = t_limit if t_limit is not None else M.shape[1]
        self.height, self.width = height, width
        self.opt_theta = Adam(_shapes(model.recon_params), cfg.learning_rate)
        self.opt_emb = Adam(_emb_shapes(model), cfg.learning_rate)
        self.opt_thr = Adam(_shapes(model.thresh_params), cfg.learning_rate)

    def _check(self, loss: float, epoch: int, batch: int, stage: str) -> None:
        if not np.isfinite(loss):
            raise NumericError(f"non-finite {stage} loss at epoch {epoch}, batch {batch}")

    def step_theta(self, n_idx, t_idx, epoch, batch) -> None:
        loss, g_theta, _ = recon_loss_and_grads(
            self.model, self.M, n_idx, t_idx, self.cfg.l2_reg, want_emb=False
        )
        self._check(loss, epoch, batch, "reconstruction")
        self.opt_theta.step(self.model.recon_params, g_theta)

    def step_embeddings(self, n_idx, t_idx, epoch, batch) -> None:
        cfg = self.cfg
        loss, _, g_emb = recon_loss_and_grads(
            self.model, self.M, n_idx, t_idx, cfg.l2_reg, want_theta=False
        )
        self._check(loss, epoch, batch, "reconstruction")
        emb = self.model.embeddings
        if cfg.gs_weight > 0:
            gs_loss, gs_grads = gaussian_smoothing_loss_and_grads(emb, self.height, self.width)
            self._check(gs_loss, epoch, batch, "smoothing")
            for k, g in gs_grads.items():
                g_emb[k] += cfg.gs_weight * g
            rows = {
                "pixel_mf": None,
                "pixel_mlp": None,
                "frame_mf": np.arange(self.t_limit),
                "frame_mlp": np.arange(self.t_limit),
            }
        else:
            rows = {
                "pixel_mf": np.unique(n_idx),
                "pixel_mlp": np.unique(n_idx),
                "frame_mf": np.unique(t_idx),
                "frame_mlp": np.unique(t_idx),
            }
        self.opt_emb.step(emb.as_dict(), g_emb, rows=rows)

    def step_threshold(self, n_idx, t_idx, epoch, batch) -> None:
        xhat = forward_batch(self.model, n_idx, t_idx)
        residual = self.M[n_idx, t_idx] - xhat
        loss, g_thr = sparse_loss_and_grads(self.model, residual, self.cfg.sparsity_weight)
        self._check(loss, epoch, batch, "sparse")
        self.opt_thr.step(self.model.thresh_params, g_thr)


def train(
    model: NeuMFModel,
    X: PixelMatrix,
    cfg: TrainConfig,
    t_limit: int | None = None,
) -> tuple[NeuMFModel, LossTrace]:
    """Train a copy of the model on X; the input model is left untouched.

    t_limit restricts training to entries with frame index below it; frame
    embedding rows at or past the limit keep their initialization exactly.
    The returned trace holds full-matrix losses before training (epoch 0) and
    after every epoch; epochs=0 returns the model unchanged with an empty
    trace.
    """
    M = np.asarray(X.data, dtype=np.float64)
    n_pixels, n_frames = M.shape
    if model.n_pixels != n_pixels or model.n_frames != n_frames:
        raise ConfigError(f"model {model.n_pixels}x{model.n_frames} does not match matrix {M.shape}")
    if t_limit is not None and not 1 <= t_limit <= n_frames:
        raise ConfigError(f"t_limit {t_limit} outside [1, {n_frames}]")
    if cfg.gs_weight > 0 and X.height * X.width != n_pixels:
        raise ConfigError("smoothing penalty needs a consistent pixel grid")

    model = model.copy()
    trace = LossTrace()
    if cfg.epochs == 0:
        return model, trace

    trainer = _Trainer(model, M, cfg, t_limit, X.height, X.width)
    entries = n_pixels * trainer.t_limit
    batch_size = min(cfg.batch_size, entries)
    rng = np.random.default_rng(cfg.seed)

    trace.append(0, *_trace_values(model, M))
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(entries)
        starts = range(0, entries, batch_size)
        if cfg.alternation == "batch":
            for b, start in enumerate(starts):
                idx = perm[start : start + batch_size]
                n_idx, t_idx = idx // trainer.t_limit, idx % trainer.t_limit
                trainer.step_theta(n_idx, t_idx, epoch, b)
                trainer.step_embeddings(n_idx, t_idx, epoch, b)
                trainer.step_threshold(n_idx, t_idx, epoch, b)
        else:
            for stage in (trainer.step_theta, trainer.step_embeddings, trainer.step_threshold):
                for b, start in enumerate(starts):
                    idx = perm[start : start + batch_size]
                    stage(idx // trainer.t_limit, idx % trainer.t_limit, epoch, b)
        trace.append(epoch, *_trace_values(model, M))
    return model, trace


def extract_sparse_signal(model: NeuMFModel, X: PixelMatrix) -> np.ndarray:
    """Thresholded reconstruction remainder as an (h, w, T) volume."""
    M = np.asarray(X.data, dtype=np.float64)
    resid = M - reconstruct_full(model)
    sparse = threshold_forward(model, resid.ravel()).reshape(M.shape)
    return sparse.reshape(X.height, X.width, X.n_frames)


def _part_diagnostics(model: NeuMFModel, M: np.ndarray, cols: np.ndarray) -> dict[str, float]:
    sub = M[:, cols]
    n_idx, t_idx = np.divmod(np.arange(sub.size), len(cols))
    xhat = forward_batch(model, n_idx, cols[t_idx]).reshape(sub.shape)
    resid = sub - xhat
    s = threshold_forward(model, resid.ravel()).reshape(sub.shape)
    count = sub.size
    return {
        "l2x": float(np.linalg.norm(resid) / np.sqrt(count)),
        "l1": float(np.abs(s).sum() / count),
        "l2xs": float(np.linalg.norm(resid - s) / np.sqrt(count)),
    }


def _fit_heldout_frames(model: NeuMFModel, M: np.ndarray, split_t: int, cfg: TrainConfig) -> NeuMFModel:
    """Fit frame-embedding rows past the split, everything else frozen."""
    model = model.copy()
    n_pixels, n_frames = M.shape
    heldout = np.arange(split_t, n_frames)
    entries = n_pixels * len(heldout)
    batch_size = min(cfg.batch_size, entries)
    rng = np.random.default_rng(cfg.seed + 1)
    tables = model.embeddings.as_dict()
    opt = Adam({k: tables[k].shape for k in ("frame_mf", "frame_mlp")}, cfg.learning_rate)
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(entries)
        for b, start in enumerate(range(0, entries, batch_size)):
            idx = perm[start : start + batch_size]
            n_idx = idx // len(heldout)
            t_idx = heldout[idx % len(heldout)]
            loss, _, g_emb = recon_loss_and_grads(model, M, n_idx, t_idx, cfg.l2_reg, want_theta=False)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite held-out fit loss at epoch {epoch}, batch {b}")
            grads = {k: g_emb[k] for k in ("frame_mf", "frame_mlp")}
            rows = {k: np.unique(t_idx) for k in grads}
            opt.step(tables, grads, rows=rows)
    return model


def deploy_partial(
    X: PixelMatrix,
    split_t: int,
    cfg: TrainConfig,
    mode: str = "frozen",
    init: str = "mfi",
    rnmf_iters: int = 200,
) -> tuple[NeuMFModel, np.ndarray, dict]:
    """Train on frames before split_t only, then extract the sparse signal over all T.

    mode "frozen" leaves the held-out frame embeddings at their
    initialization; mode "fit" refits them afterwards with everything else
    frozen.  Returns (model, sparse volume, per-part diagnostics).
    """
    M = np.asarray(X.data, dtype=np.float64)
    n_pixels, n_frames = M.shape
    if not 1 <= split_t < n_frames:
        raise ConfigError(f"split_t {split_t} outside [1, {n_frames})")
    if mode not in ("frozen", "fit"):
        raise ConfigError(f"unknown deploy mode {mode!r}")

    if init == "mfi":
        head = PixelMatrix(data=M[:, :split_t], height=X.height, width=X.width)
        factors = rnmf_decompose(
            head, rank=cfg.mf_dim, sparsity_weight=cfg.sparsity_weight, iters=rnmf_iters, seed=cfg.seed
        )
        model0 = init_mfi(factors, n_pixels, n_frames, cfg)
    elif init == "ri":
        model0 = init_random(n_pixels, n_frames, cfg)
    else:
        raise ConfigError(f"unknown init {init!r}")

    trained, _ = train(model0, X, cfg, t_limit=split_t)
    if mode == "fit":
        trained = _fit_heldout_frames(trained, M, split_t, cfg)

    sparse = extract_sparse_signal(trained, X)
    diagnostics = {
        "trained": _part_diagnostics(trained, M, np.arange(split_t)),
        "heldout": _part_diagnostics(trained, M, np.arange(split_t, n_frames)),
        "split_t": split_t,
        "mode": mode,
    }
    return trained, sparse, diagnostics
