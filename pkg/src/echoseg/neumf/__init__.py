"""Neural matrix factorization: model, losses, training, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .losses import (
    gaussian_smoothing_loss,
    gaussian_smoothing_loss_and_grads,
    recon_loss,
    recon_loss_and_grads,
    sparse_loss,
    sparse_loss_and_grads,
)
from .model import (
    EmbeddingTables,
    NeuMFModel,
    forward,
    forward_batch,
    init_mfi,
    init_random,
    inv_softplus,
    reconstruct_full,
    softplus,
    threshold_apply,
)
from .training import (
    Adam,
    LossTrace,
    TrainConfig,
    deploy_partial,
    extract_sparse_signal,
    train,
)

__all__ = [
    "Adam",
    "EmbeddingTables",
    "LossTrace",
    "NeuMFModel",
    "TrainConfig",
    "deploy_partial",
    "extract_sparse_signal",
    "forward",
    "forward_batch",
    "gaussian_smoothing_loss",
    "gaussian_smoothing_loss_and_grads",
    "init_mfi",
    "init_random",
    "inv_softplus",
    "load_checkpoint",
    "recon_loss",
    "recon_loss_and_grads",
    "reconstruct_full",
    "save_checkpoint",
    "softplus",
    "sparse_loss",
    "sparse_loss_and_grads",
    "threshold_apply",
    "train",
]
