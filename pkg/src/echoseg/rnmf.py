"""Robust non-negative matrix factorization X ~ U V^T + S with sparse S.

Block-coordinate descent: multiplicative (Lee-Seung style) updates for U
and V against the clipped residual (X - S)+, then the exact non-negative
soft-threshold for S.  Every step is monotone, so the objective trace is
non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .video import PixelMatrix

_EPS = 1e-12


@dataclass
class RnmfResult:
    U: np.ndarray  # (N, K), non-negative
    V: np.ndarray  # (T, K), non-negative
    S: np.ndarray  # (N, T), non-negative sparse remainder
    objective_trace: np.ndarray  # objective after each iteration

    @property
    def rank(self) -> int:
        return self.U.shape[1]


def _objective(X: np.ndarray, U: np.ndarray, V: np.ndarray, S: np.ndarray, lam: float) -> float:
    resid = X - U @ V.T - S
    return float(np.sum(resid * resid) + lam * S.sum())


def rnmf_decompose(
    X: PixelMatrix,
    rank: int = 2,
    sparsity_weight: float = 0.3,
    iters: int = 200,
    tol: float = 1e-5,
    seed: int = 0,
) -> RnmfResult:
    """Minimize ||X - U V^T - S||_F^2 + sparsity_weight * ||S||_1, all factors >= 0.

    Stops after `iters` iterations or when the relative objective change
    drops below `tol`.
    """
    M = np.asarray(X.data, dtype=np.float64)
    n, t = M.shape
    if rank < 1 or rank > min(n, t):
        raise ConfigError(f"rank {rank} not in [1, min(N, T)={min(n, t)}]")
    if sparsity_weight <= 0:
        raise ConfigError("sparsity_weight must be > 0")

    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(M.mean(), _EPS) / rank)
    U = np.abs(rng.normal(0.0, scale, size=(n, rank)))
    V = np.abs(rng.normal(0.0, scale, size=(t, rank)))
    S = np.zeros_like(M)

    trace = []
    prev = _objective(M, U, V, S, sparsity_weight)
    for _ in range(iters):
        Y = np.maximum(M - S, 0.0)
        U *= (Y @ V) / (U @ (V.T @ V) + _EPS)
        V *= (Y.T @ U) / (V @ (U.T @ U) + _EPS)
        S = np.maximum(M - U @ V.T - sparsity_weight / 2.0, 0.0)

        obj = _objective(M, U, V, S, sparsity_weight)
        if not np.isfinite(obj):
            raise NumericError(f"non-finite objective at iteration {len(trace)}")
        trace.append(obj)
        if abs(prev - obj) < tol * max(prev, _EPS):
            break
        prev = obj

    return RnmfResult(U=U, V=V, S=S, objective_trace=np.array(trace))
