"""Overlap metrics, report aggregation and the paired one-sided t-test."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

log = logging.getLogger(__name__)


def _counts(m: np.ndarray, gs: np.ndarray) -> tuple[int, int, int]:
    m = np.asarray(m, dtype=bool)
    gs = np.asarray(gs, dtype=bool)
    if m.shape != gs.shape:
        raise ValueError(f"mask shapes differ: {m.shape} vs {gs.shape}")
    return int((m & gs).sum()), int(m.sum()), int(gs.sum())


def window_accuracy(m: np.ndarray, gs: np.ndarray) -> float:
    """Fraction of predicted pixels that land inside the gold standard."""
    inter, size_m, _ = _counts(m, gs)
    if size_m == 0:
        raise ValueError("window accuracy undefined for an empty prediction")
    return inter / size_m


def iou(m: np.ndarray, gs: np.ndarray) -> float:
    inter, size_m, size_gs = _counts(m, gs)
    union = size_m + size_gs - inter
    if union == 0:
        log.info("both masks empty; IoU defined as 1.0 by convention")
        return 1.0
    return inter / union


def dice(m: np.ndarray, gs: np.ndarray) -> float:
    inter, size_m, size_gs = _counts(m, gs)
    if size_m + size_gs == 0:
        log.info("both masks empty; Dice defined as 1.0 by convention")
        return 1.0
    return 2.0 * inter / (size_m + size_gs)


@dataclass
class EvalReport:
    """Per-item scores plus aggregates; counts use strict thresholds."""

    accuracy: list[float] = field(default_factory=list)  # window accuracy I per item
    iou: list[float] = field(default_factory=list)
    dice: list[float] = field(default_factory=list)
    p_value_vs_baseline: float | None = None

    def __post_init__(self):
        for i_val, d_val in zip(self.iou, self.dice):
            expected = 2.0 * i_val / (1.0 + i_val)
            assert abs(d_val - expected) < 1e-9, "Dice inconsistent with IoU"

    @property
    def n_items(self) -> int:
        return len(self.accuracy)

    @property
    def i65(self) -> int:
        return sum(1 for v in self.accuracy if v > 0.65)

    @property
    def i85(self) -> int:
        return sum(1 for v in self.accuracy if v > 0.85)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracy))

    @property
    def mean_iou(self) -> float:
        return float(np.mean(self.iou))

    @property
    def mean_dice(self) -> float:
        return float(np.mean(self.dice))

    def to_dict(self) -> dict:
        return {
            "items": [
                {"accuracy": a, "iou": i, "dice": d}
                for a, i, d in zip(self.accuracy, self.iou, self.dice)
            ],
            "n_items": self.n_items,
            "i65": self.i65,
            "i85": self.i85,
            "mean_accuracy": self.mean_accuracy,
            "mean_iou": self.mean_iou,
            "mean_dice": self.mean_dice,
            "p_value_vs_baseline": self.p_value_vs_baseline,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["item", "accuracy", "iou", "dice"])
            for i, row in enumerate(zip(self.accuracy, self.iou, self.dice)):
                writer.writerow([i, *map(repr, row)])
            writer.writerow(["aggregate", repr(self.mean_accuracy), repr(self.mean_iou), repr(self.mean_dice)])
            writer.writerow(["i65", self.i65, "i85", self.i85])


def aggregate(items: list[tuple[float, float, float]]) -> EvalReport:
    """Build a report from (accuracy, IoU, Dice) triples."""
    if not items:
        raise ValueError("cannot aggregate an empty item list")
    acc, ious, dices = (list(col) for col in zip(*items))
    return EvalReport(accuracy=acc, iou=ious, dice=dices)


def student_t_sf(t_stat: float, dof: float) -> float:
    """Upper-tail probability of Student's t via the regularized incomplete beta."""
    if dof <= 0:
        raise ValueError("degrees of freedom must be positive")
    x = dof / (dof + t_stat * t_stat)
    tail = 0.5 * float(betainc(dof / 2.0, 0.5, x))
    return tail if t_stat >= 0 else 1.0 - tail


def paired_ttest_onesided(a, b) -> float:
    """p-value for the alternative mean(a - b) > 0 on paired samples.

    Zero-variance differences degenerate to p=0.5 (zero mean) or to 0/1 by
    the sign of the mean.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two equal-length 1D samples with n >= 2")
    diff = a - b
    mean = diff.mean()
    std = diff.std(ddof=1)
    if std == 0:
        return 0.5 if mean == 0 else (0.0 if mean > 0 else 1.0)
    t_stat = mean / (std / np.sqrt(diff.size))
    return student_t_sf(float(t_stat), diff.size - 1)
