"""Anomaly scoring, the global Mahalanobis (RX) baseline, and ROC/AUC."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor3

__all__ = ["RocResult", "anomaly_scores", "rx_scores", "roc_auc"]

_RIDGE = 1e-6


@dataclass(frozen=True)
class RocResult:
    """ROC sweep: one point per distinct score threshold, plus the trapezoid
    area.  ``far`` and ``pd`` are nondecreasing and start/end at (0,0)/(1,1)."""

    thresholds: np.ndarray
    far: np.ndarray
    pd: np.ndarray
    auc: float


def anomaly_scores(s: Tensor3) -> np.ndarray:
    """Per-pixel score map: the l2 norm of each mode-3 fiber of s."""
    return np.sqrt(np.einsum("ijk,ijk->ij", s.data, s.data))


def rx_scores(o: Tensor3) -> np.ndarray:
    """Global Mahalanobis distance of every pixel spectrum to the scene mean
    under the (ridge-regularized) sample covariance."""
    n1, n2, n3 = o.dims
    pixels = o.data.reshape(n1 * n2, n3, order="F")
    # center on the first pixel before taking the mean so that a scene of
    # identical spectra yields exactly zero deviations
    shifted = pixels - pixels[0]
    dev = shifted - shifted.mean(axis=0)
    if not dev.any():
        return np.zeros((n1, n2))
    cov = (dev.T @ dev) / max(n1 * n2 - 1, 1)
    cov = cov + (_RIDGE * np.trace(cov) / n3) * np.eye(n3)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        warnings.warn("covariance is numerically singular even after ridge; "
                      "falling back to pseudo-inverse", RuntimeWarning)
        scores = np.einsum("ik,kl,il->i", dev, np.linalg.pinv(cov), dev)
        return np.maximum(scores, 0.0).reshape(n1, n2, order="F")
    white = np.linalg.solve(chol, dev.T)
    scores = np.einsum("ki,ki->i", white, white)
    return scores.reshape(n1, n2, order="F")


def roc_auc(scores, truth) -> RocResult:
    """ROC curve and area for a score map against a binary truth mask.

    Every distinct score value is one threshold (prediction: score >= t), so
    tied scores contribute diagonal segments; the area is the trapezoid
    integral over the false-alarm axis.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    truth = np.asarray(truth).ravel().astype(bool)
    if scores.shape != truth.shape:
        raise ValueError("scores and truth must have the same number of pixels")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("truth mask must contain at least one positive and one negative")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_truth = truth[order]
    # last index of each tied block = cumulative counts at that threshold
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    last = np.concatenate([distinct, [scores.size - 1]])
    tp = np.cumsum(sorted_truth)[last]
    fp = (last + 1) - tp
    pd = np.concatenate([[0.0], tp / n_pos, [1.0]])
    far = np.concatenate([[0.0], fp / n_neg, [1.0]])
    thresholds = np.concatenate([[np.inf], sorted_scores[last], [-np.inf]])
    auc = float(np.trapezoid(pd, far))
    return RocResult(thresholds=thresholds, far=far, pd=pd, auc=auc)
