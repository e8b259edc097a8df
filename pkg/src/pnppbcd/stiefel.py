"""Projection onto matrices with orthonormal columns, tangent-space
projection, and the Riemannian gradient of the data-fit term."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor3, unfold

__all__ = [
    "StiefelPoint",
    "project_stiefel",
    "tangent_project",
    "riemannian_grad_fit",
    "signed_svd",
]

_ORTHO_TOL = 1e-10


class StiefelPoint:
    """An n x r matrix with orthonormal columns (n >= r).

    Orthonormality is enforced at construction: if the drift
    ``||E^T E - I||_F`` exceeds 1e-10 the matrix is re-orthonormalized by
    polar projection.  ``rank_warning`` is set when the point came from
    projecting a (numerically) rank-deficient matrix, in which case the
    projection is not unique; solver diagnostics consume the flag.
    """

    __slots__ = ("matrix", "rank_warning")

    def __init__(self, matrix, rank_warning=False):
        m = np.array(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < m.shape[1]:
            raise ValueError(f"expected a tall matrix, got shape {m.shape}")
        if not np.isfinite(m).all():
            raise ValueError("entries must be finite")
        r = m.shape[1]
        drift = np.linalg.norm(m.T @ m - np.eye(r))
        if drift > _ORTHO_TOL:
            u, _, vt = signed_svd(m)
            m = u @ vt
        self.matrix = m
        self.rank_warning = bool(rank_warning)

    @property
    def shape(self):
        return self.matrix.shape

    def __repr__(self):
        return f"StiefelPoint(shape={self.shape})"


def signed_svd(m):
    """Reduced SVD with a fixed sign convention: the largest-magnitude entry
    of each left singular vector is nonnegative.  Makes the exposed factors
    deterministic; the product U V^T is unaffected."""
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    for i in range(u.shape[1]):
        j = int(np.argmax(np.abs(u[:, i])))
        if u[j, i] < 0.0:
            u[:, i] = -u[:, i]
            vt[i, :] = -vt[i, :]
    return u, s, vt


def project_stiefel(m) -> StiefelPoint:
    """Nearest matrix with orthonormal columns, via the polar factor U V^T of
    a reduced SVD.

    If ``m`` is numerically rank deficient the minimizer is not unique; the
    U V^T of the computed SVD is returned with ``rank_warning`` set.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {m.shape}")
    u, s, vt = signed_svd(m)
    cutoff = s[0] * max(m.shape) * np.finfo(np.float64).eps if s.size else 0.0
    deficient = bool(s.size == 0 or s[-1] <= cutoff)
    return StiefelPoint(u @ vt, rank_warning=deficient)


def tangent_project(x: StiefelPoint, y) -> np.ndarray:
    """Project y onto the tangent space at x: ``y - x (x^T y + y^T x) / 2``."""
    y = np.asarray(y, dtype=np.float64)
    e = x.matrix
    if y.shape != e.shape:
        raise ValueError(f"shape mismatch: point {e.shape}, input {y.shape}")
    sym = e.T @ y
    sym = sym + sym.T
    return y - 0.5 * (e @ sym)


def riemannian_grad_fit(
    z: Tensor3, e: StiefelPoint, s: Tensor3, o: Tensor3, delta: float
) -> np.ndarray:
    """Riemannian gradient of the data-fit term with respect to the basis.

    Equals the tangent projection at ``e`` of ``-delta * (O - S)_(3) Z_(3)^T``;
    by the shared-gradient identity this also matches the projected Euclidean
    gradient of the quadratic form of the fit term.
    """
    if s.dims != o.dims:
        raise ValueError(f"shape mismatch: {s.dims} vs {o.dims}")
    resid = unfold(o, 3) - unfold(s, 3)
    grad = -delta * (resid @ unfold(z, 3).T)
    return tangent_project(e, grad)
