"""Dense third-order tensors with mode-k unfolding and the mode-3 product.

Conventions
-----------
A tensor of shape ``(n1, n2, n3)`` is stored as a Fortran-ordered float64
array, so the first index varies fastest in memory.  The mode-3 unfolding is
then a zero-copy reinterpretation: column ``j`` of the unfolded matrix
enumerates the spatial positions ``(i1, i2)`` with ``i1`` fastest,
``j = 1 + (i1 - 1) + (i2 - 1) * n1`` in 1-based terms.

Public entry points that take element indices (``fiber3``, the mode argument
of ``unfold``/``fold``) are 1-based, matching the usual mathematical
convention; everything is 0-based internally.  This is the only place the
boundary is crossed.

All operations are pure functions of their inputs and tensors are never
mutated after construction, so values are safe to share across threads.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor3",
    "unfold",
    "fold",
    "mode3_product",
    "fiber3",
    "frob_norm",
    "inner",
]


class Tensor3:
    """Dense real third-order tensor backed by a Fortran-ordered float64 array.

    Every public operation in this package validates that entries stay
    finite, so a ``Tensor3`` never carries NaN or Inf.
    """

    __slots__ = ("data",)

    def __init__(self, data, copy=True):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3-way array, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"dimensions must be positive, got {arr.shape}")
        if copy:
            arr = np.array(arr, dtype=np.float64, order="F")
        elif not arr.flags.f_contiguous:
            arr = np.asfortranarray(arr)
        if not np.isfinite(arr).all():
            raise ValueError("tensor entries must be finite")
        self.data = arr

    @property
    def dims(self):
        return self.data.shape

    @classmethod
    def zeros(cls, dims):
        return cls(np.zeros(dims, dtype=np.float64, order="F"), copy=False)

    def copy(self):
        return Tensor3(self.data.copy(order="F"), copy=False)

    def __repr__(self):
        return f"Tensor3(dims={self.dims})"


def _check_mode(k):
    if k not in (1, 2, 3):
        raise ValueError(f"mode index must be 1, 2 or 3, got {k!r}")


def unfold(t: Tensor3, k: int) -> np.ndarray:
    """Mode-k unfolding: an ``n_k x prod(n_j, j != k)`` matrix.

    Entry ``x[i1, i2, i3]`` lands at row ``i_k`` and column
    ``1 + sum_{l != k} (i_l - 1) * prod_{m < l, m != k} n_m`` (1-based).
    Modes 1 and 3 are views into the tensor storage; the result is marked
    read-only in every case.
    """
    _check_mode(k)
    arr = t.data
    nk = arr.shape[k - 1]
    m = np.moveaxis(arr, k - 1, 0).reshape((nk, -1), order="F")
    m.flags.writeable = False
    return m


def fold(m, k: int, dims) -> Tensor3:
    """Inverse of :func:`unfold`: rebuild a tensor of shape ``dims`` from its
    mode-k unfolding."""
    _check_mode(k)
    n1, n2, n3 = dims
    m = np.asarray(m, dtype=np.float64)
    rest = tuple(d for i, d in enumerate((n1, n2, n3)) if i != k - 1)
    nk = (n1, n2, n3)[k - 1]
    if m.shape != (nk, rest[0] * rest[1]):
        raise ValueError(
            f"matrix shape {m.shape} does not match mode-{k} unfolding of {tuple(dims)}"
        )
    arr = np.moveaxis(m.reshape((nk,) + rest, order="F"), 0, k - 1)
    return Tensor3(arr)


def mode3_product(z: Tensor3, y) -> Tensor3:
    """Mode-3 product ``z x_3 y``: contracts the third mode of ``z`` with the
    columns of ``y``.

    For ``z`` of shape ``(n1, n2, r)`` and ``y`` of shape ``(n, r)`` the
    result has shape ``(n1, n2, n)`` and satisfies
    ``unfold(result, 3) == y @ unfold(z, 3)``.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError("mode-3 factor must be a matrix")
    n1, n2, r = z.dims
    if y.shape[1] != r:
        raise ValueError(
            f"inner dimensions do not match: tensor mode-3 size {r}, matrix has {y.shape[1]} columns"
        )
    out = y @ unfold(z, 3)
    return fold(out, 3, (n1, n2, y.shape[0]))


def fiber3(t: Tensor3, i: int, j: int) -> np.ndarray:
    """Mode-3 fiber at spatial position ``(i, j)``, 1-based."""
    n1, n2, _ = t.dims
    if not (1 <= i <= n1 and 1 <= j <= n2):
        raise IndexError(f"fiber index ({i}, {j}) out of range for dims {t.dims}")
    return np.ascontiguousarray(t.data[i - 1, j - 1, :])


def frob_norm(t: Tensor3) -> float:
    return float(np.linalg.norm(t.data.ravel(order="K")))


def inner(a: Tensor3, b: Tensor3) -> float:
    if a.dims != b.dims:
        raise ValueError(f"shape mismatch: {a.dims} vs {b.dims}")
    return float(np.vdot(a.data.ravel(order="F"), b.data.ravel(order="F")))
