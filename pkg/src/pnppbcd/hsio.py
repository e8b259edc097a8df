"""Binary scene/mask file formats and the CSV surfaces.

HSI file: magic ``HSI1``, three little-endian uint32 dims (n1, n2, n3), then
``n1*n2*n3`` little-endian float64 values ordered first-spatial-index
fastest, then second, then band (the tensor storage order).

Mask file: magic ``MSK1``, two little-endian uint32 dims (n1, n2), then
``n1*n2`` bytes, each 0 or 1, in the same spatial order.

CSV files use '.' decimals, 17-significant-digit floats and LF line
terminators, so identical data round-trips to identical bytes.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor3

__all__ = [
    "HsiFormatError",
    "load_hsi",
    "save_hsi",
    "load_mask",
    "save_mask",
    "write_scores_csv",
    "read_scores_csv",
    "write_roc_csv",
    "write_history_csv",
]

_HSI_MAGIC = b"HSI1"
_MSK_MAGIC = b"MSK1"
_MAX_DIM = 2**31


class HsiFormatError(ValueError):
    """Raised when a scene or mask file is malformed."""


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise HsiFormatError(f"file truncated while reading {what}")
    return buf


def save_hsi(path, t: Tensor3) -> None:
    n1, n2, n3 = t.dims
    with open(path, "wb") as f:
        f.write(_HSI_MAGIC)
        f.write(np.array([n1, n2, n3], dtype="<u4").tobytes())
        f.write(np.asfortranarray(t.data).astype("<f8").tobytes(order="F"))


def load_hsi(path) -> Tensor3:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != _HSI_MAGIC:
            raise HsiFormatError(f"bad magic {magic!r}, expected {_HSI_MAGIC!r}")
        dims = np.frombuffer(_read_exact(f, 12, "header"), dtype="<u4")
        n1, n2, n3 = (int(d) for d in dims)
        if min(n1, n2, n3) < 1 or max(n1, n2, n3) >= _MAX_DIM:
            raise HsiFormatError(f"invalid dimensions ({n1}, {n2}, {n3})")
        count = n1 * n2 * n3
        payload = _read_exact(f, 8 * count, "payload")
        if f.read(1):
            raise HsiFormatError("trailing bytes after payload")
    data = np.frombuffer(payload, dtype="<f8").reshape((n1, n2, n3), order="F")
    try:
        return Tensor3(data)
    except ValueError as exc:
        raise HsiFormatError(str(exc)) from exc


def save_mask(path, mask) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    binary = (mask != 0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(_MSK_MAGIC)
        f.write(np.array(binary.shape, dtype="<u4").tobytes())
        f.write(binary.tobytes(order="F"))


def load_mask(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != _MSK_MAGIC:
            raise HsiFormatError(f"bad magic {magic!r}, expected {_MSK_MAGIC!r}")
        dims = np.frombuffer(_read_exact(f, 8, "header"), dtype="<u4")
        n1, n2 = (int(d) for d in dims)
        if min(n1, n2) < 1 or max(n1, n2) >= _MAX_DIM:
            raise HsiFormatError(f"invalid dimensions ({n1}, {n2})")
        payload = _read_exact(f, n1 * n2, "payload")
        if f.read(1):
            raise HsiFormatError("trailing bytes after payload")
    values = np.frombuffer(payload, dtype=np.uint8)
    if not np.isin(values, (0, 1)).all():
        raise HsiFormatError("mask bytes must be 0 or 1")
    return values.reshape((n1, n2), order="F").astype(bool)


# ---------------------------------------------------------------------------
# CSV surfaces
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_scores_csv(path, scores) -> None:
    """Per-pixel scores, row-major over (row, col), 1-based indices."""
    scores = np.asarray(scores, dtype=np.float64)
    with open(path, "w", newline="\n") as f:
        f.write("row,col,score\n")
        for i in range(scores.shape[0]):
            for j in range(scores.shape[1]):
                f.write(f"{i + 1},{j + 1},{_fmt(scores[i, j])}\n")


def read_scores_csv(path) -> np.ndarray:
    with open(path, "r", newline="") as f:
        header = f.readline().strip()
        if header != "row,col,score":
            raise HsiFormatError(f"unexpected scores header {header!r}")
        rows, cols, vals = [], [], []
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                i, j, v = line.split(",")
                rows.append(int(i))
                cols.append(int(j))
                vals.append(float(v))
            except ValueError as exc:
                raise HsiFormatError(f"bad scores row {line!r}") from exc
    if not rows:
        raise HsiFormatError("scores file contains no data rows")
    n1, n2 = max(rows), max(cols)
    if len(rows) != n1 * n2:
        raise HsiFormatError("scores file does not cover a full grid")
    out = np.full((n1, n2), np.nan)
    out[np.array(rows) - 1, np.array(cols) - 1] = vals
    if np.isnan(out).any():
        raise HsiFormatError("scores file has duplicate or missing pixels")
    return out


def write_roc_csv(path, roc) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("threshold,far,pd\n")
        for t, far, pd in zip(roc.thresholds, roc.far, roc.pd):
            f.write(f"{_fmt(t)},{_fmt(far)},{_fmt(pd)}\n")


def write_history_csv(path, history) -> None:
    """Iteration log; one row per recorded iteration."""
    with open(path, "w", newline="\n") as f:
        f.write("iter,F,decrease_margin,res_S,res_E,res_Z,rel_dS\n")
        for rec in history:
            f.write(
                f"{rec.iteration},{_fmt(rec.objective)},{_fmt(rec.decrease_margin)},"
                f"{_fmt(rec.res_sparse)},{_fmt(rec.res_basis)},{_fmt(rec.res_coeff)},"
                f"{_fmt(rec.rel_sparse_change)}\n"
            )
