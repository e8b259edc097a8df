"""Seeded synthetic scenes: smooth low-rank background, planted sparse
anomalies, white Gaussian noise.

The background is ``Z x_3 E`` with a random orthonormal basis and smooth
random eigenimages in a roughly [0, 1] range.  Anomaly pixels share one
spectral signature drawn orthogonal to the background subspace (a common
anomalous material) and carry a geometric brightness ladder, so the
strongest objects dominate the scene statistics while the weakest stay well
clear of the noise floor.  The noise level is the standard deviation of the
additive Gaussian term on this [0, 1]-scaled data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor3, mode3_product

__all__ = ["SyntheticSpec", "synth_scene"]

_BRIGHTNESS_SPAN = 6.0  # ratio between strongest and weakest anomaly


@dataclass(frozen=True)
class SyntheticSpec:
    dims: tuple
    rank: int
    anomaly_count: int
    anomaly_magnitude: float
    noise_level: float
    seed: int

    def __post_init__(self):
        n1, n2, n3 = self.dims
        if min(n1, n2, n3) < 1:
            raise ValueError(f"dimensions must be positive, got {self.dims}")
        if not 1 <= self.rank <= n3:
            raise ValueError(f"rank must lie in [1, {n3}], got {self.rank}")
        if not 0 <= self.anomaly_count <= n1 * n2:
            raise ValueError(f"anomaly count must lie in [0, {n1 * n2}]")
        if self.anomaly_magnitude < 0:
            raise ValueError("anomaly magnitude must be nonnegative")
        if self.noise_level < 0:
            raise ValueError("noise level must be nonnegative")


def _smooth_field(rng, n1, n2):
    """Zero-mean, unit-std random field whose correlation length scales with
    the grid (about a third of the short side)."""
    white = rng.standard_normal((n1, n2))
    fx = np.fft.fftfreq(n1)[:, None]
    fy = np.fft.fftfreq(n2)[None, :]
    corr = max(4.0, min(n1, n2) / 3.5)
    gain = np.exp(-2.0 * (np.pi * corr) ** 2 * (fx**2 + fy**2))
    field = np.fft.ifft2(np.fft.fft2(white) * gain).real
    sd = field.std()
    if sd < 1e-12:  # degenerate tiny grids
        return np.zeros_like(field)
    return (field - field.mean()) / sd


def synth_scene(spec: SyntheticSpec):
    """Build a scene; returns ``(observed, truth_mask, (low_rank, sparse, noise))``.

    Deterministic for a fixed seed.
    """
    n1, n2, n3 = spec.dims
    r = spec.rank
    rng = np.random.default_rng(spec.seed)

    # random orthonormal basis, sign-fixed for determinism
    q, rr = np.linalg.qr(rng.standard_normal((n3, r)))
    q = q * np.sign(np.where(np.diag(rr) == 0, 1.0, np.diag(rr)))

    # smooth eigenimages around distinct offsets; every band carries the same
    # substantial variation energy, so no background direction is cheap for
    # the solver to drop in exchange for absorbing anomalies
    offsets = np.linspace(0.55, 0.40, r)
    amp = 0.28
    z = np.empty((n1, n2, r), order="F")
    for i in range(r):
        z[:, :, i] = offsets[i] + amp * _smooth_field(rng, n1, n2)
    z_true = Tensor3(z)
    low_rank = mode3_product(z_true, q)

    # anomalies: one shared off-subspace signature, geometric brightness ladder
    sparse = np.zeros((n1, n2, n3), order="F")
    truth = np.zeros((n1, n2), dtype=bool)
    k = spec.anomaly_count
    if k > 0:
        w = rng.standard_normal(n3)
        w = w - q @ (q.T @ w)
        nrm = np.linalg.norm(w)
        if nrm < 1e-12:
            raise ValueError("failed to draw a signature outside the background subspace")
        signature = w / nrm
        if k == 1:
            ladder = np.ones(1)
        else:
            ladder = _BRIGHTNESS_SPAN ** (np.arange(k) / (k - 1))
        ladder = rng.permutation(ladder)
        flat = rng.choice(n1 * n2, size=k, replace=False)
        rows = flat % n1
        cols = flat // n1
        base = spec.anomaly_magnitude * np.sqrt(n3)
        for pix in range(k):
            sparse[rows[pix], cols[pix], :] = base * ladder[pix] * signature
            truth[rows[pix], cols[pix]] = True
    sparse_t = Tensor3(sparse)

    noise = spec.noise_level * rng.standard_normal((n1, n2, n3))
    noise_t = Tensor3(noise)

    observed = Tensor3(low_rank.data + sparse_t.data + noise_t.data)
    return observed, truth, (low_rank, sparse_t, noise_t)
