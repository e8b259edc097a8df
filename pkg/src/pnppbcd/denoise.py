"""Gradient-step proximal denoiser built on a symmetric linear smoother.

The smoother plays the role of the learned network in a gradient-step
denoiser: with ``g(x) = ||x - Bx||^2 / 2`` the denoiser is ``Id - grad g``,
relaxed by ``gamma`` and conjugated by an affine range shift
``x -> a x + b``.  Because ``B`` is a symmetric circulant with spectrum in
``[0, 1]`` and ``L = lambda_max((I - B)^2) < 1``, the denoiser is exactly the
prox of a weakly convex potential, which this module can evaluate (and
invert) in closed form.  Any object implementing the small smoother protocol
below (``apply``/``grad_potential``/``potential``/``lipschitz``) can be
plugged in instead; only the linear family ships here.

Band indices in the public functions are 1-based, as in :mod:`.tensor`.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from . import kernels
from .tensor import Tensor3

__all__ = [
    "IdentitySmoother",
    "SymmetricLinearSmoother",
    "DenoiserSpec",
    "denoise",
    "phi_eval",
    "prior_value",
    "inverse_denoise",
    "estimate_band_sigmas",
]

SIGMA_MIN = 1e-4
SIGMA_MAX = 0.5
_BETA_MAX = 0.95
_BETA_SLOPE = 4.0


class IdentitySmoother:
    """B = Id: zero potential, zero gradient, Lipschitz constant 0."""

    sigma = 0.0

    def apply(self, x):
        return np.asarray(x, dtype=np.float64)

    def grad_potential(self, x):
        return np.zeros_like(np.asarray(x, dtype=np.float64))

    def potential(self, x):
        return 0.0

    @property
    def lipschitz(self):
        return 0.0

    def spectrum(self, shape):
        return np.ones(shape)


class SymmetricLinearSmoother:
    """Separable periodic smoother: per axis, a damped binomial kernel
    ``(1 - beta) * delta + beta * binom(2h) / 4^h``.

    The 1-D circulant eigenvalues are ``1 - beta + beta cos(w/2)^(2h)`` in
    ``[1 - beta, 1]``, so the 2-D spectrum stays in ``(0, 1]`` and the
    gradient of the potential has Lipschitz constant at most
    ``(beta (2 - beta))^2 < 1`` for every image size.  The noise level
    ``sigma`` sets the damping ``beta = min(0.95, 4 sigma)``; ``half_width``
    sets the kernel support.
    """

    def __init__(self, sigma, half_width=1):
        if sigma < 0.0:
            raise ValueError(f"noise level must be nonnegative, got {sigma}")
        if half_width < 1:
            raise ValueError(f"half_width must be at least 1, got {half_width}")
        self.sigma = float(sigma)
        self.half_width = int(half_width)
        beta = min(_BETA_MAX, _BETA_SLOPE * self.sigma)
        self.beta = beta
        h = self.half_width
        binom = np.array([comb(2 * h, i) for i in range(2 * h + 1)], dtype=np.float64)
        kern = beta * binom / (4.0**h)
        kern[h] += 1.0 - beta
        self.kernel = kern

    def apply(self, x):
        return kernels.smooth2d(x, self.kernel)

    def grad_potential(self, x):
        """(I - B)^2 x, the gradient of ||x - Bx||^2 / 2 for symmetric B."""
        x = np.asarray(x, dtype=np.float64)
        t = x - self.apply(x)
        return t - self.apply(t)

    def potential(self, x):
        x = np.asarray(x, dtype=np.float64)
        t = x - self.apply(x)
        return 0.5 * float(np.vdot(t, t))

    @property
    def lipschitz(self):
        """Upper bound on lambda_max((I - B)^2), uniform over image sizes."""
        return (self.beta * (2.0 - self.beta)) ** 2

    def axis_spectrum(self, n):
        buf = np.zeros(n)
        h = self.half_width
        buf[0] = self.kernel[h]
        for k in range(1, h + 1):
            buf[k % n] += self.kernel[h + k]
            buf[-k % n] += self.kernel[h - k]
        return np.fft.fft(buf).real

    def spectrum(self, shape):
        """Eigenvalues of B on the 2-D DFT basis for images of this shape."""
        return np.multiply.outer(self.axis_spectrum(shape[0]), self.axis_spectrum(shape[1]))


@dataclass(frozen=True)
class DenoiserSpec:
    """Per-band denoiser configuration.

    ``smoothers`` holds one smoother per band, ``gamma`` the relaxation in
    [0, 1], ``range_scale``/``range_offset`` the affine map into the
    smoother's working range, and ``weight`` the prior weight multiplying the
    summed per-band potentials.
    """

    smoothers: tuple
    gamma: float = 0.99
    range_scale: float = 0.2
    range_offset: float = 0.4
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.range_scale <= 0.0:
            raise ValueError(f"range_scale must be positive, got {self.range_scale}")
        if self.weight <= 0.0:
            raise ValueError(f"weight must be positive, got {self.weight}")
        for n, sm in enumerate(self.smoothers, start=1):
            gl = self.gamma * sm.lipschitz
            if gl >= 1.0:
                raise ValueError(
                    f"band {n}: gamma * L = {gl:.6f} >= 1 breaks the prox identity"
                )

    @property
    def bands(self) -> int:
        return len(self.smoothers)

    @property
    def sigmas(self):
        return tuple(sm.sigma for sm in self.smoothers)

    @property
    def rho2(self) -> float:
        """Weak-convexity modulus of the weighted prior (< weight)."""
        worst = 0.0
        for sm in self.smoothers:
            gl = self.gamma * sm.lipschitz
            worst = max(worst, gl / (gl + 1.0))
        return self.weight * worst

    @classmethod
    def from_sigmas(cls, sigmas, gamma=0.99, range_scale=0.2, range_offset=0.4,
                    weight=1.0, half_width=1, family="linear"):
        if family == "identity":
            smoothers = tuple(IdentitySmoother() for _ in sigmas)
        elif family == "linear":
            smoothers = tuple(SymmetricLinearSmoother(s, half_width) for s in sigmas)
        else:
            raise ValueError(f"unknown smoother family {family!r}")
        return cls(smoothers, gamma, range_scale, range_offset, weight)


def _band_smoother(spec: DenoiserSpec, band: int):
    if not 1 <= band <= spec.bands:
        raise IndexError(f"band {band} out of range 1..{spec.bands}")
    return spec.smoothers[band - 1]


def denoise(spec: DenoiserSpec, band: int, x) -> np.ndarray:
    """Shifted relaxed denoiser: (1/a) [D_gamma(a x + b) - b] with
    D_gamma = Id - gamma * grad g.  Computed literally through the shifted
    path so shift consistency is exact."""
    sm = _band_smoother(spec, band)
    x = np.asarray(x, dtype=np.float64)
    a, b = spec.range_scale, spec.range_offset
    y = a * x + b
    d = y - spec.gamma * sm.grad_potential(y)
    return (d - b) / a


def phi_eval(spec: DenoiserSpec, band: int, z, preimage) -> float:
    """Potential whose prox is the shifted relaxed denoiser, evaluated at z.

    The caller supplies the denoiser preimage of z (the solver always has
    it); the value is ``[gamma g(a u + b) - ||a u + b - (a z + b)||^2 / 2] / a^2``
    with u the preimage.  Nonnegative, and at least ``gamma g(a z + b) / a^2``.
    """
    sm = _band_smoother(spec, band)
    z = np.asarray(z, dtype=np.float64)
    u = np.asarray(preimage, dtype=np.float64)
    back = denoise(spec, band, u)
    tol = 1e-8 * max(1.0, float(np.linalg.norm(z)))
    err = float(np.linalg.norm(back - z))
    if err > tol:
        raise ValueError(
            f"preimage inconsistent with band image: |denoise(pre) - z| = {err:.3e} > {tol:.3e}"
        )
    a, b = spec.range_scale, spec.range_offset
    y = a * u + b
    diff = y - (a * z + b)
    val = (spec.gamma * sm.potential(y) - 0.5 * float(np.vdot(diff, diff))) / (a * a)
    if val < 0.0:
        floor = -1e-12 * (1.0 + float(np.vdot(z, z)))
        if val < floor:
            raise ValueError(f"potential came out negative ({val:.3e}); inconsistent preimage")
        val = 0.0
    return val


def prior_value(spec: DenoiserSpec, z: Tensor3, preimages: Tensor3) -> float:
    """Weighted prior over all bands: weight * sum_n phi(band n)."""
    if z.dims != preimages.dims:
        raise ValueError(f"shape mismatch: {z.dims} vs {preimages.dims}")
    if z.dims[2] != spec.bands:
        raise ValueError(f"tensor has {z.dims[2]} bands, spec has {spec.bands}")
    total = 0.0
    for n in range(spec.bands):
        total += phi_eval(spec, n + 1, z.data[:, :, n], preimages.data[:, :, n])
    return spec.weight * total


def inverse_denoise(spec: DenoiserSpec, band: int, z) -> np.ndarray:
    """Solve denoise(spec, band, u) = z for u.

    For the linear smoother the map is ``u -> [M(a u + b) - b] / a`` with
    ``M = I - gamma (I - B)^2`` positive definite, solved exactly by FFT
    diagonalization of the circulant."""
    sm = _band_smoother(spec, band)
    z = np.asarray(z, dtype=np.float64)
    if isinstance(sm, IdentitySmoother) or spec.gamma == 0.0:
        return z.copy()
    a, b = spec.range_scale, spec.range_offset
    lam = sm.spectrum(z.shape)
    denom = 1.0 - spec.gamma * (1.0 - lam) ** 2
    if np.min(denom) <= 0.0:
        raise ValueError("denoiser is not invertible: gamma * L >= 1")
    v = a * z + b
    y = np.fft.ifft2(np.fft.fft2(v) / denom).real
    return (y - b) / a


# undamped half-width-1 binomial kernel used only to split off the
# high-frequency residual when estimating band noise
_REF_KERNEL = np.array([0.25, 0.5, 0.25])


def estimate_band_sigmas(z: Tensor3) -> np.ndarray:
    """Per-band noise levels: the standard deviation of each band minus its
    smoothed self, clamped to [1e-4, 0.5]."""
    out = np.empty(z.dims[2])
    for n in range(z.dims[2]):
        band = np.ascontiguousarray(z.data[:, :, n])
        resid = band - kernels.smooth2d(band, _REF_KERNEL)
        out[n] = np.clip(resid.std(), SIGMA_MIN, SIGMA_MAX)
    return out
