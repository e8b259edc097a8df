"""Sparsity-promoting penalties, their exact prox maps, and the group measure.

The catalog covers the absolute value, the relaxed l_p penalty
``(|t| + eps)^p - eps^p``, the minimax concave penalty (MCP) and the smoothly
clipped absolute deviation (SCAD).  Each penalty knows its weak-convexity
modulus, i.e. the smallest rho such that ``psi + (rho/2) t^2`` is convex.

For the relaxed l_p penalty two moduli are carried: the commonly stated
``p * eps^(p-1)`` and the curvature bound ``p * (1-p) * eps^(p-2)`` obtained
from ``inf psi''``.  They disagree; step-size validation uses the larger
(:attr:`SparsityPenalty.weak_convexity` returns the max) so safety never
depends on resolving the discrepancy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .tensor import Tensor3

__all__ = [
    "SparsityPenalty",
    "l1",
    "relaxed_lp",
    "mcp",
    "scad",
    "group_prox",
    "group_measure",
]

_VARIANTS = ("l1", "relaxed_lp", "mcp", "scad")
_CODES = {
    "l1": kernels.PENALTY_L1,
    "relaxed_lp": kernels.PENALTY_RELAXED_LP,
    "mcp": kernels.PENALTY_MCP,
    "scad": kernels.PENALTY_SCAD,
}


@dataclass(frozen=True)
class SparsityPenalty:
    """One penalty from the catalog; immutable and safe to share.

    ``param_a`` / ``param_b`` hold (p, eps) for relaxed_lp and
    (lam, theta) for MCP and SCAD; both are zero for l1.
    """

    variant: str
    param_a: float = 0.0
    param_b: float = 0.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown penalty variant {self.variant!r}")
        a, b = self.param_a, self.param_b
        if self.variant == "relaxed_lp":
            if not 0.0 < a < 1.0:
                raise ValueError(f"relaxed_lp exponent must lie in (0, 1), got {a}")
            if b <= 0.0:
                raise ValueError(f"relaxed_lp offset must be positive, got {b}")
        elif self.variant == "mcp":
            if a <= 0.0 or b <= a:
                raise ValueError(f"MCP requires theta > lam > 0, got lam={a}, theta={b}")
        elif self.variant == "scad":
            if a <= 0.0 or b <= 2.0:
                raise ValueError(f"SCAD requires lam > 0 and theta > 2, got lam={a}, theta={b}")

    @property
    def code(self) -> int:
        return _CODES[self.variant]

    # -- values -------------------------------------------------------------

    def value(self, t):
        """psi(t); even, nonnegative, psi(0) = 0.  Scalar or array."""
        arr = np.asarray(t, dtype=np.float64)
        out = kernels.penalty_values(self.code, self.param_a, self.param_b, arr.ravel())
        out = out.reshape(arr.shape)
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out

    def prox(self, tau: float, x):
        """A minimizer of tau*psi(u) + (u - x)^2 / 2.

        Odd in x; ties between minimizers resolve toward the smaller
        magnitude.  Scalar or array.
        """
        if tau <= 0.0:
            raise ValueError(f"prox parameter must be positive, got {tau}")
        arr = np.asarray(x, dtype=np.float64)
        mag = kernels.penalty_prox(
            self.code, self.param_a, self.param_b, tau, np.abs(arr).ravel()
        )
        out = (np.sign(arr).ravel() * mag).reshape(arr.shape)
        return float(out) if np.isscalar(x) or arr.ndim == 0 else out

    # -- weak convexity -----------------------------------------------------

    @property
    def stated_weak_convexity(self) -> float:
        """The catalog modulus: 0, p*eps^(p-1), 1/theta, 1/(theta-1)."""
        if self.variant == "l1":
            return 0.0
        if self.variant == "relaxed_lp":
            p, eps = self.param_a, self.param_b
            return p * eps ** (p - 1.0)
        if self.variant == "mcp":
            return 1.0 / self.param_b
        return 1.0 / (self.param_b - 1.0)

    @property
    def curvature_weak_convexity(self) -> float:
        """Modulus from -inf psi''; differs from the stated one for relaxed_lp."""
        if self.variant == "relaxed_lp":
            p, eps = self.param_a, self.param_b
            return p * (1.0 - p) * eps ** (p - 2.0)
        return self.stated_weak_convexity

    @property
    def weak_convexity(self) -> float:
        """Modulus used for step-size validation (max of the two above)."""
        return max(self.stated_weak_convexity, self.curvature_weak_convexity)


def l1() -> SparsityPenalty:
    return SparsityPenalty("l1")


def relaxed_lp(p: float, eps: float) -> SparsityPenalty:
    return SparsityPenalty("relaxed_lp", p, eps)


def mcp(lam: float, theta: float) -> SparsityPenalty:
    return SparsityPenalty("mcp", lam, theta)


def scad(lam: float, theta: float) -> SparsityPenalty:
    return SparsityPenalty("scad", lam, theta)


# ---------------------------------------------------------------------------
# group operations
# ---------------------------------------------------------------------------

def group_prox(penalty: SparsityPenalty, tau: float, s):
    """Prox of tau * psi(||.||_2) at vector s: shrink the norm, keep the
    direction; the zero vector maps to zero."""
    if tau <= 0.0:
        raise ValueError(f"prox parameter must be positive, got {tau}")
    s = np.asarray(s, dtype=np.float64)
    nrm = float(np.linalg.norm(s))
    if nrm == 0.0:
        return np.zeros_like(s)
    shrunk = kernels.penalty_prox(
        penalty.code, penalty.param_a, penalty.param_b, tau, np.array([nrm])
    )[0]
    return (shrunk / nrm) * s


def group_prox_map(penalty: SparsityPenalty, tau: float, norms: np.ndarray) -> np.ndarray:
    """Vectorized norm shrinkage for a map of nonnegative fiber norms."""
    return kernels.penalty_prox(
        penalty.code, penalty.param_a, penalty.param_b, tau, norms
    )


def group_measure(penalty: SparsityPenalty, s: Tensor3) -> float:
    """Sum over spatial positions of psi applied to each mode-3 fiber norm."""
    norms = np.sqrt(np.einsum("ijk,ijk->ij", s.data, s.data))
    vals = kernels.penalty_values(
        penalty.code, penalty.param_a, penalty.param_b, norms.ravel()
    )
    return float(vals.sum())
