"""Numeric hot-path kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import from the ``PNPPBCD_BACKEND`` environment
variable: ``numba`` (default when importable), or ``numpy``.  Both paths
produce the same values; ``python -m pnppbcd.bench`` compares their speed.

Penalty kernels operate on nonnegative inputs (group norms); the sign logic
for scalar prox evaluation lives in :mod:`pnppbcd.penalties`.
"""

from __future__ import annotations

import os

import numpy as np

PENALTY_L1 = 0
PENALTY_RELAXED_LP = 1
PENALTY_MCP = 2
PENALTY_SCAD = 3

_ENV_VAR = "PNPPBCD_BACKEND"


def _resolve_backend() -> str:
    choice = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if choice in ("numpy", "python"):
        return "numpy"
    if choice in ("auto", "", "numba"):
        try:
            import numba  # noqa: F401
        except ImportError:
            if choice == "numba":
                raise RuntimeError(
                    "PNPPBCD_BACKEND=numba requested but numba is not importable"
                )
            return "numpy"
        return "numba"
    raise ValueError(f"unknown {_ENV_VAR} value {choice!r}; use 'numba' or 'numpy'")


BACKEND = _resolve_backend()


def using_numba() -> bool:
    return BACKEND == "numba"


# ---------------------------------------------------------------------------
# penalty value
# ---------------------------------------------------------------------------

def penalty_values_numpy(code, pa, pb, t):
    """psi(|t|) elementwise; (pa, pb) are the penalty parameters."""
    v = np.abs(np.asarray(t, dtype=np.float64))
    if code == PENALTY_L1:
        return v
    if code == PENALTY_RELAXED_LP:
        p, eps = pa, pb
        # clamp: vectorized pow can land 1 ulp below the scalar pow at v = 0
        return np.maximum((v + eps) ** p - eps**p, 0.0)
    if code == PENALTY_MCP:
        lam, theta = pa, pb
        inner = lam * v - v * v / (2.0 * theta)
        return np.where(v <= theta * lam, inner, 0.5 * theta * lam * lam)
    if code == PENALTY_SCAD:
        lam, theta = pa, pb
        mid = (-v * v + 2.0 * theta * lam * v - lam * lam) / (2.0 * (theta - 1.0))
        out = np.where(v <= lam, lam * v, mid)
        return np.where(v > theta * lam, 0.5 * (theta + 1.0) * lam * lam, out)
    raise ValueError(f"unknown penalty code {code}")


# ---------------------------------------------------------------------------
# prox on nonnegative inputs
# ---------------------------------------------------------------------------
# MCP and SCAD proxes are computed exactly by minimizing over the closed-form
# candidate set of each piecewise branch (interior stationary points clipped
# to their branch, plus branch endpoints).  Candidates are scanned in
# increasing order with a strict comparison, so ties select the
# smaller-magnitude minimizer.

def _mcp_candidates(lam, theta, tau, v):
    cands = [np.zeros_like(v), np.full_like(v, theta * lam), np.maximum(v, theta * lam)]
    denom = 1.0 - tau / theta
    if denom > 0.0:
        cands.insert(1, np.clip((v - tau * lam) / denom, 0.0, theta * lam))
    return cands


def _scad_candidates(lam, theta, tau, v):
    cands = [
        np.zeros_like(v),
        np.clip(v - tau * lam, 0.0, lam),
        np.full_like(v, lam),
        np.full_like(v, theta * lam),
        np.maximum(v, theta * lam),
    ]
    denom = theta - 1.0 - tau
    if denom > 0.0:
        u2 = ((theta - 1.0) * v - tau * theta * lam) / denom
        cands.insert(3, np.clip(u2, lam, theta * lam))
    return cands


def _pick_min(code, pa, pb, tau, v, cands):
    # candidates arrive ascending per element, so strict '<' keeps the
    # smaller-magnitude minimizer on ties
    best = cands[0]
    best_obj = tau * penalty_values_numpy(code, pa, pb, best) + 0.5 * (best - v) ** 2
    for cand in cands[1:]:
        obj = tau * penalty_values_numpy(code, pa, pb, cand) + 0.5 * (cand - v) ** 2
        better = obj < best_obj
        best = np.where(better, cand, best)
        best_obj = np.where(better, obj, best_obj)
    return best


def _relaxed_lp_prox_numpy(p, eps, tau, v):
    """Vectorized exact prox of tau*((u+eps)^p - eps^p) for v >= 0.

    The derivative g'(u) = tau*p*(u+eps)^(p-1) + u - v is decreasing below
    u_c (inflection of g) and increasing above it, so the local minimizer is
    the root of g' on [max(0, u_c), v]; it is compared against u = 0 with
    ties resolved to 0.  The root is isolated by bisection, which converges
    past double precision in the fixed iteration count used here.
    """
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(v)
    u_c = (tau * p * (1.0 - p)) ** (1.0 / (2.0 - p)) - eps
    lo0 = max(0.0, u_c)

    def gprime(u):
        return tau * p * (u + eps) ** (p - 1.0) + u - v

    active = (v > lo0) & (gprime(np.full_like(v, lo0)) < 0.0)
    if np.any(active):
        lo = np.full_like(v, lo0)
        hi = v.copy()
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            neg = tau * p * (mid + eps) ** (p - 1.0) + mid - v < 0.0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
        root = 0.5 * (lo + hi)
        f_root = tau * ((root + eps) ** p - eps**p) + 0.5 * (root - v) ** 2
        f_zero = 0.5 * v * v
        out = np.where(active & (f_root < f_zero), root, 0.0)
    return out


def penalty_prox_numpy(code, pa, pb, tau, v):
    """prox of tau*psi at nonnegative v, elementwise."""
    v = np.asarray(v, dtype=np.float64)
    if code == PENALTY_L1:
        return np.maximum(v - tau, 0.0)
    if code == PENALTY_RELAXED_LP:
        return _relaxed_lp_prox_numpy(pa, pb, tau, v)
    if code == PENALTY_MCP:
        return _pick_min(code, pa, pb, tau, v, _mcp_candidates(pa, pb, tau, v))
    if code == PENALTY_SCAD:
        return _pick_min(code, pa, pb, tau, v, _scad_candidates(pa, pb, tau, v))
    raise ValueError(f"unknown penalty code {code}")


# ---------------------------------------------------------------------------
# separable periodic smoothing
# ---------------------------------------------------------------------------

def smooth2d_numpy(x, kernel):
    """Apply a symmetric 1-D kernel along both axes with periodic boundary.

    Accumulation order (center tap first, then tap pairs outward) matches the
    numba path so the two backends agree bitwise.
    """
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    h = (kernel.size - 1) // 2
    for axis in (0, 1):
        acc = kernel[h] * x
        for k in range(1, h + 1):
            acc = acc + kernel[h + k] * (
                np.roll(x, -k, axis=axis) + np.roll(x, k, axis=axis)
            )
        x = acc
    return x


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _psi_scalar(code, pa, pb, t):
        v = abs(t)
        if code == PENALTY_L1:
            return v
        if code == PENALTY_RELAXED_LP:
            return max((v + pb) ** pa - pb**pa, 0.0)
        if code == PENALTY_MCP:
            if v <= pb * pa:
                return pa * v - v * v / (2.0 * pb)
            return 0.5 * pb * pa * pa
        if v <= pa:
            return pa * v
        if v <= pb * pa:
            return (-v * v + 2.0 * pb * pa * v - pa * pa) / (2.0 * (pb - 1.0))
        return 0.5 * (pb + 1.0) * pa * pa

    @njit(cache=True)
    def _prox_obj(code, pa, pb, tau, u, v):
        return tau * _psi_scalar(code, pa, pb, u) + 0.5 * (u - v) * (u - v)

    @njit(cache=True)
    def _prox_scalar(code, pa, pb, tau, v):
        if v <= 0.0:
            return 0.0
        if code == PENALTY_L1:
            return max(v - tau, 0.0)
        if code == PENALTY_RELAXED_LP:
            p, eps = pa, pb
            lo = (tau * p * (1.0 - p)) ** (1.0 / (2.0 - p)) - eps
            if lo < 0.0:
                lo = 0.0
            if lo >= v:
                return 0.0
            glo = tau * p * (lo + eps) ** (p - 1.0) + lo - v
            if glo >= 0.0:
                return 0.0
            # safeguarded Newton on g'(u) = tau*p*(u+eps)^(p-1) + u - v
            hi = v
            u = v
            for _ in range(100):
                g = tau * p * (u + eps) ** (p - 1.0) + u - v
                if g < 0.0:
                    lo = u
                else:
                    hi = u
                gg = 1.0 + tau * p * (p - 1.0) * (u + eps) ** (p - 2.0)
                step_ok = gg > 0.0
                if step_ok:
                    un = u - g / gg
                    step_ok = lo < un < hi
                if step_ok:
                    u_next = un
                else:
                    u_next = 0.5 * (lo + hi)
                if abs(u_next - u) <= 5e-16 * (1.0 + abs(u)):
                    u = u_next
                    break
                u = u_next
            if _prox_obj(code, pa, pb, tau, u, v) < 0.5 * v * v:
                return u
            return 0.0
        if code == PENALTY_MCP:
            lam, theta = pa, pb
            best = 0.0
            best_obj = _prox_obj(code, pa, pb, tau, 0.0, v)
            denom = 1.0 - tau / theta
            if denom > 0.0:
                u1 = (v - tau * lam) / denom
                if u1 < 0.0:
                    u1 = 0.0
                elif u1 > theta * lam:
                    u1 = theta * lam
                o = _prox_obj(code, pa, pb, tau, u1, v)
                if o < best_obj:
                    best, best_obj = u1, o
            for u in (theta * lam, max(v, theta * lam)):
                o = _prox_obj(code, pa, pb, tau, u, v)
                if o < best_obj:
                    best, best_obj = u, o
            return best
        # SCAD
        lam, theta = pa, pb
        best = 0.0
        best_obj = _prox_obj(code, pa, pb, tau, 0.0, v)
        u1 = v - tau * lam
        if u1 < 0.0:
            u1 = 0.0
        elif u1 > lam:
            u1 = lam
        u2 = lam  # duplicates an endpoint when the middle branch is concave
        denom = theta - 1.0 - tau
        if denom > 0.0:
            u2 = ((theta - 1.0) * v - tau * theta * lam) / denom
            if u2 < lam:
                u2 = lam
            elif u2 > theta * lam:
                u2 = theta * lam
        for u in (u1, lam, u2, theta * lam, max(v, theta * lam)):
            o = _prox_obj(code, pa, pb, tau, u, v)
            if o < best_obj:
                best, best_obj = u, o
        return best

    @njit(cache=True)
    def _penalty_values(code, pa, pb, t):
        out = np.empty_like(t)
        for i in range(t.size):
            out[i] = _psi_scalar(code, pa, pb, t[i])
        return out

    @njit(cache=True)
    def _penalty_prox(code, pa, pb, tau, v):
        out = np.empty_like(v)
        for i in range(v.size):
            out[i] = _prox_scalar(code, pa, pb, tau, v[i])
        return out

    @njit(cache=True)
    def _smooth_axis0(x, kernel):
        n0, n1 = x.shape
        h = (kernel.size - 1) // 2
        out = np.empty_like(x)
        for j in range(n1):
            for i in range(n0):
                acc = kernel[h] * x[i, j]
                for k in range(1, h + 1):
                    acc += kernel[h + k] * (x[(i - k) % n0, j] + x[(i + k) % n0, j])
                out[i, j] = acc
        return out

    @njit(cache=True)
    def _smooth_axis1(x, kernel):
        n0, n1 = x.shape
        h = (kernel.size - 1) // 2
        out = np.empty_like(x)
        for i in range(n0):
            for j in range(n1):
                acc = kernel[h] * x[i, j]
                for k in range(1, h + 1):
                    acc += kernel[h + k] * (x[i, (j - k) % n1] + x[i, (j + k) % n1])
                out[i, j] = acc
        return out

    def penalty_values(code, pa, pb, t):
        t = np.asarray(t, dtype=np.float64)
        flat = np.ascontiguousarray(t.ravel())
        return _penalty_values(code, float(pa), float(pb), flat).reshape(t.shape)

    def penalty_prox(code, pa, pb, tau, v):
        v = np.asarray(v, dtype=np.float64)
        flat = np.ascontiguousarray(v.ravel())
        return _penalty_prox(code, float(pa), float(pb), float(tau), flat).reshape(v.shape)

    def smooth2d(x, kernel):
        x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
        kernel = np.ascontiguousarray(np.asarray(kernel, dtype=np.float64))
        return _smooth_axis1(_smooth_axis0(x, kernel), kernel)

else:
    penalty_values = penalty_values_numpy
    penalty_prox = penalty_prox_numpy
    smooth2d = smooth2d_numpy
