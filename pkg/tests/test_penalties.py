import numpy as np
import pytest

import oracles
from pnppbcd.penalties import (
    SparsityPenalty,
    group_measure,
    group_prox,
    l1,
    mcp,
    relaxed_lp,
    scad,
)
from pnppbcd.tensor import Tensor3

ALL = {
    "l1": (l1(), oracles.ORACLE_L1),
    "relaxed_lp": (relaxed_lp(0.1, 1e-5), oracles.ORACLE_RELAXED_LP),
    "mcp": (mcp(1.0, 2.0), oracles.ORACLE_MCP),
    "scad": (scad(1.0, 3.0), oracles.ORACLE_SCAD),
}


def test_parameter_validation():
    with pytest.raises(ValueError):
        relaxed_lp(1.5, 1e-5)
    with pytest.raises(ValueError):
        relaxed_lp(0.5, 0.0)
    with pytest.raises(ValueError):
        mcp(1.0, 0.5)  # theta <= lam
    with pytest.raises(ValueError):
        scad(1.0, 2.0)  # theta <= 2
    with pytest.raises(ValueError):
        SparsityPenalty("huber")


def test_value_pinned_examples():
    assert ALL["l1"][0].value(-3.0) == 3.0
    # MCP saturates at theta*lam^2/2 past theta*lam
    assert ALL["mcp"][0].value(5.0) == 1.0
    # SCAD: both branch formulas agree at |t| = lam
    pen = ALL["scad"][0]
    first = 1.0 * 1.0
    second = (-1.0 + 2.0 * 3.0 * 1.0 - 1.0) / (2.0 * (3.0 - 1.0))
    assert first == second == pen.value(1.0)


def test_value_even_nonnegative_zero_at_zero():
    rng = np.random.default_rng(0)
    ts = rng.uniform(-50, 50, 500)
    for pen, _ in ALL.values():
        assert pen.value(0.0) == 0.0
        vals_pos = pen.value(np.abs(ts))
        vals = pen.value(ts)
        assert np.array_equal(vals, vals_pos)
        assert (vals >= 0).all()


def test_value_continuous_at_branch_boundaries():
    for pen in (mcp(0.7, 2.3), scad(0.7, 3.7)):
        for b in (pen.param_a, pen.param_a * pen.param_b):
            below = pen.value(b - 1e-9)
            above = pen.value(b + 1e-9)
            assert abs(below - above) < 1e-7


def test_prox_pinned_examples():
    assert ALL["l1"][0].prox(1.0, 3.0) == 2.0
    assert ALL["l1"][0].prox(1.0, 0.5) == 0.0
    assert ALL["l1"][0].prox(1.0, -3.0) == -2.0
    # past the MCP clipping point the prox is the identity
    assert ALL["mcp"][0].prox(1.0, 3.0) == 3.0


def test_prox_against_grid_oracle():
    rng = np.random.default_rng(1)
    for name, (pen, code) in ALL.items():
        for _ in range(40):
            tau = rng.uniform(0.05, 5.0)
            x = rng.uniform(-12, 12)
            u = pen.prox(tau, x)
            f_impl = oracles.prox_objective(code, pen.param_a, pen.param_b, tau, u, x)
            _, f_star = oracles.prox_oracle(code, pen.param_a, pen.param_b, tau, x)
            assert f_impl <= f_star + 1e-8, (name, tau, x)
            assert f_star <= f_impl + 1e-8, (name, tau, x)


def test_prox_contraction_and_sign():
    rng = np.random.default_rng(2)
    for pen, _ in ALL.values():
        for _ in range(200):
            tau = rng.uniform(0.01, 5.0)
            x = rng.uniform(-20, 20)
            u = pen.prox(tau, x)
            assert abs(u) <= abs(x) + 1e-12
            assert u == 0.0 or np.sign(u) == np.sign(x)


def test_prox_monotone_on_nonnegative_grid():
    # nondecreasing in x >= 0 (nonconvex penalties jump up at their threshold)
    xs = np.linspace(0, 15, 4001)
    for name, (pen, _) in ALL.items():
        u = pen.prox(1.7, xs)
        assert (np.diff(u) >= -1e-10).all(), name


def test_weak_convexity_values():
    assert l1().weak_convexity == 0.0
    assert mcp(1.0, 2.0).weak_convexity == 0.5
    assert scad(1.0, 3.0).weak_convexity == 0.5
    pen = relaxed_lp(0.1, 1e-5)
    assert pen.stated_weak_convexity == pytest.approx(0.1 * (1e-5) ** (-0.9))
    assert pen.curvature_weak_convexity == pytest.approx(0.09 * (1e-5) ** (-1.9))
    assert pen.weak_convexity == max(pen.stated_weak_convexity, pen.curvature_weak_convexity)


def test_weak_convexity_restores_midpoint_convexity():
    # psi + (rho/2) t^2 passes a second-difference test on a dense grid
    ts = np.linspace(-100, 100, 100_001)
    for name, (pen, _) in ALL.items():
        f = pen.value(ts) + 0.5 * pen.weak_convexity * ts**2
        second = f[:-2] + f[2:] - 2 * f[1:-1]
        assert (second >= -1e-7 * np.maximum(1, np.abs(f[1:-1]))).all(), name


def test_group_prox_pinned_example():
    out = group_prox(l1(), 1.0, np.array([3.0, 4.0]))
    assert np.allclose(out, [2.4, 3.2], atol=1e-14)


def test_group_prox_zero_vector():
    for pen, _ in ALL.values():
        out = group_prox(pen, 1.0, np.zeros(6))
        assert np.array_equal(out, np.zeros(6))


def test_group_prox_collinear_and_radial():
    rng = np.random.default_rng(3)
    for name, (pen, _) in ALL.items():
        for _ in range(50):
            s = rng.standard_normal(8) * rng.uniform(0.1, 6)
            tau = rng.uniform(0.1, 3.0)
            out = group_prox(pen, tau, s)
            nrm = np.linalg.norm(s)
            radial = pen.prox(tau, nrm) * s / nrm
            assert np.allclose(out, radial, atol=1e-10), name


def test_group_prox_relaxed_lp_norm_matches_oracle():
    pen = relaxed_lp(0.1, 1e-5)
    rng = np.random.default_rng(4)
    s = rng.standard_normal(5)
    s *= 10.0 / np.linalg.norm(s)
    out = group_prox(pen, 1.0, s)
    u_star, _ = oracles.prox_oracle(oracles.ORACLE_RELAXED_LP, 0.1, 1e-5, 1.0, 10.0)
    assert abs(np.linalg.norm(out) - u_star) < 1e-6
    cos = np.dot(out, s) / (np.linalg.norm(out) * np.linalg.norm(s))
    assert abs(cos - 1.0) < 1e-12


def test_group_prox_on_1d_vector_reduces_to_scalar_prox():
    for pen, _ in ALL.values():
        for x in (-3.0, -0.4, 0.7, 5.0):
            out = group_prox(pen, 1.3, np.array([x]))
            assert out.shape == (1,)
            assert abs(out[0] - pen.prox(1.3, x)) < 1e-12


def test_group_measure():
    zero = Tensor3(np.zeros((3, 4, 5)))
    for pen, _ in ALL.values():
        assert group_measure(pen, zero) == 0.0
    t = Tensor3(np.array([[[3.0, 4.0], [0.0, 0.0]]]).reshape((1, 2, 2)))
    assert group_measure(l1(), t) == 5.0
    fiber = np.zeros((2, 2, 3))
    fiber[1, 0, :] = 10.0 / np.sqrt(3.0)
    assert group_measure(mcp(1.0, 2.0), Tensor3(fiber)) == pytest.approx(1.0)


def test_group_measure_equals_fiber_sum():
    rng = np.random.default_rng(5)
    t = Tensor3(rng.standard_normal((4, 5, 6)))
    for pen, _ in ALL.values():
        total = 0.0
        for i in range(4):
            for j in range(5):
                total += pen.value(float(np.linalg.norm(t.data[i, j, :])))
        assert group_measure(pen, t) == pytest.approx(total, rel=1e-12)
