import dataclasses

import numpy as np
import pytest

from pnppbcd.denoise import DenoiserSpec, prior_value
from pnppbcd.penalties import group_measure, group_prox, l1, relaxed_lp
from pnppbcd.solver import (
    SolverConfig,
    initialize,
    objective,
    residuals,
    run,
    update_basis,
    update_coeff,
    update_sparse,
)
from pnppbcd.stiefel import riemannian_grad_fit
from pnppbcd.synth import SyntheticSpec, synth_scene
from pnppbcd.tensor import Tensor3, fiber3, frob_norm, mode3_product, unfold


def _scene(seed=3, noise=0.03, dims=(30, 30, 16), rank=3, count=8):
    spec = SyntheticSpec(dims=dims, rank=rank, anomaly_count=count,
                         anomaly_magnitude=0.8, noise_level=noise, seed=seed)
    return synth_scene(spec)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(rank=0)
    with pytest.raises(ValueError):
        SolverConfig(rank=2, delta=0.0)
    with pytest.raises(ValueError):
        SolverConfig(rank=2, alpha_basis=0.0)
    # zero sparse step requires delta to beat the penalty's weak convexity
    with pytest.raises(ValueError):
        SolverConfig(rank=2, alpha_sparse=0.0, penalty=relaxed_lp(0.1, 1e-5))
    cfg = SolverConfig(rank=2, alpha_sparse=0.0, penalty=l1())
    assert cfg.rho1 == 0.0
    cfg = SolverConfig(rank=2)
    assert cfg.prior_weight == pytest.approx(cfg.delta + cfg.alpha_coeff)


def test_initialize_svd_seed():
    o, _, _ = _scene(noise=0.0, count=0)
    cfg = SolverConfig(rank=3)
    st = initialize(o, cfg)
    assert st.sparse.data.max() == st.sparse.data.min() == 0.0
    assert np.linalg.norm(st.basis.matrix.T @ st.basis.matrix - np.eye(3)) < 1e-10
    # exact rank-r scene reconstructs at once
    rec = mode3_product(st.coeff, st.basis.matrix)
    assert frob_norm(Tensor3(rec.data - o.data)) < 1e-8 * frob_norm(o)
    assert st.coeff_input is None
    with pytest.raises(ValueError):
        objective(st, o, cfg)


def test_initialize_full_rank_exact_for_any_input():
    rng = np.random.default_rng(0)
    o = Tensor3(rng.uniform(0, 1, (8, 7, 5)))
    st = initialize(o, SolverConfig(rank=5))
    rec = mode3_product(st.coeff, st.basis.matrix)
    assert frob_norm(Tensor3(rec.data - o.data)) < 1e-10


def test_initialize_zero_scene():
    o = Tensor3(np.zeros((6, 6, 4)))
    st = initialize(o, SolverConfig(rank=2))
    assert frob_norm(st.coeff) == 0.0
    assert frob_norm(st.sparse) == 0.0


def test_initialize_rank_too_large():
    o = Tensor3(np.zeros((6, 6, 4)))
    with pytest.raises(ValueError):
        initialize(o, SolverConfig(rank=5))


def test_update_sparse_zero_residual_keeps_zero():
    o, _, _ = _scene(noise=0.0, count=0)
    cfg = SolverConfig(rank=3)
    st = initialize(o, cfg)
    s_new = update_sparse(st, o, cfg)
    assert frob_norm(s_new) < 1e-12


def test_update_sparse_matches_per_fiber_group_prox():
    o, _, _ = _scene()
    cfg = SolverConfig(rank=3)
    st = initialize(o, cfg)
    s_new = update_sparse(st, o, cfg)
    rec = mode3_product(st.coeff, st.basis.matrix)
    step = cfg.delta / (cfg.delta + cfg.alpha_sparse)
    shat = st.sparse.data - step * (st.sparse.data + rec.data - o.data)
    tau_eff = cfg.tau / (cfg.delta + cfg.alpha_sparse)
    rng = np.random.default_rng(1)
    for _ in range(30):
        i = int(rng.integers(1, o.dims[0] + 1))
        j = int(rng.integers(1, o.dims[1] + 1))
        expected = group_prox(cfg.penalty, tau_eff, shat[i - 1, j - 1, :])
        assert np.allclose(fiber3(s_new, i, j), expected, atol=1e-12)


def test_update_sparse_single_strong_fiber_soft_thresholds():
    # background reproduced exactly, one planted residual fiber, l1 penalty
    rng = np.random.default_rng(2)
    dims = (10, 10, 6)
    q, _ = np.linalg.qr(rng.standard_normal((dims[2], 2)))
    z = Tensor3(rng.standard_normal((10, 10, 2)))
    low = mode3_product(z, q)
    o_data = low.data.copy()
    spike = np.zeros(6)
    spike[0] = 5.0
    o_data[4, 4, :] += spike
    o = Tensor3(o_data)
    cfg = SolverConfig(rank=2, penalty=l1(), denoiser=None)
    st = initialize(o, cfg)
    st = dataclasses.replace(st, coeff=z, basis=type(st.basis)(q), sparse=Tensor3(np.zeros(dims)))
    s_new = update_sparse(st, o, cfg)
    scores = np.sqrt(np.einsum("ijk,ijk->ij", s_new.data, s_new.data))
    assert scores[4, 4] > 0
    step = cfg.delta / (cfg.delta + cfg.alpha_sparse)
    tau_eff = cfg.tau / (cfg.delta + cfg.alpha_sparse)
    assert scores[4, 4] == pytest.approx(step * 5.0 - tau_eff, rel=1e-10)
    scores[4, 4] = 0.0
    assert scores.max() == 0.0
    # output fibers collinear with their inputs
    out = fiber3(s_new, 5, 5)
    assert abs(np.dot(out, spike) - np.linalg.norm(out) * 5.0) < 1e-9


def test_update_basis_fixed_points():
    o, _, _ = _scene()
    cfg = SolverConfig(rank=3)
    st = initialize(o, cfg)
    # s_new = o zeroes the drift
    e_new = update_basis(st, o, cfg, o)
    assert np.max(np.abs(e_new.matrix - st.basis.matrix)) < 1e-12
    # zero coefficients zero the drift
    st0 = dataclasses.replace(st, coeff=Tensor3(np.zeros((30, 30, 3))))
    e_new = update_basis(st0, o, cfg, st.sparse)
    assert np.max(np.abs(e_new.matrix - st.basis.matrix)) < 1e-12


def test_update_basis_descends_linearized_objective():
    # H~(Z, E+, S) + (alpha/2)||E+ - E||^2 <= H~(Z, E, S)
    rng = np.random.default_rng(3)
    o, _, _ = _scene(seed=5)
    cfg = SolverConfig(rank=3)
    st = initialize(o, cfg)
    z0, zhat0 = update_coeff(st, o, cfg, st.sparse, st.basis)
    st = dataclasses.replace(st, coeff=z0, coeff_input=zhat0)
    for _ in range(3):
        s_new = update_sparse(st, o, cfg)
        e_new = update_basis(st, o, cfg, s_new)

        def h_tilde(e_mat):
            g = (np.asarray(unfold(o, 3)) - np.asarray(unfold(s_new, 3))) @ np.asarray(
                unfold(st.coeff, 3)
            ).T
            return -cfg.delta * float(np.sum(e_mat * g))

        lhs = h_tilde(e_new.matrix) + 0.5 * cfg.alpha_basis * np.linalg.norm(
            e_new.matrix - st.basis.matrix
        ) ** 2
        assert lhs <= h_tilde(st.basis.matrix) + 1e-10 * max(1.0, abs(lhs))
        z_new, zhat = update_coeff(st, o, cfg, s_new, e_new)
        st = dataclasses.replace(st, coeff=z_new, basis=e_new, sparse=s_new, coeff_input=zhat)


def test_update_coeff_identity_prior_exact_least_squares():
    # alpha_coeff = 0 and an identity prior collapse to the exact coefficients
    o, _, _ = _scene(seed=7)
    den = DenoiserSpec.from_sigmas([0.1] * 3, family="identity", weight=0.25)
    cfg = SolverConfig(rank=3, alpha_coeff=0.0, prior="identity", denoiser=den)
    st = initialize(o, cfg)
    s_new = update_sparse(st, o, cfg)
    e_new = update_basis(st, o, cfg, s_new)
    z_new, zhat = update_coeff(st, o, cfg, s_new, e_new)
    target = mode3_product(Tensor3(o.data - s_new.data), e_new.matrix.T)
    assert np.max(np.abs(np.asarray(zhat.data) - target.data)) < 1e-12
    assert np.max(np.abs(z_new.data - target.data)) < 1e-12


def test_update_coeff_decreases_its_subproblem():
    o, _, _ = _scene(seed=9)
    cfg = SolverConfig(rank=3)
    st = initialize(o, cfg)
    z0, zhat0 = update_coeff(st, o, cfg, st.sparse, st.basis)
    st = dataclasses.replace(st, coeff=z0, coeff_input=zhat0)
    s_new = update_sparse(st, o, cfg)
    e_new = update_basis(st, o, cfg, s_new)
    z_new, zhat = update_coeff(st, o, cfg, s_new, e_new)

    def subproblem(z, pre):
        rec = mode3_product(z, e_new.matrix)
        fit = 0.5 * cfg.delta * np.sum((rec.data + s_new.data - o.data) ** 2)
        prox_term = 0.5 * cfg.alpha_coeff * np.sum((z.data - st.coeff.data) ** 2)
        return fit + prox_term + prior_value(st.denoiser, z, pre)

    new_val = subproblem(z_new, zhat)
    old_val = subproblem(st.coeff, st.coeff_input)
    assert new_val <= old_val + 1e-10 * max(1.0, abs(old_val))


def test_objective_pinned_forms():
    rng = np.random.default_rng(4)
    dims = (8, 9, 5)
    o = Tensor3(rng.standard_normal(dims))
    den = DenoiserSpec.from_sigmas([0.1, 0.1], family="identity", weight=0.26)
    cfg = SolverConfig(rank=2, penalty=l1(), denoiser=den)
    st = initialize(o, cfg)
    zero_z = Tensor3(np.zeros((8, 9, 2)))
    # Z = 0, S = O: pure sparsity term
    st_a = dataclasses.replace(st, coeff=zero_z, sparse=o, coeff_input=zero_z)
    assert objective(st_a, o, cfg) == pytest.approx(cfg.tau * group_measure(l1(), o), rel=1e-12)
    # Z = 0, S = 0: pure fit term
    st_b = dataclasses.replace(st, coeff=zero_z, coeff_input=zero_z)
    assert objective(st_b, o, cfg) == pytest.approx(
        0.5 * cfg.delta * frob_norm(o) ** 2, rel=1e-12
    )


def test_residual_formulas():
    o, _, _ = _scene(seed=11)
    cfg = SolverConfig(rank=3)
    state, hist = run(o, SolverConfig(rank=3, max_iter=5, tol=0.0))
    prev = dataclasses.replace(state)
    # self-residuals: differences vanish, basis gradient stays
    r = residuals(state, state, o, cfg)
    assert r[0] == 0.0 and r[2] == 0.0
    g = riemannian_grad_fit(state.coeff, state.basis, state.sparse, o, cfg.delta)
    assert r[1] == pytest.approx(float(np.linalg.norm(g)), rel=1e-12)


def test_residuals_alpha_zero_specialization():
    o, _, _ = _scene(seed=13)
    cfg = SolverConfig(rank=3, alpha_sparse=0.0, alpha_coeff=0.0, penalty=l1())
    st1, _ = run(o, dataclasses.replace(cfg, max_iter=2, tol=0.0))
    st2, _ = run(o, dataclasses.replace(cfg, max_iter=3, tol=0.0))
    r = residuals(st1, st2, o, cfg)
    rec2 = mode3_product(st2.coeff, st2.basis.matrix)
    rec1 = mode3_product(st1.coeff, st1.basis.matrix)
    expected = cfg.delta * np.linalg.norm((rec2.data - rec1.data).ravel())
    assert r[0] == pytest.approx(expected, rel=1e-10)
    assert r[2] == 0.0


def test_run_monotone_objective_and_margin():
    o, truth, _ = _scene(seed=15)
    cfg = SolverConfig(rank=3, max_iter=120, tol=0.0)
    state, hist = run(o, cfg)
    f = np.array([h.objective for h in hist])
    assert np.all(np.diff(f) <= 1e-9 * np.maximum(1.0, np.abs(f[:-1])))
    assert all(h.decrease_margin >= -1e-9 for h in hist[1:])


def test_run_anomaly_free_scene_converges_to_zero_sparse():
    o, _, _ = _scene(noise=0.0, count=0)
    state, hist = run(o, SolverConfig(rank=3))
    assert frob_norm(state.sparse) <= 1e-6 * frob_norm(o)
    rec = mode3_product(state.coeff, state.basis.matrix)
    assert frob_norm(Tensor3(rec.data - o.data)) <= 1e-6 * frob_norm(o)


def test_run_recovers_planted_support():
    o, truth, _ = _scene(noise=0.0, seed=17)
    state, hist = run(o, SolverConfig(rank=3))
    scores = np.sqrt(np.einsum("ijk,ijk->ij", state.sparse.data, state.sparse.data))
    detected = scores > 0
    assert np.array_equal(detected, truth)


def test_run_200_iterations_collapse_residuals():
    o, _, _ = _scene(noise=0.0, seed=25)
    state, hist = run(o, SolverConfig(rank=3, max_iter=200, tol=0.0))
    first, last = hist[1], hist[-1]
    assert last.res_sparse <= 1e-3 * first.res_sparse
    assert last.res_basis <= 1e-3 * first.res_basis
    assert last.res_coeff <= 1e-3 * first.res_coeff


def test_run_max_iter_zero_returns_initialization():
    o, _, _ = _scene(seed=19)
    cfg = SolverConfig(rank=3, max_iter=0)
    state, hist = run(o, cfg)
    ref = initialize(o, cfg)
    assert hist == []
    assert np.array_equal(state.coeff.data, ref.coeff.data)
    assert np.array_equal(state.basis.matrix, ref.basis.matrix)


def test_run_stops_on_relative_sparse_change():
    o, _, _ = _scene(seed=21)
    state, hist = run(o, SolverConfig(rank=3, max_iter=500, tol=1e-3))
    assert len(hist) - 1 < 500
    assert hist[-1].rel_sparse_change <= 1e-3


def test_explicit_denoiser_weight_must_match_coupling():
    o, _, _ = _scene(seed=23)
    bad = DenoiserSpec.from_sigmas([0.1] * 3, weight=1.0)
    with pytest.raises(ValueError):
        initialize(o, SolverConfig(rank=3, denoiser=bad))
