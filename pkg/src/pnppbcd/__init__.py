"""Hyperspectral anomaly detection via proximal block coordinate descent
with a plug-and-play eigenimage denoiser."""

from .denoise import (
    DenoiserSpec,
    IdentitySmoother,
    SymmetricLinearSmoother,
    denoise,
    estimate_band_sigmas,
    inverse_denoise,
    phi_eval,
    prior_value,
)
from .detect import RocResult, anomaly_scores, roc_auc, rx_scores
from .hsio import HsiFormatError, load_hsi, load_mask, save_hsi, save_mask
from .penalties import (
    SparsityPenalty,
    group_measure,
    group_prox,
    l1,
    mcp,
    relaxed_lp,
    scad,
)
from .solver import (
    IterationRecord,
    SolverConfig,
    SolverDivergence,
    SolverState,
    initialize,
    objective,
    residuals,
    run,
)
from .stiefel import StiefelPoint, project_stiefel, riemannian_grad_fit, tangent_project
from .synth import SyntheticSpec, synth_scene
from .tensor import Tensor3, fiber3, fold, frob_norm, inner, mode3_product, unfold

__version__ = "0.1.0"
