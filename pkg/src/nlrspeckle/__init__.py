"""Nonlocal low-rank removal of multiplicative gamma speckle."""

from .errors import *  # noqa: F401,F403
from .fidelity import FidelityParams, ProxConfig, fidelity_grad, fidelity_value, prox_fidelity
from .fileio import read_image, write_image
from .image import NoiseSpec, apply_gamma_noise, clip_positive, from_log, gamma_noise, to_log
from .lowrank import low_rank_update, reweight, surrogate_value, svd, wsvt
from .metrics import Region, enl, psnr, ratio_image, ssim
from .patches import BlockMatchConfig, PatchGroup, block_match, build_weight_matrix, extract, extract_adjoint
from .solver import AlgoParams, ModelParams, SolverState, certificate, objective, parm_fixed, parm_practical

__version__ = "0.1.0"
