"""Proximity operators of one- and multi-dimensional total variation.

The 1D solvers (taut string variants, projected Newton, TV-L2 and TV-Lp
dual methods) are combined into 2D and N-D anisotropic TV by proximal
splitting, and used for fused-lasso models and denoising.
"""
from .apps import (
    FusedLassoProblem,
    bench,
    denoise,
    flsa,
    flsa_2d,
    isnr,
    solve_1d,
    solve_fused_lasso,
    worst_case_signal,
)
from .combiners import combine, combine_admm, combine_dr, combine_pd, combine_ppd, l1_prox, tv1d_prox
from .core import SolverOptions, SolverReport, Weights, tv_objective, tv_penalty
from .oracle import oracle_joint_prox, oracle_project_l1, oracle_project_lq, oracle_tv1d_dual_qp
from .tv1d_l1 import (
    prox_tv1d_l1,
    prox_tv1d_l1_classic,
    prox_tv1d_l1_hybrid,
    prox_tv1d_l1_linearized,
)
from .tv1d_l2 import prox_tv1d_l2_gp, prox_tv1d_l2_hybrid, prox_tv1d_l2_msn
from .tv1d_lp import (
    project_lq_ball,
    prox_tv1d_linf,
    prox_tv1d_lp_fw,
    prox_tv1d_lp_gp,
    prox_tv1d_lp_hybrid,
)
from .tv1d_newton import prox_tv1d_l1_pn
from .tvnd import AxisSpec, axis_prox, prox_tv1d, prox_tv2d, prox_tvnd

__version__ = "0.1.0"
