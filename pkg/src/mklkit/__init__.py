"""Multiple kernel learning with block l-infinity and composite regularisation.

The main entry points are :func:`fit_linf` (l-infinity MKL), :func:`fit_ckl`
(composite kernel learning), the :func:`fit_l1` / :func:`fit_l2` baselines,
:func:`fit_boost`, the SMO solver :func:`solve_svm` and the synthetic data
generator :func:`generate`.
"""
from .baselines import fit_l1, fit_l2, fit_svm
from .boost import BoostModel, fit_boost, predict_boost
from .ckl import CklModel, fit_ckl, predict_ckl
from .datagen import SyntheticSpec, generate, rho_sweep
from .errors import (InfeasibleProblemError, MatrixValidationError, MKLError, NonConvergenceError,
                     ValidationError)
from .kernels import GramMatrix, GramSet, KernelRecipe, build_gram, repair_psd
from .linf import LinfModel, fit_linf, lambda_update, predict_linf
from .qp import SvmSolution, brute_force_svm, solve_svm
from .serialize import load_model, save_model

__version__ = "0.1.0"
