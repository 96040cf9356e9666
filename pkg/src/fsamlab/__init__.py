"""Sharpness-aware minimization with Fisher-masked sparse perturbations."""

from .autodiff import finite_diff_grad, loss_and_grad, per_example_loglik_grad
from .config import ExperimentConfig, load_config
from .data import Batch, Dataset, make_synthetic, subsample
from .fisher import (FisherEstimate, MaskSchedule, SparseMask, build_mask, empirical_fisher,
                     random_mask, schedule_tick)
from .harness import (RunRecord, compare, empirical_rate_check, low_resource_sweep,
                      run_experiment)
from .landscape import (Direction, Snapshot, filter_normalized_direction, interp_curve,
                        sharpness_probe, surface_grid)
from .models import ModelSpec, ParamLayout, init_params, param_count
from .optim import OptimHyper, OptimizerState, base_step, zero_state
from .sam import SamConfig, apply_mask, sam_perturbation, sam_step

__version__ = "0.1.0"
