"""Offline distributionally robust RL on d-rectangular linear MDPs with TV uncertainty."""

from ._backend import NAME as BACKEND
from .algorithms import (
    ALGORITHMS,
    AlgoConfig,
    AlgorithmOutput,
    drpvi,
    modified_va_drpvi,
    run_algorithm,
    va_drpvi,
)
from .experiment import (
    SweepConfig,
    check_partial_coverage,
    check_pessimism,
    compute_phi_report,
    evaluate_suboptimality,
    run_sweep,
)
from .instances import (
    HardInstanceParams,
    build_hard_instance,
    hard_instance_optimal_policy,
    hard_instance_optimal_value,
    random_simplex_mdp,
)
from .io import load_dataset, load_instance, save_dataset, save_instance
from .mdp import (
    InstanceError,
    OfflineDataset,
    TabularLinearDRMDP,
    collect_offline_dataset,
    nominal_kernel,
    uniform_policy,
)
from .robust_dp import (
    RobustDPResult,
    compute_kappa,
    range_shrinkage_bound,
    robust_policy_evaluation,
    robust_value_iteration,
    uncertainty_function,
)
from .tv import DualSolution, tv_dual_inf, tv_dual_sup, tv_worst_case_distribution

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
