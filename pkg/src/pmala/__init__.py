"""Position-dependent Langevin samplers and diffusion checks."""

from .diagnostics import EssReport, ReplicateSummary, ess, ess_report, summarize
from .diffusion_lab import (
    EnsembleConfig,
    compare_density,
    em_step,
    simulate_ensemble,
    simulate_path,
)
from .geometry import (
    DiffusionSpec,
    Family,
    MetricBundle,
    assemble_diffusion,
    fokker_planck_residual,
    gamma_drift,
    omega_drift,
    symmetry_defect,
)
from .linalg import SpdMatrix, chol_factor, spd_inverse, spd_solve
from .samplers import ChainTrace, ProposalSpec, log_accept_ratio, make_proposal, run_chain, tune_step_size
from .target import TargetModel, fd_gradient, fd_metric_partials

__version__ = "0.1.0"
