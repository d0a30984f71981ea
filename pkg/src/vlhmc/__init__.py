"""Multi-modal MCMC toolkit: Langevin Hamiltonian Monte Carlo samplers,
variational guide-point proposals, and the diagnostics/benchmark harness.

Set ``VLHMC_NUMBA=0`` before import to select the pure-numpy backend.
"""

from .accel import NUMBA_ENABLED
from .data import Dataset, evaluate_classifier, load_csv, normalize, split
from .diagnostics import MetricSeries, autocorrelation, ess, mmd2, mode_occupancy, rem_series
from .dynamics import (
    DivergenceError,
    DynamicsParams,
    EnergyLedger,
    PhasePoint,
    dlhmc,
    equipotential_transform,
    langevin_half,
    leapfrog,
    thermal_kick,
)
from .samplers import (
    Chain,
    EtParams,
    SamplerConfig,
    estimate_rejection_prob,
    hmc_chain,
    lhmc_chain,
    lhmc_et_chain,
    parallel_hmc,
    vhmc_chain,
)
from .targets import (
    BlrModel,
    GaussianMixtureSpec,
    Target,
    custom_target,
    exact_sample,
    make_blr_target,
    make_gaussian_mixture,
    make_rotated_gaussian,
)
from .varfit import (
    AdamConfig,
    VarFitConfig,
    VariationalMixture,
    adam_minimize,
    build_variational,
    find_modes,
    fit_mode_gaussian,
    rejection_sample,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "Target", "GaussianMixtureSpec", "BlrModel",
    "make_gaussian_mixture", "make_rotated_gaussian", "make_blr_target",
    "custom_target", "exact_sample",
    "PhasePoint", "DynamicsParams", "EnergyLedger", "DivergenceError",
    "leapfrog", "langevin_half", "thermal_kick", "dlhmc", "equipotential_transform",
    "Chain", "SamplerConfig", "EtParams",
    "hmc_chain", "lhmc_chain", "lhmc_et_chain", "vhmc_chain", "parallel_hmc",
    "estimate_rejection_prob",
    "AdamConfig", "VarFitConfig", "VariationalMixture",
    "adam_minimize", "find_modes", "fit_mode_gaussian", "build_variational",
    "rejection_sample",
    "MetricSeries", "autocorrelation", "ess", "mmd2", "rem_series", "mode_occupancy",
    "Dataset", "load_csv", "normalize", "split", "evaluate_classifier",
]
