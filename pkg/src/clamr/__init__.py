"""Bayesian mixture clustering with meaningful-region priors on centers.

The model is an overfitted Gaussian mixture whose cluster centers carry, per
feature, a mixture-of-Gaussians prior with one component per analyst-declared
"meaningful region" (an interval such as "normal creatinine"). Region labels
sampled alongside the centers make the fit interpretable: they say in which
region each cluster lives, power a Bayes-factor screen for which features
actually drive the clustering, and translate the posterior into region
shares per cluster.

Modules: :mod:`clamr.model` (specs, priors, data), :mod:`clamr.gibbs` (the
sampler), :mod:`clamr.partition` (distances, PSM, point estimates),
:mod:`clamr.influence` (Bayes factors, rho calibration),
:mod:`clamr.summarize` (region shares, predictive, WAIC, diagnostics),
:mod:`clamr.synth` (synthetic scenarios, baselines, replication harness),
:mod:`clamr.cli` (the ``clamr`` command).

Environment flags: ``CLAMR_NUMBA=0`` disables the compiled kernels (same
results, slower); ``CLAMR_THREADS`` caps worker processes.
"""

__version__ = "0.1.0"

from .errors import (
    CandidateSpaceTooLarge,
    ClamrError,
    ConfigError,
    ConvergenceError,
    DimensionMismatch,
    DomainError,
    EmptyDraws,
    EmptyRegionError,
    InsufficientDraws,
    LengthMismatch,
    LineageError,
    MissingDataError,
    NonFiniteError,
    NumericalUnderflow,
    OverlapError,
)
from .gibbs import ChainState, Draws, concat_draws, run_chain, run_chains
from .influence import (
    InfluenceConfig,
    bayes_factor,
    calibrate_rho,
    induced_mr_partition,
    null_distance,
    posterior_null_probability,
    pretrain_select,
    prior_null_probability,
)
from .model import (
    CenterPriorSpec,
    Dataset,
    ModelConfig,
    MRInterval,
    MRSpec,
    VariancePriorSpec,
    build_config,
    center_prior_density,
    center_prior_from_spec,
    default_center_hyperparams,
    default_variance_hyperparams,
    region_index,
    validate_mr_spec,
)
from .partition import (
    Partition,
    adjusted_rand_index,
    binder_distance,
    canonicalize_labels,
    compute_psm,
    nonempty_projection,
    point_estimate,
    rand_index,
    vi_distance,
)
from .runio import (
    build_manifest,
    check_lineage,
    compute_run_id,
    dataset_from_csv,
    dataset_to_csv,
    draws_from_ndjson,
    draws_to_ndjson,
    labels_to_csv,
    matrix_to_csv,
    mrspec_from_json,
    mrspec_to_json,
    read_manifest,
    sha256_file,
    write_manifest,
)
from .summarize import (
    DeltaSummary,
    DiagnosticsReport,
    delta_summary,
    diagnostics,
    pointwise_loglik,
    posterior_predictive,
    split_rhat,
    waic,
)
from .synth import (
    FitSettings,
    ReplicationResult,
    SimScenario,
    SimTruth,
    hca_complete,
    kmeans,
    replicate_study,
    run_single_replication,
    scenario_mr_specs,
    simulate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
