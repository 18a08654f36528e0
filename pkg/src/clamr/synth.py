"""Synthetic scenarios, baseline clusterers, and the replication harness.

Three scenarios over p = 6 features and 3 true clusters:

* ``misspecified``: cluster kernels are location-scale t (5 df) while the
  fitted model is Gaussian; true centers are drawn from the region-mixture
  prior (mass 0.99) and rejection-resampled into their designated region,
  following a fixed cluster-by-feature region profile.
* ``well_specified``: Gaussian kernels and a region profile redrawn
  uniformly at random each replication (features 1 and 2 use wider region
  tables so random profiles stay separated).
* ``no_mr``: t kernels again, but true centers come from a single wide
  Gaussian spanning each feature's region hull (mass 0.95), so the region
  structure carries no information about the truth.

The baselines run on the raw features on purpose: scale dominance is part
of what the study measures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from . import kernels
from .accel import parallel_map
from .errors import ConfigError, DomainError, MissingDataError
from .gibbs import Draws, concat_draws, run_chains
from .influence import calibrate_rho, pretrain_select
from .model import (
    Dataset,
    MRInterval,
    MRSpec,
    build_config,
    default_center_hyperparams,
    region_index,
    validate_mr_spec,
)
from .partition import Partition, adjusted_rand_index, point_estimate

SCENARIOS = ("misspecified", "well_specified", "no_mr")
REGION_LABELS = ("D", "N", "E")
N_TRUE_CLUSTERS = 3
T_DOF = 5.0

# Region tables: per feature, three (lower, upper) intervals labeled D/N/E.
_MISSPEC_REGIONS = (
    ((-1.0, 1.0), (1.0, 2.0), (2.0, 4.0)),
    ((0.0, 2.0), (2.0, 5.0), (5.0, 10.0)),
    ((-10.0, 2.0), (2.0, 4.0), (4.0, 8.0)),
    ((-0.1, 0.1), (0.1, 0.3), (0.3, 0.5)),
    ((0.0, 100.0), (100.0, 250.0), (250.0, 400.0)),
    ((0.0, 10.0), (10.0, 30.0), (30.0, 200.0)),
)
_WELLSPEC_REGIONS = (
    ((-1.0, 10.0), (10.0, 20.0), (20.0, 40.0)),
    ((0.0, 10.0), (10.0, 25.0), (25.0, 50.0)),
) + _MISSPEC_REGIONS[2:]

# Fixed misspecified-scenario profile: region of each (cluster, feature), 0-based.
_MISSPEC_PROFILE = np.array(
    [
        [0, 2, 0, 1, 0, 2],
        [0, 2, 1, 0, 0, 2],
        [0, 2, 2, 2, 0, 2],
    ],
    dtype=np.int64,
)

# True kernel scales: rows are clusters. Cluster 3 tightens feature 3.
_TRUE_SCALES = np.array(
    [
        [1.0 / 6.0, 0.5, 0.6, 0.05, 20.0, 20.0],
        [1.0 / 6.0, 0.5, 0.6, 0.05, 20.0, 20.0],
        [1.0 / 6.0, 0.5, 1.0 / 3.0, 0.05, 20.0, 20.0],
    ]
)

GENERATOR_OMEGA = 0.99  # prior mass used when drawing true centers in a region
HULL_OMEGA = 0.95  # prior mass over the hull for the no_mr scenario


def scenario_mr_specs(kind: str) -> list[MRSpec]:
    """Region specs used both to generate and to fit a scenario."""
    if kind not in SCENARIOS:
        raise DomainError(f"scenario must be one of {SCENARIOS}, got {kind!r}")
    table = _WELLSPEC_REGIONS if kind == "well_specified" else _MISSPEC_REGIONS
    specs = []
    for j, rows in enumerate(table):
        regions = tuple(
            MRInterval(lower=lo, upper=hi, label=lab)
            for (lo, hi), lab in zip(rows, REGION_LABELS)
        )
        specs.append(validate_mr_spec(MRSpec(feature_name=f"x{j + 1}", regions=regions)))
    return specs


@dataclass(frozen=True)
class SimScenario:
    """One synthetic dataset request."""

    kind: str
    n: int
    seed: int

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise DomainError(f"scenario must be one of {SCENARIOS}, got {self.kind!r}")
        if self.n < N_TRUE_CLUSTERS:
            raise DomainError(f"n must be at least {N_TRUE_CLUSTERS}, got {self.n}")


@dataclass(frozen=True)
class SimTruth:
    """Ground truth behind one simulated dataset.

    ``labels`` are 1-based cluster ids; ``profile`` is the (cluster,
    feature) region table (1-based, None for the no_mr scenario); ``nu`` is
    the t degrees of freedom (None for Gaussian kernels).
    """

    labels: np.ndarray
    mu: np.ndarray
    scale: np.ndarray
    profile: np.ndarray | None
    nu: float | None


def simulate(scenario: SimScenario) -> tuple[Dataset, SimTruth]:
    """Generate one dataset; byte-identical for equal scenarios.

    The stream order is fixed: region profile (well_specified only), then
    true centers cluster-major, then allocations, then the noise matrix.
    """
    rng = np.random.Generator(np.random.Philox(key=scenario.seed))
    specs = scenario_mr_specs(scenario.kind)
    p = len(specs)
    if scenario.kind == "misspecified":
        profile = _MISSPEC_PROFILE
    elif scenario.kind == "well_specified":
        profile = rng.integers(0, N_TRUE_CLUSTERS, size=(N_TRUE_CLUSTERS, p))
    else:
        profile = None

    mu = np.empty((N_TRUE_CLUSTERS, p))
    for l in range(N_TRUE_CLUSTERS):
        for j in range(p):
            if profile is None:
                lo, hi = specs[j].span
                xi, tau2 = default_center_hyperparams(
                    MRInterval(lower=lo, upper=hi), HULL_OMEGA
                )
                mu[l, j] = rng.normal(xi, np.sqrt(tau2))
            else:
                k = int(profile[l, j])
                xi, tau2 = default_center_hyperparams(specs[j].regions[k], GENERATOR_OMEGA)
                draw = rng.normal(xi, np.sqrt(tau2))
                while region_index(specs[j], draw) != k:
                    draw = rng.normal(xi, np.sqrt(tau2))
                mu[l, j] = draw

    labels0 = rng.integers(0, N_TRUE_CLUSTERS, size=scenario.n)
    if scenario.kind == "well_specified":
        noise = rng.standard_normal((scenario.n, p))
        nu = None
    else:
        noise = rng.standard_t(T_DOF, size=(scenario.n, p))
        nu = T_DOF
    values = mu[labels0] + _TRUE_SCALES[labels0] * noise
    data = Dataset.from_values(values, feature_names=[s.feature_name for s in specs])
    truth = SimTruth(
        labels=labels0 + 1,
        mu=mu,
        scale=_TRUE_SCALES.copy(),
        profile=None if profile is None else np.asarray(profile) + 1,
        nu=nu,
    )
    return data, truth


# ---------------------------------------------------------------------------
# Baseline clusterers


def kmeans(
    data: Dataset,
    k: int,
    seed: int = 0,
    restarts: int = 10,
    max_iter: int = 300,
) -> Partition:
    """Lloyd's k-means with k-means++ seeding and WCSS-best restarts.

    Deterministic given the seed: restarts share one Philox stream and ties
    keep the earliest restart. Requires complete data.
    """
    if data.n_missing:
        raise MissingDataError("k-means requires complete data")
    if not 1 <= k <= data.n:
        raise DomainError(f"k must lie in [1, {data.n}], got {k}")
    if restarts < 1:
        raise DomainError(f"restarts must be positive, got {restarts}")
    x = np.ascontiguousarray(data.values)
    rng = np.random.Generator(np.random.Philox(key=seed))
    best_wcss = np.inf
    best_labels = None
    for _ in range(restarts):
        centers = np.empty((k, data.p))
        labels = np.full(data.n, -1, dtype=np.int64)
        kernels.kmeans_pp_init(x, k, rng, centers)
        wcss = kernels.kmeans_lloyd(x, centers, labels, max_iter)
        if wcss < best_wcss:
            best_wcss = wcss
            best_labels = labels
    return Partition.from_labels(best_labels + 1)


def hca_complete(data: Dataset, k: int) -> Partition:
    """Complete-linkage agglomerative clustering cut at k clusters."""
    if data.n_missing:
        raise MissingDataError("hierarchical clustering requires complete data")
    if not 1 <= k <= data.n:
        raise DomainError(f"k must lie in [1, {data.n}], got {k}")
    if k == data.n:
        return Partition.from_labels(np.arange(1, data.n + 1))
    tree = linkage(data.values, method="complete")
    return Partition.from_labels(fcluster(tree, t=k, criterion="maxclust"))


# ---------------------------------------------------------------------------
# Replication harness


@dataclass(frozen=True)
class FitSettings:
    """Sampler schedule shared by every replication."""

    iterations: int = 5000
    burn_in: int = 1000
    thin: int = 5
    chains: int = 1
    L: int = 10
    gamma: float = 1.0
    omega: float = 0.95
    variance_mode: str = "simulation"
    loss: str = "vi"


@dataclass(frozen=True)
class RepRecord:
    """One (replication, method) outcome; ``seed`` is the data seed."""

    scenario: str
    n: int
    seed: int
    method: str
    ari: float
    n_blocks: int
    bayes_factors: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ReplicationResult:
    """All records of one study plus aggregation helpers."""

    records: tuple[RepRecord, ...]
    rho_by_size: tuple[tuple[int, float], ...] = ()

    def aggregate(self) -> list[dict]:
        """Mean and sample sd of ARI and block count per (scenario, n, method)."""
        keys = []
        for r in self.records:
            key = (r.scenario, r.n, r.method)
            if key not in keys:
                keys.append(key)
        rows = []
        for scenario, n, method in keys:
            sub = [r for r in self.records if (r.scenario, r.n, r.method) == (scenario, n, method)]
            aris = np.array([r.ari for r in sub])
            blocks = np.array([r.n_blocks for r in sub], dtype=np.float64)
            rows.append(
                {
                    "scenario": scenario,
                    "n": n,
                    "method": method,
                    "reps": len(sub),
                    "mean_ari": float(aris.mean()),
                    "sd_ari": float(aris.std(ddof=1)) if len(sub) > 1 else 0.0,
                    "mean_blocks": float(blocks.mean()),
                    "sd_blocks": float(blocks.std(ddof=1)) if len(sub) > 1 else 0.0,
                }
            )
        return rows


# Offset separating the data-generation stream from the sampler stream of
# the same replication; reps use consecutive seeds, so any offset much larger
# than the rep count keeps the Philox keys distinct.
_FIT_SEED_OFFSET = 1_000_000_007

METHODS = ("clamr", "bgmm", "kmeans", "hca")


def _fit_mixture(
    data: Dataset,
    specs: Sequence[MRSpec],
    settings: FitSettings,
    rho: float,
    fit_seed: int,
    sampler: str,
) -> Draws:
    config = build_config(
        specs,
        omega=settings.omega,
        gamma=settings.gamma,
        L=settings.L,
        variance_mode=settings.variance_mode,
        rhos=rho,
        iterations=settings.iterations,
        burn_in=settings.burn_in,
        thin=settings.thin,
        chains=settings.chains,
        seed=fit_seed,
    )
    return concat_draws(run_chains(config, data, sampler=sampler))


def run_single_replication(
    kind: str,
    n: int,
    seed: int,
    methods: Sequence[str] = METHODS,
    settings: FitSettings = FitSettings(),
    rho: float = 1.0,
    epsilon: float = 0.1,
    collect_bf: bool = False,
) -> list[RepRecord]:
    """Simulate one dataset and score every requested method on it."""
    for method in methods:
        if method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {method!r}")
    data, truth = simulate(SimScenario(kind=kind, n=n, seed=seed))
    specs = scenario_mr_specs(kind)
    truth_part = Partition.from_labels(truth.labels)
    fit_seed = seed + _FIT_SEED_OFFSET
    records = []
    for method in methods:
        bf = None
        if method in ("clamr", "bgmm"):
            draws = _fit_mixture(data, specs, settings, rho, fit_seed, method)
            estimate, _ = point_estimate(draws.c + 1, loss=settings.loss, candidates="draws")
            if method == "clamr" and collect_bf:
                _, bf_vec = pretrain_select(draws, epsilons=epsilon)
                bf = tuple(float(v) for v in bf_vec)
        elif method == "kmeans":
            estimate = kmeans(data, N_TRUE_CLUSTERS, seed=fit_seed)
        else:
            estimate = hca_complete(data, N_TRUE_CLUSTERS)
        records.append(
            RepRecord(
                scenario=kind,
                n=n,
                seed=seed,
                method=method,
                ari=adjusted_rand_index(estimate, truth_part),
                n_blocks=estimate.n_blocks,
                bayes_factors=bf,
            )
        )
    return records


def _replication_task(args) -> list[RepRecord]:
    return run_single_replication(*args)


def replicate_study(
    kind: str,
    sizes: Sequence[int],
    reps: int,
    methods: Sequence[str] = METHODS,
    settings: FitSettings = FitSettings(),
    base_seed: int = 0,
    epsilon: float = 0.1,
    rho: float | None = None,
    calibration_samples: int = 10000,
    collect_bf: bool = False,
) -> ReplicationResult:
    """Run ``reps`` replications per size and score the requested methods.

    Replication r uses data seed ``base_seed + r``; the sampler seed is
    offset from it, so the whole study is reproducible from ``base_seed``.
    When ``rho`` is None and the region sampler is requested, rho is
    calibrated once per size (prior null probability 1/2 for the scenario's
    3-region features). Replications fan out over worker processes, capped
    by ``CLAMR_THREADS``.
    """
    if reps < 1:
        raise ConfigError(f"reps must be positive, got {reps}")
    if not sizes:
        raise ConfigError("need at least one size")
    tasks = []
    rho_by_size = []
    for n in sizes:
        rho_n = rho
        if rho_n is None:
            if "clamr" in methods:
                rho_n = calibrate_rho(
                    K=N_TRUE_CLUSTERS,
                    gamma=settings.gamma,
                    L=settings.L,
                    n=n,
                    epsilon=epsilon,
                    mc_samples=calibration_samples,
                )
            else:
                rho_n = 1.0
        rho_by_size.append((n, rho_n))
        for r in range(reps):
            tasks.append(
                (kind, n, base_seed + r, tuple(methods), settings, rho_n, epsilon, collect_bf)
            )
    results = parallel_map(_replication_task, tasks)
    records = [rec for group in results for rec in group]
    return ReplicationResult(records=tuple(records), rho_by_size=tuple(rho_by_size))
