"""Gibbs sampler for the mixture model with region-mixture center priors.

The sampler marginalizes both sets of mixture weights (component weights and
per-feature region weights), so one sweep updates, in order: allocations c,
region labels s, centers mu, variances sigma^2, then the missing cells of y.
Component and label indices are 0-based internally; reports translate.

A chain is a pure function of (config, data, sampler kind): the Philox
stream keyed by the seed drives every draw, so reruns are identical and
multi-chain runs give the same result serial or parallel.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .accel import parallel_map, worker_count
from .errors import ConfigError, DimensionMismatch
from .model import Dataset, ModelConfig, PriorArrays

SAMPLER_KINDS = ("clamr", "bgmm")


@dataclass
class ChainState:
    """Mutable sampler state, confined to one chain.

    ``y`` is the working data matrix with current imputations filled in;
    ``c`` maps observations to components (0-based), ``s`` maps component
    centers to region labels (0-based, shape (L, p)).
    """

    c: np.ndarray
    s: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    y: np.ndarray
    rng: np.random.Generator


@dataclass(frozen=True)
class Draws:
    """Retained draws of one chain (or a pool of chains).

    Shapes: ``c`` (T, n), ``s``/``mu``/``sigma2`` (T, L, p), ``loglik`` (T,),
    ``imputed`` (T, M) values for the cells listed in ``missing_idx`` (M, 2).
    ``standardize`` is None for the region sampler; for the baseline sampler
    it holds the (mean, scale) used internally, and ``mu``/``sigma2``/
    ``imputed`` are on that standardized scale.
    """

    c: np.ndarray
    s: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    loglik: np.ndarray
    imputed: np.ndarray
    missing_idx: np.ndarray
    sampler: str
    chain_id: int
    seed: int
    iterations: int
    burn_in: int
    thin: int
    feature_names: tuple[str, ...]
    K: tuple[int, ...]
    standardize: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def n_retained(self) -> int:
        return self.c.shape[0]

    @property
    def n(self) -> int:
        return self.c.shape[1]

    @property
    def L(self) -> int:
        return self.mu.shape[1]

    @property
    def p(self) -> int:
        return self.mu.shape[2]


@functools.lru_cache(maxsize=64)
def _prior_arrays_cached(config: ModelConfig) -> PriorArrays:
    return PriorArrays.from_config(config)


def _standardization(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature observed mean and sample standard deviation.

    A feature with zero spread keeps scale 1 so standardization stays finite.
    """
    mean = np.empty(data.p)
    scale = np.empty(data.p)
    for j in range(data.p):
        col = data.values[~data.missing[:, j], j]
        mean[j] = col.mean()
        scale[j] = col.std(ddof=1) if col.size > 1 else 0.0
        if not scale[j] > 0.0:
            scale[j] = 1.0
    return mean, scale


def _baseline_priors(p: int) -> PriorArrays:
    """Priors of the plain-mixture baseline on standardized data:
    mu ~ N(0, 1), 1/sigma^2 ~ Gamma(1, 1), a single region per feature."""
    arrays = PriorArrays(
        xi=np.zeros((p, 1)),
        tau2=np.ones((p, 1)),
        K=np.ones(p, dtype=np.int64),
        rho=np.ones(p),
        lam=np.ones(p),
        beta=np.ones(p),
    )
    for arr in (arrays.xi, arrays.tau2, arrays.K, arrays.rho, arrays.lam, arrays.beta):
        arr.setflags(write=False)
    return arrays


def _initial_state(
    config: ModelConfig,
    priors: PriorArrays,
    y0: np.ndarray,
    missing: np.ndarray,
    seed: int,
) -> ChainState:
    """Deterministic-given-seed initialization.

    Region labels start uniform, centers at their labeled region location,
    and variances at the prior mean.  Allocations are seeded by one k-means
    run (k = L, k-means++ seeding on per-feature standardized data) so that
    each component starts on a tight, internally homogeneous slice of the
    data; when n < L the seeding falls back to uniform random assignment.
    A single conditional refresh of centers and variances then replaces the
    prior-mean starting values with draws given that allocation, so the
    first allocation sweep compares components on data-driven scales.
    Missing cells start at the observed feature mean.
    """
    n, p = y0.shape
    ncomp = config.L
    rng = np.random.Generator(np.random.Philox(key=seed))
    y = y0.copy()
    for j in range(p):
        if missing[:, j].any():
            y[missing[:, j], j] = y0[~missing[:, j], j].mean()
    s = np.empty((ncomp, p), dtype=np.int64)
    for j in range(p):
        s[:, j] = rng.integers(0, priors.K[j], size=ncomp)
    mu = np.take_along_axis(priors.xi, s.T, axis=1).T.copy()
    sigma2 = np.empty((ncomp, p))
    for j in range(p):
        lam, beta = priors.lam[j], priors.beta[j]
        sigma2[:, j] = beta / (lam - 1.0) if lam > 1.0 else beta / lam
    if n >= ncomp:
        sd = y.std(axis=0, ddof=1) if n > 1 else np.ones(p)
        x = y / np.where(sd > 0.0, sd, 1.0)
        centers = np.empty((ncomp, p))
        c = np.full(n, -1, dtype=np.int64)
        kernels.kmeans_pp_init(x, ncomp, rng, centers)
        kernels.kmeans_lloyd(x, centers, c, 100)
    else:
        c = rng.integers(0, ncomp, size=n)
    kernels.sweep_centers(y, c, s, mu, sigma2, priors.xi, priors.tau2, rng)
    kernels.sweep_variances(y, c, mu, sigma2, priors.lam, priors.beta, rng)
    return ChainState(c=c, s=s, mu=mu, sigma2=sigma2, y=y, rng=rng)


def update_allocations(state: ChainState, data: Dataset, config: ModelConfig) -> ChainState:
    """One sequential pass of component allocations (in place)."""
    kernels.sweep_allocations(
        state.y, state.mu, state.sigma2, state.c, config.gamma / config.L, state.rng
    )
    return state


def update_labels(state: ChainState, config: ModelConfig) -> ChainState:
    """One sequential pass of region labels (in place)."""
    priors = _prior_arrays_cached(config)
    kernels.sweep_labels(
        state.mu, state.s, priors.xi, priors.tau2, priors.K, priors.rho, state.rng
    )
    return state


def update_centers(state: ChainState, data: Dataset, config: ModelConfig) -> ChainState:
    """Draw all centers from their Gaussian full conditionals (in place)."""
    priors = _prior_arrays_cached(config)
    kernels.sweep_centers(
        state.y, state.c, state.s, state.mu, state.sigma2, priors.xi, priors.tau2, state.rng
    )
    return state


def update_variances(state: ChainState, data: Dataset, config: ModelConfig) -> ChainState:
    """Draw all variances from their inverse-gamma full conditionals (in place)."""
    priors = _prior_arrays_cached(config)
    kernels.sweep_variances(
        state.y, state.c, state.mu, state.sigma2, priors.lam, priors.beta, state.rng
    )
    return state


def impute_missing(state: ChainState, data: Dataset, config: ModelConfig) -> ChainState:
    """Redraw the missing cells from their component's kernel (in place)."""
    miss_i, miss_j = np.nonzero(data.missing)
    if miss_i.size:
        kernels.sweep_impute(
            state.y, miss_i.astype(np.int64), miss_j.astype(np.int64),
            state.c, state.mu, state.sigma2, state.rng,
        )
    return state


def run_chain(
    config: ModelConfig,
    data: Dataset,
    sampler: str = "clamr",
    chain_id: int = 0,
) -> Draws:
    """Run one chain and return its retained draws.

    ``sampler="clamr"`` uses the configured region priors on the data as
    given. ``sampler="bgmm"`` standardizes each feature to observed mean 0
    and sd 1 and runs the single-region baseline (mu ~ N(0,1),
    1/sigma^2 ~ Gamma(1,1)); L, gamma, and the schedule still come from
    ``config``. The chain is seeded with ``config.seed + chain_id``.
    """
    if sampler not in SAMPLER_KINDS:
        raise ConfigError(f"sampler must be one of {SAMPLER_KINDS}, got {sampler!r}")
    if data.p != config.p:
        raise DimensionMismatch(
            f"config describes {config.p} features but the data has {data.p}"
        )
    n_retained = config.n_retained
    if n_retained < 1:
        raise ConfigError(
            "no draws would be retained: (iterations - burn_in) // thin is zero"
        )

    standardize = None
    if sampler == "bgmm":
        mean, scale = _standardization(data)
        y0 = (data.values - mean) / scale
        priors = _baseline_priors(data.p)
        standardize = (mean, scale)
    else:
        y0 = data.values.copy()
        priors = _prior_arrays_cached(config)

    missing = data.missing
    miss_i, miss_j = (idx.astype(np.int64) for idx in np.nonzero(missing))
    seed = int(config.seed) + int(chain_id)
    state = _initial_state(config, priors, np.where(missing, np.nan, y0), missing, seed)

    n, p = state.y.shape
    ncomp = config.L
    gamma_over_l = config.gamma / ncomp
    label_step = bool((priors.K > 1).any())

    out_c = np.empty((n_retained, n), dtype=np.int64)
    out_s = np.empty((n_retained, ncomp, p), dtype=np.int64)
    out_mu = np.empty((n_retained, ncomp, p))
    out_sigma2 = np.empty((n_retained, ncomp, p))
    out_loglik = np.empty(n_retained)
    out_imputed = np.empty((n_retained, miss_i.size))

    t_out = 0
    for it in range(config.iterations):
        kernels.sweep_allocations(
            state.y, state.mu, state.sigma2, state.c, gamma_over_l, state.rng
        )
        if label_step:
            kernels.sweep_labels(
                state.mu, state.s, priors.xi, priors.tau2, priors.K, priors.rho, state.rng
            )
        kernels.sweep_centers(
            state.y, state.c, state.s, state.mu, state.sigma2,
            priors.xi, priors.tau2, state.rng,
        )
        kernels.sweep_variances(
            state.y, state.c, state.mu, state.sigma2, priors.lam, priors.beta, state.rng
        )
        if miss_i.size:
            kernels.sweep_impute(
                state.y, miss_i, miss_j, state.c, state.mu, state.sigma2, state.rng
            )
        if (
            it >= config.burn_in
            and (it - config.burn_in) % config.thin == 0
            and t_out < n_retained
        ):
            out_c[t_out] = state.c
            out_s[t_out] = state.s
            out_mu[t_out] = state.mu
            out_sigma2[t_out] = state.sigma2
            out_loglik[t_out] = kernels.conditional_loglik(
                state.y, state.c, state.mu, state.sigma2
            )
            out_imputed[t_out] = state.y[miss_i, miss_j]
            t_out += 1

    return Draws(
        c=out_c,
        s=out_s,
        mu=out_mu,
        sigma2=out_sigma2,
        loglik=out_loglik,
        imputed=out_imputed,
        missing_idx=np.column_stack([miss_i, miss_j]) if miss_i.size else np.empty((0, 2), dtype=np.int64),
        sampler=sampler,
        chain_id=chain_id,
        seed=seed,
        iterations=config.iterations,
        burn_in=config.burn_in,
        thin=config.thin,
        feature_names=data.feature_names,
        K=tuple(int(k) for k in priors.K),
        standardize=standardize,
    )


def _chain_task(args) -> Draws:
    config, data, sampler, chain_id = args
    return run_chain(config, data, sampler, chain_id)


def run_chains(config: ModelConfig, data: Dataset, sampler: str = "clamr") -> list[Draws]:
    """Run ``config.chains`` independent chains (seeds seed+0, seed+1, ...).

    Chains fan out over worker processes (capped by ``CLAMR_THREADS``); the
    result list is ordered by chain id and identical to a serial run.
    """
    tasks = [(config, data, sampler, i) for i in range(config.chains)]
    return parallel_map(_chain_task, tasks, workers=worker_count(config.chains))


def concat_draws(all_draws: Sequence[Draws]) -> Draws:
    """Pool retained draws from several chains of one run (chain_id -1)."""
    if not all_draws:
        raise ConfigError("need at least one chain to pool")
    first = all_draws[0]
    if len(all_draws) == 1:
        return first
    for other in all_draws[1:]:
        if (other.n, other.L, other.p, other.sampler) != (
            first.n,
            first.L,
            first.p,
            first.sampler,
        ):
            raise DimensionMismatch("chains disagree on dimensions or sampler kind")
    return replace(
        first,
        c=np.concatenate([d.c for d in all_draws]),
        s=np.concatenate([d.s for d in all_draws]),
        mu=np.concatenate([d.mu for d in all_draws]),
        sigma2=np.concatenate([d.sigma2 for d in all_draws]),
        loglik=np.concatenate([d.loglik for d in all_draws]),
        imputed=np.concatenate([d.imputed for d in all_draws]),
        chain_id=-1,
    )
