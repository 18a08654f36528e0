"""Model specification: meaningful regions, priors, configuration, data.

A meaningful region (MR) is a finite interval of a feature's axis that an
analyst considers one qualitative state (for example "normal creatinine").
Each feature j carries K_j such regions. Cluster centers get a mixture prior
with one Gaussian component per region: the component for region k is
centered at the region midpoint and scaled so that a target prior mass
``omega`` falls inside the region. Region labels connect the sampled centers
back to the analyst's vocabulary, which is what the downstream influence and
summary modules consume.

All types here are frozen; arrays they hold are marked read-only. Sampler
state lives in :mod:`clamr.gibbs`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .errors import (
    ConfigError,
    DomainError,
    EmptyRegionError,
    NonFiniteError,
    OverlapError,
)

VARIANCE_MODES = ("application", "simulation")


@dataclass(frozen=True)
class MRInterval:
    """One meaningful region: a finite interval with an optional label."""

    lower: float
    upper: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise NonFiniteError(
                f"region endpoints must be finite, got [{self.lower}, {self.upper}]"
            )
        if not self.lower < self.upper:
            raise EmptyRegionError(
                f"region must satisfy lower < upper, got [{self.lower}, {self.upper}]"
            )

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class MRSpec:
    """The meaningful regions of one feature."""

    feature_name: str
    regions: tuple[MRInterval, ...]
    allow_overlap: bool = False

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if len(self.regions) < 1:
            raise DomainError(f"feature {self.feature_name!r} needs at least one region")

    @property
    def K(self) -> int:
        return len(self.regions)

    @property
    def span(self) -> tuple[float, float]:
        """Hull of the regions: (min lower, max upper)."""
        return (
            min(r.lower for r in self.regions),
            max(r.upper for r in self.regions),
        )


def validate_mr_spec(spec: MRSpec) -> MRSpec:
    """Check a spec and return it with regions sorted by lower endpoint.

    Disjoint mode (the default) allows shared endpoints but no interior
    overlap. Overlap mode accepts any finite intervals, duplicates included.
    Idempotent: validating a validated spec returns an equal spec.
    """
    regions = tuple(sorted(spec.regions, key=lambda r: r.lower))
    if not spec.allow_overlap:
        for left, right in zip(regions, regions[1:]):
            if left.upper > right.lower:
                raise OverlapError(
                    f"feature {spec.feature_name!r}: regions "
                    f"[{left.lower}, {left.upper}] and [{right.lower}, {right.upper}] overlap"
                )
    return dataclasses.replace(spec, regions=regions)


def region_index(spec: MRSpec, x: float) -> int:
    """Region containing ``x`` under the half-open convention, or -1.

    Regions are treated as [lower, upper), except the last (sorted) region
    which is closed at its upper endpoint; a value on a shared boundary
    belongs to the region on its right. With overlapping regions the first
    match in sorted order wins.
    """
    regions = spec.regions
    last = len(regions) - 1
    for k, region in enumerate(regions):
        if region.lower <= x < region.upper:
            return k
        if k == last and x == region.upper:
            return k
    return -1


def default_center_hyperparams(region: MRInterval, omega: float) -> tuple[float, float]:
    """Default (xi, tau^2) for a region: midpoint location, scale chosen so
    the Gaussian places prior mass ``omega`` inside the region."""
    if not 0.0 < omega < 1.0:
        raise DomainError(f"omega must lie in (0, 1), got {omega}")
    xi = region.midpoint
    z = norm.ppf(0.5 * (1.0 + omega))
    tau = region.width / (2.0 * z)
    return xi, tau * tau


@dataclass(frozen=True)
class CenterPriorSpec:
    """Mixture-of-Gaussians prior on one feature's cluster centers.

    One mixture component per region: N(xi[k], tau2[k]) with symmetric
    Dirichlet weights of concentration ``rho / K`` (weights marginalized out
    by the sampler).
    """

    xi: tuple[float, ...]
    tau2: tuple[float, ...]
    rho: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))
        object.__setattr__(self, "tau2", tuple(float(v) for v in self.tau2))
        object.__setattr__(self, "rho", float(self.rho))
        if len(self.xi) != len(self.tau2):
            raise DomainError("xi and tau2 must have one entry per region")
        if len(self.xi) < 1:
            raise DomainError("center prior needs at least one component")
        if not all(np.isfinite(v) for v in self.xi):
            raise NonFiniteError("xi entries must be finite")
        if not all(np.isfinite(v) and v > 0.0 for v in self.tau2):
            raise DomainError("tau2 entries must be finite and positive")
        if not (np.isfinite(self.rho) and self.rho > 0.0):
            raise DomainError(f"rho must be positive, got {self.rho}")

    @property
    def K(self) -> int:
        return len(self.xi)


@dataclass(frozen=True)
class VariancePriorSpec:
    """Gamma(shape, rate) prior on a feature's precision 1/sigma^2."""

    shape: float
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "shape", float(self.shape))
        object.__setattr__(self, "rate", float(self.rate))
        if not (np.isfinite(self.shape) and self.shape > 0.0):
            raise DomainError(f"shape must be positive, got {self.shape}")
        if not (np.isfinite(self.rate) and self.rate > 0.0):
            raise DomainError(f"rate must be positive, got {self.rate}")


def center_prior_from_spec(spec: MRSpec, omega: float = 0.95, rho: float = 1.0) -> CenterPriorSpec:
    """Default center prior for a validated spec: one component per region."""
    spec = validate_mr_spec(spec)
    pairs = [default_center_hyperparams(r, omega) for r in spec.regions]
    return CenterPriorSpec(
        xi=tuple(p[0] for p in pairs),
        tau2=tuple(p[1] for p in pairs),
        rho=rho,
    )


def default_variance_hyperparams(spec: MRSpec, mode: str = "application") -> VariancePriorSpec:
    """Default precision prior scaled by the feature's region hull width.

    ``application`` keeps the prior diffuse relative to the hull width R:
    Gamma(2, 1/R). ``simulation`` concentrates it near measurement scales an
    order below R: Gamma(10/R, 10).
    """
    if mode not in VARIANCE_MODES:
        raise DomainError(f"variance mode must be one of {VARIANCE_MODES}, got {mode!r}")
    lo, hi = validate_mr_spec(spec).span
    width = hi - lo
    if mode == "application":
        return VariancePriorSpec(shape=2.0, rate=1.0 / width)
    return VariancePriorSpec(shape=10.0 / width, rate=10.0)


def center_prior_density(mu, prior: CenterPriorSpec, phi) -> np.ndarray:
    """Mixture prior density of center values ``mu`` under weights ``phi``.

    ``phi`` must be a probability vector over the prior's K components
    (nonnegative, summing to 1 within 1e-12).
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (prior.K,):
        raise DomainError(f"phi must have length {prior.K}, got shape {phi.shape}")
    if np.any(phi < 0.0) or not np.all(np.isfinite(phi)):
        raise DomainError("phi entries must be finite and nonnegative")
    if abs(float(phi.sum()) - 1.0) > 1e-12:
        raise DomainError(f"phi must sum to 1 within 1e-12, got {phi.sum()!r}")
    mu = np.asarray(mu, dtype=np.float64)
    xi = np.asarray(prior.xi)
    tau2 = np.asarray(prior.tau2)
    z = mu[..., None] - xi
    dens = np.exp(-0.5 * z * z / tau2) / np.sqrt(2.0 * np.pi * tau2)
    return dens @ phi


@dataclass(frozen=True)
class ModelConfig:
    """Everything the sampler needs besides the data.

    ``L`` is the overfitted number of mixture components; its symmetric
    Dirichlet weights (concentration ``gamma / L``) are marginalized out.
    ``center_priors`` and ``variance_priors`` are per feature, in data column
    order. ``seed`` keys a counter-based Philox stream; chain i of a
    multi-chain run uses ``seed + i``.
    """

    center_priors: tuple[CenterPriorSpec, ...]
    variance_priors: tuple[VariancePriorSpec, ...]
    L: int = 10
    gamma: float = 1.0
    omega: float = 0.95
    iterations: int = 5000
    burn_in: int = 1000
    thin: int = 5
    chains: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "center_priors", tuple(self.center_priors))
        object.__setattr__(self, "variance_priors", tuple(self.variance_priors))
        if len(self.center_priors) != len(self.variance_priors):
            raise ConfigError("need one center prior and one variance prior per feature")
        if len(self.center_priors) < 1:
            raise ConfigError("need at least one feature")
        if self.L < 1:
            raise ConfigError(f"L must be at least 1, got {self.L}")
        if not (np.isfinite(self.gamma) and self.gamma > 0.0):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not 0.0 < self.omega < 1.0:
            raise ConfigError(f"omega must lie in (0, 1), got {self.omega}")
        if self.iterations < 1:
            raise ConfigError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError(
                f"burn_in must satisfy 0 <= burn_in < iterations, got {self.burn_in}"
            )
        if self.thin < 1:
            raise ConfigError(f"thin must be at least 1, got {self.thin}")
        if self.chains < 1:
            raise ConfigError(f"chains must be at least 1, got {self.chains}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def p(self) -> int:
        return len(self.center_priors)

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    @property
    def K(self) -> tuple[int, ...]:
        return tuple(cp.K for cp in self.center_priors)


def build_config(
    mr_specs: Sequence[MRSpec],
    omega: float = 0.95,
    gamma: float = 1.0,
    L: int = 10,
    variance_mode: str = "application",
    rhos: Sequence[float] | float | None = None,
    center_priors: Sequence[CenterPriorSpec | None] | None = None,
    **sampler_kwargs,
) -> ModelConfig:
    """Assemble a :class:`ModelConfig` from per-feature region specs.

    ``rhos`` may be a scalar (shared), a per-feature sequence, or None for
    the uncalibrated default of 1.0. Entries of ``center_priors`` override
    the default midpoint/omega construction for their feature when given.
    """
    mr_specs = [validate_mr_spec(s) for s in mr_specs]
    p = len(mr_specs)
    if rhos is None:
        rho_vec = [1.0] * p
    elif np.isscalar(rhos):
        rho_vec = [float(rhos)] * p
    else:
        rho_vec = [float(r) for r in rhos]
        if len(rho_vec) != p:
            raise ConfigError(f"rhos must have one entry per feature ({p}), got {len(rho_vec)}")
    if center_priors is None:
        center_priors = [None] * p
    elif len(center_priors) != p:
        raise ConfigError("center_priors overrides must have one entry per feature")
    built = []
    for spec, rho, override in zip(mr_specs, rho_vec, center_priors):
        if override is not None:
            if override.K != spec.K:
                raise ConfigError(
                    f"feature {spec.feature_name!r}: override has {override.K} "
                    f"components but the spec has {spec.K} regions"
                )
            built.append(override)
        else:
            built.append(center_prior_from_spec(spec, omega=omega, rho=rho))
    variances = tuple(default_variance_hyperparams(s, variance_mode) for s in mr_specs)
    return ModelConfig(
        center_priors=tuple(built),
        variance_priors=variances,
        L=L,
        gamma=gamma,
        omega=omega,
        **sampler_kwargs,
    )


@dataclass(frozen=True)
class PriorArrays:
    """Per-feature priors flattened to padded arrays for the kernels.

    ``xi`` and ``tau2`` are (p, Kmax); cells past a feature's K are padding
    (tau2 padded with 1.0 so logs stay finite) and are never indexed.
    """

    xi: np.ndarray
    tau2: np.ndarray
    K: np.ndarray
    rho: np.ndarray
    lam: np.ndarray
    beta: np.ndarray

    @classmethod
    def from_config(cls, config: ModelConfig) -> "PriorArrays":
        p = config.p
        kmax = max(cp.K for cp in config.center_priors)
        xi = np.zeros((p, kmax), dtype=np.float64)
        tau2 = np.ones((p, kmax), dtype=np.float64)
        kvec = np.empty(p, dtype=np.int64)
        rho = np.empty(p, dtype=np.float64)
        lam = np.empty(p, dtype=np.float64)
        beta = np.empty(p, dtype=np.float64)
        for j, (cp, vp) in enumerate(zip(config.center_priors, config.variance_priors)):
            kvec[j] = cp.K
            xi[j, : cp.K] = cp.xi
            tau2[j, : cp.K] = cp.tau2
            rho[j] = cp.rho
            lam[j] = vp.shape
            beta[j] = vp.rate
        arrays = cls(xi=xi, tau2=tau2, K=kvec, rho=rho, lam=lam, beta=beta)
        for arr in (xi, tau2, kvec, rho, lam, beta):
            arr.setflags(write=False)
        return arrays

    @property
    def kmax(self) -> int:
        return self.xi.shape[1]


@dataclass(frozen=True)
class Dataset:
    """An (n, p) numeric table with an explicit missingness mask.

    ``values`` holds NaN at missing cells; observed cells must be finite.
    """

    values: np.ndarray
    missing: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        missing = np.array(self.missing, dtype=bool)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DomainError(f"values must be a nonempty 2-D array, got shape {values.shape}")
        if missing.shape != values.shape:
            raise DomainError("missing mask must match the shape of values")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != values.shape[1]:
            raise DomainError("need one feature name per column")
        if len(set(names)) != len(names):
            raise DomainError("feature names must be unique")
        observed = values[~missing]
        if observed.size and not np.all(np.isfinite(observed)):
            raise NonFiniteError("observed values must be finite")
        if np.any(missing.all(axis=0)):
            raise DomainError("every feature needs at least one observed value")
        values[missing] = np.nan
        values.setflags(write=False)
        missing.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_values(cls, values, feature_names: Sequence[str] | None = None) -> "Dataset":
        """Build a dataset from an array, reading NaN cells as missing."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise DomainError(f"values must be 2-D, got shape {values.shape}")
        if feature_names is None:
            feature_names = [f"x{j + 1}" for j in range(values.shape[1])]
        return cls(values=values, missing=np.isnan(values), feature_names=tuple(feature_names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())
