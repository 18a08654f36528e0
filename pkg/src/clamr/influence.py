"""Feature influence: induced region partitions, Bayes factors, calibration.

A feature influences the clustering when the occupied components spread
their centers across several of its regions. The test statistic is the
Binder distance between the induced region partition of the occupied
components and the one-block partition; the null hypothesis H0 is that this
distance stays below a slack ``epsilon``. The Bayes factor against H0
compares posterior to prior odds, with the prior null probability pinned to
1/2 by calibrating the label concentration ``rho``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConvergenceError, DomainError, EmptyDraws
from .gibbs import ChainState, Draws, concat_draws
from .partition import Partition, nonempty_projection

RHO_BRACKET = (1e-4, 1e4)
MAX_BISECTION_STEPS = 60


@dataclass(frozen=True)
class InfluenceConfig:
    """Settings for the influence screen.

    ``epsilon`` is the null slack on the Binder distance, ``bf_threshold``
    the selection cutoff, ``mc_samples`` the Monte Carlo size for prior
    probabilities (and calibration), ``seed`` the stream key for that MC.
    """

    epsilon: float = 0.1
    bf_threshold: float = 20.0
    mc_samples: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.bf_threshold > 0.0:
            raise DomainError(f"bf_threshold must be positive, got {self.bf_threshold}")
        if self.mc_samples < 1000:
            raise DomainError(f"mc_samples must be at least 1000, got {self.mc_samples}")


def _occupied_label_sizes(c: np.ndarray, s_col: np.ndarray) -> tuple[int, np.ndarray]:
    """Number of occupied components and their region-label block sizes."""
    occupied = np.unique(c)
    sizes = np.bincount(s_col[occupied])
    return occupied.size, sizes[sizes > 0]


def _one_block_distance(n_occ: int, sizes: np.ndarray) -> float:
    """Binder distance from the induced region partition to one block."""
    if n_occ < 2:
        return 0.0
    npairs = n_occ * (n_occ - 1) / 2.0
    same = float((sizes * (sizes - 1.0)).sum()) / 2.0
    return (npairs - same) / npairs


def induced_mr_partition(state: ChainState, j: int) -> Partition:
    """Partition of the occupied components by region label of feature ``j``."""
    if not 0 <= j < state.s.shape[1]:
        raise DomainError(f"feature index {j} out of range for p={state.s.shape[1]}")
    _, occupied = nonempty_projection(state.c)
    return Partition.from_labels(state.s[occupied, j] + 1)


def null_distance(state: ChainState, j: int) -> float:
    """Binder distance of the induced region partition from one block."""
    if not 0 <= j < state.s.shape[1]:
        raise DomainError(f"feature index {j} out of range for p={state.s.shape[1]}")
    n_occ, sizes = _occupied_label_sizes(state.c, state.s[:, j])
    return _one_block_distance(n_occ, sizes)


def posterior_null_probability(draws: Draws | Sequence[Draws], j: int, epsilon: float = 0.1) -> float:
    """Fraction of retained draws whose induced region partition for feature
    ``j`` lies within Binder distance ``epsilon`` of one block."""
    if not isinstance(draws, Draws):
        draws = concat_draws(list(draws))
    if draws.n_retained < 1:
        raise EmptyDraws("need at least one retained draw")
    if not 0 <= j < draws.p:
        raise DomainError(f"feature index {j} out of range for p={draws.p}")
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    hits = 0
    for t in range(draws.n_retained):
        n_occ, sizes = _occupied_label_sizes(draws.c[t], draws.s[t, :, j])
        if _one_block_distance(n_occ, sizes) < epsilon:
            hits += 1
    return hits / draws.n_retained


def bayes_factor(draws: Draws | Sequence[Draws], j: int, epsilon: float = 0.1) -> float:
    """Bayes factor against the null for feature ``j``.

    With the prior null probability calibrated to 1/2, the Bayes factor is
    the posterior odds (1 - p) / p where p is the posterior null
    probability. Returns ``inf`` when no draw satisfies the null and 0.0
    when all do.
    """
    p_null = posterior_null_probability(draws, j, epsilon)
    if p_null == 0.0:
        return float("inf")
    return (1.0 - p_null) / p_null


def pretrain_select(
    draws: Draws | Sequence[Draws],
    epsilons: float | Sequence[float] = 0.1,
    threshold: float = 20.0,
) -> tuple[list[int], np.ndarray]:
    """Screen features by Bayes factor.

    Returns ``(selected, bf)``: the 0-based indices of features whose Bayes
    factor exceeds ``threshold``, and the full Bayes-factor vector.
    ``epsilons`` may be shared or per feature.
    """
    if not isinstance(draws, Draws):
        draws = concat_draws(list(draws))
    p = draws.p
    if np.isscalar(epsilons):
        eps = [float(epsilons)] * p
    else:
        eps = [float(e) for e in epsilons]
        if len(eps) != p:
            raise DomainError(f"epsilons must have one entry per feature ({p}), got {len(eps)}")
    if not threshold > 0.0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    bf = np.array([bayes_factor(draws, j, eps[j]) for j in range(p)])
    selected = [j for j in range(p) if bf[j] > threshold]
    return selected, bf


def prior_null_probability(
    rho: float,
    K: int,
    gamma: float = 1.0,
    L: int = 10,
    n: int = 100,
    epsilon: float = 0.1,
    mc_samples: int = 10000,
    seed: int = 0,
) -> float:
    """Monte Carlo prior probability of the null for one feature.

    Draws (c, s_j) from the marginalized prior: allocations from the
    symmetric-Dirichlet urn (mass gamma/L per component), labels from the
    urn with mass rho/K per region, then checks whether the induced region
    partition of the occupied components is within Binder distance
    ``epsilon`` of one block.
    """
    if not rho > 0.0:
        raise DomainError(f"rho must be positive, got {rho}")
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    if L < 1 or n < 1:
        raise DomainError("L and n must be at least 1")
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if mc_samples < 1:
        raise DomainError("mc_samples must be positive")
    rng = np.random.Generator(np.random.Philox(key=seed))
    return float(
        kernels.prior_null_mc(
            float(rho), int(K), float(gamma), int(L), int(n),
            float(epsilon), int(mc_samples), rng,
        )
    )


def calibrate_rho(
    K: int,
    gamma: float = 1.0,
    L: int = 10,
    n: int = 100,
    epsilon: float = 0.1,
    target: float = 0.5,
    tolerance: float = 0.01,
    mc_samples: int = 10000,
    seed: int = 0,
) -> float:
    """Find rho so the prior null probability hits ``target``.

    Bisects log-rho over [1e-4, 1e4]. Every evaluation reuses the same
    Philox stream (common random numbers), which makes the Monte Carlo
    estimate monotone in rho and the search deterministic. Raises
    :class:`ConvergenceError` if the bracket does not straddle the target or
    the estimate is not within ``tolerance`` after 60 steps.

    K = 1 admits only the one-block partition, so the null probability is 1
    regardless of rho; that request is rejected as uncalibratable.
    """
    if K < 2:
        raise ConvergenceError("calibration needs K >= 2: with one region the null always holds")
    if not 0.0 < target < 1.0:
        raise DomainError(f"target must lie in (0, 1), got {target}")
    if not tolerance > 0.0:
        raise DomainError(f"tolerance must be positive, got {tolerance}")

    def estimate(rho: float) -> float:
        return prior_null_probability(rho, K, gamma, L, n, epsilon, mc_samples, seed)

    lo, hi = RHO_BRACKET
    # the null probability decreases in rho: small rho concentrates labels
    est_lo = estimate(lo)
    est_hi = estimate(hi)
    if abs(est_lo - target) <= tolerance:
        return lo
    if abs(est_hi - target) <= tolerance:
        return hi
    if not (est_hi < target < est_lo):
        raise ConvergenceError(
            f"target {target} not bracketed: estimates {est_lo:.4f} at rho={lo}, "
            f"{est_hi:.4f} at rho={hi}"
        )
    for _ in range(MAX_BISECTION_STEPS):
        mid = float(np.sqrt(lo * hi))
        est = estimate(mid)
        if abs(est - target) <= tolerance:
            return mid
        if est > target:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(
        f"no rho within tolerance {tolerance} of target {target} "
        f"after {MAX_BISECTION_STEPS} bisection steps"
    )
