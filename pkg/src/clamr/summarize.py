"""Interpretation summaries: region shares, predictive draws, WAIC, diagnostics.

The bridge from posterior draws back to the analyst's region vocabulary is
the per-draw share Delta[m, j, k]: the fraction of members of block m of the
reference partition whose own component carries region label k for feature
j. Averaging over draws gives the reported shares and the modal region per
(block, feature).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    EmptyDraws,
    InsufficientDraws,
)
from .gibbs import Draws, concat_draws
from .model import Dataset
from .partition import Partition, point_estimate, rand_index

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class DeltaSummary:
    """Posterior region shares per (block, feature).

    ``delta_bar`` is (M, p, Kmax) with zero padding past a feature's K;
    ``s_star`` holds the modal region (1-based) and ``delta_star`` its share.
    ``samples`` is the per-draw (T, M, p, Kmax) array when retained.
    """

    delta_bar: np.ndarray
    s_star: np.ndarray
    delta_star: np.ndarray
    K: tuple[int, ...]
    samples: np.ndarray | None = None

    @property
    def n_blocks(self) -> int:
        return self.delta_bar.shape[0]

    @property
    def p(self) -> int:
        return self.delta_bar.shape[1]


def delta_summary(
    draws: Draws | Sequence[Draws],
    c_star: Partition,
    retain_samples: bool = False,
) -> DeltaSummary:
    """Average region shares of each reference block, feature by feature.

    For each retained draw, each observation inherits the region label of
    its component; block m's share vector for feature j is the label
    histogram of its members. Shares over k sum to 1 for every (draw, block,
    feature). Ties in the modal region resolve to the smallest label.
    """
    if not isinstance(draws, Draws):
        draws = concat_draws(list(draws))
    if draws.n_retained < 1:
        raise EmptyDraws("need at least one retained draw")
    if len(c_star) != draws.n:
        raise DimensionMismatch(
            f"reference partition covers {len(c_star)} rows, draws cover {draws.n}"
        )
    kvec = np.asarray(draws.K, dtype=np.int64)
    kmax = int(kvec.max())
    t_ret, n, p = draws.n_retained, draws.n, draws.p
    blocks = c_star.blocks()
    m_blocks = len(blocks)
    eye = np.eye(kmax, dtype=np.float64)
    acc = np.zeros((m_blocks, p, kmax))
    samples = np.empty((t_ret, m_blocks, p, kmax)) if retain_samples else None
    for t in range(t_ret):
        shat = draws.s[t][draws.c[t]]  # (n, p) region label of each observation
        onehot = eye[shat]  # (n, p, kmax)
        for m, idx in enumerate(blocks):
            delta_t = onehot[idx].mean(axis=0)
            acc[m] += delta_t
            if retain_samples:
                samples[t, m] = delta_t
    acc /= t_ret
    s_star = np.empty((m_blocks, p), dtype=np.int64)
    delta_star = np.empty((m_blocks, p))
    for j in range(p):
        sub = acc[:, j, : kvec[j]]
        s_star[:, j] = sub.argmax(axis=1) + 1
        delta_star[:, j] = sub.max(axis=1)
    return DeltaSummary(
        delta_bar=acc,
        s_star=s_star,
        delta_star=delta_star,
        K=tuple(int(k) for k in kvec),
        samples=samples,
    )


def posterior_predictive(
    draws: Draws | Sequence[Draws],
    n_samples: int | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell posterior predictive draws.

    Subsamples ``n_samples`` equally spaced retained draws (all of them when
    None) and, for each, draws y[i, j] from the kernel of observation i's
    component. Returns ``(samples, draw_indices)`` with samples shaped
    (S, n, p) on the original data scale (draws from the standardized
    baseline sampler are transformed back). Deterministic given ``seed``.
    """
    if not isinstance(draws, Draws):
        draws = concat_draws(list(draws))
    t_ret = draws.n_retained
    if t_ret < 1:
        raise EmptyDraws("need at least one retained draw")
    if n_samples is None or n_samples >= t_ret:
        idx = np.arange(t_ret)
    elif n_samples < 1:
        raise DomainError(f"n_samples must be positive, got {n_samples}")
    else:
        idx = np.unique(np.round(np.linspace(0, t_ret - 1, n_samples)).astype(np.int64))
    rng = np.random.Generator(np.random.Philox(key=seed))
    out = np.empty((idx.size, draws.n, draws.p))
    for pos, t in enumerate(idx):
        mu_t = draws.mu[t][draws.c[t]]
        sd_t = np.sqrt(draws.sigma2[t][draws.c[t]])
        out[pos] = rng.normal(mu_t, sd_t)
    if draws.standardize is not None:
        mean, scale = draws.standardize
        out = out * scale + mean
    return out, idx


def pointwise_loglik(draws: Draws, data: Dataset) -> np.ndarray:
    """Observed-data log likelihood per (retained draw, observation).

    Missing cells contribute nothing. For the standardized baseline sampler
    the density is evaluated on the original scale (the per-feature Jacobian
    -log scale_j is included), so values are comparable across samplers.
    """
    if data.n != draws.n or data.p != draws.p:
        raise DimensionMismatch(
            f"draws describe ({draws.n}, {draws.p}) but the data is ({data.n}, {data.p})"
        )
    y = data.values
    obs = ~data.missing
    jacobian = 0.0
    if draws.standardize is not None:
        mean, scale = draws.standardize
        y = (y - mean) / scale
        jacobian = -(obs * np.log(scale)).sum(axis=1)
    y0 = np.where(obs, y, 0.0)
    out = np.empty((draws.n_retained, draws.n))
    for t in range(draws.n_retained):
        mu_t = draws.mu[t][draws.c[t]]
        s2_t = draws.sigma2[t][draws.c[t]]
        cell = -0.5 * (LOG_2PI + np.log(s2_t) + (y0 - mu_t) ** 2 / s2_t)
        out[t] = (cell * obs).sum(axis=1) + jacobian
    return out


def waic(draws: Draws | Sequence[Draws], data: Dataset) -> tuple[float, float, float]:
    """WAIC on the deviance scale: smaller is better.

    Returns ``(waic, lppd, p_waic)`` with the variance form of the penalty,
    p_waic = sum_i var_t(log lik_it) using the sample variance. Needs at
    least two retained draws.
    """
    if not isinstance(draws, Draws):
        draws = concat_draws(list(draws))
    if draws.n_retained < 2:
        raise InsufficientDraws("WAIC needs at least two retained draws")
    ll = pointwise_loglik(draws, data)
    t_ret = ll.shape[0]
    top = ll.max(axis=0)
    lppd = float((top + np.log(np.exp(ll - top).mean(axis=0))).sum())
    p_waic = float(ll.var(axis=0, ddof=1).sum())
    return -2.0 * (lppd - p_waic), lppd, p_waic


def split_rhat(traces: Sequence[np.ndarray]) -> float | None:
    """Split R-hat over chains; None when undefined (constant traces).

    Each trace is halved (middle element dropped when odd), giving 2C
    sequences. The raw ratio sqrt(Vhat / W) can dip just below 1 on finite
    samples, so the reported value is floored at 1.
    """
    halves = []
    for trace in traces:
        trace = np.asarray(trace, dtype=np.float64)
        half = trace.size // 2
        if half < 2:
            return None
        halves.append(trace[:half])
        halves.append(trace[trace.size - half:])
    seqs = np.asarray(halves)
    length = seqs.shape[1]
    within = float(seqs.var(axis=1, ddof=1).mean())
    if within == 0.0:
        return None
    between = length * float(seqs.mean(axis=1).var(ddof=1))
    vhat = (length - 1) / length * within + between / length
    return max(1.0, float(np.sqrt(vhat / within)))


@dataclass(frozen=True)
class DiagnosticsReport:
    """Per-chain traces and cross-chain agreement summaries.

    ``nmax`` traces the largest cluster size, ``rand_to_ref`` the Rand index
    of each retained draw against the reference partition. R-hat entries are
    None when undefined (single chain or constant trace). ``pairwise_rand``
    compares the chains' own point estimates (1.0 on the diagonal).
    """

    nmax: tuple[np.ndarray, ...]
    rand_to_ref: tuple[np.ndarray, ...]
    loglik: tuple[np.ndarray, ...]
    rhat_nmax: float | None
    rhat_loglik: float | None
    chain_estimates: tuple[Partition, ...]
    pairwise_rand: np.ndarray

    @property
    def n_chains(self) -> int:
        return len(self.nmax)

    @property
    def min_pairwise_rand(self) -> float:
        if self.n_chains < 2:
            return 1.0
        off = self.pairwise_rand[~np.eye(self.n_chains, dtype=bool)]
        return float(off.min())


def diagnostics(
    all_draws: Sequence[Draws] | Draws,
    c_star: Partition,
    loss: str = "vi",
) -> DiagnosticsReport:
    """Mixing and agreement diagnostics for one run.

    R-hat is computed for the largest-cluster-size and conditional
    log-likelihood traces when at least two chains are present; each chain
    also contributes its own expected-loss point estimate for the pairwise
    Rand comparison.
    """
    if isinstance(all_draws, Draws):
        all_draws = [all_draws]
    if not all_draws:
        raise EmptyDraws("need at least one chain")
    for d in all_draws:
        if d.n != len(c_star):
            raise DimensionMismatch(
                f"reference partition covers {len(c_star)} rows, draws cover {d.n}"
            )
    nmax_traces = []
    rand_traces = []
    loglik_traces = []
    estimates = []
    for d in all_draws:
        nmax = np.array([int(np.bincount(d.c[t]).max()) for t in range(d.n_retained)])
        rand = np.array(
            [rand_index(Partition.from_labels(d.c[t] + 1), c_star) for t in range(d.n_retained)]
        )
        nmax_traces.append(nmax)
        rand_traces.append(rand)
        loglik_traces.append(d.loglik.copy())
        estimates.append(point_estimate(d.c + 1, loss=loss, candidates="draws")[0])
    n_chains = len(all_draws)
    pairwise = np.ones((n_chains, n_chains))
    for a in range(n_chains):
        for b in range(a + 1, n_chains):
            pairwise[a, b] = pairwise[b, a] = rand_index(estimates[a], estimates[b])
    rhat_nmax = split_rhat(nmax_traces) if n_chains >= 2 else None
    rhat_loglik = split_rhat(loglik_traces) if n_chains >= 2 else None
    return DiagnosticsReport(
        nmax=tuple(nmax_traces),
        rand_to_ref=tuple(rand_traces),
        loglik=tuple(loglik_traces),
        rhat_nmax=rhat_nmax,
        rhat_loglik=rhat_loglik,
        chain_estimates=tuple(estimates),
        pairwise_rand=pairwise,
    )
