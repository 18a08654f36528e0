"""Hot numerical kernels: Gibbs sweeps, partition losses, PSM, k-means.

Everything here is written as plain scalar loops over numpy arrays so that a
single source serves both execution modes: compiled via numba (default) or
interpreted when ``CLAMR_NUMBA=0``. Numba draws the same ``Generator``
bitstream as numpy, so the modes agree bitwise.

Conventions: component and region-label indices are 0-based ``int64``;
callers translate to the 1-based labels used in reports. Categorical draws
consume exactly one uniform each, which keeps the stream layout easy to
reason about. No ``fastmath`` anywhere: reassociation would break the
bitwise equality between the two modes.
"""

import numpy as np

from .accel import NUMBA_ENABLED, jit_kernel

LOG_2PI = float(np.log(2.0 * np.pi))


@jit_kernel
def sample_categorical_log(logw, m, rng):
    """Draw an index from ``exp(logw[:m])`` (unnormalized); clobbers logw."""
    top = logw[0]
    for i in range(1, m):
        if logw[i] > top:
            top = logw[i]
    total = 0.0
    for i in range(m):
        logw[i] = np.exp(logw[i] - top)
        total += logw[i]
    u = rng.random() * total
    acc = 0.0
    for i in range(m):
        acc += logw[i]
        if u < acc:
            return i
    return m - 1


@jit_kernel
def allocation_logweights(yrow, mu, sigma2, counts, gamma_over_l, out):
    """Unnormalized log weights for one observation's component draw.

    ``counts`` are the allocation counts with the observation itself removed.
    """
    ncomp, p = mu.shape
    for l in range(ncomp):
        acc = np.log(counts[l] + gamma_over_l)
        for j in range(p):
            diff = yrow[j] - mu[l, j]
            acc -= 0.5 * (LOG_2PI + np.log(sigma2[l, j]) + diff * diff / sigma2[l, j])
        out[l] = acc


@jit_kernel
def sweep_allocations(y, mu, sigma2, c, gamma_over_l, rng):
    """One sequential pass of component allocations, updating c in place."""
    n = y.shape[0]
    ncomp = mu.shape[0]
    counts = np.zeros(ncomp, dtype=np.int64)
    for i in range(n):
        counts[c[i]] += 1
    logw = np.empty(ncomp, dtype=np.float64)
    for i in range(n):
        counts[c[i]] -= 1
        allocation_logweights(y[i], mu, sigma2, counts, gamma_over_l, logw)
        c[i] = sample_categorical_log(logw, ncomp, rng)
        counts[c[i]] += 1


@jit_kernel
def label_logweights(muval, xi_j, tau2_j, kj, mcounts_j, rho_over_k, out):
    """Unnormalized log weights for one component's region label.

    ``mcounts_j`` are the label counts for the feature with this component
    removed.
    """
    for k in range(kj):
        diff = muval - xi_j[k]
        out[k] = (
            np.log(mcounts_j[k] + rho_over_k)
            - 0.5 * (LOG_2PI + np.log(tau2_j[k]) + diff * diff / tau2_j[k])
        )


@jit_kernel
def sweep_labels(mu, s, xi, tau2, kvec, rho, rng):
    """One sequential pass of region labels, feature by feature."""
    ncomp, p = mu.shape
    kmax = xi.shape[1]
    logw = np.empty(kmax, dtype=np.float64)
    mcounts = np.empty(kmax, dtype=np.int64)
    for j in range(p):
        kj = kvec[j]
        if kj <= 1:
            continue
        for k in range(kj):
            mcounts[k] = 0
        for l in range(ncomp):
            mcounts[s[l, j]] += 1
        rho_over_k = rho[j] / kj
        for l in range(ncomp):
            mcounts[s[l, j]] -= 1
            label_logweights(mu[l, j], xi[j], tau2[j], kj, mcounts, rho_over_k, logw)
            s[l, j] = sample_categorical_log(logw, kj, rng)
            mcounts[s[l, j]] += 1


@jit_kernel
def center_posterior_params(xi_val, tau2_val, ysum, nmem, sigma2_val):
    """Gaussian full-conditional (mean, variance) for one center.

    With ``nmem == 0`` this collapses to the prior for the labeled region.
    """
    prec = 1.0 / tau2_val + nmem / sigma2_val
    mean = (xi_val / tau2_val + ysum / sigma2_val) / prec
    return mean, 1.0 / prec


@jit_kernel
def sweep_centers(y, c, s, mu, sigma2, xi, tau2, rng):
    """Draw every center from its Gaussian full conditional."""
    n, p = y.shape
    ncomp = mu.shape[0]
    nmem = np.zeros(ncomp, dtype=np.int64)
    ysum = np.zeros((ncomp, p), dtype=np.float64)
    for i in range(n):
        l = c[i]
        nmem[l] += 1
        for j in range(p):
            ysum[l, j] += y[i, j]
    for l in range(ncomp):
        for j in range(p):
            k = s[l, j]
            mean, var = center_posterior_params(
                xi[j, k], tau2[j, k], ysum[l, j], nmem[l], sigma2[l, j]
            )
            mu[l, j] = mean + np.sqrt(var) * rng.standard_normal()


@jit_kernel
def sweep_variances(y, c, mu, sigma2, lam, beta, rng):
    """Draw every variance from its inverse-gamma full conditional."""
    n, p = y.shape
    ncomp = mu.shape[0]
    nmem = np.zeros(ncomp, dtype=np.int64)
    rss = np.zeros((ncomp, p), dtype=np.float64)
    for i in range(n):
        l = c[i]
        nmem[l] += 1
        for j in range(p):
            diff = y[i, j] - mu[l, j]
            rss[l, j] += diff * diff
    for l in range(ncomp):
        for j in range(p):
            shape = lam[j] + 0.5 * nmem[l]
            rate = beta[j] + 0.5 * rss[l, j]
            sigma2[l, j] = 1.0 / rng.gamma(shape, 1.0 / rate)


@jit_kernel
def sweep_impute(y, miss_i, miss_j, c, mu, sigma2, rng):
    """Redraw the missing cells from their component's kernel."""
    for m in range(miss_i.shape[0]):
        i = miss_i[m]
        j = miss_j[m]
        l = c[i]
        y[i, j] = mu[l, j] + np.sqrt(sigma2[l, j]) * rng.standard_normal()


@jit_kernel
def conditional_loglik(y, c, mu, sigma2):
    """Log density of the (imputation-completed) data given the state."""
    n, p = y.shape
    total = 0.0
    for i in range(n):
        l = c[i]
        for j in range(p):
            diff = y[i, j] - mu[l, j]
            total -= 0.5 * (LOG_2PI + np.log(sigma2[l, j]) + diff * diff / sigma2[l, j])
    return total


# ---------------------------------------------------------------------------
# Partition post-processing


@jit_kernel
def _psm_loop(cd):
    draws, n = cd.shape
    out = np.zeros((n, n), dtype=np.float64)
    for t in range(draws):
        for i in range(n):
            ci = cd[t, i]
            for j in range(i + 1, n):
                if cd[t, j] == ci:
                    out[i, j] += 1.0
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i + 1, n):
            out[i, j] /= draws
            out[j, i] = out[i, j]
    return out


def _psm_numpy(cd):
    draws, n = cd.shape
    acc = np.zeros((n, n), dtype=np.float64)
    for t in range(draws):
        row = cd[t]
        acc += row[:, None] == row[None, :]
    acc /= draws
    np.fill_diagonal(acc, 1.0)
    return acc


# The vectorized twin exists because the O(T n^2) loop is the one kernel that
# stays hot even in fallback mode; integer counts divide identically, so the
# two agree bitwise.
psm_matrix = _psm_loop if NUMBA_ENABLED else _psm_numpy


@jit_kernel
def pair_loss(a, b, n, cont, rows, cols, b1, b2, kind):
    """Loss between two 0-based label vectors: kind 0 = Binder, 1 = VI.

    ``cont``, ``rows``, ``cols`` are caller-provided scratch at least
    (b1, b2), (b1,), (b2,) in size.
    """
    for r in range(b1):
        for q in range(b2):
            cont[r, q] = 0.0
    for i in range(n):
        cont[a[i], b[i]] += 1.0
    for r in range(b1):
        rows[r] = 0.0
    for q in range(b2):
        cols[q] = 0.0
    for r in range(b1):
        for q in range(b2):
            rows[r] += cont[r, q]
            cols[q] += cont[r, q]
    if kind == 0:
        if n < 2:
            return 0.0
        sa = 0.0
        sb = 0.0
        sab = 0.0
        for r in range(b1):
            sa += rows[r] * (rows[r] - 1.0) / 2.0
        for q in range(b2):
            sb += cols[q] * (cols[q] - 1.0) / 2.0
        for r in range(b1):
            for q in range(b2):
                sab += cont[r, q] * (cont[r, q] - 1.0) / 2.0
        npairs = n * (n - 1.0) / 2.0
        return (sa + sb - 2.0 * sab) / npairs
    h1 = 0.0
    h2 = 0.0
    mi = 0.0
    for r in range(b1):
        if rows[r] > 0.0:
            h1 -= rows[r] / n * np.log(rows[r] / n)
    for q in range(b2):
        if cols[q] > 0.0:
            h2 -= cols[q] / n * np.log(cols[q] / n)
    for r in range(b1):
        for q in range(b2):
            if cont[r, q] > 0.0:
                mi += cont[r, q] / n * np.log(cont[r, q] * n / (rows[r] * cols[q]))
    vi = h1 + h2 - 2.0 * mi
    if vi < 0.0:
        vi = 0.0
    return vi


@jit_kernel
def expected_partition_losses(cands, draws, weights, kind):
    """Weighted mean loss of each candidate against the draws.

    ``cands`` (D, n) and ``draws`` (T, n) hold 0-based labels; ``weights``
    (T,) are nonnegative with a positive sum.
    """
    ncand, n = cands.shape
    ndraw = draws.shape[0]
    bc = 0
    for d in range(ncand):
        for i in range(n):
            if cands[d, i] + 1 > bc:
                bc = cands[d, i] + 1
    bd = 0
    for t in range(ndraw):
        for i in range(n):
            if draws[t, i] + 1 > bd:
                bd = draws[t, i] + 1
    cont = np.empty((bc, bd), dtype=np.float64)
    rows = np.empty(bc, dtype=np.float64)
    cols = np.empty(bd, dtype=np.float64)
    wsum = 0.0
    for t in range(ndraw):
        wsum += weights[t]
    out = np.empty(ncand, dtype=np.float64)
    for d in range(ncand):
        acc = 0.0
        for t in range(ndraw):
            acc += weights[t] * pair_loss(cands[d], draws[t], n, cont, rows, cols, bc, bd, kind)
        out[d] = acc / wsum
    return out


# ---------------------------------------------------------------------------
# Prior-null Monte Carlo for the influence calibration


@jit_kernel
def prior_null_mc(rho, kreg, gamma, ncomp, n, epsilon, reps, rng):
    """Fraction of prior draws whose induced region partition sits within
    Binder distance ``epsilon`` of the one-block partition.

    Allocations follow the marginalized symmetric-Dirichlet urn with mass
    ``gamma / ncomp`` per component; labels follow the urn with mass
    ``rho / kreg`` per region. One replicate = one (c, s_j) prior draw.
    """
    gamma_over_l = gamma / ncomp
    rho_over_k = rho / kreg
    counts = np.empty(ncomp, dtype=np.int64)
    labels = np.empty(ncomp, dtype=np.int64)
    lcounts = np.empty(kreg, dtype=np.int64)
    occ = np.empty(kreg, dtype=np.int64)
    hits = 0
    for _ in range(reps):
        for l in range(ncomp):
            counts[l] = 0
        for i in range(n):
            total = i + gamma
            u = rng.random() * total
            acc = 0.0
            pick = ncomp - 1
            for l in range(ncomp):
                acc += counts[l] + gamma_over_l
                if u < acc:
                    pick = l
                    break
            counts[pick] += 1
        for k in range(kreg):
            lcounts[k] = 0
        for l in range(ncomp):
            total = l + rho
            u = rng.random() * total
            acc = 0.0
            pick = kreg - 1
            for k in range(kreg):
                acc += lcounts[k] + rho_over_k
                if u < acc:
                    pick = k
                    break
            labels[l] = pick
            lcounts[pick] += 1
        nocc = 0
        for k in range(kreg):
            occ[k] = 0
        for l in range(ncomp):
            if counts[l] > 0:
                nocc += 1
                occ[labels[l]] += 1
        if nocc < 2:
            dist = 0.0
        else:
            same = 0.0
            for k in range(kreg):
                same += occ[k] * (occ[k] - 1.0) / 2.0
            npairs = nocc * (nocc - 1.0) / 2.0
            dist = (npairs - same) / npairs
        if dist < epsilon:
            hits += 1
    return hits / reps


# ---------------------------------------------------------------------------
# k-means (Lloyd with k-means++ seeding)


@jit_kernel
def kmeans_pp_init(x, k, rng, centers):
    """k-means++ seeding: D^2-weighted center choices into ``centers``."""
    n, p = x.shape
    first = int(rng.integers(0, n))
    for j in range(p):
        centers[0, j] = x[first, j]
    d2 = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for j in range(p):
            diff = x[i, j] - centers[0, j]
            acc += diff * diff
        d2[i] = acc
    for c in range(1, k):
        total = 0.0
        for i in range(n):
            total += d2[i]
        if total > 0.0:
            u = rng.random() * total
            acc = 0.0
            pick = n - 1
            for i in range(n):
                acc += d2[i]
                if u < acc:
                    pick = i
                    break
        else:
            pick = int(rng.integers(0, n))
        for j in range(p):
            centers[c, j] = x[pick, j]
        if c < k - 1:
            for i in range(n):
                acc = 0.0
                for j in range(p):
                    diff = x[i, j] - centers[c, j]
                    acc += diff * diff
                if acc < d2[i]:
                    d2[i] = acc


@jit_kernel
def kmeans_lloyd(x, centers, labels, max_iter):
    """Lloyd iterations until assignments stabilize; returns the WCSS.

    A cluster that loses all members keeps its previous center. ``labels``
    must arrive filled with -1 and is updated in place.
    """
    n, p = x.shape
    k = centers.shape[0]
    sums = np.empty((k, p), dtype=np.float64)
    sizes = np.empty(k, dtype=np.int64)
    for _ in range(max_iter):
        changed = 0
        for i in range(n):
            best = 0
            bestd = np.inf
            for c in range(k):
                acc = 0.0
                for j in range(p):
                    diff = x[i, j] - centers[c, j]
                    acc += diff * diff
                if acc < bestd:
                    bestd = acc
                    best = c
            if labels[i] != best:
                labels[i] = best
                changed += 1
        for c in range(k):
            sizes[c] = 0
            for j in range(p):
                sums[c, j] = 0.0
        for i in range(n):
            c = labels[i]
            sizes[c] += 1
            for j in range(p):
                sums[c, j] += x[i, j]
        for c in range(k):
            if sizes[c] > 0:
                for j in range(p):
                    centers[c, j] = sums[c, j] / sizes[c]
        if changed == 0:
            break
    wcss = 0.0
    for i in range(n):
        c = labels[i]
        for j in range(p):
            diff = x[i, j] - centers[c, j]
            wcss += diff * diff
    return wcss
