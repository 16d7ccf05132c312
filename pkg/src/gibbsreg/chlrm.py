"""Clustering hierarchical regression: finite mixture over groups.

Groups are assigned to one of K clusters; all groups in a cluster share a
coefficient vector and a residual variance, and the cluster-level parameters
sit under the same population priors as the hierarchical model.  The mixture
is "broken" with explicit assignment variables, giving seven conjugate full
conditionals per sweep: assignments, mixture weights, cluster coefficients,
population mean, population covariance, cluster variances, and the shared
variance scale.  Empty clusters fall back to their priors, which is exactly
what the general formulas produce with empty sums.

Cluster labels are 1-based and not identified (the likelihood is invariant to
relabeling); downstream summaries should be label-invariant (see
``gibbsreg.clusterpost``).  Occupancy counts for the weight update count
GROUPS per cluster, while the cluster-variance update counts OBSERVATIONS
(the sum of member group sizes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gibbsreg.data import GroupedDataset, stack
from gibbsreg.distributions import (
    categorical_sample,
    dirichlet_sample,
    gamma_sample,
    inv_gamma_sample,
    inv_wishart_sample,
    mvn_sample_from_precision,
    spd_cholesky,
)
from gibbsreg.draws import PartitionDraws, PosteriorDraws, RunConfig
from gibbsreg.elicitation import Hyperparams, ols_fit
from gibbsreg.hlrm import (
    _group_coef_precision_shift,
    _initial_sigma,
    _inv_spd,
    _require_hier,
    fcd_Sigma,
    fcd_beta_pop,
    fcd_xi2,
)
from gibbsreg.lrm import _sigma2_fcd_params


@dataclass
class ChlrmState:
    gamma: np.ndarray          # (m,) labels in 1..K
    omega: np.ndarray          # (K,) simplex
    beta_cluster: np.ndarray   # (K, p)
    sigma2_cluster: np.ndarray  # (K,)
    beta: np.ndarray
    Sigma: np.ndarray
    xi2: float

    def __post_init__(self):
        K = self.omega.shape[0]
        if abs(float(self.omega.sum()) - 1.0) > 1e-8 or np.any(self.omega < 0):
            raise ValueError("omega must lie on the simplex")
        if self.gamma.min() < 1 or self.gamma.max() > K:
            raise ValueError("cluster labels out of range")
        if np.any(self.sigma2_cluster <= 0) or self.xi2 <= 0:
            raise ValueError("variances must be positive")
        spd_cholesky(self.Sigma, "Sigma")


def normal_loglik_rows(y, X, beta_ks, sigma2_ks):
    """Per-row Normal log-densities under every cluster, (n, K)."""
    beta_ks = np.atleast_2d(beta_ks)
    sigma2_ks = np.asarray(sigma2_ks, dtype=float)
    mu = X @ beta_ks.T  # (n, K)
    return (
        -0.5 * np.log(2.0 * np.pi * sigma2_ks)[None, :]
        - (y[:, None] - mu) ** 2 / (2.0 * sigma2_ks)[None, :]
    )


def fcd_gamma(j, omega, beta_ks, sigma2_ks, y_j, X_j, rng) -> int:
    """Sample group j's cluster label (1-based) from its categorical fcd.

    The weights combine the mixture weight with the group's full data
    likelihood under each cluster; everything stays in log space because the
    likelihood products underflow for mismatched clusters.
    """
    omega = np.asarray(omega, dtype=float)
    if not np.any(omega > 0):
        raise ValueError("all mixture weights are zero")
    with np.errstate(divide="ignore"):
        log_w = np.log(omega) + normal_loglik_rows(y_j, X_j, beta_ks, sigma2_ks).sum(axis=0)
    return categorical_sample(log_w, rng)


def group_counts(gamma, K: int) -> np.ndarray:
    """Number of GROUPS per cluster (the mixture-weight sufficient statistic)."""
    return np.bincount(np.asarray(gamma) - 1, minlength=K)


def fcd_omega_params(gamma, alpha0):
    return np.asarray(alpha0, dtype=float) + group_counts(gamma, len(alpha0))


def fcd_omega(gamma, alpha0, rng):
    """Sample the mixture weights from their Dirichlet fcd."""
    return dirichlet_sample(fcd_omega_params(gamma, alpha0), rng)


def _cluster_rows(k, gamma, ds: GroupedDataset):
    members = [ds.groups[j] for j in range(ds.m) if gamma[j] == k]
    if not members:
        return np.empty(0), np.empty((0, ds.p))
    return np.concatenate([g.y for g in members]), np.vstack([g.X for g in members])


def fcd_beta_cluster_params(k, gamma, sigma2_k, beta, Sigma, ds):
    """Mean and covariance of cluster k's coefficient fcd.

    Member groups are concatenated in group-major order; an empty cluster
    yields the population prior N(beta, Sigma) exactly.
    """
    y_k, X_k = _cluster_rows(k, gamma, ds)
    Sigma_inv = _inv_spd(Sigma, "Sigma")
    precision, shift = _group_coef_precision_shift(
        (X_k.T @ X_k)[None], (X_k.T @ y_k)[None], np.atleast_1d(float(sigma2_k)),
        Sigma_inv, Sigma_inv @ np.asarray(beta, dtype=float),
    )
    cov = np.linalg.inv(precision[0])
    return cov @ shift[0], cov


def fcd_beta_cluster(k, gamma, sigma2_k, beta, Sigma, ds, rng):
    y_k, X_k = _cluster_rows(k, gamma, ds)
    Sigma_inv = _inv_spd(Sigma, "Sigma")
    precision, shift = _group_coef_precision_shift(
        (X_k.T @ X_k)[None], (X_k.T @ y_k)[None], np.atleast_1d(float(sigma2_k)),
        Sigma_inv, Sigma_inv @ np.asarray(beta, dtype=float),
    )
    return mvn_sample_from_precision(precision, shift, rng)[0]


def fcd_beta_pop_clustered(beta_ks, active_set, mu0, Lambda0, Sigma, rng):
    """Population-mean fcd summing only over non-empty clusters (K* of them).

    Identical to the hierarchical formula applied to the active subset.
    """
    active_set = np.asarray(active_set, dtype=bool)
    if not active_set.any():
        raise ValueError("no active clusters: every group must belong somewhere")
    return fcd_beta_pop(np.atleast_2d(beta_ks)[active_set], mu0, Lambda0, Sigma, rng)


def fcd_Sigma_clustered(beta_ks, active_set, beta, n0, S0, rng):
    """Population-covariance fcd over the non-empty clusters only."""
    active_set = np.asarray(active_set, dtype=bool)
    if not active_set.any():
        raise ValueError("no active clusters: every group must belong somewhere")
    return fcd_Sigma(np.atleast_2d(beta_ks)[active_set], beta, n0, S0, rng)


def fcd_sigma2_cluster_params(k, gamma, beta_k, nu0, xi2, ds):
    """(shape, rate) of cluster k's variance fcd.

    The shape counts OBSERVATIONS in the cluster (sum of member group sizes);
    an empty cluster reduces to the prior IG(nu0/2, nu0*xi2/2).
    """
    y_k, X_k = _cluster_rows(k, gamma, ds)
    resid = y_k - X_k @ beta_k
    return _sigma2_fcd_params(float(resid @ resid), y_k.shape[0], nu0, xi2)


def fcd_sigma2_cluster(k, gamma, beta_k, nu0, xi2, ds, rng) -> float:
    shape, rate = fcd_sigma2_cluster_params(k, gamma, beta_k, nu0, xi2, ds)
    return float(inv_gamma_sample(shape, rate, rng))


def fcd_xi2_clustered(sigma2_ks, active_set, a0, b0, nu0, rng) -> float:
    """Variance-scale fcd over the non-empty clusters only."""
    active_set = np.asarray(active_set, dtype=bool)
    return fcd_xi2(np.asarray(sigma2_ks)[active_set], a0, b0, nu0, rng)


def default_init_gamma(ds: GroupedDataset, K: int) -> np.ndarray:
    """Initial assignments: identity when K = m, else quantile bins of
    per-group least-squares slopes."""
    m = ds.m
    if K >= m:
        return np.arange(1, m + 1, dtype=np.int64)
    slope_idx = 1 if ds.p > 1 else 0
    slopes = np.empty(m)
    for j, g in enumerate(ds.groups):
        coef, *_ = np.linalg.lstsq(g.X, g.y, rcond=None)
        slopes[j] = coef[slope_idx]
    edges = np.quantile(slopes, np.linspace(0.0, 1.0, K + 1)[1:-1])
    return np.searchsorted(edges, slopes, side="left").astype(np.int64) + 1


def gibbs_chlrm(
    ds: GroupedDataset,
    hyper: Hyperparams,
    K: int | None,
    run_config: RunConfig,
    rng,
    init_gamma=None,
):
    """Run the seven-block Gibbs sweep; returns (PosteriorDraws, PartitionDraws)."""
    _require_hier(hyper)
    if hyper.alpha0 is None:
        raise ValueError("clustering needs alpha0")
    K = ds.m if K is None else int(K)
    if K < 1:
        raise ValueError("K must be at least 1")
    if hyper.alpha0.shape[0] != K:
        raise ValueError(f"alpha0 has length {hyper.alpha0.shape[0]}, expected K={K}")

    view = stack(ds)
    m, p = ds.m, ds.p
    sizes = ds.group_sizes().astype(float)
    row_groups = view.row_groups()

    grams = np.empty((m, p, p))
    xtys = np.empty((m, p))
    for j, g in enumerate(ds.groups):
        grams[j] = g.X.T @ g.X
        xtys[j] = g.X.T @ g.y
    group_indicator = np.zeros((m, view.n))
    if view.n:
        group_indicator[row_groups, np.arange(view.n)] = 1.0

    Lambda0_inv = _inv_spd(hyper.Lambda0, "Lambda0")
    Lambda0_inv_mu0 = Lambda0_inv @ hyper.mu0

    if init_gamma is None:
        gamma = default_init_gamma(ds, K)
    else:
        gamma = np.asarray(init_gamma, dtype=np.int64)
        if gamma.shape != (m,) or gamma.min() < 1 or gamma.max() > K:
            raise ValueError("init_gamma must be (m,) labels in 1..K")
    omega = np.full(K, 1.0 / K)
    if view.n > p:
        fit = ols_fit(view)
        beta_init = np.array(fit.beta_hat)
        sigma2_init = fit.sigma2_hat if fit.sigma2_hat > 0 else hyper.sigma2_0
    else:
        beta_init = np.array(hyper.mu0)
        sigma2_init = hyper.sigma2_0
    beta_ks = np.tile(beta_init, (K, 1))
    sigma2_ks = np.full(K, sigma2_init)
    beta = np.array(hyper.mu0)
    Sigma = _initial_sigma(hyper)
    xi2 = hyper.sigma2_0

    n_kept = run_config.n_kept
    out = {
        "gamma": np.empty((n_kept, m), dtype=np.int64),
        "omega": np.empty((n_kept, K)),
        "beta_cluster": np.empty((n_kept, K, p)),
        "sigma2_cluster": np.empty((n_kept, K)),
        "beta": np.empty((n_kept, p)),
        "Sigma": np.empty((n_kept, p, p)),
        "xi2": np.empty(n_kept),
    }
    loglik = np.empty(n_kept)

    kept = 0
    for sweep in range(1, run_config.iterations + 1):
        # (a) cluster assignments
        if view.n:
            row_ll = normal_loglik_rows(view.y, view.X, beta_ks, sigma2_ks)
            group_ll = group_indicator @ row_ll
        else:
            group_ll = np.zeros((m, K))
        with np.errstate(divide="ignore"):
            log_w = np.log(omega)[None, :] + group_ll
        for j in range(m):
            gamma[j] = categorical_sample(log_w[j], rng)

        counts = group_counts(gamma, K)
        assert counts.sum() == m
        active = counts > 0
        k_star = int(active.sum())
        assert k_star >= 1

        # (b) mixture weights
        omega = dirichlet_sample(hyper.alpha0 + counts, rng)

        # (c) cluster coefficients
        onehot = np.zeros((m, K))
        onehot[np.arange(m), gamma - 1] = 1.0
        cluster_grams = np.einsum("mk,mab->kab", onehot, grams)
        cluster_xtys = onehot.T @ xtys
        Sigma_inv = _inv_spd(Sigma, "Sigma")
        precision, shift = _group_coef_precision_shift(
            cluster_grams, cluster_xtys, sigma2_ks, Sigma_inv, Sigma_inv @ beta
        )
        beta_ks = mvn_sample_from_precision(precision, shift, rng)

        # (d) population mean over the K* active clusters
        precision = Lambda0_inv + k_star * Sigma_inv
        shift = Lambda0_inv_mu0 + Sigma_inv @ beta_ks[active].sum(axis=0)
        beta = mvn_sample_from_precision(precision, shift, rng)

        # (e) population covariance over the active clusters
        dev = beta_ks[active] - beta
        Sigma = inv_wishart_sample(hyper.n0 + k_star, hyper.S0 + dev.T @ dev, rng)

        # (f) cluster variances; occupancy counts observations here
        row_clusters = gamma[row_groups] - 1 if view.n else np.empty(0, dtype=np.int64)
        if view.n:
            mu_rows = np.einsum("np,np->n", view.X, beta_ks[row_clusters])
            e2 = (view.y - mu_rows) ** 2
            ssr = np.bincount(row_clusters, weights=e2, minlength=K)
            nobs = np.bincount(row_clusters, minlength=K).astype(float)
        else:
            ssr = np.zeros(K)
            nobs = np.zeros(K)
        shapes = (hyper.nu0 + nobs) / 2.0
        rates = (hyper.nu0 * xi2 + ssr) / 2.0
        sigma2_ks = 1.0 / rng.gamma(shapes, 1.0 / rates)

        # (g) shared variance scale over the active clusters
        xi2 = float(gamma_sample(
            hyper.a0 + k_star * hyper.nu0 / 2.0,
            hyper.b0 + (hyper.nu0 / 2.0) * float(np.sum(1.0 / sigma2_ks[active])),
            rng,
        ))

        if sweep > run_config.burn_in and (sweep - run_config.burn_in) % run_config.thin == 0:
            out["gamma"][kept] = gamma
            out["omega"][kept] = omega
            out["beta_cluster"][kept] = beta_ks
            out["sigma2_cluster"][kept] = sigma2_ks
            out["beta"][kept] = beta
            out["Sigma"][kept] = Sigma
            out["xi2"][kept] = xi2
            loglik[kept] = float(
                np.sum(-0.5 * nobs * np.log(2.0 * np.pi * sigma2_ks) - ssr / (2.0 * sigma2_ks))
            )
            kept += 1

    draws = PosteriorDraws(
        model="chlrm",
        params=out,
        loglik=loglik,
        burn_in=run_config.burn_in,
        thin=run_config.thin,
        seed=run_config.seed,
    )
    return draws, PartitionDraws(gammas=out["gamma"], n_clusters=K)


def state_at(draws: PosteriorDraws, b: int) -> ChlrmState:
    """Materialize (and validate) the b-th kept state."""
    return ChlrmState(
        gamma=draws.params["gamma"][b],
        omega=draws.params["omega"][b],
        beta_cluster=draws.params["beta_cluster"][b],
        sigma2_cluster=draws.params["sigma2_cluster"][b],
        beta=draws.params["beta"][b],
        Sigma=draws.params["Sigma"][b],
        xi2=float(draws.params["xi2"][b]),
    )
