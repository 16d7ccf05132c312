"""Hierarchical Normal linear regression with group-specific coefficients
and variances.

Each group j has its own coefficient vector and residual variance; the
coefficients share a Normal population distribution with unknown mean and
covariance, and the variances share an inverse-Gamma distribution tied
together by an unknown scale.  All five full conditionals are conjugate, so
one Gibbs sweep updates, in order: every group's coefficients, the population
mean, the population covariance, every group's variance, and the shared
variance scale.  Groups of unequal size are handled throughout (the balanced
design is the special case n_j = n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from gibbsreg.data import GroupedDataset, stack
from gibbsreg.distributions import (
    gamma_sample,
    inv_gamma_sample,
    inv_wishart_sample,
    mvn_sample_from_precision,
    spd_cholesky,
)
from gibbsreg.draws import PosteriorDraws, RunConfig
from gibbsreg.elicitation import Hyperparams, ols_fit
from gibbsreg.lrm import _normal_loglik, _sigma2_fcd_params


@dataclass
class HlrmState:
    beta_group: np.ndarray   # (m, p)
    sigma2_group: np.ndarray  # (m,)
    beta: np.ndarray          # (p,)
    Sigma: np.ndarray         # (p, p)
    xi2: float

    def __post_init__(self):
        if np.any(self.sigma2_group <= 0):
            raise ValueError("all group variances must be positive")
        if self.xi2 <= 0:
            raise ValueError("xi2 must be positive")
        spd_cholesky(self.Sigma, "Sigma")


def _inv_spd(mat, name="matrix"):
    chol = spd_cholesky(mat, name)
    inv_chol = solve_triangular(chol, np.eye(chol.shape[0]), lower=True)
    return inv_chol.T @ inv_chol


def _group_coef_precision_shift(grams, xtys, sigma2s, Sigma_inv, Sigma_inv_beta):
    """Batched precision/shift of the group-coefficient conditionals."""
    precision = Sigma_inv[None] + grams / sigma2s[:, None, None]
    shift = Sigma_inv_beta[None] + xtys / sigma2s[:, None]
    return precision, shift


def fcd_beta_group_params(y_j, X_j, sigma2_j, beta, Sigma):
    """Mean and covariance of one group's coefficient full conditional."""
    Sigma_inv = _inv_spd(Sigma, "Sigma")
    precision, shift = _group_coef_precision_shift(
        (X_j.T @ X_j)[None], (X_j.T @ y_j)[None], np.atleast_1d(float(sigma2_j)),
        Sigma_inv, Sigma_inv @ np.asarray(beta, dtype=float),
    )
    cov = np.linalg.inv(precision[0])
    return cov @ shift[0], cov


def fcd_beta_group(y_j, X_j, sigma2_j, beta, Sigma, rng):
    """Draw one group's coefficients; an empty group draws from N(beta, Sigma)."""
    Sigma_inv = _inv_spd(Sigma, "Sigma")
    precision, shift = _group_coef_precision_shift(
        (X_j.T @ X_j)[None], (X_j.T @ y_j)[None], np.atleast_1d(float(sigma2_j)),
        Sigma_inv, Sigma_inv @ np.asarray(beta, dtype=float),
    )
    return mvn_sample_from_precision(precision, shift, rng)[0]


def _pop_coef_precision_shift(beta_js, mu0, Lambda0_inv, Sigma_inv):
    m = beta_js.shape[0]
    precision = Lambda0_inv + m * Sigma_inv
    total = beta_js.sum(axis=0) if m else np.zeros(mu0.shape[0])
    shift = Lambda0_inv @ mu0 + Sigma_inv @ total
    return precision, shift


def fcd_beta_pop_params(beta_js, mu0, Lambda0, Sigma):
    """Mean and covariance of the population-mean full conditional."""
    beta_js = np.atleast_2d(np.asarray(beta_js, dtype=float))
    if beta_js.size == 0:
        beta_js = beta_js.reshape(0, np.asarray(mu0).shape[0])
    precision, shift = _pop_coef_precision_shift(
        beta_js, np.asarray(mu0, dtype=float),
        _inv_spd(Lambda0, "Lambda0"), _inv_spd(Sigma, "Sigma"),
    )
    cov = np.linalg.inv(precision)
    return cov @ shift, cov


def fcd_beta_pop(beta_js, mu0, Lambda0, Sigma, rng):
    """Draw the population mean given the group coefficients."""
    beta_js = np.atleast_2d(np.asarray(beta_js, dtype=float))
    if beta_js.size == 0:
        beta_js = beta_js.reshape(0, np.asarray(mu0).shape[0])
    precision, shift = _pop_coef_precision_shift(
        beta_js, np.asarray(mu0, dtype=float),
        _inv_spd(Lambda0, "Lambda0"), _inv_spd(Sigma, "Sigma"),
    )
    return mvn_sample_from_precision(precision, shift, rng)


def fcd_Sigma_params(beta_js, beta, n0, S0):
    """(df, scale) of the population-covariance inverse-Wishart conditional."""
    beta_js = np.atleast_2d(np.asarray(beta_js, dtype=float))
    beta = np.asarray(beta, dtype=float)
    if beta_js.size == 0:
        beta_js = beta_js.reshape(0, beta.shape[0])
    dev = beta_js - beta
    return n0 + beta_js.shape[0], np.asarray(S0, dtype=float) + dev.T @ dev


def fcd_Sigma(beta_js, beta, n0, S0, rng):
    """Draw the population covariance of the group coefficients."""
    df, scale = fcd_Sigma_params(beta_js, beta, n0, S0)
    return inv_wishart_sample(df, scale, rng)


def fcd_sigma2_group_params(y_j, X_j, beta_j, nu0, xi2):
    """(shape, rate) of one group's residual-variance conditional."""
    resid = y_j - X_j @ beta_j
    return _sigma2_fcd_params(float(resid @ resid), y_j.shape[0], nu0, xi2)


def fcd_sigma2_group(y_j, X_j, beta_j, nu0, xi2, rng) -> float:
    shape, rate = fcd_sigma2_group_params(y_j, X_j, beta_j, nu0, xi2)
    return float(inv_gamma_sample(shape, rate, rng))


def fcd_xi2_params(sigma2_js, a0, b0, nu0):
    """(shape, rate) of the shared variance-scale Gamma conditional."""
    sigma2_js = np.asarray(sigma2_js, dtype=float)
    m = sigma2_js.shape[0]
    shape = a0 + m * nu0 / 2.0
    rate = b0 + (nu0 / 2.0) * float(np.sum(1.0 / sigma2_js))
    return shape, rate


def fcd_xi2(sigma2_js, a0, b0, nu0, rng) -> float:
    shape, rate = fcd_xi2_params(sigma2_js, a0, b0, nu0)
    return float(gamma_sample(shape, rate, rng))


def _initial_sigma(hyper: Hyperparams) -> np.ndarray:
    p = hyper.p
    if hyper.n0 > p + 1:
        return hyper.S0 / (hyper.n0 - p - 1)
    return np.array(hyper.S0)


def _require_hier(hyper: Hyperparams):
    if hyper.n0 is None or hyper.S0 is None or hyper.a0 is None:
        raise ValueError("hierarchical hyperparameters (n0, S0, a0, b0) are required")


def gibbs_hlrm(ds: GroupedDataset, hyper: Hyperparams, run_config: RunConfig, rng) -> PosteriorDraws:
    """Run the five-block Gibbs sweep and keep thinned states."""
    _require_hier(hyper)
    view = stack(ds)
    m, p = ds.m, ds.p
    sizes = ds.group_sizes().astype(float)
    row_groups = view.row_groups()

    grams = np.empty((m, p, p))
    xtys = np.empty((m, p))
    for j, g in enumerate(ds.groups):
        grams[j] = g.X.T @ g.X
        xtys[j] = g.X.T @ g.y

    Lambda0_inv = _inv_spd(hyper.Lambda0, "Lambda0")
    Lambda0_inv_mu0 = Lambda0_inv @ hyper.mu0

    if view.n > p:
        fit = ols_fit(view)
        beta_init = np.array(fit.beta_hat)
        sigma2_init = fit.sigma2_hat if fit.sigma2_hat > 0 else hyper.sigma2_0
    else:
        beta_init = np.array(hyper.mu0)
        sigma2_init = hyper.sigma2_0
    beta_js = np.tile(beta_init, (m, 1))
    sigma2_js = np.full(m, sigma2_init)
    beta = np.array(hyper.mu0)
    Sigma = _initial_sigma(hyper)
    xi2 = hyper.sigma2_0

    n_kept = run_config.n_kept
    out = {
        "beta_group": np.empty((n_kept, m, p)),
        "sigma2_group": np.empty((n_kept, m)),
        "beta": np.empty((n_kept, p)),
        "Sigma": np.empty((n_kept, p, p)),
        "xi2": np.empty(n_kept),
    }
    loglik = np.empty(n_kept)

    kept = 0
    for sweep in range(1, run_config.iterations + 1):
        Sigma_inv = _inv_spd(Sigma, "Sigma")

        # (a) group coefficients, all groups at once
        precision, shift = _group_coef_precision_shift(
            grams, xtys, sigma2_js, Sigma_inv, Sigma_inv @ beta
        )
        beta_js = mvn_sample_from_precision(precision, shift, rng)

        # (b) population mean
        precision, shift = _pop_coef_precision_shift(beta_js, hyper.mu0, Lambda0_inv, Sigma_inv)
        beta = mvn_sample_from_precision(precision, shift, rng)

        # (c) population covariance
        dev = beta_js - beta
        Sigma = inv_wishart_sample(hyper.n0 + m, hyper.S0 + dev.T @ dev, rng)

        # (d) group variances
        if view.n:
            mu_rows = np.einsum("np,np->n", view.X, beta_js[row_groups])
            e2 = (view.y - mu_rows) ** 2
            ssr = np.bincount(row_groups, weights=e2, minlength=m)
        else:
            ssr = np.zeros(m)
        shapes = (hyper.nu0 + sizes) / 2.0
        rates = (hyper.nu0 * xi2 + ssr) / 2.0
        sigma2_js = 1.0 / rng.gamma(shapes, 1.0 / rates)

        # (e) shared variance scale
        xi2 = float(gamma_sample(
            hyper.a0 + m * hyper.nu0 / 2.0,
            hyper.b0 + (hyper.nu0 / 2.0) * float(np.sum(1.0 / sigma2_js)),
            rng,
        ))

        if sweep > run_config.burn_in and (sweep - run_config.burn_in) % run_config.thin == 0:
            out["beta_group"][kept] = beta_js
            out["sigma2_group"][kept] = sigma2_js
            out["beta"][kept] = beta
            out["Sigma"][kept] = Sigma
            out["xi2"][kept] = xi2
            loglik[kept] = float(
                np.sum(-0.5 * sizes * np.log(2.0 * np.pi * sigma2_js) - ssr / (2.0 * sigma2_js))
            )
            kept += 1

    return PosteriorDraws(
        model="hlrm",
        params=out,
        loglik=loglik,
        burn_in=run_config.burn_in,
        thin=run_config.thin,
        seed=run_config.seed,
    )


def state_at(draws: PosteriorDraws, b: int) -> HlrmState:
    """Materialize (and validate) the b-th kept state."""
    return HlrmState(
        beta_group=draws.params["beta_group"][b],
        sigma2_group=draws.params["sigma2_group"][b],
        beta=draws.params["beta"][b],
        Sigma=draws.params["Sigma"][b],
        xi2=float(draws.params["xi2"][b]),
    )
