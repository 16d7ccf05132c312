"""Pooled Normal linear regression: Gibbs sampler and direct g-prior sampler.

The semi-conjugate model places N(beta0, Sigma0) on the coefficients and
IG(nu0/2, nu0*sigma2_0/2) on the residual variance; both full conditionals
are available in closed form, so the Gibbs sweep is exact two-block sampling.
Under a g-prior the coefficient prior covariance is proportional to
``sigma2 * inv(X'X)`` and the posterior factorizes, so independent draws can
be generated directly with no Markov dependence at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from gibbsreg.data import GroupedDataset, stack
from gibbsreg.distributions import (
    inv_gamma_sample,
    mvn_sample_from_precision,
    spd_cholesky,
)
from gibbsreg.draws import PosteriorDraws, RunConfig
from gibbsreg.elicitation import Hyperparams, ols_fit


@dataclass
class LrmState:
    beta: np.ndarray
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")


def _coef_precision_shift(xtx, xty, sigma2, prior_prec, prior_prec_mean):
    precision = prior_prec + xtx / sigma2
    shift = prior_prec_mean + xty / sigma2
    return precision, shift


def _prior_precision(Sigma0, beta0):
    chol = spd_cholesky(Sigma0, "Sigma0")
    inv_chol = solve_triangular(chol, np.eye(chol.shape[0]), lower=True)
    prec = inv_chol.T @ inv_chol
    return prec, prec @ np.asarray(beta0, dtype=float)


def fcd_beta_params(y, X, sigma2, beta0, Sigma0):
    """Mean and covariance of the coefficient full conditional."""
    prior_prec, prior_prec_mean = _prior_precision(Sigma0, beta0)
    precision, shift = _coef_precision_shift(X.T @ X, X.T @ y, sigma2, prior_prec, prior_prec_mean)
    cov = np.linalg.inv(precision)
    return cov @ shift, cov


def fcd_beta(y, X, sigma2, beta0, Sigma0, rng):
    """One draw of the coefficients given the residual variance."""
    prior_prec, prior_prec_mean = _prior_precision(Sigma0, beta0)
    precision, shift = _coef_precision_shift(X.T @ X, X.T @ y, sigma2, prior_prec, prior_prec_mean)
    return mvn_sample_from_precision(precision, shift, rng)


def _sigma2_fcd_params(ssr: float, n: int, nu0: float, sigma2_0: float):
    return (nu0 + n) / 2.0, (nu0 * sigma2_0 + ssr) / 2.0


def fcd_sigma2_params(y, X, beta, nu0, sigma2_0):
    """(shape, rate) of the residual-variance inverse-Gamma full conditional."""
    resid = y - X @ beta
    return _sigma2_fcd_params(float(resid @ resid), y.shape[0], nu0, sigma2_0)


def fcd_sigma2(y, X, beta, nu0, sigma2_0, rng) -> float:
    """One draw of the residual variance given the coefficients."""
    shape, rate = fcd_sigma2_params(y, X, beta, nu0, sigma2_0)
    return float(inv_gamma_sample(shape, rate, rng))


def _normal_loglik(ssr: float, n: int, sigma2: float) -> float:
    return -0.5 * n * np.log(2.0 * np.pi * sigma2) - ssr / (2.0 * sigma2)


def gibbs_lrm(ds: GroupedDataset, hyper: Hyperparams, run_config: RunConfig, rng) -> PosteriorDraws:
    """Alternate the two full conditionals and keep thinned states."""
    view = stack(ds)
    xtx = view.X.T @ view.X
    xty = view.X.T @ view.y
    prior_prec, prior_prec_mean = _prior_precision(hyper.Lambda0, hyper.mu0)

    if view.n > view.p:
        fit = ols_fit(view)
        beta = np.array(fit.beta_hat)
        sigma2 = fit.sigma2_hat if fit.sigma2_hat > 0 else hyper.sigma2_0
    else:
        beta = np.array(hyper.mu0)
        sigma2 = hyper.sigma2_0

    n_kept = run_config.n_kept
    betas = np.empty((n_kept, view.p))
    sigma2s = np.empty(n_kept)
    loglik = np.empty(n_kept)

    kept = 0
    for sweep in range(1, run_config.iterations + 1):
        precision, shift = _coef_precision_shift(xtx, xty, sigma2, prior_prec, prior_prec_mean)
        beta = mvn_sample_from_precision(precision, shift, rng)
        resid = view.y - view.X @ beta
        ssr = float(resid @ resid)
        shape, rate = _sigma2_fcd_params(ssr, view.n, hyper.nu0, hyper.sigma2_0)
        sigma2 = float(inv_gamma_sample(shape, rate, rng))
        if sweep > run_config.burn_in and (sweep - run_config.burn_in) % run_config.thin == 0:
            betas[kept] = beta
            sigma2s[kept] = sigma2
            loglik[kept] = _normal_loglik(ssr, view.n, sigma2)
            kept += 1

    return PosteriorDraws(
        model="lrm",
        params={"beta": betas, "sigma2": sigma2s},
        loglik=loglik,
        burn_in=run_config.burn_in,
        thin=run_config.thin,
        seed=run_config.seed,
    )


def gprior_quadratic_form(y, X, g: float) -> float:
    """y' (I - g/(g+1) X inv(X'X) X') y computed through a QR hat-matrix action."""
    q, _ = np.linalg.qr(X)
    qty = q.T @ y
    return float(y @ y - (g / (g + 1.0)) * (qty @ qty))


def direct_sample_gprior(
    ds: GroupedDataset, g: float, nu0: float, sigma2_0: float, n_draws: int, rng
) -> PosteriorDraws:
    """Independent posterior draws under the g-prior (no Markov dependence).

    Each draw first samples the residual variance from its marginal
    inverse-Gamma posterior, then the coefficients from the conditional
    Gaussian ``N(g/(g+1) beta_ols, g/(g+1) sigma2 inv(X'X))``.
    """
    if g <= 0:
        raise ValueError("g must be positive")
    view = stack(ds)
    q, r = np.linalg.qr(view.X)
    if np.any(np.abs(np.diag(r)) < 1e-12):
        raise ValueError("design matrix is rank-deficient")
    qty = q.T @ view.y
    beta_ols = solve_triangular(r, qty, lower=False)
    c = g / (g + 1.0)
    ssr_g = float(view.y @ view.y - c * (qty @ qty))

    shape = (nu0 + view.n) / 2.0
    rate = (nu0 * sigma2_0 + ssr_g) / 2.0
    sigma2s = inv_gamma_sample(shape, rate, rng, size=n_draws)
    z = rng.standard_normal((n_draws, view.p))
    # row i of solve(r, z.T).T is inv(R) z_i, with cov inv(X'X)
    betas = c * beta_ols + solve_triangular(r, z.T, lower=False).T * np.sqrt(c * sigma2s)[:, None]

    mu = betas @ view.X.T
    ssr = ((view.y[None, :] - mu) ** 2).sum(axis=1)
    loglik = -0.5 * view.n * np.log(2.0 * np.pi * sigma2s) - ssr / (2.0 * sigma2s)

    return PosteriorDraws(
        model="lrm-gprior",
        params={"beta": betas, "sigma2": sigma2s},
        loglik=loglik,
        burn_in=0,
        thin=1,
        seed=-1,
    )
