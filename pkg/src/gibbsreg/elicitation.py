"""OLS fitting and default hyperparameter construction.

All three model families share one weakly-informative elicitation built from
the stacked OLS fit: the coefficient prior is centered at the OLS estimate
with covariance ``g * sigma2_0 * inv(X'X)`` where ``g = N`` (one observation's
worth of information), the residual-variance prior is weakly centered at the
OLS residual variance, and the hierarchical layers reuse the same matrix.
Every value can be overridden downstream; this module only computes the
defaults deterministically from the data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from gibbsreg.data import DataError, GroupedDataset, StackedView, stack
from gibbsreg.distributions import spd_cholesky

MODEL_KINDS = ("lrm", "lrm-gprior", "hlrm", "chlrm")

# 2-norm condition number of the design above which the normal equations are
# considered numerically untrustworthy.
CONDITION_WARN_THRESHOLD = 1e12


@dataclass(frozen=True)
class OlsFit:
    beta_hat: np.ndarray
    sigma2_hat: float  # residual SS / (N - p)
    dof: int

    def __post_init__(self):
        if self.sigma2_hat < 0:
            raise ValueError("negative residual variance")


@dataclass(frozen=True)
class Hyperparams:
    """Prior constants; hierarchical/clustering fields are None when unused.

    ``nu0``/``sigma2_0`` parameterize the residual-variance prior
    IG(nu0/2, nu0*sigma2_0/2); ``mu0``/``Lambda0`` the coefficient prior;
    ``n0``/``S0`` the coefficient-covariance prior IW(n0, inv(S0));
    ``a0``/``b0`` the Gamma(a0, b0) prior on the variance-level scale; and
    ``alpha0`` the Dirichlet prior on mixture weights.
    """

    mu0: np.ndarray
    Lambda0: np.ndarray
    nu0: float
    sigma2_0: float
    g: float
    n0: float | None = None
    S0: np.ndarray | None = None
    a0: float | None = None
    b0: float | None = None
    alpha0: np.ndarray | None = None

    def __post_init__(self):
        p = self.mu0.shape[0]
        spd_cholesky(self.Lambda0, "Lambda0")
        if self.nu0 <= 0 or self.sigma2_0 <= 0 or self.g <= 0:
            raise ValueError("nu0, sigma2_0 and g must be positive")
        if self.S0 is not None:
            spd_cholesky(self.S0, "S0")
        if self.n0 is not None and self.n0 <= p - 1:
            raise ValueError(f"n0 must exceed p - 1 = {p - 1}")
        if (self.a0 is None) != (self.b0 is None):
            raise ValueError("a0 and b0 must be set together")
        if self.a0 is not None and (self.a0 <= 0 or self.b0 <= 0):
            raise ValueError("a0 and b0 must be positive")
        if self.alpha0 is not None and np.any(self.alpha0 <= 0):
            raise ValueError("alpha0 entries must be positive")

    @property
    def p(self) -> int:
        return self.mu0.shape[0]

    def override(self, **kwargs) -> "Hyperparams":
        """Replace selected fields, re-running validation."""
        clean = {}
        for key, val in kwargs.items():
            if key in ("mu0", "Lambda0", "S0", "alpha0") and val is not None:
                val = np.asarray(val, dtype=float)
            clean[key] = val
        return replace(self, **clean)


def _qr(X: np.ndarray):
    q, r = np.linalg.qr(X)
    if np.any(np.abs(np.diag(r)) < 1e-12 * max(1.0, np.abs(np.diag(r)).max(initial=0.0))):
        raise DataError("design matrix is rank-deficient")
    cond = np.linalg.cond(r)
    if cond > CONDITION_WARN_THRESHOLD:
        warnings.warn(
            f"design matrix condition number {cond:.3g} exceeds "
            f"{CONDITION_WARN_THRESHOLD:.0e}; results may be unstable",
            RuntimeWarning,
            stacklevel=3,
        )
    return q, r


def ols_fit(stacked: StackedView) -> OlsFit:
    """Ordinary least squares on the stacked data via QR."""
    n, p = stacked.X.shape
    if n <= p:
        raise DataError(f"OLS needs N > p, got N={n}, p={p}")
    q, r = _qr(stacked.X)
    beta = solve_triangular(r, q.T @ stacked.y, lower=False)
    resid = stacked.y - stacked.X @ beta
    dof = n - p
    return OlsFit(beta_hat=beta, sigma2_hat=float(resid @ resid) / dof, dof=dof)


def xtx_inverse(X: np.ndarray) -> np.ndarray:
    """inv(X'X) from a QR factorization (never by inverting X'X itself)."""
    _, r = _qr(X)
    rinv = solve_triangular(r, np.eye(r.shape[0]), lower=False)
    return rinv @ rinv.T


def elicit(ds: GroupedDataset, ols: OlsFit, model_kind: str, K: int | None = None) -> Hyperparams:
    """Default hyperparameters for ``model_kind`` from the OLS summary.

    Fields populated per kind:

    * all kinds: ``mu0 = beta_hat``, ``Lambda0 = g * sigma2_0 * inv(X'X)``
      with ``g = N``, ``nu0 = 1``, ``sigma2_0 = sigma2_hat`` (floored);
    * hierarchical kinds (hlrm, chlrm): ``n0 = p + 2``, ``S0 = Lambda0``,
      ``a0 = 1``, ``b0 = 1 / sigma2_0``;
    * clustering kind (chlrm): ``alpha0 = (1/K, ..., 1/K)``.
    """
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {model_kind!r}, expected one of {MODEL_KINDS}")
    view = stack(ds)
    y_var = float(np.var(view.y)) if view.n else 0.0
    sigma2_0 = max(ols.sigma2_hat, 1e-8 * y_var)
    if sigma2_0 <= 0:
        raise DataError("degenerate data: residual variance and response variance are both zero")

    g = float(view.n)
    lambda0 = g * sigma2_0 * xtx_inverse(view.X)
    lambda0 = (lambda0 + lambda0.T) / 2.0
    hyper = Hyperparams(
        mu0=np.array(ols.beta_hat, dtype=float),
        Lambda0=lambda0,
        nu0=1.0,
        sigma2_0=sigma2_0,
        g=g,
    )
    if model_kind in ("hlrm", "chlrm"):
        hyper = hyper.override(n0=float(view.p + 2), S0=lambda0, a0=1.0, b0=1.0 / sigma2_0)
    if model_kind == "chlrm":
        k = ds.m if K is None else int(K)
        if k < 1:
            raise ValueError("K must be at least 1")
        hyper = hyper.override(alpha0=np.full(k, 1.0 / k))
    return hyper
