"""Sampling and log-density kernels shared by all samplers.

Parameterization conventions used throughout the package:

* ``gamma_sample(shape, rate)`` and ``inv_gamma_sample(shape, rate)`` use the
  **rate** parameterization, i.e. the Gamma density is proportional to
  ``x**(shape-1) * exp(-rate*x)``.  Many libraries (including numpy) default
  to scale = 1/rate; every call site in this package passes a rate.
* ``inv_wishart_sample(df, scale)`` draws a matrix ``W`` whose density is
  proportional to ``|W|**(-(df+p+1)/2) * exp(-tr(scale @ inv(W))/2)``, so
  ``E[W] = scale / (df - p - 1)`` for ``df > p + 1``.
* ``categorical_sample`` takes **unnormalized log-weights** and normalizes
  internally with a max shift; raw probability products underflow quickly,
  so callers always work in log space.

Randomness comes from ``numpy.random.Generator`` (PCG64 via
``numpy.random.default_rng``).  The same seed yields a bit-identical draw
sequence for a fixed call sequence; one generator must not be shared across
concurrently running chains.
"""

from __future__ import annotations

import numpy as np


class NonSpdError(np.linalg.LinAlgError):
    """A matrix that must be symmetric positive-definite is not."""


def make_rng(seed: int | None = None) -> np.random.Generator:
    """Return a PCG64 generator; identical seeds give identical streams."""
    return np.random.default_rng(seed)


def spd_cholesky(mat, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of an SPD matrix, failing with the matrix name."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise NonSpdError(f"{name} must be square, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, rtol=1e-10, atol=1e-12):
        raise NonSpdError(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NonSpdError(f"{name} is not positive-definite: {exc}") from exc


def mvn_sample(mean, cov, rng, size=None):
    """Draw from a multivariate Normal via the Cholesky factor of ``cov``.

    Returns a vector of length p, or an array of shape ``(size, p)``.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    chol = spd_cholesky(cov, "cov")
    if size is None:
        return mean + chol @ rng.standard_normal(mean.shape[0])
    z = rng.standard_normal((size, mean.shape[0]))
    return mean + z @ chol.T


def mvn_logpdf(x, mean, cov) -> float:
    """Exact log-density of N(mean, cov) at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    chol = spd_cholesky(cov, "cov")
    d = mean.shape[0]
    # solve L u = (x - mean); quadratic form is |u|^2
    u = np.linalg.solve(chol, x - mean)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(-0.5 * d * np.log(2.0 * np.pi) - 0.5 * logdet - 0.5 * u @ u)


def mvn_sample_from_precision(precision, shift, rng):
    """Draw from N(P^{-1} shift, P^{-1}) given the precision matrix P.

    Assembles nothing beyond one Cholesky and two solves, so near-singular
    covariances never get inverted explicitly.  Batched: ``precision`` may be
    ``(..., p, p)`` with ``shift`` ``(..., p)``; one draw per leading index.
    """
    precision = np.asarray(precision, dtype=float)
    shift = np.asarray(shift, dtype=float)
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise NonSpdError(f"precision is not positive-definite: {exc}") from exc
    mean = np.linalg.solve(precision, shift[..., None])[..., 0]
    z = rng.standard_normal(shift.shape)
    noise = np.linalg.solve(np.swapaxes(chol, -1, -2), z[..., None])[..., 0]
    return mean + noise


def inv_wishart_sample(df: float, scale, rng, size=None):
    """Draw an SPD matrix with density ∝ |W|^{-(df+p+1)/2} exp(-tr(scale W^{-1})/2).

    ``E[W] = scale / (df - p - 1)`` for ``df > p + 1``.  Sampling runs a
    Bartlett construction of the Wishart on the inverse scale and inverts the
    triangular factor, so every draw is SPD by construction:
    with ``scale = L Lᵀ`` and Bartlett factor ``T``, ``W = M Mᵀ`` for
    ``M = L T^{-ᵀ}``.

    Parameters
    ----------
    df : degrees of freedom, must exceed p - 1.
    scale : SPD matrix (p, p).
    size : optional number of draws; returns (size, p, p) when given.
    """
    scale = np.asarray(scale, dtype=float)
    p = scale.shape[0]
    if df <= p - 1:
        raise ValueError(f"inverse Wishart needs df > p - 1 = {p - 1}, got {df}")
    chol = spd_cholesky(scale, "scale")

    squeeze = size is None
    n = 1 if size is None else int(size)
    # Bartlett factor: chi-square diagonal then standard-normal subdiagonal.
    tmat = np.zeros((n, p, p))
    dof = df - np.arange(p)
    ii = np.arange(p)
    tmat[:, ii, ii] = np.sqrt(rng.chisquare(dof, size=(n, p)))
    if p > 1:
        rows, cols = np.tril_indices(p, -1)
        tmat[:, rows, cols] = rng.standard_normal((n, rows.size))
    m = chol[None] @ np.linalg.inv(np.swapaxes(tmat, -1, -2))
    w = m @ np.swapaxes(m, -1, -2)
    return w[0] if squeeze else w


def gamma_sample(shape: float, rate: float, rng, size=None):
    """Gamma draw(s) with density ∝ x^{shape-1} e^{-rate·x} (rate, not scale)."""
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(rate) <= 0):
        raise ValueError(f"gamma needs shape, rate > 0, got ({shape}, {rate})")
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def inv_gamma_sample(shape: float, rate: float, rng, size=None):
    """Inverse-Gamma draw(s): X with 1/X ~ Gamma(shape, rate)."""
    return 1.0 / gamma_sample(shape, rate, rng, size=size)


def dirichlet_sample(alpha, rng, size=None):
    """Dirichlet draw(s); entries are nonnegative and sum to one."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError(f"dirichlet needs all concentrations > 0, got {alpha}")
    return rng.dirichlet(alpha, size=size)


def beta_sample(a: float, b: float, rng, size=None):
    """Beta draw(s) on (0, 1)."""
    if a <= 0 or b <= 0:
        raise ValueError(f"beta needs a, b > 0, got ({a}, {b})")
    return rng.beta(a, b, size=size)


def categorical_sample(log_weights, rng, size=None):
    """Sample a 1-based index with probability ∝ exp(log_weights).

    Weights are unnormalized log-probabilities; normalization happens after a
    max shift, so adding any constant to all entries changes nothing.  Entries
    of -inf are allowed (zero probability) as long as one entry is finite.
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("log_weights must be a nonempty vector")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise ValueError("log_weights must be finite or -inf")
    top = np.max(lw)
    if top == -np.inf:
        raise ValueError("all categorical log-weights are -inf")
    cum = np.cumsum(np.exp(lw - top))
    total = cum[-1]
    if size is None:
        u = rng.uniform() * total
        return int(np.searchsorted(cum, u, side="right")) + 1
    u = rng.uniform(size=size) * total
    return np.searchsorted(cum, u, side="right").astype(np.int64) + 1
