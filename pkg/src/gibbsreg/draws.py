"""Chain containers: run configuration, kept draws, partition draws.

A sampler runs ``iterations`` sweeps, discards the first ``burn_in``, and
keeps every ``thin``-th state after that, so the number of kept draws is
``B = (iterations - burn_in) // thin``.  Kept draws carry enough state to
recompute per-observation predictive moments (and hence log-densities and
replicated data) without rerunning the chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from gibbsreg.data import GroupedDataset, stack

#: total sweeps / burn-in / thinning used for headline runs: 510,000 sweeps
#: keep B = 50,000 draws after a 10,000-sweep burn-in, thinning every 10.
DEFAULT_ITERATIONS = 510_000
DEFAULT_BURN_IN = 10_000
DEFAULT_THIN = 10


@dataclass(frozen=True)
class RunConfig:
    iterations: int = DEFAULT_ITERATIONS
    burn_in: int = DEFAULT_BURN_IN
    thin: int = DEFAULT_THIN
    seed: int = 0
    chains: int = 1

    def __post_init__(self):
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.iterations < self.burn_in:
            raise ValueError("iterations must be >= burn_in")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")

    @property
    def n_kept(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    @classmethod
    def from_kept(cls, n_kept: int, burn_in: int = DEFAULT_BURN_IN,
                  thin: int = DEFAULT_THIN, seed: int = 0, chains: int = 1) -> "RunConfig":
        """Configuration keeping exactly ``n_kept`` draws."""
        return cls(iterations=burn_in + thin * n_kept, burn_in=burn_in,
                   thin=thin, seed=seed, chains=chains)

    def kept_sweeps(self):
        """1-based sweep indices whose states are kept."""
        return range(self.burn_in + self.thin, self.iterations + 1, self.thin)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)


@dataclass
class PosteriorDraws:
    """Thinned chain of states plus per-draw log-likelihood.

    ``params`` maps parameter names to arrays whose leading axis indexes the
    kept draws; the key set depends on the model:

    * ``lrm`` / ``lrm-gprior``: ``beta`` (B, p), ``sigma2`` (B,)
    * ``hlrm``: ``beta_group`` (B, m, p), ``sigma2_group`` (B, m),
      ``beta`` (B, p), ``Sigma`` (B, p, p), ``xi2`` (B,)
    * ``chlrm``: ``gamma`` (B, m) with 1-based cluster labels,
      ``omega`` (B, K), ``beta_cluster`` (B, K, p),
      ``sigma2_cluster`` (B, K), plus ``beta``, ``Sigma``, ``xi2``
    """

    model: str
    params: dict
    loglik: np.ndarray
    burn_in: int
    thin: int
    seed: int

    def __post_init__(self):
        if self.loglik.size and not np.all(np.isfinite(self.loglik)):
            raise ValueError("non-finite log-likelihood in kept draws")

    @property
    def n_draws(self) -> int:
        return self.loglik.shape[0]

    def fitted_moments(self, ds: GroupedDataset):
        """Per-observation predictive mean and variance, each (B, N).

        Rows follow the dataset's group-major stacking.
        """
        view = stack(ds)
        B = self.n_draws
        mu = np.empty((B, view.n))
        var = np.empty((B, view.n))
        if self.model in ("lrm", "lrm-gprior"):
            mu[:] = self.params["beta"] @ view.X.T
            var[:] = self.params["sigma2"][:, None]
        elif self.model == "hlrm":
            for j in range(len(view.group_ids)):
                lo, hi = view.offsets[j], view.offsets[j + 1]
                mu[:, lo:hi] = self.params["beta_group"][:, j, :] @ view.X[lo:hi].T
                var[:, lo:hi] = self.params["sigma2_group"][:, j, None]
        elif self.model == "chlrm":
            rows = np.arange(B)
            for j in range(len(view.group_ids)):
                lo, hi = view.offsets[j], view.offsets[j + 1]
                k_idx = self.params["gamma"][:, j] - 1
                coefs = self.params["beta_cluster"][rows, k_idx]  # (B, p)
                mu[:, lo:hi] = coefs @ view.X[lo:hi].T
                var[:, lo:hi] = self.params["sigma2_cluster"][rows, k_idx, None]
        else:
            raise ValueError(f"unknown model {self.model!r}")
        return mu, var

    def obs_log_densities(self, ds: GroupedDataset) -> np.ndarray:
        """Per-draw per-observation Normal log-densities, (B, N)."""
        mu, var = self.fitted_moments(ds)
        y = stack(ds).y
        return -0.5 * np.log(2.0 * np.pi * var) - (y[None, :] - mu) ** 2 / (2.0 * var)


@dataclass
class PartitionDraws:
    """Kept cluster-assignment vectors and their occupancy summaries."""

    gammas: np.ndarray  # (B, m), int, labels in 1..K
    n_clusters: int

    def __post_init__(self):
        self.gammas = np.asarray(self.gammas)
        if self.gammas.ndim != 2:
            raise ValueError("gammas must be (B, m)")
        if self.gammas.size and (
            self.gammas.min() < 1 or self.gammas.max() > self.n_clusters
        ):
            raise ValueError("cluster labels out of range")

    @property
    def n_draws(self) -> int:
        return self.gammas.shape[0]

    @property
    def m(self) -> int:
        return self.gammas.shape[1]

    def counts(self) -> np.ndarray:
        """Per-draw cluster occupancy (number of groups), (B, K)."""
        B = self.gammas.shape[0]
        out = np.zeros((B, self.n_clusters), dtype=np.int64)
        rows = np.repeat(np.arange(B), self.gammas.shape[1])
        np.add.at(out, (rows, self.gammas.ravel() - 1), 1)
        return out

    def k_star(self) -> np.ndarray:
        """Number of non-empty clusters per kept draw."""
        return (self.counts() > 0).sum(axis=1)


def save_draws(path, draws: PosteriorDraws, extra_meta: dict | None = None):
    """Serialize draws to a .npz archive (arrays + one JSON metadata entry)."""
    meta = {
        "model": draws.model,
        "burn_in": draws.burn_in,
        "thin": draws.thin,
        "seed": draws.seed,
    }
    if extra_meta:
        meta.update(extra_meta)
    arrays = {f"param_{k}": v for k, v in draws.params.items()}
    arrays["loglik"] = draws.loglik
    arrays["meta_json"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8
    )
    np.savez_compressed(path, **arrays)


def load_draws(path) -> PosteriorDraws:
    with np.load(path) as archive:
        meta = json.loads(bytes(archive["meta_json"]).decode())
        params = {
            key[len("param_"):]: archive[key]
            for key in archive.files
            if key.startswith("param_")
        }
        loglik = archive["loglik"]
    return PosteriorDraws(
        model=meta["model"],
        params=params,
        loglik=loglik,
        burn_in=meta["burn_in"],
        thin=meta["thin"],
        seed=meta["seed"],
    )
