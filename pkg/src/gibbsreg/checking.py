"""Chain diagnostics, posterior predictive checks, and fit criteria.

Everything here is pure post-processing over kept draws.  Predictive
replicates are drawn once per report and reused by the MSE and every
posterior predictive p-value; the information criteria need only the
per-draw log-likelihoods and the per-observation log-densities.

Reductions over draws sort before summing, which makes the criteria exactly
invariant to the order of the kept draws (floating-point addition is not
commutative-associative otherwise).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from gibbsreg.data import GroupedDataset, stack
from gibbsreg.draws import PosteriorDraws

TEST_STATISTICS = ("mean", "median", "iqr", "sd")

_STAT_FUNCS = {
    "mean": lambda a, axis=-1: np.mean(a, axis=axis),
    "median": lambda a, axis=-1: np.median(a, axis=axis),
    "iqr": lambda a, axis=-1: (
        np.percentile(a, 75, axis=axis) - np.percentile(a, 25, axis=axis)
    ),
    "sd": lambda a, axis=-1: np.std(a, axis=axis),
}


def _ordered_sum(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Sum along an axis in value order, so permutations cannot change it."""
    return np.sum(np.sort(a, axis=axis), axis=axis)


def loglik_trace(draws: PosteriorDraws) -> np.ndarray:
    """Ordered per-draw log-likelihood series (one value per kept draw)."""
    return np.array(draws.loglik)


def split_half_gap(series) -> tuple[float, float]:
    """(|mean(2nd half) - mean(1st half)|, sd of 1st half): stationarity smoke data."""
    series = np.asarray(series, dtype=float)
    half = series.shape[0] // 2
    first, second = series[:half], series[half:]
    return abs(float(second.mean()) - float(first.mean())), float(first.std())


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag (lag 0 is exactly 1)."""
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    denom = float(x @ x)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if denom == 0.0:
        return out
    for lag in range(1, max_lag + 1):
        if lag >= x.shape[0]:
            break
        out[lag] = float(x[:-lag] @ x[lag:]) / denom
    return out


def replicate(draws: PosteriorDraws, ds: GroupedDataset, rng) -> np.ndarray:
    """One predictive replicate of the stacked response per kept draw, (B, N)."""
    mu, var = draws.fitted_moments(ds)
    return mu + np.sqrt(var) * rng.standard_normal(mu.shape)


def ppp_fraction(replicated_stats, observed: float) -> float:
    """Fraction of replicates whose statistic exceeds the observed one.

    Exact ties count one half each, so a statistic the model reproduces
    exactly lands at 0.5 instead of an arbitrary 0 or 1.
    """
    rep = np.asarray(replicated_stats, dtype=float)
    if rep.size == 0:
        raise ValueError("need at least one replicated statistic")
    greater = np.count_nonzero(rep > observed)
    ties = np.count_nonzero(rep == observed)
    return (greater + 0.5 * ties) / rep.size


def ppp(draws: PosteriorDraws, ds: GroupedDataset, statistic: str, scope: str = "global",
        rng=None, y_rep: np.ndarray | None = None):
    """Posterior predictive p-value of a test statistic.

    ``scope="global"`` returns one float over the pooled response;
    ``scope="group"`` returns {group_id: float}.  ``y_rep`` (from
    :func:`replicate`) may be passed to share replicates across calls;
    otherwise a generator seeded from the draws' seed is used.
    """
    if statistic not in _STAT_FUNCS:
        raise ValueError(f"unknown statistic {statistic!r}, expected one of {TEST_STATISTICS}")
    if y_rep is None:
        rng = rng if rng is not None else np.random.default_rng(draws.seed)
        y_rep = replicate(draws, ds, rng)
    stat = _STAT_FUNCS[statistic]
    view = stack(ds)
    if scope == "global":
        return ppp_fraction(stat(y_rep, axis=1), float(stat(view.y)))
    if scope == "group":
        out = {}
        for j, gid in enumerate(view.group_ids):
            lo, hi = view.offsets[j], view.offsets[j + 1]
            out[gid] = ppp_fraction(stat(y_rep[:, lo:hi], axis=1), float(stat(view.y[lo:hi])))
        return out
    raise ValueError(f"unknown scope {scope!r}, expected 'global' or 'group'")


def mse_replicated(draws: PosteriorDraws, ds: GroupedDataset, rng=None,
                   y_rep: np.ndarray | None = None) -> float:
    """Mean squared difference between replicated and observed responses."""
    if y_rep is None:
        rng = rng if rng is not None else np.random.default_rng(draws.seed)
        y_rep = replicate(draws, ds, rng)
    y = stack(ds).y
    return float(np.mean((y_rep - y[None, :]) ** 2))


_LIKELIHOOD_KEYS = {
    "lrm": ("beta", "sigma2"),
    "lrm-gprior": ("beta", "sigma2"),
    "hlrm": ("beta_group", "sigma2_group"),
}


def loglik_at_plugin(draws: PosteriorDraws, ds: GroupedDataset) -> float:
    """Log-likelihood at the plug-in state used by the DIC.

    For the pooled and hierarchical models the plug-in is the posterior mean
    of the likelihood parameters.  Cluster labels switch, so a posterior mean
    is meaningless for the clustering model; there the plug-in is the kept
    draw with the highest log-likelihood (label-invariant and reproducible).
    """
    if draws.model == "chlrm":
        return float(np.max(draws.loglik))
    keys = _LIKELIHOOD_KEYS[draws.model]
    mean_params = {k: np.mean(draws.params[k], axis=0, keepdims=True) for k in keys}
    plugin = PosteriorDraws(
        model=draws.model, params=mean_params, loglik=np.zeros(1),
        burn_in=draws.burn_in, thin=draws.thin, seed=draws.seed,
    )
    return float(plugin.obs_log_densities(ds).sum())


def dic(loglik_at_posterior_mean: float, per_draw_logliks) -> tuple[float, float]:
    """(DIC, p_DIC) from the plug-in log-likelihood and the per-draw values.

    ``p_DIC = 2 log p(y|plug-in) - 2 E[log p(y|theta)]`` and
    ``DIC = -2 log p(y|plug-in) + 2 p_DIC``.
    """
    lls = np.asarray(per_draw_logliks, dtype=float)
    if lls.size == 0:
        raise ValueError("need at least one draw")
    mean_ll = float(_ordered_sum(lls)) / lls.size
    p_dic = 2.0 * loglik_at_posterior_mean - 2.0 * mean_ll
    return -2.0 * loglik_at_posterior_mean + 2.0 * p_dic, p_dic


def waic(per_draw_per_obs_log_densities) -> tuple[float, float]:
    """(WAIC, p_WAIC) from the (B, N) matrix of log-densities.

    The pointwise predictive density is a log-mean-exp over draws (inputs are
    shifted by their max before exponentiation, so astronomically negative
    log-densities cannot overflow), and ``p_WAIC`` is twice the pointwise gap
    between log-mean and mean-log, which Jensen's inequality keeps
    nonnegative.
    """
    ld = np.atleast_2d(np.asarray(per_draw_per_obs_log_densities, dtype=float))
    n_draws = ld.shape[0]
    if n_draws == 0:
        raise ValueError("need at least one draw")
    top = ld.max(axis=0)
    lppd = top + np.log(_ordered_sum(np.exp(ld - top[None, :]), axis=0)) - np.log(n_draws)
    mean_log = _ordered_sum(ld, axis=0) / n_draws
    p_waic = 2.0 * float(np.sum(lppd - mean_log))
    return -2.0 * float(np.sum(lppd)) + 2.0 * p_waic, p_waic


@dataclass
class CheckReport:
    """Global fit metrics plus per-group posterior predictive p-values."""

    mse: float
    ppp_global: dict
    ppp_local: dict
    dic: float
    p_dic: float
    waic: float
    p_waic: float

    def __post_init__(self):
        for stat, val in self.ppp_global.items():
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"global ppp[{stat}] outside [0,1]: {val}")
        for stat, per_group in self.ppp_local.items():
            for gid, val in per_group.items():
                if not 0.0 <= val <= 1.0:
                    raise ValueError(f"local ppp[{stat}][{gid}] outside [0,1]: {val}")
        if self.p_waic < 0:
            raise ValueError(f"p_waic must be nonnegative, got {self.p_waic}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "mse": self.mse,
                "ppp_global": self.ppp_global,
                "ppp_local": self.ppp_local,
                "dic": self.dic,
                "p_dic": self.p_dic,
                "waic": self.waic,
                "p_waic": self.p_waic,
            },
            indent=2,
            sort_keys=True,
        )

    def table(self, label: str = "model") -> str:
        """Human-readable one-row table: Model, MSE, p_DIC, DIC, WAIC, p_WAIC."""
        header = f"{'Model':<12} {'MSE':>12} {'p_DIC':>10} {'DIC':>12} {'WAIC':>12} {'p_WAIC':>10}"
        row = (
            f"{label:<12} {self.mse:>12.3f} {self.p_dic:>10.3f} "
            f"{self.dic:>12.3f} {self.waic:>12.3f} {self.p_waic:>10.3f}"
        )
        return header + "\n" + row


def check_report(draws: PosteriorDraws, ds: GroupedDataset, rng) -> CheckReport:
    """Full report: MSE, global and per-group ppp for every statistic, DIC, WAIC."""
    y_rep = replicate(draws, ds, rng)
    ppp_global = {s: ppp(draws, ds, s, "global", y_rep=y_rep) for s in TEST_STATISTICS}
    ppp_local = {s: ppp(draws, ds, s, "group", y_rep=y_rep) for s in TEST_STATISTICS}
    mse = mse_replicated(draws, ds, y_rep=y_rep)
    dic_val, p_dic = dic(loglik_at_plugin(draws, ds), draws.loglik)
    waic_val, p_waic = waic(draws.obs_log_densities(ds))
    return CheckReport(
        mse=mse, ppp_global=ppp_global, ppp_local=ppp_local,
        dic=dic_val, p_dic=p_dic, waic=waic_val, p_waic=p_waic,
    )


def summary_table(draws: PosteriorDraws, group_ids=None) -> list[dict]:
    """Posterior summary rows: mean, SD, 2.5% and 97.5% quantiles per parameter.

    ``excludes_zero`` flags parameters whose central 95% interval misses zero.
    For the clustering model only label-invariant (population-level)
    parameters are summarized; cluster-specific draws are available in
    ``draws.params`` for label-invariant post-processing.
    """

    def rows_for(name: str, samples: np.ndarray):
        mean = float(samples.mean())
        sd = float(samples.std())
        lo, hi = (float(q) for q in np.percentile(samples, [2.5, 97.5]))
        return {
            "parameter": name, "mean": mean, "sd": sd,
            "q2.5": lo, "q97.5": hi, "excludes_zero": bool(lo > 0 or hi < 0),
        }

    params = draws.params
    rows = []
    if draws.model in ("lrm", "lrm-gprior"):
        p = params["beta"].shape[1]
        for c in range(p):
            rows.append(rows_for(f"beta{c + 1}", params["beta"][:, c]))
        rows.append(rows_for("sigma2", params["sigma2"]))
        return rows

    if draws.model == "hlrm":
        _, m, p = params["beta_group"].shape
        ids = list(group_ids) if group_ids is not None else [f"g{j + 1}" for j in range(m)]
        for c in range(p):
            for j in range(m):
                rows.append(rows_for(f"beta{c + 1}[{ids[j]}]", params["beta_group"][:, j, c]))
        for j in range(m):
            rows.append(rows_for(f"sigma2[{ids[j]}]", params["sigma2_group"][:, j]))
    elif draws.model != "chlrm":
        raise ValueError(f"unknown model {draws.model!r}")

    p = params["beta"].shape[1]
    for c in range(p):
        rows.append(rows_for(f"beta{c + 1}", params["beta"][:, c]))
    for r in range(p):
        for c in range(r, p):
            rows.append(rows_for(f"Sigma[{r + 1},{c + 1}]", params["Sigma"][:, r, c]))
    rows.append(rows_for("xi2", params["xi2"]))
    return rows
