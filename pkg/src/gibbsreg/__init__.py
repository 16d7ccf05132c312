"""Bayesian linear regression on grouped data via Gibbs sampling.

Three model families share one data layer and one diagnostics layer:

* pooled Normal linear regression (semi-conjugate Gibbs, plus a direct
  sampler under a g-prior),
* hierarchical Normal linear regression with group-specific coefficients
  and variances,
* a clustering variant that replaces the group layer with a finite mixture
  and samples cluster assignments.

See README.md for the CLI (`gibbsreg fit/check/cluster/simulate`) and the
demos/ directory for narrative walkthroughs.
"""

from gibbsreg.data import GroupedDataset, StackedView, load_csv, stack, write_csv
from gibbsreg.distributions import make_rng
from gibbsreg.draws import PartitionDraws, PosteriorDraws, RunConfig
from gibbsreg.elicitation import Hyperparams, OlsFit, elicit, ols_fit
from gibbsreg.lrm import direct_sample_gprior, gibbs_lrm
from gibbsreg.hlrm import gibbs_hlrm
from gibbsreg.chlrm import gibbs_chlrm
from gibbsreg.checking import CheckReport, check_report, dic, waic
from gibbsreg.clusterpost import incidence, k_star_posterior, point_partition
from gibbsreg.synth import GeneratorSpec, generate, plant_analogue

__version__ = "0.1.0"

__all__ = [
    "GroupedDataset",
    "StackedView",
    "load_csv",
    "stack",
    "write_csv",
    "make_rng",
    "RunConfig",
    "PosteriorDraws",
    "PartitionDraws",
    "OlsFit",
    "Hyperparams",
    "ols_fit",
    "elicit",
    "gibbs_lrm",
    "direct_sample_gprior",
    "gibbs_hlrm",
    "gibbs_chlrm",
    "CheckReport",
    "check_report",
    "dic",
    "waic",
    "incidence",
    "k_star_posterior",
    "point_partition",
    "GeneratorSpec",
    "generate",
    "plant_analogue",
    "__version__",
]
