"""Dimension reduction for angular data on the D-torus.

Maximum-likelihood probabilistic PCA (closed form and EM), its torus
extension built on the multivariate wrapped normal distribution, dimension
selection (likelihood ratio tests, Kaiser-Guttman, SVD cross-validation)
and a reproducible Monte Carlo harness.
"""

__version__ = "0.1.0"

from .angles import TWO_PI, circular_mean, wrap
from .errors import DegenerateComponentError, LatticeBudgetError, TorusPpcaError
from .model_selection import (
    CvResult,
    LrtResult,
    SelectionReport,
    SelectionResult,
    correlation_eigenvalues,
    cv_select,
    kaiser_guttman,
    lrt_type1,
    lrt_type2,
    select_all,
    select_lrt,
)
from .ppca import (
    LatentPosterior,
    PpcaEmResult,
    PpcaModel,
    latent_posterior,
    posterior_means,
    ppca_closed_form,
    ppca_closed_form_cov,
    ppca_em,
    ppca_loglik,
    sample_mean_cov,
    sorted_eigh,
)
from .simulation import (
    MetricTable,
    SimScenario,
    gen_dataset,
    monte_carlo,
    paper_grid,
    reconstruction_metrics,
)
from .tppca import (
    TppcaConfig,
    TppcaFit,
    observed_log_likelihood,
    tppca_fit,
    tppca_init,
    tppca_reconstruct,
    tppca_scores,
    tppca_step1,
    tppca_step2,
)
from .wrapped_normal import (
    CemResult,
    WnParams,
    WrapIndices,
    cem_fit,
    cem_unwrap,
    wn_log_density,
    wn_log_density_rows,
    wrap_weights,
)

__all__ = [
    "TWO_PI",
    "wrap",
    "circular_mean",
    "TorusPpcaError",
    "LatticeBudgetError",
    "DegenerateComponentError",
    "WnParams",
    "WrapIndices",
    "CemResult",
    "wn_log_density",
    "wn_log_density_rows",
    "wrap_weights",
    "cem_fit",
    "cem_unwrap",
    "PpcaModel",
    "PpcaEmResult",
    "LatentPosterior",
    "sample_mean_cov",
    "sorted_eigh",
    "ppca_closed_form",
    "ppca_closed_form_cov",
    "ppca_loglik",
    "ppca_em",
    "latent_posterior",
    "posterior_means",
    "TppcaConfig",
    "TppcaFit",
    "tppca_init",
    "tppca_step1",
    "tppca_step2",
    "tppca_fit",
    "tppca_scores",
    "tppca_reconstruct",
    "observed_log_likelihood",
    "LrtResult",
    "CvResult",
    "SelectionResult",
    "SelectionReport",
    "lrt_type1",
    "lrt_type2",
    "select_lrt",
    "kaiser_guttman",
    "correlation_eigenvalues",
    "cv_select",
    "select_all",
    "SimScenario",
    "MetricTable",
    "gen_dataset",
    "reconstruction_metrics",
    "monte_carlo",
    "paper_grid",
]
