"""ROC analysis for spatial point patterns, presence-absence grids and case-control data."""

from .spatial import (Grid, PointPattern, PresenceGrid, ProbabilityGrid, Raster, StepCdf, Window,
                      discretise, distance_transform, restrict, spatial_cdf)
from .roc import (RocCurve, RocSummary, auc, evaluate, gini, reverse, roc_binary, roc_casecontrol,
                  roc_covariate_grid, roc_covariate_pp, summarize, youden)
from .models import (FitError, LogisticModel, PoissonPPModel, fit_logistic, fit_logistic_casecontrol,
                     fit_poisson_loglinear, loo_all, loo_fitted, simulate_poisson)
from .model_roc import (check_concavity, check_dominance, lorenz_equivalence, roc_model_grid,
                        roc_model_pp, roc_theoretical)
from .inference import (ConfidenceBand, TestResult, band_binomial, band_monte_carlo, berman_tests,
                        cdf_tests, envelope, wilcoxon_auc)
from .smoothing import KernelSpec, silverman_bandwidth, smooth_band, smooth_roc
from .rho import RhoEstimate, estimate_rho_isotonic, estimate_rho_kernel, rho_from_roc, roc_from_rho
from .extensions import (compare_roc, horvitz_thompson_weights, partial_roc_add, partial_roc_drop,
                         reconstruct_partition, roc_restricted)

__version__ = "0.1.0"
