"""Covariance matrices for maximum-entropy sampling from precipitation-chemistry records.

Weekly concentrations are aggregated to precipitation-weighted monthly
values, log concentrations are regressed on a polynomial trend plus a
truncated Fourier series, and the (imputed) residuals of all sites are
stacked into a matrix whose sample covariance feeds MESP solvers.
"""

from .aggregate import MonthlySeries, monthly_concentration
from .covariance import ResidualMatrix, assemble, sample_covariance
from .exceptions import ConfigError, DataError, MesgencovError, NumericError
from .fit import FitResult, ModelSpec, fit_ols, impute_residuals, summarize
from .gaussianize import gaussianize_h, lambert_w0, lambertw_transform
from .ingest import load_daily, load_site_meta, load_weekly
from .matio import read_mat, write_mat
from .mespcheck import MespInstance, greedy_interchange, logdet_subset
from .pipeline import CovOutput, Dataset, GetCovConfig, default_config, get_cov, load_config, write_outputs
from .siteselect import SiteQuery, get_sites, max_dist_sites
from .stattests import independence_test, mardia, mvn, rosner, shapiro_wilk

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "CovOutput", "DataError", "Dataset", "FitResult", "GetCovConfig", "MesgencovError",
    "MespInstance", "ModelSpec", "MonthlySeries", "NumericError", "ResidualMatrix", "SiteQuery",
    "assemble", "default_config", "fit_ols", "gaussianize_h", "get_cov", "get_sites", "greedy_interchange",
    "impute_residuals", "independence_test", "lambert_w0", "lambertw_transform", "load_config", "load_daily",
    "load_site_meta", "load_weekly", "logdet_subset", "mardia", "max_dist_sites", "monthly_concentration",
    "mvn", "read_mat", "rosner", "sample_covariance", "shapiro_wilk", "summarize", "write_mat", "write_outputs",
]
