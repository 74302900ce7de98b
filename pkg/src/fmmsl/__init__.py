"""Finite mixtures of multivariate skew Laplace distributions fitted by EM."""
from .em import EmConfig, FitError, FitResult, e_step, fit, init_kmeans, m_step, run_em
from .inference import empirical_info, score_vector, standard_errors
from .mixture import (MixtureParams, classify, information_criteria, loglik, mixture_logpdf,
                      responsibilities)
from .msl import MslParams, msl_cf, msl_logpdf, msl_moments, msl_sample, v_conditional_moments
from .simstudy import StudyConfig, match_labels, run_study, simulate_mixture

__all__ = [
    "EmConfig", "FitError", "FitResult", "MixtureParams", "MslParams", "StudyConfig",
    "classify", "e_step", "empirical_info", "fit", "information_criteria", "init_kmeans",
    "loglik", "m_step", "match_labels", "mixture_logpdf", "msl_cf", "msl_logpdf", "msl_moments",
    "msl_sample", "responsibilities", "run_em", "run_study", "score_vector", "simulate_mixture",
    "standard_errors", "v_conditional_moments",
]
