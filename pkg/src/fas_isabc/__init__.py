"""Performance analysis of fluid-antenna NOMA users in integrated sensing and backscatter communication."""

__version__ = "0.1.0"

from .analysis import (
    BenchmarkMode,
    SensingParams,
    UserLink,
    apply_benchmark,
    ecr_far_glq,
    ecr_glq,
    ecr_integral_reference,
    ecr_near_glq,
    esr_closed_form,
    fas_cdf,
    fas_pdf,
    fas_pdf_derivative,
    make_link,
    mean_echo_snr,
    outage,
    outage_asymptotic,
    outage_far,
    outage_near,
    rate_tradeoff,
)
from .channel import FasGeometry, GammaMoments, SystemParams, correlation_matrix, gamma_moments
from .copula import build_correlation_model, gaussian_copula_cdf, gaussian_copula_density, mvn_cdf
from .montecarlo import McEstimate, TrialConfig, empirical_fas_cdf, mc_ecr, mc_esr, mc_outage
from .specfun import QuadratureRule, gauss_laguerre
