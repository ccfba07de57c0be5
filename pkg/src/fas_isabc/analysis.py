"""Closed-form performance expressions for the FAS-aided NOMA ISABC downlink.

Covers the best-port gain distribution, near/far user outage probability
(exact and high-SNR), ergodic communication rates via Gauss-Laguerre
quadrature and the ergodic sensing rate bound. All SNRs are linear and all
rates are in bits.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .channel import (
    FasGeometry,
    GammaMoments,
    SystemParams,
    correlation_matrix,
    gamma_moments,
    marginal_cdf_geq,
    marginal_pdf_geq,
    product_exp_pdf,
)
from .copula import (
    DEFAULT_SEED,
    CorrelationModel,
    build_correlation_model,
    gaussian_copula_density,
    mvn_cdf_equicoordinate,
    saturated_ppf,
)
from .specfun import QuadratureRule, gauss_laguerre

DEFAULT_MVN_TOL = 1e-4
DEFAULT_MVN_REL_TOL = 1e-2
DEFAULT_GLQ_ORDER = 64
# lattice points per shift for the common-random-number derivative of fas_cdf
_DERIVATIVE_POINTS = 1 << 13


@dataclass(frozen=True)
class SensingParams:
    """Radar pulse duration ``T`` [s], duty cycle ``beta`` and delay-fluctuation variance."""

    T: float = 0.01
    beta: float = 0.5
    sigma2_tdf: float = 0.1

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta!r}")
        if not self.sigma2_tdf > 0:
            raise ValueError(f"sigma2_tdf must be positive, got {self.sigma2_tdf!r}")


class BenchmarkMode(str, enum.Enum):
    FAS_ISABC = "FAS_ISABC"
    FAS_ISAC = "FAS_ISAC"
    TAS_ISABC = "TAS_ISABC"
    TAS_ISAC = "TAS_ISAC"

    @property
    def uses_fas(self) -> bool:
        return self.name.startswith("FAS")

    @property
    def uses_backscatter(self) -> bool:
        return self.name.endswith("ISABC")


class BenchmarkSetup(NamedTuple):
    comm_params: SystemParams
    sensing_params: SystemParams
    geometry: FasGeometry


def apply_benchmark(params: SystemParams, geometry: FasGeometry, mode: BenchmarkMode | str) -> BenchmarkSetup:
    """Derive communication/sensing parameters and geometry for a benchmark.

    ISAC modes drop the tag from the communication link (zeta=0) and sense
    it without reflection loss (zeta=1); TAS modes use a single port.
    """
    mode = BenchmarkMode(mode)
    comm = params
    sense = params
    if not mode.uses_backscatter:
        comm = dataclasses.replace(params, zeta=0.0)
        sense = dataclasses.replace(params, zeta=1.0)
    geom = geometry if mode.uses_fas else FasGeometry.single_port()
    return BenchmarkSetup(comm, sense, geom)


@dataclass(frozen=True)
class UserLink:
    """Everything the closed forms need about one user's FAS link."""

    user: str
    geometry: FasGeometry
    gamma_moments: GammaMoments
    correlation: CorrelationModel

    @property
    def n_ports(self) -> int:
        return self.geometry.n_ports

    def check_consistent(self, params: SystemParams) -> None:
        expected = gamma_moments(params, self.user)
        if not (
            math.isclose(expected.kappa, self.gamma_moments.kappa, rel_tol=1e-12)
            and math.isclose(expected.varpi, self.gamma_moments.varpi, rel_tol=1e-12)
        ):
            raise ValueError(f"link moments {self.gamma_moments} do not match params ({expected})")


def make_link(params: SystemParams, geometry: FasGeometry, user: str, eps: float = 1e-10) -> UserLink:
    link = UserLink(
        user=user,
        geometry=geometry,
        gamma_moments=gamma_moments(params, user),
        correlation=build_correlation_model(correlation_matrix(geometry), eps),
    )
    link.check_consistent(params)
    return link


# ---------------------------------------------------------------------------
# best-port gain distribution
# ---------------------------------------------------------------------------


def _copula_at_marginal(u: float, link: UserLink, tol: float, seed: int, **kwargs) -> float:
    if u <= 0.0:
        return 0.0
    if link.n_ports == 1:
        return u
    return mvn_cdf_equicoordinate(saturated_ppf(u), link.correlation, tol=tol, seed=seed, **kwargs)


def fas_cdf(
    g: float,
    link: UserLink,
    tol: float = DEFAULT_MVN_TOL,
    seed: int = DEFAULT_SEED,
    rel_tol: float | None = DEFAULT_MVN_REL_TOL,
    **kwargs,
) -> float:
    """CDF of the best-port gain max_n g_eq^n under the Gaussian copula."""
    if g <= 0.0:
        return 0.0
    u = marginal_cdf_geq(g, link.gamma_moments)
    return _copula_at_marginal(u, link, tol, seed, rel_tol=rel_tol, **kwargs)


def fas_pdf(g: float, link: UserLink) -> float:
    """Copula chain-rule density: f(g)^N times the copula density at (u, ..., u).

    For N > 1 this is the joint port density on the diagonal, not the
    derivative of :func:`fas_cdf`; see :func:`fas_pdf_derivative`.
    """
    if g <= 0.0:
        return 0.0
    gm = link.gamma_moments
    u = marginal_cdf_geq(g, gm)
    if not 0.0 < u < 1.0:
        return 0.0
    f = marginal_pdf_geq(g, gm)
    if link.n_ports == 1:
        return f
    c = gaussian_copula_density(np.full(link.n_ports, u), link.correlation)
    return f**link.n_ports * c


def fas_pdf_derivative(g: float, link: UserLink, rel_step: float = 1e-3, seed: int = DEFAULT_SEED) -> float:
    """Central difference of :func:`fas_cdf` with a fixed lattice (common random numbers)."""
    if g <= 0.0:
        return 0.0
    if link.n_ports == 1:
        return marginal_pdf_geq(g, link.gamma_moments)
    h = rel_step * g
    hi = fas_cdf(g + h, link, seed=seed, rel_tol=None, n_points=_DERIVATIVE_POINTS)
    lo = fas_cdf(g - h, link, seed=seed, rel_tol=None, n_points=_DERIVATIVE_POINTS)
    return max((hi - lo) / (2.0 * h), 0.0)


# ---------------------------------------------------------------------------
# outage probability
# ---------------------------------------------------------------------------


class NearThresholds(NamedTuple):
    sic: float
    un: float
    max: float


def thresholds_near(params: SystemParams, gamma_bar: float) -> NearThresholds | None:
    """Gain thresholds for SIC and own-signal decoding at the near user.

    Returns None when p_uf <= gamma_hat_sic * p_un: the SIC SINR can never
    clear its threshold and the near user is always in outage.
    """
    if not gamma_bar > 0:
        raise ValueError(f"gamma_bar must be positive, got {gamma_bar!r}")
    margin = params.p_uf - params.gamma_hat_sic * params.p_un
    if margin <= 0.0:
        return None
    scale = gamma_bar * params.mu_c
    if scale == 0.0:
        return None
    sic = params.gamma_hat_sic / (scale * margin)
    un = params.gamma_hat_un / (scale * params.p_un) if params.p_un > 0 else math.inf
    return NearThresholds(sic, un, max(sic, un))


def threshold_far(params: SystemParams, gamma_bar: float) -> float | None:
    """Gain threshold of the far user, or None when it is always in outage."""
    if not gamma_bar > 0:
        raise ValueError(f"gamma_bar must be positive, got {gamma_bar!r}")
    margin = params.p_uf - params.gamma_hat_uf * params.p_un
    scale = gamma_bar * params.mu_c
    if margin <= 0.0 or scale == 0.0:
        return None
    return params.gamma_hat_uf / (scale * margin)


def _user_threshold(params: SystemParams, gamma_bar: float, user: str) -> float | None:
    if user == "near":
        th = thresholds_near(params, gamma_bar)
        return None if th is None else th.max
    return threshold_far(params, gamma_bar)


def outage_near(params, link, gamma_bar, tol=DEFAULT_MVN_TOL, seed=DEFAULT_SEED, **kwargs) -> float:
    th = thresholds_near(params, gamma_bar)
    if th is None:
        return 1.0
    return fas_cdf(th.max, link, tol=tol, seed=seed, **kwargs)


def outage_far(params, link, gamma_bar, tol=DEFAULT_MVN_TOL, seed=DEFAULT_SEED, **kwargs) -> float:
    th = threshold_far(params, gamma_bar)
    if th is None:
        return 1.0
    return fas_cdf(th, link, tol=tol, seed=seed, **kwargs)


def outage(params, link, gamma_bar, tol=DEFAULT_MVN_TOL, seed=DEFAULT_SEED, **kwargs) -> float:
    """Dispatch to :func:`outage_near` or :func:`outage_far` by ``link.user``."""
    fn = outage_near if link.user == "near" else outage_far
    return fn(params, link, gamma_bar, tol=tol, seed=seed, **kwargs)


def asymptotic_marginal(threshold: float, gm: GammaMoments) -> float:
    """Small-argument form lower_gamma(k, x)/Gamma(k) ~ x^k / (k Gamma(k)), x = th/varpi."""
    if threshold <= 0.0:
        return 0.0
    k = gm.kappa
    return math.exp(k * math.log(threshold / gm.varpi) - math.lgamma(k + 1.0))


def outage_asymptotic(
    params, link, gamma_bar, user=None, tol=DEFAULT_MVN_TOL, seed=DEFAULT_SEED, **kwargs
) -> float:
    """High-SNR outage: the incomplete gamma replaced by its leading power term.

    When that term exceeds 1 (low SNR) the result is clamped to 1.
    """
    user = link.user if user is None else user
    th = _user_threshold(params, gamma_bar, user)
    if th is None:
        return 1.0
    u = asymptotic_marginal(th, link.gamma_moments)
    if u >= 1.0:
        return 1.0
    kwargs.setdefault("rel_tol", DEFAULT_MVN_REL_TOL)
    return _copula_at_marginal(u, link, tol, seed, **kwargs)


# ---------------------------------------------------------------------------
# ergodic communication rate
# ---------------------------------------------------------------------------


def near_rate(params: SystemParams, gamma_bar: float, g):
    """log2(1 + SNR) of the near user after SIC, as a function of the gain."""
    return np.log2(1.0 + gamma_bar * params.p_un * params.mu_c * np.asarray(g, dtype=float))


def far_rate(params: SystemParams, gamma_bar: float, g):
    g = np.asarray(g, dtype=float)
    s = gamma_bar * params.mu_c * g
    return np.log2(1.0 + params.p_uf * s / (params.p_un * s + 1.0))


def _rate_fn(user):
    return near_rate if user == "near" else far_rate


def _pdf_fn(pdf: str):
    if pdf == "copula":
        return fas_pdf
    if pdf == "derivative":
        return fas_pdf_derivative
    raise ValueError(f"pdf must be 'copula' or 'derivative', got {pdf!r}")


def ecr_glq(
    params: SystemParams,
    link: UserLink,
    gamma_bar: float,
    rule: QuadratureRule | None = None,
    pdf: str = "copula",
) -> float:
    """Gauss-Laguerre approximation of E[log2(1 + SINR)] for ``link.user``.

    ``pdf`` selects the gain density: ``"copula"`` is the chain-rule product
    form of :func:`fas_pdf`, ``"derivative"`` differentiates :func:`fas_cdf`.
    """
    rule = gauss_laguerre(DEFAULT_GLQ_ORDER) if rule is None else rule
    density = _pdf_fn(pdf)
    dens = np.array([density(x, link) for x in rule.nodes])
    rates = _rate_fn(link.user)(params, gamma_bar, rule.nodes)
    return float(max(np.sum(rule.scaled_weights * rates * dens), 0.0))


def ecr_near_glq(params, link, gamma_bar, rule=None, pdf="copula") -> float:
    return ecr_glq(params, dataclasses.replace(link, user="near"), gamma_bar, rule, pdf)


def ecr_far_glq(params, link, gamma_bar, rule=None, pdf="copula") -> float:
    return ecr_glq(params, dataclasses.replace(link, user="far"), gamma_bar, rule, pdf)


class QuadratureError(RuntimeError):
    def __init__(self, estimate: float, error: float, tol: float):
        super().__init__(f"adaptive quadrature error {error:.3g} exceeds {tol:.3g} (estimate {estimate:.6g})")
        self.estimate = estimate
        self.error = error


def ecr_integral_reference(
    params: SystemParams,
    link: UserLink,
    gamma_bar: float,
    abs_tol: float = 1e-7,
    pdf: str = "copula",
) -> float:
    """Adaptive quadrature of the same ECR integrand over [0, inf)."""
    density = _pdf_fn(pdf)
    rate = _rate_fn(link.user)

    def integrand(g):
        return float(rate(params, gamma_bar, g)) * density(g, link)

    mean = link.gamma_moments.mean
    # split where the mass sits so QUADPACK sees the peak
    edges = [0.0, 0.1 * mean, mean, 4.0 * mean, 20.0 * mean]
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(integrand, lo, hi, epsabs=abs_tol / 10, epsrel=1e-9, limit=200)
        total += val
        err += e
    val, e = integrate.quad(integrand, edges[-1], math.inf, epsabs=abs_tol / 10, limit=200)
    total += val
    err += e
    if err > abs_tol:
        raise QuadratureError(total, err, abs_tol)
    return max(total, 0.0)


# ---------------------------------------------------------------------------
# sensing
# ---------------------------------------------------------------------------


def echo_snr_scale(params: SystemParams, sensing: SensingParams, gamma_bar: float) -> float:
    """(pi^2/3) gamma_bar zeta d_bt^-alpha bbar ebar sigma2_tdf, the mean echo SNR."""
    return (
        math.pi**2
        / 3.0
        * gamma_bar
        * params.zeta
        * params.d_b_t**-params.alpha
        * params.bbar
        * params.ebar
        * sensing.sigma2_tdf
    )


def mean_echo_snr(params: SystemParams, sensing: SensingParams, gamma_bar: float) -> float:
    return echo_snr_scale(params, sensing, gamma_bar)


def echo_snr_pdf(x: float, params: SystemParams, sensing: SensingParams, gamma_bar: float) -> float:
    """Density of the echo SNR, a scaled product of two unit exponentials."""
    return product_exp_pdf(x, echo_snr_scale(params, sensing, gamma_bar))


def esr_closed_form(params: SystemParams, sensing: SensingParams, gamma_bar: float) -> float:
    """Jensen upper bound (beta / 2T) log2(1 + 2T E[gamma_echo])."""
    mean = mean_echo_snr(params, sensing, gamma_bar)
    return sensing.beta / (2.0 * sensing.T) * math.log2(1.0 + 2.0 * sensing.T * mean)


# ---------------------------------------------------------------------------
# communication / sensing trade-off
# ---------------------------------------------------------------------------


class TradeoffPoint(NamedTuple):
    mu: float
    esr: float
    sum_ecr: float


def rate_tradeoff(
    params: SystemParams,
    links: Sequence[UserLink],
    sensing: SensingParams,
    gamma_bar: float,
    mu_grid: Sequence[float],
    rule: QuadratureRule | None = None,
    sensing_params: SystemParams | None = None,
    pdf: str = "copula",
) -> list[TradeoffPoint]:
    """Sweep mu_c = mu, mu_s = 1 - mu and report (ESR, near+far ECR).

    The sensing stage sees an average SNR of ``(1 - mu) * gamma_bar``.
    ``sensing_params`` overrides the parameters used for the ESR (benchmark
    modes sense with a different reflection coefficient).
    """
    grid = [float(m) for m in mu_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("mu grid must be sorted")
    if any(not 0.0 <= m <= 1.0 for m in grid):
        raise ValueError("mu values must lie in [0, 1]")
    rule = gauss_laguerre(DEFAULT_GLQ_ORDER) if rule is None else rule
    sense = params if sensing_params is None else sensing_params
    out = []
    for mu in grid:
        p = dataclasses.replace(params, mu_c=mu, mu_s=1.0 - mu)
        ecr = sum(ecr_glq(p, link, gamma_bar, rule, pdf) for link in links)
        esr = esr_closed_form(sense, sensing, (1.0 - mu) * gamma_bar)
        out.append(TradeoffPoint(mu, esr, ecr))
    return out
