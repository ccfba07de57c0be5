"""Port geometry, spatial correlation and per-port channel-gain statistics.

The per-port gain at user ``i`` is the sum of the direct BS-user gain and the
cascaded BS-tag-user gain::

    g_eq = d_bi^-alpha * A + zeta * d_bt^-alpha * d_ti^-alpha * B * C

with A, B, C exponential. Its distribution is approximated by a Gamma law
with matched mean and variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import (
    bessel_k,
    lower_incomplete_gamma_regularized,
    spherical_bessel_j0,
    x_bessel_k1,
)

USERS = ("near", "far")


@dataclass(frozen=True)
class FasGeometry:
    """Planar grid of ``n1 x n2`` ports spanning ``w1 x w2`` wavelengths."""

    n1: int = 2
    n2: int = 2
    w1: float = 1.0
    w2: float = 1.0

    def __post_init__(self):
        if int(self.n1) != self.n1 or int(self.n2) != self.n2 or self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"port counts must be positive integers, got {self.n1}x{self.n2}")
        if not (self.w1 >= 0 and self.w2 >= 0):
            raise ValueError(f"widths must be nonnegative, got {self.w1}x{self.w2}")

    @property
    def n_ports(self) -> int:
        return self.n1 * self.n2

    @classmethod
    def single_port(cls) -> FasGeometry:
        return cls(1, 1, 0.0, 0.0)


def port_to_grid(n: int, geom: FasGeometry) -> tuple[int, int]:
    """Map a 1-based port index to its 1-based (row, column) grid position."""
    if not 1 <= n <= geom.n_ports:
        raise IndexError(f"port {n} out of range 1..{geom.n_ports}")
    row, col = divmod(n - 1, geom.n2)
    return row + 1, col + 1


def grid_to_port(n1_idx: int, n2_idx: int, geom: FasGeometry) -> int:
    """Inverse of :func:`port_to_grid` (row-major, 1-based)."""
    if not (1 <= n1_idx <= geom.n1 and 1 <= n2_idx <= geom.n2):
        raise IndexError(f"grid position ({n1_idx}, {n2_idx}) outside {geom.n1}x{geom.n2}")
    return (n1_idx - 1) * geom.n2 + n2_idx


def _axis_offset(i: int, j: int, count: int, width: float) -> float:
    # a single-port axis contributes no separation
    if count == 1:
        return 0.0
    return (i - j) / (count - 1) * width


def jakes_correlation(geom: FasGeometry, n: int, m: int) -> float:
    """Jakes correlation between ports ``n`` and ``m`` (1-based)."""
    n1, n2 = port_to_grid(n, geom)
    m1, m2 = port_to_grid(m, geom)
    dx = _axis_offset(n1, m1, geom.n1, geom.w1)
    dy = _axis_offset(n2, m2, geom.n2, geom.w2)
    return spherical_bessel_j0(2.0 * math.pi * math.hypot(dx, dy))


def correlation_matrix(geom: FasGeometry) -> np.ndarray:
    """Raw N x N Jakes matrix; may be numerically indefinite for dense grids."""
    n = geom.n_ports
    out = np.eye(n)
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            out[a - 1, b - 1] = out[b - 1, a - 1] = jakes_correlation(geom, a, b)
    return out


@dataclass(frozen=True)
class SystemParams:
    """Link-level constants; distances and mean gains are linear quantities.

    Defaults reproduce the numerical-results setup: p_un=0.3, p_uf=0.7,
    mu_c=mu_s=0.5, zeta=0.8, unit mean gains, 0 dB thresholds, unit
    distances except d_b_uf=1.3 m, alpha=2.1.
    """

    p_un: float = 0.3
    p_uf: float = 0.7
    mu_c: float = 0.5
    mu_s: float = 0.5
    zeta: float = 0.8
    alpha: float = 2.1
    d_b_un: float = 1.0
    d_b_uf: float = 1.3
    d_b_t: float = 1.0
    d_t_un: float = 1.0
    d_t_uf: float = 1.0
    abar: float = 1.0
    bbar: float = 1.0
    cbar: float = 1.0
    ebar: float = 1.0
    gamma_hat_sic: float = 1.0
    gamma_hat_un: float = 1.0
    gamma_hat_uf: float = 1.0

    def __post_init__(self):
        for name in ("p_un", "p_uf", "mu_c", "mu_s", "zeta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if abs(self.p_un + self.p_uf - 1.0) > 1e-12:
            raise ValueError(f"p_un + p_uf must equal 1, got {self.p_un} + {self.p_uf}")
        if abs(self.mu_c + self.mu_s - 1.0) > 1e-12:
            raise ValueError(f"mu_c + mu_s must equal 1, got {self.mu_c} + {self.mu_s}")
        if not self.alpha > 2.0:
            raise ValueError(f"alpha must exceed 2, got {self.alpha!r}")
        for name in ("d_b_un", "d_b_uf", "d_b_t", "d_t_un", "d_t_uf", "abar", "bbar", "cbar", "ebar"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v!r}")
        for name in ("gamma_hat_sic", "gamma_hat_un", "gamma_hat_uf"):
            v = getattr(self, name)
            if not v >= 0.0:
                raise ValueError(f"{name} must be nonnegative, got {v!r}")

    def d_b(self, user: str) -> float:
        return {"near": self.d_b_un, "far": self.d_b_uf}[_check_user(user)]

    def d_t(self, user: str) -> float:
        return {"near": self.d_t_un, "far": self.d_t_uf}[_check_user(user)]

    def direct_mean(self, user: str) -> float:
        """E[A'] = d_bi^-alpha * abar."""
        return self.d_b(user) ** -self.alpha * self.abar

    def cascade_scale(self, user: str) -> float:
        """E[D] = zeta d_bt^-alpha d_ti^-alpha bbar cbar (also the scale of D)."""
        return self.zeta * self.d_b_t**-self.alpha * self.d_t(user) ** -self.alpha * self.bbar * self.cbar


def _check_user(user: str) -> str:
    if user not in USERS:
        raise ValueError(f"user must be 'near' or 'far', got {user!r}")
    return user


@dataclass(frozen=True)
class GammaMoments:
    """Shape ``kappa`` and scale ``varpi`` of the moment-matched Gamma law."""

    kappa: float
    varpi: float

    @property
    def mean(self) -> float:
        return self.kappa * self.varpi

    @property
    def variance(self) -> float:
        return self.kappa * self.varpi**2


def gamma_moments(params: SystemParams, user: str) -> GammaMoments:
    """Match a Gamma law to the mean and variance of A' + D.

    E[A'] = d^-a abar, Var(A') = E[A']^2, E[D] = zeta d^-a d^-a bbar cbar and
    Var(D) = 3 E[D]^2; kappa = mean^2 / var, varpi = var / mean.
    """
    ma = params.direct_mean(user)
    md = params.cascade_scale(user)
    mean = ma + md
    var = ma * ma + 3.0 * md * md
    if not (mean > 0.0 and var > 0.0):
        raise ValueError("degenerate channel: all mean gains vanish")
    return GammaMoments(kappa=mean * mean / var, varpi=var / mean)


def marginal_cdf_geq(g: float, gm: GammaMoments) -> float:
    """Gamma approximation of the per-port gain CDF."""
    if g <= 0.0:
        return 0.0
    return lower_incomplete_gamma_regularized(gm.kappa, g / gm.varpi)


def marginal_pdf_geq(g: float, gm: GammaMoments) -> float:
    if g <= 0.0:
        return 0.0
    k, w = gm.kappa, gm.varpi
    return math.exp((k - 1.0) * math.log(g) - g / w - math.lgamma(k) - k * math.log(w))


def product_exp_cdf(d: float, scale: float) -> float:
    """CDF of the product of two independent exponentials whose means multiply to ``scale``."""
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale!r}")
    if d <= 0.0:
        return 0.0
    z = 2.0 * math.sqrt(d / scale)
    return 1.0 - x_bessel_k1(z)


def product_exp_pdf(d: float, scale: float) -> float:
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale!r}")
    if d <= 0.0:
        raise ValueError(f"density requires d > 0, got {d!r}")
    return 2.0 / scale * bessel_k(0, 2.0 * math.sqrt(d / scale))
