"""Scalar special functions used by the channel and copula statistics.

Everything here is a pure function of its arguments. The routines are written
for double precision accuracy rather than speed; vectorised hot loops (QMC
integration, sampling) use ``scipy.special`` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_SQRT_PI = math.sqrt(math.pi)
_EPS = 2.220446049250313e-16


def spherical_bessel_j0(x: float) -> float:
    """Zero-order spherical Bessel function of the first kind, sin(x)/x."""
    ax = abs(x)
    if ax < 1e-4:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return math.sin(x) / x


# ---------------------------------------------------------------------------
# inverse error function
# ---------------------------------------------------------------------------


def _erfinv_initial(x: float, w: float) -> float:
    # Giles' single precision rational approximation, w = -log((1-x)(1+x))
    if w < 5.0:
        w -= 2.5
        p = 2.81022636e-08
        p = 3.43273939e-07 + p * w
        p = -3.5233877e-06 + p * w
        p = -4.39150654e-06 + p * w
        p = 0.00021858087 + p * w
        p = -0.00125372503 + p * w
        p = -0.00417768164 + p * w
        p = 0.246640727 + p * w
        p = 1.50140941 + p * w
    else:
        w = math.sqrt(w) - 3.0
        p = -0.000200214257
        p = 0.000100950558 + p * w
        p = 0.00134934322 + p * w
        p = -0.00367342844 + p * w
        p = 0.00573950773 + p * w
        p = -0.0076224613 + p * w
        p = 0.00943887047 + p * w
        p = 1.00167406 + p * w
        p = 2.83297682 + p * w
    return p * x


def _erfinv_positive(p: float, q: float) -> float:
    """Solve erf(y) = p for p in [0, 1) given q = 1 - p computed accurately."""
    w = -math.log(q * (1.0 + p))
    if w < 36.0:
        y = _erfinv_initial(p, w)
    else:
        # deep tail: erfc(y) ~ exp(-y^2) / (y sqrt(pi))
        y = math.sqrt(w)
        for _ in range(3):
            y = math.sqrt(-math.log(q * _SQRT_PI * y))
    use_erfc = p > 0.5
    for _ in range(8):
        # Halley: f''/f' = -2y for both erf and erfc
        if use_erfc:
            f = -(math.erfc(y) - q)
        else:
            f = math.erf(y) - p
        deriv = 2.0 / _SQRT_PI * math.exp(-y * y)
        if deriv == 0.0:
            break
        step = f / deriv
        step = step / (1.0 + y * step)
        y -= step
        if abs(step) <= 1e-15 * max(abs(y), 1e-300):
            break
    return y


def erf_inv(p: float) -> float:
    """Inverse of the error function on the open interval (-1, 1).

    Raises
    ------
    ValueError
        If ``|p| >= 1`` or ``p`` is not finite.
    """
    if not (-1.0 < p < 1.0):
        raise ValueError(f"erf_inv domain is (-1, 1), got {p!r}")
    if p == 0.0:
        return 0.0
    a = abs(p)
    y = _erfinv_positive(a, 1.0 - a)
    return y if p > 0 else -y


def erfc_inv(q: float) -> float:
    """Inverse of the complementary error function on (0, 2).

    Keeps full relative accuracy for tiny ``q``, where ``erf_inv(1 - q)``
    would lose digits to cancellation.
    """
    if not (0.0 < q < 2.0):
        raise ValueError(f"erfc_inv domain is (0, 2), got {q!r}")
    if q == 1.0:
        return 0.0
    if q < 1.0:
        return _erfinv_positive(1.0 - q, q)
    r = 2.0 - q
    return -_erfinv_positive(1.0 - r, r)


def norm_ppf(u: float) -> float:
    """Standard normal quantile, sqrt(2)*erf_inv(2u - 1), computed tail-safely."""
    if not (0.0 < u < 1.0):
        raise ValueError(f"norm_ppf domain is (0, 1), got {u!r}")
    if u < 0.5:
        return -math.sqrt(2.0) * erfc_inv(2.0 * u)
    return math.sqrt(2.0) * erfc_inv(2.0 * (1.0 - u))


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# regularized lower incomplete gamma
# ---------------------------------------------------------------------------


def _gamma_series(s: float, x: float) -> float:
    term = 1.0 / s
    total = term
    ap = s
    for _ in range(100000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _gamma_continued_fraction(s: float, x: float) -> float:
    # modified Lentz evaluation of the upper tail Q(s, x)
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + s * math.log(x) - math.lgamma(s)) * h


def lower_incomplete_gamma_regularized(s: float, x: float) -> float:
    """P(s, x) = lower_gamma(s, x) / Gamma(s).

    Series expansion below ``x = s + 1``, Lentz continued fraction for the
    upper tail above it.
    """
    if not s > 0.0:
        raise ValueError(f"shape must be positive, got {s!r}")
    if not x >= 0.0:
        raise ValueError(f"argument must be nonnegative, got {x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < s + 1.0:
        return min(_gamma_series(s, x), 1.0)
    return max(1.0 - _gamma_continued_fraction(s, x), 0.0)


# ---------------------------------------------------------------------------
# modified Bessel functions of the second kind, orders 0 and 1
# ---------------------------------------------------------------------------


def _bessel_k01_series(x: float) -> tuple[float, float]:
    q = 0.25 * x * x
    log_half = math.log(0.5 * x)
    # K0 = -(ln(x/2) + gamma) I0 + sum q^k/(k!)^2 H_k
    # K1 = 1/x + ln(x/2) I1 - (x/4) sum [psi(k+1)+psi(k+2)] q^k/(k!(k+1)!)
    i0 = 0.0
    i1 = 0.0
    s0 = 0.0
    s1 = 0.0
    term0 = 1.0  # q^k/(k!)^2
    term1 = 1.0  # q^k/(k!(k+1)!)
    harmonic = 0.0
    psi_k1 = -EULER_GAMMA  # psi(k+1)
    for k in range(200):
        if k > 0:
            term0 *= q / (k * k)
            term1 *= q / (k * (k + 1))
            harmonic += 1.0 / k
            psi_k1 += 1.0 / k
        psi_k2 = psi_k1 + 1.0 / (k + 1)
        i0 += term0
        i1 += term1
        s0 += term0 * harmonic
        s1 += term1 * (psi_k1 + psi_k2)
        if term0 < 1e-17 * i0 and term1 < 1e-17 * i1:
            break
    i1 *= 0.5 * x
    k0 = -(log_half + EULER_GAMMA) * i0 + s0
    k1 = 1.0 / x + log_half * i1 - 0.25 * x * s1
    return k0, k1


def _bessel_k01_steed(x: float) -> tuple[float, float]:
    # Steed's continued fraction (Temme's CF2) for order 0, recurrence to order 1
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, 100000):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < 1e-17:
            break
    h = a1 * h
    k0 = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def bessel_k(nu: int, x: float) -> float:
    """Modified Bessel function of the second kind K_nu(x) for nu in {0, 1}."""
    if nu not in (0, 1):
        raise ValueError(f"only orders 0 and 1 are supported, got {nu!r}")
    if not x > 0.0:
        raise ValueError(f"argument must be positive, got {x!r}")
    if x <= 2.0:
        k0, k1 = _bessel_k01_series(x)
    else:
        k0, k1 = _bessel_k01_steed(x)
    return k0 if nu == 0 else k1


def x_bessel_k1(x: float) -> float:
    """x*K1(x) with the continuous value 1 at x = 0."""
    if x == 0.0:
        return 1.0
    return x * bessel_k(1, x)


# ---------------------------------------------------------------------------
# Gauss-Laguerre quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Laguerre rule for integrals of the form int_0^inf f(x) e^{-x} dx.

    ``log_weights`` is kept alongside ``weights`` because the weights of the
    outermost nodes underflow double precision for large orders; the scaled
    weights ``w_m e^{x_m}`` needed for integrands without the exponential
    factor stay representable.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray

    @property
    def scaled_weights(self) -> np.ndarray:
        return np.exp(self.log_weights + self.nodes)

    def integrate(self, func) -> float:
        """Approximate int_0^inf func(x) dx; ``func`` must accept an array."""
        values = np.asarray(func(self.nodes), dtype=float)
        return float(np.sum(self.scaled_weights * values))


def _laguerre_scaled(n: int, x: float) -> tuple[float, float, float]:
    """Return (L_n(x), L_{n-1}(x), log_scale) with L values divided by exp(log_scale)."""
    prev = 1.0
    cur = 1.0 - x
    log_scale = 0.0
    if n == 0:
        return 1.0, 0.0, 0.0
    for k in range(1, n):
        nxt = ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
        prev, cur = cur, nxt
        big = max(abs(cur), abs(prev))
        if big > 1e100:
            prev /= big
            cur /= big
            log_scale += math.log(big)
    return cur, prev, log_scale


def _christoffel_log_weight(m: int, x: float) -> float:
    # w = 1 / sum_{k<m} L_k(x)^2 (orthonormal Laguerre basis); positive terms only
    prev = 1.0
    cur = 1.0 - x
    total = 1.0 + cur * cur if m > 1 else 1.0
    log_scale = 0.0
    for k in range(1, m - 1):
        nxt = ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
        prev, cur = cur, nxt
        total += cur * cur
        big = max(abs(cur), abs(prev))
        if big > 1e100:
            prev /= big
            cur /= big
            total /= big * big
            log_scale += math.log(big)
    return -(math.log(total) + 2.0 * log_scale)


def _root_formula_log_weight(m: int, x: float) -> float:
    # w = x / ((m+1)^2 L_{m+1}(x)^2), with L_{m+1} from one more recurrence step
    lm, lm1, log_scale = _laguerre_scaled(m, x)
    lnext = ((2 * m + 1 - x) * lm - m * lm1) / (m + 1)
    return math.log(x) - 2.0 * (math.log(m + 1) + math.log(abs(lnext)) + log_scale)


def gauss_laguerre(order: int = 64) -> QuadratureRule:
    """Nodes and weights of the ``order``-point Gauss-Laguerre rule.

    Nodes come from the eigenvalues of the symmetric tridiagonal Jacobi
    matrix of the Laguerre recurrence (Golub-Welsch), polished with Newton
    steps on L_M. At a root of L_M the weight x / ((M+1)^2 L_{M+1}(x)^2)
    equals the Christoffel number 1 / sum_k L_k(x)^2; the latter is summed
    from positive terms and is what gets evaluated.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)) or not 1 <= order <= 256:
        raise ValueError(f"quadrature order must be an integer in [1, 256], got {order!r}")
    m = int(order)
    diag = 2.0 * np.arange(m) + 1.0
    off = np.arange(1, m, dtype=float)
    jacobi = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    nodes = np.sort(np.linalg.eigvalsh(jacobi))

    refined = np.empty(m)
    log_w = np.empty(m)
    for i, x in enumerate(nodes):
        for _ in range(3):
            lm, lm1, _ = _laguerre_scaled(m, x)
            denom = m * (lm - lm1)
            if denom == 0.0:
                break
            step = x * lm / denom
            x -= step
            if abs(step) <= 4 * _EPS * x:
                break
        refined[i] = x
        log_w[i] = _christoffel_log_weight(m, x)
    weights = np.exp(log_w)
    return QuadratureRule(order=m, nodes=refined, weights=weights, log_weights=log_w)
