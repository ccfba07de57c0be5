"""Gaussian copula machinery.

The multivariate normal CDF is evaluated with Genz's separation-of-variables
transform integrated by randomly shifted rank-1 lattice rules (Richtmyer
generators, baker's periodisation). The error estimate is the spread across
independent shifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .specfun import norm_ppf

DEFAULT_SEED = 0x5EED
PPF_SATURATION = 8.2
_U_FLOOR = 1e-15

_N_SHIFTS = 8
_ERROR_FACTOR = 3.0
_FIRST_BLOCK = 1 << 10
_MAX_POINTS = 1 << 20


class MvnConvergenceError(RuntimeError):
    """The QMC estimate did not reach the requested tolerance within budget."""

    def __init__(self, estimate: float, error: float, tol: float):
        super().__init__(f"MVN CDF error estimate {error:.3g} exceeds tolerance {tol:.3g} (estimate {estimate:.6g})")
        self.estimate = estimate
        self.error = error
        self.tol = tol


@dataclass(frozen=True)
class CorrelationModel:
    """Correlation matrix prepared for CDF, density and sampling use.

    ``regularized`` is the eigenvalue-clipped, unit-diagonal version of
    ``matrix``; ``factor``, ``inverse`` and ``log_det`` all refer to it.
    """

    dim: int
    matrix: np.ndarray
    regularized: np.ndarray
    factor: np.ndarray
    inverse: np.ndarray
    log_det: float
    eps_regularization: float

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.regularized == np.eye(self.dim)))


def build_correlation_model(matrix, eps: float = 1e-10) -> CorrelationModel:
    """Validate and regularise a correlation matrix.

    Eigenvalues below ``eps`` are raised to ``eps``, the matrix is rebuilt
    and rescaled back to a unit diagonal.
    """
    r = np.array(matrix, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1] or r.shape[0] == 0:
        raise ValueError(f"correlation matrix must be square and nonempty, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError("correlation matrix has non-finite entries")
    if not np.allclose(r, r.T, rtol=0.0, atol=1e-12):
        raise ValueError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(r), 1.0, rtol=0.0, atol=1e-12):
        raise ValueError("correlation matrix must have a unit diagonal")
    if np.max(np.abs(r)) > 1.0 + 1e-12:
        raise ValueError("correlation entries must lie in [-1, 1]")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps!r}")
    n = r.shape[0]
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)

    lam, vec = np.linalg.eigh(r)
    applied = 0.0
    if lam.min() < eps:
        applied = eps
        # pad by the eigensolver's resolution so the rebuilt, rescaled matrix
        # still measures at or above the floor
        floor = eps + n * np.finfo(float).eps * lam.max()
        lam = np.maximum(lam, floor)
        reg = (vec * lam) @ vec.T
        scale = 1.0 / np.sqrt(np.diag(reg))
        reg = reg * np.outer(scale, scale)
        reg = 0.5 * (reg + reg.T)
        np.fill_diagonal(reg, 1.0)
        lam, vec = np.linalg.eigh(reg)
        lam = np.maximum(lam, eps)
    else:
        reg = r

    inverse = (vec / lam) @ vec.T
    inverse = 0.5 * (inverse + inverse.T)
    log_det = float(np.sum(np.log(lam)))
    try:
        factor = np.linalg.cholesky(reg)
    except np.linalg.LinAlgError:
        factor = np.linalg.cholesky((vec * lam) @ vec.T)
    return CorrelationModel(
        dim=n,
        matrix=np.array(matrix, dtype=float),
        regularized=reg,
        factor=factor,
        inverse=inverse,
        log_det=log_det,
        eps_regularization=applied,
    )


def independent_model(n: int) -> CorrelationModel:
    return build_correlation_model(np.eye(n))


def saturated_ppf(u: float) -> float:
    """Standard normal quantile with the +/-8.2 saturation used for copula inputs.

    ``u`` of exactly 0 or 1 maps to -inf / +inf.
    """
    if u <= 0.0:
        return -math.inf
    if u >= 1.0:
        return math.inf
    if u <= _U_FLOOR:
        return -PPF_SATURATION
    if u >= 1.0 - _U_FLOOR:
        return PPF_SATURATION
    return norm_ppf(u)


# ---------------------------------------------------------------------------
# Genz estimator
# ---------------------------------------------------------------------------


def _reorder(cov: np.ndarray, upper: np.ndarray):
    """Genz-Bretz variable prioritisation with a simultaneous Cholesky factor.

    At each step the remaining variable with the smallest conditional
    probability is moved to the front.
    """
    n = len(upper)
    cov = cov.copy()
    b = upper.copy()
    chol = np.zeros((n, n))
    y = np.zeros(n)
    for i in range(n):
        best = i
        best_p = math.inf
        best_s = 1.0
        for j in range(i, n):
            var = cov[j, j] - np.dot(chol[j, :i], chol[j, :i])
            s = math.sqrt(max(var, 1e-300))
            p = special.ndtr((b[j] - np.dot(chol[j, :i], y[:i])) / s)
            if p < best_p:
                best, best_p, best_s = j, p, s
        if best != i:
            cov[[i, best], :] = cov[[best, i], :]
            cov[:, [i, best]] = cov[:, [best, i]]
            chol[[i, best], :] = chol[[best, i], :]
            b[[i, best]] = b[[best, i]]
        chol[i, i] = best_s
        for j in range(i + 1, n):
            chol[j, i] = (cov[j, i] - np.dot(chol[j, :i], chol[i, :i])) / best_s
        lim = (b[i] - np.dot(chol[i, :i], y[:i])) / best_s
        # conditional mean of a standard normal truncated above at lim
        cdf = special.ndtr(lim)
        y[i] = -math.exp(-0.5 * lim * lim) / math.sqrt(2 * math.pi) / cdf if cdf > 1e-300 else lim
    return chol, b


def _primes(k: int) -> list[int]:
    out = []
    c = 2
    while len(out) < k:
        if all(c % p for p in out if p * p <= c):
            out.append(c)
        c += 1
    return out


def _genz_integrand(w: np.ndarray, chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = len(b)
    e0 = special.ndtr(b[0] / chol[0, 0])
    f = np.full(w.shape[0], e0)
    e = f.copy()
    y = np.zeros((w.shape[0], n - 1))
    for i in range(1, n):
        arg = np.clip(w[:, i - 1] * e, 1e-300, 1.0 - 1e-16)
        y[:, i - 1] = special.ndtri(arg)
        e = special.ndtr((b[i] - y[:, :i] @ chol[i, :i]) / chol[i, i])
        f = f * e
    return f


def _lattice_estimates(chol, b, n_points, shifts):
    dim = len(b) - 1
    gen = np.sqrt(np.array(_primes(dim), dtype=float)) % 1.0
    k = np.arange(1, n_points + 1, dtype=float)[:, None]
    base = (k * gen) % 1.0
    out = np.empty(len(shifts))
    for s, shift in enumerate(shifts):
        x = (base + shift) % 1.0
        x = np.abs(2.0 * x - 1.0)
        out[s] = float(np.mean(_genz_integrand(x, chol, b)))
    return out


def _finite_upper(upper: np.ndarray):
    """Handle infinite limits: returns (prob_if_trivial, mask_of_active)."""
    if np.any(upper == -np.inf):
        return 0.0, None
    active = upper != np.inf
    if not np.any(active):
        return 1.0, None
    return None, active


def mvn_cdf(
    upper,
    model: CorrelationModel,
    tol: float = 1e-4,
    seed: int = DEFAULT_SEED,
    rel_tol: float | None = None,
    n_points: int | None = None,
    max_points: int = _MAX_POINTS,
) -> float:
    """P(Z <= upper) for Z ~ N(0, R) with R the regularised model matrix.

    Parameters
    ----------
    upper : array_like
        Upper integration limits; entries may be +/-inf.
    tol : float
        Target absolute error (3 standard errors across random shifts).
    rel_tol : float, optional
        Additional relative target. Sampling continues until it is met or the
        budget runs out; failing it alone does not raise.
    n_points : int, optional
        Fix the lattice size per shift instead of refining adaptively. The
        result is then a smooth function of ``upper`` (common random numbers).

    Raises
    ------
    MvnConvergenceError
        If the absolute target is not met within ``max_points`` evaluations.
    """
    b = np.asarray(upper, dtype=float).ravel()
    if b.shape[0] != model.dim:
        raise ValueError(f"expected {model.dim} limits, got {b.shape[0]}")
    if np.any(np.isnan(b)):
        raise ValueError("NaN integration limit")
    trivial, active = _finite_upper(b)
    if trivial is not None:
        return trivial
    cov = model.regularized[np.ix_(active, active)]
    b = b[active]
    if len(b) == 1:
        return float(special.ndtr(b[0]))
    chol, b = _reorder(cov, b)

    rng = np.random.default_rng(seed)
    shifts = rng.random((_N_SHIFTS, len(b) - 1))
    if n_points is not None:
        est = _lattice_estimates(chol, b, int(n_points), shifts)
        return float(np.clip(est.mean(), 0.0, 1.0))

    n = _FIRST_BLOCK
    while True:
        est = _lattice_estimates(chol, b, n, shifts)
        mean = float(est.mean())
        err = _ERROR_FACTOR * float(est.std(ddof=1)) / math.sqrt(_N_SHIFTS)
        abs_ok = err <= tol
        rel_ok = rel_tol is None or err <= rel_tol * abs(mean)
        if abs_ok and rel_ok:
            break
        if 2 * n * _N_SHIFTS > max_points:
            if not abs_ok:
                raise MvnConvergenceError(mean, err, tol)
            break
        n *= 2
    return float(np.clip(mean, 0.0, 1.0))


def mvn_cdf_equicoordinate(
    t: float,
    model: CorrelationModel,
    tol: float = 1e-4,
    seed: int = DEFAULT_SEED,
    **kwargs,
) -> float:
    """Phi_R(t, ..., t). ``t = -inf`` gives 0 and ``t = +inf`` gives 1 exactly."""
    if t == -math.inf:
        return 0.0
    if t == math.inf:
        return 1.0
    return mvn_cdf(np.full(model.dim, float(t)), model, tol=tol, seed=seed, **kwargs)


def gaussian_copula_cdf(u, model: CorrelationModel, tol: float = 1e-4, seed: int = DEFAULT_SEED, **kwargs) -> float:
    """C(u_1, ..., u_N) = Phi_R(phi^-1(u_1), ..., phi^-1(u_N))."""
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != model.dim:
        raise ValueError(f"expected {model.dim} coordinates, got {u.shape[0]}")
    if np.any((u < 0.0) | (u > 1.0)):
        raise ValueError("copula arguments must lie in [0, 1]")
    z = np.array([saturated_ppf(v) for v in u])
    if np.all(z == z[0]):
        return mvn_cdf_equicoordinate(z[0], model, tol=tol, seed=seed, **kwargs)
    return mvn_cdf(z, model, tol=tol, seed=seed, **kwargs)


def gaussian_copula_density(u, model: CorrelationModel) -> float:
    """exp(-z^T (R^-1 - I) z / 2) / sqrt(det R) with z = phi^-1(u)."""
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != model.dim:
        raise ValueError(f"expected {model.dim} coordinates, got {u.shape[0]}")
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ValueError("copula density needs coordinates strictly inside (0, 1)")
    z = np.array([saturated_ppf(v) for v in u])
    quad = z @ (model.inverse - np.eye(model.dim)) @ z
    return math.exp(-0.5 * quad - 0.5 * model.log_det)


def sample_correlated_normals(model: CorrelationModel, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draws of N(0, R): ``factor @ z`` for z ~ N(0, I)."""
    shape = (model.dim,) if size is None else (size, model.dim)
    z = rng.standard_normal(shape)
    return z @ model.factor.T


def sample_correlated_uniforms(model: CorrelationModel, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform marginals coupled by the Gaussian copula of ``model``."""
    return special.ndtr(sample_correlated_normals(model, rng, size))
