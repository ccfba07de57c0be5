"""Seeded link-level Monte Carlo reference for every analytical quantity.

Trials are grouped in fixed blocks of ``BLOCK_SIZE``; each block draws from
its own generator seeded by (base_seed, block index, stream id), so results
do not depend on how blocks are distributed over shards. Block partial sums
are combined with ``math.fsum``, which is exact and order independent.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .analysis import SensingParams, UserLink, echo_snr_scale, far_rate, near_rate
from .channel import SystemParams
from .copula import sample_correlated_normals

BLOCK_SIZE = 1 << 14
Z99 = 2.5758293035489004

# stream ids within a block
_S_TAG = 0
_S_DIRECT = {"near": 1, "far": 3}
_S_CASCADE = {"near": 2, "far": 4}
_S_ECHO = 5
_S_IMAG = 6


@dataclass(frozen=True)
class TrialConfig:
    trials: int = 10**5
    base_seed: int = 2024
    shards: int = 1
    coherent_mode: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.shards < 1:
            raise ValueError(f"shards must be >= 1, got {self.shards}")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")

    def blocks(self) -> list[tuple[int, int]]:
        """(block index, trial count) pairs covering all trials."""
        full, rest = divmod(self.trials, BLOCK_SIZE)
        out = [(b, BLOCK_SIZE) for b in range(full)]
        if rest:
            out.append((full, rest))
        return out


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with a normal-approximation 99% confidence half-width."""

    mean: float
    ci_halfwidth_99: float
    trials_used: int

    @classmethod
    def from_sums(cls, total: float, total_sq: float, n: int) -> McEstimate:
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
        return cls(mean, Z99 * math.sqrt(var / n), n)

    @property
    def lower(self) -> float:
        return self.mean - self.ci_halfwidth_99

    @property
    def upper(self) -> float:
        return self.mean + self.ci_halfwidth_99


def block_rng(base_seed: int, block: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(block, stream)))


def _exp_from_normal(x: np.ndarray, mean: float) -> np.ndarray:
    # -mean * ln(1 - Phi(x)) = -mean * ln(Phi(-x))
    return -mean * special.log_ndtr(-x)


def _gains_block(
    link: UserLink,
    params: SystemParams,
    b: np.ndarray,
    rng_direct: np.random.Generator,
    rng_cascade: np.random.Generator,
    coherent: bool = False,
    rng_imag: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-port equivalent gains, shape (len(b), N), given the shared tag gain ``b``."""
    n = b.shape[0]
    user = link.user
    model = link.correlation
    d_direct = params.d_b(user) ** -params.alpha
    d_cascade = params.zeta * params.d_b_t**-params.alpha * params.d_t(user) ** -params.alpha
    if not coherent:
        a = _exp_from_normal(sample_correlated_normals(model, rng_direct, n), params.abar)
        c = _exp_from_normal(sample_correlated_normals(model, rng_cascade, n), params.cbar)
        return d_direct * a + d_cascade * b[:, None] * c
    # complex Rayleigh coefficients with correlated in-phase/quadrature parts;
    # amplitudes follow the coherent-sum signal model literally
    rng_imag = rng_imag if rng_imag is not None else rng_direct

    def rayleigh(rng, mean):
        re = sample_correlated_normals(model, rng, n)
        im = sample_correlated_normals(model, rng_imag, n)
        return (re + 1j * im) * math.sqrt(mean / 2.0)

    h_b = rayleigh(rng_direct, params.abar)
    h_t = rayleigh(rng_cascade, params.cbar)
    h_bt = np.sqrt(b) * np.exp(2j * math.pi * rng_imag.random(n))
    h = d_direct * h_b + d_cascade * h_bt[:, None] * h_t
    return np.abs(h) ** 2


def _tag_gains(params: SystemParams, rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.exponential(params.bbar, n)


def sample_equivalent_gains(
    link: UserLink,
    params: SystemParams,
    rng: np.random.Generator,
    size: int | None = None,
    coherent_mode: bool = False,
) -> np.ndarray:
    """Draw per-port equivalent gains for one user.

    Direct and tag-user gains are exponential with Gaussian-copula dependence
    across ports (independent of each other); the BS-tag gain is one
    exponential shared by all ports of a trial. Returns shape (N,) or
    (size, N).
    """
    n = 1 if size is None else size
    streams = rng.spawn(3)
    b = _tag_gains(params, streams[0], n)
    g = _gains_block(link, params, b, streams[1], streams[2], coherent_mode, streams[2])
    return g[0] if size is None else g


# ---------------------------------------------------------------------------
# block evaluation and reduction
# ---------------------------------------------------------------------------


def _run_blocks(block_fn: Callable, blocks: Sequence[tuple[int, int]]) -> list[dict]:
    return [block_fn(b, n) for b, n in blocks]


def _reduce(parts: list[dict], keys: Sequence[str], n: int) -> dict[str, McEstimate]:
    out = {}
    for key in keys:
        total = math.fsum(p[key][0] for p in parts)
        total_sq = math.fsum(p[key][1] for p in parts)
        out[key] = McEstimate.from_sums(total, total_sq, n)
    return out


def _sums(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return math.fsum(x), math.fsum(x * x)


class _BlockTask:
    """Picklable callable evaluating one block for the process pool."""

    def __init__(self, kind, params, links, gamma_bar, cfg, sensing=None):
        self.kind = kind
        self.params = params
        self.links = links
        self.gamma_bar = gamma_bar
        self.cfg = cfg
        self.sensing = sensing

    def best_gains(self, block: int, n: int) -> dict[str, np.ndarray]:
        seed = self.cfg.base_seed
        b = _tag_gains(self.params, block_rng(seed, block, _S_TAG), n)
        out = {}
        for link in self.links:
            g = _gains_block(
                link,
                self.params,
                b,
                block_rng(seed, block, _S_DIRECT[link.user]),
                block_rng(seed, block, _S_CASCADE[link.user]),
                self.cfg.coherent_mode,
                block_rng(seed, block, _S_IMAG + _S_DIRECT[link.user]),
            )
            out[link.user] = g.max(axis=1)
        return out

    def __call__(self, block: int, n: int) -> dict:
        p = self.params
        gb = self.gamma_bar
        if self.kind == "echo":
            rng = block_rng(self.cfg.base_seed, block, _S_ECHO)
            # g_bt / bbar and g_tb / ebar are unit exponentials
            echo = echo_snr_scale(p, self.sensing, gb) * rng.standard_exponential(n) * rng.standard_exponential(n)
            rate = self.sensing.beta / (2 * self.sensing.T) * np.log2(1.0 + 2 * self.sensing.T * echo)
            return {"echo": _sums(echo), "esr": _sums(rate)}
        best = self.best_gains(block, n)
        out = {}
        if self.kind == "outage":
            s = gb * p.mu_c
            if "near" in best:
                g = best["near"]
                sic = s * p.p_uf * g / (s * p.p_un * g + 1.0)
                own = s * p.p_un * g
                out["near"] = _sums((sic <= p.gamma_hat_sic) | (own <= p.gamma_hat_un))
            if "far" in best:
                g = best["far"]
                sinr = s * p.p_uf * g / (s * p.p_un * g + 1.0)
                out["far"] = _sums(sinr <= p.gamma_hat_uf)
        elif self.kind == "ecr":
            if "near" in best:
                out["near"] = _sums(near_rate(p, gb, best["near"]))
            if "far" in best:
                out["far"] = _sums(far_rate(p, gb, best["far"]))
        elif self.kind == "gains":
            for user, g in best.items():
                out[user] = _sums(g)
        return out


def _execute(task: _BlockTask, cfg: TrialConfig) -> list[dict]:
    blocks = cfg.blocks()
    if cfg.shards == 1 or len(blocks) == 1:
        return _run_blocks(task, blocks)
    shards = [blocks[i :: cfg.shards] for i in range(cfg.shards)]
    with ProcessPoolExecutor(max_workers=cfg.shards) as pool:
        futures = [pool.submit(_run_blocks, task, s) for s in shards if s]
        parts = [p for f in futures for p in f.result()]
    return parts


def _as_links(links) -> list[UserLink]:
    if isinstance(links, UserLink):
        return [links]
    if isinstance(links, dict):
        return list(links.values())
    return list(links)


def mc_outage(params, link_near, link_far, gamma_bar, cfg: TrialConfig) -> dict[str, McEstimate]:
    """Empirical outage frequencies; users share the BS-tag gain within a trial."""
    links = [lk for lk in (link_near, link_far) if lk is not None]
    parts = _execute(_BlockTask("outage", params, links, gamma_bar, cfg), cfg)
    return _reduce(parts, [lk.user for lk in links], cfg.trials)


def mc_ecr(params, links, gamma_bar, cfg: TrialConfig) -> dict[str, McEstimate]:
    """Empirical E[log2(1 + SINR)] for each link in ``links`` (sequence or mapping)."""
    links = [lk for lk in _as_links(links) if lk is not None]
    parts = _execute(_BlockTask("ecr", params, links, gamma_bar, cfg), cfg)
    return _reduce(parts, [lk.user for lk in links], cfg.trials)


def mc_mean_best_gain(params, links, cfg: TrialConfig) -> dict[str, McEstimate]:
    links = _as_links(links)
    parts = _execute(_BlockTask("gains", params, links, 1.0, cfg), cfg)
    return _reduce(parts, [lk.user for lk in links], cfg.trials)


def mc_echo(params, sensing: SensingParams, gamma_bar, cfg: TrialConfig) -> dict[str, McEstimate]:
    """Echo-SNR mean and sensing-rate average, keys ``"echo"`` and ``"esr"``."""
    parts = _execute(_BlockTask("echo", params, [], gamma_bar, cfg, sensing), cfg)
    return _reduce(parts, ["echo", "esr"], cfg.trials)


def mc_esr(params, sensing: SensingParams, gamma_bar, cfg: TrialConfig) -> McEstimate:
    """Empirical E[(beta/2T) log2(1 + 2T gamma_echo)]."""
    return mc_echo(params, sensing, gamma_bar, cfg)["esr"]


# ---------------------------------------------------------------------------
# empirical CDF of the best-port gain
# ---------------------------------------------------------------------------


class EmpiricalCdf:
    """Right-continuous step function over sorted samples."""

    def __init__(self, samples):
        self.samples = np.sort(np.asarray(samples, dtype=float).ravel())
        self.n = self.samples.size

    def __call__(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.n

    def left(self, x):
        return np.searchsorted(self.samples, x, side="left") / self.n

    def ks_distance(self, cdf: Callable[[float], float], grid_size: int | None = None) -> float:
        """Upper bound on sup |ECDF - F| for a nondecreasing continuous ``cdf``.

        With ``grid_size=None`` the exact statistic over all sample points is
        returned. Otherwise ``cdf`` is evaluated only at ``grid_size`` sample
        quantiles and monotonicity bounds the gaps between them.
        """
        if grid_size is None or grid_size >= self.n:
            f = np.array([cdf(x) for x in self.samples])
            i = np.arange(1, self.n + 1)
            return float(max(np.max(i / self.n - f), np.max(f - (i - 1) / self.n)))
        idx = np.unique(np.linspace(0, self.n - 1, grid_size).round().astype(int))
        pts = self.samples[idx]
        f = np.array([cdf(x) for x in pts])
        e_right = self(pts)
        e_left = self.left(pts)
        at_pts = np.maximum(np.abs(e_right - f), np.abs(e_left - f))
        # between consecutive grid points x_k < x < x_{k+1}
        gap_hi = e_left[1:] - f[:-1]
        gap_lo = f[1:] - e_right[:-1]
        first = float(f[0])  # below the smallest sample the ECDF is 0
        last = 1.0 - e_right[-1]  # above the largest sample ECDF is 1, F <= 1
        return float(max(at_pts.max(), gap_hi.max(initial=0.0), gap_lo.max(initial=0.0), first, last))


def empirical_fas_cdf(link: UserLink, params: SystemParams, samples: int, rng: np.random.Generator) -> EmpiricalCdf:
    """ECDF of the best-port gain from ``samples`` independent draws."""
    g = sample_equivalent_gains(link, params, rng, size=samples)
    return EmpiricalCdf(g.max(axis=1))
