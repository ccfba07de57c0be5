"""Command-line sweeps: outage, ECR, ESR, trade-off and analytic-vs-MC validation.

Every run writes a CSV plus a JSON manifest next to it. The manifest holds
the fully resolved configuration, so ``--from-manifest`` reproduces the CSV
byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_GLQ_ORDER,
    DEFAULT_MVN_TOL,
    BenchmarkMode,
    QuadratureError,
    SensingParams,
    apply_benchmark,
    ecr_glq,
    ecr_integral_reference,
    esr_closed_form,
    make_link,
    outage,
    outage_asymptotic,
    rate_tradeoff,
)
from .channel import USERS, FasGeometry, SystemParams
from .copula import MvnConvergenceError
from .montecarlo import TrialConfig, mc_ecr, mc_esr, mc_outage
from .specfun import gauss_laguerre

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_VALIDATION = 3

SUBCOMMANDS = ("outage", "ecr", "esr", "tradeoff", "validate")

COLUMNS = {
    "outage": ["snr_db", "mode", "user", "op_exact", "op_asymptotic", "op_mc", "op_mc_ci99"],
    "ecr": ["snr_db", "mode", "user", "ecr_glq", "ecr_quad_ref", "ecr_mc", "ecr_mc_ci99"],
    "esr": ["snr_db", "mode", "d_b_t", "esr_closed", "esr_mc", "esr_mc_ci99"],
    "tradeoff": ["mu", "mode", "esr", "sum_ecr"],
    "validate": ["snr_db", "mode", "user", "quantity", "analytic", "mc", "mc_ci99", "tolerance", "status"],
}

PROVENANCE = {
    "snr_db": "average transmit SNR in dB (grid input)",
    "mode": "benchmark: FAS/TAS receiver x ISABC/ISAC",
    "user": "NOMA user, near or far",
    "op_exact": "Gaussian-copula outage probability at the Gamma-approximated threshold",
    "op_asymptotic": "high-SNR outage with the incomplete gamma replaced by its leading term",
    "op_mc": "Monte Carlo outage frequency (empty when trials = 0)",
    "op_mc_ci99": "99% confidence half-width of op_mc",
    "ecr_glq": "Gauss-Laguerre ergodic rate with the configured best-port density",
    "ecr_quad_ref": "adaptive-quadrature value of the same integrand",
    "ecr_mc": "Monte Carlo mean of log2(1 + SINR) (empty when trials = 0)",
    "ecr_mc_ci99": "99% confidence half-width of ecr_mc",
    "d_b_t": "BS-tag distance in metres",
    "esr_closed": "Jensen bound (beta/2T) log2(1 + 2T E[echo SNR])",
    "esr_mc": "Monte Carlo mean sensing rate (empty when trials = 0)",
    "esr_mc_ci99": "99% confidence half-width of esr_mc",
    "mu": "fraction of power for communication; sensing gets 1 - mu",
    "esr": "sensing-rate bound at SNR (1 - mu) * gamma_bar",
    "sum_ecr": "near + far Gauss-Laguerre ergodic rate at mu_c = mu",
    "quantity": "op (outage probability) or ecr (ergodic rate)",
    "analytic": "op: copula outage; ecr: Gauss-Laguerre with the differentiated-CDF density",
    "mc": "Monte Carlo estimate",
    "mc_ci99": "99% confidence half-width of mc",
    "tolerance": "op: |log10 ratio| bound; ecr: absolute bound max(2% of mc, mc_ci99)",
    "status": "pass, fail, or skip (op below 1e-4 is not compared)",
}

OP_LOG10_TOL = 0.2
OP_FLOOR = 1e-4
ECR_REL_TOL = 0.02


class ConfigError(ValueError):
    """Malformed configuration; the message names the line and key."""


class NumericFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_SYSTEM_KEYS = [f.name for f in dataclasses.fields(SystemParams) if not f.name.startswith("gamma_hat")]
_THRESHOLD_KEYS = {"gamma_hat_sic_db": "gamma_hat_sic", "gamma_hat_un_db": "gamma_hat_un", "gamma_hat_uf_db": "gamma_hat_uf"}
_SENSING_KEYS = [f.name for f in dataclasses.fields(SensingParams)]
_GEOM_KEYS = ["n1_near", "n2_near", "w1_near", "w2_near", "n1_far", "n2_far", "w1_far", "w2_far"]
_RUN_KEYS = ["modes", "snr_db", "mu", "tradeoff_snr_db", "glq_order", "mvn_tol", "ecr_pdf", "trials", "seed", "shards"]
KNOWN_KEYS = _SYSTEM_KEYS + list(_THRESHOLD_KEYS) + _SENSING_KEYS + _GEOM_KEYS + _RUN_KEYS

DEFAULT_SNR = {"outage": "0:30:2", "ecr": "0:30:2", "esr": "0:30:2", "tradeoff": "15", "validate": "0:10:5"}
DEFAULT_MODES = {
    "validate": "FAS_ISABC",
}
DEFAULT_TRIALS = {"validate": 10**5}


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    sensing: SensingParams
    geometry_near: FasGeometry
    geometry_far: FasGeometry
    modes: tuple[BenchmarkMode, ...]
    snr_db_grid: tuple[float, ...]
    mu_grid: tuple[float, ...]
    quadrature_order: int = DEFAULT_GLQ_ORDER
    mvn_tol: float = DEFAULT_MVN_TOL
    ecr_pdf: str = "copula"
    mc: TrialConfig | None = None
    output_path: str = ""
    raw: dict = field(default_factory=dict, compare=False)

    def geometry(self, user: str) -> FasGeometry:
        return self.geometry_near if user == "near" else self.geometry_far


def parse_range(text: str) -> list[float]:
    """``A:B:STEP`` (inclusive), a comma list, or a single number."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be A:B:STEP, got {text!r}")
        a, b, step = (float(p) for p in parts)
        if not step > 0 or b < a:
            raise ValueError(f"range needs STEP > 0 and B >= A, got {text!r}")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        # round away accumulated binary noise so grids print cleanly
        return [round(a + k * step, 12) + 0.0 for k in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


def _read_lines(text: str) -> dict[str, tuple[int, str]]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: key {key!r} has an empty value")
        out[key] = (lineno, value)
    return out


def parse_config(text: str = "", overrides: dict[str, str] | None = None, subcommand: str = "outage", output_path: str = "") -> RunConfig:
    """Build a :class:`RunConfig` from ``key = value`` text plus flag overrides.

    Overrides are string values keyed like the file and win over it. Missing
    keys take the numerical-results defaults.
    """
    entries = _read_lines(text)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in KNOWN_KEYS:
            raise ConfigError(f"flag: unknown key {key!r}")
        entries[key] = (0, str(value))

    def where(key):
        line = entries[key][0]
        return f"line {line}" if line else "flag"

    def get(key, conv, default):
        if key not in entries:
            return default
        try:
            return conv(entries[key][1])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where(key)}: key {key!r}: {exc}") from None

    def as_int(s):
        try:
            return int(s)
        except ValueError:
            pass
        v = float(s)
        if v != int(v):
            raise ValueError(f"expected an integer, got {s!r}")
        return int(v)

    def build(cls, key_of, **kwargs):
        try:
            return cls(**kwargs)
        except ValueError as exc:
            keys = [k for k in key_of if k in entries] or list(key_of)
            loc = ", ".join(f"{where(k)} key {k!r}" for k in keys if k in entries) or "defaults"
            raise ConfigError(f"{loc}: {exc}") from None

    sys_kw = {k: get(k, float, getattr(SystemParams, k)) for k in _SYSTEM_KEYS}
    for key, name in _THRESHOLD_KEYS.items():
        sys_kw[name] = 10.0 ** (get(key, float, 0.0) / 10.0)
    params = build(SystemParams, _SYSTEM_KEYS + list(_THRESHOLD_KEYS), **sys_kw)
    sensing = build(
        SensingParams, _SENSING_KEYS, **{k: get(k, float, getattr(SensingParams, k)) for k in _SENSING_KEYS}
    )
    geoms = {}
    for user in USERS:
        keys = [f"n1_{user}", f"n2_{user}", f"w1_{user}", f"w2_{user}"]
        geoms[user] = build(
            FasGeometry,
            keys,
            n1=get(keys[0], as_int, 2),
            n2=get(keys[1], as_int, 2),
            w1=get(keys[2], float, 1.0),
            w2=get(keys[3], float, 1.0),
        )

    def as_modes(s):
        return tuple(BenchmarkMode(m.strip().upper()) for m in s.split(",") if m.strip())

    modes = get("modes", as_modes, as_modes(DEFAULT_MODES.get(subcommand, ",".join(m.value for m in BenchmarkMode))))
    snr = tuple(get("snr_db", parse_range, parse_range(DEFAULT_SNR[subcommand])))
    mu = tuple(get("mu", parse_range, parse_range("0:1:0.05")))
    if subcommand == "tradeoff" and "tradeoff_snr_db" in entries:
        snr = (get("tradeoff_snr_db", float, 15.0),)
    for key, grid in (("modes", modes), ("snr_db", snr), ("mu", mu)):
        if not grid:
            raise ConfigError(f"{where(key) if key in entries else 'defaults'}: key {key!r}: grid is empty")
        if key != "modes" and list(grid) != sorted(grid):
            raise ConfigError(f"{where(key)}: key {key!r}: grid must be sorted")
    if any(not 0.0 <= m <= 1.0 for m in mu):
        raise ConfigError(f"{where('mu')}: key 'mu': values must lie in [0, 1]")
    if subcommand == "tradeoff" and len(snr) != 1:
        raise ConfigError(f"{where('snr_db')}: key 'snr_db': tradeoff takes a single SNR point")

    order = get("glq_order", as_int, DEFAULT_GLQ_ORDER)
    if not 1 <= order <= 256:
        raise ConfigError(f"{where('glq_order')}: key 'glq_order': must lie in 1..256, got {order}")
    mvn_tol = get("mvn_tol", float, DEFAULT_MVN_TOL)
    if not mvn_tol > 0:
        raise ConfigError(f"{where('mvn_tol')}: key 'mvn_tol': must be positive")
    ecr_pdf = get("ecr_pdf", str, "copula")
    if ecr_pdf not in ("copula", "derivative"):
        raise ConfigError(f"{where('ecr_pdf')}: key 'ecr_pdf': expected copula or derivative, got {ecr_pdf!r}")

    trials = get("trials", as_int, DEFAULT_TRIALS.get(subcommand, 0))
    seed = get("seed", as_int, 2024)
    shards = get("shards", as_int, 1)
    mc = None
    if trials < 0:
        raise ConfigError(f"{where('trials')}: key 'trials': must be nonnegative")
    if trials > 0:
        mc = build(TrialConfig, ["trials", "seed", "shards"], trials=trials, base_seed=seed, shards=shards)
    elif subcommand == "validate":
        raise ConfigError(f"{where('trials')}: key 'trials': validate needs Monte Carlo trials")

    raw = {
        **{k: repr(getattr(params, k)) for k in _SYSTEM_KEYS},
        **{k: repr(get(k, float, 0.0)) for k in _THRESHOLD_KEYS},
        **{k: repr(getattr(sensing, k)) for k in _SENSING_KEYS},
        **{
            f"{a}_{u}": repr(getattr(geoms[u], a))
            for u in USERS
            for a in ("n1", "n2", "w1", "w2")
        },
        "modes": ",".join(m.value for m in modes),
        "snr_db": ",".join(repr(x) for x in snr),
        "mu": ",".join(repr(x) for x in mu),
        "glq_order": repr(order),
        "mvn_tol": repr(mvn_tol),
        "ecr_pdf": ecr_pdf,
        "trials": repr(trials),
        "seed": repr(seed),
        "shards": repr(shards),
    }
    return RunConfig(
        params=params,
        sensing=sensing,
        geometry_near=geoms["near"],
        geometry_far=geoms["far"],
        modes=modes,
        snr_db_grid=snr,
        mu_grid=mu,
        quadrature_order=order,
        mvn_tol=mvn_tol,
        ecr_pdf=ecr_pdf,
        mc=mc,
        output_path=output_path,
        raw=raw,
    )


# ---------------------------------------------------------------------------
# per-grid-point work
# ---------------------------------------------------------------------------


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _links(cfg: RunConfig, mode: BenchmarkMode):
    out = {}
    setup = None
    for user in USERS:
        setup = apply_benchmark(cfg.params, cfg.geometry(user), mode)
        out[user] = make_link(setup.comm_params, setup.geometry, user)
    return setup, out


def _outage_rows(cfg: RunConfig, snr_db: float, mode: BenchmarkMode) -> list[list]:
    setup, links = _links(cfg, mode)
    p = setup.comm_params
    gb = db_to_linear(snr_db)
    mc = mc_outage(p, links["near"], links["far"], gb, cfg.mc) if cfg.mc else {}
    rows = []
    for user in USERS:
        est = mc.get(user)
        rows.append(
            [
                snr_db,
                mode.value,
                user,
                outage(p, links[user], gb, tol=cfg.mvn_tol),
                outage_asymptotic(p, links[user], gb, tol=cfg.mvn_tol),
                est.mean if est else None,
                est.ci_halfwidth_99 if est else None,
            ]
        )
    return rows


def _ecr_rows(cfg: RunConfig, snr_db: float, mode: BenchmarkMode) -> list[list]:
    setup, links = _links(cfg, mode)
    p = setup.comm_params
    gb = db_to_linear(snr_db)
    rule = gauss_laguerre(cfg.quadrature_order)
    mc = mc_ecr(p, links, gb, cfg.mc) if cfg.mc else {}
    rows = []
    for user in USERS:
        est = mc.get(user)
        rows.append(
            [
                snr_db,
                mode.value,
                user,
                ecr_glq(p, links[user], gb, rule, cfg.ecr_pdf),
                ecr_integral_reference(p, links[user], gb, pdf=cfg.ecr_pdf),
                est.mean if est else None,
                est.ci_halfwidth_99 if est else None,
            ]
        )
    return rows


def _esr_rows(cfg: RunConfig, snr_db: float, mode: BenchmarkMode) -> list[list]:
    setup = apply_benchmark(cfg.params, cfg.geometry_near, mode)
    p = setup.sensing_params
    gb = db_to_linear(snr_db)
    est = mc_esr(p, cfg.sensing, gb, cfg.mc) if cfg.mc else None
    return [
        [
            snr_db,
            mode.value,
            p.d_b_t,
            esr_closed_form(p, cfg.sensing, gb),
            est.mean if est else None,
            est.ci_halfwidth_99 if est else None,
        ]
    ]


def _tradeoff_rows(cfg: RunConfig, snr_db: float, mode: BenchmarkMode) -> list[list]:
    setup, links = _links(cfg, mode)
    points = rate_tradeoff(
        setup.comm_params,
        list(links.values()),
        cfg.sensing,
        db_to_linear(snr_db),
        cfg.mu_grid,
        rule=gauss_laguerre(cfg.quadrature_order),
        sensing_params=setup.sensing_params,
        pdf=cfg.ecr_pdf,
    )
    return [[pt.mu, mode.value, pt.esr, pt.sum_ecr] for pt in points]


def op_status(analytic: float, mc: float) -> str:
    if mc < OP_FLOOR:
        return "skip"
    if analytic <= 0.0:
        return "fail"
    return "pass" if abs(math.log10(analytic) - math.log10(mc)) <= OP_LOG10_TOL else "fail"


def ecr_tolerance(mc: float, ci: float) -> float:
    return max(ECR_REL_TOL * abs(mc), ci)


def _validate_rows(cfg: RunConfig, snr_db: float, mode: BenchmarkMode) -> list[list]:
    setup, links = _links(cfg, mode)
    p = setup.comm_params
    gb = db_to_linear(snr_db)
    rule = gauss_laguerre(cfg.quadrature_order)
    op_mc = mc_outage(p, links["near"], links["far"], gb, cfg.mc)
    ecr_mc = mc_ecr(p, links, gb, cfg.mc)
    rows = []
    for user in USERS:
        est = op_mc[user]
        a = outage(p, links[user], gb, tol=cfg.mvn_tol)
        rows.append([snr_db, mode.value, user, "op", a, est.mean, est.ci_halfwidth_99, OP_LOG10_TOL, op_status(a, est.mean)])
    for user in USERS:
        est = ecr_mc[user]
        a = ecr_glq(p, links[user], gb, rule, "derivative")
        tol = ecr_tolerance(est.mean, est.ci_halfwidth_99)
        status = "pass" if abs(a - est.mean) <= tol else "fail"
        rows.append([snr_db, mode.value, user, "ecr", a, est.mean, est.ci_halfwidth_99, tol, status])
    return rows


_ROW_FN = {
    "outage": _outage_rows,
    "ecr": _ecr_rows,
    "esr": _esr_rows,
    "tradeoff": _tradeoff_rows,
    "validate": _validate_rows,
}


def grid_seed(base_seed: int, grid_index: int) -> int:
    """Independent 64-bit Monte Carlo seed for one grid point."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(grid_index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _grid_task(args) -> list[list]:
    subcommand, cfg, index, snr_db, mode = args
    if cfg.mc is not None:
        cfg = dataclasses.replace(cfg, mc=dataclasses.replace(cfg.mc, base_seed=grid_seed(cfg.mc.base_seed, index)))
    try:
        return _ROW_FN[subcommand](cfg, snr_db, mode)
    except (MvnConvergenceError, QuadratureError, ArithmeticError) as exc:
        raise NumericFailure(f"{subcommand}: mode {mode.value} at snr_db={snr_db!r}: {exc}") from exc


def run_sweep(subcommand: str, cfg: RunConfig, workers: int = 1) -> list[list]:
    """All CSV rows for ``subcommand`` in grid order (SNR outer, mode inner)."""
    points = [(snr, mode) for snr in cfg.snr_db_grid for mode in cfg.modes]
    tasks = [(subcommand, cfg, i, snr, mode) for i, (snr, mode) in enumerate(points)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_grid_task, tasks))
    else:
        chunks = [_grid_task(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def render_csv(subcommand: str, rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS[subcommand])
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


MU_ZERO_NOTE = (
    "sum_ecr is 0 at mu = 0 because every SINR scales with mu_c; a nonzero "
    "communication rate at mu = 0 is not produced by the implemented formulas"
)


def build_manifest(subcommand: str, cfg: RunConfig, csv_text: str) -> dict:
    notes = [MU_ZERO_NOTE] if subcommand == "tradeoff" else []
    return {
        "notes": notes,
        "tool": "fas-isabc",
        "version": __version__,
        "subcommand": subcommand,
        "config": cfg.raw,
        "seeds": {
            "mc_base_seed": cfg.mc.base_seed if cfg.mc else None,
            "mc_grid_seeds": "SeedSequence(mc_base_seed, spawn_key=(grid index,)), grid index = snr-major, mode-minor",
            "mc_trials": cfg.mc.trials if cfg.mc else 0,
            "mvn_lattice_seed": "fixed library default",
        },
        "columns": {c: PROVENANCE[c] for c in COLUMNS[subcommand]},
        "csv_sha256": hashlib.sha256(csv_text.encode()).hexdigest(),
    }


def manifest_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".manifest.json")


def load_manifest(path: str | Path, subcommand: str) -> dict[str, str]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    if data.get("subcommand") != subcommand:
        raise ConfigError(f"manifest {path} was written by {data.get('subcommand')!r}, not {subcommand!r}")
    config = data.get("config")
    if not isinstance(config, dict):
        raise ConfigError(f"manifest {path} has no config section")
    return {str(k): str(v) for k, v in config.items()}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fas-isabc", description="FAS-aided NOMA ISABC performance sweeps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=f"{name} sweep")
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--snr-db", help="SNR grid in dB, A:B:STEP or comma list")
        sp.add_argument("--mu", help="power-split grid, A:B:STEP or comma list")
        sp.add_argument("--modes", help="comma list of FAS_ISABC, FAS_ISAC, TAS_ISABC, TAS_ISAC")
        sp.add_argument("--trials", help="Monte Carlo trials (0 disables)")
        sp.add_argument("--seed", help="Monte Carlo base seed")
        sp.add_argument("--glq-order", help="Gauss-Laguerre order")
        sp.add_argument("--mvn-tol", help="absolute tolerance of the MVN CDF")
        sp.add_argument("--out", help="CSV path; the manifest is written next to it")
        sp.add_argument("--from-manifest", help="rerun with the resolved config of a manifest")
        sp.add_argument("--workers", type=int, default=1, help="grid points evaluated in parallel")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    subcommand = args.subcommand
    out = args.out or f"{subcommand}.csv"
    try:
        if args.from_manifest:
            text = ""
            overrides = load_manifest(args.from_manifest, subcommand)
        else:
            text = Path(args.config).read_text() if args.config else ""
            overrides = {}
        overrides.update(
            {
                k: v
                for k, v in {
                    "snr_db": args.snr_db,
                    "mu": args.mu,
                    "modes": args.modes,
                    "trials": args.trials,
                    "seed": args.seed,
                    "glq_order": args.glq_order,
                    "mvn_tol": args.mvn_tol,
                }.items()
                if v is not None
            }
        )
        cfg = parse_config(text, overrides, subcommand, out)
        if args.workers < 1:
            raise ConfigError("flag: --workers must be >= 1")
    except (ConfigError, OSError) as exc:
        print(f"fas-isabc: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        rows = run_sweep(subcommand, cfg, args.workers)
    except NumericFailure as exc:
        print(f"fas-isabc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    csv_text = render_csv(subcommand, rows)
    Path(out).write_text(csv_text)
    manifest = build_manifest(subcommand, cfg, csv_text)
    manifest_path(out).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    if subcommand == "validate":
        failed = [r for r in rows if r[-1] == "fail"]
        for r in rows:
            print(f"{r[-1].upper():4s} snr_db={r[0]!r} {r[1]} {r[2]} {r[3]}: analytic={r[4]:.6g} mc={r[5]:.6g}")
        if failed:
            return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
