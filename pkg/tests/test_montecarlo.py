import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fas_isabc.analysis import SensingParams, esr_closed_form, make_link, mean_echo_snr
from fas_isabc.channel import FasGeometry, SystemParams, correlation_matrix, marginal_cdf_geq
from fas_isabc.montecarlo import (
    BLOCK_SIZE,
    EmpiricalCdf,
    McEstimate,
    TrialConfig,
    empirical_fas_cdf,
    mc_ecr,
    mc_echo,
    mc_esr,
    mc_mean_best_gain,
    mc_outage,
    sample_equivalent_gains,
)

P = SystemParams()
S = SensingParams()
GRID = FasGeometry(2, 2, 1.0, 1.0)
TAS = FasGeometry.single_port()


def test_trial_config_validation():
    with pytest.raises(ValueError):
        TrialConfig(trials=0)
    with pytest.raises(ValueError):
        TrialConfig(shards=0)
    with pytest.raises(ValueError):
        TrialConfig(base_seed=-1)


def test_blocks_cover_all_trials():
    cfg = TrialConfig(trials=3 * BLOCK_SIZE + 5)
    blocks = cfg.blocks()
    assert sum(n for _, n in blocks) == cfg.trials
    assert [b for b, _ in blocks] == [0, 1, 2, 3]


def test_estimate_interval():
    est = McEstimate.from_sums(6.0, 14.0, 3)
    assert est.mean == 2.0
    assert est.lower < 2.0 < est.upper
    assert McEstimate.from_sums(1.0, 1.0, 1).ci_halfwidth_99 == 0.0


# --- sampling ---------------------------------------------------------------


def test_no_tag_gives_exponential_gain():
    p = dataclasses.replace(P, zeta=0.0)
    link = make_link(p, TAS, "near")
    g = sample_equivalent_gains(link, p, np.random.default_rng(1), size=10**5)[:, 0]
    mean = p.direct_mean("near")
    ks = EmpiricalCdf(g).ks_distance(lambda x: -math.expm1(-x / mean))
    assert ks <= 0.01


def test_sample_mean_matches_moments():
    link = make_link(P, GRID, "far")
    g = sample_equivalent_gains(link, P, np.random.default_rng(2), size=10**6)
    assert g.mean(axis=0) == pytest.approx(np.full(4, link.gamma_moments.mean), rel=0.01)


def test_port_correlation_tracks_jakes():
    link = make_link(P, GRID, "near")
    g = sample_equivalent_gains(link, dataclasses.replace(P, zeta=0.0), np.random.default_rng(4), size=4 * 10**5)
    emp = np.corrcoef(g, rowvar=False)
    np.testing.assert_allclose(emp, correlation_matrix(GRID), atol=0.02)


def test_single_draw_shape():
    link = make_link(P, GRID, "near")
    assert sample_equivalent_gains(link, P, np.random.default_rng(0)).shape == (4,)


def test_coherent_mode_report():
    """Coherent amplitude summation versus the gain-sum model (report only)."""
    link = make_link(P, TAS, "near")
    a = sample_equivalent_gains(link, P, np.random.default_rng(6), size=2 * 10**5)[:, 0]
    b = sample_equivalent_gains(link, P, np.random.default_rng(7), size=2 * 10**5, coherent_mode=True)[:, 0]
    ci = 2.576 * math.hypot(a.std() / math.sqrt(a.size), b.std() / math.sqrt(b.size))
    print(f"mean gain: gain-sum {a.mean():.4f}, coherent {b.mean():.4f}, 99% CI {ci:.4f}")
    assert abs(a.mean() - b.mean()) > 3 * ci


# --- estimators -------------------------------------------------------------


def test_zero_thresholds_never_outage():
    p = dataclasses.replace(P, gamma_hat_sic=0.0, gamma_hat_un=0.0, gamma_hat_uf=0.0)
    out = mc_outage(p, make_link(p, GRID, "near"), make_link(p, GRID, "far"), 10.0, TrialConfig(20000))
    assert out["near"].mean == 0.0 and out["far"].mean == 0.0


def test_infeasible_allocation_always_outage():
    p = SystemParams(p_un=0.5, p_uf=0.5)
    out = mc_outage(p, make_link(p, GRID, "near"), make_link(p, GRID, "far"), 1e4, TrialConfig(20000))
    assert out["near"].mean == 1.0 and out["far"].mean == 1.0


def test_ecr_vanishes_and_is_bounded():
    links = [make_link(P, GRID, "near"), make_link(P, GRID, "far")]
    low = mc_ecr(P, links, 1e-12, TrialConfig(20000))
    assert low["near"].mean < 1e-9 and low["far"].mean < 1e-9
    high = mc_ecr(P, {"far": links[1]}, 1e8, TrialConfig(20000))
    assert high["far"].mean <= math.log2(1 + P.p_uf / P.p_un)


def test_mean_best_gain_exceeds_single_port():
    cfg = TrialConfig(50000)
    four = mc_mean_best_gain(P, make_link(P, GRID, "near"), cfg)["near"]
    one = mc_mean_best_gain(P, make_link(P, TAS, "near"), cfg)["near"]
    assert four.lower > one.upper


def test_echo_estimators():
    cfg = TrialConfig(2 * 10**5)
    echo = mc_echo(P, S, 10.0, cfg)
    assert echo["echo"].lower <= mean_echo_snr(P, S, 10.0) <= echo["echo"].upper
    assert mc_esr(dataclasses.replace(P, zeta=0.0), S, 10.0, cfg).mean == 0.0
    # Jensen: the average rate sits below the rate at the mean echo SNR
    assert echo["esr"].upper <= esr_closed_form(P, S, 10.0)


def test_shard_invariance():
    links = [make_link(P, GRID, "near"), make_link(P, GRID, "far")]
    a = mc_outage(P, *links, 10.0, TrialConfig(3 * BLOCK_SIZE + 7, base_seed=11))
    b = mc_outage(P, *links, 10.0, TrialConfig(3 * BLOCK_SIZE + 7, base_seed=11, shards=2))
    assert a == b


def test_seed_changes_result():
    link = make_link(P, GRID, "near")
    a = mc_ecr(P, [link], 10.0, TrialConfig(5000, base_seed=1))
    b = mc_ecr(P, [link], 10.0, TrialConfig(5000, base_seed=2))
    assert a["near"].mean != b["near"].mean


def test_interval_calibration():
    truth = mean_echo_snr(P, S, 3.0)
    covered = 0
    for seed in range(100):
        est = mc_echo(P, S, 3.0, TrialConfig(4000, base_seed=seed))["echo"]
        covered += est.lower <= truth <= est.upper
    assert covered >= 95


# --- empirical CDF ----------------------------------------------------------


def test_empirical_cdf_steps():
    e = EmpiricalCdf([3.0, 1.0, 2.0])
    assert e(0.5) == 0.0 and e(1.0) == pytest.approx(1 / 3) and e(3.0) == 1.0
    assert e.left(1.0) == 0.0


def test_empirical_fas_cdf_single_port_exponential():
    p = dataclasses.replace(P, zeta=0.0)
    link = make_link(p, TAS, "far")
    ecdf = empirical_fas_cdf(link, p, 10**5, np.random.default_rng(9))
    assert ecdf.ks_distance(lambda x: marginal_cdf_geq(x, link.gamma_moments)) <= 0.01


def test_empirical_fas_cdf_comonotone_ports():
    p = dataclasses.replace(P, zeta=0.0)
    link = make_link(p, FasGeometry(3, 3, 1e-7, 1e-7), "near")
    ecdf = empirical_fas_cdf(link, p, 10**5, np.random.default_rng(10))
    assert ecdf.ks_distance(lambda x: marginal_cdf_geq(x, link.gamma_moments)) <= 0.01


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 200))
def test_grid_ks_bounds_exact(seed, grid):
    x = np.random.default_rng(seed).exponential(1.0, 500)
    e = EmpiricalCdf(x)
    cdf = lambda v: -math.expm1(-v)  # noqa: E731
    assert e.ks_distance(cdf, grid_size=grid) >= e.ks_distance(cdf) - 1e-15
