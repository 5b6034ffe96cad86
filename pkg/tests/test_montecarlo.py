import math

import numpy as np
import pytest

from qpasim.core import PHI_PLUS, bell_dm
from qpasim.metrics import Basis, evaluate_point
from qpasim.montecarlo import (
    CountRecord,
    McConfig,
    estimate_qber,
    sample_counts,
    simulate_experiment,
    stream,
    wilson_interval,
)
from qpasim.states import NoiseParams


def test_sample_counts_zero_probability_outcomes():
    rec = sample_counts(bell_dm(PHI_PLUS), Basis.Z, 10_000, stream(1, 0))
    assert rec.counts[1] == 0 and rec.counts[2] == 0
    assert rec.n_total == 10_000
    rec = sample_counts(bell_dm(PHI_PLUS), Basis.X, 10_000, stream(1, 1))
    assert rec.n_err == 0


def test_sample_counts_maximally_mixed_moments():
    n = 10**6
    rec = sample_counts(np.eye(4) / 4, Basis.Z, n, stream(7, 0))
    sigma = math.sqrt(n * 3 / 16)
    for c in rec.counts:
        assert abs(c - n / 4) <= 5 * sigma


def test_sample_counts_deterministic():
    a = sample_counts(np.eye(4) / 4, "X", 1000, stream(42, 3, 1))
    b = sample_counts(np.eye(4) / 4, "X", 1000, stream(42, 3, 1))
    c = sample_counts(np.eye(4) / 4, "X", 1000, stream(42, 3, 2))
    assert a == b
    assert a != c


def test_estimate_qber_examples():
    assert estimate_qber(CountRecord(Basis.Z, (50, 0, 0, 50))).value == 0.0
    est = estimate_qber(CountRecord(Basis.Z, (45, 5, 5, 45)))
    assert est.value == pytest.approx(0.10)
    assert est.lower < 0.10 < est.upper
    with pytest.raises(ValueError):
        estimate_qber(CountRecord(Basis.Z, (0, 0, 0, 0)))


def test_wilson_interval_reference_values():
    # Wilson closed form with z = 1.959964 for X=10, n=100
    lo, hi = wilson_interval(10, 100)
    assert lo == pytest.approx(0.0552291, abs=1e-6)
    assert hi == pytest.approx(0.1743657, abs=1e-6)
    lo, hi = wilson_interval(0, 351)
    assert lo == 0.0
    assert hi == pytest.approx(0.0108, abs=1e-4)


def test_wilson_against_statsmodels_formula():
    from statsmodels.stats.proportion import proportion_confint

    for x, n in [(0, 50), (3, 1000), (500, 1000), (999, 1000)]:
        lo, hi = wilson_interval(x, n)
        ref = proportion_confint(x, n, alpha=0.05, method="wilson")
        assert lo == pytest.approx(ref[0], abs=1e-12)
        assert hi == pytest.approx(ref[1], abs=1e-12)


@pytest.mark.parametrize("true_e", [0.1, 0.012])
def test_wilson_coverage(true_e):
    rng = stream(2024, 99)
    n = 10_000
    hits = 0
    for _ in range(1000):
        x = int(rng.binomial(n, true_e))
        lo, hi = wilson_interval(x, n)
        hits += lo <= true_e <= hi
    assert hits / 1000 >= 0.93


def test_simulate_noiseless():
    res = simulate_experiment(NoiseParams(), McConfig(n_pairs=10_000, seed=5))
    assert res.report.k_noisy == 1.5
    assert res.report.yield_ == 1.0
    assert res.report.gain == -1.0


def test_simulate_yield_binomial():
    n = 10**6
    res = simulate_experiment(NoiseParams(0.1, 0.1), McConfig(n_pairs=n, seed=17))
    # pooled over the Z and X post-QPA runs
    sigma = math.sqrt(0.82 * 0.18 / res.c_tot)
    assert res.c_tot == 2 * n
    assert abs(res.report.yield_ - 0.82) <= 3 * sigma
    assert res.intervals["yield"].contains(0.82)


def test_simulate_deterministic_and_key_sensitive():
    cfg = McConfig(n_pairs=5000, seed=3)
    a = simulate_experiment(NoiseParams(0.2, 0.1), cfg, point_key=(1, 2))
    b = simulate_experiment(NoiseParams(0.2, 0.1), cfg, point_key=(1, 2))
    c = simulate_experiment(NoiseParams(0.2, 0.1), cfg, point_key=(2, 1))
    assert a == b
    assert a.counts != c.counts


def _deviations(params, cfg):
    res = simulate_experiment(params, cfg)
    exact = evaluate_point(params)
    truth = {
        "e_z_pol": exact.pol.e_z, "e_x_pol": exact.pol.e_x,
        "e_z_et": exact.et.e_z, "e_x_et": exact.et.e_x,
        "e_z_post": exact.post_pol.e_z, "e_x_post": exact.post_pol.e_x,
        "yield": exact.yield_,
    }
    return res, {k: abs(res.intervals[k].value - v) for k, v in truth.items()}, truth


def test_consistency_with_growing_n():
    params = NoiseParams(0.2, 0.3)
    worst = []
    for n in (10**2, 10**3, 10**4, 10**5, 10**6):
        _, dev, _ = _deviations(params, McConfig(n_pairs=n, seed=12345))
        worst.append(max(dev.values()))
    steps = sum(b <= a for a, b in zip(worst, worst[1:]))
    assert steps >= 3, worst


def test_franson_loss_halves_counts_without_bias():
    params = NoiseParams(0.15, 0.25)
    n = 200_000
    plain = simulate_experiment(params, McConfig(n_pairs=n, seed=8))
    lossy = simulate_experiment(params, McConfig(n_pairs=n, seed=8, apply_franson_loss=True))
    for key in ("e_z_et", "e_x_et"):
        m = lossy.counts[key].n_total
        assert abs(m - n / 2) <= 4 * math.sqrt(n / 4)
        assert plain.counts[key].n_total == n
    assert lossy.counts["e_z_pol"].n_total == n
    assert abs(lossy.c_tot - n) <= 4 * math.sqrt(2 * n / 4)
    exact = evaluate_point(params)
    truth = {"e_z_et": exact.et.e_z, "e_x_et": exact.et.e_x, "e_z_post": exact.post_pol.e_z,
             "e_x_post": exact.post_pol.e_x, "yield": exact.yield_}
    for key, e in truth.items():
        for res in (plain, lossy):
            est = res.intervals[key]
            assert abs(est.value - e) <= 3 * math.sqrt(e * (1 - e) / est.n)


def test_mc_config_validation():
    with pytest.raises(ValueError):
        McConfig(n_pairs=0)
    with pytest.raises(ValueError):
        McConfig(seed=-1)
