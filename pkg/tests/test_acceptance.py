"""Exit criteria. Each test prints one PASS/FAIL line in the terminal summary."""

import math
import time

import numpy as np
import pytest

from qpasim.cli import main
from qpasim.core import PHI_PLUS, bell_dm, bell_weights_of
from qpasim.metrics import QberPair, evaluate_point, key_rate_qpa, qber, threshold_et, threshold_pol
from qpasim.montecarlo import McConfig, simulate_experiment, stream, wilson_interval
from qpasim.qpa import qpa_bell_algebra, run_matrix_pipeline
from qpasim.states import NoiseParams, assemble_noisy_hyper, pol_mixture, waveplate_noise_channel
from qpasim.sweep import SweepConfig, emit_csv, positive_gain_components, region_summary, run_sweep

pytestmark = pytest.mark.acceptance

GRID21 = np.round(np.linspace(0.0, 1.0, 21), 12)
POL_THRESHOLD_ORACLE = 0.11003  # root of 1 - 2 h2(e), mpmath bisection: 0.1100278644


@pytest.fixture(scope="module")
def default_sweep():
    return run_sweep(SweepConfig())


def test_criterion_1_thresholds(capsys):
    threshold_pol.cache_clear()
    threshold_et.cache_clear()
    t0 = time.perf_counter()
    code = main(["thresholds"])
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    kv = dict(line.split(" = ") for line in out.strip().splitlines())
    pol, et = float(kv["pol_threshold"]), float(kv["et_threshold"])
    assert code == 0
    assert abs(pol - POL_THRESHOLD_ORACLE) <= 0.0005
    assert et > pol
    assert elapsed < 1.0


def test_criterion_2_oracle_equivalence():
    t0 = time.perf_counter()
    for p in GRID21:
        for q in GRID21:
            state = assemble_noisy_hyper(NoiseParams(p, q))
            fast = qpa_bell_algebra(bell_weights_of(state.pol), bell_weights_of(state.et))
            slow = run_matrix_pipeline(state)
            assert abs(fast.yield_ - slow.yield_) <= 1e-12
            assert fast.defined == slow.defined
            if slow.defined:
                assert np.max(np.abs(fast.output_pol - slow.output_pol)) <= 1e-12
    assert time.perf_counter() - t0 < 10.0


def test_criterion_3_closed_forms():
    for p in GRID21:
        for q in GRID21:
            y = (1 - p) * (1 - q) + p * q
            res = run_matrix_pipeline(assemble_noisy_hyper(NoiseParams(p, q)))
            assert abs(res.yield_ - y) <= 1e-12
            if y < 1e-12:
                assert not res.defined
                continue
            assert abs(qber(res.output_pol, "Z") - p * q / y) <= 1e-12
            assert abs(qber(res.output_pol, "X") - p * q / 2 / y) <= 1e-12


def test_criterion_4_fig3_structure(default_sweep):
    labels = default_sweep.field("region")
    gain = default_sweep.field("gain")
    k_pol = default_sweep.field("k_pol")
    k_et = default_sweep.field("k_et")
    assert positive_gain_components(default_sweep) == 1
    assert {"I", "II", "III", "IV"} <= set(labels.ravel())
    areas = region_summary(default_sweep)
    assert areas["III"]["area"] > areas["II"]["area"]
    assert areas["III"]["points"] > areas["II"]["points"]
    region_one = (k_pol == 0) & (k_et == 0) & (gain > 0)
    assert region_one.any()
    assert gain.max() > 0


def test_criterion_5_trivial_anchors():
    r = evaluate_point(NoiseParams(0, 0))
    assert abs(r.k_noisy - 1.5) <= 1e-12
    assert abs(r.k_qpa - 0.5) <= 1e-12
    assert abs(r.gain + 1.0) <= 1e-12
    zero_yield = 0
    for p in GRID21:
        for q in GRID21:
            r = evaluate_point(NoiseParams(p, q))
            if r.yield_ == 0:
                zero_yield += 1
                assert r.k_qpa == 0
    assert zero_yield == 2  # (1, 0) and (0, 1)
    assert key_rate_qpa(0.0, QberPair(0.0, 0.0)) == 0.0


def test_criterion_6_monte_carlo():
    t0 = time.perf_counter()
    values = (0.0, 0.1, 0.2, 0.3, 0.4)
    n = 10**5
    for i, p in enumerate(values):
        for j, q in enumerate(values):
            params = NoiseParams(p, q)
            exact = evaluate_point(params)
            res = simulate_experiment(params, McConfig(n_pairs=n, seed=20260101), point_key=(i, j))
            truth = {
                "e_z_pol": exact.pol.e_z, "e_x_pol": exact.pol.e_x,
                "e_z_et": exact.et.e_z, "e_x_et": exact.et.e_x,
                "e_z_post": exact.post_pol.e_z, "e_x_post": exact.post_pol.e_x,
                "yield": exact.yield_,
            }
            for key, e in truth.items():
                est = res.intervals[key]
                sigma = math.sqrt(max(e * (1 - e), 0.0) / est.n)
                assert abs(est.value - e) <= 4 * sigma + 1e-15, (p, q, key)
    rng = stream(20260101, 777)
    true_e = 0.1
    hits = 0
    for _ in range(1000):
        x = int(rng.binomial(10**4, true_e))
        lo, hi = wilson_interval(x, 10**4)
        hits += lo <= true_e <= hi
    assert hits >= 930
    assert time.perf_counter() - t0 < 60.0


def test_criterion_7_determinism(tmp_path, default_sweep):
    cfg = SweepConfig()
    a = emit_csv(default_sweep, tmp_path / "a.csv").read_bytes()
    b = emit_csv(run_sweep(cfg, threads=1), tmp_path / "b.csv").read_bytes()
    c = emit_csv(run_sweep(cfg, threads=4), tmp_path / "c.csv").read_bytes()
    assert a == b == c


def test_criterion_8_channel_equivalence():
    for p in np.linspace(0.0, 1.0, 101):
        theta = 2 * np.arcsin(np.sqrt(p))
        direct = (1 - p) * bell_dm(PHI_PLUS) + p * bell_dm((1, 1))
        plates = waveplate_noise_channel(bell_dm(PHI_PLUS), theta)
        assert np.max(np.abs(plates - direct)) <= 1e-12
        assert np.max(np.abs(plates - pol_mixture(p))) <= 1e-12
