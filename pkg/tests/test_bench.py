import math

import numpy as np
import pytest
from scipy.stats import chisquare

from declip.bench import (
    CSV_HEADER,
    BenchConfig,
    gen_sparse_signal,
    isnr,
    music_like_signal,
    osnr,
    run_phase_transition,
    snr_db,
    tau_for_isnr,
    trial_rng,
)
from declip.dictionary import build_dictionary
from declip.signal_model import clip


def test_snr_examples():
    assert isnr([1.0, 1.0], [1.0, 0.5]) == pytest.approx(10 * math.log10(8), abs=1e-12)
    assert isnr([1.0, 1.0], [1.0, 0.5]) == pytest.approx(9.0309, abs=1e-4)
    assert osnr([1.0, 0.0], [1.0 + 1e-5, 0.0]) == pytest.approx(100.0, abs=1e-9)
    assert math.isinf(osnr([1.0, 2.0], [1.0, 2.0]))
    with pytest.raises(ValueError):
        snr_db([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        snr_db([1.0, 0.0], [1.0])


def test_isnr_monotone_in_tau(rng):
    x = rng.standard_normal(500)
    taus = np.linspace(0.05, np.max(np.abs(x)) * 0.999, 60)
    vals = [isnr(x, clip(x, t).samples) for t in taus]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_tau_for_constant_signal_closed_form():
    c = 0.7
    x = np.full(100, c)
    for t in (1.0, 5.0, 10.0, 20.0, 40.0):
        tau = tau_for_isnr(x, t, tol_db=1e-6)
        assert tau == pytest.approx(c * (1 - 10 ** (-t / 20)), rel=1e-5)


def test_tau_for_isnr_hits_target(rng):
    for _ in range(20):
        x = rng.standard_normal(int(rng.integers(10, 2000)))
        t = float(rng.uniform(1, 30))
        tau = tau_for_isnr(x, t)
        assert abs(isnr(x, clip(x, tau).samples) - t) <= 0.1


@pytest.mark.parametrize("target", [0.0, -3.0, math.inf, math.nan])
def test_tau_for_isnr_rejects_bad_targets(target):
    with pytest.raises(ValueError):
        tau_for_isnr(np.ones(4), target)


def test_tau_for_isnr_rejects_zero_signal():
    with pytest.raises(ValueError):
        tau_for_isnr(np.zeros(4), 10.0)


def test_sparse_support_is_uniform():
    dic = build_dictionary("orthonormal_dct", 64)
    rng = np.random.default_rng(3)
    counts = np.zeros(64)
    for _ in range(10000):
        _, a = gen_sparse_signal(64, 4, dic, rng)
        assert a.l0 == 4
        counts[a.support] += 1
    assert chisquare(counts).pvalue > 0.01


def test_sparse_signal_edge_sparsities(rng):
    dic = build_dictionary("redundant_dct", 16)
    x, a = gen_sparse_signal(16, 0, dic, rng)
    assert a.l0 == 0 and np.all(x.samples == 0)
    x, a = gen_sparse_signal(16, 32, dic, rng)
    assert a.l0 == 32
    np.testing.assert_allclose(x.samples, dic.synthesize(a.values))
    with pytest.raises(ValueError):
        gen_sparse_signal(16, 33, dic, rng)
    with pytest.raises(ValueError):
        gen_sparse_signal(8, 1, dic, rng)


def test_trial_streams_are_distinct_and_reproducible():
    a = trial_rng(0, 64, 10.0, 3).standard_normal(4)
    assert np.array_equal(a, trial_rng(0, 64, 10.0, 3).standard_normal(4))
    for other in (trial_rng(1, 64, 10.0, 3), trial_rng(0, 65, 10.0, 3), trial_rng(0, 64, 5.0, 3), trial_rng(0, 64, 10.0, 4)):
        assert not np.array_equal(a, other.standard_normal(4))


def test_music_like_signal():
    s = music_like_signal(0.5, 8000, seed=1)
    assert s.n == 4000 and s.sample_rate == 8000
    assert np.max(np.abs(s.samples)) == pytest.approx(0.9)
    assert np.array_equal(s.samples, music_like_signal(0.5, 8000, seed=1).samples)


SMALL = BenchConfig(n=64, k_values=(1, 4, 8), target_isnr_db=(5.0, 20.0), trials=6, seed=11)


def test_phase_transition_deterministic():
    a = run_phase_transition(SMALL)
    b = run_phase_transition(SMALL)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() == run_phase_transition(SMALL, workers=2).to_csv()


def test_phase_transition_grid_and_csv():
    res = run_phase_transition(SMALL, "iht_baseline")
    assert [(r.k, r.target_isnr_db) for r in res.rows] == [(k, t) for t in (5.0, 20.0) for k in (1, 4, 8)]
    lines = res.to_csv().split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[-1] == "" and len(lines) == 2 + len(res.rows)
    assert "\r" not in res.to_csv()
    assert all(line.endswith(",nan") for line in lines[1:-1])
    for r in res.rows:
        assert abs(r.achieved_isnr_db - r.target_isnr_db) <= 0.1
        assert 0 <= r.success_prob <= 1
    assert res.to_csv(include_runtime=True) != res.to_csv()


def test_one_sparse_always_recovered_at_desk_scale():
    cfg = BenchConfig(n=256, k_values=(1,), trials=25)
    res = run_phase_transition(cfg, "iht_dc")
    assert [r.success_prob for r in res.rows] == [1.0, 1.0, 1.0]


def test_bench_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(n=16, k_values=(17,))
    with pytest.raises(ValueError):
        BenchConfig(trials=0)
    with pytest.raises(ValueError):
        BenchConfig(dict_kind="wavelet")
    with pytest.raises(ValueError):
        run_phase_transition(SMALL, "omp")
    assert BenchConfig(n=16, dict_kind="redundant_dct", k_values=(32,)).to_dict()["rng"] == "numpy.PCG64"
