import numpy as np
import pytest

import declip.solver
from declip.bench import isnr, osnr, tau_for_isnr
from declip.framing import FramePlan, declip_audio, overlap_add, sine_window, split_frames
from declip.signal_model import TimeSignal, clip
from declip.solver import AdaptiveSchedule, SolverConfig


def test_sine_window_examples():
    np.testing.assert_allclose(sine_window(4), np.sin(np.pi * (np.arange(4) + 0.5) / 4), atol=1e-15)
    np.testing.assert_allclose(sine_window(2), [np.sqrt(0.5)] * 2, atol=1e-15)
    assert sine_window(1).tolist() == [1.0]
    with pytest.raises(ValueError):
        sine_window(0)


def test_sine_window_exactly_symmetric():
    for n in list(range(1, 65)) + [1000, 1023, 1024, 4096]:
        w = sine_window(n)
        assert w.size == n
        assert np.array_equal(w, w[::-1])
        assert np.all((w > 0) & (w <= 1))


def test_squared_window_shifts_sum_to_two():
    for n in (8, 64, 1024):
        w2 = sine_window(n) ** 2
        hop = n // 4
        total = sum(np.roll(w2, s * hop) for s in range(4))
        np.testing.assert_allclose(total, 2.0, atol=1e-12)


def test_frame_count_and_coverage():
    plan = FramePlan(1024)
    assert plan.hop == 256 and plan.pad == 768
    assert plan.n_frames(1024) == 7
    cover = np.zeros(1024, int)
    for off in plan.offsets(1024):
        lo, hi = max(off, 0), min(off + 1024, 1024)
        cover[lo:hi] += 1
    assert np.all(cover == 4)


def test_frame_plan_validation():
    with pytest.raises(ValueError):
        FramePlan(0)
    with pytest.raises(ValueError):
        FramePlan(16, hop=17)
    with pytest.raises(ValueError):
        FramePlan(4, window=[1.0, 1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        FramePlan(4, window=[1.0, 1.0])


@pytest.mark.parametrize("length", [1, 100, 1023, 1024, 1025, 5000])
def test_overlap_add_round_trip(length, rng):
    plan = FramePlan(1024)
    x = rng.standard_normal(length)
    frames = [plan.window * f for f in split_frames(x, plan)]
    y = overlap_add(frames, plan, length)
    assert y.n == length
    assert np.max(np.abs(y.samples - x)) < 1e-10


def test_overlap_add_random_lengths(rng):
    for _ in range(100):
        frame_len = int(rng.choice([16, 64, 256]))
        plan = FramePlan(frame_len)
        length = int(rng.integers(1, 3000))
        x = rng.standard_normal(length)
        y = overlap_add([plan.window * f for f in split_frames(x, plan)], plan, length)
        assert np.max(np.abs(y.samples - x)) < 1e-10


def test_overlap_add_frame_checks():
    plan = FramePlan(16)
    frames = split_frames(np.ones(40), plan)
    with pytest.raises(ValueError):
        overlap_add(frames[:-1], plan, 40)
    with pytest.raises(ValueError):
        overlap_add([f[:-1] for f in frames], plan, 40)


def test_unclipped_signal_passes_through(rng, monkeypatch):
    calls = []
    real = declip.solver.iht_dc_adaptive

    def counting(*a, **k):
        calls.append(1)
        return real(*a, **k)

    monkeypatch.setattr(declip.solver, "iht_dc_adaptive", counting)
    x = 0.5 * rng.standard_normal(3000)
    y, results = declip_audio(TimeSignal(x, 8000), 10.0, plan=FramePlan(256))
    assert calls == []
    assert all(r.to_dict()["stop_reason"] == "bypass" for r in results)
    assert y.n == x.size and y.sample_rate == 8000
    assert np.max(np.abs(y.samples - x)) < 1e-8


def _tone_mix(n, rate=8000):
    t = np.arange(n) / rate
    return 0.6 * np.sin(2 * np.pi * 220 * t) + 0.3 * np.sin(2 * np.pi * 550 * t + 1.0)


def test_declip_improves_snr_on_tones():
    x = _tone_mix(2048)
    tau = tau_for_isnr(x, 10.0)
    xc = clip(x, tau).samples
    cfg = SolverConfig(adaptive=AdaptiveSchedule(k_max=64))
    y, results = declip_audio(xc, tau, cfg=cfg, plan=FramePlan(256))
    assert y.n == x.size
    assert osnr(x, y) > isnr(x, xc)
    assert any(r.report is not None for r in results)


def test_worker_count_does_not_change_result():
    x = _tone_mix(1500)
    tau = tau_for_isnr(x, 10.0)
    xc = clip(x, tau).samples
    cfg = SolverConfig(adaptive=AdaptiveSchedule(k_max=32))
    y1, r1 = declip_audio(xc, tau, cfg=cfg, plan=FramePlan(128), workers=1)
    y2, r2 = declip_audio(xc, tau, cfg=cfg, plan=FramePlan(128), workers=2)
    assert np.array_equal(y1.samples, y2.samples)
    assert [r.to_dict() for r in r1] == [r.to_dict() for r in r2]


def test_replace_reliable_restores_input():
    x = _tone_mix(1200)
    tau = tau_for_isnr(x, 10.0)
    obs = clip(x, tau)
    cfg = SolverConfig(adaptive=AdaptiveSchedule(k_max=32))
    y, _ = declip_audio(obs.samples, tau, cfg=cfg, plan=FramePlan(128), replace_reliable=True)
    rel = obs.mask.is_reliable
    assert np.array_equal(y.samples[rel], obs.samples[rel])


def test_solver_failure_falls_back(monkeypatch, caplog):
    def broken(*a, **k):
        raise ValueError("boom")

    monkeypatch.setattr(declip.solver, "iht_dc_adaptive", broken)
    x = _tone_mix(600)
    xc = clip(x, 0.5).samples
    y, results = declip_audio(xc, 0.5, plan=FramePlan(64))
    assert any(r.error == "boom" for r in results)
    assert np.max(np.abs(y.samples - xc)) < 1e-10


def test_declip_audio_rejects_bad_tau():
    with pytest.raises(ValueError):
        declip_audio(np.ones(10), 0.0)
