"""Frame-wise declipping with weighted overlap-add.

The signal is zero-padded by ``frame_len - hop`` on both ends and cut into
frames every ``hop`` samples, so each original sample lies in exactly
``frame_len / hop`` frames. Frames are multiplied by a sine window before
processing and again at re-synthesis; dividing by the accumulated squared
window gives perfect reconstruction.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import solver as _solver
from .dictionary import Dictionary, build_dictionary
from .signal_model import ClippedObservation, TimeSignal, detect_mask
from .solver import AdaptiveSchedule, SolverConfig

__all__ = [
    "FramePlan",
    "FrameResult",
    "sine_window",
    "split_frames",
    "overlap_add",
    "declip_audio",
]

log = logging.getLogger(__name__)


def sine_window(n: int) -> np.ndarray:
    """Symmetric sine window ``w[i] = sin(pi (i + 0.5) / n)``."""
    n = int(n)
    if n < 1:
        raise ValueError("window length must be >= 1")
    half = np.sin(np.pi * (np.arange((n + 1) // 2) + 0.5) / n)
    # mirror the first half so symmetry is exact in floating point
    return np.concatenate([half, half[: n // 2][::-1]])


@dataclass(frozen=True, eq=False)
class FramePlan:
    frame_len: int = 1024
    hop: Optional[int] = None
    window: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.frame_len < 1:
            raise ValueError("frame_len must be positive")
        hop = self.frame_len // 4 if self.hop is None else int(self.hop)
        if hop < 1 or hop > self.frame_len:
            raise ValueError("hop must lie in [1, frame_len]")
        win = sine_window(self.frame_len) if self.window is None else np.array(self.window, float)
        if win.shape != (self.frame_len,):
            raise ValueError("window length must equal frame_len")
        if np.any(win <= 0) or np.any(win > 1):
            raise ValueError("window entries must lie in (0, 1]")
        win.setflags(write=False)
        object.__setattr__(self, "hop", hop)
        object.__setattr__(self, "window", win)

    @property
    def pad(self) -> int:
        return self.frame_len - self.hop

    def n_frames(self, length: int) -> int:
        return (self.pad + length - 1) // self.hop + 1

    def offsets(self, length: int) -> np.ndarray:
        """Frame start positions relative to the first original sample."""
        return np.arange(self.n_frames(length)) * self.hop - self.pad

    def to_dict(self) -> dict:
        return {"frame_len": self.frame_len, "hop": self.hop, "window": "sine"}


def _samples(signal) -> np.ndarray:
    if isinstance(signal, TimeSignal):
        return signal.samples
    return np.asarray(signal, dtype=float)


def split_frames(signal, plan: FramePlan) -> List[np.ndarray]:
    """Cut the zero-padded signal into frames of ``plan.frame_len`` samples."""
    x = _samples(signal)
    nf = plan.n_frames(x.size)
    total = (nf - 1) * plan.hop + plan.frame_len
    padded = np.zeros(total)
    padded[plan.pad : plan.pad + x.size] = x
    return [padded[j * plan.hop : j * plan.hop + plan.frame_len].copy() for j in range(nf)]


def overlap_add(frames: Sequence[np.ndarray], plan: FramePlan, out_len: int) -> TimeSignal:
    """Window, accumulate and normalise frames produced on ``plan``'s grid.

    ``frames`` are expected to carry the analysis window already, so the
    result is ``sum(w * f) / sum(w**2)`` restricted to the original span.
    """
    nf = plan.n_frames(out_len)
    if len(frames) != nf:
        raise ValueError(f"expected {nf} frames for length {out_len}, got {len(frames)}")
    total = (nf - 1) * plan.hop + plan.frame_len
    acc = np.zeros(total)
    env = np.zeros(total)
    w = plan.window
    for j, f in enumerate(frames):
        f = np.asarray(f, dtype=float)
        if f.shape != (plan.frame_len,):
            raise ValueError(f"frame {j} has length {f.size}, expected {plan.frame_len}")
        s = j * plan.hop
        acc[s : s + plan.frame_len] += w * f
        env[s : s + plan.frame_len] += w * w
    span = slice(plan.pad, plan.pad + out_len)
    return TimeSignal(acc[span] / env[span])


@dataclass
class FrameResult:
    index: int
    offset: int
    report: Optional[_solver.SolveReport] = None
    error: Optional[str] = None
    n_clipped: int = 0

    def to_dict(self) -> dict:
        r = self.report
        return {
            "index": self.index,
            "offset": self.offset,
            "n_clipped": self.n_clipped,
            "k_used": r.k_used if r else 0,
            "iterations": r.iterations if r else 0,
            "final_cost": r.final_cost if r else 0.0,
            "stop_reason": r.stop_reason if r else ("error" if self.error else "bypass"),
            "error": self.error,
        }


def _default_audio_config(cfg: Optional[SolverConfig]) -> SolverConfig:
    cfg = cfg or SolverConfig()
    if cfg.adaptive is None:
        cfg = replace(cfg, adaptive=AdaptiveSchedule())
    return cfg


def _process_frame(task) -> Tuple[np.ndarray, FrameResult]:
    j, offset, raw, tau, eps_mask, dictionary, cfg, window = task
    windowed = window * raw
    mask = detect_mask(raw, tau, eps_mask)
    result = FrameResult(j, offset, n_clipped=mask.n_clipped)
    if mask.n_clipped == 0:
        return windowed, result
    obs = ClippedObservation(windowed, window * tau, mask)
    try:
        alpha, report = _solver.iht_dc_adaptive(obs, dictionary, cfg)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.warning("frame %d: solver failed (%s); passing the frame through", j, exc)
        result.error = str(exc)
        return windowed, result
    result.report = report
    return dictionary.synthesize(alpha), result


def declip_audio(
    signal,
    tau: float,
    dict_kind: str = "redundant_dct",
    cfg: Optional[SolverConfig] = None,
    plan: Optional[FramePlan] = None,
    *,
    eps_mask: float = 0.0,
    replace_reliable: bool = False,
    workers: int = 1,
) -> Tuple[TimeSignal, List[FrameResult]]:
    """Declip a long signal frame by frame with adaptive IHT-DC.

    Clip detection runs on each raw frame against ``tau``; the solver then
    sees the windowed frame with a per-sample clipping level ``w * tau``.
    Frames without clipped samples skip the solver. With
    ``replace_reliable=True`` the output is overwritten with the input on
    every sample detected as reliable.

    ``workers > 1`` distributes frames over a process pool; the result does
    not depend on the worker count.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    plan = plan or FramePlan()
    cfg = _default_audio_config(cfg)
    x = _samples(signal)
    rate = signal.sample_rate if isinstance(signal, TimeSignal) else None
    dictionary: Dictionary = build_dictionary(dict_kind, plan.frame_len)

    offsets = plan.offsets(x.size)
    tasks = [
        (j, int(off), raw, float(tau), float(eps_mask), dictionary, cfg, plan.window)
        for j, (off, raw) in enumerate(zip(offsets, split_frames(x, plan)))
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_process_frame, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        done = [_process_frame(t) for t in tasks]

    out = overlap_add([f for f, _ in done], plan, x.size).samples.copy()
    if replace_reliable:
        reliable = detect_mask(x, tau, eps_mask).is_reliable
        out[reliable] = x[reliable]
    return TimeSignal(out, rate), [r for _, r in done]
