"""SNR metrics, synthetic sparse instances and the phase-transition benchmark."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import List, Tuple

import numpy as np

from .dictionary import KINDS, Dictionary, SparseCoeffs, build_dictionary
from .signal_model import TimeSignal, clip
from .solver import AdaptiveSchedule, SolverConfig, iht_baseline, iht_dc, iht_dc_adaptive

__all__ = [
    "snr_db",
    "isnr",
    "osnr",
    "gen_sparse_signal",
    "tau_for_isnr",
    "BenchConfig",
    "BenchRow",
    "BenchResult",
    "SOLVERS",
    "DEFAULT_K_VALUES",
    "run_phase_transition",
    "CSV_HEADER",
    "music_like_signal",
]

SOLVERS = ("iht_dc", "iht_baseline", "iht_dc_adaptive")
DEFAULT_K_VALUES = (32, 64, 128, 256, 384, 512, 576, 640, 704, 768, 896, 1024)
CSV_HEADER = ("k", "target_isnr_db", "achieved_isnr_db", "success_prob", "mean_iters", "mean_runtime_s")
RNG_NAME = "numpy.PCG64"


def _vec(x) -> np.ndarray:
    if isinstance(x, TimeSignal):
        return x.samples
    if hasattr(x, "samples"):
        return np.asarray(x.samples, dtype=float)
    return np.asarray(x, dtype=float)


def snr_db(x, y) -> float:
    """``10 log10(||x||^2 / ||x - y||^2)``; ``inf`` when ``y == x``."""
    x, y = _vec(x), _vec(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    sig = float(x @ x)
    if sig == 0.0:
        raise ValueError("SNR is undefined for an all-zero reference signal")
    err = float((x - y) @ (x - y))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(sig / err)


def isnr(x, x_c) -> float:
    return snr_db(x, x_c)


def osnr(x, x_hat) -> float:
    return snr_db(x, x_hat)


def gen_sparse_signal(
    n: int, k: int, dictionary: Dictionary, rng: np.random.Generator
) -> Tuple[TimeSignal, SparseCoeffs]:
    """Draw a ``k``-sparse coefficient vector and synthesise ``Psi alpha``.

    The support is uniform without replacement over the ``D`` atoms; values on
    it are i.i.d. standard normal.
    """
    if n != dictionary.n:
        raise ValueError("n does not match the dictionary length")
    if k < 0 or k > dictionary.d:
        raise ValueError(f"k={k} outside [0, {dictionary.d}]")
    alpha = np.zeros(dictionary.d)
    support = rng.choice(dictionary.d, size=k, replace=False)
    alpha[support] = rng.standard_normal(k)
    coeffs = SparseCoeffs(alpha)
    return TimeSignal(dictionary.synthesize(alpha)), coeffs


def music_like_signal(
    duration_s: float = 2.0, sample_rate: int = 16000, seed: int = 0, peak: float = 0.9
) -> TimeSignal:
    """Sequence of decaying harmonic notes, normalised to ``peak``.

    Notes start every 1/8, 1/4 or 3/8 s, take pitches on a two-octave
    chromatic scale above 110 Hz and carry four harmonics whose decay grows
    with the harmonic number.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    x = np.zeros(n)
    onset = 0.0
    while onset < duration_s:
        f0 = 110.0 * 2.0 ** (rng.integers(0, 24) / 12.0)
        amp = rng.uniform(0.4, 1.0)
        decay = rng.uniform(2.0, 6.0)
        on = t >= onset
        tt = t[on] - onset
        for h in range(1, 5):
            if f0 * h < sample_rate / 2:
                phase = rng.uniform(0.0, 2.0 * np.pi)
                x[on] += amp / h * np.exp(-decay * np.sqrt(h) * tt) * np.sin(2 * np.pi * f0 * h * tt + phase)
        onset += rng.choice([0.125, 0.25, 0.375])
    return TimeSignal(peak * x / np.max(np.abs(x)), sample_rate)


def _clip_error(x: np.ndarray, tau: float) -> float:
    e = np.maximum(np.abs(x) - tau, 0.0)
    return float(e @ e)


def tau_for_isnr(x, target_db: float, tol_db: float = 0.1, max_iter: int = 200) -> float:
    """Bisect the clipping level so that clipping ``x`` gives ``target_db`` iSNR.

    iSNR grows monotonically with the level, from 0 dB at ``tau -> 0`` to
    ``inf`` at ``tau = max|x|``, so any positive finite target is reachable.
    """
    x = _vec(x)
    sig = float(x @ x)
    if sig == 0.0:
        raise ValueError("cannot target an iSNR on an all-zero signal")
    if not (target_db > 0 and math.isfinite(target_db)):
        raise ValueError(f"unachievable iSNR target {target_db} dB; must be positive and finite")
    if tol_db <= 0:
        raise ValueError("tol_db must be positive")

    def level(tau):
        err = _clip_error(x, tau)
        return math.inf if err == 0 else 10.0 * math.log10(sig / err)

    lo, hi = 0.0, float(np.max(np.abs(x)))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        got = level(mid)
        if abs(got - target_db) <= tol_db:
            return mid
        if got < target_db:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    raise ValueError(f"bisection could not reach {target_db} dB within {tol_db} dB")


@dataclass(frozen=True)
class BenchConfig:
    """Grid and trial settings for :func:`run_phase_transition`."""

    n: int = 1024
    dict_kind: str = "orthonormal_dct"
    k_values: Tuple[int, ...] = DEFAULT_K_VALUES
    target_isnr_db: Tuple[float, ...] = (5.0, 10.0, 20.0)
    trials: int = 100
    success_osnr_db: float = 80.0
    seed: int = 0
    isnr_tol_db: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "target_isnr_db", tuple(float(t) for t in self.target_isnr_db))
        if self.dict_kind not in KINDS:
            raise ValueError(f"unsupported dictionary kind {self.dict_kind!r}")
        d = self.n if self.dict_kind == "orthonormal_dct" else 2 * self.n
        bad = [k for k in self.k_values if not 1 <= k <= d]
        if bad:
            raise ValueError(f"k values {bad} outside [1, {d}]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["solver"] = self.solver.to_dict()
        d["k_values"] = list(self.k_values)
        d["target_isnr_db"] = list(self.target_isnr_db)
        d["rng"] = RNG_NAME
        return d


@dataclass(frozen=True)
class BenchRow:
    k: int
    target_isnr_db: float
    achieved_isnr_db: float
    success_prob: float
    mean_iters: float
    mean_runtime_s: float
    failures: int = 0


@dataclass
class BenchResult:
    solver: str
    rows: List[BenchRow]

    def row(self, k: int, target_isnr_db: float) -> BenchRow:
        for r in self.rows:
            if r.k == k and r.target_isnr_db == target_isnr_db:
                return r
        raise KeyError((k, target_isnr_db))

    def to_csv(self, include_runtime: bool = False) -> str:
        """CSV text with LF line endings and 6 significant digits.

        Runtimes vary between runs, so they are written as ``nan`` unless
        ``include_runtime`` is set; everything else is reproducible.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            rt = f"{r.mean_runtime_s:.6g}" if include_runtime else "nan"
            w.writerow(
                [
                    r.k,
                    f"{r.target_isnr_db:.6g}",
                    f"{r.achieved_isnr_db:.6g}",
                    f"{r.success_prob:.6g}",
                    f"{r.mean_iters:.6g}",
                    rt,
                ]
            )
        return buf.getvalue()


def trial_rng(seed: int, k: int, target_db: float, trial: int) -> np.random.Generator:
    """Independent stream per (k, severity, trial); identical for every solver."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(k), int(round(target_db * 1000)), int(trial)))
    return np.random.Generator(np.random.PCG64(ss))


def _run_trial(args) -> Tuple[float, bool, int, float, bool]:
    cfg, solver_name, k, target, trial = args
    dictionary = build_dictionary(cfg.dict_kind, cfg.n)
    rng = trial_rng(cfg.seed, k, target, trial)
    x, _ = gen_sparse_signal(cfg.n, k, dictionary, rng)
    try:
        tau = tau_for_isnr(x, target, cfg.isnr_tol_db)
        obs = clip(x, tau)
        achieved = isnr(x, obs.samples)
        t0 = time.perf_counter()
        if solver_name == "iht_dc":
            alpha, rep = iht_dc(obs, dictionary, k, cfg.solver)
        elif solver_name == "iht_baseline":
            alpha, rep = iht_baseline(obs, dictionary, k, cfg.solver)
        else:
            sc = cfg.solver
            if sc.adaptive is None:
                sc = replace(sc, adaptive=AdaptiveSchedule())
            alpha, rep = iht_dc_adaptive(obs, dictionary, sc)
        runtime = time.perf_counter() - t0
        ok = osnr(x, dictionary.synthesize(alpha)) > cfg.success_osnr_db
        return achieved, ok, rep.iterations, runtime, False
    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
        return math.nan, False, 0, 0.0, True


def run_phase_transition(
    cfg: BenchConfig, solver: str = "iht_dc", workers: int = 1, progress=None
) -> BenchResult:
    """Monte-Carlo success probability over the (k, iSNR) grid.

    Each trial draws a fresh instance from its own seeded stream, clips it at
    the level hitting the target iSNR and solves with ``K`` equal to the true
    sparsity. Failed trials count as unsuccessful. Results do not depend on
    ``workers``.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    grid = [(k, t) for t in cfg.target_isnr_db for k in cfg.k_values]
    tasks = [(cfg, solver, k, t, i) for k, t in grid for i in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_trial, tasks, chunksize=max(1, cfg.trials // 4)))
    else:
        outs = []
        for task in tasks:
            outs.append(_run_trial(task))
            if progress is not None:
                progress(task, outs[-1])

    rows = []
    for g, (k, t) in enumerate(grid):
        chunk = outs[g * cfg.trials : (g + 1) * cfg.trials]
        good = [c for c in chunk if not c[4]]
        ach = math.fsum(c[0] for c in good) / len(good) if good else math.nan
        rows.append(
            BenchRow(
                k=k,
                target_isnr_db=t,
                achieved_isnr_db=ach,
                success_prob=sum(c[1] for c in chunk) / cfg.trials,
                mean_iters=math.fsum(c[2] for c in chunk) / cfg.trials,
                mean_runtime_s=math.fsum(c[3] for c in chunk) / cfg.trials,
                failures=sum(c[4] for c in chunk),
            )
        )
    return BenchResult(solver, rows)
