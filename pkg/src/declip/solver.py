"""Iterative hard thresholding for declipping.

Three solvers share one iteration skeleton::

    alpha <- H_K(alpha + mu * Psi^T r(x_c - Psi alpha))

``iht_dc``
    ``r`` is the consistency map, so clipped samples pull the estimate past
    the clipping level instead of toward it.
``iht_baseline``
    ``r`` keeps reliable samples and drops clipped ones (plain IHT on the
    reliable rows of ``Psi``).
``iht_dc_adaptive``
    ``iht_dc`` with ``K`` grown by a fixed step at every iteration until the
    consistency residual is small.

The step ``mu`` comes from a golden-section search of the pre-threshold cost
along the descent direction, or is held fixed.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .dictionary import Dictionary, SparseCoeffs, _top_k
from .signal_model import ClippedObservation, consistency_map

__all__ = [
    "GoldenSection",
    "FixedStep",
    "AdaptiveSchedule",
    "SolverConfig",
    "SolveReport",
    "STOP_REASONS",
    "gradient",
    "golden_section_step",
    "iht_baseline",
    "iht_dc",
    "iht_dc_adaptive",
]

STOP_REASONS = ("cost_tol", "coeff_tol", "max_iters", "consistent", "k_max")

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GoldenSection:
    """Golden-section step search on ``[0, mu_max]``.

    ``mu_max=None`` resolves to ``2 / ||Psi Psi^T||`` for the dictionary in use.
    """

    mu_max: Optional[float] = None
    tol: float = 1e-4
    max_evals: int = 40

    def __post_init__(self):
        if self.mu_max is not None and not self.mu_max > 0:
            raise ValueError("mu_max must be positive")
        if not self.tol > 0:
            raise ValueError("line-search tol must be positive")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")

    def resolve_mu_max(self, dictionary: Dictionary) -> float:
        if self.mu_max is not None:
            return float(self.mu_max)
        return 2.0 / dictionary.frame_bound


@dataclass(frozen=True)
class FixedStep:
    mu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("fixed step mu must be positive")


@dataclass(frozen=True)
class AdaptiveSchedule:
    """Sparsity growth for :func:`iht_dc_adaptive`.

    ``k_max=None`` resolves to a quarter of the dictionary size.
    """

    k_start: int = 1
    k_step: int = 1
    residual_energy_frac: float = 1e-4
    k_max: Optional[int] = None

    def __post_init__(self):
        if self.k_start < 1 or self.k_step < 1:
            raise ValueError("k_start and k_step must be positive")
        if not self.residual_energy_frac > 0:
            raise ValueError("residual_energy_frac must be positive")
        if self.k_max is not None and self.k_max < self.k_start:
            raise ValueError("k_max must be >= k_start")

    def resolve_k_max(self, dictionary: Dictionary) -> int:
        k_max = self.k_max if self.k_max is not None else max(self.k_start, dictionary.d // 4)
        if k_max > dictionary.d:
            raise ValueError(f"k_max={k_max} exceeds dictionary size {dictionary.d}")
        return int(k_max)


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and step selection.

    ``cost_tol`` is relative: a fixed-K solve stops once the cost drops to
    ``cost_tol * ||x_c||^2``. ``coeff_tol`` bounds the relative l2 change of
    the coefficients between iterations.
    """

    max_iters: int = 500
    coeff_tol: float = 1e-7
    cost_tol: float = 1e-12
    line_search: Union[GoldenSection, FixedStep] = field(default_factory=GoldenSection)
    adaptive: Optional[AdaptiveSchedule] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.coeff_tol < 0 or self.cost_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if not isinstance(self.line_search, (GoldenSection, FixedStep)):
            raise TypeError("line_search must be GoldenSection or FixedStep")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["line_search"]["rule"] = (
            "golden_section" if isinstance(self.line_search, GoldenSection) else "fixed"
        )
        return d


@dataclass
class SolveReport:
    iterations: int
    cost_trace: np.ndarray
    final_cost: float
    converged: bool
    k_used: int
    stop_reason: str

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "cost_trace": [float(c) for c in self.cost_trace],
            "final_cost": self.final_cost,
            "converged": self.converged,
            "k_used": self.k_used,
            "stop_reason": self.stop_reason,
        }


ResidualMap = Callable[[np.ndarray], np.ndarray]


def _consistency_residual(obs: ClippedObservation) -> ResidualMap:
    pos, neg = obs.mask.clipped_pos, obs.mask.clipped_neg

    def fn(u):
        v = u.copy()
        v[pos] = np.maximum(u[pos], 0.0)
        v[neg] = np.minimum(u[neg], 0.0)
        return v

    return fn


def _reliable_residual(obs: ClippedObservation) -> ResidualMap:
    rel = obs.mask.is_reliable
    return lambda u: np.where(rel, u, 0.0)


def _cost_of(resmap: ResidualMap, x_c: np.ndarray) -> Callable[[np.ndarray], float]:
    def cost(z):
        r = resmap(x_c - z)
        return 0.5 * float(r @ r)

    return cost


def _golden(g: Callable[[float], float], mu_max: float, tol: float, max_evals: int) -> float:
    """Minimise ``g`` on ``[0, mu_max]``; return the best probed point."""
    probes = {0.0: g(0.0), mu_max: g(mu_max)}
    evals = 2
    a, b = 0.0, mu_max
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = g(c), g(d)
    probes[c], probes[d] = fc, fd
    evals += 2
    while b - a > tol * mu_max and evals < max_evals:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = g(c)
            probes[c] = fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = g(d)
            probes[d] = fd
        evals += 1
    # ties resolve to the smallest step
    return min(probes, key=lambda m: (probes[m], m))


def _check_obs(obs: ClippedObservation, dictionary: Dictionary):
    if obs.n != dictionary.n:
        raise ValueError(
            f"observation length {obs.n} does not match dictionary length {dictionary.n}"
        )


def gradient(alpha, obs: ClippedObservation, dictionary: Dictionary) -> np.ndarray:
    """Gradient of ``beta -> E(Psi beta)`` at ``alpha``: ``-Psi^T B(x_c - Psi alpha)``."""
    _check_obs(obs, dictionary)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (dictionary.d,):
        raise ValueError(f"expected {dictionary.d} coefficients, got shape {alpha.shape}")
    r = consistency_map(obs.samples - dictionary.synthesize(alpha), obs.mask)
    return -dictionary.analyze(r)


def golden_section_step(
    alpha,
    descent_dir,
    obs: ClippedObservation,
    dictionary: Dictionary,
    mu_max: float,
    tol: float = 1e-4,
    max_evals: int = 40,
) -> float:
    """Step size minimising ``g(mu) = E(Psi (alpha + mu * descent_dir))``.

    Returns 0 when the direction is zero or lies in the null space of ``Psi``.
    """
    _check_obs(obs, dictionary)
    if not mu_max > 0:
        raise ValueError("mu_max must be positive")
    u = dictionary.synthesize(np.asarray(alpha, dtype=float))
    v = dictionary.synthesize(np.asarray(descent_dir, dtype=float))
    cost = _cost_of(_consistency_residual(obs), obs.samples)
    return _step_along(cost, u, v, mu_max, tol, max_evals)


def _step_along(cost, u, v, mu_max, tol, max_evals) -> float:
    if not np.any(v):
        return 0.0
    return _golden(lambda m: cost(u + m * v), mu_max, tol, max_evals)


def _top_k_into(a: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(a)
    keep = _top_k(np.abs(a), k)
    out[keep] = a[keep]
    return out


def _iterate(
    obs: ClippedObservation,
    dictionary: Dictionary,
    cfg: SolverConfig,
    resmap: ResidualMap,
    k_of: Callable[[int], int],
    stop_check: Callable[[int, float, float, int], Optional[str]],
) -> Tuple[SparseCoeffs, SolveReport]:
    x_c = obs.samples
    cost = _cost_of(resmap, x_c)
    ls = cfg.line_search
    mu_max = ls.resolve_mu_max(dictionary) if isinstance(ls, GoldenSection) else None

    alpha = np.zeros(dictionary.d)
    x_hat = np.zeros(dictionary.n)
    trace: List[float] = []
    reason = "max_iters"
    k = k_of(0)
    for it in range(cfg.max_iters):
        k = k_of(it)
        d = dictionary.analyze(resmap(x_c - x_hat))
        if mu_max is None:
            mu = ls.mu
        else:
            mu = _step_along(cost, x_hat, dictionary.synthesize(d), mu_max, ls.tol, ls.max_evals)
        new = _top_k_into(alpha + mu * d, k)
        x_hat = dictionary.synthesize(new)
        e = cost(x_hat)
        trace.append(e)
        nn = float(np.linalg.norm(new))
        diff = float(np.linalg.norm(new - alpha))
        change = diff / nn if nn > 0 else (0.0 if diff == 0 else math.inf)
        alpha = new
        r = stop_check(it, e, change, k)
        if r is not None:
            reason = r
            break
    report = SolveReport(
        iterations=len(trace),
        cost_trace=np.asarray(trace),
        final_cost=trace[-1],
        converged=reason in ("cost_tol", "coeff_tol", "consistent"),
        k_used=k,
        stop_reason=reason,
    )
    return SparseCoeffs(alpha), report


def _fixed_k_stop(cfg: SolverConfig, x_c: np.ndarray):
    cost_floor = cfg.cost_tol * float(x_c @ x_c)

    def check(it, e, change, k):
        if e == 0.0:
            return "consistent"
        if e <= cost_floor:
            return "cost_tol"
        if change <= cfg.coeff_tol:
            return "coeff_tol"
        return None

    return check


def _check_k(k: int, dictionary: Dictionary, low: int) -> int:
    k = int(k)
    if k < low or k > dictionary.d:
        raise ValueError(f"sparsity k={k} outside [{low}, {dictionary.d}]")
    return k


def iht_baseline(
    obs: ClippedObservation, dictionary: Dictionary, k: int, cfg: Optional[SolverConfig] = None
) -> Tuple[SparseCoeffs, SolveReport]:
    """IHT fitted to the reliable samples only; clipped samples are ignored."""
    cfg = cfg or SolverConfig()
    _check_obs(obs, dictionary)
    k = _check_k(k, dictionary, 0)
    if obs.mask.reliable.size == 0:
        raise ValueError("baseline IHT needs at least one reliable sample")
    return _iterate(
        obs, dictionary, cfg, _reliable_residual(obs), lambda it: k, _fixed_k_stop(cfg, obs.samples)
    )


def iht_dc(
    obs: ClippedObservation, dictionary: Dictionary, k: int, cfg: Optional[SolverConfig] = None
) -> Tuple[SparseCoeffs, SolveReport]:
    """Consistent IHT at fixed sparsity ``k``, started from zero coefficients."""
    cfg = cfg or SolverConfig()
    _check_obs(obs, dictionary)
    k = _check_k(k, dictionary, 1)
    return _iterate(
        obs,
        dictionary,
        cfg,
        _consistency_residual(obs),
        lambda it: k,
        _fixed_k_stop(cfg, obs.samples),
    )


def iht_dc_adaptive(
    obs: ClippedObservation, dictionary: Dictionary, cfg: SolverConfig
) -> Tuple[SparseCoeffs, SolveReport]:
    """Consistent IHT with one update per sparsity level.

    ``K`` starts at ``k_start`` and grows by ``k_step`` after every update,
    keeping the current coefficients. The loop ends once
    ``||B(x_c - Psi alpha)||^2 <= residual_energy_frac * ||x_c||^2``
    (``stop_reason="consistent"``), after the update at ``k_max``, or at
    ``max_iters``.
    """
    if cfg.adaptive is None:
        raise ValueError("iht_dc_adaptive needs cfg.adaptive")
    _check_obs(obs, dictionary)
    sched = cfg.adaptive
    k_max = sched.resolve_k_max(dictionary)
    x_c = obs.samples
    floor = sched.residual_energy_frac * float(x_c @ x_c)

    def k_of(it):
        return min(sched.k_start + it * sched.k_step, k_max)

    def check(it, e, change, k):
        if 2.0 * e <= floor:
            return "consistent"
        if k >= k_max:
            return "k_max"
        return None

    return _iterate(obs, dictionary, cfg, _consistency_residual(obs), k_of, check)
