"""Hard-clipping forward model and the clipping-consistency cost.

A clipped observation splits the sample indices into a reliable set, observed
exactly, and two clipped sets where only the sign and the bound are known.
The consistency map keeps the residual on reliable samples and only the part
of it that violates the bound on clipped samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

__all__ = [
    "TimeSignal",
    "ClipMask",
    "ClippedObservation",
    "clip",
    "detect_mask",
    "consistency_map",
    "consistency_cost",
    "is_consistent",
]


def _as_vector(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


def _as_index_set(idx) -> np.ndarray:
    arr = np.unique(np.asarray(idx, dtype=np.intp).ravel())
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSignal:
    """Finite real samples with an optional sample rate."""

    samples: np.ndarray
    sample_rate: Optional[int] = None

    def __post_init__(self):
        s = _as_vector(self.samples, "samples").copy()
        if s.size < 1:
            raise ValueError("a signal needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("signal samples must be finite")
        if self.sample_rate is not None and int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be a positive integer")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> Optional[float]:
        if self.sample_rate is None:
            return None
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class ClipMask:
    """Partition of ``{0, ..., n-1}`` into reliable / positive / negative sets.

    Index sets are stored sorted. Boolean views are available through
    :attr:`is_reliable`, :attr:`is_pos` and :attr:`is_neg`.
    """

    reliable: np.ndarray
    clipped_pos: np.ndarray
    clipped_neg: np.ndarray
    n: int

    def __post_init__(self):
        rel = _as_index_set(self.reliable)
        pos = _as_index_set(self.clipped_pos)
        neg = _as_index_set(self.clipped_neg)
        n = int(self.n)
        counts = np.zeros(n, dtype=np.intp)
        for s in (rel, pos, neg):
            if s.size and (s[0] < 0 or s[-1] >= n):
                raise ValueError("index out of range for mask of length %d" % n)
            counts[s] += 1
        if not np.all(counts == 1):
            raise ValueError("reliable and clipped sets must partition range(n)")
        object.__setattr__(self, "reliable", rel)
        object.__setattr__(self, "clipped_pos", pos)
        object.__setattr__(self, "clipped_neg", neg)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_flags(cls, pos: np.ndarray, neg: np.ndarray) -> "ClipMask":
        pos = np.asarray(pos, dtype=bool)
        neg = np.asarray(neg, dtype=bool)
        if np.any(pos & neg):
            raise ValueError("a sample cannot be clipped on both sides")
        rel = ~(pos | neg)
        return cls(np.flatnonzero(rel), np.flatnonzero(pos), np.flatnonzero(neg), pos.size)

    @classmethod
    def all_reliable(cls, n: int) -> "ClipMask":
        return cls(np.arange(n), [], [], n)

    def _flags(self, idx: np.ndarray) -> np.ndarray:
        f = np.zeros(self.n, dtype=bool)
        f[idx] = True
        return f

    @property
    def is_reliable(self) -> np.ndarray:
        return self._flags(self.reliable)

    @property
    def is_pos(self) -> np.ndarray:
        return self._flags(self.clipped_pos)

    @property
    def is_neg(self) -> np.ndarray:
        return self._flags(self.clipped_neg)

    @property
    def n_clipped(self) -> int:
        return self.clipped_pos.size + self.clipped_neg.size

    def __eq__(self, other):
        if not isinstance(other, ClipMask):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.reliable, other.reliable)
            and np.array_equal(self.clipped_pos, other.clipped_pos)
            and np.array_equal(self.clipped_neg, other.clipped_neg)
        )

    def __repr__(self):
        return (
            f"ClipMask(n={self.n}, reliable={self.reliable.size}, "
            f"pos={self.clipped_pos.size}, neg={self.clipped_neg.size})"
        )


@dataclass(frozen=True, eq=False)
class ClippedObservation:
    """Clipped samples ``x_c``, the clipping level and the index partition.

    ``tau`` is normally a positive scalar. Windowed frames carry a per-sample
    bound instead (the window times the global level), so a vector of length
    ``n`` is accepted too. The consistency cost only uses ``samples`` and
    ``mask``; ``tau`` is kept for validation and reporting.
    """

    samples: np.ndarray
    tau: Union[float, np.ndarray]
    mask: ClipMask

    def __post_init__(self):
        s = _as_vector(self.samples, "samples").copy()
        if s.size != self.mask.n:
            raise ValueError("samples and mask lengths differ")
        tau = np.asarray(self.tau, dtype=float)
        if tau.ndim == 0:
            if not tau > 0:
                raise ValueError("tau must be positive")
            tau = float(tau)
        else:
            if tau.shape != s.shape:
                raise ValueError("per-sample tau must match the samples' length")
            if np.any(tau < 0):
                raise ValueError("per-sample tau must be non-negative")
            tau = tau.copy()
            tau.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.mask.n


def _check_tau(tau) -> float:
    tau = float(tau)
    if not (tau > 0 and np.isfinite(tau)):
        raise ValueError("clipping threshold tau must be a positive finite number")
    return tau


def clip(x, tau: float) -> ClippedObservation:
    """Hard-clip ``x`` at ``+-tau``.

    Samples with ``|x_i| >= tau`` are assigned to the clipped set matching
    their sign; the set membership comes from ``x``, not from a re-detection
    on the output.

    >>> obs = clip([0.5, -1.2, 2.0], 1.0)
    >>> obs.samples.tolist(), obs.mask.reliable.tolist()
    ([0.5, -1.0, 1.0], [0])
    """
    if isinstance(x, TimeSignal):
        x = x.samples
    x = _as_vector(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot clip non-finite samples")
    tau = _check_tau(tau)
    pos = x >= tau
    neg = x <= -tau
    xc = np.minimum(np.abs(x), tau) * np.sign(x)
    return ClippedObservation(xc, tau, ClipMask.from_flags(pos, neg))


def detect_mask(x_c, tau: float, eps_mask: float = 0.0) -> ClipMask:
    """Recover the index partition from clipped samples.

    ``eps_mask`` widens the clipped sets to absorb quantisation: sample ``i`` is
    positive-clipped when ``x_c[i] >= tau - eps_mask``.
    """
    x_c = _as_vector(x_c, "x_c")
    tau = _check_tau(tau)
    if eps_mask < 0:
        raise ValueError("eps_mask must be non-negative")
    pos = x_c >= tau - eps_mask
    neg = x_c <= -tau + eps_mask
    # Only reachable when eps_mask >= tau; such a sample is at zero amplitude.
    both = pos & neg
    pos &= ~both
    neg &= ~both
    return ClipMask.from_flags(pos, neg)


def consistency_map(u, mask: ClipMask) -> np.ndarray:
    """Identity on reliable samples, positive part on ``clipped_pos`` and
    negative part on ``clipped_neg``."""
    u = _as_vector(u, "u")
    if u.size != mask.n:
        raise ValueError(f"vector of length {u.size} does not match mask of length {mask.n}")
    v = u.copy()
    p, q = mask.clipped_pos, mask.clipped_neg
    v[p] = np.maximum(u[p], 0.0)
    v[q] = np.minimum(u[q], 0.0)
    return v


def consistency_cost(x_tilde, obs: ClippedObservation) -> float:
    """Half squared norm of the consistency map of ``x_c - x_tilde``."""
    x_tilde = _as_vector(x_tilde, "x_tilde")
    if x_tilde.size != obs.n:
        raise ValueError("candidate and observation lengths differ")
    r = consistency_map(obs.samples - x_tilde, obs.mask)
    return 0.5 * float(r @ r)


def is_consistent(x_tilde, obs: ClippedObservation, tol: float = 0.0) -> bool:
    return consistency_cost(x_tilde, obs) <= tol
