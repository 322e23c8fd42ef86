"""DCT synthesis dictionaries and K-term hard thresholding.

Two atom families are provided:

``orthonormal_dct``
    DCT-II basis, ``D = N``. Synthesis is the orthonormal inverse DCT.
``redundant_dct``
    Frequency-oversampled DCT with ``D = 2N`` atoms
    ``c_k cos(pi (2n + 1) k / (2D))``, each normalised to unit norm.

Both transforms run through :mod:`scipy.fft` in ``O(D log D)``; the dense
matrix is available through :meth:`Dictionary.matrix` for small sizes and
testing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
import numpy as np
import scipy.fft as sfft

__all__ = [
    "KINDS",
    "Dictionary",
    "SparseCoeffs",
    "build_dictionary",
    "synthesize",
    "analyze",
    "hard_threshold",
]

KINDS = ("orthonormal_dct", "redundant_dct")


@dataclass(frozen=True, eq=False)
class SparseCoeffs:
    """Coefficient vector with its support (indices of nonzero entries)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("coefficients must be a 1-D vector")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @cached_property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)

    @property
    def l0(self) -> int:
        return int(self.support.size)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Synthesis operator ``Psi`` of shape ``(n, d)``.

    Instances are immutable; use :func:`build_dictionary` to construct one.
    """

    kind: str
    n: int
    d: int = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported dictionary kind {self.kind!r}; expected one of {KINDS}")
        if int(self.n) < 1:
            raise ValueError("dictionary length n must be >= 1")
        object.__setattr__(self, "n", int(self.n))
        d = self.n if self.kind == "orthonormal_dct" else 2 * self.n
        object.__setattr__(self, "d", d)

    @cached_property
    def _scale(self) -> np.ndarray:
        # sum_n cos^2(pi (2n+1) k / (2D)) = N/2 + sin(2 pi k N / D) / (4 sin(pi k / D))
        k = np.arange(self.d, dtype=float)
        theta = np.pi * k / self.d
        sq = np.full(self.d, float(self.n))
        nz = k > 0
        sq[nz] = self.n / 2 + np.sin(2 * self.n * theta[nz]) / (4 * np.sin(theta[nz]))
        return 1.0 / np.sqrt(sq)

    def synthesize(self, alpha) -> np.ndarray:
        """Return ``Psi @ alpha``."""
        if isinstance(alpha, SparseCoeffs):
            supp = alpha.support
            if supp.size <= 8:
                if alpha.values.size != self.d:
                    raise ValueError(f"expected {self.d} coefficients, got {alpha.values.size}")
                return self.atoms(supp) @ alpha.values[supp]
            alpha = alpha.values
        a = np.asarray(alpha, dtype=float)
        if a.shape != (self.d,):
            raise ValueError(f"expected {self.d} coefficients, got shape {a.shape}")
        if self.kind == "orthonormal_dct":
            return sfft.idct(a, type=2, norm="ortho")
        b = self._scale * a
        return 0.5 * (sfft.dct(b, type=3)[: self.n] + b[0])

    def analyze(self, x) -> np.ndarray:
        """Return ``Psi.T @ x``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected a signal of length {self.n}, got shape {x.shape}")
        if self.kind == "orthonormal_dct":
            return sfft.dct(x, type=2, norm="ortho")
        padded = np.zeros(self.d)
        padded[: self.n] = x
        return 0.5 * self._scale * sfft.dct(padded, type=2)

    def atoms(self, idx) -> np.ndarray:
        """Columns ``idx`` of ``Psi`` as an ``(n, len(idx))`` array."""
        idx = np.asarray(idx, dtype=np.intp).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= self.d):
            raise IndexError("atom index out of range")
        t = 2 * np.arange(self.n)[:, None] + 1
        denom = 2 * self.n if self.kind == "orthonormal_dct" else 2 * self.d
        cols = np.cos(np.pi * t * idx[None, :] / denom)
        return cols * self._scale[idx]

    def matrix(self) -> np.ndarray:
        return self.atoms(np.arange(self.d))

    @cached_property
    def frame_bound(self) -> float:
        """Power-iteration estimate of ``||Psi Psi^T||`` (largest eigenvalue)."""
        if self.kind == "orthonormal_dct":
            return 1.0
        rng = np.random.default_rng(0)
        v = rng.standard_normal(self.n)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(100):
            w = self.synthesize(self.analyze(v))
            lam_new = float(np.linalg.norm(w))
            v = w / lam_new
            if abs(lam_new - lam) <= 1e-12 * lam_new:
                break
            lam = lam_new
        return lam_new


@lru_cache(maxsize=16)
def build_dictionary(kind: str, n: int) -> Dictionary:
    """Return the (cached, immutable) dictionary of the given kind and length."""
    return Dictionary(kind, int(n))


def synthesize(dictionary: Dictionary, alpha) -> np.ndarray:
    return dictionary.synthesize(alpha)


def analyze(dictionary: Dictionary, x) -> np.ndarray:
    return dictionary.analyze(x)


def _top_k(mag: np.ndarray, k: int) -> np.ndarray:
    # Stable sort on -|a| keeps the lowest index among equal magnitudes.
    return np.argsort(-mag, kind="stable")[:k]


def hard_threshold(alpha, k: int) -> SparseCoeffs:
    """Keep the ``k`` largest-magnitude entries of ``alpha``, zero the rest.

    Ties are broken in favour of the lowest index.

    >>> hard_threshold([2.0, -2.0, 2.0, 1.0], 2).values.tolist()
    [2.0, -2.0, 0.0, 0.0]
    """
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1:
        raise ValueError("alpha must be a 1-D vector")
    k = int(k)
    if k < 0 or k > a.size:
        raise ValueError(f"sparsity k={k} outside [0, {a.size}]")
    out = np.zeros_like(a)
    keep = _top_k(np.abs(a), k)
    out[keep] = a[keep]
    return SparseCoeffs(out)
