"""Kernels and Gram matrices for the dual (representer) forms."""

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_io import UnlabeledSample

GRAM_MAGIC = b"PBGRAM01"
KERNEL_KINDS = ("linear", "rbf")


@dataclass(frozen=True)
class Kernel:
    kind: str = "linear"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError("rbf kernel requires gamma > 0")

    def __call__(self, X, Y) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        if self.kind == "linear":
            return X @ Y.T
        sq = (np.sum(X * X, axis=1)[:, None] + np.sum(Y * Y, axis=1)[None, :]
              - 2.0 * (X @ Y.T))
        return np.exp(-self.gamma * np.maximum(sq, 0.0))

    def diag(self, X) -> np.ndarray:
        """k(x, x) for each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "linear":
            return np.sum(X * X, axis=1)
        return np.ones(X.shape[0])

    def describe(self) -> str:
        return "linear" if self.kind == "linear" else f"rbf(gamma={self.gamma:.17g})"


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray
    kernel: Kernel
    row_norms: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def _points(points):
    if isinstance(points, UnlabeledSample):
        return points.features
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 0:
        raise ValueError("no points")
    if P.shape[1] == 0:
        raise ValueError("points have zero dimension")
    return P


def _finish(K, kernel):
    K = 0.5 * (K + K.T)  # exact symmetry regardless of BLAS rounding
    diag = np.diag(K)
    if np.any(diag <= 0):
        raise ValueError("Gram matrix has a non-positive diagonal entry")
    K.setflags(write=False)
    norms = np.sqrt(diag)
    norms.setflags(write=False)
    return GramMatrix(K, kernel, norms)


def gram(points, kernel: Kernel = Kernel()) -> GramMatrix:
    P = _points(points)
    return _finish(kernel(P, P), kernel)


def joint_gram(source, target, kernel: Kernel = Kernel()) -> GramMatrix:
    """Gram matrix over source points followed by target points."""
    S, T = _points(source), _points(target)
    if S.shape[1] != T.shape[1]:
        raise ValueError(f"dimension mismatch: source {S.shape[1]}, target {T.shape[1]}")
    return gram(np.vstack([S, T]), kernel)


# --------------------------------------------------------------------------
# Binary cache: 8-byte magic, uint64 M, then M*M little-endian float64.


def content_key(points, kernel: Kernel) -> str:
    P = np.ascontiguousarray(_points(points), dtype="<f8")
    h = hashlib.sha256()
    h.update(kernel.describe().encode())
    h.update(struct.pack("<QQ", *P.shape))
    h.update(P.tobytes())
    return h.hexdigest()


def save_gram(path, K: GramMatrix):
    M = K.size
    with open(path, "wb") as fh:
        fh.write(GRAM_MAGIC)
        fh.write(struct.pack("<Q", M))
        fh.write(np.ascontiguousarray(K.entries, dtype="<f8").tobytes())


def load_gram(path, kernel: Kernel) -> GramMatrix:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != GRAM_MAGIC:
        raise ValueError(f"{path}: not a Gram cache file")
    (M,) = struct.unpack("<Q", data[8:16])
    if len(data) != 16 + 8 * M * M:
        raise ValueError(f"{path}: truncated Gram cache")
    K = np.frombuffer(data, dtype="<f8", offset=16).reshape(M, M).astype(float)
    return _finish(K, kernel)


def cached_gram(points, kernel: Kernel, cache_dir) -> GramMatrix:
    """``gram(points, kernel)`` memoized on disk by content hash."""
    path = Path(cache_dir) / f"{content_key(points, kernel)}.pbgram"
    if path.exists():
        return load_gram(path, kernel)
    K = gram(points, kernel)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    save_gram(tmp, K)
    tmp.replace(path)
    return K
