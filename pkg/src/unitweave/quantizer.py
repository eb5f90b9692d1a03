"""k-means codebook fitting and frame quantization.

Desk-scale stand-in for a pretrained unit extractor: Lloyd's algorithm with
seeded k-means++ initialization over 50 Hz frame features. Everything is
deterministic given (features, k, seed).
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError, FitError

_FEATURE_MAGIC = b"USDF"
_CODEBOOK_MAGIC = b"USDC"

# frames per chunk for blocked distance computation (bounds temp memory)
_CHUNK = 65536


@dataclass
class Codebook:
    k: int
    dim: int
    centroids: np.ndarray
    seed: int
    inertia_history: list = field(default_factory=list, repr=False)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    # |x|^2 - 2 x.c + |c|^2, clipped: BLAS path, exact enough for argmin
    d = np.sum(x * x, axis=1)[:, None] - 2.0 * (x @ c.T) + np.sum(c * c, axis=1)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _assign(x: np.ndarray, c: np.ndarray):
    """Nearest centroid per row (ties -> lowest index) and the squared distances."""
    n = x.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        d = _sq_dists(x[lo:hi], c)
        labels[lo:hi] = np.argmin(d, axis=1)
        dists[lo:hi] = d[np.arange(hi - lo), labels[lo:hi]]
    return labels, dists


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass on already-chosen points: fall back to uniform
            remaining = np.setdiff1d(np.arange(n), chosen[:j])
            chosen[j] = rng.choice(remaining)
        else:
            chosen[j] = rng.choice(n, p=d2 / total)
        d2 = np.minimum(d2, np.sum((x - x[chosen[j]]) ** 2, axis=1))
    return x[chosen].astype(np.float64, copy=True)


def fit_kmeans(features: np.ndarray, k: int, max_iters: int = 100,
               seed: int = 0) -> Codebook:
    """Lloyd's algorithm; stops at max_iters or when assignments stabilize.

    Empty clusters are re-seeded to the point currently farthest from its
    assigned centroid. Inertia is asserted non-increasing per iteration.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"features must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("features contain non-finite values")
    n, dim = x.shape
    if n < k:
        raise FitError(f"cannot fit k={k} clusters to n={n} points")
    if k < 1:
        raise FitError(f"k={k} must be >= 1")

    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    centroids = _kmeanspp_init(x, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    history = []
    for _ in range(max_iters):
        new_labels, dists = _assign(x, centroids)
        # re-seed empty clusters to the farthest points, one per cluster
        counts = np.bincount(new_labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            farthest = np.argsort(dists)[::-1]
            for slot, cluster in enumerate(empty):
                idx = farthest[slot]
                centroids[cluster] = x[idx]
                new_labels[idx] = cluster
                dists[idx] = 0.0
        inertia = float(dists.sum())
        if history and inertia > history[-1] + 1e-9 * max(1.0, history[-1]):
            raise FitError(f"inertia increased: {history[-1]} -> {inertia}")
        history.append(inertia)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)

    if k > 1:
        dmin = _min_pairwise_dist(centroids)
        if dmin <= 1e-9:
            raise FitError(f"duplicate centroids after fit (min pairwise dist {dmin})")
    return Codebook(k=k, dim=dim, centroids=centroids, seed=seed,
                    inertia_history=history)


def _min_pairwise_dist(c: np.ndarray) -> float:
    d = _sq_dists(c, c)
    np.fill_diagonal(d, np.inf)
    return float(np.sqrt(d.min()))


def quantize(features: np.ndarray, codebook: Codebook,
             dedup: bool = False) -> np.ndarray:
    """Map each frame to its nearest centroid; ties pick the lowest index.

    `dedup` collapses consecutive duplicate units. It is off by default:
    downstream interval arithmetic assumes one unit per 20 ms frame.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != codebook.dim:
        raise DomainError(
            f"feature dim {x.shape[1] if x.ndim == 2 else x.shape} != codebook dim {codebook.dim}")
    labels, _ = _assign(x, np.asarray(codebook.centroids, dtype=np.float64))
    if dedup and labels.size:
        keep = np.empty(labels.size, dtype=bool)
        keep[0] = True
        np.not_equal(labels[1:], labels[:-1], out=keep[1:])
        labels = labels[keep]
    return labels


# ---------------------------------------------------------------------------
# Binary feature / codebook files (little-endian float32 matrices)

def write_features(path, features: np.ndarray) -> None:
    x = np.asarray(features, dtype="<f4")
    if x.ndim != 2:
        raise DataError(f"features must be 2-D, got shape {x.shape}")
    with open(path, "wb") as f:
        f.write(_FEATURE_MAGIC)
        f.write(struct.pack("<II", x.shape[0], x.shape[1]))
        f.write(x.tobytes(order="C"))


def read_features(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _FEATURE_MAGIC:
            raise DataError(f"{path}: bad feature-file magic {magic!r}")
        n, dim = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(n * dim * 4), dtype="<f4")
        if data.size != n * dim:
            raise DataError(f"{path}: truncated feature file")
    return data.reshape(n, dim).astype(np.float64)


def write_codebook(path, codebook: Codebook) -> None:
    c = np.asarray(codebook.centroids, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_CODEBOOK_MAGIC)
        f.write(struct.pack("<IIQ", codebook.k, codebook.dim, codebook.seed & (2**64 - 1)))
        f.write(c.tobytes(order="C"))


def read_codebook(path) -> Codebook:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _CODEBOOK_MAGIC:
            raise DataError(f"{path}: bad codebook magic {magic!r}")
        k, dim, seed = struct.unpack("<IIQ", f.read(16))
        data = np.frombuffer(f.read(k * dim * 4), dtype="<f4")
        if data.size != k * dim:
            raise DataError(f"{path}: truncated codebook file")
    return Codebook(k=k, dim=dim, centroids=data.reshape(k, dim).astype(np.float64),
                    seed=seed)
