import itertools

import numpy as np
import pytest

from unitweave.errors import DataError, DomainError, FitError
from unitweave.quantizer import (Codebook, fit_kmeans, quantize, read_codebook,
                                 read_features, write_codebook, write_features)


def brute_force_best_2means(points):
    """Enumerate every 2-partition; return (best inertia, centroid set)."""
    pts = np.asarray(points, dtype=float)
    best = (np.inf, None)
    n = len(pts)
    for bits in itertools.product([0, 1], repeat=n):
        if len(set(bits)) < 2:
            continue
        groups = [pts[[i for i in range(n) if bits[i] == g]] for g in (0, 1)]
        cents = [g.mean(axis=0) for g in groups]
        inertia = sum(((g - c) ** 2).sum() for g, c in zip(groups, cents))
        if inertia < best[0]:
            best = (inertia, sorted(float(c[0]) for c in cents))
    return best


def test_two_cluster_example_matches_brute_force():
    pts = np.array([[0.0], [1.0], [9.0], [10.0]])
    best_inertia, best_cents = brute_force_best_2means(pts)
    assert best_inertia == pytest.approx(1.0)
    assert best_cents == [0.5, 9.5]
    cb = fit_kmeans(pts, k=2, max_iters=50, seed=1)
    assert sorted(cb.centroids[:, 0].tolist()) == pytest.approx(best_cents)
    assert cb.inertia_history[-1] == pytest.approx(best_inertia)


def test_n_equals_k_zero_inertia():
    pts = np.array([[0.0, 0.0], [3.0, 1.0], [7.0, -2.0]])
    cb = fit_kmeans(pts, k=3, seed=0)
    assert cb.inertia_history[-1] == pytest.approx(0.0)
    assert sorted(map(tuple, cb.centroids.tolist())) == sorted(map(tuple, pts.tolist()))


def test_k1_centroid_is_mean():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(40, 3))
    cb = fit_kmeans(pts, k=1, seed=0)
    assert np.allclose(cb.centroids[0], pts.mean(axis=0))


def test_fit_errors():
    with pytest.raises(FitError):
        fit_kmeans(np.zeros((2, 2)), k=3)
    with pytest.raises(DataError):
        fit_kmeans(np.array([[np.nan], [1.0]]), k=1)


def test_quantize_identity_on_centroids():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(50, 4))
    cb = fit_kmeans(pts, k=5, seed=3)
    assert quantize(cb.centroids, cb).tolist() == [0, 1, 2, 3, 4]


def test_quantize_tie_goes_to_lowest_index():
    cb = Codebook(k=6, dim=1, centroids=np.array(
        [[0.0], [5.0], [2.0], [9.0], [7.0], [4.0]]), seed=0)
    # 3.0 is equidistant from centroids 2 (at 2.0) and 5 (at 4.0) -> index 2
    assert quantize(np.array([[3.0]]), cb).tolist() == [2]


def test_quantize_derived_example():
    cb = Codebook(k=2, dim=1, centroids=np.array([[0.5], [9.5]]), seed=0)
    units = quantize(np.array([[0.0], [1.0], [9.0], [10.0]]), cb)
    assert units.tolist() == [0, 0, 1, 1]


def test_quantize_dedup_flag():
    cb = Codebook(k=2, dim=1, centroids=np.array([[0.0], [10.0]]), seed=0)
    frames = np.array([[0.1], [0.2], [9.9], [10.1], [0.0]])
    assert quantize(frames, cb).tolist() == [0, 0, 1, 1, 0]
    assert quantize(frames, cb, dedup=True).tolist() == [0, 1, 0]


def test_quantize_dim_mismatch():
    cb = Codebook(k=2, dim=3, centroids=np.zeros((2, 3)), seed=0)
    with pytest.raises(DomainError):
        quantize(np.zeros((4, 2)), cb)


def test_fit_deterministic_bit_for_bit():
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(200, 6))
    a = fit_kmeans(pts, k=8, seed=42)
    b = fit_kmeans(pts, k=8, seed=42)
    assert a.centroids.tobytes() == b.centroids.tobytes()
    c = fit_kmeans(pts, k=8, seed=43)
    assert c.centroids.tobytes() != a.centroids.tobytes()


def test_inertia_monotone_fuzz():
    rng = np.random.default_rng(17)
    for trial in range(25):
        n = int(rng.integers(20, 120))
        d = int(rng.integers(1, 5))
        k = int(rng.integers(2, min(9, n)))
        pts = rng.normal(size=(n, d)) * rng.uniform(0.5, 4)
        cb = fit_kmeans(pts, k=k, seed=trial)
        hist = cb.inertia_history
        assert all(hist[i + 1] <= hist[i] + 1e-9 for i in range(len(hist) - 1))


def test_feature_and_codebook_file_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    feats = rng.normal(size=(33, 5)).astype(np.float32)
    fpath = tmp_path / "x.usdf"
    write_features(fpath, feats)
    again = read_features(fpath)
    assert np.array_equal(again, feats.astype(np.float64))
    assert fpath.read_bytes()[:4] == b"USDF"

    cb = fit_kmeans(rng.normal(size=(64, 5)), k=4, seed=0)
    cpath = tmp_path / "x.usdc"
    write_codebook(cpath, cb)
    cb2 = read_codebook(cpath)
    assert cpath.read_bytes()[:4] == b"USDC"
    assert (cb2.k, cb2.dim, cb2.seed) == (cb.k, cb.dim, cb.seed)
    assert np.array_equal(cb2.centroids,
                          cb.centroids.astype(np.float32).astype(np.float64))


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.usdf"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(DataError):
        read_features(path)
