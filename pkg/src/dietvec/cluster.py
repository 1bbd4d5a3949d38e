"""Weighted k-means with k-means++ seeding.

Point weights scale each point's share of the objective
``J = sum_i w_i * ||x_i - c_a(i)||^2``.  Ties in assignment go to the lowest
cluster index.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit, prange

from .nvec import read_nvec, write_nvec

_CHUNK = 8192
# up to this many coordinates, centroid sums are correctly rounded
_EXACT_LIMIT = 1 << 18


class ClusterError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterConfig:
    k: int
    max_iterations: int = 100
    tol: float = 1e-6
    rng_seed: int = 0
    n_init: int = 3
    batch_size: int = 0  # > 0 switches to mini-batch updates

    def __post_init__(self):
        if self.k < 1:
            raise ClusterError("k must be >= 1")
        if self.tol < 0:
            raise ClusterError("tol must be >= 0")
        if self.max_iterations < 1 or self.n_init < 1:
            raise ClusterError("max_iterations and n_init must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Clustering:
    centroids: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    objective: float
    n_iter: int = 0
    history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def save(self, directory: str | Path, point_ids: Sequence[str], points: np.ndarray) -> None:
        """``centroids.nvec`` keyed by cluster id and ``assignments.csv``."""
        directory = Path(directory)
        write_nvec(directory / "centroids.nvec", [str(j) for j in range(self.k)], self.centroids)
        d2 = squared_distances_to_assigned(points, self.centroids, self.labels)
        with open(directory / "assignments.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["point_id", "cluster_id", "squared_distance", "weight"])
            for pid, label, dist, w in zip(point_ids, self.labels, d2, self.weights):
                writer.writerow([pid, int(label), repr(float(dist)), repr(float(w))])


def load_clustering(directory: str | Path) -> tuple[list[str], Clustering]:
    directory = Path(directory)
    _, centroids = read_nvec(directory / "centroids.nvec")
    ids, labels, dists, weights = [], [], [], []
    with open(directory / "assignments.csv", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for pid, label, dist, w in reader:
            ids.append(pid)
            labels.append(int(label))
            dists.append(float(dist))
            weights.append(float(w))
    weights_arr = np.array(weights)
    objective = float(np.dot(weights_arr, dists))
    return ids, Clustering(centroids, np.array(labels, dtype=np.int64), weights_arr, objective)


@njit(cache=True, parallel=True)
def _assigned_d2(points, centroids, labels):
    # rows are independent, so the parallel loop is still deterministic
    n, d = points.shape
    out = np.empty(n)
    for i in prange(n):
        c = labels[i]
        acc = 0.0
        for j in range(d):
            diff = points[i, j] - centroids[c, j]
            acc += diff * diff
        out[i] = acc
    return out


def squared_distances_to_assigned(points, centroids, labels) -> np.ndarray:
    points = np.ascontiguousarray(points, dtype=float)
    centroids = np.ascontiguousarray(centroids, dtype=float)
    return _assigned_d2(points, centroids, np.asarray(labels, dtype=np.int64))


def _nearest(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid (lowest index on ties) and its squared distance.

    Distances come from the expanded form for speed; rows whose best and
    runner-up are within rounding of each other are recomputed exactly.
    """
    n, k = points.shape[0], centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    c_norm = np.einsum("ij,ij->i", centroids, centroids)
    for start in range(0, n, _CHUNK):
        x = points[start:start + _CHUNK]
        x_norm = np.einsum("ij,ij->i", x, x)
        d2 = x_norm[:, None] - 2.0 * (x @ centroids.T) + c_norm[None, :]
        lab = d2.argmin(axis=1)
        if k > 1:
            slack = 1e-9 * (x_norm[:, None] + c_norm[None, :]) + 1e-300
            near = (d2 - d2[np.arange(len(x)), lab][:, None]) <= slack
            ambiguous = np.flatnonzero(near.sum(axis=1) > 1)
            for r in ambiguous:
                exact = ((centroids - x[r]) ** 2).sum(axis=1)
                lab[r] = int(np.argmin(exact))
        labels[start:start + len(x)] = lab
    best = squared_distances_to_assigned(points, centroids, labels)
    return labels, best


def assign(point, centroids) -> int:
    """Index of the nearest centroid, lowest index on ties."""
    point = np.asarray(point, dtype=float)
    centroids = np.atleast_2d(np.asarray(centroids, dtype=float))
    if point.ndim != 1 or point.shape[0] != centroids.shape[1]:
        raise ClusterError(f"point dimension {point.shape} does not match centroids {centroids.shape}")
    return int(np.argmin(((centroids - point) ** 2).sum(axis=1)))


def assign_all(points, centroids) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    centroids = np.atleast_2d(np.asarray(centroids, dtype=float))
    if points.shape[1] != centroids.shape[1]:
        raise ClusterError("dimension mismatch between points and centroids")
    return _nearest(points, centroids)[0]


def _check(points, weights):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[0] == 0:
        raise ClusterError("need at least one point")
    bad = np.flatnonzero(~np.isfinite(points).all(axis=1))
    if bad.size:
        raise ClusterError(f"point {int(bad[0])} contains NaN or infinite values")
    if weights is None:
        weights = np.ones(points.shape[0])
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (points.shape[0],):
        raise ClusterError("one weight per point required")
    if not (np.isfinite(weights).all() and (weights > 0).all()):
        raise ClusterError("weights must be finite and > 0")
    return points, weights


@njit(cache=True, parallel=True)
def _d2_to(points, c):
    n, d = points.shape
    out = np.empty(n)
    for i in prange(n):
        acc = 0.0
        for j in range(d):
            diff = points[i, j] - c[j]
            acc += diff * diff
        out[i] = acc
    return out


def kmeans_init(points, weights, k: int, seed, n_trials: int | None = None) -> np.ndarray:
    """Greedy k-means++ seeding.

    Each step draws ``n_trials`` candidates with probability proportional to
    ``w * D^2`` and keeps the one that lowers the weighted potential most
    (``n_trials = 1`` is plain k-means++).
    """
    points, weights = _check(points, weights)
    points = np.ascontiguousarray(points)
    n = points.shape[0]
    if k > n:
        raise ClusterError(f"k={k} exceeds the number of points ({n})")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if n_trials is None:
        n_trials = 2 + int(math.log(k))
    chosen = [int(rng.choice(n, p=weights / weights.sum()))]
    closest = _d2_to(points, points[chosen[0]])
    taken = np.zeros(n, dtype=bool)
    taken[chosen[0]] = True
    for _ in range(1, k):
        mass = weights * closest
        mass[taken] = 0.0
        total = mass.sum()
        if total > 0:
            candidates = rng.choice(n, size=n_trials, p=mass / total)
        else:
            # all remaining points coincide with chosen centroids
            free = np.flatnonzero(~taken)
            candidates = [int(rng.choice(free, p=weights[free] / weights[free].sum()))]
        best_idx, best_d2, best_pot = -1, None, math.inf
        for idx in candidates:
            d2 = np.minimum(closest, _d2_to(points, points[idx]))
            potential = float(np.dot(weights, d2))
            if potential < best_pot or best_idx < 0:
                best_idx, best_d2, best_pot = int(idx), d2, potential
        chosen.append(best_idx)
        taken[best_idx] = True
        closest = best_d2
    return points[chosen].copy()


def _two_product(a, b):
    """``a * b`` as an unevaluated sum ``hi + lo`` without rounding error (Dekker)."""
    hi = a * b
    a_hi = _split_hi(a)
    b_hi = _split_hi(b)
    a_lo, b_lo = a - a_hi, b - b_hi
    lo = ((a_hi * b_hi - hi) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return hi, lo


def _split_hi(a):
    c = 134217729.0 * a  # 2**27 + 1
    return c - (c - a)


def _exact_dot(w, x) -> float:
    # correctly rounded sum of w_i * x_i, so a weight-2 point equals two unit copies
    hi, lo = _two_product(w, x)
    return math.fsum(np.concatenate([hi, lo]))


def _objective(points, weights, centroids, labels) -> float:
    return _exact_dot(weights, squared_distances_to_assigned(points, centroids, labels))


def _exact_sums(points, weights, labels, k):
    sums = np.zeros((k, points.shape[1]))
    mass = np.zeros(k)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(k + 1))
    for j in range(k):
        idx = order[bounds[j]:bounds[j + 1]]
        if idx.size == 0:
            continue
        w = weights[idx]
        mass[j] = math.fsum(w)
        for dim in range(points.shape[1]):
            sums[j, dim] = _exact_dot(w, points[idx, dim])
    return sums, mass


def _weighted_means(points, weights, labels, k, previous):
    n = points.shape[0]
    if n * points.shape[1] <= _EXACT_LIMIT:
        sums, mass = _exact_sums(points, weights, labels, k)
    else:
        mass = np.bincount(labels, weights=weights, minlength=k)
        if k * n <= 2**24:
            onehot = np.zeros((k, n))
            onehot[labels, np.arange(n)] = weights
            sums = onehot @ points
        else:
            order = np.argsort(labels, kind="stable")
            sorted_labels = labels[order]
            present = np.unique(sorted_labels)
            starts = np.searchsorted(sorted_labels, present)
            sums = np.zeros((k, points.shape[1]))
            sums[present] = np.add.reduceat(weights[order, None] * points[order], starts, axis=0)
    out = previous.copy()
    nz = mass > 0
    out[nz] = sums[nz] / mass[nz, None]
    return out


def _repair_empty(points, weights, labels, d2, k):
    """Move the point with the largest weighted distance into each empty cluster."""
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        contribution = weights * d2
        # never strip the last member from a cluster
        contribution[counts[labels] <= 1] = -1.0
        i = int(np.argmax(contribution))
        if contribution[i] < 0:
            break
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] += 1
        d2[i] = 0.0
    return labels


def _lloyd(points, weights, centroids, config: ClusterConfig):
    k = centroids.shape[0]
    history: list[float] = []
    labels = None
    n_iter = 0
    for n_iter in range(1, config.max_iterations + 1):
        new_labels, d2 = _nearest(points, centroids)
        new_labels = _repair_empty(points, weights, new_labels, d2, k)
        stable = labels is not None and np.array_equal(labels, new_labels)
        labels = new_labels
        centroids = _weighted_means(points, weights, labels, k, centroids)
        objective = _objective(points, weights, centroids, labels)
        previous = history[-1] if history else None
        history.append(objective)
        if stable or objective == 0.0:
            break
        if previous is not None and previous > 0 and (previous - objective) / previous < config.tol:
            break
    return Clustering(centroids, labels, weights, history[-1], n_iter, history)


def _minibatch(points, weights, centroids, config: ClusterConfig, rng):
    """Weighted mini-batch updates; per-centroid step size 1 / accumulated weight."""
    n = points.shape[0]
    k = centroids.shape[0]
    mass = np.zeros(k)
    for _ in range(config.max_iterations):
        batch = rng.choice(n, size=min(config.batch_size, n), replace=False)
        labels, _ = _nearest(points[batch], centroids)
        for i, j in zip(batch, labels):
            mass[j] += weights[i]
            centroids[j] += (weights[i] / mass[j]) * (points[i] - centroids[j])
    labels, d2 = _nearest(points, centroids)
    labels = _repair_empty(points, weights, labels, d2, k)
    centroids = _weighted_means(points, weights, labels, k, centroids)
    objective = _objective(points, weights, centroids, labels)
    return Clustering(centroids, labels, weights, objective, config.max_iterations, [objective])


def kmeans_fit(points, weights=None, config: ClusterConfig | None = None, init=None,
               **kwargs) -> Clustering:
    """Best of ``n_init`` seeded runs by final objective.

    ``init`` fixes the starting centroids (a single run is made).
    """
    if config is None:
        config = ClusterConfig(**kwargs)
    points, weights = _check(points, weights)
    if config.k > points.shape[0]:
        raise ClusterError(f"k={config.k} exceeds the number of points ({points.shape[0]})")
    rng = np.random.default_rng(config.rng_seed)
    if init is not None:
        init = np.array(init, dtype=float).reshape(config.k, points.shape[1])
    best: Clustering | None = None
    for _ in range(1 if init is not None else config.n_init):
        start = init.copy() if init is not None else kmeans_init(points, weights, config.k, rng)
        if config.batch_size > 0:
            run = _minibatch(points, weights, start, config, rng)
        else:
            run = _lloyd(points, weights, start, config)
        if best is None or run.objective < best.objective:
            best = run
    return best
