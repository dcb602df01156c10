"""Clustering of distributions and point matching on top of the transport solver.

Clustering: each pair of point clouds gets a dissimilarity equal to the
converged transport objective between seeded subsamples; average-linkage
agglomeration runs on the symmetrized matrix. Matching: the transported
endpoints induce a pairing that is scored against a rigid-rotation ground
truth and compared with the plain Euclidean assignment baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .chebyshev import build_cache
from .density import GaussianMixture
from .pairwise import as_lagrangian
from .quadrature import gauss_legendre
from .seeding import rng_for
from .transport import TransportConfig, TransportResult, solve_transport

__all__ = [
    "DissimilarityMatrix",
    "MatchingReport",
    "subsample",
    "pairwise_dissimilarity",
    "dissimilarity_matrix",
    "average_linkage_cluster",
    "action_cost_matrix",
    "action_assignment",
    "euclidean_assignment",
    "euclidean_transport_cost",
    "rotation_matrix",
    "rotation_truth_accuracy",
    "transport_matching",
    "bimodal_clustering_scene",
    "ring_matching_scene",
]


def subsample(cloud, k: int, rng: np.random.Generator) -> np.ndarray:
    """k points drawn without replacement (all points if k >= size)."""
    cloud = np.asarray(cloud, dtype=float)
    if k >= cloud.shape[0]:
        return cloud.copy()
    idx = rng.choice(cloud.shape[0], size=k, replace=False)
    return cloud[np.sort(idx)]


def pairwise_dissimilarity(cloud_g, cloud_h, model, cfg: TransportConfig,
                           k: int, rng_g=None, rng_h=None) -> float:
    """Converged transport objective between seeded k-point subsamples."""
    cloud_g = np.asarray(cloud_g, dtype=float)
    cloud_h = np.asarray(cloud_h, dtype=float)
    if cloud_g.shape[0] == 0 or cloud_h.shape[0] == 0:
        raise ValueError("clouds must be nonempty")
    if k > min(cloud_g.shape[0], cloud_h.shape[0]):
        raise ValueError("subsample size exceeds a cloud size")
    rng_g = rng_g or rng_for(cfg.seed, "dissimilarity-src")
    rng_h = rng_h or rng_for(cfg.seed, "dissimilarity-dst")
    sub_g = subsample(cloud_g, k, rng_g)
    sub_h = subsample(cloud_h, k, rng_h)
    result = solve_transport(sub_g, sub_h, model, cfg)
    return float(result.objective)


@dataclass
class DissimilarityMatrix:
    """All ordered-pair transport dissimilarities plus the symmetrized copy."""

    d: np.ndarray
    d_sym: np.ndarray
    provenance: list = field(repr=False, default_factory=list)

    @property
    def n(self) -> int:
        return self.d.shape[0]


def dissimilarity_matrix(clouds, model, cfg: TransportConfig, k: int
                         ) -> DissimilarityMatrix:
    """Compute D[g, h] for every ordered pair of clouds.

    Each cloud keeps one seeded subsample reused on both sides, so the
    diagonal pairs identical sets and D[g, h] / D[h, g] differ only through
    optimization, not sampling.
    """
    clouds = [np.asarray(c, dtype=float) for c in clouds]
    if len(clouds) < 2:
        raise ValueError("need at least two clouds")
    subs = [subsample(c, k, rng_for(cfg.seed, f"dissimilarity-sub:{g}"))
            for g, c in enumerate(clouds)]
    n = len(clouds)
    d = np.zeros((n, n))
    provenance = []
    for g in range(n):
        for h in range(n):
            result = solve_transport(subs[g], subs[h], model, cfg)
            d[g, h] = result.objective
            provenance.append({"g": g, "h": h,
                               "objective": float(result.objective),
                               "action": float(result.total_cost),
                               "penalty0": float(result.penalty0),
                               "penalty1": float(result.penalty1),
                               "iterations": int(result.iterations)})
    return DissimilarityMatrix(d=d, d_sym=0.5 * (d + d.T), provenance=provenance)


def average_linkage_cluster(d_sym, n_clusters: int) -> np.ndarray:
    """Agglomerative average-linkage labels from a symmetric dissimilarity.

    Merges use the Lance-Williams update for the unweighted mean of
    inter-cluster pairwise dissimilarities; ties break on the smallest
    (min-member, min-member) pair. Labels are numbered by each final
    cluster's smallest member.
    """
    d = np.asarray(d_sym, dtype=float)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise ValueError("dissimilarity matrix must be square")
    if np.max(np.abs(d - d.T)) > 1e-10:
        raise ValueError("dissimilarity matrix must be symmetric")
    if np.any(d < 0):
        raise ValueError("dissimilarities must be non-negative")
    if not 1 <= n_clusters <= n:
        raise ValueError(f"n_clusters must be in [1, {n}], got {n_clusters}")

    members = {i: [i] for i in range(n)}
    dist = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = d[i, j]

    def key(a, b):
        return (a, b) if a < b else (b, a)

    while len(members) > n_clusters:
        best = None
        for a in sorted(members):
            for b in sorted(members):
                if a >= b:
                    continue
                cand = (dist[key(a, b)], a, b)
                if best is None or cand < best:
                    best = cand
        _, a, b = best
        na, nb = len(members[a]), len(members[b])
        for c in sorted(members):
            if c in (a, b):
                continue
            merged = (na * dist[key(a, c)] + nb * dist[key(b, c)]) / (na + nb)
            dist[key(a, c)] = merged
            del dist[key(b, c)]
        del dist[key(a, b)]
        members[a] = members[a] + members[b]
        del members[b]

    labels = np.empty(n, dtype=int)
    for label, root in enumerate(sorted(members)):
        labels[members[root]] = label
    return labels


def action_cost_matrix(x0, x1, model, alpha: float = 1.0, n_cheb: int = 6,
                       quad_order: int = 30, max_iters: int = 600,
                       grad_tol: float = 1e-6) -> np.ndarray:
    """Relaxed action cost c(x0_i, x1_j) for every ordered pair at once.

    Endpoints stay pinned; only interior coefficients are optimized, with a
    per-pair backtracked step so every pair converges at its own pace. All
    pairs share one vectorized iteration, which makes a full m x m matrix
    cheap enough to use as an assignment cost.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    n0, n1 = x0.shape[0], x1.shape[0]
    d = x0.shape[1]
    cache = build_cache(n_cheb, gauss_legendre(quad_order, 0.0, 1.0))
    lagr = as_lagrangian(model, alpha)
    t = cache.rule.nodes
    q = cache.rule.weights

    p0 = np.repeat(x0, n1, axis=0)          # pair (i, j) at row i * n1 + j
    p1 = np.tile(x1, (n0, 1))
    n_pairs = n0 * n1
    coeffs = np.zeros((n_cheb - 1, n_pairs, d))
    chord = p1 - p0
    base_pos = ((1.0 - t)[None, :, None] * p0[:, None, :]
                + t[None, :, None] * p1[:, None, :])

    def actions(a_sub, idx):
        pos = base_pos[idx] + np.einsum("kpd,kr->prd", a_sub, cache.phi)
        vel = chord[idx][:, None, :] + np.einsum("kpd,kr->prd", a_sub, cache.dphi)
        lvals, dldv, dldw = lagr.at_nodes(pos, vel)
        f = np.einsum("r,pr->p", q, lvals)
        g = (np.einsum("r,prd,kr->kpd", q, dldv, cache.dphi)
             + np.einsum("r,prd,kr->kpd", q, dldw, cache.phi))
        return f, g

    all_idx = np.arange(n_pairs)
    f_cur, g_cur = actions(coeffs, all_idx)
    steps = np.full(n_pairs, 0.1)
    for _ in range(max_iters):
        g_sq = np.sum(g_cur * g_cur, axis=(0, 2))
        active = np.flatnonzero(g_sq > grad_tol * grad_tol)
        if active.size == 0:
            break
        todo = active
        any_moved = False
        for _ in range(40):
            if todo.size == 0:
                break
            trial = coeffs[:, todo, :] - steps[todo][None, :, None] * g_cur[:, todo, :]
            f_new, g_new = actions(trial, todo)
            ok = np.isfinite(f_new) & (f_new <= f_cur[todo]
                                       - 1e-4 * steps[todo] * g_sq[todo])
            hit = todo[ok]
            if hit.size:
                coeffs[:, hit, :] = trial[:, ok, :]
                f_cur[hit] = f_new[ok]
                g_cur[:, hit, :] = g_new[:, ok, :]
                steps[hit] *= 2.0
                any_moved = True
            todo = todo[~ok]
            steps[todo] *= 0.5
        if not any_moved:
            break
    return f_cur.reshape(n0, n1)


def action_assignment(x0, x1, model, alpha: float = 1.0, **kwargs) -> np.ndarray:
    """Exact assignment on the relaxed pairwise action costs."""
    cost = action_cost_matrix(x0, x1, model, alpha=alpha, **kwargs)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(x0.shape[0], dtype=int)
    perm[rows] = cols
    return perm


def euclidean_assignment(x0, x1) -> np.ndarray:
    """Exact minimum-cost bijection under c(x, y) = ||x - y||^2 / 2.

    Returns perm with x0[i] matched to x1[perm[i]].
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if x0.shape != x1.shape:
        raise ValueError("clouds must have equal shapes")
    diff = x0[:, None, :] - x1[None, :, :]
    cost = 0.5 * np.sum(diff * diff, axis=-1)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(x0.shape[0], dtype=int)
    perm[rows] = cols
    return perm


def euclidean_transport_cost(x0, x1) -> float:
    """Total cost of the optimal Euclidean assignment."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    perm = euclidean_assignment(x0, x1)
    diff = x0 - x1[perm]
    return 0.5 * float(np.sum(diff * diff))


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_truth_accuracy(x0, x1, delta_z: float, pairs,
                            tol_angle: float = 0.0) -> float:
    """Fraction of pairs matching the rigid-rotation ground truth.

    Pair (i, j) counts when j indexes the X1 sample nearest to
    R(delta_z) x0_i; with tol_angle > 0 a pair also counts when the polar
    angles of x1_j and the rotated point differ by at most tol_angle.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    pairs = np.asarray(pairs, dtype=int)
    rotated = x0 @ rotation_matrix(delta_z).T
    diff = rotated[:, None, :] - x1[None, :, :]
    nearest = np.argmin(np.sum(diff * diff, axis=-1), axis=1)
    hits = pairs == nearest
    if tol_angle > 0.0:
        ang_rot = np.arctan2(rotated[:, 1], rotated[:, 0])
        ang_match = np.arctan2(x1[pairs, 1], x1[pairs, 0])
        wrapped = np.angle(np.exp(1j * (ang_rot - ang_match)))
        hits = hits | (np.abs(wrapped) <= tol_angle)
    return float(np.mean(hits))


@dataclass
class MatchingReport:
    """Density-weighted pairing vs. the Euclidean assignment baseline."""

    pairs: np.ndarray
    accuracy_vs_truth: float
    baseline_pairs: np.ndarray
    baseline_accuracy: float
    snap_pairs: np.ndarray
    collisions: int
    result: TransportResult = field(repr=False, default=None)


def transport_matching(x0, x1, model, cfg: TransportConfig,
                       delta_z: float | None = None,
                       init_pairing: str = "index") -> MatchingReport:
    """Run the transport solver and pair each source to a target sample.

    init_pairing chooses the index correspondence used for the solver's
    matched initialization: "index" takes the clouds in storage order;
    "chord-action" pre-assigns with the straight-chord action costs, which
    avoids heavily crossed starts when storage order is arbitrary.

    The bijective pairing assigns converged right endpoints to target
    samples exactly (so it is always a permutation); raw nearest-sample
    snapping is also reported, with its collision count.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    m = x0.shape[0]
    if init_pairing == "chord-action":
        perm0 = action_assignment(x0, x1, model, alpha=cfg.alpha,
                                  n_cheb=2, max_iters=0)
    elif init_pairing == "action":
        perm0 = action_assignment(x0, x1, model, alpha=cfg.alpha)
    elif init_pairing == "index":
        perm0 = np.arange(m)
    else:
        raise ValueError(f"unknown init_pairing: {init_pairing!r}")
    x1_work = x1[perm0]

    result = solve_transport(x0, x1_work, model, cfg)
    w1 = result.endpoints1
    pairs = perm0[euclidean_assignment(w1, x1_work)]
    diff = w1[:, None, :] - x1_work[None, :, :]
    snap = perm0[np.argmin(np.sum(diff * diff, axis=-1), axis=1)]
    collisions = int(snap.size - np.unique(snap).size)
    baseline = euclidean_assignment(x0, x1)
    acc = base_acc = float("nan")
    if delta_z is not None:
        acc = rotation_truth_accuracy(x0, x1, delta_z, pairs)
        base_acc = rotation_truth_accuracy(x0, x1, delta_z, baseline)
    return MatchingReport(pairs=pairs, accuracy_vs_truth=acc,
                          baseline_pairs=baseline, baseline_accuracy=base_acc,
                          snap_pairs=snap, collisions=collisions,
                          result=result)


def bimodal_clustering_scene(seed: int, n_per_cloud: int = 30,
                             mode_x: float = 0.8, mode_sigma: float = 0.5,
                             cloud_dy: float = 0.9, cloud_sigma: float = 0.15):
    """Two-mode ambient density with four clouds, two per mode.

    The horizontal gap between modes (2 * mode_x) is smaller than the
    vertical within-mode separation (2 * cloud_dy), so plain Euclidean
    transport groups clouds across the density valley while the
    action-based cost groups them within each mode.
    """
    model = GaussianMixture([(0.5, (-mode_x, 0.0), mode_sigma),
                             (0.5, (mode_x, 0.0), mode_sigma)])
    centers = [(-mode_x, cloud_dy), (-mode_x, -cloud_dy),
               (mode_x, cloud_dy), (mode_x, -cloud_dy)]
    clouds = []
    for i, center in enumerate(centers):
        rng = rng_for(seed, f"bimodal-cloud:{i}")
        clouds.append(np.asarray(center, dtype=float)
                      + cloud_sigma * rng.standard_normal((n_per_cloud, 2)))
    intended = np.array([0, 0, 1, 1])
    return model, clouds, intended


def ring_matching_scene(seed: int, m: int = 30, sigma: float = 0.15,
                        z0: float = 0.0, delta_z: float = 2.0 * np.pi / 3.0,
                        shuffle: bool = True):
    """Source cloud on the ring at angle z0 and its rigid rotation.

    The target cloud is stored in seeded shuffled order so the solver's
    index-matched initialization carries no ground-truth information;
    truth[i] is the storage index of the rotated copy of x0[i].
    """
    rng = rng_for(seed, "ring-match-samples")
    center = np.array([np.cos(z0), np.sin(z0)])
    x0 = center + sigma * rng.standard_normal((m, 2))
    x1 = x0 @ rotation_matrix(delta_z).T
    if shuffle:
        perm = rng_for(seed, "ring-match-shuffle").permutation(m)
        x1 = x1[perm]
        truth = np.empty(m, dtype=int)
        truth[perm] = np.arange(m)
    else:
        truth = np.arange(m)
    return x0, x1, truth
