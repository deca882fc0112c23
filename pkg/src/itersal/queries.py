"""Query-region selection.

Two strategies feed the graph scorer: clustering superpixels by color with
an optimum-path forest and using each boundary-touching cluster's border
members as background queries (maps combined by boundary connectivity), or
thresholding a saliency map at the mean of the per-superpixel means.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .color import QuantizedPalette, color_distance
from .graph import BACKGROUND, FOREGROUND, QuerySet, build_graph, vertex_saliency, weight_edges
from .superpixels import SuperpixelSegmentation


class QuerySelectionError(ValueError):
    """No query region could be selected; callers may fall back."""


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray  # (n_superpixels,) cluster id, contiguous from 0
    n_clusters: int
    k: int              # neighbor count the cut measure selected

    def members(self, g: int) -> np.ndarray:
        return np.nonzero(self.labels == g)[0]

    def border_members(self, g: int, seg: SuperpixelSegmentation) -> np.ndarray:
        ids = self.members(g)
        return ids[seg.touches_border[ids]]


def _knn_table(dist: np.ndarray, k: int):
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    kd = np.take_along_axis(dist, order, axis=1)
    return order, kd


def _density(kd: np.ndarray) -> np.ndarray:
    """Gaussian kernel density over the k nearest neighbors.

    Bandwidth is each sample's own max k-NN distance; samples whose
    neighbors all coincide get the maximal density 1.
    """
    sigma = kd.max(axis=1)
    dens = np.empty(kd.shape[0])
    for i in range(kd.shape[0]):
        if sigma[i] <= 0.0:
            dens[i] = 1.0
        else:
            dens[i] = np.mean(np.exp(-(kd[i] ** 2) / (2.0 * sigma[i] ** 2)))
    return dens


def _symmetric_adjacency(knn: np.ndarray) -> list[np.ndarray]:
    n = knn.shape[0]
    adj = [set() for _ in range(n)]
    for i in range(n):
        for j in knn[i]:
            adj[i].add(int(j))
            adj[int(j)].add(i)
    return [np.array(sorted(a), dtype=np.int64) for a in adj]


def _opf_forest(density: np.ndarray, adjacency: list[np.ndarray]) -> np.ndarray:
    """Optimum-path forest on min-density path values; roots are density maxima.

    Pops are ordered by (density desc, conquered-before-pristine, index): a
    sample joins the first popped neighbor with density >= its own, otherwise
    it becomes a new root.
    """
    n = density.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    heap = [(-density[i], 1, i) for i in range(n)]
    heapq.heapify(heap)
    n_clusters = 0
    while heap:
        _, _, s = heapq.heappop(heap)
        if done[s]:
            continue
        done[s] = True
        if labels[s] == -1:
            labels[s] = n_clusters
            n_clusters += 1
        for t in adjacency[s]:
            if done[t] or labels[t] != -1:
                continue
            if density[s] >= density[t]:
                labels[t] = labels[s]
                heapq.heappush(heap, (-density[t], 0, t))
    return labels


def _normalized_cut(similarity: np.ndarray, labels: np.ndarray) -> float:
    """Sum over clusters of external / (external + internal) similarity mass.

    Measured on the complete similarity graph so that fragmenting similar
    samples is penalized (a cut restricted to k-NN arcs scores 0 for any
    partition into graph components, which would always favor tiny k).
    """
    cut = 0.0
    for g in range(labels.max() + 1):
        inside = labels == g
        internal = similarity[np.ix_(inside, inside)].sum() / 2.0
        external = similarity[np.ix_(inside, ~inside)].sum()
        total = internal + external
        if total > 0.0:
            cut += external / total
    return cut


def opf_cluster(seg: SuperpixelSegmentation) -> ClusterAssignment:
    """Cluster superpixels by mean color; the cluster count falls out of the forest.

    k is swept over [1, ceil(sqrt(N))] and the partition with the smallest
    normalized cut wins (ties to the smallest k).
    """
    n = seg.n
    if n < 2:
        raise ValueError("clustering needs at least 2 superpixels")
    x = seg.mean_color
    dist = color_distance(x[:, None, :], x[None, :, :])
    np.fill_diagonal(dist, np.inf)
    k_max = min(int(np.ceil(np.sqrt(n))), n - 1)

    # one similarity graph for the cut measure, scaled by the neighborhood
    # radius at the largest k so partitions compete on equal footing
    _, kd_max = _knn_table(dist, k_max)
    scale = float(kd_max.max(axis=1).mean())
    if scale > 0.0:
        similarity = np.exp(-dist**2 / (2.0 * scale * scale))
    else:
        similarity = np.ones_like(dist)
    np.fill_diagonal(similarity, 0.0)

    best = None
    for k in range(1, k_max + 1):
        knn, kd = _knn_table(dist, k)
        adjacency = _symmetric_adjacency(knn)
        labels = _opf_forest(_density(kd), adjacency)
        cut = _normalized_cut(similarity, labels)
        if best is None or cut < best[0]:
            best = (cut, k, labels)
    _, k, labels = best
    return ClusterAssignment(labels=labels, n_clusters=int(labels.max()) + 1, k=k)


def border_query_saliency(
    seg: SuperpixelSegmentation,
    palette: QuantizedPalette,
    clusters: ClusterAssignment,
    psi: float,
    sigma_s: float,
    similarity: np.ndarray | None = None,
) -> np.ndarray:
    """One map per boundary-touching cluster (its border members as background
    queries), averaged with boundary-connectivity weights |B_g| / |S_g|."""
    combined = np.zeros(seg.n)
    total_weight = 0.0
    for g in range(clusters.n_clusters):
        border = clusters.border_members(g, seg)
        if border.size == 0:
            continue
        w_g = border.size / clusters.members(g).size
        graph = build_graph(seg, QuerySet(border, BACKGROUND), psi)
        graph = weight_edges(graph, seg, palette, sigma_s, similarity=similarity)
        combined += w_g * vertex_saliency(graph)
        total_weight += w_g
    if total_weight == 0.0:
        raise QuerySelectionError("no cluster touches the image border")
    return seg.rasterize(combined / total_weight)


def saliency_queries(
    seg: SuperpixelSegmentation,
    saliency_map: np.ndarray,
    polarity: str = FOREGROUND,
) -> QuerySet:
    """Superpixels whose mean saliency is strictly above (foreground) or
    below (background) the mean of the per-superpixel means.

    Each query's importance is its margin past the threshold times its pixel
    count: regions that barely cleared the threshold contribute almost
    nothing, and the vote is per pixel rather than per superpixel. Both
    factors matter. The mean threshold necessarily admits the background's
    noise tail, and margins keep that tail quiet; object-seeded
    segmentations concentrate the object into a handful of large
    superpixels, and without size weighting those few would be outvoted by
    sheer background superpixel count.
    """
    means = seg.superpixel_means(np.asarray(saliency_map, dtype=np.float64))
    mu = means.mean()
    if polarity == FOREGROUND:
        members = np.nonzero(means > mu)[0]
        weights = (means[members] - mu) * seg.sizes[members]
    elif polarity == BACKGROUND:
        members = np.nonzero(means < mu)[0]
        weights = (mu - means[members]) * seg.sizes[members]
    else:
        raise ValueError(f"unknown polarity: {polarity!r}")
    if members.size == 0:
        raise QuerySelectionError(f"no superpixel passes the {polarity} threshold")
    return QuerySet(members, polarity, weights=weights)
