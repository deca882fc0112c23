"""Superpixel graph scoring.

Vertices are superpixels. Spatial edges (8-adjacency plus its one-hop
transitive extension) are undirected; query edges are directed pairs
(scored vertex <- query) so each vertex is scored against the query set,
queries themselves against the other queries. Base weights are psi for
query edges and 1 - psi for spatial ones; weighting multiplies them by a
histogram color similarity. Vertex saliency averages, per class, the
similarity to foreground queries, the dissimilarity to background queries
and the dissimilarity to the spatial neighborhood.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .color import QuantizedPalette, minmax_normalize
from .superpixels import SuperpixelSegmentation

EDGE_ADJACENCY = 0
EDGE_TRANSITIVE = 1
EDGE_QUERY = 2

FOREGROUND = "foreground"
BACKGROUND = "background"


@dataclass(frozen=True)
class QuerySet:
    """Query superpixels with an importance weight each.

    Weights let a noisy selection stay usable: queries picked off a saliency
    map carry their threshold margin times their pixel count, so
    barely-above-threshold regions influence the score far less than
    confident ones and a few large object superpixels are not outvoted by
    many small background ones. Default weight is 1.
    """

    members: np.ndarray  # superpixel ids
    polarity: str
    weights: np.ndarray | None = None

    def __post_init__(self):
        members = np.asarray(self.members, dtype=np.int64)
        if self.weights is None:
            weights = np.ones(members.size)
        else:
            weights = np.asarray(self.weights, dtype=np.float64)
            if weights.shape != members.shape:
                raise ValueError("weights must match members")
            if (weights < 0).any():
                raise ValueError("weights must be non-negative")
        members, first = np.unique(members, return_index=True)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", weights[first])
        if self.polarity not in (FOREGROUND, BACKGROUND):
            raise ValueError(f"unknown polarity: {self.polarity!r}")
        if self.members.size == 0:
            raise ValueError("query set must be non-empty")


@dataclass(frozen=True)
class SuperpixelGraph:
    n_vertices: int
    # spatial edges, undirected, u < v
    su: np.ndarray
    sv: np.ndarray
    s_class: np.ndarray   # EDGE_ADJACENCY or EDGE_TRANSITIVE
    s_weight: np.ndarray
    s_base: np.ndarray
    # query edges, directed: vertex qsrc scored against query qdst
    qsrc: np.ndarray
    qdst: np.ndarray
    q_weight: np.ndarray
    q_base: np.ndarray
    q_foreground: np.ndarray
    q_importance: np.ndarray  # per edge, the query endpoint's weight
    psi: float
    fg_weight: np.ndarray    # (n,) per-vertex importance as a foreground query (0 if none)
    bg_weight: np.ndarray    # (n,) same for background membership
    self_similarity: np.ndarray | None = None  # (n,) set by weight_edges

    @property
    def is_fg_query(self) -> np.ndarray:
        return self.fg_weight > 0

    @property
    def is_bg_query(self) -> np.ndarray:
        return self.bg_weight > 0

    @property
    def n_edges(self) -> int:
        return self.su.size + self.qsrc.size

    def dump(self, path) -> None:
        """One edge per line: endpoints, class tag, weight (debug text format)."""
        names = {EDGE_ADJACENCY: "A", EDGE_TRANSITIVE: "T"}
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(self.su.size):
                fh.write(f"{self.su[i]} {self.sv[i]} {names[int(self.s_class[i])]} "
                         f"{self.s_weight[i]:.12g}\n")
            for i in range(self.qsrc.size):
                tag = "QF" if self.q_foreground[i] else "Q"
                fh.write(f"{self.qsrc[i]} {self.qdst[i]} {tag} {self.q_weight[i]:.12g}\n")


def build_graph(
    seg: SuperpixelSegmentation,
    queries: QuerySet | Sequence[QuerySet],
    psi: float,
) -> SuperpixelGraph:
    """Assemble spatial and query edges with their base weights."""
    if isinstance(queries, QuerySet):
        queries = [queries]
    if not queries:
        raise ValueError("at least one query set is required")
    n = seg.n
    for qs in queries:
        if qs.members.min() < 0 or qs.members.max() >= n:
            raise ValueError("query ids out of range")

    adj = seg.adjacency_pairs()
    adj_mat = np.zeros((n, n), dtype=bool)
    adj_mat[adj[:, 0], adj[:, 1]] = True
    adj_mat |= adj_mat.T
    hop2 = (adj_mat.astype(np.int32) @ adj_mat.astype(np.int32)) > 0
    hop2 &= ~adj_mat
    np.fill_diagonal(hop2, False)
    ti, tj = np.nonzero(np.triu(hop2, k=1))

    su = np.concatenate([adj[:, 0], ti])
    sv = np.concatenate([adj[:, 1], tj])
    s_class = np.concatenate([
        np.full(len(adj), EDGE_ADJACENCY, dtype=np.uint8),
        np.full(ti.size, EDGE_TRANSITIVE, dtype=np.uint8),
    ])
    s_base = np.full(su.size, 1.0 - float(psi))

    rows = []
    importances = []
    fg_weight = np.zeros(n)
    bg_weight = np.zeros(n)
    for qs in queries:
        fg = qs.polarity == FOREGROUND
        member_weight = fg_weight if fg else bg_weight
        np.maximum.at(member_weight, qs.members, qs.weights)
        for q, imp in zip(qs.members, qs.weights):
            src = np.delete(np.arange(n), q)
            rows.append(np.stack([src, np.full(n - 1, q), np.full(n - 1, fg, dtype=np.int64)],
                                 axis=1))
            importances.append(np.full(n - 1, imp))
    qrows, keep = np.unique(np.concatenate(rows, axis=0), axis=0, return_index=True)
    q_importance = np.concatenate(importances)[keep]
    q_base = np.full(qrows.shape[0], float(psi))

    return SuperpixelGraph(
        n_vertices=n,
        su=su, sv=sv, s_class=s_class, s_weight=s_base.copy(), s_base=s_base,
        qsrc=qrows[:, 0], qdst=qrows[:, 1], q_weight=q_base.copy(), q_base=q_base,
        q_foreground=qrows[:, 2].astype(bool), q_importance=q_importance,
        psi=float(psi), fg_weight=fg_weight, bg_weight=bg_weight,
    )


def color_similarity_matrix(
    seg: SuperpixelSegmentation,
    palette: QuantizedPalette,
    sigma_s: float,
) -> np.ndarray:
    """(n, n) matrix of sum_ij exp(-d(c_i,c_j)/sigma_s) p(c_i|S) p(c_j|R)."""
    hist = seg.color_histograms(palette)
    kernel = np.exp(-palette.color_distances() / float(sigma_s))
    return hist @ kernel @ hist.T


def weight_edges(
    graph: SuperpixelGraph,
    seg: SuperpixelSegmentation,
    palette: QuantizedPalette,
    sigma_s: float,
    similarity: np.ndarray | None = None,
) -> SuperpixelGraph:
    """Scale every edge weight by the color similarity of its endpoints."""
    if similarity is None:
        similarity = color_similarity_matrix(seg, palette, sigma_s)
    return replace(
        graph,
        s_weight=graph.s_base * similarity[graph.su, graph.sv],
        q_weight=graph.q_base * similarity[graph.qsrc, graph.qdst],
        self_similarity=np.diagonal(similarity).copy(),
    )


def vertex_saliency(graph: SuperpixelGraph) -> np.ndarray:
    """Importance-weighted mean query affinity per vertex, min-max normalized.

    Each query edge contributes its weight (scaled color similarity) for
    foreground queries and base - weight (scaled dissimilarity) for
    background queries; contributions are averaged with the queries'
    importance weights, so low-confidence queries barely count. A query
    vertex belongs to the set it is scored against: it also contributes its
    own self-similarity at its own importance. Without that term a lone
    distinct object, having no same-color peers among the queries, ranks
    last and gets erased. Vertices with no query edges score 0 before
    normalization.

    Spatial (adjacency, transitive) edges shape the graph and keep their
    weights for inspection and other strategies but do not enter this
    score: summing them rewards either background homogeneity or object
    halos, both of which feed back into the query threshold and degrade
    the iteration (halos grow, then invert the map).
    """
    n = graph.n_vertices
    q_contrib = np.where(graph.q_foreground, graph.q_weight, graph.q_base - graph.q_weight)
    q_sum = np.zeros(n)
    q_cnt = np.zeros(n)
    np.add.at(q_sum, graph.qsrc, graph.q_importance * q_contrib)
    np.add.at(q_cnt, graph.qsrc, graph.q_importance)

    self_sim = graph.self_similarity if graph.self_similarity is not None else np.ones(n)
    q_sum += graph.fg_weight * graph.psi * self_sim
    q_cnt += graph.fg_weight
    q_sum += graph.bg_weight * graph.psi * (1.0 - self_sim)
    q_cnt += graph.bg_weight

    scores = np.divide(q_sum, q_cnt, out=np.zeros(n), where=q_cnt > 0)
    return minmax_normalize(scores)


def apply_prior(
    vs: np.ndarray,
    prior: np.ndarray,
    seg: SuperpixelSegmentation,
) -> np.ndarray:
    """Multiply vertex saliency by the prior score and paint onto the pixel grid."""
    combined = minmax_normalize(np.asarray(vs, dtype=np.float64) * np.asarray(prior, dtype=np.float64))
    return seg.rasterize(combined)
