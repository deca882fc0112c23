"""Object-aware superpixel segmentation.

Seeds are sampled from a saliency map by ordered extraction with local
priority suppression, trees are grown by a multi-source best-first search
whose path cost mixes color and saliency contrast against the tree root,
and seeds are re-centered on the feature-space medoid between rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _forest
from .color import LabImage

_NEIGH8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(frozen=True)
class SeedSet:
    coords: np.ndarray        # (n, 2) int64 (row, col)
    object_flags: np.ndarray  # (n,) bool

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def pixel_indices(self, width: int) -> np.ndarray:
        return self.coords[:, 0] * width + self.coords[:, 1]


@dataclass(frozen=True)
class SuperpixelParams:
    """Knobs of one segmentation pass plus the cross-iteration scale factor."""

    n: int
    alpha: float = 0.8         # size regularity
    beta: float = 12.0         # border adherence exponent
    gamma: float = 2.0         # saliency influence
    inner_iters: int = 3       # delineation/recenter rounds
    kappa: float = 1.0         # superpixel-count multiplier per outer iteration
    n_object: float = 3        # object seed count (or fraction, see mode)
    n_object_mode: str = "absolute"  # "absolute" | "percentage"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError("kappa must be in (0, 1]")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("alpha, beta, gamma must be >= 0")
        if self.n_object_mode not in ("absolute", "percentage"):
            raise ValueError(f"unknown n_object_mode: {self.n_object_mode!r}")

    def resolve_n_object(self, n: int) -> int:
        if self.n_object_mode == "percentage":
            n_o = math.ceil(n * float(self.n_object))
        else:
            n_o = int(self.n_object)
        return min(n_o, n)


@dataclass
class SuperpixelSegmentation:
    """Label map plus the per-superpixel statistics the rest of the pipeline reads."""

    labels: np.ndarray          # (H, W) int32
    n: int
    sizes: np.ndarray           # (n,) int64
    mean_color: np.ndarray      # (n, C) normalized Lab
    center: np.ndarray          # (n, 2) mean (row, col)
    touches_border: np.ndarray  # (n,) bool
    boundary_mask: np.ndarray   # (H, W) bool; pixel has an 8-neighbor with another label
    seeds: SeedSet | None = None
    cost: np.ndarray | None = None  # (H, W) path cost, when grown by delineation
    pred: np.ndarray | None = None  # (H, W) predecessor pixel index, -1 at roots
    _adjacency: np.ndarray | None = field(default=None, repr=False)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def rasterize(self, scores: np.ndarray) -> np.ndarray:
        """Paint per-superpixel scores back onto the pixel grid."""
        return np.asarray(scores, dtype=np.float64)[self.labels]

    def superpixel_means(self, pixel_map: np.ndarray) -> np.ndarray:
        """Mean of a per-pixel map within each superpixel."""
        sums = np.bincount(self.labels.ravel(), weights=pixel_map.ravel(), minlength=self.n)
        return sums / self.sizes

    def color_histograms(self, palette) -> np.ndarray:
        """(n, K) row-stochastic histogram over the palette per superpixel."""
        k = palette.n_colors
        idx = self.labels.astype(np.int64).ravel() * k + palette.pixel_to_color.ravel()
        counts = np.bincount(idx, minlength=self.n * k).reshape(self.n, k)
        return counts / self.sizes[:, None]

    def adjacency_pairs(self) -> np.ndarray:
        """Unique (i, j) i<j pairs of 8-adjacent superpixels."""
        if self._adjacency is None:
            lab = self.labels
            pairs = []
            for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
                a = lab[max(0, -dy):lab.shape[0] - max(0, dy), max(0, -dx):lab.shape[1] - max(0, dx)]
                b = lab[max(0, dy):lab.shape[0] + min(0, dy), max(0, dx):lab.shape[1] + min(0, dx)]
                diff = a != b
                pairs.append(np.stack([a[diff], b[diff]], axis=1))
            pairs = np.concatenate(pairs, axis=0).astype(np.int64)
            lo = pairs.min(axis=1)
            hi = pairs.max(axis=1)
            self._adjacency = np.unique(lo * self.n + hi)
        codes = self._adjacency
        return np.stack([codes // self.n, codes % self.n], axis=1)


def build_segmentation(
    labels: np.ndarray,
    image: LabImage,
    seeds: SeedSet | None = None,
    cost: np.ndarray | None = None,
    pred: np.ndarray | None = None,
) -> SuperpixelSegmentation:
    """Assemble the per-superpixel statistics for an arbitrary label map."""
    labels = np.asarray(labels, dtype=np.int32)
    if labels.shape != (image.height, image.width):
        raise ValueError("label map dimensions do not match the image")
    n = int(labels.max()) + 1
    flat = labels.ravel().astype(np.int64)
    sizes = np.bincount(flat, minlength=n)
    if (sizes == 0).any():
        raise ValueError("every label in [0, n) must occur at least once")

    feats = image.features()
    mean_color = np.stack(
        [np.bincount(flat, weights=feats[:, c], minlength=n) for c in range(image.channels)],
        axis=1,
    ) / sizes[:, None]

    ys, xs = np.divmod(np.arange(flat.size), labels.shape[1])
    center = np.stack(
        [np.bincount(flat, weights=ys, minlength=n), np.bincount(flat, weights=xs, minlength=n)],
        axis=1,
    ) / sizes[:, None]

    boundary = np.zeros(labels.shape, dtype=bool)
    for dy, dx in _NEIGH8:
        a = labels[max(0, -dy):labels.shape[0] - max(0, dy), max(0, -dx):labels.shape[1] - max(0, dx)]
        b = labels[max(0, dy):labels.shape[0] + min(0, dy), max(0, dx):labels.shape[1] + min(0, dx)]
        boundary[max(0, -dy):labels.shape[0] - max(0, dy), max(0, -dx):labels.shape[1] - max(0, dx)] |= a != b

    touches = np.zeros(n, dtype=bool)
    rim = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    touches[np.unique(rim)] = True

    return SuperpixelSegmentation(
        labels=labels, n=n, sizes=sizes, mean_color=mean_color, center=center,
        touches_border=touches, boundary_mask=boundary, seeds=seeds, cost=cost, pred=pred,
    )


def _neighborhood_mean(values: np.ndarray) -> np.ndarray:
    """Mean over the 8-neighborhood including the pixel, border-aware."""
    kernel = np.ones((3, 3))
    total = ndimage.correlate(values, kernel, mode="constant", cval=0.0)
    count = ndimage.correlate(np.ones_like(values), kernel, mode="constant", cval=0.0)
    return total / count


def sample_seeds(object_map: np.ndarray, n: int, n_object: int) -> SeedSet:
    """Draw n seeds by ordered extraction from neighborhood-mean priorities.

    n_object seeds come from the map itself, the rest from the inverted map.
    After each pick every pixel's priority is multiplied by
    (1 - exp(-d^2 / R^2)) with R = sqrt(|P| / (n * pi)), so attractiveness
    drops steeply near the new seed and is untouched far away. The factor has
    no hard cutoff: on plateau maps a windowed penalty degenerates into
    raster-order marching (all seeds end up in the first rows), while the
    smooth product behaves like farthest-point sampling.
    """
    object_map = np.asarray(object_map, dtype=np.float64)
    height, width = object_map.shape
    n_pix = height * width
    if n > n_pix:
        raise ValueError(f"cannot place {n} seeds on {n_pix} pixels")
    if n_object > n:
        raise ValueError("n_object must be <= n")

    r2 = n_pix / (n * math.pi)
    taken = np.zeros((height, width), dtype=bool)
    coords = np.empty((n, 2), dtype=np.int64)
    flags = np.zeros(n, dtype=bool)
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]

    def draw(priorities: np.ndarray, count: int, offset: int) -> None:
        pr = priorities.copy()
        pr[taken] = -np.inf
        for i in range(count):
            flat = int(np.argmax(pr))
            y, x = divmod(flat, width)
            coords[offset + i] = (y, x)
            taken[y, x] = True
            d2 = (ys - y) ** 2 + (xs - x) ** 2
            pr *= 1.0 - np.exp(-d2 / r2)
            pr[y, x] = -np.inf

    if n_object > 0:
        draw(_neighborhood_mean(object_map), n_object, 0)
        flags[:n_object] = True
    if n - n_object > 0:
        draw(_neighborhood_mean(1.0 - object_map), n - n_object, n_object)

    return SeedSet(coords=coords, object_flags=flags)


def delineate(
    image: LabImage,
    object_map: np.ndarray,
    seeds: SeedSet,
    params: SuperpixelParams,
) -> SuperpixelSegmentation:
    """One forest growth: every seed becomes the root of one superpixel."""
    object_map = np.asarray(object_map, dtype=np.float64)
    if object_map.shape != (image.height, image.width):
        raise ValueError("object map dimensions do not match the image")
    pix = seeds.pixel_indices(image.width)
    if np.unique(pix).size != pix.size:
        raise ValueError("duplicate seed coordinates")

    cost, root, pred = _forest.run_delineation(
        image.raw_features(), object_map.ravel(), pix.astype(np.int64),
        image.height, image.width, params.alpha, params.beta, params.gamma,
    )
    labels = root.reshape(image.height, image.width).astype(np.int32)
    return build_segmentation(
        labels, image, seeds=seeds,
        cost=cost.reshape(labels.shape), pred=pred.reshape(labels.shape),
    )


def recompute_seeds(seg: SuperpixelSegmentation, image: LabImage) -> SeedSet:
    """Move each seed to the member pixel closest to its superpixel mean color.

    Distances (and the mean) are in raw Lab, matching the delineation cost.
    """
    feats = image.raw_features()
    flat = seg.labels.ravel().astype(np.int64)
    sums = np.stack([np.bincount(flat, weights=feats[:, c], minlength=seg.n)
                     for c in range(feats.shape[1])], axis=1)
    mean_raw = sums / seg.sizes[:, None]
    dist = np.sum((feats - mean_raw[flat]) ** 2, axis=1)
    idx = np.arange(flat.size)
    order = np.lexsort((idx, dist, flat))  # by label, then distance, then raster order
    first = np.searchsorted(flat[order], np.arange(seg.n))
    picks = order[first]
    coords = np.stack(np.divmod(picks, seg.width), axis=1)
    if seg.seeds is not None:
        flags = seg.seeds.object_flags.copy()
    else:
        flags = np.zeros(seg.n, dtype=bool)
    return SeedSet(coords=coords, object_flags=flags)


def segment(
    image: LabImage,
    object_map: np.ndarray,
    params: SuperpixelParams,
) -> SuperpixelSegmentation:
    """Sample seeds once, then alternate delineation and seed re-centering."""
    n_object = params.resolve_n_object(params.n)
    seeds = sample_seeds(object_map, params.n, n_object)
    seg = delineate(image, object_map, seeds, params)
    for _ in range(params.inner_iters - 1):
        seeds = recompute_seeds(seg, image)
        seg = delineate(image, object_map, seeds, params)
    return seg


def next_scale(n_current: int, kappa: float) -> int:
    """Superpixel count for the next outer iteration, clamped below at 2."""
    return max(2, int(round(n_current * kappa)))
