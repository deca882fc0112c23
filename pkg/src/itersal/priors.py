"""Top-down prior models.

Each prior maps a segmentation (plus auxiliary inputs) to one score per
superpixel in [0, 1]; rasterized copies feed the fusion automaton. The
scribble prior is the exception: it is defined per pixel and reduced to
superpixels only for bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .color import LabImage, QuantizedPalette, color_distance, minmax_normalize
from .superpixels import SuperpixelSegmentation


@dataclass(frozen=True)
class PriorLayer:
    name: str
    scores: np.ndarray  # (n,) per-superpixel
    raster: np.ndarray  # (H, W)


@dataclass(frozen=True)
class EllipseFit:
    center: np.ndarray       # (row, col)
    orientation: float       # radians between major axis and the image y-axis, in [0, pi)
    semi_major: float
    semi_minor: float
    f1: np.ndarray
    f2: np.ndarray
    anisotropy: float
    degenerate: bool = False


@dataclass(frozen=True)
class ScribbleSet:
    object_pixels: np.ndarray      # (m, 2) int (row, col); may be empty
    background_pixels: np.ndarray  # (k, 2) int (row, col); may be empty

    def __post_init__(self):
        obj = np.asarray(self.object_pixels, dtype=np.int64).reshape(-1, 2)
        bg = np.asarray(self.background_pixels, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "object_pixels", obj)
        object.__setattr__(self, "background_pixels", bg)
        if obj.size and bg.size:
            both = set(map(tuple, obj)) & set(map(tuple, bg))
            if both:
                raise ValueError(f"scribble sets overlap at {sorted(both)[:3]}")

    @property
    def empty(self) -> bool:
        return self.object_pixels.size == 0 and self.background_pixels.size == 0


def scribbles_from_mask(mask: np.ndarray) -> ScribbleSet:
    """Indexed mask: 0 = unlabeled, 1 = background scribble, 2 = object scribble."""
    mask = np.asarray(mask)
    return ScribbleSet(
        object_pixels=np.argwhere(mask == 2),
        background_pixels=np.argwhere(mask == 1),
    )


def _half_diagonal(height: int, width: int) -> float:
    return math.hypot(height - 1, width - 1) / 2.0


def center_prior(seg: SuperpixelSegmentation, sigma1: float) -> np.ndarray:
    """Gaussian of the mean member-pixel distance to the image center."""
    ys, xs = np.divmod(np.arange(seg.labels.size), seg.width)
    cy, cx = seg.height // 2, seg.width // 2
    dist = np.hypot(ys - cy, xs - cx)
    mean_dist = seg.superpixel_means(dist.reshape(seg.labels.shape))
    cd = mean_dist / _half_diagonal(seg.height, seg.width)
    return np.exp(-cd / sigma1**2)


def color_uniqueness_prior(
    seg: SuperpixelSegmentation,
    palette: QuantizedPalette,
    sigma2: float,
) -> np.ndarray:
    """Rare palette colors score high; scores are smoothed across similar colors.

    Uniqueness is exp(-p(c) / sigma^2) and the smoothing average is weighted
    by exp(-d(c_i, c_j) / sigma^2), normalized over the palette.
    """
    us = np.exp(-palette.global_frequency / sigma2**2)
    ws = np.exp(-palette.color_distances() / sigma2**2)
    us_smooth = (ws @ us) / ws.sum(axis=1)
    hist = seg.color_histograms(palette)
    n_occupied = np.maximum((hist > 0).sum(axis=1), 1)
    scores = (hist @ us_smooth) / n_occupied
    return minmax_normalize(scores)


@dataclass(frozen=True)
class ChannelCombo:
    """Linear scoring of normalized Lab channels: sum_ch w_ch * |ch - offset_ch|."""

    name: str
    weights: tuple[float, float, float]
    offsets: tuple[float, float, float]
    zero_border: bool = False


RED_YELLOW = ChannelCombo("red_yellow", (0.0, 1.0, 1.0), (0.0, 0.0, 0.0))
WHITE = ChannelCombo("white", (1.0, -1.0, -1.0), (0.0, 0.5, 0.5))
BLACK = ChannelCombo("black", (1.0, -1.0, -1.0), (1.0, 0.5, 0.5), zero_border=True)

_NEUTRAL_AB = 128.0 / 255.0  # normalized value of a = b = 0


def _full_channels(colors: np.ndarray) -> np.ndarray:
    """Palette colors as (K, 3); grayscale palettes get neutral a/b channels."""
    if colors.shape[1] == 3:
        return colors
    out = np.full((colors.shape[0], 3), _NEUTRAL_AB)
    out[:, 0] = colors[:, 0]
    return out


def channel_combination_prior(
    seg: SuperpixelSegmentation,
    palette: QuantizedPalette,
    combo: ChannelCombo,
    sigma3: float,
) -> np.ndarray:
    """Histogram-weighted per-color exp score of a channel combination.

    The black combination additionally zeroes superpixels touching the image
    border (dark plate rims should not count as objects).
    """
    chans = _full_channels(palette.colors)
    exponent = np.zeros(palette.n_colors)
    for c in range(3):
        exponent += combo.weights[c] * np.abs(chans[:, c] - combo.offsets[c])
    color_score = np.exp(exponent / sigma3**2)
    hist = seg.color_histograms(palette)
    scores = minmax_normalize(hist @ color_score)
    if combo.zero_border:
        scores = scores.copy()
        scores[seg.touches_border] = 0.0
    return scores


def saliency_color_prior(
    seg: SuperpixelSegmentation,
    palette: QuantizedPalette,
    previous: np.ndarray,
) -> np.ndarray:
    """Score a superpixel by how salient its colors are on the previous map."""
    pix = palette.pixel_to_color.ravel()
    color_sal = np.bincount(pix, weights=np.asarray(previous, dtype=np.float64).ravel(),
                            minlength=palette.n_colors)
    color_sal /= np.bincount(pix, minlength=palette.n_colors)
    occupied = seg.color_histograms(palette) > 0
    scores = (occupied @ color_sal) / np.maximum(occupied.sum(axis=1), 1)
    return minmax_normalize(scores)


def gradient_magnitude(image: LabImage) -> np.ndarray:
    """Per-pixel max color distance to the 4-neighbors, in [0, 1]."""
    norm = image.norm
    grad = np.zeros((image.height, image.width))
    for dy, dx in ((0, 1), (1, 0), (0, -1), (-1, 0)):
        sl_a = (slice(max(0, -dy), norm.shape[0] - max(0, dy)),
                slice(max(0, -dx), norm.shape[1] - max(0, dx)))
        sl_b = (slice(max(0, dy), norm.shape[0] + min(0, dy)),
                slice(max(0, dx), norm.shape[1] + min(0, dx)))
        d = color_distance(norm[sl_a], norm[sl_b])
        np.maximum(grad[sl_a], d, out=grad[sl_a])
    return grad


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Classic between-class variance maximization over a binned histogram."""
    values = np.asarray(values, dtype=np.float64).ravel()
    vmin, vmax = values.min(), values.max()
    if vmax <= vmin:
        return float(vmax)
    hist, edges = np.histogram(values, bins=bins, range=(vmin, vmax))
    centers = (edges[:-1] + edges[1:]) / 2.0
    w = hist.astype(np.float64) / hist.sum()
    omega0 = np.cumsum(w)
    mu = np.cumsum(w * centers)
    mu_total = mu[-1]
    omega1 = 1.0 - omega0
    valid = (omega0 > 0) & (omega1 > 0)
    between = np.zeros(bins)
    between[valid] = (mu_total * omega0[valid] - mu[valid]) ** 2 / (omega0[valid] * omega1[valid])
    return float(centers[int(np.argmax(between))])


def focus_prior(image: LabImage, seg: SuperpixelSegmentation, sigma4: float) -> np.ndarray:
    """Fraction of superpixel boundary pixels that lie on sharp image edges."""
    grad = gradient_magnitude(image)
    edges = grad > otsu_threshold(grad)
    flat = seg.labels.ravel()
    boundary = seg.boundary_mask.ravel()
    n_boundary = np.bincount(flat[boundary], minlength=seg.n)
    n_edge = np.bincount(flat[boundary & edges.ravel()], minlength=seg.n)
    fs = np.divide(n_edge, n_boundary, out=np.zeros(seg.n), where=n_boundary > 0)
    return 1.0 - np.exp(-fs / sigma4**2)


def fit_ellipse(seg: SuperpixelSegmentation, superpixel_id: int) -> EllipseFit:
    """Moment-matched ellipse of a superpixel's pixel coordinates.

    Semi-axes are 2 * sqrt(eigenvalue) of the second-order central moment
    matrix; superpixels below 5 pixels or with no minor-axis spread come back
    flagged degenerate.
    """
    coords = np.argwhere(seg.labels == superpixel_id).astype(np.float64)
    return _fit_ellipse_coords(coords)


def _fit_ellipse_coords(coords: np.ndarray) -> EllipseFit:
    center = coords.mean(axis=0)
    if coords.shape[0] < 5:
        return EllipseFit(center=center, orientation=0.0, semi_major=0.0, semi_minor=0.0,
                          f1=center, f2=center, anisotropy=1.0, degenerate=True)
    centered = coords - center
    cov = centered.T @ centered / coords.shape[0]
    eigval, eigvec = np.linalg.eigh(cov)  # ascending
    lam_minor, lam_major = eigval[0], eigval[1]
    if lam_minor <= 1e-12:
        return EllipseFit(center=center, orientation=0.0, semi_major=0.0, semi_minor=0.0,
                          f1=center, f2=center, anisotropy=1.0, degenerate=True)
    major_dir = eigvec[:, 1]  # (dy, dx)
    a = 2.0 * math.sqrt(lam_major)
    b = 2.0 * math.sqrt(lam_minor)
    orientation = math.atan2(major_dir[1], major_dir[0]) % math.pi
    c = math.sqrt(max(a * a - b * b, 0.0))
    f1 = center + c * major_dir
    f2 = center - c * major_dir
    return EllipseFit(center=center, orientation=orientation, semi_major=a, semi_minor=b,
                      f1=f1, f2=f2, anisotropy=a / b)


def ellipse_match(seg: SuperpixelSegmentation, superpixel_id: int,
                  fit: EllipseFit | None = None) -> float:
    """Fraction of member pixels inside the fitted ellipse (0 for degenerate fits)."""
    if fit is None:
        fit = fit_ellipse(seg, superpixel_id)
    if fit.degenerate:
        return 0.0
    coords = np.argwhere(seg.labels == superpixel_id).astype(np.float64)
    inside = (
        np.hypot(coords[:, 0] - fit.f1[0], coords[:, 1] - fit.f1[1])
        + np.hypot(coords[:, 0] - fit.f2[0], coords[:, 1] - fit.f2[1])
    ) < 2.0 * fit.semi_major
    return float(inside.mean())


def _grouped_coords(seg: SuperpixelSegmentation):
    flat = seg.labels.ravel()
    order = np.argsort(flat, kind="stable")
    starts = np.searchsorted(flat[order], np.arange(seg.n + 1))
    coords = np.stack(np.divmod(order, seg.width), axis=1).astype(np.float64)
    for i in range(seg.n):
        yield coords[starts[i]:starts[i + 1]]


def ellipse_prior(
    seg: SuperpixelSegmentation,
    sigma5: float,
    s0: float,
    s1: float,
) -> np.ndarray:
    """Elliptical, size-bounded superpixels score high.

    Superpixels outside the (s0, s1) pixel-count window are demoted to the
    global minimum score before normalization.
    """
    em = np.empty(seg.n)
    for i, coords in enumerate(_grouped_coords(seg)):
        fit = _fit_ellipse_coords(coords)
        if fit.degenerate:
            em[i] = 0.0
            continue
        inside = (
            np.hypot(coords[:, 0] - fit.f1[0], coords[:, 1] - fit.f1[1])
            + np.hypot(coords[:, 0] - fit.f2[0], coords[:, 1] - fit.f2[1])
        ) < 2.0 * fit.semi_major
        em[i] = inside.mean()
    ep = 1.0 - np.exp(-em / sigma5**2)
    in_window = (seg.sizes > s0) & (seg.sizes < s1)
    ep_filtered = np.where(in_window, ep, ep.min())
    return minmax_normalize(ep_filtered)


def scribble_prior(
    shape: tuple[int, int],
    scribbles: ScribbleSet,
    sigma_scr: float,
) -> np.ndarray:
    """Pixel map bright near object scribbles and far from background ones.

    Distances are Euclidean distance transforms normalized by the image
    diagonal: exp(-d_obj^2/sigma^2) * (1 - exp(-d_bg^2/sigma^2)), each factor
    present only when the corresponding scribble set is.
    """
    if scribbles.empty:
        raise ValueError("at least one scribble set must be non-empty")
    height, width = shape
    for pts in (scribbles.object_pixels, scribbles.background_pixels):
        if pts.size and (pts.min() < 0 or pts[:, 0].max() >= height or pts[:, 1].max() >= width):
            raise ValueError("scribble coordinates out of image bounds")
    diag = math.hypot(height - 1, width - 1)
    score = np.ones((height, width))
    if scribbles.object_pixels.size:
        mask = np.ones((height, width), dtype=bool)
        mask[scribbles.object_pixels[:, 0], scribbles.object_pixels[:, 1]] = False
        d_obj = ndimage.distance_transform_edt(mask) / diag
        score = np.exp(-d_obj**2 / sigma_scr**2)
    if scribbles.background_pixels.size:
        mask = np.ones((height, width), dtype=bool)
        mask[scribbles.background_pixels[:, 0], scribbles.background_pixels[:, 1]] = False
        d_bg = ndimage.distance_transform_edt(mask) / diag
        score = score * (1.0 - np.exp(-d_bg**2 / sigma_scr**2))
    return minmax_normalize(score)
