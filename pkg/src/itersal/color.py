"""CIELAB image representation, color quantization and map normalization.

All downstream modules consume images in L*a*b* with each channel rescaled
to [0, 1] (L/100, (a+128)/255, (b+128)/255) so that one Gaussian bandwidth
is meaningful across channels. Inter-color distances are Euclidean in that
normalized space and divided by sqrt(#channels) to land in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# sRGB (D65, 2 degree observer) linear-RGB -> XYZ matrix and white point.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE = np.array([0.95047, 1.00000, 1.08883])

# CIE f(t) breakpoints, delta = 6/29.
_DELTA3 = (6.0 / 29.0) ** 3
_KAPPA = (29.0 / 6.0) ** 2 / 3.0  # 1/(3*delta^2)


@dataclass(frozen=True)
class LabImage:
    """Pixel grid in L*a*b* (3 channels) or L only (grayscale inputs).

    ``lab`` holds raw values (L in [0,100], a/b roughly [-128,127]);
    ``norm`` holds the per-channel [0,1] rescaling used everywhere else.
    """

    lab: np.ndarray   # (H, W, C) float64, raw Lab values
    norm: np.ndarray  # (H, W, C) float64, channels rescaled to [0, 1]

    @property
    def height(self) -> int:
        return self.lab.shape[0]

    @property
    def width(self) -> int:
        return self.lab.shape[1]

    @property
    def channels(self) -> int:
        return self.lab.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.lab.shape[0] * self.lab.shape[1]

    def features(self) -> np.ndarray:
        """Normalized per-pixel feature rows, shape (H*W, C)."""
        return self.norm.reshape(-1, self.channels)

    def raw_features(self) -> np.ndarray:
        """Raw Lab per-pixel feature rows, shape (H*W, C)."""
        return self.lab.reshape(-1, self.channels)


@dataclass(frozen=True)
class QuantizedPalette:
    """Uniform binning of the normalized Lab cube restricted to occupied bins."""

    bins_per_channel: int
    colors: np.ndarray           # (K, C) normalized Lab bin centers
    pixel_to_color: np.ndarray   # (H, W) int32 palette index per pixel
    global_frequency: np.ndarray  # (K,) float64, sums to 1

    @property
    def n_colors(self) -> int:
        return self.colors.shape[0]

    def color_distances(self) -> np.ndarray:
        """Pairwise palette distances, Euclidean in normalized Lab / sqrt(C)."""
        return color_distance(self.colors[:, None, :], self.colors[None, :, :])


def srgb_linearize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def srgb_delinearize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.0031308, v * 12.92, 1.055 * np.clip(v, 0, None) ** (1 / 2.4) - 0.055)


def _f_cie(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA3, np.cbrt(t), _KAPPA * t + 4.0 / 29.0)


def _f_cie_inv(ft: np.ndarray) -> np.ndarray:
    return np.where(ft > 6.0 / 29.0, ft**3, (ft - 4.0 / 29.0) / _KAPPA)


def rgb_to_lab(image: np.ndarray) -> LabImage:
    """Convert an 8-bit RGB (H,W,3) or gray (H,W) raster to a LabImage.

    Grayscale rasters keep a single channel: L = 100 * linearized gray.
    """
    image = np.asarray(image)
    if image.size == 0:
        raise ValueError("zero-sized image")
    if image.ndim == 2:
        lin = srgb_linearize(image.astype(np.float64) / 255.0)
        lab = (100.0 * lin)[..., None]
        norm = lab / 100.0
        return LabImage(lab=lab, norm=norm)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H,W) or (H,W,3) raster, got {image.shape}")

    lin = srgb_linearize(image.astype(np.float64) / 255.0)
    xyz = lin @ _RGB_TO_XYZ.T
    f = _f_cie(xyz / _WHITE)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return LabImage(lab=lab, norm=normalize_lab(lab))


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_lab's 3-channel path, back to 8-bit RGB."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_f_cie_inv(fx), _f_cie_inv(fy), _f_cie_inv(fz)], axis=-1) * _WHITE
    rgb = srgb_delinearize(xyz @ _XYZ_TO_RGB.T)
    return np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)


def normalize_lab(lab: np.ndarray) -> np.ndarray:
    """Rescale raw Lab channels to [0,1]: L/100, (a+128)/255, (b+128)/255."""
    lab = np.asarray(lab, dtype=np.float64)
    out = np.empty_like(lab)
    out[..., 0] = lab[..., 0] / 100.0
    if lab.shape[-1] == 3:
        out[..., 1] = (lab[..., 1] + 128.0) / 255.0
        out[..., 2] = (lab[..., 2] + 128.0) / 255.0
    return np.clip(out, 0.0, 1.0)


def color_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance between normalized Lab colors, scaled into [0,1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.sqrt(np.sum((a - b) ** 2, axis=-1) / a.shape[-1])


def quantize(image: LabImage, bins_per_channel: int = 8) -> QuantizedPalette:
    """Uniformly bin the normalized channels; empty bins are dropped.

    p(c) = |pixels of color c| / |pixels|.
    """
    if bins_per_channel < 2:
        raise ValueError("bins_per_channel must be >= 2")
    b = bins_per_channel
    idx = np.minimum((image.norm * b).astype(np.int64), b - 1)
    flat = idx.reshape(-1, image.channels)
    code = flat[:, 0]
    for c in range(1, image.channels):
        code = code * b + flat[:, c]
    occupied, pixel_codes, counts = np.unique(code, return_inverse=True, return_counts=True)

    centers = np.empty((occupied.size, image.channels))
    rem = occupied.copy()
    for c in range(image.channels - 1, -1, -1):
        centers[:, c] = (rem % b + 0.5) / b
        rem //= b

    freq = counts.astype(np.float64) / code.size
    return QuantizedPalette(
        bins_per_channel=b,
        colors=centers,
        pixel_to_color=pixel_codes.reshape(image.height, image.width).astype(np.int32),
        global_frequency=freq,
    )


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Affine rescale to [0,1]; constant inputs map to 0.5 everywhere.

    Spans at rounding-noise scale count as constant, otherwise stretching
    them would blow 1e-16 arithmetic jitter up to full range.
    """
    values = np.asarray(values, dtype=np.float64)
    lo = values.min()
    hi = values.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi), abs(lo)):
        return np.full_like(values, 0.5)
    return (values - lo) / (hi - lo)
