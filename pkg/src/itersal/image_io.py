"""Raster input/output: PNG (via Pillow), native binary PPM/PGM, map exports.

Saliency maps are written as 8-bit grayscale with value = round(255 * s);
label maps as 16-bit PGM (maxval 65535). All writes go through a
write-then-rename so failures never leave partial files behind.
"""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .color import lab_to_rgb


def _atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_pnm(data: bytes) -> np.ndarray:
    m = re.match(rb"(P[56])\s", data)
    if not m:
        raise ValueError("not a binary PPM/PGM file")
    kind = m.group(1)
    # header tokens: width height maxval, comments (#...) allowed between them
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    channels = 3 if kind == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    count = width * height * channels
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    raster = raster.reshape(height, width, channels)
    return raster[:, :, 0] if channels == 1 else raster


def read_image(path: str | Path) -> np.ndarray:
    """Load a raster as uint8 RGB (H,W,3) or gray (H,W); uint16 PGM kept as-is."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm", ".pnm"):
        arr = _read_pnm(path.read_bytes())
        if arr.dtype.kind == "u" and arr.dtype.itemsize == 2:
            return arr.astype(np.uint16)
        return arr.astype(np.uint8)
    with Image.open(path) as img:
        if img.mode in ("L", "I;16", "I"):
            return np.asarray(img.convert("L"))
        return np.asarray(img.convert("RGB"))


def write_pnm(path: str | Path, arr: np.ndarray, maxval: int = 255) -> None:
    arr = np.asarray(arr)
    if arr.ndim == 2:
        magic = b"P5"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode array of shape {arr.shape} as PNM")
    header = b"%s\n%d %d\n%d\n" % (magic, arr.shape[1], arr.shape[0], maxval)
    if maxval > 255:
        body = arr.astype(">u2").tobytes()
    else:
        body = arr.astype(np.uint8).tobytes()
    _atomic_write(Path(path), header + body)


def write_image(path: str | Path, arr: np.ndarray) -> None:
    """Write uint8 gray or RGB; format chosen by extension (.pgm/.ppm/.png/...)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".ppm", ".pnm"):
        write_pnm(path, arr)
        return
    buf = Image.fromarray(np.asarray(arr))
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    os.close(fd)
    try:
        buf.save(tmp, format=Image.registered_extensions().get(suffix, "PNG"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_saliency(path: str | Path, saliency: np.ndarray) -> None:
    """Saliency map in [0,1] to 8-bit grayscale, value = round(255 * s)."""
    arr = np.clip(np.round(np.asarray(saliency, dtype=np.float64) * 255.0), 0, 255)
    write_image(path, arr.astype(np.uint8))


def read_saliency(path: str | Path) -> np.ndarray:
    arr = read_image(path)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    maxv = 65535.0 if arr.dtype.itemsize == 2 else 255.0
    return arr.astype(np.float64) / maxv


def read_mask(path: str | Path, threshold: int = 128) -> np.ndarray:
    """Ground-truth mask, binarized at `threshold` from 8-bit input."""
    arr = read_image(path)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    return arr >= threshold


def write_label_map(path: str | Path, labels: np.ndarray) -> None:
    """Label map as 16-bit PGM (P5, maxval 65535)."""
    labels = np.asarray(labels)
    if labels.max() > 65535:
        raise ValueError("more than 65536 labels cannot be stored in 16-bit PGM")
    write_pnm(path, labels.astype(np.uint16), maxval=65535)


def read_label_map(path: str | Path) -> np.ndarray:
    return read_image(path).astype(np.int32)


def boundary_overlay(image_lab_norm: np.ndarray, boundary_mask: np.ndarray) -> np.ndarray:
    """RGB render of the image with superpixel boundaries painted green."""
    if image_lab_norm.shape[-1] == 1:
        gray = np.clip(image_lab_norm[..., 0] * 255.0, 0, 255).astype(np.uint8)
        rgb = np.stack([gray] * 3, axis=-1)
    else:
        lab = np.empty_like(image_lab_norm)
        lab[..., 0] = image_lab_norm[..., 0] * 100.0
        lab[..., 1] = image_lab_norm[..., 1] * 255.0 - 128.0
        lab[..., 2] = image_lab_norm[..., 2] * 255.0 - 128.0
        rgb = lab_to_rgb(lab)
    rgb = rgb.copy()
    rgb[boundary_mask] = (0, 255, 0)
    return rgb


def heatmap(values: np.ndarray) -> np.ndarray:
    """Map [0,1] values to a cold-to-hot RGB ramp (blue-cyan-yellow-red)."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    stops = np.array(
        [(0, 0, 128), (0, 64, 255), (0, 255, 255), (255, 255, 0), (255, 32, 0)],
        dtype=np.float64,
    )
    pos = v * (len(stops) - 1)
    lo = np.minimum(pos.astype(int), len(stops) - 2)
    frac = (pos - lo)[..., None]
    rgb = stops[lo] * (1 - frac) + stops[lo + 1] * frac
    return np.round(rgb).astype(np.uint8)
