"""Command-line front end.

Subcommands: saliency (single image), batch (directory of images),
evaluate (maps vs ground truth to CSV), superpixels (label map export),
priors (heat-map dump of each enabled prior). Exit codes: 1 unreadable
input, 2 invalid configuration, 3 pipeline failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import image_io, metrics
from .color import rgb_to_lab
from .pipeline import ConfigError, PipelineConfig, PipelineError, PRESET_NAMES, \
    compute_prior_stack, load_config, load_preset, run
from .priors import ScribbleSet, scribbles_from_mask
from .superpixels import segment
from .color import quantize

EXIT_BAD_INPUT = 1
EXIT_BAD_CONFIG = 2
EXIT_PIPELINE = 3

IMAGE_EXTENSIONS = (".png", ".ppm", ".pgm", ".pnm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_config(args) -> PipelineConfig:
    if getattr(args, "preset", None):
        return load_preset(args.preset)
    if args.config:
        return load_config(args.config)
    return PipelineConfig()


def _load_image(path: str | Path):
    raster = image_io.read_image(path)
    if raster.dtype == np.uint16:
        raster = (raster / 257.0).round().astype(np.uint8)
    return rgb_to_lab(raster)


def _load_scribbles(path: str | Path | None) -> ScribbleSet | None:
    if path is None:
        return None
    return scribbles_from_mask(image_io.read_image(path))


def _worker_count(requested: int) -> int:
    cap = os.environ.get("ITSELF_THREADS")
    if cap:
        return max(1, min(requested, int(cap)))
    return max(1, requested)


def cmd_saliency(args) -> int:
    try:
        config = _load_config(args)
    except (ConfigError, OSError) as exc:
        return _fail(EXIT_BAD_CONFIG, str(exc))
    try:
        image = _load_image(args.image)
        scribbles = _load_scribbles(args.scribbles)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_BAD_INPUT, str(exc))
    try:
        trace = run(image, config, scribbles)
    except (PipelineError, ValueError) as exc:
        return _fail(EXIT_PIPELINE, str(exc))
    image_io.write_saliency(args.out, trace.final)
    if args.trace:
        _dump_trace(Path(args.trace), image, trace)
    return 0


def _dump_trace(out_dir: Path, image, trace) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, it in enumerate(trace.iterations, start=1):
        image_io.write_saliency(out_dir / f"iter_{i:02d}_saliency.png", it.saliency)
        overlay = image_io.boundary_overlay(image.norm, it.segmentation.boundary_mask)
        image_io.write_image(out_dir / f"iter_{i:02d}_superpixels.png", overlay)
        for layer in it.priors:
            image_io.write_image(
                out_dir / f"iter_{i:02d}_prior_{layer.name}.png",
                image_io.heatmap(layer.raster),
            )


def _batch_one(task) -> tuple[str, str | None]:
    image_path, out_path, config, scribble_path = task
    try:
        image = _load_image(image_path)
        scribbles = _load_scribbles(scribble_path)
        trace = run(image, config, scribbles)
        image_io.write_saliency(out_path, trace.final)
        return image_path, None
    except Exception as exc:  # per-image failures must not kill the batch
        return image_path, f"{type(exc).__name__}: {exc}"


def _list_images(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir()
                  if p.suffix.lower() in IMAGE_EXTENSIONS and p.is_file())


def cmd_batch(args) -> int:
    try:
        config = _load_config(args)
    except (ConfigError, OSError) as exc:
        return _fail(EXIT_BAD_CONFIG, str(exc))
    images_dir = Path(args.images)
    if not images_dir.is_dir():
        return _fail(EXIT_BAD_INPUT, f"not a directory: {images_dir}")
    images = _list_images(images_dir)
    if not images:
        return _fail(EXIT_BAD_INPUT, f"no images found in {images_dir}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = []
    for img in images:
        scr = None
        if args.scribbles:
            candidate = Path(args.scribbles) / f"{img.stem}.png"
            if not candidate.exists():
                candidate = Path(args.scribbles) / f"{img.stem}.pgm"
            scr = str(candidate) if candidate.exists() else None
        tasks.append((str(img), str(out_dir / f"{img.stem}.png"), config, scr))

    jobs = _worker_count(args.jobs)
    failures = []
    if jobs == 1:
        results = map(_batch_one, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        results = pool.map(_batch_one, tasks)
    for path, err in results:
        if err is not None:
            print(f"failed: {path}: {err}", file=sys.stderr)
            failures.append(path)
    if jobs != 1:
        pool.shutdown()
    if failures:
        return _fail(EXIT_PIPELINE, f"{len(failures)} of {len(tasks)} images failed")
    return 0


def cmd_evaluate(args) -> int:
    maps_dir = Path(args.maps)
    gt_dir = Path(args.gt)
    if not maps_dir.is_dir() or not gt_dir.is_dir():
        return _fail(EXIT_BAD_INPUT, "maps and gt must be directories")
    map_files = _list_images(maps_dir)
    if not map_files:
        return _fail(EXIT_BAD_INPUT, f"no maps found in {maps_dir}")
    reports = []
    for map_file in map_files:
        gt_file = None
        for ext in IMAGE_EXTENSIONS:
            candidate = gt_dir / f"{map_file.stem}{ext}"
            if candidate.exists():
                gt_file = candidate
                break
        if gt_file is None:
            print(f"skipping {map_file.name}: no ground truth", file=sys.stderr)
            continue
        sal = image_io.read_saliency(map_file)
        gt = image_io.read_mask(gt_file)
        reports.append(metrics.evaluate_pair(sal, gt, name=map_file.name))
    if not reports:
        return _fail(EXIT_BAD_INPUT, "no map/ground-truth pairs found")
    metrics.write_csv(args.out, reports)
    agg = metrics.aggregate(reports)
    print(f"{len(reports)} images: wf={agg.wf:.4f} mae={agg.mae:.4f} br={agg.boundary_recall:.4f}")
    return 0


def cmd_superpixels(args) -> int:
    try:
        config = _load_config(args)
    except (ConfigError, OSError) as exc:
        return _fail(EXIT_BAD_CONFIG, str(exc))
    try:
        image = _load_image(args.image)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_BAD_INPUT, str(exc))
    try:
        uniform = np.full((image.height, image.width), 0.5)
        seg = segment(image, uniform, config.superpixel_params(config.n))
    except ValueError as exc:
        return _fail(EXIT_PIPELINE, str(exc))
    out = Path(args.out)
    image_io.write_label_map(out, seg.labels)
    overlay = image_io.boundary_overlay(image.norm, seg.boundary_mask)
    image_io.write_image(out.with_suffix(".overlay.png"), overlay)
    return 0


def cmd_priors(args) -> int:
    try:
        config = _load_config(args)
    except (ConfigError, OSError) as exc:
        return _fail(EXIT_BAD_CONFIG, str(exc))
    try:
        image = _load_image(args.image)
        scribbles = _load_scribbles(args.scribbles)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_BAD_INPUT, str(exc))
    try:
        uniform = np.full((image.height, image.width), 0.5)
        seg = segment(image, uniform, config.superpixel_params(config.n))
        palette = quantize(image, config.bins_per_channel)
        layers = compute_prior_stack(image, seg, palette, config, None, scribbles)
    except (PipelineError, ValueError) as exc:
        return _fail(EXIT_PIPELINE, str(exc))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for layer in layers:
        image_io.write_image(out_dir / f"prior_{layer.name}.png", image_io.heatmap(layer.raster))
    print(f"wrote {len(layers)} prior maps to {out_dir}")
    return 0


def _add_config_args(parser) -> None:
    parser.add_argument("--config", help="pipeline config file (key=value lines)")
    parser.add_argument("--preset", choices=PRESET_NAMES, help="named preset configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itersal",
                                     description="Iterative superpixel-based saliency estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("saliency", help="estimate a saliency map for one image")
    p.add_argument("image")
    _add_config_args(p)
    p.add_argument("--scribbles", help="indexed scribble mask (0 none, 1 background, 2 object)")
    p.add_argument("--out", required=True, help="output map (.png or .pgm)")
    p.add_argument("--trace", help="directory for per-iteration debug output")
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("batch", help="run every image in a directory")
    p.add_argument("images", help="directory of input images")
    _add_config_args(p)
    p.add_argument("--scribbles", help="directory of scribble masks (stem-matched)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (ITSELF_THREADS caps)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("evaluate", help="score maps against ground-truth masks")
    p.add_argument("maps", help="directory of saliency maps")
    p.add_argument("gt", help="directory of ground-truth masks (stem-matched)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("superpixels", help="export a superpixel segmentation")
    p.add_argument("image")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output 16-bit label PGM")
    p.set_defaults(func=cmd_superpixels)

    p = sub.add_parser("priors", help="dump heat maps of each enabled prior")
    p.add_argument("image")
    _add_config_args(p)
    p.add_argument("--scribbles", help="indexed scribble mask")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_priors)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception:  # anything uncaught is a pipeline failure, not a crash
        traceback.print_exc()
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
