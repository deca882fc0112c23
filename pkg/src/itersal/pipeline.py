"""The iterative saliency/superpixel loop.

Each outer iteration segments the image steered by the current object map,
recomputes the enabled priors on the fresh segmentation, fuses them in a
persistent automaton, scores the superpixel graph against the iteration's
query set and stores the resulting map. The first map only seeds queries for
iteration two; the final output fuses the remaining maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .automaton import LayeredAutomaton, integrate
from .color import LabImage, QuantizedPalette, minmax_normalize, quantize
from .graph import BACKGROUND, FOREGROUND, QuerySet, apply_prior, build_graph, \
    color_similarity_matrix, vertex_saliency, weight_edges
from .priors import BLACK, RED_YELLOW, WHITE, PriorLayer, ScribbleSet, center_prior, \
    channel_combination_prior, color_uniqueness_prior, ellipse_prior, focus_prior, \
    saliency_color_prior, scribble_prior
from .queries import QuerySelectionError, border_query_saliency, opf_cluster, saliency_queries
from .superpixels import SuperpixelParams, SuperpixelSegmentation, next_scale, segment

PRIOR_NAMES = (
    "center",
    "color_uniqueness",
    "red_yellow",
    "white",
    "black",
    "saliency_color",
    "focus",
    "ellipse",
    "scribble",
)
QUERY_STRATEGIES = ("border", "prior", "scribble")
PRESET_NAMES = ("ecssd", "dut_omron", "icoseg", "msra10k", "lungs", "parasites")


class ConfigError(ValueError):
    """Malformed or contradictory pipeline configuration."""


@dataclass(frozen=True)
class PipelineConfig:
    n: int = 200
    alpha: float = 0.8
    beta: float = 12.0
    gamma: float = 2.0
    kappa: float = 1.0
    inner_iters: int = 3
    psi: float = 0.5
    sigma_s: float = 0.4
    lam: float = 0.01            # config key: lambda
    ca_steps: int = 1
    iterations: int = 8
    n_object: float = 3
    n_object_mode: str = "absolute"
    sigma1: float = 0.2
    sigma2: float = 0.2
    sigma3: float = 0.2
    sigma3_prime: float = 0.2
    sigma4: float = 0.5
    sigma5: float = 1.0
    sigma_scribble: float = 0.2
    s0: float = 1500.0
    s1: float = 5000.0
    priors: tuple[str, ...] = ("center", "color_uniqueness", "red_yellow", "white",
                               "focus", "saliency_color")
    query_strategy: str = "border"
    bins_per_channel: int = 8

    def __post_init__(self):
        if self.iterations < 2:
            raise ConfigError("iterations must be >= 2 (the first map is discarded)")
        for name in ("sigma1", "sigma2", "sigma3", "sigma3_prime", "sigma4", "sigma5",
                     "sigma_scribble", "sigma_s"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.query_strategy not in QUERY_STRATEGIES:
            raise ConfigError(f"unknown query_strategy: {self.query_strategy!r}")
        for p in self.priors:
            if p not in PRIOR_NAMES:
                raise ConfigError(f"unknown prior: {p!r}")
        if not 0.0 < self.lam <= 1.0:
            raise ConfigError("lambda must be in (0, 1]")
        if not 0.0 <= self.psi <= 1.0:
            raise ConfigError("psi must be in [0, 1]")

    def superpixel_params(self, n: int) -> SuperpixelParams:
        return SuperpixelParams(
            n=n, alpha=self.alpha, beta=self.beta, gamma=self.gamma,
            inner_iters=self.inner_iters, kappa=self.kappa,
            n_object=self.n_object, n_object_mode=self.n_object_mode,
        )


_CONFIG_KEYS = {
    "n": ("n", int),
    "alpha": ("alpha", float),
    "beta": ("beta", float),
    "gamma": ("gamma", float),
    "kappa": ("kappa", float),
    "inner_iters": ("inner_iters", int),
    "psi": ("psi", float),
    "sigma_s": ("sigma_s", float),
    "lambda": ("lam", float),
    "ca_steps": ("ca_steps", int),
    "iterations": ("iterations", int),
    "n_object": ("n_object", float),
    "n_object_mode": ("n_object_mode", str),
    "sigma1": ("sigma1", float),
    "sigma2": ("sigma2", float),
    "sigma3": ("sigma3", float),
    "sigma3_prime": ("sigma3_prime", float),
    "sigma4": ("sigma4", float),
    "sigma5": ("sigma5", float),
    "sigma_scribble": ("sigma_scribble", float),
    "s0": ("s0", float),
    "s1": ("s1", float),
    "priors": ("priors", None),
    "query_strategy": ("query_strategy", str),
}


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Flat key=value format, # starts a comment, unknown keys are rejected."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, cast = _CONFIG_KEYS[key]
        if key == "priors":
            values[attr] = tuple(p.strip() for p in value.split(",") if p.strip())
        else:
            try:
                values[attr] = cast(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
    if base is None:
        base = PipelineConfig()
    return replace(base, **values)


def load_config(path: str | Path) -> PipelineConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def load_preset(name: str) -> PipelineConfig:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    text = resources.files("itersal.presets").joinpath(f"{name}.cfg").read_text(encoding="utf-8")
    return parse_config(text)


def format_config(config: PipelineConfig) -> str:
    lines = []
    reverse = {attr: key for key, (attr, _) in _CONFIG_KEYS.items()}
    for f in fields(config):
        if f.name == "bins_per_channel":
            continue
        value = getattr(config, f.name)
        if f.name == "priors":
            value = ",".join(value)
        lines.append(f"{reverse[f.name]}={value}")
    return "\n".join(lines) + "\n"


@dataclass
class IterationTrace:
    n_superpixels: int
    segmentation: SuperpixelSegmentation
    priors: list[PriorLayer]
    queries: QuerySet | None  # None when the border multi-map route was used
    saliency: np.ndarray


@dataclass
class RunTrace:
    iterations: list[IterationTrace] = field(default_factory=list)
    final: np.ndarray | None = None


class PipelineError(RuntimeError):
    """Unrecoverable failure inside a pipeline run."""


def compute_prior_stack(
    image: LabImage,
    seg: SuperpixelSegmentation,
    palette: QuantizedPalette,
    config: PipelineConfig,
    previous_map: np.ndarray | None,
    scribbles: ScribbleSet | None,
) -> list[PriorLayer]:
    """Evaluate the enabled priors on one segmentation, in config order."""
    layers: list[PriorLayer] = []
    for name in config.priors:
        if name == "center":
            scores = center_prior(seg, config.sigma1)
        elif name == "color_uniqueness":
            scores = color_uniqueness_prior(seg, palette, config.sigma2)
        elif name == "red_yellow":
            scores = channel_combination_prior(seg, palette, RED_YELLOW, config.sigma3)
        elif name == "white":
            scores = channel_combination_prior(seg, palette, WHITE, config.sigma3_prime)
        elif name == "black":
            scores = channel_combination_prior(seg, palette, BLACK, config.sigma3_prime)
        elif name == "saliency_color":
            if previous_map is None:
                continue  # needs a map from an earlier iteration
            scores = saliency_color_prior(seg, palette, previous_map)
        elif name == "focus":
            scores = focus_prior(image, seg, config.sigma4)
        elif name == "ellipse":
            scores = ellipse_prior(seg, config.sigma5, config.s0, config.s1)
        elif name == "scribble":
            if scribbles is None:
                raise PipelineError("scribble prior enabled but no scribbles given")
            raster = scribble_prior((image.height, image.width), scribbles, config.sigma_scribble)
            layers.append(PriorLayer(name, seg.superpixel_means(raster), raster))
            continue
        else:  # pragma: no cover - guarded by config validation
            raise ConfigError(f"unknown prior: {name!r}")
        layers.append(PriorLayer(name, scores, seg.rasterize(scores)))
    return layers


def _scribble_queries(seg: SuperpixelSegmentation, scribbles: ScribbleSet) -> QuerySet:
    """Superpixels the user scribbled on, taken at full confidence.

    Object scribbles give foreground queries; with only background scribbles
    the loop starts from background queries instead.
    """
    if scribbles.object_pixels.size:
        members = np.unique(
            seg.labels[scribbles.object_pixels[:, 0], scribbles.object_pixels[:, 1]])
        return QuerySet(members, FOREGROUND)
    members = np.unique(
        seg.labels[scribbles.background_pixels[:, 0], scribbles.background_pixels[:, 1]])
    return QuerySet(members, BACKGROUND)


def _remap_queries(previous: QuerySet, prev_seg: SuperpixelSegmentation,
                   seg: SuperpixelSegmentation) -> QuerySet | None:
    """Carry a query set across segmentations via pixel overlap."""
    mask = np.isin(prev_seg.labels, previous.members)
    overlap = seg.superpixel_means(mask.astype(np.float64))
    members = np.nonzero(overlap > 0.5)[0]
    if members.size == 0:
        members = np.nonzero(overlap > 0.0)[0]
    if members.size == 0:
        return None
    return QuerySet(members, previous.polarity)


def run(
    image: LabImage,
    config: PipelineConfig,
    scribbles: ScribbleSet | None = None,
) -> RunTrace:
    """Full multi-iteration run; see the module docstring for the loop shape."""
    if config.query_strategy == "scribble" and scribbles is None:
        raise PipelineError("scribble query strategy requires scribbles")

    palette = quantize(image, config.bins_per_channel)
    uniform = np.full((image.height, image.width), 0.5)
    prior_automaton = LayeredAutomaton(config.lam)
    trace = RunTrace()

    n_t = config.n
    previous_map: np.ndarray | None = None
    previous_queries: QuerySet | None = None
    previous_seg: SuperpixelSegmentation | None = None

    for t in range(1, config.iterations + 1):
        if t == 1:
            if config.priors:
                # Priors need superpixels, so iteration 1 bootstraps them from
                # a segmentation of the plain image (uniform object map). The
                # bootstrap fusion is a throwaway automaton instance.
                boot_seg = segment(image, uniform, config.superpixel_params(n_t))
                boot_layers = compute_prior_stack(image, boot_seg, palette, config, None, scribbles)
                if boot_layers:
                    object_map = integrate([l.raster for l in boot_layers],
                                           config.lam, config.ca_steps)
                else:
                    object_map = uniform
            else:
                object_map = uniform
        else:
            object_map = previous_map

        seg = segment(image, object_map, config.superpixel_params(n_t))
        similarity = color_similarity_matrix(seg, palette, config.sigma_s)

        layers = compute_prior_stack(image, seg, palette, config, previous_map, scribbles)
        if layers:
            for layer in layers:
                prior_automaton.ensure_layer(layer.name, layer.raster)
            prior_automaton.step(config.ca_steps)
            prior_raster = prior_automaton.finalize()
        else:
            prior_raster = uniform
        prior_scores = seg.superpixel_means(prior_raster)

        queries: QuerySet | None = None
        if t == 1 and config.query_strategy == "border":
            clusters = opf_cluster(seg)
            try:
                border_map = border_query_saliency(
                    seg, palette, clusters, config.psi, config.sigma_s, similarity=similarity)
            except QuerySelectionError as exc:
                raise PipelineError(f"border query selection failed: {exc}") from exc
            vs = minmax_normalize(seg.superpixel_means(border_map))
        else:
            if t == 1:
                if config.query_strategy == "scribble":
                    queries = _scribble_queries(seg, scribbles)
                else:
                    try:
                        queries = saliency_queries(seg, prior_raster, FOREGROUND)
                    except QuerySelectionError as exc:
                        raise PipelineError(
                            f"query selection failed at iteration 1: {exc}") from exc
            else:
                try:
                    queries = saliency_queries(seg, previous_map, FOREGROUND)
                except QuerySelectionError:
                    if previous_queries is not None and previous_seg is not None:
                        queries = _remap_queries(previous_queries, previous_seg, seg)
                    if queries is None:
                        raise PipelineError(f"query selection failed at iteration {t} "
                                            "with no previous query set to fall back on")
            graph = build_graph(seg, queries, config.psi)
            graph = weight_edges(graph, seg, palette, config.sigma_s, similarity=similarity)
            vs = vertex_saliency(graph)

        saliency = apply_prior(vs, prior_scores, seg)
        trace.iterations.append(IterationTrace(
            n_superpixels=n_t, segmentation=seg, priors=layers,
            queries=queries, saliency=saliency,
        ))

        previous_map = saliency
        previous_seg = seg
        if queries is not None:
            previous_queries = queries
        n_t = next_scale(n_t, config.kappa)

    kept = [it.saliency for it in trace.iterations[1:]]
    trace.final = minmax_normalize(integrate(kept, config.lam, config.ca_steps))
    return trace
