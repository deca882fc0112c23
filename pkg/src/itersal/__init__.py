"""Iterative superpixel-based saliency estimation.

The estimation loop alternates object-aware superpixel segmentation and
superpixel-graph saliency scoring, steered by pluggable prior maps and query
strategies and fused by a cellular automaton.
"""

from .automaton import AutomatonGrid, LayeredAutomaton, finalize, init_grid, integrate, step
from .color import (
    LabImage,
    QuantizedPalette,
    color_distance,
    lab_to_rgb,
    minmax_normalize,
    quantize,
    rgb_to_lab,
)
from .graph import (
    BACKGROUND,
    FOREGROUND,
    QuerySet,
    SuperpixelGraph,
    apply_prior,
    build_graph,
    vertex_saliency,
    weight_edges,
)
from .metrics import (
    MetricReport,
    WeightedScores,
    boundary_recall,
    evaluate_pair,
    mae,
    threshold_by_mean,
    weighted_prf,
)
from .pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    RunTrace,
    load_config,
    load_preset,
    parse_config,
    run,
)
from .priors import (
    BLACK,
    RED_YELLOW,
    WHITE,
    ChannelCombo,
    EllipseFit,
    PriorLayer,
    ScribbleSet,
    center_prior,
    channel_combination_prior,
    color_uniqueness_prior,
    ellipse_prior,
    fit_ellipse,
    focus_prior,
    otsu_threshold,
    saliency_color_prior,
    scribble_prior,
    scribbles_from_mask,
)
from .queries import (
    ClusterAssignment,
    QuerySelectionError,
    border_query_saliency,
    opf_cluster,
    saliency_queries,
)
from .superpixels import (
    SuperpixelParams,
    SeedSet,
    SuperpixelSegmentation,
    build_segmentation,
    delineate,
    next_scale,
    segment,
    sample_seeds,
    recompute_seeds,
)

__version__ = "0.1.0"
