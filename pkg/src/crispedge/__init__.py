"""Crispness measurement, benchmarking, and Canny-guided refinement of edge labels."""

from .canny import CannyParams, canny, overdetect, sobel_gradients
from .elastic import DisplacementField, apply_field, make_field, simulate_annotators
from .inpaint import InpaintRequest, external_inpaint, geodesic_complete
from .metrics import (
    BenchmarkReport,
    MatchResult,
    PRPoint,
    UndefinedCrispnessError,
    average_crispness,
    benchmark,
    crispness,
    match_edges,
    wbce_loss,
)
from .nms import NmsParams, edge_nms
from .raster import (
    Rect,
    connected_components,
    crop,
    dilate_disk,
    gaussian_blur,
    hadamard,
    load_image,
    paste_max,
    resize_bilinear,
    save_image,
)
from .refine import (
    RefineConfig,
    RefineTrace,
    create_mask,
    create_patches,
    initial_edge,
    post_process,
    refine,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "CannyParams",
    "DisplacementField",
    "InpaintRequest",
    "MatchResult",
    "NmsParams",
    "PRPoint",
    "Rect",
    "RefineConfig",
    "RefineTrace",
    "UndefinedCrispnessError",
    "apply_field",
    "average_crispness",
    "benchmark",
    "canny",
    "connected_components",
    "create_mask",
    "create_patches",
    "crispness",
    "crop",
    "dilate_disk",
    "edge_nms",
    "external_inpaint",
    "gaussian_blur",
    "geodesic_complete",
    "hadamard",
    "initial_edge",
    "load_image",
    "make_field",
    "match_edges",
    "overdetect",
    "paste_max",
    "post_process",
    "refine",
    "resize_bilinear",
    "save_image",
    "simulate_annotators",
    "sobel_gradients",
    "wbce_loss",
]
