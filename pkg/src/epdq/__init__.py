"""
Expected persistence diagrams: estimation, optimal partial transport and
quantization with a diagonal cell.
"""

from .measures import (
    DiagramFormatError,
    GridHistogram,
    GridSpec,
    HalfPlanePoint,
    PersistenceMeasure,
    empirical_epd,
    persistence,
    read_dgm,
    to_histogram,
    total_persistence,
    write_dgm,
)
from .quantize import (
    Codebook,
    assign_cell,
    assign_cells,
    distortion,
    lloyd_no_diagonal,
    online_quantize,
    optimal_weights,
    p_center,
    update_step,
    weighted_codebook,
)
from .transport import bottleneck_distance, histogram_ot, multiscale_upper_bound, ot_distance

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "DiagramFormatError",
    "GridHistogram",
    "GridSpec",
    "HalfPlanePoint",
    "PersistenceMeasure",
    "assign_cell",
    "assign_cells",
    "bottleneck_distance",
    "distortion",
    "empirical_epd",
    "histogram_ot",
    "lloyd_no_diagonal",
    "multiscale_upper_bound",
    "online_quantize",
    "optimal_weights",
    "ot_distance",
    "p_center",
    "persistence",
    "read_dgm",
    "to_histogram",
    "total_persistence",
    "update_step",
    "weighted_codebook",
    "write_dgm",
]
