"""Location inference from elevation profiles and defenses against it."""
from .core import (BoundingRect, Dataset, ElevationProfile, Region, assign_region, avg_overlap,
                   balance, load_dataset, rect_iou, save_dataset, tight_rect)
from .errors import DataError, ElevprivError, NumericError

__version__ = "0.1.0"

__all__ = ["BoundingRect", "Dataset", "ElevationProfile", "Region", "assign_region", "avg_overlap",
           "balance", "load_dataset", "rect_iou", "save_dataset", "tight_rect", "DataError",
           "ElevprivError", "NumericError", "__version__"]
