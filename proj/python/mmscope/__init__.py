"""Analysis operations over exported multimodal transformer artifacts.

The compiled extension carries the implementations; this package just
re-exports them. In an installed wheel the extension lives inside the
package; in a plain CMake build tree it sits next to it on sys.path.
"""

try:
    from ._mmscope import *  # noqa: F401,F403
    from ._mmscope import __version__  # noqa: F401
except ImportError:  # build-tree layout
    from _mmscope import *  # noqa: F401,F403
    from _mmscope import __version__  # noqa: F401

__all__ = [
    "rbo",
    "set_iou",
    "pearson_r",
    "bbox_iou",
    "containment_fraction",
    "assign_labels_to_features",
    "max_over_heads",
    "subblock_stats",
    "pmi",
    "change_rate",
    "gaussian_kde",
    "describe",
    "two_sample_z",
    "extract_scene_label",
    "scene_frequencies",
    "pool_mean",
    "f1_report",
    "RandomForest",
    "MmscopeError",
]
