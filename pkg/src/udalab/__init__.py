"""udalab: a desk-scale lab for style-gap bridging and category-adaptive
pseudo-labeling in cross-domain semantic segmentation."""

__version__ = "0.1.0"

from .backend import BACKEND

__all__ = ["BACKEND", "__version__"]
