"""Seam-carving retargeting engine and retargeting-forensics pipeline."""

from .seams import SeamMethod, retarget, find_seam, cumulative_matrix

__all__ = ["SeamMethod", "retarget", "find_seam", "cumulative_matrix"]
__version__ = "0.1.0"
