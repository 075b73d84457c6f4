"""Scatter removal and Abel reconstruction for spherical-shell radiographs."""

from ._core import (
    central_slice,
    descatter,
    inverse_abel,
    made,
    project,
    reconstruct_mono,
    scatter_map,
    transmission_mono,
)

__all__ = [
    "central_slice",
    "descatter",
    "inverse_abel",
    "made",
    "project",
    "reconstruct_mono",
    "scatter_map",
    "transmission_mono",
]
