"""Geometry of the water trap and the initial-placement template."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class ArenaSpec:
    """Trap geometry, all lengths in centimetres.

    The reference circle is the circle all stirring paths are built
    from; the exclusion radius is the central keep-out disc: support
    column plus stick radius, so the stick never hits the column.
    """

    trap_radius: float = 10.0
    column_radius: float = 2.0
    stick_radius: float = 1.0
    reference_radius: float = 8.0
    exclusion_radius: float = field(default=3.0)

    def __post_init__(self) -> None:
        expected = self.column_radius + self.stick_radius
        if abs(self.exclusion_radius - expected) > 1e-12:
            raise ParameterError(
                f"exclusion_radius must equal column_radius + stick_radius "
                f"({expected}), got {self.exclusion_radius}"
            )
        if not (0.0 < self.exclusion_radius < self.reference_radius < self.trap_radius):
            raise ParameterError(
                "arena radii must satisfy 0 < exclusion < reference < trap, got "
                f"exclusion={self.exclusion_radius}, reference={self.reference_radius}, "
                f"trap={self.trap_radius}"
            )


@dataclass(frozen=True)
class TemplateSpec:
    """Disjoint circular cells that fix the initial pest arrangement.

    Cells sit evenly spaced on a ring, mirroring a physical placement
    template lowered into the trap before each trial.
    """

    n_regions: int = 8
    cell_radius: float = 1.5
    ring_radius: float = 5.5

    def __post_init__(self) -> None:
        if self.n_regions < 1:
            raise ParameterError(f"n_regions must be >= 1, got {self.n_regions}")
        if self.cell_radius <= 0 or self.ring_radius <= 0:
            raise ParameterError("cell_radius and ring_radius must be positive")
        if self.n_regions > 1:
            gap = 2.0 * self.ring_radius * math.sin(math.pi / self.n_regions)
            if gap < 2.0 * self.cell_radius:
                raise ParameterError(
                    f"{self.n_regions} cells of radius {self.cell_radius} overlap "
                    f"on a ring of radius {self.ring_radius}"
                )

    def region_centers(self) -> np.ndarray:
        """Cell centres as an (n_regions, 2) array, first cell at angle 0."""
        angles = 2.0 * np.pi * np.arange(self.n_regions) / self.n_regions
        return self.ring_radius * np.column_stack([np.cos(angles), np.sin(angles)])
