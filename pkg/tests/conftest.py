import numpy as np
import pytest

from stirlab import ArenaSpec, TemplateSpec


@pytest.fixture(scope="session")
def arena():
    return ArenaSpec()


@pytest.fixture(scope="session")
def template():
    return TemplateSpec()


def shoelace_area(points: np.ndarray) -> float:
    """Signed polygon area, counterclockwise positive (test-side oracle)."""
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def lens_fraction(d: float, r: float) -> float:
    """Covered fraction of one disc under an equal disc at distance d."""
    import math

    if d >= 2 * r:
        return 0.0
    lens = 2 * r * r * math.acos(d / (2 * r)) - (d / 2) * math.sqrt(4 * r * r - d * d)
    return lens / (math.pi * r * r)
