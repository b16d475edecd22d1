"""Independent oracles used by the test suite.

These deliberately avoid the library's shadow-polygon machinery: blocked-ray
verdicts come from a direct parametric interval clip of the ray against each
building prism, vectorized over query points.
"""

from __future__ import annotations

import math

import numpy as np

from zsmurban.scene import Building, Scene


def ray_blocked_vectorized(building: Building, points: np.ndarray, height: float,
                           azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    """Blocked-ray verdict for many ground points at a fixed sky direction."""
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    d = (math.cos(el) * math.sin(az), math.cos(el) * math.cos(az), math.sin(el))
    n = len(points)
    t_top = (building.height - height) / d[2]
    if t_top < 0:
        return np.zeros(n, dtype=bool)
    t_hi = np.full(n, t_top)
    t_lo = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    for a, b, c in building.footprint.halfplanes():
        den = a * d[0] + b * d[1]
        num = c - a * points[:, 0] - b * points[:, 1]
        if abs(den) <= 1e-15:
            alive &= num >= -1e-12
        elif den > 0:
            np.minimum(t_hi, num / den, out=t_hi)
        else:
            np.maximum(t_lo, num / den, out=t_lo)
    return alive & (t_lo <= t_hi + 1e-12)


def blocked_by_any_vectorized(scene: Scene, points: np.ndarray, height: float,
                              azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    blocked = np.zeros(len(points), dtype=bool)
    for building in scene.buildings:
        blocked |= ray_blocked_vectorized(building, points, height,
                                          azimuth_deg, elevation_deg)
    return blocked
