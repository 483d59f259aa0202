from __future__ import annotations

import math

import numpy as np

# Mean earth radius
EARTH_RADIUS_KM = 6371.0
# Half the circumference; no two points on the sphere are further apart.
MAX_DISTANCE_KM = math.pi * EARTH_RADIUS_KM


def haversine_km(
        lat1: float | np.ndarray,
        lon1: float | np.ndarray,
        lat2: float | np.ndarray,
        lon2: float | np.ndarray
        ) -> np.ndarray:
    """Great-circle distance in kilometers between points given in
    degrees. Broadcasts like any numpy ufunc.
    """
    lat1_rad = np.radians(lat1)
    lat2_rad = np.radians(lat2)
    dlat = lat2_rad - lat1_rad
    dlon = np.radians(np.asarray(lon2) - np.asarray(lon1))

    a = (
        np.sin(dlat / 2) ** 2
        + np.cos(lat1_rad) * np.cos(lat2_rad) * np.sin(dlon / 2) ** 2)
    # Rounding can push a fraction of an ulp past 1 for antipodal points
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
