"""Circular angle helpers (degrees, clockwise positive)."""

import numpy as np


def wrap180(deg):
    """Map angles to [-180, 180)."""
    a = np.asarray(deg, dtype=np.float64)
    out = a - 360.0 * np.floor((a + 180.0) / 360.0)
    # floor rounding can land exactly on +180
    out = np.where(out >= 180.0, out - 360.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def wrapped_diff(deg):
    """Successive differences wrapped to (-180, 180]."""
    d = np.diff(np.asarray(deg, dtype=np.float64))
    w = -wrap180(-d)
    return np.asarray(w)


def unwrap_deg(deg):
    return np.unwrap(np.asarray(deg, dtype=np.float64), period=360.0)


def circular_mean(deg):
    r = np.radians(np.asarray(deg, dtype=np.float64))
    return wrap180(np.degrees(np.arctan2(np.mean(np.sin(r)), np.mean(np.cos(r)))))


def classify_region(theta):
    """Region id 1..8 of a direction angle; region k spans
    [-22.5 + 45(k-1), 22.5 + 45(k-1)) modulo 360."""
    w = np.asarray(wrap180(theta))
    k = np.floor((w + 22.5) / 45.0)
    # the sum above can round onto a boundary; arc edges themselves are exact
    lo = k * 45.0 - 22.5
    k = np.where(w < lo, k - 1, np.where(w >= lo + 45.0, k + 1, k))
    k = k.astype(np.int64) % 8 + 1
    if np.ndim(k) == 0:
        return int(k)
    return k


def region_distance(a, b):
    """Circular distance between two region ids (0..4)."""
    d = abs(int(a) - int(b)) % 8
    return min(d, 8 - d)
