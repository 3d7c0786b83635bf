"""RGB to LAB color feature domains.

RGB channels are scaled to [0, 1], mapped to XYZ through a fixed CIE-RGB
matrix, and converted to L, A, B with the cube-root / linear-branch
transfer function.  The white reference is the image of (1, 1, 1), so
pure white maps to L = 100, A = B = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RGB_TO_XYZ = np.array([
    [2.7688, 1.7517, 1.1301],
    [1.0000, 4.5906, 0.0601],
    [0.0000, 0.0565, 5.5942],
])

DELTA = 6.0 / 29.0

# White achromatic reference: the matrix applied to unit RGB.
WHITE_XYZ = RGB_TO_XYZ @ np.ones(3)


def f_lab(t):
    """Transfer function: cube root above DELTA**3, linear below."""
    t = np.asarray(t, dtype=np.float64)
    return np.where(t > DELTA ** 3,
                    np.cbrt(t),
                    t / (3.0 * DELTA ** 2) + 4.0 / 29.0)


@dataclass
class LabDomains:
    """Per-element L, A, B feature domains."""

    l: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def as_dict(self):
        return {"L": self.l, "A": self.a, "B": self.b}


def rgb_to_lab(colors) -> LabDomains:
    """Convert (N, 3) 8-bit RGB colors to LAB feature domains."""
    rgb = np.atleast_2d(np.asarray(colors, dtype=np.float64)) / 255.0
    xyz = rgb @ RGB_TO_XYZ.T
    fx = f_lab(xyz[:, 0] / WHITE_XYZ[0])
    fy = f_lab(xyz[:, 1] / WHITE_XYZ[1])
    fz = f_lab(xyz[:, 2] / WHITE_XYZ[2])
    return LabDomains(
        l=116.0 * fy - 16.0,
        a=500.0 * (fx - fy),
        b=200.0 * (fy - fz),
    )
