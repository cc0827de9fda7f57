"""Independent reference computations for the test suite.

Nothing here reuses the package's integrand or quadrature code.
"""

import math

import numpy as np
import shapely
from scipy.stats import qmc
from shapely.geometry import Polygon


def likelihood(points, z, sensors, P, d0, beta, sigma):
    """``p(z | y)`` written out directly from the channel model."""
    d = np.hypot(points[:, None, 0] - sensors[None, :, 0], points[:, None, 1] - sensors[None, :, 1])
    mean = np.log(P * d0 / (d0 + d**beta))
    r = z[None, :] - mean
    n = len(z)
    return (2 * math.pi * sigma**2) ** (-n / 2) * np.exp(-(r**2).sum(axis=1) / (2 * sigma**2))


def mc_region_integral(polygons, z, sensors, P, d0, beta, sigma, total_area, m=20, seed=0):
    """``(1/A) * integral over the union of polygons`` by scrambled Sobol sampling.

    Uses ``2**m`` points in the bounding box of each polygon.
    """
    out = 0.0
    for verts in polygons:
        poly = Polygon(verts)
        x0, y0, x1, y1 = poly.bounds
        pts = qmc.Sobol(2, scramble=True, seed=seed).random_base2(m)
        pts = np.column_stack([x0 + (x1 - x0) * pts[:, 0], y0 + (y1 - y0) * pts[:, 1]])
        inside = shapely.contains_xy(poly, pts[:, 0], pts[:, 1])
        f = np.zeros(len(pts))
        for start in range(0, len(pts), 1 << 16):
            sl = slice(start, start + (1 << 16))
            f[sl] = likelihood(pts[sl], z, sensors, P, d0, beta, sigma)
        out += (x1 - x0) * (y1 - y0) * float(np.mean(f * inside))
    return out / total_area


def isotonic_nonincreasing(y, w=None):
    """Pool-adjacent-violators fit constrained to be nonincreasing."""
    y = list(map(float, y))
    w = [1.0] * len(y) if w is None else list(map(float, w))
    blocks = []  # [mean, weight, count]
    for yi, wi in zip(y, w):
        blocks.append([yi, wi, 1])
        while len(blocks) > 1 and blocks[-2][0] < blocks[-1][0]:
            m2, w2, c2 = blocks.pop()
            m1, w1, c1 = blocks.pop()
            blocks.append([(m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, c1 + c2])
    fit = []
    for m, _, c in blocks:
        fit += [m] * c
    return np.array(fit)
