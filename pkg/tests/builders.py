"""Constructed fixtures shared by the unit and acceptance tests."""

import math

import numpy as np

from constellation.core import Constellation


def _cluster(rng, size, radius=15.0, spacing=4.0):
    pts = []
    while len(pts) < size:
        r, a = radius * math.sqrt(rng.uniform()), rng.uniform(0, 2 * math.pi)
        p = (r * math.cos(a), r * math.sin(a))
        if all(math.dist(p, q[:2]) >= spacing for q in pts):
            pts.append((*p, rng.uniform(0, 2 * math.pi)))
    return np.array(pts)


def _layout(rng, k, box, sep, attempts=20000):
    # sequential rejection sampling, restarted when it paints itself into a corner
    while True:
        centers = []
        for _ in range(attempts):
            c = rng.uniform(0, box, 2)
            if all(math.dist(c, d) >= sep for d in centers):
                centers.append(c)
                if len(centers) == k:
                    return centers


def place(cluster, center, theta):
    c, s = math.cos(theta), math.sin(theta)
    xy = cluster[:, :2] @ np.array([[c, s], [-s, c]]) + center
    return np.column_stack([xy, cluster[:, 2] + theta])


def rearranged_pair(seed, k=12, box=400.0, sep=110.0):
    """Two constellations built from the same k rigid clusters at different places.

    Clusters are 4-6 minutiae within 15 px and at least ``sep`` apart, so every
    first-order vicinity (rho 75) stays inside its cluster and is identical in
    both layouts, while the distances between clusters differ. The box is
    dense enough that most clusters have neighbours within rho2 = 150.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    clusters = [_cluster(rng, int(rng.integers(4, 7))) for _ in range(k)]
    out = []
    for _ in range(2):
        centers = _layout(rng, k, box, sep)
        pts = np.vstack([place(cl, c, rng.uniform(0, 2 * math.pi)) for cl, c in zip(clusters, centers)])
        out.append(Constellation(pts, id=f"layout-{seed}-{len(out)}"))
    return out[0], out[1]
