"""Seeded synthetic constellations and perturbations.

All randomness goes through ``numpy.random.Generator(PCG64(seed))``, whose
stream is fixed across platforms for a given numpy major version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Constellation, RigidTransform, canonical_angles

MAX_PLACEMENT_ATTEMPTS = 10**6


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def generate(
    n: int,
    width: float = 400.0,
    height: float = 400.0,
    min_sep: float = 10.0,
    seed: int = 0,
    id: str = "",
) -> Constellation:
    """``n`` minutiae placed uniformly with pairwise separation >= ``min_sep``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = _rng(seed)
    pts = np.empty((n, 3))
    placed = 0
    attempts = 0
    while placed < n:
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise ValueError(f"could not place {n} minutiae with min_sep={min_sep} (placed {placed})")
        x, y = rng.uniform(0, width), rng.uniform(0, height)
        if placed:
            d2 = (pts[:placed, 0] - x) ** 2 + (pts[:placed, 1] - y) ** 2
            if d2.min() < min_sep * min_sep:
                continue
        pts[placed] = (x, y, rng.uniform(0, 2 * math.pi))
        placed += 1
    return Constellation(pts, id=id or f"synth-{seed}")


def random_transform(rng: np.random.Generator, max_shift: float = 200.0) -> RigidTransform:
    return RigidTransform(rng.uniform(-max_shift, max_shift), rng.uniform(-max_shift, max_shift), rng.uniform(0, 2 * math.pi))


@dataclass(frozen=True)
class PerturbSpec:
    """What ``perturb`` does to a constellation.

    ``transform`` is a fixed RigidTransform, ``"random"``, or None. Explicit
    ``occlude_indices`` are removed in addition to ``occlusions`` random ones.
    """

    transform: RigidTransform | str | None = None
    jitter_sigma: float = 0.0
    theta_jitter_sigma: float = 0.0
    occlusions: int = 0
    spurious: int = 0
    distortion_amp: float = 0.0
    distortion_scale: float = 200.0
    seed: int = 0
    occlude_indices: tuple[int, ...] = ()
    max_shift: float = 200.0

    def __post_init__(self):
        if self.occlusions < 0 or self.spurious < 0:
            raise ValueError("counts must be non-negative")
        if isinstance(self.transform, str) and self.transform != "random":
            raise ValueError("transform must be a RigidTransform, 'random' or None")


@dataclass
class GroundTruth:
    transform: RigidTransform
    removed: list[int] = field(default_factory=list)
    added: list[int] = field(default_factory=list)
    # origin[k] = index in the input of output minutia k, or -1 if spurious
    origin: list[int] = field(default_factory=list)


def distortion_field(rng: np.random.Generator, amp: float, scale: float, n_fields: int = 2):
    """A smooth displacement field: sum of sinusoidal waves of wavelength ``scale``."""
    waves = []
    for _ in range(n_fields):
        phi = rng.uniform(0, 2 * math.pi)
        k = 2 * math.pi / scale * np.array([math.cos(phi), math.sin(phi)])
        psi = rng.uniform(0, 2 * math.pi)
        d = np.array([math.cos(psi), math.sin(psi)])
        waves.append((k, d, rng.uniform(0, 2 * math.pi)))

    def displace(xy: np.ndarray) -> np.ndarray:
        out = np.zeros_like(xy)
        for k, d, phase in waves:
            out += amp * np.sin(xy @ k + phase)[:, None] * d
        return out

    return displace


def perturb(c: Constellation, spec: PerturbSpec) -> tuple[Constellation, GroundTruth]:
    """Distort, jitter, move, occlude and pollute ``c`` (in that order)."""
    n = len(c)
    n_occ = spec.occlusions + len(set(spec.occlude_indices))
    if n_occ and n_occ >= n:
        raise ValueError("occlusions must be fewer than the constellation size")
    if any(not 0 <= i < n for i in spec.occlude_indices):
        raise ValueError("occlude_indices out of range")
    rng = _rng(spec.seed)
    pts = np.array(c.points, dtype=float)

    if spec.distortion_amp > 0:
        pts[:, :2] += distortion_field(rng, spec.distortion_amp, spec.distortion_scale)(pts[:, :2])
    if spec.jitter_sigma > 0:
        pts[:, :2] += rng.normal(0, spec.jitter_sigma, (n, 2))
    if spec.theta_jitter_sigma > 0:
        pts[:, 2] += rng.normal(0, spec.theta_jitter_sigma, n)
    pts[:, 2] = canonical_angles(pts[:, 2])

    if spec.transform == "random":
        t = random_transform(rng, spec.max_shift)
    elif spec.transform is None:
        t = RigidTransform()
    else:
        t = spec.transform
    if spec.transform is not None:
        pts = t.apply_minutiae(pts)

    removed = sorted(set(spec.occlude_indices))
    if spec.occlusions:
        pool = np.setdiff1d(np.arange(n), removed)
        removed = sorted(removed + list(rng.choice(pool, spec.occlusions, replace=False)))
    keep = [i for i in range(n) if i not in set(removed)]
    pts = pts[keep]
    origin = list(keep)

    added = []
    if spec.spurious:
        lo = pts[:, :2].min(0) if len(pts) else np.zeros(2)
        hi = pts[:, :2].max(0) if len(pts) else np.ones(2)
        extra = np.column_stack([rng.uniform(lo, hi, (spec.spurious, 2)), rng.uniform(0, 2 * math.pi, spec.spurious)])
        added = list(range(len(pts), len(pts) + spec.spurious))
        pts = np.vstack([pts, extra])
        origin += [-1] * spec.spurious

    return Constellation(pts, id=c.id), GroundTruth(t, [int(i) for i in removed], added, origin)


def covered_indices(c: Constellation, rho: float, min_cover: int = 2) -> list[int]:
    """Indices of minutiae lying strictly inside the ``rho``-vicinities of at least ``min_cover`` others."""
    xy = c.xy
    d2 = ((xy[:, None] - xy[None]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    return [int(i) for i in np.flatnonzero((d2 < rho * rho).sum(1) >= min_cover)]
