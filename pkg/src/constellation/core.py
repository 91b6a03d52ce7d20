"""Minutiae, constellations, rigid transforms and the per-minutia score."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
EPS_DUP = 1e-6


def canonical_angle(theta: float) -> float:
    """Reduce an angle to [0, 2*pi)."""
    r = math.fmod(theta, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if r >= TWO_PI:
        r = 0.0
    return r


def canonical_angles(theta: np.ndarray) -> np.ndarray:
    r = np.mod(theta, TWO_PI)
    r[r >= TWO_PI] = 0.0
    return r


def angle_diff(a: float, b: float) -> float:
    """Signed minimal difference ``a - b`` wrapped into (-pi, pi]."""
    d = math.fmod(a - b, TWO_PI)
    if d <= -math.pi:
        d += TWO_PI
    elif d > math.pi:
        d -= TWO_PI
    return d


def angle_diffs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.fmod(np.asarray(a, dtype=float) - b, TWO_PI)
    d = np.where(d <= -math.pi, d + TWO_PI, d)
    return np.where(d > math.pi, d - TWO_PI, d)


class Minutia(NamedTuple):
    x: float
    y: float
    theta: float

    @classmethod
    def make(cls, x: float, y: float, theta: float) -> "Minutia":
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta)):
            raise ValueError(f"non-finite minutia ({x}, {y}, {theta})")
        return cls(float(x), float(y), canonical_angle(float(theta)))


@dataclass(frozen=True)
class RigidTransform:
    """Rotation by ``theta`` about the origin followed by translation (dx, dy)."""

    dx: float = 0.0
    dy: float = 0.0
    theta: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to an (n, 2) array of positions."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return pts @ self.matrix.T + (self.dx, self.dy)

    def apply_minutiae(self, m: np.ndarray) -> np.ndarray:
        """Apply to an (n, 3) array of minutiae, rotating orientations as well."""
        m = np.asarray(m, dtype=float).reshape(-1, 3)
        out = np.empty_like(m)
        out[:, :2] = self.apply(m[:, :2])
        out[:, 2] = canonical_angles(m[:, 2] + self.theta)
        return out

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equivalent to applying ``other`` first, then ``self``."""
        x, y = apply_rigid((other.dx, other.dy), self)
        return RigidTransform(x, y, self.theta + other.theta)

    def inverse(self) -> "RigidTransform":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return RigidTransform(-(c * self.dx + s * self.dy), -(-s * self.dx + c * self.dy), -self.theta)


def apply_rigid(p: Sequence[float], t: RigidTransform) -> tuple[float, float]:
    c, s = math.cos(t.theta), math.sin(t.theta)
    x, y = p[0], p[1]
    return (c * x - s * y + t.dx, s * x + c * y + t.dy)


def to_local_frame(center: Minutia, m: Minutia) -> Minutia:
    """Express ``m`` in the frame anchored at ``center`` (x-axis along its orientation)."""
    c, s = math.cos(center.theta), math.sin(center.theta)
    ux, uy = m.x - center.x, m.y - center.y
    return Minutia(c * ux + s * uy, -s * ux + c * uy, canonical_angle(m.theta - center.theta))


def from_local_frame(center: Minutia, m_local: Minutia) -> Minutia:
    c, s = math.cos(center.theta), math.sin(center.theta)
    x = c * m_local.x - s * m_local.y + center.x
    y = s * m_local.x + c * m_local.y + center.y
    return Minutia(x, y, canonical_angle(m_local.theta + center.theta))


def to_local_array(center: Sequence[float], pts: np.ndarray) -> np.ndarray:
    """Vectorised :func:`to_local_frame` over an (n, 3) array."""
    c, s = math.cos(center[2]), math.sin(center[2])
    ux = pts[:, 0] - center[0]
    uy = pts[:, 1] - center[1]
    out = np.empty((len(pts), 3))
    out[:, 0] = c * ux + s * uy
    out[:, 1] = -s * ux + c * uy
    out[:, 2] = canonical_angles(pts[:, 2] - center[2])
    return out


def from_local_array(center: Sequence[float], pts: np.ndarray) -> np.ndarray:
    c, s = math.cos(center[2]), math.sin(center[2])
    out = np.empty((len(pts), 3))
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + center[0]
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + center[1]
    out[:, 2] = canonical_angles(pts[:, 2] + center[2])
    return out


@dataclass(frozen=True)
class ScoreParams:
    """Weights of the per-minutia score and the vicinity-level penalties.

    The orientation term is weighted by ``sigma_x / sigma_theta`` unless
    ``angle_weight`` overrides it. ``s_max`` dissolves associations whose
    score exceeds it; ``math.inf`` disables gating. ``penalty_sign`` is +1
    (non-association costs) or -1 (the literal printed formula).
    """

    sigma_x: float = 5.0
    sigma_theta: float = 0.3
    k_na: float = 75.0**2 / 4
    s_max: float = 3 * 75.0**2 / 4
    angle_weight: float | None = None
    penalty_sign: int = 1

    def __post_init__(self):
        for name in ("sigma_x", "sigma_theta", "k_na", "s_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.angle_weight is not None and self.angle_weight < 0:
            raise ValueError("angle_weight must be non-negative")
        if self.penalty_sign not in (1, -1):
            raise ValueError("penalty_sign must be +1 or -1")

    @classmethod
    def for_radius(cls, rho: float, **kw) -> "ScoreParams":
        """Defaults scaled to an extraction radius: K_NA = rho^2/4, s_max = 3 rho^2/4."""
        kw.setdefault("k_na", rho * rho / 4)
        kw.setdefault("s_max", 3 * rho * rho / 4)
        return cls(**kw)

    @property
    def w_theta(self) -> float:
        if self.angle_weight is not None:
            return self.angle_weight
        return self.sigma_x / self.sigma_theta

    def to_dict(self) -> dict:
        return {
            "sigma_x": self.sigma_x,
            "sigma_theta": self.sigma_theta,
            "k_na": self.k_na,
            "s_max": None if math.isinf(self.s_max) else self.s_max,
            "angle_weight": self.angle_weight,
            "penalty_sign": self.penalty_sign,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreParams":
        d = dict(d)
        if d.get("s_max") is None:
            d["s_max"] = math.inf
        return cls(**d)


def minutia_score(a: Minutia, b: Minutia, p: ScoreParams) -> float:
    dx = a.x - b.x
    dy = a.y - b.y
    dt = angle_diff(a.theta, b.theta)
    return dx * dx + dy * dy + p.w_theta * dt * dt


def score_matrix(a: np.ndarray, b: np.ndarray, w_theta: float) -> np.ndarray:
    """All-pairs :func:`minutia_score` between (m, 3) and (n, 3) arrays."""
    dx = a[:, None, 0] - b[None, :, 0]
    dy = a[:, None, 1] - b[None, :, 1]
    dt = angle_diffs(a[:, None, 2], b[None, :, 2])
    return dx * dx + dy * dy + w_theta * dt * dt


@dataclass(frozen=True)
class Constellation:
    """An ordered set of minutiae stored as an (n, 3) array of x, y, theta.

    Orientations are canonicalised and coincident positions rejected on
    construction.
    """

    points: np.ndarray
    id: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("constellation contains non-finite values")
        pts[:, 2] = canonical_angles(pts[:, 2])
        if len(pts) > 1:
            d2 = ((pts[:, None, :2] - pts[None, :, :2]) ** 2).sum(-1)
            np.fill_diagonal(d2, np.inf)
            if d2.min() <= EPS_DUP**2:
                i, j = np.unravel_index(np.argmin(d2), d2.shape)
                raise ValueError(f"duplicate minutiae at indices {min(i, j)} and {max(i, j)}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_minutiae(cls, minutiae: Iterable[Sequence[float]], id: str = "") -> "Constellation":
        return cls(np.array([tuple(m) for m in minutiae], dtype=float).reshape(-1, 3), id=id)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int) -> Minutia:
        x, y, t = self.points[i]
        return Minutia(float(x), float(y), float(t))

    @property
    def minutiae(self) -> list[Minutia]:
        return [self[i] for i in range(len(self))]

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, :2]

    def transformed(self, t: RigidTransform) -> "Constellation":
        return Constellation(t.apply_minutiae(self.points), id=self.id)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Constellation):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.points, other.points)

    __hash__ = None
