"""Spring relaxation matcher and the alignment oracles it is checked against.

Constellation A becomes a rigid body of unit point masses; B is a set of
fixed anchors. Zero-rest-length springs tie a_i to b_i and viscous drag on
every point dissipates energy until the body settles. The settled spring
energy (``e_min``) and remaining distance sum (``sim_phi``) measure how far
apart the two constellations are after the best rigid motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit

from .core import RigidTransform

INERTIA_EPS = 1e-12


@dataclass(frozen=True)
class PhysicsParams:
    """Spring stiffness ``k``, drag ``k_v``, timestep and stop condition.

    ``k_v`` defaults to ``2 * sqrt(k * l)`` and ``eps_kinetic`` to
    ``1e-9 * k * diameter**2``; both are resolved by :func:`assemble`.
    The run stops once kinetic energy stays below ``eps_kinetic`` for
    ``settle_window`` consecutive steps.
    """

    k: float = 1.0
    k_v: float | None = None
    dt: float = 0.01
    max_steps: int = 200_000
    eps_kinetic: float | None = None
    settle_window: int = 50
    trajectory_stride: int = 0

    def __post_init__(self):
        if not self.k > 0 or not self.dt > 0:
            raise ValueError("k and dt must be positive")
        if self.k_v is not None and not self.k_v > 0:
            raise ValueError("k_v must be positive")
        if self.max_steps < 1 or self.settle_window < 1:
            raise ValueError("max_steps and settle_window must be positive")


@dataclass(frozen=True)
class RigidBody:
    local_points: np.ndarray
    mass: float
    inertia: float
    pose: RigidTransform
    lin_vel: tuple[float, float] = (0.0, 0.0)
    ang_vel: float = 0.0

    def world_points(self) -> np.ndarray:
        return self.pose.apply(self.local_points)

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.pose.dx, self.pose.dy)


@dataclass(frozen=True)
class SpringSystem:
    body: RigidBody
    anchors: np.ndarray
    params: PhysicsParams
    # body-frame origin in input coordinates, to report poses in the input frame
    origin: tuple[float, float] = (0.0, 0.0)
    lock_rotation: bool = False

    def __len__(self) -> int:
        return len(self.anchors)

    def world_points(self) -> np.ndarray:
        return self.body.world_points()


@dataclass
class SimResult:
    e_min: float
    sim_phi: float
    steps: int
    converged: bool
    final_pose: RigidTransform
    final_points: np.ndarray
    trajectory: np.ndarray | None = None
    # analytic optimum of the same energy, for flagging meta-stable stops
    optimum_energy: float = float("nan")

    @property
    def metastable(self) -> bool:
        return self.converged and self.e_min > 1.01 * self.optimum_energy + 1e-6 * max(self.optimum_energy, 1.0)


TRAJECTORY_HEADER = "step,potential_energy,kinetic_energy,pose_x,pose_y,pose_theta"


def _as_points(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 3:
        arr = arr[:, :2]
    arr = arr.reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr


def diameter(points) -> float:
    pts = _as_points(points)
    if len(pts) < 2:
        return 0.0
    return float(np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1).max()))


def stability_bound(mass: float, k: float, n: int) -> float:
    return 2.0 * math.sqrt(mass / (k * n))


def dissipation_bound(k: float, k_v: float) -> float:
    """Largest dt for which one semi-implicit Euler step never raises ``k x^2/2 + v^2/2``.

    Per unit mass the step maps (x, v) linearly; the energy form contracts iff
    ``(1 - k_v dt)^2 + k dt^2 <= 1``, i.e. ``dt <= 2 k_v / (k + k_v^2)``.
    """
    return 2.0 * k_v / (k + k_v * k_v)


def rotational_stiffness_ratio(a, b) -> float:
    """Peak rotational spring stiffness of body ``a`` on anchors ``b``, relative to the translational one.

    With the body's centroid at the origin, the potential as a function of
    the rotation angle is ``const - k |C| cos(theta - theta0)`` where
    ``C = sum conj(r_i) (b_i - mean b)`` over points taken as complex numbers, so the
    angular mode has stiffness up to ``k |C| / I``. It exceeds ``k`` when the
    anchors are spread wider than the body.
    """
    a, b = _as_points(a), _as_points(b)
    r = a - a.mean(axis=0)
    q = b - b.mean(axis=0)
    inertia = float((r**2).sum())
    if inertia <= INERTIA_EPS:
        return 0.0
    c = complex(float((r * q).sum()), float((r[:, 0] * q[:, 1] - r[:, 1] * q[:, 0]).sum()))
    return abs(c) / inertia


def resolve_params(a, p: PhysicsParams | None = None) -> PhysicsParams:
    """``p`` with the size-dependent defaults (``k_v``, ``eps_kinetic``) filled in for body ``a``."""
    p = p or PhysicsParams()
    a = _as_points(a)
    k_v = p.k_v if p.k_v is not None else 2.0 * math.sqrt(p.k * max(len(a), 1))
    eps = p.eps_kinetic if p.eps_kinetic is not None else 1e-9 * p.k * max(diameter(a), 1.0) ** 2
    return replace(p, k_v=k_v, eps_kinetic=eps)


def assemble(a, b, p: PhysicsParams | None = None, lock_rotation: bool = False) -> SpringSystem:
    """Build the mobile body from ``a`` and the fixed anchors from ``b``."""
    a = _as_points(a)
    b = _as_points(b)
    if len(a) != len(b):
        raise ValueError(f"size mismatch: {len(a)} body points vs {len(b)} anchors")
    if len(a) == 0:
        raise ValueError("need at least one point")
    n = len(a)
    mass = float(n)
    p = resolve_params(a, p)
    k_v = p.k_v
    # both bounds are checked at the stiffer of the translational and rotational modes
    k_eff = p.k * max(1.0, 0.0 if lock_rotation else rotational_stiffness_ratio(a, b))
    bound = stability_bound(mass, k_eff, n)
    if not p.dt < bound:
        raise ValueError(f"dt={p.dt} violates the stability bound dt < {bound:.6g}")
    if not p.dt <= dissipation_bound(k_eff, k_v):
        raise ValueError(f"dt={p.dt} violates the dissipation bound dt <= {dissipation_bound(k_eff, k_v):.6g}")
    centroid = a.mean(axis=0)
    local = a - centroid
    local.setflags(write=False)
    inertia = float((local**2).sum())
    body = RigidBody(local, mass, inertia, RigidTransform(float(centroid[0]), float(centroid[1]), 0.0))
    anchors = b.copy()
    anchors.setflags(write=False)
    return SpringSystem(body, anchors, p, (float(centroid[0]), float(centroid[1])), lock_rotation)


# -- integration ---------------------------------------------------------------


@njit(cache=True)
def _advance(local, anchors, state, k, kv, dt, mass, inertia, lock):
    # state = [cx, cy, theta, vx, vy, omega]; semi-implicit Euler, in place
    c = math.cos(state[2])
    s = math.sin(state[2])
    fx = 0.0
    fy = 0.0
    tau = 0.0
    for i in range(local.shape[0]):
        rx = c * local[i, 0] - s * local[i, 1]
        ry = s * local[i, 0] + c * local[i, 1]
        vx = state[3] - state[5] * ry
        vy = state[4] + state[5] * rx
        gx = -k * (state[0] + rx - anchors[i, 0]) - kv * vx
        gy = -k * (state[1] + ry - anchors[i, 1]) - kv * vy
        fx += gx
        fy += gy
        tau += rx * gy - ry * gx
    state[3] += fx / mass * dt
    state[4] += fy / mass * dt
    if inertia > INERTIA_EPS and not lock:
        state[5] += tau / inertia * dt
    else:
        state[5] = 0.0
    state[0] += state[3] * dt
    state[1] += state[4] * dt
    state[2] += state[5] * dt


@njit(cache=True)
def _energies(local, anchors, state, k, mass, inertia):
    c = math.cos(state[2])
    s = math.sin(state[2])
    pe = 0.0
    for i in range(local.shape[0]):
        dx = state[0] + c * local[i, 0] - s * local[i, 1] - anchors[i, 0]
        dy = state[1] + s * local[i, 0] + c * local[i, 1] - anchors[i, 1]
        pe += dx * dx + dy * dy
    ke = 0.5 * mass * (state[3] * state[3] + state[4] * state[4]) + 0.5 * inertia * state[5] * state[5]
    return 0.5 * k * pe, ke


@njit(cache=True)
def _run(local, anchors, state, k, kv, dt, mass, inertia, lock, max_steps, eps, window, stride):
    n_rows = 1 + (max_steps // stride if stride > 0 else 0)
    traj = np.empty((n_rows, 6))
    row = 0
    if stride > 0:
        pe, ke = _energies(local, anchors, state, k, mass, inertia)
        traj[0, 0] = 0
        traj[0, 1] = pe
        traj[0, 2] = ke
        traj[0, 3] = state[0]
        traj[0, 4] = state[1]
        traj[0, 5] = state[2]
        row = 1
    quiet = 0
    steps = 0
    converged = False
    while steps < max_steps:
        _advance(local, anchors, state, k, kv, dt, mass, inertia, lock)
        steps += 1
        pe, ke = _energies(local, anchors, state, k, mass, inertia)
        if stride > 0 and steps % stride == 0:
            traj[row, 0] = steps
            traj[row, 1] = pe
            traj[row, 2] = ke
            traj[row, 3] = state[0]
            traj[row, 4] = state[1]
            traj[row, 5] = state[2]
            row += 1
        if ke < eps:
            quiet += 1
            if quiet >= window:
                converged = True
                break
        else:
            quiet = 0
    return steps, converged, traj[:row]


def _state(s: SpringSystem) -> np.ndarray:
    b = s.body
    return np.array([b.pose.dx, b.pose.dy, b.pose.theta, b.lin_vel[0], b.lin_vel[1], b.ang_vel])


def _with_state(s: SpringSystem, st: np.ndarray) -> SpringSystem:
    body = replace(
        s.body,
        pose=RigidTransform(float(st[0]), float(st[1]), float(st[2])),
        lin_vel=(float(st[3]), float(st[4])),
        ang_vel=float(st[5]),
    )
    return replace(s, body=body)


def step(s: SpringSystem) -> SpringSystem:
    """One integration step: spring and drag forces, then velocities, then pose."""
    st = _state(s)
    p = s.params
    _advance(s.body.local_points, s.anchors, st, p.k, p.k_v, p.dt, s.body.mass, s.body.inertia, s.lock_rotation)
    return _with_state(s, st)


def potential_energy(s: SpringSystem) -> float:
    d = s.world_points() - s.anchors
    return 0.5 * s.params.k * float((d**2).sum())


def kinetic_energy(s: SpringSystem) -> float:
    b = s.body
    return 0.5 * b.mass * (b.lin_vel[0] ** 2 + b.lin_vel[1] ** 2) + 0.5 * b.inertia * b.ang_vel**2


def mechanical_energy(s: SpringSystem) -> float:
    return potential_energy(s) + kinetic_energy(s)


def body_transform(s: SpringSystem) -> RigidTransform:
    """Rigid transform taking the input points of A to the body's current points."""
    pose = s.body.pose
    ox, oy = s.origin
    c, sn = math.cos(pose.theta), math.sin(pose.theta)
    return RigidTransform(pose.dx - (c * ox - sn * oy), pose.dy - (sn * ox + c * oy), pose.theta)


def simulate(s: SpringSystem, final_state: bool = False):
    """Integrate until the body settles or ``max_steps`` is reached."""
    p = s.params
    st = _state(s)
    steps, converged, traj = _run(
        s.body.local_points,
        s.anchors,
        st,
        p.k,
        p.k_v,
        p.dt,
        s.body.mass,
        s.body.inertia,
        s.lock_rotation,
        p.max_steps,
        p.eps_kinetic,
        p.settle_window,
        p.trajectory_stride,
    )
    end = _with_state(s, st)
    pts = end.world_points()
    dist = np.sqrt(((pts - s.anchors) ** 2).sum(-1))
    e = potential_energy(end)
    a_input = s.body.local_points + np.asarray(s.origin)
    _, resid = kabsch_align(a_input, s.anchors)
    res = SimResult(
        e_min=e,
        sim_phi=float(dist.sum()),
        steps=int(steps),
        converged=bool(converged),
        final_pose=body_transform(end),
        final_points=pts,
        trajectory=traj if p.trajectory_stride > 0 else None,
        optimum_energy=0.5 * p.k * resid,
    )
    return (res, end) if final_state else res


def write_trajectory(path, traj: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for r in traj:
            fh.write(f"{int(r[0])},{r[1]:.10g},{r[2]:.10g},{r[3]:.10g},{r[4]:.10g},{r[5]:.10g}\n")


# -- oracles -------------------------------------------------------------------


def kabsch_align(a, b) -> tuple[RigidTransform, float]:
    """Closed-form rigid transform minimising sum |T(a_i) - b_i|^2, and that minimum."""
    a = _as_points(a)
    b = _as_points(b)
    if len(a) != len(b):
        raise ValueError(f"size mismatch: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ValueError("need at least one point")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    p, q = a - ca, b - cb
    # 2D: the optimal angle maximises sum p_i . R q_i, solved by atan2
    theta = math.atan2(float((p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]).sum()), float((p * q).sum()))
    c, s = math.cos(theta), math.sin(theta)
    t = cb - np.array([c * ca[0] - s * ca[1], s * ca[0] + c * ca[1]])
    tr = RigidTransform(float(t[0]), float(t[1]), theta)
    resid = float(((tr.apply(a) - b) ** 2).sum())
    return tr, resid


@dataclass(frozen=True)
class GridSpec:
    """Coarse grid resolution and the refinement stopping step (``tol``)."""

    theta_steps: int = 72
    trans_steps: int = 9
    tol: float = 1e-4
    starts: int = 4

    def __post_init__(self):
        if self.theta_steps < 1 or self.trans_steps < 1 or not self.tol > 0 or self.starts < 1:
            raise ValueError("degenerate grid")


_DIRECTIONS = np.array([(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1) if (i, j, k) != (0, 0, 0)], dtype=float)


def brute_force_sim(a, b, grid: GridSpec | None = None) -> tuple[float, RigidTransform]:
    """Minimum over rigid motions of the sum of point distances, by grid search.

    Parametrised as a rotation about A's centroid followed by an offset from
    B's centroid. The best grid cells are refined by a 26-direction pattern
    search whose step halves until it drops below ``grid.tol`` (angles are
    scaled by A's radius so both step kinds are lengths).
    """
    grid = grid or GridSpec()
    a = _as_points(a)
    b = _as_points(b)
    if len(a) != len(b):
        raise ValueError(f"size mismatch: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ValueError("need at least one point")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    p, q = a - ca, b - cb
    radius = max(float(np.sqrt((p**2).sum(-1)).max()), 1e-9)
    span = float(np.sqrt((q**2).sum(-1)).max()) + radius

    def objective(th, ux, uy):
        th, ux, uy = np.atleast_1d(th), np.atleast_1d(ux), np.atleast_1d(uy)
        c, s = np.cos(th)[:, None], np.sin(th)[:, None]
        x = c * p[:, 0] - s * p[:, 1] + ux[:, None] - q[:, 0]
        y = s * p[:, 0] + c * p[:, 1] + uy[:, None] - q[:, 1]
        return np.sqrt(x * x + y * y).sum(-1)

    thetas = np.arange(grid.theta_steps) * (2 * math.pi / grid.theta_steps)
    offs = np.linspace(-span, span, grid.trans_steps) if grid.trans_steps > 1 else np.zeros(1)
    T, X, Y = np.meshgrid(thetas, offs, offs, indexing="ij")
    vals = objective(T.ravel(), X.ravel(), Y.ravel())
    order = np.argsort(vals, kind="stable")[: grid.starts]
    h0 = max(2 * span / max(grid.trans_steps - 1, 1), 2 * math.pi / grid.theta_steps * radius)

    best = (math.inf, 0.0, 0.0, 0.0)
    for k in order:
        x = np.array([T.ravel()[k] * radius, X.ravel()[k], Y.ravel()[k]])
        fx = float(vals[k])
        h = h0
        while h >= grid.tol:
            cand = x + h * _DIRECTIONS
            fv = objective(cand[:, 0] / radius, cand[:, 1], cand[:, 2])
            j = int(np.argmin(fv))
            if fv[j] < fx:
                x, fx = cand[j], float(fv[j])
            else:
                h /= 2
        if fx < best[0]:
            best = (fx, *x)
    value, th, ux, uy = best
    th /= radius
    c, s = math.cos(th), math.sin(th)
    # rotate about ca, then move ca onto cb + u
    t = cb + (ux, uy) - np.array([c * ca[0] - s * ca[1], s * ca[0] + c * ca[1]])
    return float(value), RigidTransform(float(t[0]), float(t[1]), float(th % (2 * math.pi)))


def similarity_score(sim_value: float, c: float = math.e) -> float:
    """Map a distance-like similarity to (0, 1] as ``c ** -sim``."""
    if not c > 1:
        raise ValueError("base c must exceed 1")
    if sim_value < 0:
        raise ValueError("sim_value must be non-negative")
    return c ** (-sim_value)


def rotate_about(points, center, theta: float) -> np.ndarray:
    pts = _as_points(points)
    c, s = math.cos(theta), math.sin(theta)
    d = pts - center
    return np.column_stack([c * d[:, 0] - s * d[:, 1], s * d[:, 0] + c * d[:, 1]]) + center


@dataclass
class SweepResult:
    angles: np.ndarray
    energies: np.ndarray
    best_theta: float
    best_energy: float
    # (angle, energy) of every refinement probe, in evaluation order
    refinements: list[tuple[float, float]] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("theta_deg,energy,kind\n")
            for t, e in zip(self.angles, self.energies):
                fh.write(f"{math.degrees(t):.6f},{e:.10g},sample\n")
            for t, e in self.refinements:
                fh.write(f"{math.degrees(t):.6f},{e:.10g},refine\n")


def rotation_sweep(
    a,
    b,
    center: Sequence[float] | None = None,
    increment: float = math.radians(10),
    params: PhysicsParams | None = None,
    min_increment: float = math.radians(0.5),
) -> SweepResult:
    """Force rotations of A about ``center`` and let only translation relax.

    Samples every ``increment`` over a full turn, then refines around the
    lowest settled energy by halving the step until it is below
    ``min_increment``. ``best_theta`` is the rotation of A (about ``center``)
    that best matches B.
    """
    a = _as_points(a)
    b = _as_points(b)
    if len(a) != len(b):
        raise ValueError(f"size mismatch: {len(a)} vs {len(b)}")
    if not increment > 0:
        raise ValueError("increment must be positive")
    center = a.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    params = params or PhysicsParams()

    def settled(theta: float) -> float:
        s = assemble(rotate_about(a, center, theta), b, params, lock_rotation=True)
        return simulate(s).e_min

    n = math.ceil(2 * math.pi / increment - 1e-9)
    angles = np.arange(n) * increment
    energies = np.array([settled(t) for t in angles])
    j = int(np.argmin(energies))
    best_t, best_e = float(angles[j]), float(energies[j])
    refinements = []
    inc = increment
    while inc >= min_increment:
        inc /= 2
        probes = [(t, settled(t)) for t in (best_t - inc, best_t + inc)]
        refinements += [(t % (2 * math.pi), e) for t, e in probes]
        for t, e in probes:
            if e < best_e:
                best_t, best_e = t, e
    return SweepResult(angles, energies, best_t % (2 * math.pi), best_e, refinements)
