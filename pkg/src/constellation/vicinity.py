"""First-order vicinities, vicinity scores, representative databases and binary feature vectors."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit

from .assignment import Assignment, hungarian, solve
from .core import Constellation, Minutia, ScoreParams, score_matrix, to_local_array

DB_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Vicinity:
    """A center minutia (global frame) and its members in the center's local frame.

    ``members[0]`` is the center itself at (0, 0, 0).
    """

    center: Minutia
    members: np.ndarray
    rho: float
    order: int = 1
    source_index: int = -1

    def __len__(self) -> int:
        return len(self.members)

    @property
    def n_neighbors(self) -> int:
        return len(self.members) - 1


@dataclass
class VicinityScore:
    value: float
    nar: int
    nas: int
    assignment: Assignment
    associated_cost: float
    k_na: float
    penalty_sign: int = 1
    forgiven: int = 0

    @property
    def penalty_cost(self) -> float:
        return (self.nar + self.nas) * self.k_na

    def recompute(self) -> float:
        return self.associated_cost + self.penalty_sign * (self.nar + self.nas - self.forgiven) * self.k_na


def extract_vicinities(c: Constellation, rho: float, order: int = 1) -> list[Vicinity]:
    """One vicinity per minutia; membership is ``distance < rho`` (strict)."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    pts = c.points
    n = len(pts)
    if n == 0:
        return []
    d2 = ((pts[:, None, :2] - pts[None, :, :2]) ** 2).sum(-1)
    out = []
    for i in range(n):
        others = [j for j in np.flatnonzero(d2[i] < rho * rho) if j != i]
        idx = [i, *others]
        members = to_local_array(pts[i], pts[idx])
        members[0] = 0.0
        members.setflags(write=False)
        out.append(Vicinity(c[i], members, rho, order, i))
    return out


def vicinity_score(a: Vicinity, b: Vicinity, p: ScoreParams) -> VicinityScore:
    """Score two vicinities; lower is more similar.

    Members are associated by minimum-cost assignment, associations whose
    score exceeds ``p.s_max`` are dissolved, and every member left without a
    partner on either side adds ``K_NA``.
    """
    if a.order != b.order:
        raise ValueError("cannot compare vicinities of different orders")
    s = score_matrix(np.asarray(a.members), np.asarray(b.members), p.w_theta)
    asg = solve(s)
    kept = [(i, j) for i, j in asg.pairs if s[i, j] <= p.s_max]
    assoc = float(sum(s[i, j] for i, j in kept))
    rows = {i for i, _ in kept}
    cols = {j for _, j in kept}
    gated = Assignment(
        pairs=kept,
        total_cost=assoc,
        unassigned_rows=[i for i in range(len(a)) if i not in rows],
        unassigned_cols=[j for j in range(len(b)) if j not in cols],
    )
    nar = len(a) - len(kept)
    nas = len(b) - len(kept)
    value = assoc + p.penalty_sign * (nar + nas) * p.k_na
    return VicinityScore(value, nar, nas, gated, assoc, p.k_na, p.penalty_sign)


# -- compiled batch scoring ---------------------------------------------------


@njit(cache=True)
def _pair_value(a, b, w, k_na, s_max, sign):
    m = a.shape[0]
    n = b.shape[0]
    if m >= n:
        rows, cols, big, small = m, n, a, b
    else:
        rows, cols, big, small = n, m, b, a
    s = np.empty((rows, rows))
    smax_entry = 0.0
    for i in range(rows):
        for j in range(cols):
            dx = big[i, 0] - small[j, 0]
            dy = big[i, 1] - small[j, 1]
            dt = np.fmod(big[i, 2] - small[j, 2], 2 * math.pi)
            if dt <= -math.pi:
                dt += 2 * math.pi
            elif dt > math.pi:
                dt -= 2 * math.pi
            v = dx * dx + dy * dy + w * dt * dt
            s[i, j] = v
            if v > smax_entry:
                smax_entry = v
    for i in range(rows):
        for j in range(cols, rows):
            s[i, j] = smax_entry
    col = hungarian(s)
    assoc = 0.0
    kept = 0
    for i in range(rows):
        c = col[i]
        if c < cols and s[i, c] <= s_max:
            assoc += s[i, c]
            kept += 1
    return assoc + sign * ((m - kept) + (n - kept)) * k_na


@njit(cache=True)
def _score_all(a_flat, a_off, b_flat, b_off, w, k_na, s_max, sign):
    na = a_off.shape[0] - 1
    nb = b_off.shape[0] - 1
    out = np.empty((na, nb))
    for i in range(na):
        a = a_flat[a_off[i] : a_off[i + 1]]
        for j in range(nb):
            out[i, j] = _pair_value(a, b_flat[b_off[j] : b_off[j + 1]], w, k_na, s_max, sign)
    return out


@njit(cache=True)
def _min_over_candidates(c_flat, c_off, r_flat, r_off, w, k_na, s_max, sign):
    # for each rep, the lowest score over all candidate vicinities
    nc = c_off.shape[0] - 1
    nr = r_off.shape[0] - 1
    out = np.full(nr, np.inf)
    for j in range(nr):
        r = r_flat[r_off[j] : r_off[j + 1]]
        best = np.inf
        for i in range(nc):
            sz = c_off[i + 1] - c_off[i]
            # size mismatch alone costs |m - n| * K_NA when penalties are positive
            if sign > 0 and abs(sz - r.shape[0]) * k_na >= best:
                continue
            v = _pair_value(c_flat[c_off[i] : c_off[i + 1]], r, w, k_na, s_max, sign)
            if v < best:
                best = v
        out[j] = best
    return out


def _pack(vs: Sequence[Vicinity]) -> tuple[np.ndarray, np.ndarray]:
    off = np.zeros(len(vs) + 1, dtype=np.int64)
    if vs:
        off[1:] = np.cumsum([len(v) for v in vs])
        flat = np.ascontiguousarray(np.concatenate([v.members for v in vs]), dtype=float)
    else:
        flat = np.zeros((0, 3))
    return flat, off


def _kernel_params(p: ScoreParams) -> tuple[float, float, float, float]:
    return float(p.w_theta), float(p.k_na), float(p.s_max), float(p.penalty_sign)


def score_table(a: Sequence[Vicinity], b: Sequence[Vicinity], p: ScoreParams) -> np.ndarray:
    """Matrix of ``vicinity_score(a[i], b[j], p).value``."""
    if not a or not b:
        return np.zeros((len(a), len(b)))
    return _score_all(*_pack(a), *_pack(b), *_kernel_params(p))


def min_scores(vicinities: Sequence[Vicinity], reps: Sequence[Vicinity], p: ScoreParams) -> np.ndarray:
    """Best score of any vicinity against each rep (``inf`` when there are none)."""
    if not vicinities:
        return np.full(len(reps), np.inf)
    return _min_over_candidates(*_pack(vicinities), *_pack(reps), *_kernel_params(p))


# -- representative database and feature vectors -------------------------------


@dataclass
class RepresentativeDB:
    reps: list[Vicinity]
    rho: float
    l_min: int
    l_max: int
    d_min: float
    params: ScoreParams
    order: int = 1
    # extraction settings needed to rebuild order-2 vicinities from raw minutiae
    source: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.reps)

    def to_dict(self) -> dict:
        return {
            "version": DB_FORMAT_VERSION,
            "order": self.order,
            "rho": self.rho,
            "l_min": self.l_min,
            "l_max": self.l_max,
            "d_min": self.d_min,
            "params": self.params.to_dict(),
            "source": self.source,
            "reps": [
                {
                    "center": dict(zip("x y theta".split(), map(float, r.center))),
                    "members": [{"x": float(x), "y": float(y), "theta": float(t)} for x, y, t in r.members],
                }
                for r in self.reps
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RepresentativeDB":
        if d.get("version") != DB_FORMAT_VERSION:
            raise ValueError(f"unsupported DB version {d.get('version')!r}")
        order = int(d.get("order", 1))
        reps = []
        for k, r in enumerate(d["reps"]):
            c = r["center"]
            members = np.array([[m["x"], m["y"], m["theta"]] for m in r["members"]], dtype=float).reshape(-1, 3)
            members.setflags(write=False)
            reps.append(Vicinity(Minutia(c["x"], c["y"], c["theta"]), members, float(d["rho"]), order, k))
        return cls(
            reps=reps,
            rho=float(d["rho"]),
            l_min=int(d["l_min"]),
            l_max=int(d["l_max"]),
            d_min=float(d["d_min"]),
            params=ScoreParams.from_dict(d["params"]),
            order=order,
            source=dict(d.get("source", {})),
        )

    @property
    def db_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "RepresentativeDB":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def select_representatives(
    candidates: Sequence[Vicinity],
    l_min: int,
    l_max: int,
    d_min: float,
    n_target: int,
    params: ScoreParams,
    rng_seed: int,
) -> list[Vicinity]:
    """Greedy seeded selection of size-bounded, pairwise dissimilar vicinities."""
    if n_target < 1:
        raise ValueError("n_target must be at least 1")
    order = np.random.default_rng(rng_seed).permutation(len(candidates))
    kept: list[Vicinity] = []
    kparams = _kernel_params(params)
    flat = np.zeros((0, 3))
    off = [0]
    for idx in order:
        v = candidates[idx]
        if not (l_min <= len(v) <= l_max):
            continue
        if kept:
            vf, vo = _pack([v])
            scores = _score_all(vf, vo, flat, np.asarray(off, dtype=np.int64), *kparams)
            if scores.min() <= d_min:
                continue
        kept.append(v)
        flat = np.concatenate([flat, v.members])
        off.append(off[-1] + len(v))
        if len(kept) == n_target:
            return kept
    raise ValueError(f"pool exhausted: found {len(kept)} of {n_target} representative vicinities")


def build_representative_db(
    pool: Sequence[Constellation],
    rho: float = 75.0,
    l_min: int = 3,
    l_max: int = 8,
    d_min: float | None = None,
    n_target: int = 128,
    params: ScoreParams | None = None,
    rng_seed: int = 0,
) -> RepresentativeDB:
    """Select ``n_target`` representatives from the vicinities of ``pool``.

    ``d_min`` defaults to ``K_NA``.
    """
    params = params or ScoreParams.for_radius(rho)
    d_min = params.k_na if d_min is None else d_min
    candidates = [v for c in pool for v in extract_vicinities(c, rho)]
    reps = select_representatives(candidates, l_min, l_max, d_min, n_target, params, rng_seed)
    reps = [replace(r, source_index=k) for k, r in enumerate(reps)]
    return RepresentativeDB(reps, rho, l_min, l_max, d_min, params)


@dataclass(frozen=True)
class FeatureVector:
    bits: np.ndarray
    threshold: float
    db_id: str

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8).ravel()
        if b.size and b.max() > 1:
            raise ValueError("bits must be 0 or 1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return len(self.bits)

    def to_hex(self) -> str:
        """Lowercase hex; bit 0 is the most significant bit of the first byte."""
        return np.packbits(self.bits, bitorder="big").tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, n_bits: int, threshold: float, db_id: str) -> "FeatureVector":
        raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="big")
        if len(bits) < n_bits or bits[n_bits:].any():
            raise ValueError("hex string does not match the declared bit count")
        return cls(bits[:n_bits], threshold, db_id)

    def to_dict(self) -> dict:
        return {"db_id": self.db_id, "threshold": self.threshold, "n_bits": len(self), "bits": self.to_hex()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVector":
        return cls.from_hex(d["bits"], int(d["n_bits"]), float(d["threshold"]), d["db_id"])


# Default bit thresholds in units of K_NA, per level. A score made only of
# penalties is an exact multiple of K_NA, so the thresholds sit strictly
# between multiples to keep bits away from exact ties.
BIT_RATIOS = {1: 1.5, 2: 1.25}


def default_bit_threshold(p: ScoreParams, order: int = 1) -> float:
    return BIT_RATIOS[order] * p.k_na


def db_vicinities(c: Constellation, db: RepresentativeDB) -> list[Vicinity]:
    """Vicinities of ``c`` at the level (order and radii) the DB was built for."""
    if db.order == 1:
        return extract_vicinities(c, db.rho)
    from .second_order import SecondOrderParams, extract_second_order

    return extract_second_order(c, SecondOrderParams.from_source(db.source, db.rho))


def feature_vector_from_vicinities(vs: Sequence[Vicinity], db: RepresentativeDB, t: float) -> FeatureVector:
    if not t > 0:
        raise ValueError("threshold must be positive")
    bits = (min_scores(vs, db.reps, db.params) < t).astype(np.uint8)
    return FeatureVector(bits, float(t), db.db_id)


def compute_feature_vector(c: Constellation, db: RepresentativeDB, t: float) -> FeatureVector:
    """Bit i is set iff some vicinity of ``c`` scores below ``t`` against rep i."""
    return feature_vector_from_vicinities(db_vicinities(c, db), db, t)


def hamming(u: FeatureVector, v: FeatureVector) -> int:
    if u.db_id != v.db_id or u.threshold != v.threshold or len(u) != len(v):
        raise ValueError("incomparable vectors")
    return int(np.count_nonzero(u.bits != v.bits))
