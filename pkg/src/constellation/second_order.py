"""Vicinities of vicinities and the two-pass match decision."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import Constellation, Minutia, ScoreParams, from_local_array
from .vicinity import (
    FeatureVector,
    RepresentativeDB,
    Vicinity,
    compute_feature_vector,
    default_bit_threshold,
    extract_vicinities,
    hamming,
    select_representatives,
)


@dataclass(frozen=True)
class SecondOrderParams:
    """Radii, significance bounds and decision thresholds for both passes.

    ``l_min``/``l_max`` bound the neighbour count (center excluded) of a
    significant first-order vicinity. ``t1``/``t2`` are Hamming thresholds;
    ``bit_t1``/``bit_t2`` are the score thresholds used to binarise each level;
    they default to 1.5 * K_NA at the first level and 1.25 * K_NA at the second.
    """

    rho1: float = 75.0
    rho2: float = 150.0
    l_min: int = 3
    l_max: int = 8
    t1: int = 20
    t2: int = 8
    bit_t1: float | None = None
    bit_t2: float | None = None

    def __post_init__(self):
        if not 0 < self.rho1 < self.rho2:
            raise ValueError("need 0 < rho1 < rho2")
        if self.l_min > self.l_max:
            raise ValueError("l_min must not exceed l_max")

    def score_params(self, level: int) -> ScoreParams:
        return ScoreParams.for_radius(self.rho1 if level == 1 else self.rho2)

    def bit_threshold(self, level: int) -> float:
        t = self.bit_t1 if level == 1 else self.bit_t2
        if t is not None:
            return t
        return default_bit_threshold(self.score_params(level), level)

    def to_source(self) -> dict:
        return {"rho1": self.rho1, "sig_l_min": self.l_min, "sig_l_max": self.l_max}

    @classmethod
    def from_source(cls, source: dict, rho2: float) -> "SecondOrderParams":
        return cls(rho1=float(source["rho1"]), rho2=rho2, l_min=int(source["sig_l_min"]), l_max=int(source["sig_l_max"]))


def filter_significant(vs: Sequence[Vicinity], l_min: int, l_max: int) -> list[Vicinity]:
    """Keep vicinities with ``l_min <= neighbours <= l_max`` whose centers are pairwise apart.

    Larger vicinities win; ties go to the lower ``source_index``. A vicinity
    is dropped when its center lies strictly inside an already kept one.
    """
    sig = [v for v in vs if l_min <= v.n_neighbors <= l_max]
    sig.sort(key=lambda v: (-v.n_neighbors, v.source_index))
    kept: list[Vicinity] = []
    for v in sig:
        cx, cy = v.center.x, v.center.y
        if any((cx - k.center.x) ** 2 + (cy - k.center.y) ** 2 < k.rho * k.rho for k in kept):
            continue
        kept.append(v)
    return kept


def barycenter(v: Vicinity) -> Minutia:
    """Mean member position in the global frame, oriented like the center minutia."""
    mx, my = np.asarray(v.members)[:, :2].mean(axis=0)
    x, y, _ = from_local_array(v.center, np.array([[mx, my, 0.0]]))[0]
    return Minutia(float(x), float(y), v.center.theta)


def extract_second_order(c: Constellation, p: SecondOrderParams) -> list[Vicinity]:
    sig = filter_significant(extract_vicinities(c, p.rho1), p.l_min, p.l_max)
    sig.sort(key=lambda v: v.source_index)
    bary, origin = [], []
    for v in sig:
        b = barycenter(v)
        if any(abs(b.x - o.x) <= 1e-6 and abs(b.y - o.y) <= 1e-6 for o in bary):
            continue
        bary.append(b)
        origin.append(v.source_index)
    derived = Constellation.from_minutiae(bary, id=c.id)
    return [replace(v, source_index=origin[v.source_index]) for v in extract_vicinities(derived, p.rho2, order=2)]


def build_second_order_db(
    pool: Sequence[Constellation],
    p: SecondOrderParams,
    l_min: int = 2,
    l_max: int = 8,
    d_min: float | None = None,
    n_target: int = 64,
    params: ScoreParams | None = None,
    rng_seed: int = 0,
) -> RepresentativeDB:
    """Representative DB over order-2 vicinities (member-count bounds include the center)."""
    params = params or p.score_params(2)
    d_min = params.k_na if d_min is None else d_min
    candidates = [v for c in pool for v in extract_second_order(c, p)]
    reps = select_representatives(candidates, l_min, l_max, d_min, n_target, params, rng_seed)
    reps = [replace(r, source_index=k) for k, r in enumerate(reps)]
    return RepresentativeDB(reps, p.rho2, l_min, l_max, d_min, params, order=2, source=p.to_source())


@dataclass
class TwoPassResult:
    match: bool
    hamming1: int
    hamming2: int
    first_order_match: bool


def two_pass_vectors(c: Constellation, db1: RepresentativeDB, db2: RepresentativeDB, p: SecondOrderParams) -> tuple[FeatureVector, FeatureVector]:
    if db1.order != 1 or db2.order != 2:
        raise ValueError("db1 must be first-order and db2 second-order")
    return compute_feature_vector(c, db1, p.bit_threshold(1)), compute_feature_vector(c, db2, p.bit_threshold(2))


def decide_two_pass(cand: tuple[FeatureVector, FeatureVector], tmpl: tuple[FeatureVector, FeatureVector], p: SecondOrderParams) -> TwoPassResult:
    h1 = hamming(cand[0], tmpl[0])
    h2 = hamming(cand[1], tmpl[1])
    return TwoPassResult(h1 <= p.t1 and h2 <= p.t2, h1, h2, h1 <= p.t1)


def match_two_pass(
    candidate: Constellation,
    template: Constellation,
    db1: RepresentativeDB,
    db2: RepresentativeDB,
    p: SecondOrderParams,
) -> TwoPassResult:
    """Match iff both the first- and second-order Hamming distances are within threshold."""
    return decide_two_pass(two_pass_vectors(candidate, db1, db2, p), two_pass_vectors(template, db1, db2, p), p)
