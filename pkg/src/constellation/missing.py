"""Missing-minutia analysis.

When several template vicinities each lose one member against their best
candidate vicinity, and those lost members all map to the same spot of the
candidate, the candidate probably lost a single minutia there. Such
"explainable" penalties can be forgiven, or the minutia re-inserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .core import Constellation, Minutia, ScoreParams, from_local_frame
from .vicinity import Vicinity, VicinityScore, extract_vicinities, score_table, vicinity_score


@dataclass(frozen=True)
class MissingParams:
    eps_miss: float = 10.0
    k_max: int = 2
    penalty_dominance_ratio: float = 0.25
    # also hypothesise minutiae the template lacks (spurious in the candidate)
    symmetric: bool = False

    def __post_init__(self):
        if self.k_max not in (1, 2):
            raise ValueError("k_max must be 1 or 2")
        if not self.eps_miss > 0:
            raise ValueError("eps_miss must be positive")
        if self.penalty_dominance_ratio < 0:
            raise ValueError("penalty_dominance_ratio must be non-negative")


@dataclass
class MissingHypothesis:
    x: float
    y: float
    theta: float
    # one (template vicinity, candidate vicinity) entry per supporting occurrence
    supporters: list[tuple[int, int]]
    forgiven_penalty: float
    direction: str = "missing"

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "theta": self.theta,
            "supporters": [list(s) for s in self.supporters],
            "forgiven": self.forgiven_penalty,
            "direction": self.direction,
        }


@dataclass
class MissingReport:
    hypotheses: list[MissingHypothesis]
    pairs: list[tuple[int, int]] = field(default_factory=list)
    scores: list[VicinityScore] = field(default_factory=list)
    n_template: int = 0
    unpaired_cost: float = 0.0
    params: MissingParams = field(default_factory=MissingParams)

    def __len__(self) -> int:
        return len(self.hypotheses)

    @property
    def forgiven_total(self) -> float:
        return sum(h.forgiven_penalty for h in self.hypotheses if h.direction == "missing")

    def comparison_score(self, scores: Sequence[VicinityScore] | None = None) -> float:
        """Mean paired vicinity score over template vicinities (lower is better)."""
        scores = self.scores if scores is None else scores
        if self.n_template == 0:
            return 0.0
        return (sum(s.value for s in scores) + self.unpaired_cost) / self.n_template

    def to_dict(self) -> dict:
        return {
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "params": {
                "eps_miss": self.params.eps_miss,
                "k_max": self.params.k_max,
                "penalty_dominance_ratio": self.params.penalty_dominance_ratio,
                "symmetric": self.params.symmetric,
            },
            "forgiven_total": self.forgiven_total,
        }


def score_decompose(sc: VicinityScore, p: ScoreParams, ratio: float = 0.25) -> tuple[float, float, bool]:
    """Split a vicinity score into (associated cost, penalty cost, penalty-dominated?)."""
    penalty = (sc.nar + sc.nas) * p.k_na
    assoc = sc.associated_cost
    return assoc, penalty, bool(penalty > 0 and assoc <= ratio * penalty)


def pair_greedy(table: np.ndarray) -> list[tuple[int, int]]:
    """One-to-one pairing by repeatedly taking the lowest remaining score."""
    if table.size == 0:
        return []
    order = np.lexsort((np.indices(table.shape)[1].ravel(), np.indices(table.shape)[0].ravel(), table.ravel()))
    used_r, used_c, pairs = set(), set(), []
    for k in order:
        r, c = divmod(int(k), table.shape[1])
        if r in used_r or c in used_c:
            continue
        used_r.add(r)
        used_c.add(c)
        pairs.append((r, c))
        if len(pairs) == min(table.shape):
            break
    return sorted(pairs)


def _circular_mean(thetas: Sequence[float]) -> float:
    return math.atan2(sum(math.sin(t) for t in thetas), sum(math.cos(t) for t in thetas)) % (2 * math.pi)


def _hypothesis_points(
    tv: Sequence[Vicinity],
    cv: Sequence[Vicinity],
    pairs: Sequence[tuple[int, int]],
    scores: Sequence[VicinityScore],
    sp: ScoreParams,
    mp: MissingParams,
) -> list[tuple[Minutia, tuple[int, int]]]:
    points = []
    for (t, c), sc in zip(pairs, scores):
        _, _, dominated = score_decompose(sc, sp, mp.penalty_dominance_ratio)
        # the frames only correspond when the two centers are associated
        if not dominated or (0, 0) not in sc.assignment.pairs:
            continue
        lost = sc.assignment.unassigned_rows
        if not 1 <= len(lost) <= mp.k_max:
            continue
        # a two-member hypothesis posits both members, so the singleton and
        # pair enumerations yield the same set of candidate positions
        for i in lost:
            local = Minutia(*map(float, tv[t].members[i]))
            points.append((from_local_frame(cv[c].center, local), (t, c)))
    return points


def _cluster(points: list[tuple[Minutia, tuple[int, int]]], mp: MissingParams, k_na: float, direction: str) -> list[MissingHypothesis]:
    if len(points) < 2:
        return []
    xy = np.array([[m.x, m.y] for m, _ in points])
    labels = fcluster(linkage(xy, method="single"), t=mp.eps_miss, criterion="distance")
    out = []
    for lab in np.unique(labels):
        idx = list(np.flatnonzero(labels == lab))
        # single linkage can chain; keep the members within eps of the centroid
        while idx:
            centre = xy[idx].mean(axis=0)
            far = [i for i in idx if np.hypot(*(xy[i] - centre)) > mp.eps_miss]
            if not far:
                break
            worst = max(far, key=lambda i: np.hypot(*(xy[i] - centre)))
            idx.remove(worst)
        supporters = [points[i][1] for i in idx]
        if len(set(supporters)) < 2:
            continue
        centre = xy[idx].mean(axis=0)
        theta = _circular_mean([points[i][0].theta for i in idx])
        out.append(MissingHypothesis(float(centre[0]), float(centre[1]), theta, supporters, k_na * len(supporters), direction))
    out.sort(key=lambda h: (h.x, h.y))
    return out


def detect_missing(
    candidate: Constellation,
    template: Constellation,
    rho: float = 75.0,
    sp: ScoreParams | None = None,
    mp: MissingParams | None = None,
) -> MissingReport:
    """Find minutiae the template has but the candidate appears to have lost.

    Template vicinities are paired greedily with candidate vicinities by
    lowest score. Penalty-dominated pairs that lose between 1 and ``k_max``
    template members vote for those members' positions, mapped into the
    candidate frame through the paired candidate center. Votes within
    ``eps_miss`` of each other (single linkage) from at least two distinct
    vicinity pairs become hypotheses.
    """
    sp = sp or ScoreParams.for_radius(rho)
    mp = mp or MissingParams()
    tv = extract_vicinities(template, rho)
    cv = extract_vicinities(candidate, rho)
    pairs = pair_greedy(score_table(tv, cv, sp))
    scores = [vicinity_score(tv[t], cv[c], sp) for t, c in pairs]
    paired = {t for t, _ in pairs}
    unpaired = sum(len(v) * sp.k_na for k, v in enumerate(tv) if k not in paired)

    hyps = _cluster(_hypothesis_points(tv, cv, pairs, scores, sp, mp), mp, sp.k_na, "missing")
    if mp.symmetric:
        rev_scores = [vicinity_score(cv[c], tv[t], sp) for t, c in pairs]
        rev_pairs = [(c, t) for t, c in pairs]
        pts = _hypothesis_points(cv, tv, rev_pairs, rev_scores, sp, mp)
        # spurious candidate minutiae are reported in the template frame
        pts = [(m, (t, c)) for m, (c, t) in pts]
        hyps += _cluster(pts, mp, sp.k_na, "spurious")
    return MissingReport(hyps, pairs, scores, len(tv), unpaired, mp)


def adjust_scores(scores: Sequence[VicinityScore], report: MissingReport) -> list[VicinityScore]:
    """Forgive one ``K_NA`` per supporter occurrence of every missing-minutia hypothesis.

    ``scores`` is aligned with ``report.pairs``. Adjusted values never drop
    below the associated cost, and re-applying the same report is a no-op.
    """
    index = {pair: k for k, pair in enumerate(report.pairs)}
    counts = [0] * len(scores)
    for h in report.hypotheses:
        if h.direction != "missing":
            continue
        for sup in h.supporters:
            k = index.get(tuple(sup))
            if k is None or k >= len(scores):
                raise ValueError(f"supporter {sup} does not reference a known score")
            counts[k] += 1
    out = []
    for sc, n in zip(scores, counts):
        if n == 0:
            out.append(sc)
            continue
        adj = replace(sc, forgiven=min(n, sc.nar + sc.nas))
        adj.value = max(sc.associated_cost, adj.recompute())
        out.append(adj)
    return out


def augment(candidate: Constellation, report: MissingReport) -> Constellation:
    """The candidate with every missing-minutia hypothesis re-inserted."""
    extra = [(h.x, h.y, h.theta) for h in report.hypotheses if h.direction == "missing"]
    if not extra:
        return candidate
    pts = np.vstack([candidate.points, np.array(extra)])
    return Constellation(pts, id=candidate.id)
