"""Genuine/impostor benchmarks over seeded synthetic corpora.

Scores are distances: a pair is accepted when its score is <= the threshold.
FAR(t) is the fraction of impostor pairs accepted, FRR(t) the fraction of
genuine pairs rejected. Every per-pair score is kept so the rates can be
recomputed from the dump.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from sklearn.metrics import roc_auc_score

from .core import Constellation, ScoreParams
from .missing import MissingParams, adjust_scores, detect_missing
from .second_order import SecondOrderParams, build_second_order_db, two_pass_vectors
from .spring import PhysicsParams, assemble, simulate
from .synth import GroundTruth, PerturbSpec, covered_indices, generate, perturb
from .vicinity import build_representative_db, compute_feature_vector, default_bit_threshold, hamming

MATCHERS = ("vicinity", "two_pass", "spring")


@dataclass(frozen=True)
class CorpusSpec:
    """A population of synthetic subjects and how their genuine impressions are made.

    ``perturb.seed`` is ignored; each genuine impression gets its own seed
    derived from the bench seed. With ``occlusion_cover > 0`` the occluded
    minutiae are drawn among those inside at least that many ``cover_rho``
    vicinities.
    """

    population: int = 50
    n_minutiae: int = 40
    width: float = 400.0
    height: float = 400.0
    min_sep: float = 10.0
    perturb: PerturbSpec = PerturbSpec(transform="random", jitter_sigma=2.0, theta_jitter_sigma=0.05)
    max_impostors: int = 500
    occlusion_cover: int = 0
    cover_rho: float = 75.0

    def to_dict(self) -> dict:
        d = asdict(self)
        t = self.perturb.transform
        d["perturb"]["transform"] = t if t is None or isinstance(t, str) else asdict(t)
        return d


@dataclass(frozen=True)
class BenchConfig:
    rho: float = 75.0
    n_reps: int = 128
    pool_size: int = 50
    bit_threshold: float | None = None  # defaults to 1.5 * K_NA
    second_order: SecondOrderParams = SecondOrderParams()
    n_reps2: int = 64
    physics: PhysicsParams = PhysicsParams()

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Subject:
    template: Constellation
    # genuine impression and the template index of each of its minutiae (-1 = spurious)
    impression: Constellation
    origin: list[int]
    truth: GroundTruth | None = None


def _summary(x: Sequence[float]) -> dict | None:
    if len(x) == 0:
        return None
    a = np.asarray(x, dtype=float)
    return {
        "n": int(a.size),
        "mean": float(a.mean()),
        "std": float(a.std()),
        "min": float(a.min()),
        "median": float(np.median(a)),
        "max": float(a.max()),
    }


def make_corpus(spec: CorpusSpec, seed: int) -> list[Subject]:
    if spec.population < 1:
        raise ValueError("empty population")
    rng = np.random.Generator(np.random.PCG64(seed))
    seeds = rng.integers(0, 2**31, size=(spec.population, 2))
    out = []
    for k, (gs, ps) in enumerate(seeds):
        t = generate(spec.n_minutiae, spec.width, spec.height, spec.min_sep, seed=int(gs), id=f"s{k:04d}")
        ps = replace(spec.perturb, seed=int(ps))
        if spec.occlusion_cover and ps.occlusions:
            cov = covered_indices(t, spec.cover_rho, spec.occlusion_cover)
            if len(cov) < ps.occlusions:
                raise ValueError(f"subject {t.id} has only {len(cov)} covered minutiae")
            pick = np.random.default_rng(int(ps.seed)).choice(cov, ps.occlusions, replace=False)
            ps = replace(ps, occlusions=0, occlude_indices=tuple(int(i) for i in pick))
        imp, gt = perturb(t, ps)
        out.append(Subject(t, imp, gt.origin, gt))
    return out


def impostor_pairs(n: int, limit: int, seed: int) -> list[tuple[int, int]]:
    """Ordered (template, impression) pairs of distinct subjects, subsampled to ``limit``."""
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    if len(pairs) > limit:
        rng = np.random.Generator(np.random.PCG64(seed + 1))
        idx = np.sort(rng.choice(len(pairs), limit, replace=False))
        pairs = [pairs[i] for i in idx]
    return pairs


def _pool(cfg: BenchConfig, spec: CorpusSpec, seed: int) -> list[Constellation]:
    # the DB pool never overlaps the population's seeds
    rng = np.random.Generator(np.random.PCG64(seed + 2))
    return [
        generate(spec.n_minutiae, spec.width, spec.height, spec.min_sep, seed=int(s), id=f"pool{k}")
        for k, s in enumerate(rng.integers(2**31, 2**32, size=cfg.pool_size))
    ]


def _spring_score(a: Constellation, b: Constellation, origin: Sequence[int], physics: PhysicsParams) -> float:
    # springs tie each impression minutia to the template minutia it came from;
    # impostor impressions are tied index-for-index
    pairs = [(o, k) for k, o in enumerate(origin) if 0 <= o < len(a)]
    ia, ib = zip(*pairs)
    return simulate(assemble(a.xy[list(ia)], b.xy[list(ib)], physics)).e_min


def score_pairs(
    matcher: str,
    subjects: Sequence[Subject],
    pairs: Sequence[tuple[int, int]],
    cfg: BenchConfig,
    spec: CorpusSpec,
    seed: int,
) -> list[float]:
    """Score (template i, impression j) pairs with ``matcher``."""
    if matcher not in MATCHERS:
        raise ValueError(f"unknown matcher {matcher!r}; choose from {', '.join(MATCHERS)}")
    if matcher == "spring":
        out = []
        for i, j in pairs:
            origin = subjects[j].origin if i == j else range(len(subjects[j].impression))
            out.append(_spring_score(subjects[i].template, subjects[j].impression, origin, cfg.physics))
        return out

    pool = _pool(cfg, spec, seed)
    sp = ScoreParams.for_radius(cfg.rho)
    bit_t = cfg.bit_threshold if cfg.bit_threshold is not None else default_bit_threshold(sp)
    db1 = build_representative_db(pool, cfg.rho, n_target=cfg.n_reps, params=sp, rng_seed=seed)
    needed = {i for i, _ in pairs} | {("imp", j) for _, j in pairs}

    def items():
        for key in sorted(needed, key=str):
            yield key, subjects[key].template if isinstance(key, int) else subjects[key[1]].impression

    if matcher == "vicinity":
        vecs = {k: compute_feature_vector(c, db1, bit_t) for k, c in items()}
        return [float(hamming(vecs[i], vecs[("imp", j)])) for i, j in pairs]

    p2 = replace(cfg.second_order, rho1=cfg.rho, bit_t1=bit_t)
    db2 = build_second_order_db(pool, p2, n_target=cfg.n_reps2, rng_seed=seed)
    vecs = {k: two_pass_vectors(c, db1, db2, p2) for k, c in items()}
    # one number per pair: the worse of the two levels
    return [float(max(hamming(vecs[i][0], vecs[("imp", j)][0]), hamming(vecs[i][1], vecs[("imp", j)][1]))) for i, j in pairs]


def rates(genuine: Sequence[float], impostor: Sequence[float], thresholds: Sequence[float]):
    """(far, frr) per threshold; far is None without impostor scores."""
    g = np.sort(np.asarray(genuine, dtype=float))
    im = np.sort(np.asarray(impostor, dtype=float))
    th = np.asarray(thresholds, dtype=float)
    frr = [float(x) for x in (len(g) - np.searchsorted(g, th, side="right")) / len(g)] if len(g) else None
    far = [float(x) for x in np.searchsorted(im, th, side="right") / len(im)] if len(im) else None
    return far, frr


def auc(genuine: Sequence[float], impostor: Sequence[float]) -> float | None:
    """Probability that a genuine pair scores lower than an impostor pair (ties count half)."""
    if not len(genuine) or not len(impostor):
        return None
    y = np.r_[np.ones(len(genuine)), np.zeros(len(impostor))]
    return float(roc_auc_score(y, -np.r_[genuine, impostor]))


@dataclass
class RocReport:
    matcher: str
    thresholds: list[float]
    far: list[float] | None
    frr: list[float] | None
    genuine_scores: dict | None
    impostor_scores: dict | None
    auc: float | None
    config: dict
    # (pair_id, kind, score)
    pairs: list[tuple[str, str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("pairs")
        return d

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_csv(self, path) -> None:
        write_pairs_csv(path, self.pairs)


def write_pairs_csv(path, rows: Sequence[tuple[str, str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair_id", "kind", "score"])
        for pid, kind, score in rows:
            w.writerow([pid, kind, repr(float(score))])


def run_bench(
    matcher: str,
    spec: CorpusSpec,
    thresholds: Sequence[float],
    seed: int = 0,
    cfg: BenchConfig | None = None,
) -> RocReport:
    """Score every genuine pair and up to ``spec.max_impostors`` impostor pairs."""
    cfg = cfg or BenchConfig()
    subjects = make_corpus(spec, seed)
    n = len(subjects)
    gen = [(i, i) for i in range(n)]
    imp = impostor_pairs(n, spec.max_impostors, seed)
    scores = score_pairs(matcher, subjects, gen + imp, cfg, spec, seed)
    g, im = scores[: len(gen)], scores[len(gen) :]
    far, frr = rates(g, im, thresholds)
    rows = [(f"{subjects[i].template.id}~{subjects[j].template.id}", "genuine" if i == j else "impostor", s) for (i, j), s in zip(gen + imp, scores)]
    return RocReport(
        matcher=matcher,
        thresholds=[float(t) for t in thresholds],
        far=far,
        frr=frr,
        genuine_scores=_summary(g),
        impostor_scores=_summary(im),
        auc=auc(g, im),
        config={"matcher": matcher, "seed": seed, "corpus": spec.to_dict(), "bench": cfg.to_dict()},
        pairs=rows,
    )


@dataclass
class MissingGainReport:
    thresholds: list[float]
    frr_plain: list[float]
    frr_with_missing: list[float]
    forgiven_total: float
    n_hypotheses: int
    config: dict
    # (pair_id, plain score, adjusted score)
    pairs: list[tuple[str, float, float]] = field(default_factory=list)

    @property
    def difference(self) -> list[float]:
        return [a - b for a, b in zip(self.frr_plain, self.frr_with_missing)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("pairs")
        d["difference"] = self.difference
        return d


def compare_missing_gain(
    spec: CorpusSpec,
    thresholds: Sequence[float],
    seed: int = 0,
    rho: float = 75.0,
    mp: MissingParams | None = None,
) -> MissingGainReport:
    """FRR of the mean vicinity score over genuine pairs, with and without forgiveness."""
    sp = ScoreParams.for_radius(rho)
    mp = mp or MissingParams()
    plain, adjusted, rows = [], [], []
    forgiven, n_hyp = 0.0, 0
    for s in make_corpus(spec, seed):
        report = detect_missing(s.impression, s.template, rho, sp, mp)
        a = report.comparison_score()
        b = report.comparison_score(adjust_scores(report.scores, report))
        plain.append(a)
        adjusted.append(b)
        rows.append((s.template.id, a, b))
        forgiven += report.forgiven_total
        n_hyp += len(report.hypotheses)
    _, frr_a = rates(plain, [], thresholds)
    _, frr_b = rates(adjusted, [], thresholds)
    return MissingGainReport(
        [float(t) for t in thresholds],
        frr_a,
        frr_b,
        forgiven,
        n_hyp,
        {"seed": seed, "rho": rho, "corpus": spec.to_dict(), "missing": asdict(mp), "score": sp.to_dict()},
        rows,
    )
