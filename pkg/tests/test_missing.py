import json
import math

import numpy as np
import pytest

from constellation.core import Constellation, ScoreParams
from constellation.missing import (
    MissingHypothesis,
    MissingParams,
    MissingReport,
    adjust_scores,
    augment,
    detect_missing,
    pair_greedy,
    score_decompose,
)
from constellation.synth import PerturbSpec, covered_indices, generate, perturb
from constellation.vicinity import build_representative_db, compute_feature_vector, extract_vicinities, hamming, vicinity_score

P = ScoreParams.for_radius(75)


def planted(seed, cover=2, jitter=0.0):
    c = generate(40, seed=seed)
    i = covered_indices(c, 75, cover)[seed % len(covered_indices(c, 75, cover))]
    cand, gt = perturb(c, PerturbSpec(transform="random", jitter_sigma=jitter, occlude_indices=(i,), seed=seed))
    truth = gt.transform.apply(c.points[[i], :2])[0]
    return cand, c, truth


def test_params_validation():
    with pytest.raises(ValueError):
        MissingParams(k_max=3)
    with pytest.raises(ValueError):
        MissingParams(eps_miss=0)
    with pytest.raises(ValueError):
        MissingParams(penalty_dominance_ratio=-1)


def test_identical_constellations_empty():
    c = generate(40, seed=1)
    assert len(detect_missing(c, c)) == 0


def test_planted_occlusion_recovered():
    hits = 0
    for seed in range(10):
        cand, tmpl, truth = planted(seed)
        rep = detect_missing(cand, tmpl)
        near = [h for h in rep.hypotheses if math.dist(h.position, truth) <= rep.params.eps_miss]
        if near:
            hits += 1
            assert len(set(near[0].supporters)) >= 2
            assert near[0].forgiven_penalty == pytest.approx(P.k_na * len(near[0].supporters))
    assert hits >= 9


def test_hypothesis_support_within_eps():
    cand, tmpl, _ = planted(3)
    rep = detect_missing(cand, tmpl)
    assert rep.hypotheses
    for h in rep.hypotheses:
        assert len(set(h.supporters)) >= 2
        assert 0 <= h.theta < 2 * math.pi


def test_single_vicinity_occlusion_gives_nothing():
    # a pair of minutiae far from everything else: each lies in only the other's vicinity
    c = generate(30, 300, 300, seed=2)
    pts = np.vstack([c.points, [[900, 900, 0.5], [930, 910, 1.0]]])
    tmpl = Constellation(pts)
    cand = Constellation(pts[:-1])
    assert len(detect_missing(cand, tmpl)) == 0


def test_score_decompose():
    vs = extract_vicinities(generate(30, seed=4), 75)
    v = vs[0]
    assert score_decompose(vicinity_score(v, v, P), P) == (0.0, 0.0, False)
    big = max(vs, key=len)
    smaller = type(big)(big.center, np.asarray(big.members)[:-1], big.rho)
    assoc, pen, dom = score_decompose(vicinity_score(big, smaller, P), P)
    assert assoc == pytest.approx(0, abs=1e-9) and pen == P.k_na and dom
    for a in vs[:6]:
        for b in vs[:6]:
            sc = vicinity_score(a, b, P)
            assoc, pen, _ = score_decompose(sc, P)
            assert assoc + pen == pytest.approx(sc.value, abs=1e-9)


def test_pair_greedy():
    t = np.array([[5.0, 1, 9], [1, 2, 9], [7, 8, 0]])
    assert pair_greedy(t) == [(0, 1), (1, 0), (2, 2)]
    assert pair_greedy(np.zeros((0, 3))) == []
    assert len(pair_greedy(np.ones((2, 5)))) == 2


def test_adjust_scores_contract():
    cand, tmpl, _ = planted(5)
    rep = detect_missing(cand, tmpl)
    assert rep.hypotheses
    assert adjust_scores(rep.scores, MissingReport([], rep.pairs)) == rep.scores
    adj = adjust_scores(rep.scores, rep)
    index = {p: k for k, p in enumerate(rep.pairs)}
    expect = {}
    for h in rep.hypotheses:
        for s in h.supporters:
            expect[index[s]] = expect.get(index[s], 0) + 1
    for k, (before, after) in enumerate(zip(rep.scores, adj)):
        if k in expect:
            assert after.value == pytest.approx(max(before.associated_cost, before.value - expect[k] * P.k_na))
        else:
            assert after is before
        assert after.value >= after.associated_cost - 1e-9
    assert [s.value for s in adjust_scores(adj, rep)] == [s.value for s in adj]


def test_adjust_two_supporters_reduced_by_k_na():
    cand, tmpl, _ = planted(5)
    rep = detect_missing(cand, tmpl)
    h = rep.hypotheses[0]
    one = MissingReport([MissingHypothesis(h.x, h.y, h.theta, h.supporters[:2], 2 * P.k_na)], rep.pairs, rep.scores, rep.n_template)
    adj = adjust_scores(rep.scores, one)
    changed = [k for k, (a, b) in enumerate(zip(rep.scores, adj)) if a.value != b.value]
    assert len(changed) == 2
    for k in changed:
        assert rep.scores[k].value - adj[k].value == pytest.approx(P.k_na)


def test_adjust_unknown_supporter():
    rep = MissingReport([MissingHypothesis(0, 0, 0, [(99, 99), (98, 98)], 0)], [(0, 0)])
    with pytest.raises(ValueError):
        adjust_scores([], rep)


def test_report_json_and_augment():
    cand, tmpl, truth = planted(6)
    rep = detect_missing(cand, tmpl)
    d = json.loads(json.dumps(rep.to_dict()))
    assert {"x", "y", "theta", "supporters", "forgiven"} <= set(d["hypotheses"][0])
    aug = augment(cand, rep)
    assert len(aug) == len(cand) + len(rep.hypotheses)
    assert min(math.dist(p, truth) for p in aug.points[len(cand) :, :2]) <= 10


def test_symmetric_direction_finds_spurious():
    c = generate(40, seed=8)
    i = covered_indices(c, 75, 3)[0]
    # the template lacks a minutia the candidate has
    tmpl = Constellation(np.delete(c.points, i, axis=0))
    rep = detect_missing(c, tmpl, mp=MissingParams(symmetric=True))
    spurious = [h for h in rep.hypotheses if h.direction == "spurious"]
    assert any(math.dist(h.position, c.points[i, :2]) <= 10 for h in spurious)
    assert rep.forgiven_total == sum(h.forgiven_penalty for h in rep.hypotheses if h.direction == "missing")


def test_hypothesis_rate_lower_on_unrelated_pairs():
    planted_rate = np.mean([len(detect_missing(*planted(s)[:2])) > 0 for s in range(10)])
    unrelated = np.mean([len(detect_missing(generate(40, seed=100 + s), generate(40, seed=200 + s))) > 0 for s in range(10)])
    print(f"hypothesis rate: planted {planted_rate:.2f}, unrelated {unrelated:.2f}")
    assert unrelated < planted_rate


def test_augmenting_helps_binarised_match(pool):
    db = build_representative_db(pool, n_target=128, rng_seed=0)
    t = 2 * P.k_na
    plain = fixed = 0
    for s in range(15):
        cand, tmpl, _ = planted(s, cover=3)
        ref = compute_feature_vector(tmpl, db, t)
        plain += hamming(compute_feature_vector(cand, db, t), ref)
        fixed += hamming(compute_feature_vector(augment(cand, detect_missing(cand, tmpl)), db, t), ref)
    assert fixed < plain
