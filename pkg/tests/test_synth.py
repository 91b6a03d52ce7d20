import math

import numpy as np
import pytest

from constellation.core import Constellation, RigidTransform, angle_diffs
from constellation.spring import kabsch_align
from constellation.synth import PerturbSpec, covered_indices, generate, perturb


def test_generate_examples():
    assert len(generate(0)) == 0
    one = generate(1, 50, 60, seed=3)
    assert 0 <= one.points[0, 0] <= 50 and 0 <= one.points[0, 1] <= 60
    c = generate(40, min_sep=10, seed=1)
    d = np.sqrt(((c.xy[:, None] - c.xy[None]) ** 2).sum(-1))
    np.fill_diagonal(d, np.inf)
    assert d.min() >= 10
    assert np.all((c.points[:, 2] >= 0) & (c.points[:, 2] < 2 * math.pi))


def test_generate_deterministic_and_failing():
    assert generate(30, seed=7) == generate(30, seed=7)
    assert generate(30, seed=7) != generate(30, seed=8)
    with pytest.raises(ValueError, match="could not place"):
        generate(50, 20, 20, min_sep=10, seed=0)
    with pytest.raises(ValueError):
        generate(-1)


def test_zero_spec_is_identity():
    c = generate(30, seed=2)
    out, gt = perturb(c, PerturbSpec())
    assert out == c
    assert gt.removed == [] and gt.added == [] and gt.origin == list(range(30))


def test_rigid_spec_recovered_by_kabsch():
    c = generate(30, seed=2)
    T = RigidTransform(40, -25, 1.1)
    out, gt = perturb(c, PerturbSpec(transform=T))
    assert gt.transform == T
    est, resid = kabsch_align(c.xy, out.xy)
    assert resid < 1e-12
    assert (est.dx, est.dy, est.theta) == pytest.approx((T.dx, T.dy, T.theta), abs=1e-6)
    assert np.all(np.abs(angle_diffs(out.points[:, 2], c.points[:, 2] + T.theta)) < 1e-9)


def test_random_transform_and_seed():
    c = generate(30, seed=2)
    a, ga = perturb(c, PerturbSpec(transform="random", jitter_sigma=1, seed=4))
    b, gb = perturb(c, PerturbSpec(transform="random", jitter_sigma=1, seed=4))
    assert a == b and ga.transform == gb.transform
    with pytest.raises(ValueError):
        PerturbSpec(transform="spin")


def test_occlusion_and_spurious_ground_truth():
    c = generate(30, seed=5)
    out, gt = perturb(c, PerturbSpec(occlusions=3, spurious=2, occlude_indices=(4,), seed=1))
    assert len(out) == 30 - 4 + 2
    assert 4 in gt.removed and len(gt.removed) == 4
    assert gt.added == [26, 27]
    assert gt.origin[-2:] == [-1, -1]
    for k, o in enumerate(gt.origin[:-2]):
        assert np.array_equal(out.points[k], c.points[o])
    with pytest.raises(ValueError):
        perturb(c, PerturbSpec(occlusions=30))
    with pytest.raises(ValueError):
        perturb(c, PerturbSpec(occlude_indices=(99,)))
    with pytest.raises(ValueError):
        PerturbSpec(spurious=-1)


def test_distortion_is_smooth_and_bounded():
    c = generate(40, seed=6)
    out, _ = perturb(c, PerturbSpec(distortion_amp=3.0, distortion_scale=200, seed=2))
    disp = out.xy - c.xy
    assert np.abs(disp).max() <= 2 * 3.0 + 1e-9
    assert np.abs(disp).max() > 0.1
    # neighbours move together
    d = np.sqrt(((c.xy[:, None] - c.xy[None]) ** 2).sum(-1))
    i, j = np.unravel_index(np.argmin(d + np.eye(40) * 1e9), d.shape)
    assert np.linalg.norm(disp[i] - disp[j]) <= 2 * 2 * 3.0 * 2 * math.pi / 200 * d[i, j] + 1e-9


def test_covered_indices():
    c = Constellation(np.array([(0, 0, 0), (10, 0, 0), (20, 0, 0), (500, 500, 0)], dtype=float))
    assert covered_indices(c, 15, 2) == [1]
    assert covered_indices(c, 25, 2) == [0, 1, 2]
