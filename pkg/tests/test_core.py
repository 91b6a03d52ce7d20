import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from constellation.core import (
    Constellation,
    Minutia,
    RigidTransform,
    ScoreParams,
    angle_diff,
    apply_rigid,
    canonical_angle,
    from_local_frame,
    minutia_score,
    score_matrix,
    to_local_frame,
)

from conftest import rotation

coord = st.floats(-1e3, 1e3, allow_nan=False)
angle = st.floats(-20, 20, allow_nan=False)
minutia = st.tuples(coord, coord, angle).map(lambda t: Minutia(*t))


def test_angle_diff_examples():
    assert angle_diff(0, 0) == 0
    assert angle_diff(0.1, 2 * math.pi - 0.1) == pytest.approx(0.2)
    assert angle_diff(math.pi / 2, 0) == pytest.approx(math.pi / 2)
    assert angle_diff(0, math.pi) == pytest.approx(math.pi)


@given(angle, angle)
def test_angle_diff_range_and_antisymmetry(a, b):
    d = angle_diff(a, b)
    assert -math.pi < d <= math.pi + 1e-12
    assert math.isclose(math.cos(d), math.cos(a - b), abs_tol=1e-9)
    if abs(abs(d) - math.pi) > 1e-9:
        assert angle_diff(b, a) == pytest.approx(-d, abs=1e-12)


@given(angle)
def test_canonical_angle_range(t):
    c = canonical_angle(t)
    assert 0 <= c < 2 * math.pi


def test_apply_rigid_examples():
    assert apply_rigid((1, 0), RigidTransform()) == pytest.approx((1, 0))
    assert apply_rigid((1, 0), RigidTransform(0, 0, math.pi / 2)) == pytest.approx((0, 1))
    assert apply_rigid((1, 0), RigidTransform(3, 4, math.pi / 2)) == pytest.approx((3, 5))


@given(st.tuples(coord, coord, angle), st.tuples(coord, coord, angle), st.tuples(coord, coord))
def test_transform_compose_and_inverse(t1, t2, p):
    a, b = RigidTransform(*t1), RigidTransform(*t2)
    q = np.array([p])
    assert np.allclose(a.inverse().apply(a.apply(q)), q, atol=1e-8)
    assert np.allclose(a.compose(b).apply(q), a.apply(b.apply(q)), atol=1e-8)


def test_local_frame_examples():
    assert to_local_frame(Minutia(0, 0, 0), Minutia(5, 2, 1)) == pytest.approx((5, 2, 1))
    assert to_local_frame(Minutia(5, 2, 1), Minutia(5, 2, 1)) == pytest.approx((0, 0, 0))
    got = to_local_frame(Minutia(0, 0, math.pi / 2), Minutia(0, 3, math.pi / 2))
    # independent evaluation with an explicit rotation matrix
    xy = rotation(-math.pi / 2) @ np.array([0.0, 3.0])
    assert got[:2] == pytest.approx(tuple(xy), abs=1e-12)
    assert got == pytest.approx((3, 0, 0), abs=1e-12)
    assert from_local_frame(Minutia(0, 0, 0), Minutia(5, 2, 1)) == pytest.approx((5, 2, 1))
    assert from_local_frame(Minutia(5, 2, 1), Minutia(0, 0, 0)) == pytest.approx((5, 2, 1))


def test_local_frame_round_trip(rng):
    worst = 0.0
    for _ in range(1000):
        c = Minutia(*rng.uniform(-500, 500, 2), rng.uniform(0, 2 * math.pi))
        m = Minutia(*rng.uniform(-500, 500, 2), rng.uniform(0, 2 * math.pi))
        back = from_local_frame(c, to_local_frame(c, m))
        worst = max(worst, abs(back.x - m.x), abs(back.y - m.y), abs(angle_diff(back.theta, m.theta)))
    assert worst < 1e-9


@given(minutia, minutia, st.tuples(coord, coord, angle))
def test_local_frame_rigid_invariance(c, m, t):
    T = RigidTransform(*t)
    c2 = Minutia(*T.apply_minutiae(np.array([c]))[0])
    m2 = Minutia(*T.apply_minutiae(np.array([m]))[0])
    a, b = to_local_frame(c, m), to_local_frame(c2, m2)
    assert abs(a.x - b.x) < 1e-6 and abs(a.y - b.y) < 1e-6
    assert abs(angle_diff(a.theta, b.theta)) < 1e-6


def test_minutia_score_examples():
    p = ScoreParams()
    assert minutia_score(Minutia(1, 2, 3), Minutia(1, 2, 3), p) == 0
    assert minutia_score(Minutia(0, 0, 0), Minutia(3, 4, 0), p) == pytest.approx(25)
    p2 = ScoreParams(sigma_x=2.0, sigma_theta=1.0)
    assert minutia_score(Minutia(0, 0, 0), Minutia(0, 0, math.pi), p2) == pytest.approx(2 * math.pi**2)
    # theta wraps
    assert minutia_score(Minutia(0, 0, 0), Minutia(0, 0, 2 * math.pi), p) == pytest.approx(0, abs=1e-18)


@given(minutia, minutia)
def test_minutia_score_symmetric(a, b):
    p = ScoreParams()
    assert minutia_score(a, b, p) == minutia_score(b, a, p)
    assert minutia_score(a, b, p) >= 0


def test_score_matrix_matches_scalar(rng):
    p = ScoreParams()
    a = rng.uniform(0, 100, (5, 3))
    b = rng.uniform(0, 100, (4, 3))
    m = score_matrix(a, b, p.w_theta)
    for i in range(5):
        for j in range(4):
            assert m[i, j] == pytest.approx(minutia_score(Minutia(*a[i]), Minutia(*b[j]), p), rel=1e-12)


def test_score_params():
    p = ScoreParams.for_radius(75)
    assert p.k_na == pytest.approx(75**2 / 4)
    assert p.s_max == pytest.approx(3 * 75**2 / 4)
    assert p.w_theta == pytest.approx(5 / 0.3)
    assert ScoreParams(angle_weight=2.0).w_theta == 2.0
    assert ScoreParams.from_dict(p.to_dict()) == p
    inf = ScoreParams(s_max=math.inf)
    assert ScoreParams.from_dict(inf.to_dict()) == inf
    with pytest.raises(ValueError):
        ScoreParams(sigma_x=0)
    with pytest.raises(ValueError):
        ScoreParams(k_na=-1)


def test_constellation_invariants():
    c = Constellation(np.array([[0, 0, -1.0], [1, 1, 7.0]]), id="x")
    assert np.all((c.points[:, 2] >= 0) & (c.points[:, 2] < 2 * math.pi))
    assert not c.points.flags.writeable
    assert len(c) == 2 and c[1].x == 1
    with pytest.raises(ValueError, match="duplicate"):
        Constellation(np.array([[0, 0, 0], [0, 5e-7, 1]]))
    with pytest.raises(ValueError):
        Constellation(np.array([[0, np.nan, 0]]))
    assert len(Constellation(np.zeros((0, 3)))) == 0
    assert Constellation.from_minutiae([(0, 0, 0), (1, 1, 1)], id="x") == Constellation(np.array([[0, 0, 0], [1, 1, 1.0]]), id="x")
