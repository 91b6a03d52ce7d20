"""scikit-learn style wrappers and input validation.

The encoders take sequences of constellations (or (n, 3) arrays of x, y,
theta in radians) rather than a feature matrix; the registrations take the
moving points as ``X`` and the paired fixed points as ``y``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .core import Constellation, RigidTransform, ScoreParams
from .second_order import SecondOrderParams, build_second_order_db, decide_two_pass, two_pass_vectors
from .spring import PhysicsParams, assemble, kabsch_align, simulate
from .vicinity import build_representative_db, compute_feature_vector, default_bit_threshold, hamming


def check_minutiae(X) -> np.ndarray:
    """An (n, 3) finite float array of x, y, theta."""
    arr = check_array(X, dtype=float, ensure_min_samples=0)
    if arr.shape[1] != 3:
        raise ValueError(f"expected 3 columns (x, y, theta), got {arr.shape[1]}")
    return arr


def check_points(X, min_points: int = 1) -> np.ndarray:
    """An (n, 2) finite float array; a third (theta) column is dropped."""
    arr = check_array(X, dtype=float, ensure_min_samples=min_points)
    if arr.shape[1] == 3:
        arr = arr[:, :2]
    if arr.shape[1] != 2:
        raise ValueError(f"expected 2 or 3 columns, got {arr.shape[1]}")
    return arr


def check_constellation(X, id: str = "") -> Constellation:
    if isinstance(X, Constellation):
        return X
    return Constellation(check_minutiae(X), id=id)


def check_constellations(X) -> list[Constellation]:
    if isinstance(X, (Constellation, np.ndarray)):
        raise TypeError("expected a sequence of constellations")
    out = [check_constellation(c, id=f"#{k}") for k, c in enumerate(X)]
    if not out:
        raise ValueError("need at least one constellation")
    return out


def _check_pairs(pairs) -> list[tuple[Constellation, Constellation]]:
    out = []
    for k, pair in enumerate(pairs):
        if len(pair) != 2:
            raise ValueError(f"pair {k} does not have two members")
        out.append((check_constellation(pair[0]), check_constellation(pair[1])))
    return out


class VicinityEncoder(TransformerMixin, BaseEstimator):
    """Binary vicinity features against a representative DB learned from a pool.

    ``fit(pool)`` selects ``n_reps`` representatives; ``transform(X)`` returns
    one row of ``n_reps`` bits per constellation.
    """

    def __init__(self, rho=75.0, n_reps=128, l_min=3, l_max=8, d_min=None, bit_threshold=None, random_state=0):
        self.rho = rho
        self.n_reps = n_reps
        self.l_min = l_min
        self.l_max = l_max
        self.d_min = d_min
        self.bit_threshold = bit_threshold
        self.random_state = random_state

    def fit(self, X, y=None):
        pool = check_constellations(X)
        self.db_ = build_representative_db(
            pool, self.rho, self.l_min, self.l_max, self.d_min, self.n_reps, ScoreParams.for_radius(self.rho), self.random_state
        )
        self.threshold_ = self.bit_threshold if self.bit_threshold is not None else default_bit_threshold(self.db_.params)
        self.n_features_out_ = len(self.db_)
        return self

    def encode(self, c):
        check_is_fitted(self, "db_")
        return compute_feature_vector(check_constellation(c), self.db_, self.threshold_)

    def transform(self, X):
        check_is_fitted(self, "db_")
        cs = check_constellations(X)
        return np.vstack([self.encode(c).bits for c in cs])

    def distance(self, a, b) -> int:
        return hamming(self.encode(a), self.encode(b))


class TwoPassMatcher(BaseEstimator):
    """First- and second-order Hamming decision on (candidate, template) pairs."""

    def __init__(self, rho1=75.0, rho2=150.0, n_reps=128, n_reps2=64, t1=20, t2=8, bit_t1=None, bit_t2=None, random_state=0):
        self.rho1 = rho1
        self.rho2 = rho2
        self.n_reps = n_reps
        self.n_reps2 = n_reps2
        self.t1 = t1
        self.t2 = t2
        self.bit_t1 = bit_t1
        self.bit_t2 = bit_t2
        self.random_state = random_state

    def fit(self, X, y=None):
        pool = check_constellations(X)
        self.params_ = SecondOrderParams(self.rho1, self.rho2, t1=self.t1, t2=self.t2, bit_t1=self.bit_t1, bit_t2=self.bit_t2)
        self.db1_ = build_representative_db(pool, self.rho1, n_target=self.n_reps, rng_seed=self.random_state)
        self.db2_ = build_second_order_db(pool, self.params_, n_target=self.n_reps2, rng_seed=self.random_state)
        return self

    def _results(self, pairs):
        check_is_fitted(self, "db2_")
        out = []
        for cand, tmpl in _check_pairs(pairs):
            vc = two_pass_vectors(cand, self.db1_, self.db2_, self.params_)
            vt = two_pass_vectors(tmpl, self.db1_, self.db2_, self.params_)
            out.append(decide_two_pass(vc, vt, self.params_))
        return out

    def decision_function(self, pairs) -> np.ndarray:
        """(hamming1, hamming2) per pair."""
        return np.array([(r.hamming1, r.hamming2) for r in self._results(pairs)], dtype=int).reshape(-1, 2)

    def predict(self, pairs) -> np.ndarray:
        return np.array([r.match for r in self._results(pairs)], dtype=bool)


class _Registration(TransformerMixin, BaseEstimator):
    def transform(self, X):
        check_is_fitted(self, "transform_")
        return self.transform_.apply(check_points(X, min_points=0))

    def inverse_transform(self, X):
        check_is_fitted(self, "transform_")
        return self.transform_.inverse().apply(check_points(X, min_points=0))

    def _check_xy(self, X, y):
        if y is None:
            raise ValueError("y (the fixed points paired with X) is required")
        a, b = check_points(X), check_points(y)
        if len(a) != len(b):
            raise ValueError(f"size mismatch: {len(a)} vs {len(b)} points")
        return a, b


class KabschRegistration(_Registration):
    """Closed-form least-squares rigid alignment of X onto the paired y."""

    def fit(self, X, y=None):
        a, b = self._check_xy(X, y)
        self.transform_, self.residual_sq_ = kabsch_align(a, b)
        return self


class SpringRegistration(_Registration):
    """Rigid alignment found by letting X relax on springs tied to y.

    After ``fit``: ``transform_``, ``e_min_``, ``sim_phi_``, ``converged_``
    and ``n_steps_``.
    """

    def __init__(self, k=1.0, k_v=None, dt=0.01, max_steps=200_000, eps_kinetic=None, settle_window=50):
        self.k = k
        self.k_v = k_v
        self.dt = dt
        self.max_steps = max_steps
        self.eps_kinetic = eps_kinetic
        self.settle_window = settle_window

    def fit(self, X, y=None):
        a, b = self._check_xy(X, y)
        p = PhysicsParams(self.k, self.k_v, self.dt, self.max_steps, self.eps_kinetic, self.settle_window)
        r = simulate(assemble(a, b, p))
        self.transform_: RigidTransform = r.final_pose
        self.e_min_ = r.e_min
        self.sim_phi_ = r.sim_phi
        self.converged_ = r.converged
        self.n_steps_ = r.steps
        return self

    def score(self, X, y=None) -> float:
        """``exp(-sim_phi)`` of the fitted pose applied to X against y (1 is a perfect fit)."""
        check_is_fitted(self, "transform_")
        a, b = self._check_xy(X, y)
        return math.exp(-float(np.hypot(*(self.transform_.apply(a) - b).T).sum()))
