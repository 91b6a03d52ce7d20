"""Matching of oriented 2D point constellations (fingerprint minutiae)."""

from .assignment import Assignment, CostMatrix, pad_to_square, solve
from .core import (
    Constellation,
    Minutia,
    RigidTransform,
    ScoreParams,
    angle_diff,
    apply_rigid,
    from_local_frame,
    minutia_score,
    to_local_frame,
)
from .missing import MissingParams, MissingReport, adjust_scores, augment, detect_missing
from .second_order import SecondOrderParams, build_second_order_db, extract_second_order, match_two_pass
from .spring import (
    GridSpec,
    PhysicsParams,
    SimResult,
    assemble,
    brute_force_sim,
    kabsch_align,
    rotation_sweep,
    similarity_score,
    simulate,
    step,
)
from .synth import PerturbSpec, generate, perturb
from .vicinity import (
    FeatureVector,
    RepresentativeDB,
    Vicinity,
    build_representative_db,
    compute_feature_vector,
    extract_vicinities,
    hamming,
    vicinity_score,
)

__version__ = "0.1.0"
