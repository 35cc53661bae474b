"""Numerical verification toolkit for fractional Korn inequalities on Lipschitz domains."""

__version__ = "0.1.0"

from .constants import (ConstantLedger, KornChain, SmallnessError, SpOneError, bilip_constant, chain_constants,
                        korn_constant_from_chain, lemma0ext_constant, polar_tail_constant, smallness_threshold)
from .fields import (CutoffFunction, VectorField, affine_field, bump_field, bump_skew_field, constant_field, cosine_cutoff,
                     localize, multiply_cutoff, partition_of_unity, pull_back, skew_field, zero_extend,
                     zero_field)
from .geometry import (Ball, Box, ChartedSet, DomainAtlas, Epigraph, HalfSpace, LipschitzGraph, RigidMotion,
                       WholeSpace, check_atlas, distortion_ratio, flatten, make_ball_atlas, unflatten)
from .seminorm import (EstimatorConfig, KernelKind, SeminormEstimate, cross_term, gagliardo_seminorm,
                       hardy_functional, lp_norm, projected_seminorm, seminorm_pair, tail_integral)
from .oracle import oracle_seminorm
