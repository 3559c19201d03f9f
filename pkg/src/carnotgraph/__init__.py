"""Intrinsic graphs over complementary subgroups of Carnot groups.

Exact (Fraction) and floating-point arithmetic in exponential coordinates,
splittings ``G = W · L``, intrinsic graphs and their translations, numerical
Pansu differentiation, and covering estimates for the area formula.
"""
from __future__ import annotations

from .algebra import (
    StratifiedAlgebra,
    Subspace,
    ValidationReport,
    bracket,
    check_carnot_subgroup,
    check_normal_complement_is_carnot,
    complementary,
    is_graded_subalgebra,
    is_ideal,
    is_subalgebra,
    validate_algebra,
)
from .calculus import (
    BlowupTrace,
    DifferentiabilityReport,
    QuotientTrace,
    blowup_tangent_check,
    intrinsic_diff,
    intrinsic_quotient_trace,
    pansu_diff,
)
from .exceptions import (
    CarnotError,
    DimensionError,
    DomainError,
    EstimationError,
    HomomorphismError,
    NotDifferentiableError,
    ParseError,
    PreconditionError,
    SplittingError,
)
from .graph import (
    BoxDomain,
    GraphFunction,
    HomogeneousHom,
    IntrinsicLinearMap,
    LipschitzEstimate,
    PolynomialRule,
    SampleTableRule,
    ShiftedDomain,
    TranslatedFunction,
    graph_map,
    hom_from_linear,
    image_is_subgroup,
    intrinsic_lip_constant,
    linear_from_hom,
    translate,
)
from .group import CarnotGroup, exact, quasi_triangle_constant
from .groupfile import GroupDefinition, catalog_names, load_group
from .measure import (
    AreaConfig,
    AreaReport,
    MeasureEstimate,
    area_check,
    classical_area_oracle,
    curve_length,
    hausdorff_content,
    jacobian,
)
from .splitting import Splitting, make_splitting, splitting_from_definition, verify_normal_projection_identities

__version__ = "0.1.0"
