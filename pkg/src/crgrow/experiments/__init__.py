from .coexistence import CoexistenceReport, estimate_coexistence, wilson_interval
from .corridors import check_escape_corridors, corridor_clauses, find_escape_corridors
from .coupling import (
    CouplingError,
    build_reduced_config,
    coupling_report,
    leaves_ball,
    reduced_spec,
    sandwich_bounds,
    sandwich_pair,
    sandwich_runs,
    shrink_pair,
)
from .growth import GrowthCheckReport, HypothesisError, verify_growth_along
from .outbursts import count_effective_outbursts, stabilizes
from .params import check_proppara
from .shape import ShapeReport, estimate_shape, shape_from_result, unit_directions

__all__ = [
    "CoexistenceReport", "estimate_coexistence", "wilson_interval",
    "check_escape_corridors", "corridor_clauses", "find_escape_corridors",
    "CouplingError", "build_reduced_config", "coupling_report", "leaves_ball", "reduced_spec",
    "sandwich_bounds", "sandwich_pair", "sandwich_runs", "shrink_pair",
    "GrowthCheckReport", "HypothesisError", "verify_growth_along",
    "count_effective_outbursts", "stabilizes", "check_proppara",
    "ShapeReport", "estimate_shape", "shape_from_result", "unit_directions",
]
