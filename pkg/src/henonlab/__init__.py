"""Numerical laboratory for period-doubling renormalization of 3D Henon-like maps."""

from . import errors
from .funcrep import (
    Box3,
    Interval,
    ScalarField1D,
    ScalarField3D,
    affine_rescale,
    c0_norm,
    c1_norm,
    c2_norm,
    compose,
    field_from_json,
    field_to_json,
    interpolate,
    invert_monotone,
    solve_implicit,
)
from .cantor import (
    CantorSample,
    Piece,
    Word,
    adding_machine,
    build_pieces,
    cantor_orbit,
    tip,
    write_pieces_csv,
)
from .henon import (
    HenonMap3D,
    HorizontalChange,
    RenormSequence,
    RenormStep,
    Saddle,
    SaddlePair,
    degenerate_map,
    find_doubling_parameter,
    fixed_points,
    horizontal_diffeo,
    perturbed_toy_map,
    renorm_tower,
    renormalize,
    toy_affine_map,
)
from .unimodal import (
    AffineMap1D,
    DoublingFixedPoint,
    UnimodalMap,
    is_renormalizable,
    lap_fixed_point,
    presentation_tower,
    quadratic_family,
    renormalize_1d,
    solve_fixed_point,
    universal_a,
)
from .universality import (
    JacobianFit,
    LyapunovEstimate,
    NonlinearityReport,
    PowerLawReport,
    TipDerivativeDecomposition,
    average_jacobian,
    birkhoff_jacobian,
    jac_power_law_check,
    jacobian_universality_fit,
    lyapunov_exponents,
    nonlinearity_asymptotics,
    tip_decomposition,
)

__all__ = [
    "errors",
    "Interval", "Box3", "ScalarField1D", "ScalarField3D",
    "interpolate", "invert_monotone", "solve_implicit", "compose",
    "affine_rescale", "c0_norm", "c1_norm", "c2_norm",
    "field_to_json", "field_from_json",
    "AffineMap1D", "UnimodalMap", "DoublingFixedPoint",
    "quadratic_family", "is_renormalizable", "renormalize_1d",
    "solve_fixed_point", "presentation_tower", "universal_a", "lap_fixed_point",
    "HenonMap3D", "HorizontalChange", "RenormStep", "RenormSequence",
    "Saddle", "SaddlePair",
    "degenerate_map", "toy_affine_map", "perturbed_toy_map",
    "fixed_points", "horizontal_diffeo", "renormalize", "renorm_tower",
    "find_doubling_parameter",
    "Word", "Piece", "CantorSample",
    "adding_machine", "build_pieces", "tip", "cantor_orbit", "write_pieces_csv",
    "JacobianFit", "PowerLawReport", "TipDerivativeDecomposition",
    "NonlinearityReport", "LyapunovEstimate",
    "average_jacobian", "birkhoff_jacobian", "jacobian_universality_fit",
    "jac_power_law_check", "tip_decomposition", "nonlinearity_asymptotics",
    "lyapunov_exponents",
]
