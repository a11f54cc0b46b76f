"""Numerical Pansu differentials, pullback fields, grid integration, and the
verification experiments, plus the polynomial map DSL."""

from .dsl import (ArityError, MapExpr, ParseError, Polynomial,
                  UnknownIdentifierError, parse_map)
from .maps import (CompiledMap, LiftCertificate, SymplecticDefect, compile_map,
                   folding_map, lift_symplectomorphism, vertical_mixing_contact_map)
from .pansu import PansuField, NonContactError, pansu_differential, pansu_field
from .experiments import (approximation_residual, holomorphy_classifier,
                          integrate_wedge, pansu_pullback_field,
                          pullback_theorem_residual)

__all__ = [
    "ArityError", "MapExpr", "ParseError", "Polynomial", "UnknownIdentifierError",
    "parse_map", "CompiledMap", "LiftCertificate", "SymplecticDefect",
    "compile_map", "folding_map", "lift_symplectomorphism",
    "vertical_mixing_contact_map", "PansuField", "NonContactError",
    "pansu_differential", "pansu_field", "approximation_residual",
    "holomorphy_classifier", "integrate_wedge", "pansu_pullback_field",
    "pullback_theorem_residual",
]
