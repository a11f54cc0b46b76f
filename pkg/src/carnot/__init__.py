"""Computational toolkit for Carnot groups: graded Lie algebra calculus,
weight-graded exterior calculus, Pansu pullback, center-of-mass mollification,
and the constructive classification of nonrigid groups."""

from . import algebra, classify, forms, group, homs, io_schemas, smoothing
from .algebra import (GradedLieAlgebra, ProductQuotient, abelian,
                      central_quotient, check_product_quotient,
                      complex_heisenberg, complexify, direct_sum, free_step2,
                      heisenberg, product_quotient, validate_algebra)

__version__ = "0.1.0"

__all__ = [
    "algebra", "classify", "forms", "group", "homs", "io_schemas", "smoothing",
    "GradedLieAlgebra", "ProductQuotient", "abelian", "central_quotient",
    "check_product_quotient", "complex_heisenberg", "complexify", "direct_sum",
    "free_step2", "heisenberg", "product_quotient", "validate_algebra",
]
