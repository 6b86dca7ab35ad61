"""Mixed tensor fields ``S^k M x S^l M`` and their operator algebra."""

from . import canonical, dense
from .fields import (
    MixedTensorField,
    apply_A,
    basis_element,
    basis_fH,
    basis_fH0,
    basis_fH_count,
    boundary_vanishing,
    constant_field,
    cov_derivative,
    cov_derivative_reference,
    d_prime,
    d_s,
    disk_points,
    full_sym,
    im_lambda_residual,
    lambda_op,
    phi_evaluate,
    polynomial_field,
    quasi_random,
    random_polynomial_field,
    sym_block,
    table_residual,
)

__all__ = [
    "canonical",
    "dense",
    "MixedTensorField",
    "apply_A",
    "basis_element",
    "basis_fH",
    "basis_fH0",
    "basis_fH_count",
    "boundary_vanishing",
    "constant_field",
    "cov_derivative",
    "cov_derivative_reference",
    "d_prime",
    "d_s",
    "disk_points",
    "full_sym",
    "im_lambda_residual",
    "lambda_op",
    "phi_evaluate",
    "polynomial_field",
    "quasi_random",
    "random_polynomial_field",
    "sym_block",
    "table_residual",
]
