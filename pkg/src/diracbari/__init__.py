"""Spectral toolkit for 2x2 Dirac-type boundary value problems."""
from .bc import (
    CanonicalBC, DiracWeights, RawBC, adjoint_bc, canonicalize, classify, classify_strict,
    is_regular, is_self_adjoint,
)
from .det0 import SpectrumWindow, delta0, zeros, zeros_closed_form, zeros_contour, zeros_polynomial
from .perturbed import Potential, adjoint_eigenfunction, delta_q, eigenfunction, perturbed_zeros
from .bari import bari_c0_check, closeness_sums, pair_diagnostic, unperturbed_pair
from .damped_string import StringProblem, reduce, similarity_residual, string_bari_condition

__all__ = [
    "CanonicalBC", "DiracWeights", "RawBC", "adjoint_bc", "canonicalize", "classify",
    "classify_strict", "is_regular", "is_self_adjoint", "SpectrumWindow", "delta0", "zeros",
    "zeros_closed_form", "zeros_contour", "zeros_polynomial", "Potential",
    "adjoint_eigenfunction", "delta_q", "eigenfunction", "perturbed_zeros", "bari_c0_check",
    "closeness_sums", "pair_diagnostic", "unperturbed_pair", "StringProblem", "reduce",
    "similarity_residual", "string_bari_condition",
]
