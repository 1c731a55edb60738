"""Numerical verification of moving-frame, zero-curvature and self-dual Yang-Mills reductions."""
from .algebra import (CoefficientTriple, CurvatureTriple, commutator, so3_from_triple, spin_matrix,
                      su2_from_triple)
from .fields import Axis, Field, GridSpec, ResidualReport, antiderivative, field_norms, partial
from .sdym import GaugePotential, field_strength, gauge_transform, sd_residual, sd_residual_2p1
from .zerocurvature import (ConnectionSet, LaxParameters, SpectralExpansion, build_lax, eval_expansion,
                            mmlxii_residual, plane_residuals, wavefunction_path_check, zc_residual)

__version__ = "0.1.0"

__all__ = [
    "Axis", "CoefficientTriple", "ConnectionSet", "CurvatureTriple", "Field", "GaugePotential",
    "GridSpec", "LaxParameters", "ResidualReport", "SpectralExpansion", "antiderivative", "build_lax",
    "commutator", "eval_expansion", "field_norms", "field_strength", "gauge_transform",
    "mmlxii_residual", "partial", "plane_residuals", "sd_residual", "sd_residual_2p1",
    "so3_from_triple", "spin_matrix", "su2_from_triple", "wavefunction_path_check", "zc_residual",
]
