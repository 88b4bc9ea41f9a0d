"""Anisotropic Cahn-Hilliard with degenerate mobility on a flat torus."""

from anideg.anisotropy import AnisotropySpec, Constants, certify_constants, eval_A, eval_Agrad
from anideg.grid import TorusGrid
from anideg.material import MaterialSpec, RegularizedMaterial, log_quench, double_well

__version__ = "0.1.0"

__all__ = [
    "AnisotropySpec",
    "Constants",
    "MaterialSpec",
    "RegularizedMaterial",
    "TorusGrid",
    "certify_constants",
    "double_well",
    "eval_A",
    "eval_Agrad",
    "log_quench",
]
