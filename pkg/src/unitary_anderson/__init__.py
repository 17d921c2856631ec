"""Finite-volume numerics for the unitary Anderson model ``U = D S``."""

from .model import BoundarySpec, LatticeBox, ModelParams, PhaseDistribution, PhaseField, sample_phase_field

__all__ = ["BoundarySpec", "LatticeBox", "ModelParams", "PhaseDistribution", "PhaseField",
           "sample_phase_field"]
__version__ = "0.1.0"
