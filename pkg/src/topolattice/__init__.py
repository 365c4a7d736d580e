"""Tight-binding toolkit for magnetic-field derivatives, topological invariants and adiabatic dynamics."""
from .lattice import (
    ConfigurationError,
    DisorderConfig,
    HoppingKernel,
    LatticeSpec,
    MagneticField,
    OperatorRep,
    build_hamiltonian,
    build_magnetic_translation,
)
from .algebra import GaplessError, SpectralDecomposition, TraceWindow

__version__ = "0.1.0"
