"""gmclab: a seeded Monte Carlo laboratory for subcritical multiplicative
chaos measures built from exact 2D free-field approximations."""

from .domain import DomainSpec, KernelEval
from .gff import FieldSample, SamplerConfig, sample_field
from .gmc import GmcMeasure, build_measure

__all__ = [
    "DomainSpec",
    "KernelEval",
    "SamplerConfig",
    "FieldSample",
    "sample_field",
    "GmcMeasure",
    "build_measure",
]

__version__ = "0.1.0"
