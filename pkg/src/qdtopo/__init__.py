"""Quality-diversity topology optimization over evolvable void-region domains."""

from .archive import Archive, ArchiveEntry, DescriptorSpace
from .errors import (BisectionFailure, EmptyArchive, InvalidDesign,
                     NonConvergence, SingularSystem)
from .fem import LoadCase, Mesh2D, SolverSettings
from .genome import GeneBounds, Genome, VariationParams, VoidGene
from .problems import ProblemSpec, build_problem, gripper_problem, mbb_problem
from .simp import DensityField, SimpParams, SimpResult, run_simp

__version__ = "0.1.0"

__all__ = [
    "Archive", "ArchiveEntry", "DescriptorSpace", "BisectionFailure",
    "EmptyArchive", "InvalidDesign", "NonConvergence", "SingularSystem",
    "LoadCase", "Mesh2D", "SolverSettings", "GeneBounds", "Genome",
    "VariationParams", "VoidGene", "ProblemSpec", "build_problem",
    "gripper_problem", "mbb_problem", "DensityField", "SimpParams",
    "SimpResult", "run_simp", "__version__",
]
