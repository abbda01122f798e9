"""Optomechanics of one-dimensional cavities holding arrays of dielectric membranes."""
from .core import (C, ArrayDesign, BranchTrackingError, CavityConfig, CollectiveMode,
                   FieldProfile, FiguresOfMerit, GeometryError, KindMismatchError, MembraneSpec,
                   MirrorSpec, NotAModeError, SolverError, Violation, build_center_array,
                   build_mirror_array, empty_cavity, membrane_reflectivity, slab_reflectivity,
                   slab_thickness_for_reflectivity, validate)

__version__ = "0.1.0"
