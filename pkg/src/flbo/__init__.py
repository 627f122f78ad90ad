"""Finsler-Laplace-Beltrami operators on triangle meshes.

Randers metrics and their duals, per-face metric fields built from curvature
frames, operator assembly, spectral tools and time-domain references.
"""

from .exceptions import (
    AssemblyError,
    ConfigurationError,
    FLBOError,
    InvalidMetricError,
    MalformedInputError,
    MeshError,
    SolverError,
)
from .randers import (
    DualRandersMetric,
    RandersMetric,
    dual_randers,
    dual_via_block_inverse,
    eval_dual_definition,
    eval_primal,
    finsler_diffusivity,
    validate_randers,
)
from .mesh import TriangleMesh, load_mesh, write_obj, write_off
from .geometry import FaceFrames, edge_opposite_angles, estimate_curvature_frames
from .operators import (
    AnisotropyParams,
    OperatorPair,
    assemble_albo,
    assemble_family,
    assemble_flbo,
    assemble_mass,
    assemble_stiffness,
    export_family,
    load_family,
)
from .spectral import (
    FilterSpec,
    SpectralBasis,
    anisotropic_convolve,
    chebyshev_filter,
    directional_sum_convolve,
    eigensolve,
    finsler_hks,
    heat_kernel,
    heat_propagate,
    time_averaged_heat_kernel,
)
from .diffusion import (
    DiffusionConfig,
    implicit_euler_diffuse,
    nonlinear_finsler_rhs,
    simplification_sweep,
    simplified_finsler_rhs,
    simplified_randers_solve,
)

__version__ = "0.1.0"
