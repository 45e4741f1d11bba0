"""Structure-preserving finite elements for thick plates and beams.

Assembles shear-deformable plate and beam models as explicit
port-Hamiltonian systems (M, Q, J, B), routes boundary conditions into
prescribed inputs and output constraints, and integrates or analyzes
them without losing the power balance.
"""

__version__ = "0.1.0"

from .assembly import (
    AssembledPlate,
    FESpaces,
    PLATE_FIELDS,
    assemble_boundary_dynamic,
    assemble_boundary_kinematic,
    assemble_energy,
    assemble_interconnection_tensorial,
    assemble_interconnection_vectorial,
    assemble_mass,
    assemble_plate,
    boundary_ports,
    interpolate_fields,
)
from .boundary import (
    BCCondition,
    BCSpec,
    ConstantSignal,
    ConstrainedPHSystem,
    SineSignal,
    clamped_everywhere,
    consistent_initialize,
    free_everywhere,
    split_ports,
)
from .errors import AssemblyError, ConfigError, MeshError, PhfemError, SolverError
from .integrate import Trajectory, simulate, step_midpoint_dae, step_midpoint_ode
from .material import (
    BeamMaterial,
    PlateMaterial,
    PlateRigidity,
    bending_energy_density,
    bending_energy_density_tensor,
    curvature_to_tensor,
    momenta_tensor,
    plate_rigidity,
)
from .mesh import (
    Mesh1D,
    Mesh2D,
    boundary_nodes_by_tag,
    make_interval,
    parse_mesh2d,
    serialize_mesh2d,
    structured_rectangle,
)
from .phcore import (
    DiracReport,
    FieldLayout,
    PHSystem,
    check_dirac,
    coenergy,
    hamiltonian,
    make_phsystem,
    power_product,
)
from .spectral import ModalResult, modal_analysis
from .timoshenko import AssembledBeam, assemble_beam, mimics_plate

__all__ = [
    "__version__",
    "AssembledBeam",
    "AssembledPlate",
    "AssemblyError",
    "BCCondition",
    "BCSpec",
    "BeamMaterial",
    "ConfigError",
    "ConstantSignal",
    "ConstrainedPHSystem",
    "DiracReport",
    "FESpaces",
    "FieldLayout",
    "Mesh1D",
    "Mesh2D",
    "MeshError",
    "ModalResult",
    "PHSystem",
    "PLATE_FIELDS",
    "PhfemError",
    "PlateMaterial",
    "PlateRigidity",
    "SineSignal",
    "SolverError",
    "Trajectory",
    "assemble_beam",
    "assemble_boundary_dynamic",
    "assemble_boundary_kinematic",
    "assemble_energy",
    "assemble_interconnection_tensorial",
    "assemble_interconnection_vectorial",
    "assemble_mass",
    "assemble_plate",
    "bending_energy_density",
    "bending_energy_density_tensor",
    "boundary_nodes_by_tag",
    "boundary_ports",
    "check_dirac",
    "clamped_everywhere",
    "coenergy",
    "consistent_initialize",
    "curvature_to_tensor",
    "free_everywhere",
    "hamiltonian",
    "interpolate_fields",
    "make_interval",
    "make_phsystem",
    "mimics_plate",
    "modal_analysis",
    "momenta_tensor",
    "parse_mesh2d",
    "plate_rigidity",
    "power_product",
    "serialize_mesh2d",
    "simulate",
    "split_ports",
    "step_midpoint_dae",
    "step_midpoint_ode",
    "structured_rectangle",
]
