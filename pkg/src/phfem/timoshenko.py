"""Shear-deformable beam assembled as a lossless port-Hamiltonian system.

Four piecewise-linear fields on an interval mesh, momenta first:

    transverse_momentum   rho A v
    rotation_momentum     I_rho omega
    curvature             d(theta)/dx
    shear                 d(w)/dx - theta

The beam is the one-dimensional cross-section of the plate model: its
4x4 grouped interconnection pattern coincides with the plate's pattern
grouped by (transverse, rotations, curvatures, shears), which
`mimics_plate` checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .assembly import AssembledPlate, FESpaces
from .errors import AssemblyError
from .material import BeamMaterial
from .mesh import Mesh1D
from .phcore import FieldLayout, PHSystem, make_phsystem

__all__ = [
    "BEAM_FIELDS",
    "BeamPort",
    "AssembledBeam",
    "assemble_beam",
    "grouped_block_pattern",
    "mimics_plate",
]

BEAM_FIELDS = ("transverse_momentum", "rotation_momentum", "curvature", "shear")

DYNAMIC_CHANNELS = ("Q", "M")
KINEMATIC_CHANNELS = ("v", "w")


@dataclass(frozen=True)
class BeamPort:
    """Boundary dof at one end: orientation is the 1D outward normal."""

    node: int
    tag: int
    x: float
    orientation: float


@dataclass
class AssembledBeam:
    system: PHSystem
    mesh: Mesh1D
    material: BeamMaterial
    control_variant: str
    ports: tuple[BeamPort, BeamPort]
    channels: tuple[str, str]

    model_kind = "beam"

    @property
    def layout(self) -> FieldLayout:
        return self.system.layout

    @property
    def port_labels(self) -> tuple[str, ...]:
        return self.system.port_labels

    def port_map(self) -> list[dict]:
        out = []
        for c, ch in enumerate(self.channels):
            for k, p in enumerate(self.ports):
                out.append(
                    {
                        "label": self.system.port_labels[c * 2 + k],
                        "meaning": ch,
                        "tag": p.tag,
                        "node": p.node,
                        "arc": p.x,
                        "normal": [p.orientation],
                    }
                )
        return out


def _beam_layout(mesh: Mesh1D) -> FieldLayout:
    n = mesh.n_nodes
    return FieldLayout(BEAM_FIELDS, (n, n, n, n), n_momentum=2)


def assemble_beam(
    mesh: Mesh1D,
    material: BeamMaterial,
    spaces: FESpaces | None = None,
    control_variant: str = "dynamic",
) -> AssembledBeam:
    """Assemble mass, energy, interconnection and the four endpoint ports.

    All four fields are continuous piecewise linear; material profiles may
    vary per element.  ``control_variant`` decides which pair of equations
    is integrated by parts: "dynamic" exposes the end force and moment as
    inputs, "kinematic" the end translation and rotation velocities.
    """
    if control_variant not in ("dynamic", "kinematic"):
        raise AssemblyError(f"unknown control variant {control_variant!r}")
    if not isinstance(material, BeamMaterial):
        raise AssemblyError(f"expected beam material, got {type(material).__name__}")
    quad = spaces.quad_degree if spaces is not None else 2
    n = mesh.n_nodes
    ne = mesh.n_elements

    ms = fem.interval_mass(mesh, quad_degree=quad)
    mass = sp.block_diag([ms, ms, ms, ms], format="csr")
    energy = sp.block_diag(
        [
            fem.interval_mass(mesh, weight=1.0 / material.profile("rhoA", ne), quad_degree=quad),
            fem.interval_mass(mesh, weight=1.0 / material.profile("Irho", ne), quad_degree=quad),
            fem.interval_mass(mesh, weight=material.profile("EI", ne), quad_degree=quad),
            fem.interval_mass(mesh, weight=material.profile("K", ne), quad_degree=quad),
        ],
        format="csr",
    )

    dx = fem.interval_deriv(mesh, quad_degree=quad)
    d0 = ms
    grid = [[None] * 4 for _ in range(4)]
    if control_variant == "dynamic":
        stored = [(2, 1, dx), (3, 0, dx), (1, 3, d0)]
    else:
        # derivative still acts on the co-state being differentiated; with a
        # single P1 space this is the same scalar matrix on the other side
        stored = [(0, 3, dx), (1, 2, dx), (1, 3, d0)]
    for i, j, mat in stored:
        grid[i][j] = mat
        grid[j][i] = (-mat).T
    inter = sp.bmat(grid, format="csr")

    left = BeamPort(node=0, tag=mesh.tag_left, x=float(mesh.nodes[0]), orientation=-1.0)
    right = BeamPort(node=n - 1, tag=mesh.tag_right, x=float(mesh.nodes[-1]), orientation=1.0)
    ports = (left, right)
    channels = DYNAMIC_CHANNELS if control_variant == "dynamic" else KINEMATIC_CHANNELS
    # endpoint evaluation columns, channel-major: (ch0@left, ch0@right, ch1@left, ch1@right)
    if control_variant == "dynamic":
        target = ("transverse_momentum", "rotation_momentum")
    else:
        target = ("shear", "curvature")
    layout = _beam_layout(mesh)
    rows, cols, vals = [], [], []
    for c, name in enumerate(target):
        off = layout.sl(name).start
        for k, p in enumerate(ports):
            rows.append(off + p.node)
            cols.append(c * 2 + k)
            vals.append(p.orientation)
    bmat = sp.coo_matrix((vals, (rows, cols)), shape=(layout.total, 4)).tocsr()
    labels = tuple(f"{ch}:t{p.tag}" for ch in channels for p in ports)

    system = make_phsystem(mass, energy, inter, bmat, labels, layout)
    return AssembledBeam(
        system=system,
        mesh=mesh,
        material=material,
        control_variant=control_variant,
        ports=ports,
        channels=channels,
    )


def grouped_block_pattern(J: sp.spmatrix, layout: FieldLayout, groups) -> np.ndarray:
    """Boolean occupancy of J over groups of named fields.

    ``groups`` is a sequence of sequences of field names; entry (i, j) of
    the result says whether any coupling exists between group i and j.
    """
    names = list(layout.names)
    for g in groups:
        for name in g:
            if name not in names:
                raise AssemblyError(f"unknown field {name!r}")
    k = len(groups)
    out = np.zeros((k, k), dtype=bool)
    coo = sp.coo_matrix(J)
    offs = np.array(layout.offsets + (layout.total,))
    fld_of_row = np.searchsorted(offs, coo.row, "right") - 1
    fld_of_col = np.searchsorted(offs, coo.col, "right") - 1
    grp = {}
    for gi, g in enumerate(groups):
        for name in g:
            grp[names.index(name)] = gi
    for fr, fc, v in zip(fld_of_row, fld_of_col, coo.data):
        if v != 0.0 and fr in grp and fc in grp:
            out[grp[fr], grp[fc]] = True
    return out


PLATE_GROUPS = (
    ("transverse_momentum",),
    ("rotation_x_momentum", "rotation_y_momentum"),
    ("curvature_xx", "curvature_yy", "curvature_xy"),
    ("shear_x", "shear_y"),
)

BEAM_GROUPS = (
    ("transverse_momentum",),
    ("rotation_momentum",),
    ("curvature",),
    ("shear",),
)


def mimics_plate(beam: AssembledBeam, plate: AssembledPlate) -> bool:
    """True when beam and grouped-plate interconnection patterns coincide."""
    pb = grouped_block_pattern(beam.system.J, beam.layout, BEAM_GROUPS)
    pp = grouped_block_pattern(plate.system.J, plate.layout, PLATE_GROUPS)
    return bool(np.array_equal(pb, pp))
