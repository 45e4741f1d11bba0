"""Mixed finite-element assembly of the lossless thick-plate system.

State layout (eight scalar fields, momenta first):

    transverse_momentum            rho h v
    rotation_x_momentum            (rho h^3/12) omega_x
    rotation_y_momentum            (rho h^3/12) omega_y
    curvature_xx / _yy / _xy       bending strains
    shear_x / shear_y              transverse shear strains

Two algebraically equivalent formulations are assembled from the same
scalar couplings: "vectorial" stores the engineering shear curvature
(kappa_xy holds the full cross term), "tensorial" stores the symmetric
tensor component (half of it) and compensates with a doubled metric
weight and a rescaled stiffness entry.  Their interconnection matrices
coincide entry for entry.

Two control variants decide which equations are integrated by parts and
hence what the boundary inputs mean:

    dynamic    momentum rows by parts -> inputs (Q_n, M_nn, M_ns)
    kinematic  strain rows by parts   -> inputs (v, omega_n, omega_s)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem
from .errors import AssemblyError
from .material import PlateMaterial, PlateRigidity, plate_rigidity
from .mesh import BoundaryEdge, Mesh2D, _check_tags
from .phcore import FieldLayout, PHSystem, make_phsystem

__all__ = [
    "FESpaces",
    "PLATE_FIELDS",
    "plate_layout",
    "assemble_mass",
    "assemble_energy",
    "assemble_interconnection_vectorial",
    "assemble_interconnection_tensorial",
    "boundary_ports",
    "assemble_boundary_dynamic",
    "assemble_boundary_kinematic",
    "assemble_plate",
    "AssembledPlate",
    "PortDof",
    "interpolate_fields",
    "derivative_annihilation",
]

PLATE_FIELDS = (
    "transverse_momentum",
    "rotation_x_momentum",
    "rotation_y_momentum",
    "curvature_xx",
    "curvature_yy",
    "curvature_xy",
    "shear_x",
    "shear_y",
)

_FORMULATIONS = ("vectorial", "tensorial")
_VARIANTS = ("dynamic", "kinematic")

# input meanings per control variant, one per boundary channel
DYNAMIC_CHANNELS = ("Qn", "Mnn", "Mns")
KINEMATIC_CHANNELS = ("v", "wn", "ws")


@dataclass(frozen=True)
class FESpaces:
    """Element family and quadrature choices for the plate fields."""

    velocity_family: str = "p1"
    strain_family: str = "p1"
    quad_degree: int = 2
    edge_quad_degree: int = 2

    def __post_init__(self):
        if self.velocity_family != "p1":
            raise AssemblyError("velocity fields require the continuous linear family")
        if self.strain_family not in ("p1", "p0"):
            raise AssemblyError(f"unsupported strain family {self.strain_family!r}")
        # every assembled form here has polynomial degree <= 2
        if self.quad_degree < 2:
            raise AssemblyError("area quadrature degree must be at least 2")
        if self.edge_quad_degree < 2:
            raise AssemblyError("edge quadrature degree must be at least 2")


def _check_formulation(formulation: str) -> None:
    if formulation not in _FORMULATIONS:
        raise AssemblyError(f"unknown formulation {formulation!r}")


def _check_variant(control_variant: str) -> None:
    if control_variant not in _VARIANTS:
        raise AssemblyError(f"unknown control variant {control_variant!r}")


def plate_layout(mesh: Mesh2D, spaces: FESpaces) -> FieldLayout:
    nv = fem.family_dim(mesh, spaces.velocity_family)
    ns = fem.family_dim(mesh, spaces.strain_family)
    return FieldLayout(PLATE_FIELDS, (nv, nv, nv, ns, ns, ns, ns, ns), n_momentum=3)


def assemble_mass(
    mesh: Mesh2D, rigidity, spaces: FESpaces, formulation: str = "vectorial"
) -> sp.csr_matrix:
    """Block-diagonal metric of the state space.

    The material argument is accepted for interface symmetry with the
    other assemblers; the metric itself is purely geometric apart from
    the doubled weight on the tensor shear-curvature component.
    """
    _check_formulation(formulation)
    mv = fem.scalar_matrix(
        mesh, spaces.velocity_family, spaces.velocity_family, quad_degree=spaces.quad_degree
    )
    ms = fem.scalar_matrix(
        mesh, spaces.strain_family, spaces.strain_family, quad_degree=spaces.quad_degree
    )
    mxy = 2.0 * ms if formulation == "tensorial" else ms
    return sp.block_diag([mv, mv, mv, ms, ms, mxy, ms, ms], format="csr")


def _as_rigidity(material) -> PlateRigidity:
    if isinstance(material, PlateRigidity):
        return material
    if isinstance(material, PlateMaterial):
        return plate_rigidity(material)
    raise AssemblyError(f"expected plate material or rigidity, got {type(material).__name__}")


def assemble_energy(
    mesh: Mesh2D, rigidity, spaces: FESpaces, formulation: str = "vectorial"
) -> sp.csr_matrix:
    """Energy (Hessian) matrix: H(a) = a^T Q a / 2."""
    _check_formulation(formulation)
    rig = _as_rigidity(rigidity)
    mv = fem.scalar_matrix(
        mesh, spaces.velocity_family, spaces.velocity_family, quad_degree=spaces.quad_degree
    )
    ms = fem.scalar_matrix(
        mesh, spaces.strain_family, spaces.strain_family, quad_degree=spaces.quad_degree
    )
    bend = np.array(rig.D_b, dtype=float)
    if formulation == "tensorial":
        bend = bend.copy()
        bend[2, 2] *= 4.0  # tensor xy component is half the engineering one
    coeff = np.zeros((8, 8))
    coeff[0, 0] = 1.0 / rig.mu
    coeff[1, 1] = coeff[2, 2] = 1.0 / rig.I_rot
    coeff[3:6, 3:6] = bend
    coeff[6:8, 6:8] = np.array(rig.D_s, dtype=float)

    grid = [[None] * 8 for _ in range(8)]
    for i in range(8):
        for j in range(8):
            if coeff[i, j] == 0.0:
                continue
            base = mv if i < 3 else ms
            grid[i][j] = coeff[i, j] * base
    return sp.bmat(grid, format="csr")


def _scalar_couplings(mesh: Mesh2D, spaces: FESpaces):
    """The three scalar blocks every interconnection variant is built from.

    dx, dy carry the derivative on the (linear) velocity trial functions
    and are tested with the strain family; d0 is the plain mixed mass.
    """
    q = spaces.quad_degree
    dx = fem.scalar_matrix(mesh, spaces.strain_family, "p1", deriv="x", quad_degree=q)
    dy = fem.scalar_matrix(mesh, spaces.strain_family, "p1", deriv="y", quad_degree=q)
    d0 = fem.scalar_matrix(mesh, spaces.velocity_family, spaces.strain_family, quad_degree=q)
    return dx, dy, d0


def _strain_derivative_couplings(mesh: Mesh2D, spaces: FESpaces):
    """Velocity-tested derivatives of strain co-states (not transposes of
    the momentum-tested blocks: they differ by exactly the boundary trace)."""
    if spaces.strain_family != "p1":
        raise AssemblyError(
            "velocity-controlled assembly differentiates strain co-states"
            " and needs a continuous strain family"
        )
    q = spaces.quad_degree
    ex = fem.scalar_matrix(mesh, spaces.velocity_family, "p1", deriv="x", quad_degree=q)
    ey = fem.scalar_matrix(mesh, spaces.velocity_family, "p1", deriv="y", quad_degree=q)
    return ex, ey


def _skew_bmat(n_fields: int, stored) -> sp.csr_matrix:
    """Assemble sum of stored blocks and their negated transposes.

    Storing each block once and mirroring guarantees exact skew-symmetry
    in floating point.
    """
    grid = [[None] * n_fields for _ in range(n_fields)]
    for i, j, mat in stored:
        grid[i][j] = mat if grid[i][j] is None else grid[i][j] + mat
        mt = (-mat).T
        grid[j][i] = mt if grid[j][i] is None else grid[j][i] + mt
    return sp.bmat(grid, format="csr")


def assemble_interconnection_vectorial(
    mesh: Mesh2D, spaces: FESpaces, control_variant: str = "dynamic"
) -> sp.csr_matrix:
    """Skew interconnection with engineering shear curvature, block by block."""
    _check_variant(control_variant)
    dx, dy, d0 = _scalar_couplings(mesh, spaces)
    if control_variant == "dynamic":
        stored = [
            (3, 1, dx),
            (4, 2, dy),
            (5, 1, dy),
            (5, 2, dx),
            (6, 0, dx),
            (7, 0, dy),
            (1, 6, d0),
            (2, 7, d0),
        ]
    else:
        ex, ey = _strain_derivative_couplings(mesh, spaces)
        stored = [
            (0, 6, ex),
            (0, 7, ey),
            (1, 3, ex),
            (1, 5, ey),
            (2, 4, ey),
            (2, 5, ex),
            (1, 6, d0),
            (2, 7, d0),
        ]
    return _skew_bmat(8, stored)


def assemble_interconnection_tensorial(
    mesh: Mesh2D, spaces: FESpaces, control_variant: str = "dynamic"
) -> sp.csr_matrix:
    """Skew interconnection built from grouped gradient/divergence operators.

    The composite route lands on exactly the same matrix as the
    component-wise vectorial assembly; the formulations differ only in
    metric and energy weights.
    """
    _check_variant(control_variant)
    dx, dy, d0 = _scalar_couplings(mesh, spaces)
    d0_2 = sp.block_diag([d0, d0], format="csr")
    if control_variant == "dynamic":
        grad_sym = sp.bmat([[dx, None], [None, dy], [dy, dx]], format="csr")
        grad = sp.bmat([[dx], [dy]], format="csr")
        grid = [
            [None, None, None, (-grad).T],
            [None, None, (-grad_sym).T, d0_2],
            [None, grad_sym, None, None],
            [grad, (-d0_2).T, None, None],
        ]
    else:
        ex, ey = _strain_derivative_couplings(mesh, spaces)
        div_sym = sp.bmat([[ex, None, ey], [None, ey, ex]], format="csr")
        div = sp.bmat([[ex, ey]], format="csr")
        grid = [
            [None, None, None, div],
            [None, None, div_sym, d0_2],
            [None, (-div_sym).T, None, None],
            [(-div).T, (-d0_2).T, None, None],
        ]
    return sp.bmat(grid, format="csr")


# -- boundary ports --------------------------------------------------------------


@dataclass(frozen=True)
class PortDof:
    """One boundary trace degree of freedom.

    A node shared by tagged edges with distinct outward normals (a corner,
    or a tag change) carries one dof per (tag, normal) class so that
    normal-dependent quantities stay single-valued on each smooth piece.
    """

    node: int
    tag: int
    normal: tuple[float, float]
    arc: float
    edges: tuple[BoundaryEdge, ...]


def boundary_ports(mesh: Mesh2D, tags=None) -> tuple[PortDof, ...]:
    """Trace dofs on the tagged part of the boundary, deterministically ordered."""
    tag_set = _check_tags(mesh, tags)
    groups: dict[tuple[int, int, tuple[float, float]], list[BoundaryEdge]] = {}
    for e in mesh.boundary_edges:
        if e.tag not in tag_set:
            continue
        key_n = (round(e.normal[0], 12), round(e.normal[1], 12))
        for node in (e.i, e.j):
            groups.setdefault((node, e.tag, key_n), []).append(e)

    def order(item):
        (node, tag, key_n), _ = item
        return (tag, node, math.atan2(key_n[1], key_n[0]))

    ports = []
    for (node, tag, _), edges in sorted(groups.items(), key=order):
        edges = tuple(sorted(edges, key=lambda e: (e.i, e.j)))
        ports.append(
            PortDof(
                node=node,
                tag=tag,
                normal=edges[0].normal,
                arc=mesh.node_arc[node],
                edges=edges,
            )
        )
    return tuple(ports)


def _edge_trace_local(length: float, degree: int) -> np.ndarray:
    """2x2 matrix of int_e phi_a phi_b over one edge of the given length."""
    t, w = fem.edge_rule(degree)
    vals = np.stack([1.0 - t, t])
    return length * np.einsum("q,iq,jq->ij", w, vals, vals)


def _port_labels(ports, channels) -> tuple[str, ...]:
    seen: dict[tuple[int, int], int] = {}
    suffix = []
    for p in ports:
        k = seen.get((p.tag, p.node), 0)
        seen[(p.tag, p.node)] = k + 1
        suffix.append("" if k == 0 else f".{k}")
    labels = []
    for ch in channels:
        for p, sfx in zip(ports, suffix):
            labels.append(f"{ch}:t{p.tag}:n{p.node}{sfx}")
    return tuple(labels)


def _assemble_trace(
    mesh: Mesh2D,
    spaces: FESpaces,
    ports,
    layout: FieldLayout,
    channel_rows,
) -> sp.csr_matrix:
    """Shared trace-integral assembly.

    ``channel_rows(channel_index, normal)`` yields (field_name, weight)
    pairs saying which state block receives the edge integral and with
    what normal-dependent coefficient.
    """
    n_p = len(ports)
    rows, cols, vals = [], [], []
    for k, p in enumerate(ports):
        for e in p.edges:
            tmat = _edge_trace_local(e.length, spaces.edge_quad_degree)
            loc_port = 0 if e.i == p.node else 1
            for c in range(3):
                col = c * n_p + k
                for name, weight in channel_rows(c, p.normal):
                    off = layout.sl(name).start
                    for loc, nd in enumerate((e.i, e.j)):
                        rows.append(off + nd)
                        cols.append(col)
                        vals.append(weight * tmat[loc, loc_port])
    mat = sp.coo_matrix(
        (vals, (rows, cols)), shape=(layout.total, 3 * n_p)
    ).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()  # axis-aligned normals produce exact 0.0 weights
    return mat


def assemble_boundary_dynamic(mesh: Mesh2D, spaces: FESpaces, tags=None):
    """Input map for prescribed traction resultants (Q_n, M_nn, M_ns).

    Returns (B, ports).  Columns are grouped channel-major: all shear
    ports, then all normal-moment ports, then all twisting-moment ports.
    """
    ports = boundary_ports(mesh, tags)
    layout = plate_layout(mesh, spaces)

    def channel_rows(c, normal):
        nx, ny = normal
        if c == 0:
            return [("transverse_momentum", 1.0)]
        if c == 1:
            return [("rotation_x_momentum", nx), ("rotation_y_momentum", ny)]
        return [("rotation_x_momentum", -ny), ("rotation_y_momentum", nx)]

    return _assemble_trace(mesh, spaces, ports, layout, channel_rows), ports


def assemble_boundary_kinematic(mesh: Mesh2D, spaces: FESpaces, tags=None):
    """Input map for prescribed boundary velocities (v, omega_n, omega_s)."""
    if spaces.strain_family != "p1":
        raise AssemblyError(
            "velocity-controlled assembly puts boundary terms on strain"
            " rows and needs a continuous strain family"
        )
    ports = boundary_ports(mesh, tags)
    layout = plate_layout(mesh, spaces)

    def channel_rows(c, normal):
        nx, ny = normal
        if c == 0:
            return [("shear_x", nx), ("shear_y", ny)]
        if c == 1:
            return [
                ("curvature_xx", nx * nx),
                ("curvature_yy", ny * ny),
                ("curvature_xy", 2.0 * nx * ny),
            ]
        return [
            ("curvature_xx", -nx * ny),
            ("curvature_yy", nx * ny),
            ("curvature_xy", nx * nx - ny * ny),
        ]

    return _assemble_trace(mesh, spaces, ports, layout, channel_rows), ports


# -- full model ------------------------------------------------------------------


@dataclass
class AssembledPlate:
    """Assembled plate model plus the metadata needed downstream."""

    system: PHSystem
    mesh: Mesh2D
    spaces: FESpaces
    material: PlateMaterial | None
    rigidity: PlateRigidity
    formulation: str
    control_variant: str
    ports: tuple[PortDof, ...]
    channels: tuple[str, str, str]
    tags: tuple[int, ...]

    @property
    def layout(self) -> FieldLayout:
        return self.system.layout

    @property
    def port_labels(self) -> tuple[str, ...]:
        return self.system.port_labels

    def port_map(self) -> list[dict]:
        """One record per port column: label, meaning, tag, node, arc, normal."""
        n_p = len(self.ports)
        out = []
        for c, ch in enumerate(self.channels):
            for k, p in enumerate(self.ports):
                out.append(
                    {
                        "label": self.system.port_labels[c * n_p + k],
                        "meaning": ch,
                        "tag": p.tag,
                        "node": p.node,
                        "arc": p.arc,
                        "normal": list(p.normal),
                    }
                )
        return out


def assemble_plate(
    mesh: Mesh2D,
    material,
    spaces: FESpaces | None = None,
    formulation: str = "vectorial",
    control_variant: str = "dynamic",
    tags=None,
) -> AssembledPlate:
    """Assemble the complete plate model and validate its structure."""
    spaces = spaces or FESpaces()
    _check_formulation(formulation)
    _check_variant(control_variant)
    rig = _as_rigidity(material)
    mass = assemble_mass(mesh, rig, spaces, formulation)
    energy = assemble_energy(mesh, rig, spaces, formulation)
    if formulation == "vectorial":
        inter = assemble_interconnection_vectorial(mesh, spaces, control_variant)
    else:
        inter = assemble_interconnection_tensorial(mesh, spaces, control_variant)
    if control_variant == "dynamic":
        bmat, ports = assemble_boundary_dynamic(mesh, spaces, tags)
        channels = DYNAMIC_CHANNELS
    else:
        bmat, ports = assemble_boundary_kinematic(mesh, spaces, tags)
        channels = KINEMATIC_CHANNELS
    layout = plate_layout(mesh, spaces)
    labels = _port_labels(ports, channels)
    system = make_phsystem(mass, energy, inter, bmat, labels, layout)
    used = tuple(sorted(_check_tags(mesh, tags)))
    return AssembledPlate(
        system=system,
        mesh=mesh,
        spaces=spaces,
        material=material if isinstance(material, PlateMaterial) else None,
        rigidity=rig,
        formulation=formulation,
        control_variant=control_variant,
        ports=ports,
        channels=channels,
        tags=used,
    )


def interpolate_fields(plate: AssembledPlate, functions: dict) -> np.ndarray:
    """Nodal/centroid interpolation of callables f(x, y) into a state vector."""
    layout = plate.layout
    mesh = plate.mesh
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    out = np.zeros(layout.total)
    for name, fn in functions.items():
        if name not in layout.names:
            raise AssemblyError(f"unknown field {name!r}")
        idx = layout.names.index(name)
        family = plate.spaces.velocity_family if idx < 3 else plate.spaces.strain_family
        pts = mesh.nodes if family == "p1" else centroids
        out[layout.sl(name)] = np.array([float(fn(x, y)) for x, y in pts])
    return out


def derivative_annihilation(
    mesh: Mesh2D, spaces: FESpaces | None = None, control_variant: str = "dynamic"
) -> dict[str, float]:
    """Relative residual of each derivative block applied to a constant.

    Exact differentiation of constants is the discrete footprint of the
    integration-by-parts construction; the residual is max |row sum|
    normalized by max absolute row sum.
    """
    spaces = spaces or FESpaces()
    _check_variant(control_variant)
    if control_variant == "kinematic":
        dx, dy = _strain_derivative_couplings(mesh, spaces)
    else:
        dx, dy, _ = _scalar_couplings(mesh, spaces)

    def rel(mat: sp.csr_matrix) -> float:
        num = float(np.max(np.abs(mat @ np.ones(mat.shape[1]))))
        den = float(np.max(np.abs(mat) @ np.ones(mat.shape[1])))
        return num / den if den else 0.0

    return {"d_dx": rel(dx), "d_dy": rel(dy)}
