"""Triangular 2D meshes and 1D interval meshes with tagged boundaries.

Meshes are immutable after construction.  Every boundary edge carries an
integer tag, an outward unit normal (computed from the adjacent triangle,
never trusted from file order) and its position along the boundary loop,
so downstream modules can build boundary control ports without touching
geometry again.

The text format accepted by :func:`parse_mesh2d`:

    phmesh 1
    nodes N
    x y            (N lines)
    triangles T
    i j k          (T lines, 0-based, counterclockwise)
    boundary E
    i j tag        (E lines, 0-based)

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass, field

import numpy as np

from .errors import MeshError

__all__ = [
    "BoundaryEdge",
    "Mesh2D",
    "Mesh1D",
    "parse_mesh2d",
    "serialize_mesh2d",
    "structured_rectangle",
    "make_interval",
    "boundary_nodes_by_tag",
]


@dataclass(frozen=True)
class BoundaryEdge:
    """One tagged boundary segment.

    The node pair is oriented so the domain lies to the left when walking
    from ``i`` to ``j``; with that convention the unit tangent equals the
    walking direction and the outward normal is its clockwise rotation.
    """

    i: int
    j: int
    tag: int
    normal: tuple[float, float]
    length: float
    triangle: int

    @property
    def nodes(self) -> tuple[int, int]:
        return (self.i, self.j)

    @property
    def tangent(self) -> tuple[float, float]:
        nx, ny = self.normal
        return (-ny, nx)


def _as_nodes(nodes) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(nodes, dtype=float))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise MeshError(f"nodes must be an (N, 2) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MeshError("non-finite node coordinate")
    return arr


def _as_index_array(data, width: int, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(data, dtype=np.int64))
    if arr.size == 0:
        return arr.reshape(0, width)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise MeshError(f"{what} must be an (n, {width}) index array, got shape {arr.shape}")
    return arr


@dataclass
class Mesh2D:
    """Conforming triangulation with tagged boundary edges.

    Attributes:
        nodes: (N, 2) float array of coordinates.
        triangles: (T, 3) int array, counterclockwise.
        boundary: (E, 3) int array of rows (i, j, tag) as supplied.
        boundary_edges: validated, outward-oriented edge records.
        repaired_triangles: indices reoriented when ``fix_orientation``
            was requested (empty otherwise).
        areas: (T,) triangle areas.
        node_arc: boundary node index -> arc length along its loop,
            measured from the smallest-index node of the loop.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    fix_orientation: InitVar[bool] = False

    boundary_edges: tuple[BoundaryEdge, ...] = field(init=False, repr=False)
    repaired_triangles: tuple[int, ...] = field(init=False, repr=False)
    areas: np.ndarray = field(init=False, repr=False)
    node_arc: dict[int, float] = field(init=False, repr=False)

    def __post_init__(self, fix_orientation: bool) -> None:
        self.nodes = _as_nodes(self.nodes)
        self.triangles = _as_index_array(self.triangles, 3, "triangles")
        self.boundary = _as_index_array(self.boundary, 3, "boundary")
        if len(self.triangles) == 0:
            raise MeshError("mesh has no triangles")
        self._validate_indices()
        self._orient_triangles(fix_orientation)
        self._build_boundary()
        for arr in (self.nodes, self.triangles, self.boundary, self.areas):
            arr.setflags(write=False)

    # -- construction helpers -------------------------------------------------

    def _validate_indices(self) -> None:
        n = len(self.nodes)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= n):
            bad = int(np.argwhere((self.triangles < 0) | (self.triangles >= n))[0][0])
            raise MeshError(f"triangle {bad} references a node out of range")
        if self.boundary.size:
            ij = self.boundary[:, :2]
            if ij.min() < 0 or ij.max() >= n:
                bad = int(np.argwhere((ij < 0) | (ij >= n))[0][0])
                raise MeshError(f"boundary edge {bad} references a node out of range")
            if np.any(ij[:, 0] == ij[:, 1]):
                bad = int(np.argwhere(ij[:, 0] == ij[:, 1])[0][0])
                raise MeshError(f"boundary edge {bad} is degenerate (i == j)")

    def _orient_triangles(self, fix: bool) -> None:
        repaired: list[int] = []
        tri = self.triangles
        signed = _signed_areas(self.nodes, tri)
        if np.any(signed == 0.0):
            bad = int(np.argwhere(signed == 0.0)[0][0])
            raise MeshError(f"degenerate triangle {bad} (zero area)")
        flipped = np.where(signed < 0.0)[0]
        if len(flipped):
            if not fix:
                raise MeshError(f"inverted triangle {int(flipped[0])} (clockwise node order)")
            tri = tri.copy()
            tri[flipped, 1], tri[flipped, 2] = tri[flipped, 2], tri[flipped, 1].copy()
            self.triangles = tri
            signed = _signed_areas(self.nodes, tri)
            repaired = [int(t) for t in flipped]
        self.repaired_triangles = tuple(repaired)
        self.areas = signed

    def _build_boundary(self) -> None:
        # Count undirected edge occurrences over all triangles: edges used
        # once are boundary, twice are interior.
        tri = self.triangles
        all_edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        owner = np.tile(np.arange(len(tri)), 3)
        keys = np.sort(all_edges, axis=1)
        counts: dict[tuple[int, int], int] = {}
        edge_owner: dict[tuple[int, int], int] = {}
        for row, t in zip(keys, owner):
            k = (int(row[0]), int(row[1]))
            counts[k] = counts.get(k, 0) + 1
            edge_owner[k] = int(t)

        listed: set[tuple[int, int]] = set()
        edges: list[BoundaryEdge] = []
        for e, (i, j, tag) in enumerate(self.boundary):
            key = (int(min(i, j)), int(max(i, j)))
            if key in listed:
                raise MeshError(f"boundary edge {e} listed twice")
            listed.add(key)
            c = counts.get(key, 0)
            if c == 0:
                raise MeshError(f"dangling edge {e}: not an edge of any triangle")
            if c > 1:
                raise MeshError(f"boundary edge {e} is interior (shared by {c} triangles)")
            edges.append(self._make_edge(int(i), int(j), int(tag), edge_owner[key]))

        missing = [k for k, c in counts.items() if c == 1 and k not in listed]
        if missing:
            k = sorted(missing)[0]
            raise MeshError(f"boundary edge ({k[0]}, {k[1]}) of the triangulation is not listed")

        degree: dict[int, int] = {}
        for be in edges:
            degree[be.i] = degree.get(be.i, 0) + 1
            degree[be.j] = degree.get(be.j, 0) + 1
        odd = sorted(v for v, d in degree.items() if d % 2 or d < 2)
        if odd:
            raise MeshError(f"boundary is not a union of closed loops at node {odd[0]}")

        self.boundary_edges = tuple(edges)
        self.node_arc = _loop_arcs(self.nodes, edges)

    def _make_edge(self, i: int, j: int, tag: int, tri_idx: int) -> BoundaryEdge:
        xi, xj = self.nodes[i], self.nodes[j]
        d = xj - xi
        length = float(np.hypot(d[0], d[1]))
        if length == 0.0:
            raise MeshError(f"zero-length boundary edge ({i}, {j})")
        t = d / length
        n = np.array([t[1], -t[0]])
        centroid = self.nodes[self.triangles[tri_idx]].mean(axis=0)
        mid = 0.5 * (xi + xj)
        s = float(n @ (mid - centroid))
        if s == 0.0:
            raise MeshError(f"cannot orient boundary edge ({i}, {j}): flat triangle {tri_idx}")
        if s < 0.0:
            # normal pointed into the domain: swap the walk direction so the
            # domain stays on the left and n = (t_y, -t_x) points outward
            i, j = j, i
            n = -n
        return BoundaryEdge(i, j, tag, (float(n[0]), float(n[1])), length, tri_idx)

    # -- queries ---------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def tags(self) -> tuple[int, ...]:
        return tuple(sorted({be.tag for be in self.boundary_edges}))

    @property
    def extents(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax)."""
        return (
            float(self.nodes[:, 0].min()),
            float(self.nodes[:, 0].max()),
            float(self.nodes[:, 1].min()),
            float(self.nodes[:, 1].max()),
        )

    def edges_by_tag(self, tags) -> tuple[BoundaryEdge, ...]:
        wanted = _check_tags(self, tags)
        return tuple(be for be in self.boundary_edges if be.tag in wanted)


def _signed_areas(nodes: np.ndarray, tri: np.ndarray) -> np.ndarray:
    p = nodes[tri]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def _loop_arcs(nodes: np.ndarray, edges: list[BoundaryEdge]) -> dict[int, float]:
    """Arc coordinate of every boundary node along its closed loop.

    Each loop is walked in the stored (domain-left) direction starting at
    its smallest node index; the arc of a node is the accumulated length
    at its first visit.
    """
    outgoing: dict[int, list[int]] = {}
    for idx, be in enumerate(edges):
        outgoing.setdefault(be.i, []).append(idx)
    for lst in outgoing.values():
        lst.sort(key=lambda k: edges[k].j)

    unvisited = set(range(len(edges)))
    arcs: dict[int, float] = {}
    while unvisited:
        start_edge = min(unvisited, key=lambda k: (edges[k].i, edges[k].j))
        loop: list[int] = []
        k = start_edge
        while True:
            loop.append(k)
            unvisited.discard(k)
            nxt = [c for c in outgoing.get(edges[k].j, []) if c in unvisited]
            if not nxt:
                break
            k = nxt[0]
        if edges[loop[-1]].j != edges[loop[0]].i:
            raise MeshError(f"boundary loop does not close at node {edges[loop[-1]].j}")
        loop_nodes = [edges[k].i for k in loop]
        shift = loop_nodes.index(min(loop_nodes))
        loop = loop[shift:] + loop[:shift]
        s = 0.0
        for k in loop:
            arcs.setdefault(edges[k].i, s)
            s += edges[k].length
    return arcs


def _check_tags(mesh: Mesh2D, tags) -> set[int]:
    if tags is None:
        tags = mesh.tags
    wanted = {int(t) for t in (tags if not isinstance(tags, (int, np.integer)) else [tags])}
    if not wanted:
        raise MeshError("empty tag selection")
    known = set(mesh.tags)
    unknown = sorted(wanted - known)
    if unknown:
        raise MeshError(f"unknown boundary tag {unknown[0]}")
    return wanted


def boundary_nodes_by_tag(mesh: Mesh2D, tags) -> list[int]:
    """Sorted unique node indices lying on any edge carrying a listed tag."""
    wanted = _check_tags(mesh, tags)
    out: set[int] = set()
    for be in mesh.boundary_edges:
        if be.tag in wanted:
            out.update(be.nodes)
    return sorted(out)


# -- text format ---------------------------------------------------------------


def parse_mesh2d(text: str, fix_orientation: bool = False) -> Mesh2D:
    """Parse the ``phmesh 1`` text format into a validated Mesh2D."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            lines.append((lineno, stripped))
    pos = 0

    def take(what: str) -> tuple[int, str]:
        nonlocal pos
        if pos >= len(lines):
            raise MeshError(f"unexpected end of file while reading {what}")
        item = lines[pos]
        pos += 1
        return item

    lineno, header = take("header")
    if header.split() != ["phmesh", "1"]:
        raise MeshError(f"line {lineno}: expected header 'phmesh 1', got {header!r}")

    def section(name: str) -> int:
        lineno, line = take(f"'{name}' section")
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshError(f"line {lineno}: expected '{name} <count>', got {line!r}")
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshError(f"line {lineno}: bad count {parts[1]!r}") from None
        if count < 0:
            raise MeshError(f"line {lineno}: negative count")
        return count

    n_nodes = section("nodes")
    nodes = np.empty((n_nodes, 2))
    for k in range(n_nodes):
        lineno, line = take("node line")
        parts = line.split()
        if len(parts) != 2:
            raise MeshError(f"line {lineno}: expected 'x y', got {line!r}")
        try:
            nodes[k] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshError(f"line {lineno}: bad coordinate in {line!r}") from None

    def int_rows(count: int, width: int, what: str) -> np.ndarray:
        rows = np.empty((count, width), dtype=np.int64)
        for k in range(count):
            lineno, line = take(f"{what} line")
            parts = line.split()
            if len(parts) != width:
                raise MeshError(f"line {lineno}: expected {width} integers, got {line!r}")
            try:
                rows[k] = [int(p) for p in parts]
            except ValueError:
                raise MeshError(f"line {lineno}: bad integer in {line!r}") from None
        return rows

    triangles = int_rows(section("triangles"), 3, "triangle")
    boundary = int_rows(section("boundary"), 3, "boundary")
    if pos < len(lines):
        lineno, line = lines[pos]
        raise MeshError(f"line {lineno}: trailing content {line!r}")
    return Mesh2D(nodes, triangles, boundary, fix_orientation=fix_orientation)


def serialize_mesh2d(mesh: Mesh2D) -> str:
    """Inverse of :func:`parse_mesh2d`; coordinates round-trip bit-exactly."""
    out = ["phmesh 1", f"nodes {mesh.n_nodes}"]
    out += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    out.append(f"triangles {mesh.n_triangles}")
    out += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    out.append(f"boundary {len(mesh.boundary)}")
    out += [f"{i} {j} {t}" for i, j, t in mesh.boundary]
    return "\n".join(out) + "\n"


def structured_rectangle(a: float, b: float, nx: int, ny: int) -> Mesh2D:
    """Structured triangulation of [0,a] x [0,b].

    Each of the nx*ny cells is split along its up-right diagonal.  Boundary
    tags: 1 = south, 2 = east, 3 = north, 4 = west.
    """
    if a <= 0 or b <= 0:
        raise MeshError("rectangle side lengths must be positive")
    if nx < 1 or ny < 1:
        raise MeshError("subdivision counts must be at least 1")
    xs = np.linspace(0.0, a, nx + 1)
    ys = np.linspace(0.0, b, ny + 1)
    nodes = np.column_stack(
        [np.tile(xs, ny + 1), np.repeat(ys, nx + 1)]
    )  # node (i, j) -> j*(nx+1)+i

    def nid(i: int, j: int) -> int:
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = nid(i, j), nid(i + 1, j)
            v01, v11 = nid(i, j + 1), nid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))

    boundary = []
    boundary += [(nid(i, 0), nid(i + 1, 0), 1) for i in range(nx)]
    boundary += [(nid(nx, j), nid(nx, j + 1), 2) for j in range(ny)]
    boundary += [(nid(i + 1, ny), nid(i, ny), 3) for i in range(nx)]
    boundary += [(nid(0, j + 1), nid(0, j), 4) for j in range(ny)]
    return Mesh2D(nodes, np.array(tris), np.array(boundary))


# -- 1D ------------------------------------------------------------------------


@dataclass
class Mesh1D:
    """Interval mesh on [0, L] with tagged endpoints."""

    nodes: np.ndarray
    tag_left: int = 1
    tag_right: int = 2

    def __post_init__(self) -> None:
        self.nodes = np.ascontiguousarray(np.asarray(self.nodes, dtype=float))
        if self.nodes.ndim != 1 or len(self.nodes) < 2:
            raise MeshError("Mesh1D needs at least two nodes")
        if not np.all(np.isfinite(self.nodes)):
            raise MeshError("non-finite 1D node coordinate")
        if not np.all(np.diff(self.nodes) > 0):
            raise MeshError("1D nodes must be strictly increasing")
        if self.tag_left == self.tag_right:
            raise MeshError("endpoint tags must differ")
        self.nodes.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.nodes) - 1

    @property
    def elements(self) -> np.ndarray:
        idx = np.arange(self.n_elements)
        return np.column_stack([idx, idx + 1])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def length(self) -> float:
        return float(self.nodes[-1] - self.nodes[0])

    @property
    def tags(self) -> tuple[int, ...]:
        return tuple(sorted((self.tag_left, self.tag_right)))


def make_interval(length: float, n: int, tag_left: int = 1, tag_right: int = 2) -> Mesh1D:
    """Uniform interval mesh on [0, length] with ``n`` elements."""
    if length <= 0:
        raise MeshError("interval length must be positive")
    if n < 1:
        raise MeshError("element count must be at least 1")
    return Mesh1D(np.linspace(0.0, length, n + 1), tag_left, tag_right)
