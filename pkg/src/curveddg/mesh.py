"""Triangulations of 2D curved domains: generation, I/O, connectivity, curving, metrics."""

from dataclasses import dataclass, field
import io

import numpy as np


class MeshError(ValueError):
    pass


class MeshParseError(MeshError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonManifoldError(MeshError):
    pass


class GeometryError(MeshError):
    pass


class InvalidCurvedElementError(GeometryError):
    pass


# local edge e of triangle (v0, v1, v2) runs from vertex e to vertex (e + 1) % 3
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


def signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    boundary_markers: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        b = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        m = np.ascontiguousarray(self.boundary_markers, dtype=np.int64).reshape(-1)
        if len(m) != len(b):
            m = np.ones(len(b), dtype=np.int64)
        for name, idx in (("triangle", t), ("boundary edge", b)):
            if idx.size and (idx.min() < 0 or idx.max() >= len(v)):
                raise MeshError(f"{name} vertex index out of range")
        if len(t) and np.any(signed_areas(v, t) <= 0):
            raise MeshError("triangles must have positive (counter-clockwise) orientation")
        for name, arr in (("vertices", v), ("triangles", t), ("boundary_edges", b), ("boundary_markers", m)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def n_vertices(self):
        return len(self.vertices)


@dataclass(frozen=True)
class Face:
    """One face; ``right == -1`` marks a boundary face.

    The face parameter runs along the left element's local edge in its
    counter-clockwise direction, so the fixed normal points out of ``left``.
    """

    index: int
    vertices: tuple
    left: int
    left_edge: int
    right: int
    right_edge: int

    @property
    def is_boundary(self):
        return self.right < 0


@dataclass(frozen=True)
class FaceSet:
    vertices: np.ndarray  # (nF, 2), ordered along the left element's ccw edge
    left: np.ndarray
    left_edge: np.ndarray
    right: np.ndarray  # -1 on the boundary
    right_edge: np.ndarray  # -1 on the boundary
    element_faces: np.ndarray  # (nT, 3) face index of each local edge

    def __len__(self):
        return len(self.left)

    def __getitem__(self, i):
        return Face(int(i), tuple(int(a) for a in self.vertices[i]), int(self.left[i]),
                    int(self.left_edge[i]), int(self.right[i]), int(self.right_edge[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def interior(self):
        return np.flatnonzero(self.right >= 0)

    @property
    def boundary(self):
        return np.flatnonzero(self.right < 0)


def generate_disk_mesh(target_h):
    """Ring-based triangulation of the unit disk.

    Ring ``i`` of ``n = max(2, round(1/target_h))`` rings sits at radius
    ``i/n`` and carries ``6 i`` equally spaced vertices; consecutive rings are
    zipped together by angle.
    """
    if not target_h > 0:
        raise MeshError(f"target_h must be positive, got {target_h}")
    n = max(2, int(round(1.0 / target_h)))
    rings = [np.array([0])]
    pts = [np.zeros(2)]
    count = 1
    for i in range(1, n + 1):
        m = 6 * i
        theta = 2 * np.pi * np.arange(m) / m
        r = i / n
        ring_pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        if i == n:
            ring_pts /= np.linalg.norm(ring_pts, axis=1)[:, None]
        pts.extend(ring_pts)
        rings.append(np.arange(count, count + m))
        count += m
    vertices = np.array(pts)

    tris = []
    for k in range(6):
        tris.append((0, rings[1][k], rings[1][(k + 1) % 6]))
    for i in range(2, n + 1):
        inner, outer = rings[i - 1], rings[i]
        ni, no = len(inner), len(outer)
        a = b = 0
        while a < ni or b < no:
            # advance along whichever ring gives the shorter new diagonal
            if a >= ni:
                step_outer = True
            elif b >= no:
                step_outer = False
            else:
                d_out = np.linalg.norm(vertices[outer[(b + 1) % no]] - vertices[inner[a % ni]])
                d_in = np.linalg.norm(vertices[inner[(a + 1) % ni]] - vertices[outer[b % no]])
                step_outer = d_out <= d_in
            if step_outer:
                tris.append((inner[a % ni], outer[b % no], outer[(b + 1) % no]))
                b += 1
            else:
                tris.append((inner[a % ni], outer[b % no], inner[(a + 1) % ni]))
                a += 1
    tris = np.array(tris, dtype=np.int64)
    area = signed_areas(vertices, tris)
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    outer = rings[n]
    bnd = np.column_stack([outer, np.roll(outer, -1)])
    return Mesh(vertices, tris, bnd, np.ones(len(bnd), dtype=np.int64))


def _data_lines(stream):
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def load_mesh(stream):
    """Read the ``nodes / triangles / boundary_edges`` text format.

    ``stream`` is a text stream, a path, or a string holding the file contents.
    Clockwise triangles are reordered to counter-clockwise.
    """
    if isinstance(stream, str) and "\n" in stream:
        stream = io.StringIO(stream)
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, encoding="utf-8") as fh:
            return load_mesh(fh)

    lines = _data_lines(stream)

    def section(name, width, kind):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshParseError(f"missing '{name}' section") from None
        if len(tok) != 2 or tok[0] != name:
            raise MeshParseError(f"expected '{name} <count>', got {' '.join(tok)!r}", lineno)
        try:
            count = int(tok[1])
        except ValueError:
            raise MeshParseError(f"bad count {tok[1]!r}", lineno) from None
        rows, where = [], []
        for _ in range(count):
            try:
                lineno, tok = next(lines)
            except StopIteration:
                raise MeshParseError(f"'{name}' section ended early") from None
            if len(tok) != width:
                raise MeshParseError(f"expected {width} values, got {len(tok)}", lineno)
            try:
                rows.append([kind(x) for x in tok])
            except ValueError:
                raise MeshParseError(f"cannot parse {' '.join(tok)!r}", lineno) from None
            where.append(lineno)
        return rows, where

    nodes, _ = section("nodes", 2, float)
    tris, tri_lines = section("triangles", 3, int)
    bedges, b_lines = section("boundary_edges", 3, int)
    n = len(nodes)
    for rows, where in ((tris, tri_lines), (bedges, b_lines)):
        for row, lineno in zip(rows, where):
            ids = row if len(row) == 3 and rows is tris else row[:2]
            for v in ids:
                if not 0 <= v < n:
                    raise MeshParseError(f"vertex index {v} out of range for {n} nodes", lineno)
    seen = {}
    for row, lineno in zip(bedges, b_lines):
        key = tuple(sorted(row[:2]))
        if key in seen:
            raise MeshParseError(f"duplicate boundary edge {key} (first on line {seen[key]})", lineno)
        seen[key] = lineno
    vertices = np.array(nodes, dtype=float).reshape(-1, 2)
    triangles = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if len(triangles):
        area = signed_areas(vertices, triangles)
        for a, lineno in zip(area, tri_lines):
            if a == 0:
                raise MeshParseError("degenerate triangle", lineno)
        flip = area < 0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
    b = np.array(bedges, dtype=np.int64).reshape(-1, 3)
    return Mesh(vertices, triangles, b[:, :2], b[:, 2])


def write_mesh(mesh, stream):
    """Write ``mesh`` in the text format read by :func:`load_mesh`."""
    out = [f"nodes {mesh.n_vertices}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    out.append(f"triangles {mesh.n_elements}")
    out += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    out.append(f"boundary_edges {len(mesh.boundary_edges)}")
    out += [f"{a} {b} {m}" for (a, b), m in zip(mesh.boundary_edges.tolist(), mesh.boundary_markers.tolist())]
    stream.write("\n".join(out) + "\n")


def build_connectivity(mesh):
    """Classify every triangle edge as an interior or boundary face."""
    tris = mesh.triangles
    nT = len(tris)
    edges = tris[:, LOCAL_EDGES].reshape(-1, 2)  # (3 nT, 2), ccw per element
    keys = np.sort(edges, axis=1)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        bad = uniq[np.argmax(counts)]
        raise NonManifoldError(f"edge {tuple(bad)} is shared by more than two triangles")
    nF = len(uniq)
    order = np.argsort(inverse, kind="stable")  # element-major within each face
    first = np.full(nF, -1)
    second = np.full(nF, -1)
    for slot in order:
        f = inverse[slot]
        if first[f] < 0:
            first[f] = slot
        else:
            second[f] = slot
    left, left_edge = np.divmod(first, 3)
    right = np.where(second >= 0, second // 3, -1)
    right_edge = np.where(second >= 0, second % 3, -1)
    fverts = edges[first]
    element_faces = inverse.reshape(nT, 3)
    return FaceSet(fverts, left, left_edge, right, right_edge, element_faces)


def disk_chart(x):
    """Closest-point projection onto the unit circle."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(r < 1e-12):
        raise GeometryError("disk chart is undefined at the origin")
    return x / r


def curve_boundary(mesh, chart=disk_chart, faces=None):
    """P2 geometry nodes per element, with boundary-edge midpoints moved by ``chart``.

    Returns a :class:`curveddg.geometry.CurvedMaps` batch. Vertices and interior
    edge midpoints are left where they are.
    """
    from .geometry import CurvedMaps

    if faces is None:
        faces = build_connectivity(mesh)
    p = mesh.vertices[mesh.triangles]  # (nT, 3, 2)
    mids = 0.5 * (p[:, LOCAL_EDGES[:, 0]] + p[:, LOCAL_EDGES[:, 1]])
    nodes = np.concatenate([p, mids], axis=1)
    bf = faces.boundary
    if len(bf):
        el = faces.left[bf]
        le = faces.left_edge[bf]
        try:
            snapped = chart(nodes[el, 3 + le])
        except GeometryError:
            raise
        except Exception as exc:  # chart failures become geometry errors
            raise GeometryError(f"chart evaluation failed: {exc}") from exc
        snapped = np.asarray(snapped, dtype=float)
        if not np.all(np.isfinite(snapped)):
            raise GeometryError("chart returned non-finite points")
        nodes[el, 3 + le] = snapped
    return CurvedMaps(nodes)


@dataclass(frozen=True)
class MeshMetrics:
    h: np.ndarray  # per-element diameter of the straight simplex
    rho: np.ndarray  # inscribed-circle diameter
    c_k: np.ndarray  # nonlinearity constant
    face_h: np.ndarray  # min(h_K, h_K') per face
    sigma: float
    c_t: float  # max ratio of neighbouring element diameters

    @property
    def h_max(self):
        return float(self.h.max())


def straight_sizes(mesh):
    p = mesh.vertices[mesh.triangles]
    lengths = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
    area = np.abs(signed_areas(mesh.vertices, mesh.triangles))
    h = lengths.max(axis=1)
    rho = 4.0 * area / lengths.sum(axis=1)  # 2 * (2 * area / perimeter)
    return h, rho


def face_sizes(h, faces):
    fh = h[faces.left].copy()
    inner = faces.right >= 0
    fh[inner] = np.minimum(fh[inner], h[faces.right[inner]])
    return fh


def mesh_metrics(mesh, maps, faces=None, check=True):
    if faces is None:
        faces = build_connectivity(mesh)
    h, rho = straight_sizes(mesh)
    c_k = maps.nonlinearity()
    if check and np.any(c_k >= 1):
        k = int(np.argmax(c_k))
        raise InvalidCurvedElementError(f"element {k} has C_K = {c_k[k]:.3g} >= 1")
    fh = face_sizes(h, faces)
    inner = faces.interior
    if len(inner):
        hl, hr = h[faces.left[inner]], h[faces.right[inner]]
        c_t = float(np.max(np.maximum(hl, hr) / np.minimum(hl, hr)))
    else:
        c_t = 1.0
    return MeshMetrics(h, rho, c_k, fh, float(np.max(h / rho)), c_t)
