"""Mesh primitives and geometric queries.

Triangle meshes, rigid transforms, capsules, exact point/segment/triangle
distances (vectorized), convex hulls, alpha shapes with a probe-radius
convention, collision tests, contact extraction and the grasp cage ratio.

All lengths are meters. Query routines are pure and operate on immutable
arrays, so they are safe for concurrent read-only use.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import ConvexHull, Delaunay
from scipy.spatial import QhullError


class GeometryError(ValueError):
    """Invalid or degenerate geometric input."""


class DegenerateGeometryError(GeometryError):
    """Input too degenerate for the requested construction (coplanar, empty...)."""


# ---------------------------------------------------------------------------
# Rigid transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation. `rotation` is a 3x3 orthonormal matrix."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-8):
            raise GeometryError("rotation matrix is not orthonormal")

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_axis_angle(axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return RigidTransform(rotation_matrix(axis, angle), np.asarray(translation, float))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self o other: apply `other` first, then `self`."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a (not necessarily unit) axis."""
    u = np.asarray(axis, dtype=float)
    n = np.linalg.norm(u)
    if n == 0:
        raise GeometryError("zero rotation axis")
    u = u / n
    c, s = np.cos(angle), np.sin(angle)
    K = np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])
    return c * np.eye(3) + s * K + (1.0 - c) * np.outer(u, u)


def rotation_matrices(axis, angles: np.ndarray) -> np.ndarray:
    """Batch of rotations about one fixed axis, shape (N, 3, 3)."""
    u = np.asarray(axis, dtype=float)
    u = u / np.linalg.norm(u)
    angles = np.asarray(angles, dtype=float)
    c = np.cos(angles)[:, None, None]
    s = np.sin(angles)[:, None, None]
    K = np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])
    return c * np.eye(3) + s * K + (1.0 - c) * np.outer(u, u)


# ---------------------------------------------------------------------------
# Triangle meshes
# ---------------------------------------------------------------------------

_DEGENERATE_AREA = 1e-16  # m^2, faces below this are dropped on clean()


@dataclass
class TriMesh:
    """Indexed triangle mesh. Vertices (V, 3) float, faces (F, 3) int."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise GeometryError("face index out of range")
        self._watertight: bool | None = None

    @staticmethod
    def clean(vertices, faces) -> "TriMesh":
        """Build a mesh, dropping zero-area faces."""
        mesh = TriMesh(np.asarray(vertices, float), np.asarray(faces))
        if len(mesh.faces) == 0:
            return mesh
        tri = mesh.triangles()
        areas = 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        return TriMesh(mesh.vertices, mesh.faces[areas > _DEGENERATE_AREA])

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) array of face vertex coordinates."""
        return self.vertices[self.faces]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def is_watertight(self) -> bool:
        """Every undirected edge shared by exactly two faces."""
        if self._watertight is None:
            if len(self.faces) == 0:
                self._watertight = False
            else:
                e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]],
                                    self.faces[:, [2, 0]]])
                e = np.sort(e, axis=1)
                _, counts = np.unique(e, axis=0, return_counts=True)
                self._watertight = bool(np.all(counts == 2))
        return self._watertight

    def volume(self) -> float:
        """Enclosed volume. Non-watertight meshes fall back to a voxel repair."""
        if len(self.faces) == 0:
            raise GeometryError("empty mesh has no volume")
        if self.is_watertight:
            tri = self.triangles()
            v = np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])) / 6.0
            return float(abs(v.sum()))
        return _voxel_volume(self)

    def transformed(self, xf: RigidTransform) -> "TriMesh":
        return TriMesh(xf.apply(self.vertices), self.faces.copy())

    def edges(self) -> np.ndarray:
        """Unique undirected edges as (E, 2) vertex indices."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]],
                            self.faces[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)


def _voxel_volume(mesh: TriMesh, resolution: int = 48) -> float:
    """Approximate volume of a leaky mesh on a voxel grid.

    A voxel center counts as interior when its generalized winding number is
    at least 1/2, which tolerates holes and cracks. Documented repair
    fallback, not exact.
    """
    lo, hi = mesh.bounds()
    span = hi - lo
    h = float(span.max()) / resolution
    if h <= 0:
        return 0.0
    axes = [np.arange(lo[k] + h / 2, hi[k], h) for k in range(3)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    tri = mesh.triangles()
    inside = 0
    chunk = max(1, 2_000_000 // max(len(tri), 1))
    for i in range(0, len(centers), chunk):
        w = _winding_numbers(centers[i:i + chunk], tri)
        inside += int((w >= 0.5).sum())
    return inside * h ** 3


def _winding_numbers(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Generalized winding number of each point w.r.t. an oriented surface
    (sum of signed solid angles / 4 pi, van Oosterom & Strackee)."""
    A = triangles[None, :, 0] - points[:, None, :]
    B = triangles[None, :, 1] - points[:, None, :]
    C = triangles[None, :, 2] - points[:, None, :]
    la = np.linalg.norm(A, axis=2)
    lb = np.linalg.norm(B, axis=2)
    lc = np.linalg.norm(C, axis=2)
    det = np.einsum("nmk,nmk->nm", A, np.cross(B, C))
    denom = (la * lb * lc + np.einsum("nmk,nmk->nm", A, B) * lc
             + np.einsum("nmk,nmk->nm", B, C) * la
             + np.einsum("nmk,nmk->nm", C, A) * lb)
    omega = 2.0 * np.arctan2(det, denom)
    return omega.sum(axis=1) / (4.0 * np.pi)


# ---------------------------------------------------------------------------
# Point / segment / triangle distances (exact, vectorized)
# ---------------------------------------------------------------------------

def closest_points_on_triangles(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Closest point on each triangle to each query point.

    points (N, 3), triangles (M, 3, 3) -> (N, M, 3).
    Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
    """
    P = np.asarray(points, float).reshape(-1, 1, 3)
    A = triangles[:, 0][None, :, :]
    B = triangles[:, 1][None, :, :]
    C = triangles[:, 2][None, :, :]
    ab = B - A
    ac = C - A
    ap = P - A
    d1 = np.einsum("nmk,nmk->nm", np.broadcast_arrays(ab, ap)[0], ap)
    d2 = np.einsum("nmk,nmk->nm", np.broadcast_arrays(ac, ap)[0], ap)
    bp = P - B
    d3 = np.einsum("nmk,nmk->nm", np.broadcast_arrays(ab, bp)[0], bp)
    d4 = np.einsum("nmk,nmk->nm", np.broadcast_arrays(ac, bp)[0], bp)
    cp = P - C
    d5 = np.einsum("nmk,nmk->nm", np.broadcast_arrays(ab, cp)[0], cp)
    d6 = np.einsum("nmk,nmk->nm", np.broadcast_arrays(ac, cp)[0], cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom

    # interior projection as the default, then overwrite by region
    out = A + v_in[..., None] * ab + w_in[..., None] * ac
    m = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    out = np.where(m[..., None], B + w_bc[..., None] * (C - B), out)
    m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    out = np.where(m[..., None], A + w_ac[..., None] * ac, out)
    m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    out = np.where(m[..., None], A + v_ab[..., None] * ab, out)
    m = (d6 >= 0) & (d5 <= d6)
    out = np.where(m[..., None], np.broadcast_to(C, out.shape), out)
    m = (d3 >= 0) & (d4 <= d3)
    out = np.where(m[..., None], np.broadcast_to(B, out.shape), out)
    m = (d1 <= 0) & (d2 <= 0)
    out = np.where(m[..., None], np.broadcast_to(A, out.shape), out)
    return out


def points_to_triangles_distance(points: np.ndarray, triangles: np.ndarray,
                                 chunk: int = 2_000_000) -> np.ndarray:
    """Min distance from each point to each triangle, (N, M). Chunked over points."""
    P = np.asarray(points, float).reshape(-1, 3)
    M = len(triangles)
    if M == 0:
        raise GeometryError("empty triangle set")
    rows = max(1, chunk // max(M, 1))
    out = np.empty((len(P), M))
    for i in range(0, len(P), rows):
        cp = closest_points_on_triangles(P[i:i + rows], triangles)
        out[i:i + rows] = np.linalg.norm(P[i:i + rows, None, :] - cp, axis=2)
    return out


def distance_to_mesh(points: np.ndarray, mesh: TriMesh) -> np.ndarray | float:
    """Exact minimum distance from point(s) to a mesh surface.

    Accepts a single point (3,) -> float, or (N, 3) -> (N,).
    """
    if len(mesh.faces) == 0:
        raise GeometryError("empty mesh")
    pts = np.asarray(points, float)
    single = pts.ndim == 1
    d = points_to_triangles_distance(pts.reshape(-1, 3), mesh.triangles()).min(axis=1)
    return float(d[0]) if single else d


def segment_segment_closest(p1, q1, p2, q2, eps: float = 1e-12):
    """Closest points between segment batches [p1,q1] and [p2,q2].

    All arrays broadcastable to (..., 3). Returns (c1, c2).
    """
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("...k,...k->...", d1, d1)
    e = np.einsum("...k,...k->...", d2, d2)
    f = np.einsum("...k,...k->...", d2, r)
    c = np.einsum("...k,...k->...", d1, r)
    b = np.einsum("...k,...k->...", d1, d2)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > eps, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = np.where(e > eps, (b * s + f) / e, 0.0)
        s_t0 = np.where(a > eps, np.clip(-c / a, 0.0, 1.0), 0.0)
        s_t1 = np.where(a > eps, np.clip((b - c) / a, 0.0, 1.0), 0.0)
    s = np.where(t < 0, s_t0, np.where(t > 1, s_t1, s))
    t = np.clip(t, 0.0, 1.0)
    c1 = p1 + s[..., None] * d1
    c2 = p2 + t[..., None] * d2
    return c1, c2


def segment_segment_distance(p1, q1, p2, q2) -> np.ndarray:
    c1, c2 = segment_segment_closest(np.asarray(p1, float), np.asarray(q1, float),
                                     np.asarray(p2, float), np.asarray(q2, float))
    return np.linalg.norm(c1 - c2, axis=-1)


def _segments_cross_triangles(p, q, triangles, eps=1e-12) -> np.ndarray:
    """Boolean (S, M): does segment [p_s, q_s] intersect triangle m (Moller-Trumbore)."""
    A = triangles[None, :, 0]
    e1 = triangles[None, :, 1] - A
    e2 = triangles[None, :, 2] - A
    d = (q - p)[:, None, :]
    h = np.cross(d, e2)
    det = np.einsum("smk,smk->sm", np.broadcast_arrays(e1, h)[0], h)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        s = p[:, None, :] - A
        u = np.einsum("smk,smk->sm", s, h) * inv
        qv = np.cross(s, np.broadcast_arrays(e1, s)[0])
        v = np.einsum("smk,smk->sm", np.broadcast_arrays(d, qv)[0], qv) * inv
        t = np.einsum("smk,smk->sm", np.broadcast_arrays(e2, qv)[0], qv) * inv
        # NaN propagates to False: a near-parallel segment never "pierces"
        hit = (np.abs(det) > eps) & (u >= -eps) & (v >= -eps) \
            & (u + v <= 1 + eps) & (t >= -eps) & (t <= 1 + eps)
    return hit


def segments_to_triangles_distance(p: np.ndarray, q: np.ndarray,
                                   triangles: np.ndarray) -> np.ndarray:
    """Exact min distance from segments [p_i, q_i] (S, 3) to triangles (M, 3, 3) -> (S, M).

    Min over segment-vs-edge pairs and endpoint-vs-triangle projections;
    zero where the segment pierces the triangle.
    """
    p = np.asarray(p, float).reshape(-1, 3)
    q = np.asarray(q, float).reshape(-1, 3)
    S, M = len(p), len(triangles)
    d = np.full((S, M), np.inf)
    # endpoints vs triangles
    for pt in (p, q):
        d = np.minimum(d, points_to_triangles_distance(pt, triangles))
    # segment vs the 3 triangle edges
    for i0, i1 in ((0, 1), (1, 2), (2, 0)):
        e0 = triangles[None, :, i0]
        e1 = triangles[None, :, i1]
        dd = segment_segment_distance(p[:, None, :], q[:, None, :], e0, e1)
        d = np.minimum(d, dd)
    d[_segments_cross_triangles(p, q, triangles)] = 0.0
    return d


def mesh_mesh_distance(a: TriMesh, b: TriMesh) -> float:
    """Exact min separation between two meshes (0 if intersecting)."""
    ta, tb = a.triangles(), b.triangles()
    ea = a.edges()
    eb = b.edges()
    d1 = segments_to_triangles_distance(a.vertices[ea[:, 0]], a.vertices[ea[:, 1]], tb)
    d2 = segments_to_triangles_distance(b.vertices[eb[:, 0]], b.vertices[eb[:, 1]], ta)
    return float(min(d1.min(), d2.min()))


def collide(a, b, tolerance: float = 1e-3) -> bool:
    """True iff the shapes intersect or their separation is below `tolerance`.

    Accepts TriMesh or Capsule for either argument. Symmetric.
    """
    d = shape_distance(a, b)
    return bool(d == 0.0 or d < tolerance)


def shape_distance(a, b) -> float:
    if isinstance(a, Capsule) and isinstance(b, Capsule):
        return float(capsule_capsule_distance(a, b))
    if isinstance(a, Capsule):
        return float(capsule_mesh_distance(a, b))
    if isinstance(b, Capsule):
        return float(capsule_mesh_distance(b, a))
    return mesh_mesh_distance(a, b)


# ---------------------------------------------------------------------------
# Capsules (bone skin)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Capsule:
    """Sphere-swept segment from p0 to p1 with the given radius."""

    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, float).reshape(3))
        object.__setattr__(self, "p1", np.asarray(self.p1, float).reshape(3))
        if self.radius <= 0:
            raise GeometryError("capsule radius must be positive")


def points_to_capsules_distance(points: np.ndarray, capsules: Sequence[Capsule]) -> np.ndarray:
    """Surface distance from points (N, 3) to each capsule -> (N, C). Negative inside."""
    P = np.asarray(points, float).reshape(-1, 3)
    if not capsules:
        raise GeometryError("empty capsule list")
    p0 = np.array([c.p0 for c in capsules])
    p1 = np.array([c.p1 for c in capsules])
    r = np.array([c.radius for c in capsules])
    d = p1 - p0
    len2 = np.einsum("ck,ck->c", d, d)
    ap = P[:, None, :] - p0[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(len2 > 0, np.einsum("nck,ck->nc", ap, d) / len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = p0[None] + t[..., None] * d[None]
    return np.linalg.norm(P[:, None, :] - closest, axis=2) - r[None, :]


def capsule_mesh_distance(cap: Capsule, mesh: TriMesh) -> float:
    d = segments_to_triangles_distance(cap.p0[None], cap.p1[None], mesh.triangles())
    return float(d.min() - cap.radius)


def capsule_capsule_distance(a: Capsule, b: Capsule) -> float:
    d = segment_segment_distance(a.p0, a.q_safe(), b.p0, b.q_safe())
    return float(d - a.radius - b.radius)


def _q_safe(self: Capsule) -> np.ndarray:
    # zero-length capsules degrade to spheres; nudge avoids 0/0 in closest-point math
    if np.array_equal(self.p0, self.p1):
        return self.p1 + 1e-12
    return self.p1


Capsule.q_safe = _q_safe  # type: ignore[attr-defined]


def capsules_min_distance_to_mesh(capsules: Sequence[Capsule], mesh: TriMesh) -> float:
    p0 = np.array([c.p0 for c in capsules])
    p1 = np.array([c.q_safe() for c in capsules])
    r = np.array([c.radius for c in capsules])
    d = segments_to_triangles_distance(p0, p1, mesh.triangles()).min(axis=1) - r
    return float(d.min())


def tessellate_capsule(cap: Capsule, segments: int = 16, rings: int = 8) -> TriMesh:
    """Watertight triangle mesh of a capsule (cylinder + hemisphere caps)."""
    axis = cap.p1 - cap.p0
    length = np.linalg.norm(axis)
    z = axis / length if length > 0 else np.array([0.0, 0.0, 1.0])
    # build an orthonormal frame around the axis
    ref = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = np.cross(ref, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)

    verts = [cap.p0 - z * cap.radius]  # bottom pole
    theta = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    # bottom hemisphere rings (from pole up to equator), equator at cap.p0
    for i in range(1, rings + 1):
        phi = np.pi / 2 * i / rings
        rr = cap.radius * np.sin(phi)
        zz = -cap.radius * np.cos(phi)
        ring = cap.p0 + rr * (np.outer(np.cos(theta), x) + np.outer(np.sin(theta), y)) + zz * z
        verts.extend(ring)
    # top hemisphere rings (equator at cap.p1 up to pole)
    for i in range(rings):
        phi = np.pi / 2 * i / rings
        rr = cap.radius * np.cos(phi)
        zz = cap.radius * np.sin(phi)
        ring = cap.p1 + rr * (np.outer(np.cos(theta), x) + np.outer(np.sin(theta), y)) + zz * z
        verts.extend(ring)
    verts.append(cap.p1 + z * cap.radius)  # top pole
    V = np.array(verts)

    faces = []
    n_rings = 2 * rings + 1  # ring count between the two poles
    for k in range(segments):
        k1 = (k + 1) % segments
        faces.append([0, 1 + k1, 1 + k])
    for ri in range(n_rings - 1):
        base0 = 1 + ri * segments
        base1 = 1 + (ri + 1) * segments
        for k in range(segments):
            k1 = (k + 1) % segments
            faces.append([base0 + k, base0 + k1, base1 + k])
            faces.append([base0 + k1, base1 + k1, base1 + k])
    top = len(V) - 1
    base = 1 + (n_rings - 1) * segments
    for k in range(segments):
        k1 = (k + 1) % segments
        faces.append([base + k, base + k1, top])
    return TriMesh(V, np.array(faces))


# ---------------------------------------------------------------------------
# Convex hulls and alpha shapes
# ---------------------------------------------------------------------------

def convex_hull(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Convex hull of >= 4 non-coplanar points -> (faces into the input array, volume)."""
    pts = np.asarray(points, float).reshape(-1, 3)
    if len(pts) < 4:
        raise DegenerateGeometryError("convex hull needs at least 4 points")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateGeometryError(f"degenerate hull input: {exc}") from exc
    return hull.simplices.copy(), float(hull.volume)


@dataclass
class AlphaShape:
    """Alpha complex of a point set under the probe-radius convention.

    Tetrahedra of the Delaunay tetrahedralization with circumradius <= alpha
    are kept; the boundary is the set of kept-tet faces reachable from the
    outside through dropped tets, so zero-volume sliver cavities inside
    structured clouds do not masquerade as boundary. As alpha grows the
    shape converges to the convex hull.
    """

    alpha: float
    points: np.ndarray
    boundary_faces: np.ndarray        # (B, 3) indices into points
    boundary_vertex_indices: np.ndarray
    volume: float
    n_components: int


def _tet_circumradii(pts: np.ndarray, tets: np.ndarray) -> np.ndarray:
    v = pts[tets]  # (K, 4, 3)
    a = v[:, 1:] - v[:, :1]  # (K, 3, 3)
    rhs = 0.5 * np.einsum("kij,kij->ki", a, a)
    det = np.linalg.det(a)
    ok = np.abs(det) > 1e-14
    R = np.full(len(tets), np.inf)
    if ok.any():
        centers = np.linalg.solve(a[ok], rhs[ok][..., None])[..., 0]
        R[ok] = np.linalg.norm(centers, axis=1)
    return R


def _tet_volumes(pts: np.ndarray, tets: np.ndarray) -> np.ndarray:
    v = pts[tets]
    return np.abs(np.linalg.det(v[:, 1:] - v[:, :1])) / 6.0


def alpha_shape(points: np.ndarray, alpha: float) -> AlphaShape:
    """Alpha shape with probe radius `alpha` (same unit as the points)."""
    pts = np.asarray(points, float).reshape(-1, 3)
    if alpha <= 0:
        raise GeometryError("alpha must be positive")
    if len(pts) < 4:
        raise DegenerateGeometryError("alpha shape needs at least 4 points")
    s = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if s[2] <= 1e-12 * max(s[0], 1e-300):
        raise DegenerateGeometryError("alpha shape input is coplanar or collinear")
    try:
        # QJ joggles deterministically: grid-structured clouds are otherwise
        # cospherical and yield sliver tets that corrupt the boundary count
        tri = Delaunay(pts, qhull_options="QJ")
    except QhullError as exc:
        raise DegenerateGeometryError(f"degenerate alpha-shape input: {exc}") from exc
    tets = tri.simplices
    kept_mask = _tet_circumradii(pts, tets) <= alpha
    keep = tets[kept_mask]
    if len(keep) == 0:
        return AlphaShape(alpha, pts, np.empty((0, 3), int), np.empty(0, int), 0.0, 0)
    volume = float(_tet_volumes(pts, keep).sum())

    # flood-fill the exterior through dropped tets; a kept-tet face is
    # boundary iff its neighbor is the hull exterior or an exterior dropped tet
    neighbors = tri.neighbors
    exterior = np.zeros(len(tets), dtype=bool)
    dropped = ~kept_mask
    stack = list(np.nonzero(dropped & (neighbors == -1).any(axis=1))[0])
    exterior[stack] = True
    while stack:
        t = stack.pop()
        for nb in neighbors[t]:
            if nb >= 0 and dropped[nb] and not exterior[nb]:
                exterior[nb] = True
                stack.append(int(nb))

    boundary = []
    for t in np.nonzero(kept_mask)[0]:
        for k in range(4):
            nb = neighbors[t, k]
            if nb == -1 or (dropped[nb] and exterior[nb]):
                boundary.append(np.delete(tets[t], k))
    boundary = np.array(boundary, dtype=int) if boundary else np.empty((0, 3), int)
    bverts = np.unique(boundary)

    # connected components of the boundary via union-find over shared vertices
    parent = {int(v): int(v) for v in bverts}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for f in boundary:
        r = find(int(f[0]))
        for v in f[1:]:
            r2 = find(int(v))
            if r2 != r:
                parent[r2] = r
    comps = len({find(int(v)) for v in bverts}) if len(bverts) else 0
    return AlphaShape(alpha, pts, boundary, bverts, volume, comps)


# ---------------------------------------------------------------------------
# Contacts and cage ratio
# ---------------------------------------------------------------------------

def contact_points(hand_skin: Sequence, obj: TriMesh, tolerance: float = 2e-3) -> np.ndarray:
    """Vertices of object faces lying within `tolerance` of the hand skin.

    `hand_skin` is a sequence of Capsule and/or TriMesh parts.
    """
    tri = obj.triangles()
    F = len(tri)
    dmin = np.full(F, np.inf)
    for part in hand_skin:
        if isinstance(part, Capsule):
            d = segments_to_triangles_distance(part.p0[None], part.q_safe()[None], tri)[0]
            d = d - part.radius
        else:
            d = np.empty(F)
            ptri = part.triangles()
            for i in range(F):  # face-by-face exact triangle distance
                d[i] = segments_to_triangles_distance(
                    tri[i, [0, 1, 2]], tri[i, [1, 2, 0]], ptri).min()
        dmin = np.minimum(dmin, d)
    touching = obj.faces[dmin <= tolerance]
    if len(touching) == 0:
        return np.empty((0, 3))
    return obj.vertices[np.unique(touching)]


class CageRatio(NamedTuple):
    ratio: float
    degenerate: bool


def cage_ratio(contacts: np.ndarray, obj: TriMesh) -> CageRatio:
    """Volume of the contact-point hull over the volume of the object hull.

    Fewer than 4 or coplanar contacts yield ratio 0 with the degenerate flag
    set, so sparse precision grasps still flow through feature extraction.
    """
    _, obj_vol = convex_hull(obj.vertices)
    if obj_vol <= 0:
        raise DegenerateGeometryError("object hull has zero volume")
    contacts = np.asarray(contacts, float).reshape(-1, 3)
    if len(contacts) < 4:
        return CageRatio(0.0, True)
    try:
        _, cvol = convex_hull(contacts)
    except DegenerateGeometryError:
        return CageRatio(0.0, True)
    return CageRatio(float(cvol / obj_vol), False)
