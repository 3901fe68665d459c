"""Procedural watertight meshes used for example scenes and tests."""

from __future__ import annotations

import numpy as np

from .geometry import TriMesh


def make_box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriMesh:
    sx, sy, sz = np.asarray(size, float) / 2.0
    c = np.asarray(center, float)
    corners = np.array([[x, y, z] for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)])
    faces = np.array([
        [0, 1, 3], [0, 3, 2],       # -x
        [4, 6, 7], [4, 7, 5],       # +x
        [0, 4, 5], [0, 5, 1],       # -y
        [2, 3, 7], [2, 7, 6],       # +y
        [0, 2, 6], [0, 6, 4],       # -z
        [1, 5, 7], [1, 7, 3],       # +z
    ])
    return TriMesh(corners + c, faces)


def make_cylinder(radius: float, height: float, segments: int = 32,
                  center=(0.0, 0.0, 0.0), axis="z") -> TriMesh:
    """Closed cylinder along the given axis, centered at `center`."""
    theta = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    ring = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    bottom = np.column_stack([ring, np.full(segments, -height / 2)])
    top = np.column_stack([ring, np.full(segments, height / 2)])
    verts = np.vstack([bottom, top, [[0.0, 0.0, -height / 2]], [[0.0, 0.0, height / 2]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for k in range(segments):
        k1 = (k + 1) % segments
        faces.append([k, k1, segments + k])
        faces.append([k1, segments + k1, segments + k])
        faces.append([cb, k1, k])
        faces.append([ct, segments + k, segments + k1])
    verts = _reorient(verts, axis)
    return TriMesh(verts + np.asarray(center, float), np.array(faces))


def make_uv_sphere(radius: float, center=(0.0, 0.0, 0.0),
                   segments: int = 24, rings: int = 16) -> TriMesh:
    verts = [np.array([0.0, 0.0, -radius])]
    theta = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    for i in range(1, rings):
        phi = np.pi * i / rings - np.pi / 2
        rr, zz = radius * np.cos(phi), radius * np.sin(phi)
        for t in theta:
            verts.append(np.array([rr * np.cos(t), rr * np.sin(t), zz]))
    verts.append(np.array([0.0, 0.0, radius]))
    V = np.array(verts)
    faces = []
    for k in range(segments):
        k1 = (k + 1) % segments
        faces.append([0, 1 + k1, 1 + k])
    for ri in range(rings - 2):
        b0, b1 = 1 + ri * segments, 1 + (ri + 1) * segments
        for k in range(segments):
            k1 = (k + 1) % segments
            faces.append([b0 + k, b0 + k1, b1 + k])
            faces.append([b0 + k1, b1 + k1, b1 + k])
    top = len(V) - 1
    base = 1 + (rings - 2) * segments
    for k in range(segments):
        k1 = (k + 1) % segments
        faces.append([base + k, base + k1, top])
    return TriMesh(V + np.asarray(center, float), np.array(faces))


def _reorient(verts: np.ndarray, axis: str) -> np.ndarray:
    if axis == "z":
        return verts
    if axis == "x":
        return verts[:, [2, 0, 1]]
    if axis == "y":
        return verts[:, [1, 2, 0]]
    raise ValueError(f"unknown axis {axis!r}")
