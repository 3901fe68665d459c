"""Articulated hand skeleton, joint limits and forward kinematics.

The hand is a rigid bone tree. Each bone's local transform is a fixed
translation (its rest offset, scaled by the skeleton scale) followed by the
rotations of the joints attached to it, so a joint pivots at the origin of
the bone that carries it. Skin is a capsule per bone segment.

Conventions for the bundled default skeleton (right hand, rest pose):
  fingers extend along -X, back of the hand faces +Y, index side is +Z.
Positive flexion curls toward the palm (-Y).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .geometry import Capsule, RigidTransform, rotation_matrices, rotation_matrix

FINGERS = ("thumb", "index", "middle", "ring", "little")

_DATA_DIR = Path(__file__).parent / "data"


class SkeletonError(ValueError):
    pass


class RomError(ValueError):
    """Joint angle outside its range of motion."""


class FrameError(ValueError):
    """Wrist frame cannot be constructed (degenerate metacarpal layout)."""


@dataclass(frozen=True)
class Bone:
    name: str
    parent: int            # -1 for the root
    offset: np.ndarray     # rest offset from parent origin, meters
    skin_radius: float     # capsule radius of the segment parent->this, 0 = no skin

    def __post_init__(self):
        object.__setattr__(self, "offset", np.asarray(self.offset, float).reshape(3))


@dataclass(frozen=True)
class Joint:
    name: str
    bone: int              # bone whose origin is the pivot
    axis: np.ndarray       # unit axis in the bone's local frame
    limits: tuple[float, float]  # radians, inclusive

    def __post_init__(self):
        ax = np.asarray(self.axis, float).reshape(3)
        n = np.linalg.norm(ax)
        if n == 0:
            raise SkeletonError(f"joint {self.name}: zero axis")
        object.__setattr__(self, "axis", ax / n)
        lo, hi = self.limits
        if lo > hi:
            raise SkeletonError(f"joint {self.name}: limits reversed")


@dataclass(frozen=True)
class HandSkeleton:
    """Bone tree + joints + per-finger bone chains (proximal to tip)."""

    name: str
    bones: tuple[Bone, ...]
    joints: tuple[Joint, ...]
    fingers: dict[str, tuple[int, ...]]
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "bones", tuple(self.bones))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "fingers",
                           {k: tuple(v) for k, v in self.fingers.items()})
        if self.scale <= 0:
            raise SkeletonError("scale must be positive")
        for i, b in enumerate(self.bones):
            if b.parent >= i:
                raise SkeletonError(f"bone {b.name}: parent must precede it")
        if set(self.fingers) != set(FINGERS):
            raise SkeletonError(f"fingers must be exactly {FINGERS}")
        for f, chain in self.fingers.items():
            if not chain:
                raise SkeletonError(f"finger {f}: empty chain")
        for j in self.joints:
            if not 0 <= j.bone < len(self.bones):
                raise SkeletonError(f"joint {j.name}: bad bone index")

    # -- lookups ----------------------------------------------------------

    @property
    def dof(self) -> int:
        return len(self.joints)

    def fingertip_bone(self, finger: str) -> int:
        return self._chain(finger)[-1]

    def _chain(self, finger: str) -> tuple[int, ...]:
        try:
            return self.fingers[finger]
        except KeyError:
            raise SkeletonError(f"unknown finger {finger!r}") from None

    def finger_dof_indices(self, finger: str) -> list[int]:
        chain = set(self._chain(finger))
        return [i for i, j in enumerate(self.joints) if j.bone in chain]

    def joints_on_bone(self, bone: int) -> list[int]:
        return [i for i, j in enumerate(self.joints) if j.bone == bone]

    def moving_bones(self, finger: str) -> tuple[int, ...]:
        """Bones whose skin segment moves during a single-finger sweep."""
        return self._chain(finger)[1:]

    def rom_lo(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    def rom_hi(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    def with_scale(self, scale: float) -> "HandSkeleton":
        return HandSkeleton(self.name, self.bones, self.joints,
                            dict(self.fingers), scale)

    # -- persistence ------------------------------------------------------

    @staticmethod
    def from_json(doc: dict) -> "HandSkeleton":
        bones = []
        name_to_idx = {}
        for i, b in enumerate(doc["bones"]):
            parent = b["parent"]
            if isinstance(parent, str):
                parent = name_to_idx[parent] if parent else -1
            bones.append(Bone(b["name"], parent, np.array(b["offset_m"], float),
                              float(b.get("skin_radius_m", 0.0))))
            name_to_idx[b["name"]] = i
        joints = []
        for j in doc["joints"]:
            bone = j["bone"]
            if isinstance(bone, str):
                bone = name_to_idx[bone]
            lo, hi = (np.deg2rad(float(v)) for v in j["limits_deg"])
            joints.append(Joint(j["name"], bone, np.array(j["axis"], float), (lo, hi)))
        fingers = {f: tuple(name_to_idx[n] if isinstance(n, str) else n for n in chain)
                   for f, chain in doc["fingers"].items()}
        return HandSkeleton(doc.get("name", "hand"), tuple(bones), tuple(joints),
                            fingers, float(doc.get("scale", 1.0)))

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "name": self.name,
            "scale": self.scale,
            "bones": [{"name": b.name, "parent": b.parent,
                       "offset_m": list(b.offset), "skin_radius_m": b.skin_radius}
                      for b in self.bones],
            "joints": [{"name": j.name, "bone": self.bones[j.bone].name,
                        "axis": list(j.axis),
                        "limits_deg": [float(np.rad2deg(j.limits[0])),
                                       float(np.rad2deg(j.limits[1]))]}
                       for j in self.joints],
            "fingers": {f: [self.bones[i].name for i in chain]
                        for f, chain in self.fingers.items()},
        }

    @staticmethod
    def load(path) -> "HandSkeleton":
        with open(path) as fh:
            return HandSkeleton.from_json(json.load(fh))


@lru_cache(maxsize=4)
def _default_skeleton_cached() -> HandSkeleton:
    return HandSkeleton.load(_DATA_DIR / "default_skeleton.json")


def default_skeleton(scale: float = 1.0) -> HandSkeleton:
    """The bundled right-hand skeleton, sized from mean adult hand dimensions."""
    sk = _default_skeleton_cached()
    return sk.with_scale(scale) if scale != 1.0 else sk


@dataclass(frozen=True)
class HandPose:
    """A wrist transform plus one angle per skeleton DOF. ROM-checked."""

    skeleton: HandSkeleton
    wrist: RigidTransform
    angles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, float).reshape(-1)
        object.__setattr__(self, "angles", a)
        validate_angles(self.skeleton, a)

    def with_finger_angles(self, finger: str, values) -> "HandPose":
        idx = self.skeleton.finger_dof_indices(finger)
        values = np.asarray(values, float).reshape(-1)
        if len(values) != len(idx):
            raise RomError(f"finger {finger}: expected {len(idx)} angles, got {len(values)}")
        a = self.angles.copy()
        a[idx] = values
        return HandPose(self.skeleton, self.wrist, a)

    def finger_angles(self, finger: str) -> np.ndarray:
        return self.angles[self.skeleton.finger_dof_indices(finger)]


def validate_angles(skeleton: HandSkeleton, angles: np.ndarray, atol: float = 1e-9):
    if angles.shape != (skeleton.dof,):
        raise RomError(f"expected {skeleton.dof} joint angles, got {angles.shape}")
    lo, hi = skeleton.rom_lo(), skeleton.rom_hi()
    bad = (angles < lo - atol) | (angles > hi + atol)
    if bad.any():
        i = int(np.argmax(bad))
        raise RomError(
            f"joint {skeleton.joints[i].name}: angle {angles[i]:.4f} rad outside "
            f"[{lo[i]:.4f}, {hi[i]:.4f}]")


# ---------------------------------------------------------------------------
# Forward kinematics
# ---------------------------------------------------------------------------

def _bone_local(skeleton: HandSkeleton, bone: int, angles: np.ndarray) -> np.ndarray:
    b = skeleton.bones[bone]
    T = np.eye(4)
    T[:3, 3] = b.offset * skeleton.scale
    R = np.eye(3)
    for ji in skeleton.joints_on_bone(bone):
        R = R @ rotation_matrix(skeleton.joints[ji].axis, angles[ji])
    T[:3, :3] = R
    return T


def forward_kinematics(skeleton: HandSkeleton, pose: HandPose) -> np.ndarray:
    """World transform of every bone, shape (B, 4, 4)."""
    validate_angles(skeleton, pose.angles)
    out = np.empty((len(skeleton.bones), 4, 4))
    root = np.eye(4)
    root[:3, :3] = pose.wrist.rotation
    root[:3, 3] = pose.wrist.translation
    for i, b in enumerate(skeleton.bones):
        local = _bone_local(skeleton, i, pose.angles)
        out[i] = (root if b.parent < 0 else out[b.parent]) @ local
    return out


def bone_origins(skeleton: HandSkeleton, pose: HandPose) -> np.ndarray:
    return forward_kinematics(skeleton, pose)[:, :3, 3]


def fingertip_positions(skeleton: HandSkeleton, pose: HandPose) -> dict[str, np.ndarray]:
    origins = bone_origins(skeleton, pose)
    return {f: origins[skeleton.fingertip_bone(f)] for f in FINGERS}


def finger_chain_batch(skeleton: HandSkeleton, pose: HandPose, finger: str,
                       finger_angles: np.ndarray) -> np.ndarray:
    """Origins of the finger's chain bones for a batch of finger angle rows.

    finger_angles (N, d) where d = the finger's DOF count.
    Returns (N, len(chain), 3). Other joints stay at the pose's angles.
    """
    chain = skeleton._chain(finger)
    dof_idx = skeleton.finger_dof_indices(finger)
    finger_angles = np.asarray(finger_angles, float).reshape(-1, len(dof_idx))
    N = len(finger_angles)
    col = {j: k for k, j in enumerate(dof_idx)}

    transforms = forward_kinematics(skeleton, pose)
    parent0 = skeleton.bones[chain[0]].parent
    root = np.eye(4) if parent0 < 0 else transforms[parent0]
    if parent0 < 0:
        root = np.eye(4)
        root[:3, :3] = pose.wrist.rotation
        root[:3, 3] = pose.wrist.translation

    cur = np.broadcast_to(root, (N, 4, 4)).copy()
    out = np.empty((N, len(chain), 3))
    for ci, bone in enumerate(chain):
        b = skeleton.bones[bone]
        local = np.zeros((N, 4, 4))
        local[:] = np.eye(4)
        local[:, :3, 3] = b.offset * skeleton.scale
        R = np.broadcast_to(np.eye(3), (N, 3, 3)).copy()
        for ji in skeleton.joints_on_bone(bone):
            ang = finger_angles[:, col[ji]] if ji in col else np.full(N, pose.angles[ji])
            R = R @ rotation_matrices(skeleton.joints[ji].axis, ang)
        local[:, :3, :3] = R
        cur = cur @ local
        out[:, ci] = cur[:, :3, 3]
    return out


# ---------------------------------------------------------------------------
# Wrist frame
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WristFrame:
    """Orthonormal right-handed frame at the wrist joint.

    Y is the dorsum-plane normal toward the back of the hand, Z runs from
    the little-finger to the index-finger metacarpal head, X = Y x Z.
    """

    origin: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for n in ("origin", "x", "y", "z"):
            object.__setattr__(self, n, np.asarray(getattr(self, n), float).reshape(3))
        M = np.stack([self.x, self.y, self.z])
        if not np.allclose(M @ M.T, np.eye(3), atol=1e-9):
            raise FrameError("axes not orthonormal")
        if not np.allclose(np.cross(self.y, self.z), self.x, atol=1e-9):
            raise FrameError("frame not right-handed")

    def to_local(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, float)
        return (p - self.origin) @ np.stack([self.x, self.y, self.z], axis=1)

    def to_world(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, float)
        return p @ np.stack([self.x, self.y, self.z]) + self.origin


def wrist_frame(skeleton: HandSkeleton, pose: HandPose) -> WristFrame:
    """Wrist-centered frame per the dorsum-plane / metacarpal convention."""
    origins = bone_origins(skeleton, pose)
    mcp = {f: origins[skeleton._chain(f)[0]] for f in ("index", "middle", "ring", "little")}
    wrist_origin = pose.wrist.translation

    pts = np.array([mcp["index"], mcp["middle"], mcp["ring"], mcp["little"]])
    centered = pts - pts.mean(axis=0)
    _, s, vt = np.linalg.svd(centered)
    if s[1] < 1e-12:
        raise FrameError("metacarpal heads are collinear")
    normal = vt[2]

    z_raw = mcp["index"] - mcp["little"]
    x_raw = wrist_origin - mcp["middle"]  # toward the forearm
    y_ref = np.cross(z_raw, x_raw)
    if np.linalg.norm(y_ref) < 1e-12:
        raise FrameError("degenerate metacarpal configuration")
    if np.dot(normal, y_ref) < 0:
        normal = -normal
    y = normal / np.linalg.norm(normal)
    z = z_raw - np.dot(z_raw, y) * y
    nz = np.linalg.norm(z)
    if nz < 1e-12:
        raise FrameError("little->index direction parallel to dorsum normal")
    z = z / nz
    x = np.cross(y, z)
    return WristFrame(wrist_origin, x, y, z)


# ---------------------------------------------------------------------------
# Pose distances
# ---------------------------------------------------------------------------

def _quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    h = 0.5 * angle
    return np.concatenate([[np.cos(h)], np.sin(h) * axis])


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def _canonical(q: np.ndarray) -> np.ndarray:
    return -q if q[0] < 0 else q


def _bone_quaternion(skeleton: HandSkeleton, bone: int, angles: np.ndarray) -> np.ndarray:
    q = np.array([1.0, 0.0, 0.0, 0.0])
    for ji in skeleton.joints_on_bone(bone):
        q = _quat_mul(q, _quat_from_axis_angle(skeleton.joints[ji].axis, angles[ji]))
    return _canonical(q)


def joint_quaternion_distance(skeleton: HandSkeleton, a: HandPose, b: HandPose,
                              finger: str) -> float:
    """Summed geodesic angle between the finger's per-joint orientations."""
    if a.skeleton is not b.skeleton and a.skeleton != b.skeleton:
        raise SkeletonError("poses belong to different skeletons")
    total = 0.0
    for bone in skeleton._chain(finger):
        if not skeleton.joints_on_bone(bone):
            continue
        qa = _bone_quaternion(skeleton, bone, a.angles)
        qb = _bone_quaternion(skeleton, bone, b.angles)
        total += 2.0 * np.arccos(min(abs(float(np.dot(qa, qb))), 1.0))
    return float(total)


def joint_angle_abs_sum(skeleton: HandSkeleton, a: HandPose, b: HandPose,
                        finger: str) -> float:
    """Sum of absolute joint-angle differences over the finger's DOF."""
    if len(a.angles) != len(b.angles):
        raise RomError("poses have mismatched DOF counts")
    idx = skeleton.finger_dof_indices(finger)
    return float(np.abs(a.angles[idx] - b.angles[idx]).sum())


def joint_quaternion_distance_batch(skeleton: HandSkeleton, base: HandPose,
                                    finger: str,
                                    finger_angles: np.ndarray) -> np.ndarray:
    """Quaternion distance from the base pose for N finger-angle rows."""
    finger_angles = np.atleast_2d(np.asarray(finger_angles, float))
    dof_idx = skeleton.finger_dof_indices(finger)
    col = {j: k for k, j in enumerate(dof_idx)}
    N = len(finger_angles)
    total = np.zeros(N)
    for bone in skeleton._chain(finger):
        js = skeleton.joints_on_bone(bone)
        if not js:
            continue
        qb = _bone_quaternion(skeleton, bone, base.angles)
        q = np.zeros((N, 4))
        q[:, 0] = 1.0
        for ji in js:
            ang = finger_angles[:, col[ji]]
            h = 0.5 * ang
            qj = np.concatenate([np.cos(h)[:, None],
                                 np.sin(h)[:, None] * skeleton.joints[ji].axis[None]],
                                axis=1)
            w1, v1 = q[:, :1], q[:, 1:]
            w2, v2 = qj[:, :1], qj[:, 1:]
            q = np.concatenate([w1 * w2 - np.einsum("nk,nk->n", v1, v2)[:, None],
                                w1 * v2 + w2 * v1 + np.cross(v1, v2)], axis=1)
        dots = np.abs(q @ qb)
        total += 2.0 * np.arccos(np.minimum(dots, 1.0))
    return total


# ---------------------------------------------------------------------------
# Skin
# ---------------------------------------------------------------------------

def _bone_capsules(skeleton: HandSkeleton, origins: np.ndarray,
                   bones) -> list[tuple[int, Capsule]]:
    caps = []
    for i in bones:
        b = skeleton.bones[i]
        if b.parent < 0 or b.skin_radius <= 0:
            continue
        p0 = origins[b.parent]
        p1 = origins[i]
        if np.linalg.norm(p1 - p0) < 1e-12:
            continue
        caps.append((i, Capsule(p0, p1, b.skin_radius * skeleton.scale)))
    return caps


def hand_skin(skeleton: HandSkeleton, pose: HandPose) -> list[Capsule]:
    """Capsules for every skinned bone segment at the given pose."""
    origins = bone_origins(skeleton, pose)
    return [c for _, c in _bone_capsules(skeleton, origins, range(len(skeleton.bones)))]


def static_skin_indexed(skeleton: HandSkeleton, pose: HandPose,
                        moving_finger: str) -> list[tuple[int, Capsule]]:
    """(bone index, capsule) for the palm and every non-moving finger segment."""
    moving = set(skeleton.moving_bones(moving_finger))
    origins = bone_origins(skeleton, pose)
    return _bone_capsules(skeleton, origins,
                          [i for i in range(len(skeleton.bones)) if i not in moving])


def static_skin(skeleton: HandSkeleton, pose: HandPose, moving_finger: str) -> list[Capsule]:
    """Skin of the palm and every finger except the moving one's phalanges."""
    return [c for _, c in static_skin_indexed(skeleton, pose, moving_finger)]


def moving_skin(skeleton: HandSkeleton, pose: HandPose, finger: str) -> list[Capsule]:
    """Capsules of the finger's phalanx segments (the parts a sweep moves)."""
    origins = bone_origins(skeleton, pose)
    return [c for _, c in _bone_capsules(skeleton, origins,
                                         skeleton.moving_bones(finger))]


def moving_skin_radii(skeleton: HandSkeleton, finger: str) -> np.ndarray:
    return np.array([skeleton.bones[i].skin_radius * skeleton.scale
                     for i in skeleton.moving_bones(finger)])
