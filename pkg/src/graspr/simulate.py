"""Single-finger reach sweeps around a held grasp.

For each finger, the joint grid between its ROM limits is swept while the
wrist and all other fingers stay frozen at the grasp pose. Candidate poses
that bring the moving phalanx capsules within the collision tolerance of
the object or the static hand skin are rejected. Surviving fingertip
positions form the finger's reach cloud, expressed in the wrist frame.

Sweeps are purely deterministic: same scene + step means bitwise-identical
clouds. Fingers are independent and may be simulated concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    AlphaShape,
    Capsule,
    DegenerateGeometryError,
    RigidTransform,
    TriMesh,
    _winding_numbers,
    alpha_shape,
    convex_hull,
    distance_to_mesh,
    points_to_capsules_distance,
    segment_segment_distance,
    segments_to_triangles_distance,
)
from .hand import (
    FINGERS,
    HandPose,
    HandSkeleton,
    WristFrame,
    finger_chain_batch,
    fingertip_positions,
    hand_skin,
    static_skin_indexed,
    wrist_frame,
)

DEFAULT_ALPHA = 0.1          # probe radius in meters; convention documented in geometry
DEFAULT_STEP_DEG = 5.0
DEFAULT_COLLISION_TOL = 1e-3
DEFAULT_CONTACT_TOL = 2e-3


class SceneError(ValueError):
    pass


@dataclass
class GraspScene:
    """A grasp condition: skeleton + grasp pose + held object."""

    condition_id: str
    skeleton: HandSkeleton
    grasp_pose: HandPose
    obj: TriMesh | None = None
    object_transform: RigidTransform = field(default_factory=RigidTransform.identity)
    collision_tolerance: float = DEFAULT_COLLISION_TOL
    contact_tolerance: float = DEFAULT_CONTACT_TOL
    alpha: float = DEFAULT_ALPHA
    validate: bool = True

    def __post_init__(self):
        self._world_obj: TriMesh | None = None
        if self.validate and self.obj is not None:
            skin = hand_skin(self.skeleton, self.grasp_pose)
            tri = self.object_world().triangles()
            p0 = np.array([c.p0 for c in skin])
            p1 = np.array([c.q_safe() for c in skin])
            r = np.array([c.radius for c in skin])
            d = segments_to_triangles_distance(p0, p1, tri).min(axis=1) - r
            if d.min() < self.collision_tolerance:
                worst = int(np.argmin(d))
                raise SceneError(
                    f"scene {self.condition_id}: grasp pose within "
                    f"{d.min() * 1000:.2f} mm of the object (capsule {worst}); "
                    f"tolerance is {self.collision_tolerance * 1000:.2f} mm")

    def object_world(self) -> TriMesh | None:
        if self.obj is None:
            return None
        if self._world_obj is None:
            self._world_obj = self.obj.transformed(self.object_transform)
        return self._world_obj

    def frame(self) -> WristFrame:
        return wrist_frame(self.skeleton, self.grasp_pose)


@dataclass
class ReachCloud:
    """Reachable fingertip samples of one finger, wrist-frame coordinates."""

    finger: str
    angles: np.ndarray            # (N, finger DOF)
    positions: np.ndarray         # (N, 3) wrist frame
    centroid: np.ndarray          # (3,)
    volume: float
    boundary: AlphaShape | None
    initial_fingertip: np.ndarray  # (3,) wrist frame
    step: float
    dist_object: np.ndarray | None = None   # per sample, meters
    dist_hand: np.ndarray | None = None

    def __len__(self):
        return len(self.positions)


def _grid(lo: np.ndarray, hi: np.ndarray, step: float) -> np.ndarray:
    """Cartesian sweep grid from lo to hi (inclusive where aligned)."""
    axes = [np.arange(l, h + 1e-12, step) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _segments_free_of_mesh(p: np.ndarray, q: np.ndarray, radius: float,
                           mesh: TriMesh, tol: float, chunk: int = 512) -> np.ndarray:
    """True per segment when the capsule (radius) stays >= tol from the mesh.

    Chunked with an AABB cull so sweeps far from the object stay cheap. A
    capsule wholly inside the mesh is far from every triangle, so endpoints
    of surviving segments are also winding-number tested for containment.
    """
    tri = mesh.triangles()
    tri_lo = tri.min(axis=1)
    tri_hi = tri.max(axis=1)
    free = np.ones(len(p), dtype=bool)
    margin = radius + tol
    for s in range(0, len(p), chunk):
        ps, qs = p[s:s + chunk], q[s:s + chunk]
        lo = np.minimum(ps, qs).min(axis=0) - margin
        hi = np.maximum(ps, qs).max(axis=0) + margin
        cand = np.all(tri_hi >= lo, axis=1) & np.all(tri_lo <= hi, axis=1)
        if not cand.any():
            continue
        d = segments_to_triangles_distance(ps, qs, tri[cand]).min(axis=1) - radius
        free[s:s + chunk] &= (d >= tol) & (d > 0)

    mesh_lo, mesh_hi = tri.min(axis=(0, 1)), tri.max(axis=(0, 1))
    suspect = free & np.all((p >= mesh_lo) & (p <= mesh_hi), axis=1)
    if suspect.any():
        idx = np.nonzero(suspect)[0]
        inside = _winding_numbers(p[idx], tri) >= 0.5
        free[idx[inside]] = False
    return free


def simulate_finger(scene: GraspScene, finger: str, step: float | None = None) -> ReachCloud:
    """Sweep one finger's ROM grid and keep the collision-free poses.

    `step` is the per-DOF grid step in radians (default 5 degrees).
    """
    if step is None:
        step = np.deg2rad(DEFAULT_STEP_DEG)
    if step <= 0:
        raise SceneError("step must be positive")
    sk = scene.skeleton
    pose = scene.grasp_pose
    dof_idx = sk.finger_dof_indices(finger)
    frame = scene.frame()
    initial_tip = frame.to_local(fingertip_positions(sk, pose)[finger])

    if not dof_idx:
        # zero-DOF finger: single rest sample at the grasp pose
        grid = np.zeros((1, 0))
    else:
        lo = sk.rom_lo()[dof_idx]
        hi = sk.rom_hi()[dof_idx]
        grid = _grid(lo, hi, step)

    chain_pts = finger_chain_batch(sk, pose, finger, grid)  # (N, C, 3)
    moving = sk.moving_bones(finger)
    radii = np.array([sk.bones[b].skin_radius * sk.scale for b in moving])

    keep = np.ones(len(grid), dtype=bool)
    statics_indexed = static_skin_indexed(sk, pose, finger)
    statics = [c for _, c in statics_indexed]
    own_meta = sk.fingers[finger][0]
    tol = scene.collision_tolerance
    world_obj = scene.object_world()

    for j in range(len(moving)):
        p, q = chain_pts[:, j], chain_pts[:, j + 1]
        r = radii[j]
        if r <= 0:
            continue
        # static hand skin: the first phalanx shares its base point with the
        # finger's own metacarpal capsule, so that pair is skipped
        for bone_idx, cap in statics_indexed:
            if j == 0 and bone_idx == own_meta:
                continue
            d = segment_segment_distance(p, q, cap.p0[None], cap.q_safe()[None])
            keep &= (d - r - cap.radius) >= tol
        if world_obj is not None:
            keep &= _segments_free_of_mesh(p, q, r, world_obj, tol)

    angles = grid[keep]
    tips_world = chain_pts[keep, -1]
    positions = frame.to_local(tips_world)

    if len(positions) == 0:
        warnings.warn(f"finger {finger!r} is fully immobilized in scene "
                      f"{scene.condition_id!r}", stacklevel=2)
        return ReachCloud(finger, angles, positions, np.full(3, np.nan), 0.0,
                          None, initial_tip, step)

    centroid = positions.mean(axis=0)
    boundary = None
    volume = 0.0
    try:
        boundary = alpha_shape(positions, scene.alpha)
        volume = boundary.volume
    except DegenerateGeometryError:
        try:
            _, volume = convex_hull(positions)
        except DegenerateGeometryError:
            volume = 0.0

    # surface distances: from the fingertip skin (tip capsule surface), not
    # the bone endpoint, else the collision margin could never reach the
    # "near surface" sampling bands
    tip_radius = sk.bones[sk.fingers[finger][-1]].skin_radius * sk.scale
    dist_obj = None
    if world_obj is not None:
        dist_obj = np.maximum(distance_to_mesh(tips_world, world_obj) - tip_radius, 0.0)
    dist_hand = None
    if statics:
        dhand = points_to_capsules_distance(tips_world, statics).min(axis=1)
        dist_hand = np.maximum(dhand - tip_radius, 0.0)

    return ReachCloud(finger, angles, positions, centroid, float(volume),
                      boundary, initial_tip, step, dist_obj, dist_hand)


def simulate_scene(scene: GraspScene, step: float | None = None) -> list[ReachCloud]:
    """All five finger sweeps, thumb through little, deterministic order."""
    return [simulate_finger(scene, f, step) for f in FINGERS]


def reach_pose(scene: GraspScene, finger: str, finger_angles: np.ndarray) -> HandPose:
    """The full hand pose for one reach sample (grasp pose + finger angles)."""
    return scene.grasp_pose.with_finger_angles(finger, finger_angles)


def verify_sample(scene: GraspScene, finger: str, finger_angles: np.ndarray,
                  position_wrist: np.ndarray, atol: float = 1e-9) -> bool:
    """Recompute FK for a stored sample and confirm the fingertip matches."""
    pose = reach_pose(scene, finger, finger_angles)
    tip = fingertip_positions(scene.skeleton, pose)[finger]
    return bool(np.allclose(scene.frame().to_local(tip), position_wrist, atol=atol))
