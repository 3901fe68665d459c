"""The 16 per-task reach features and their pairwise deltas.

Feature order is the package-wide contract; persisted models carry the same
key and refuse to mix orders. Geometry features live in the wrist frame, so
rigidly moving the whole scene leaves every value unchanged.

Per task: target coordinates, distances to the static hand / object / cloud
centroid, the acting finger's initial fingertip coordinates, the initial-to-
target Euclidean distance, the two angular distances from the grasp pose,
the cloud volume, the grasp cage ratio, the object volume and the predicted
forearm-activation magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .emg import MLPModel, PoseAngleMapping, emg_abs_sum
from .geometry import cage_ratio, contact_points
from .hand import hand_skin, joint_quaternion_distance_batch
from .simulate import GraspScene, ReachCloud

FEATURE_NAMES = (
    "target_x", "target_y", "target_z",
    "target_dist_body", "target_dist_object", "target_dist_centroid",
    "joint_x", "joint_y", "joint_z",
    "joint_to_target_euclid",
    "joint_angular_distance", "joint_angle_abs_sum",
    "reach_volume", "cage_ratio", "object_volume", "vemg_abs_sum",
)

N_FEATURES = len(FEATURE_NAMES)


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    """Absolute features of one reach task, fixed order, SI units."""

    target_x: float
    target_y: float
    target_z: float
    target_dist_body: float
    target_dist_object: float
    target_dist_centroid: float
    joint_x: float
    joint_y: float
    joint_z: float
    joint_to_target_euclid: float
    joint_angular_distance: float
    joint_angle_abs_sum: float
    reach_volume: float
    cage_ratio: float
    object_volume: float
    vemg_abs_sum: float

    def __post_init__(self):
        for name in ("target_dist_body", "target_dist_object",
                     "target_dist_centroid", "joint_to_target_euclid",
                     "joint_angular_distance", "joint_angle_abs_sum",
                     "reach_volume", "object_volume", "vemg_abs_sum"):
            if getattr(self, name) < 0:
                raise FeatureError(f"{name} must be non-negative")

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_NAMES])

    @staticmethod
    def from_array(values) -> "FeatureVector":
        values = np.asarray(values, float).reshape(-1)
        if len(values) != N_FEATURES:
            raise FeatureError(f"expected {N_FEATURES} features, got {len(values)}")
        return FeatureVector(**{n: float(v) for n, v in zip(FEATURE_NAMES, values)})


assert tuple(f.name for f in fields(FeatureVector)) == FEATURE_NAMES


@dataclass(frozen=True)
class DeltaFeatureVector:
    """Elementwise feature difference A - B for one trial pair."""

    pair_id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, float).reshape(-1)
        if len(v) != N_FEATURES:
            raise FeatureError(f"expected {N_FEATURES} deltas, got {len(v)}")
        object.__setattr__(self, "values", v)


def delta_features(a: FeatureVector | np.ndarray, b: FeatureVector | np.ndarray,
                   pair_id: str = "") -> DeltaFeatureVector:
    va = a.to_array() if isinstance(a, FeatureVector) else np.asarray(a, float)
    vb = b.to_array() if isinstance(b, FeatureVector) else np.asarray(b, float)
    return DeltaFeatureVector(pair_id, va - vb)


# ---------------------------------------------------------------------------
# Scene-level quantities (constant across a scene's tasks)
# ---------------------------------------------------------------------------

def scene_volumetrics(scene: GraspScene) -> tuple[float, float]:
    """(grasp cage ratio, object volume) for a scene; cached on the scene."""
    cached = getattr(scene, "_volumetrics", None)
    if cached is not None:
        return cached
    obj = scene.object_world()
    if obj is None:
        raise FeatureError("scene has no object; volumetric features undefined")
    skin = hand_skin(scene.skeleton, scene.grasp_pose)
    contacts = contact_points(skin, obj, scene.contact_tolerance)
    ratio = cage_ratio(contacts, obj).ratio if len(contacts) else 0.0
    vol = obj.volume()
    scene._volumetrics = (float(ratio), float(vol))
    return scene._volumetrics


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

def compute_feature_matrix(scene: GraspScene, cloud: ReachCloud,
                           sample_indices, emg_model: MLPModel | None,
                           mapping: PoseAngleMapping | None = None,
                           geometric_only: bool = False) -> np.ndarray:
    """Feature rows for the given cloud samples, shape (N, 16)."""
    idx = np.asarray(sample_indices, int).reshape(-1)
    if len(cloud) == 0 or (len(idx) and idx.max() >= len(cloud)):
        raise FeatureError("sample index outside the cloud")
    if cloud.dist_object is None or cloud.dist_hand is None:
        raise FeatureError("cloud lacks surface distances; simulate with an "
                           "object and static skin present")
    if emg_model is None and not geometric_only:
        raise FeatureError("EMG model required unless geometric_only is set")

    sk = scene.skeleton
    finger = cloud.finger
    pos = cloud.positions[idx]
    initial = cloud.initial_fingertip
    cage, obj_vol = scene_volumetrics(scene)

    ang_quat = joint_quaternion_distance_batch(sk, scene.grasp_pose, finger,
                                               cloud.angles[idx])
    base_angles = scene.grasp_pose.finger_angles(finger)
    abs_sum = np.abs(cloud.angles[idx] - base_angles).sum(axis=1)

    if geometric_only and emg_model is None:
        vemg = np.zeros(len(idx))
    else:
        mapping = mapping or PoseAngleMapping.identity(sk.dof)
        full = np.tile(scene.grasp_pose.angles, (len(idx), 1))
        full[:, sk.finger_dof_indices(finger)] = cloud.angles[idx]
        vemg = np.atleast_1d(emg_abs_sum(emg_model, full, mapping))

    out = np.empty((len(idx), N_FEATURES))
    out[:, 0:3] = pos
    out[:, 3] = cloud.dist_hand[idx]
    out[:, 4] = cloud.dist_object[idx]
    out[:, 5] = np.linalg.norm(pos - cloud.centroid, axis=1)
    out[:, 6:9] = initial
    out[:, 9] = np.linalg.norm(pos - initial, axis=1)
    out[:, 10] = ang_quat
    out[:, 11] = abs_sum
    out[:, 12] = cloud.volume
    out[:, 13] = cage
    out[:, 14] = obj_vol
    out[:, 15] = vemg
    return out


def compute_features(scene: GraspScene, cloud: ReachCloud, sample_index: int,
                     emg_model: MLPModel | None,
                     mapping: PoseAngleMapping | None = None,
                     geometric_only: bool = False) -> FeatureVector:
    row = compute_feature_matrix(scene, cloud, [sample_index], emg_model,
                                 mapping, geometric_only)[0]
    return FeatureVector.from_array(row)


# ---------------------------------------------------------------------------
# Screened-out diagnostics (not part of the model vector)
# ---------------------------------------------------------------------------

def diagnostic_features(scene: GraspScene, cloud: ReachCloud,
                        sample_index: int) -> dict[str, float]:
    """Features dropped during selection, kept for analysis only.

    forward_coord: target position along the forward direction (-X of the
    wrist frame, away from the forearm). euclid_joint_vector: plain L2
    distance between the finger's joint-angle vectors. dist_hull /
    dist_boundary: target distance to the cloud's hull and alpha boundary.
    """
    pos = cloud.positions[sample_index]
    base = scene.grasp_pose.finger_angles(cloud.finger)
    ang = cloud.angles[sample_index]
    out = {
        "forward_coord": float(-pos[0]),
        "euclid_joint_vector": float(np.linalg.norm(ang - base)),
    }
    try:
        from .geometry import convex_hull
        faces, _ = convex_hull(cloud.positions)
        hull_pts = cloud.positions[np.unique(faces)]
        out["dist_hull"] = float(np.linalg.norm(hull_pts - pos, axis=1).min())
    except Exception:
        out["dist_hull"] = float("nan")
    if cloud.boundary is not None and len(cloud.boundary.boundary_vertex_indices):
        bpts = cloud.positions[cloud.boundary.boundary_vertex_indices]
        out["dist_boundary"] = float(np.linalg.norm(bpts - pos, axis=1).min())
    else:
        out["dist_boundary"] = float("nan")
    return out
