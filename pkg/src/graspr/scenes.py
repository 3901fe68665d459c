"""Bundled procedural grasp scenes.

Four conditions mirroring a short study layout: a cylinder held in a full
wrap, a ball pinched between thumb and fingers, a thin marker in a
writing-style grip and a flat "scissors" slab held at the fingertips.
Objects are procedural meshes; each grasp pose is found by curling fingers
from an open reference toward a closed target until the moving skin
reaches a set clearance from the object and the already-posed fingers, so
construction is deterministic and respects the collision tolerance.

The cylinder is short on the ulnar side on purpose: the little finger
hangs past its rim and its whole sweep stays clear of the near-object
sampling band, which leaves exactly one empty sampling cell in the
default layout.
"""

from __future__ import annotations

import numpy as np

from .geometry import (
    TriMesh,
    RigidTransform,
    segment_segment_distance,
    segments_to_triangles_distance,
)
from .hand import (
    FINGERS,
    HandPose,
    HandSkeleton,
    bone_origins,
    default_skeleton,
    static_skin_indexed,
)
from .primitives import make_box, make_cylinder, make_uv_sphere
from .simulate import GraspScene

SCENE_STEP_DEG = {
    "medium-wrap-can": 12.0,
    "lateral-tripod-ball": 12.0,
    "writing-tripod-marker": 12.0,
    "distal-scissors": 12.0,
}


def _deg(*vals):
    return np.deg2rad(np.array(vals, float))


def pose_clearance(skeleton: HandSkeleton, pose: HandPose, finger: str,
                   obj: TriMesh) -> float:
    """Min clearance of the finger's moving skin vs object + static skin."""
    origins = bone_origins(skeleton, pose)
    chain = skeleton.fingers[finger]
    best = np.inf
    statics = static_skin_indexed(skeleton, pose, finger)
    tris = obj.triangles()
    for seg_i, b in enumerate(chain[1:]):
        bone = skeleton.bones[b]
        r = bone.skin_radius * skeleton.scale
        if r <= 0:
            continue
        p = origins[bone.parent]
        q = origins[b]
        d = segments_to_triangles_distance(p[None], q[None], tris).min() - r
        best = min(best, float(d))
        for bone_idx, cap in statics:
            if seg_i == 0 and bone_idx == chain[0]:
                continue
            dd = segment_segment_distance(p, q, cap.p0, cap.q_safe())
            best = min(best, float(dd - r - cap.radius))
    return best


def settle_finger(skeleton: HandSkeleton, pose: HandPose, finger: str,
                  open_angles, target, obj: TriMesh, clearance: float,
                  iters: int = 48) -> HandPose:
    """Blend a finger from open toward target, stopping at the clearance."""
    open_angles = np.asarray(open_angles, float)
    target = np.asarray(target, float)

    def clear_at(t: float) -> float:
        p = pose.with_finger_angles(finger, open_angles + t * (target - open_angles))
        return pose_clearance(skeleton, p, finger, obj)

    if clear_at(0.0) < clearance:
        raise ValueError(f"finger {finger}: open pose already within clearance "
                         f"({clear_at(0.0) * 1000:.2f} mm)")
    if clear_at(1.0) >= clearance:
        return pose.with_finger_angles(finger, target)
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = (lo + hi) / 2.0
        if clear_at(mid) >= clearance:
            lo = mid
        else:
            hi = mid
    return pose.with_finger_angles(finger, open_angles + lo * (target - open_angles))


# fully extended / out-of-the-way reference per finger
_OPEN_FINGER = _deg(-20, 0, 0, 0)
_OPEN_THUMB = _deg(-20, -35, 0, -10)


def _settled_scene(condition_id: str, skeleton: HandSkeleton, obj: TriMesh,
                   targets: dict[str, np.ndarray],
                   opens: dict[str, np.ndarray] | None = None,
                   clearance: float = 1.6e-3, alpha: float = 0.1) -> GraspScene:
    opens = opens or {}
    pose = HandPose(skeleton, RigidTransform.identity(), np.zeros(skeleton.dof))
    for finger in FINGERS:
        open_angles = opens.get(finger,
                                _OPEN_THUMB if finger == "thumb" else _OPEN_FINGER)
        pose = pose.with_finger_angles(finger, open_angles)
    for finger in FINGERS:
        open_angles = pose.finger_angles(finger)
        pose = settle_finger(skeleton, pose, finger, open_angles,
                             targets[finger], obj, clearance)
    return GraspScene(condition_id, skeleton, pose, obj=obj, alpha=alpha)


def can_scene(skeleton: HandSkeleton | None = None) -> GraspScene:
    """Full wrap on a short cylinder; the little finger overhangs the rim."""
    sk = skeleton or default_skeleton()
    can = make_cylinder(radius=0.029, height=0.092, segments=48,
                        center=(-0.075, -0.0435, 0.031), axis="z")
    targets = {
        "thumb": _deg(50, 55, 60, 60),
        "index": _deg(75, 5, 70, 45),
        "middle": _deg(75, 0, 70, 45),
        "ring": _deg(75, -5, 70, 45),
        "little": _deg(70, -5, 70, 45),
    }
    return _settled_scene("medium-wrap-can", sk, can, targets)


def ball_scene(skeleton: HandSkeleton | None = None) -> GraspScene:
    """Ball pinched between thumb, index and middle, resting over the palm."""
    sk = skeleton or default_skeleton()
    ball = make_uv_sphere(0.0285, center=(-0.088, -0.045, 0.004),
                          segments=36, rings=24)
    targets = {
        "thumb": _deg(40, 5, 35, 40),
        "index": _deg(70, 0, 75, 50),
        "middle": _deg(70, 0, 75, 50),
        "ring": _deg(70, 0, 75, 50),
        "little": _deg(70, 10, 75, 50),
    }
    return _settled_scene("lateral-tripod-ball", sk, ball, targets)


def marker_scene(skeleton: HandSkeleton | None = None) -> GraspScene:
    """Thick marker across the fingers in a writing-style grip."""
    sk = skeleton or default_skeleton()
    marker = make_cylinder(radius=0.009, height=0.13, segments=32,
                           center=(-0.098, -0.028, -0.005), axis="z")
    targets = {
        "thumb": _deg(40, 25, 35, 35),
        "index": _deg(55, 0, 55, 35),
        "middle": _deg(55, 0, 55, 35),
        "ring": _deg(70, 0, 95, 70),
        "little": _deg(70, 0, 95, 70),
    }
    return _settled_scene("writing-tripod-marker", sk, marker, targets)


def scissors_scene(skeleton: HandSkeleton | None = None) -> GraspScene:
    """Closed-scissors proxy: a thin slab gripped at the distal phalanges."""
    sk = skeleton or default_skeleton()
    slab = make_box(size=(0.11, 0.012, 0.07), center=(-0.112, -0.032, -0.005))
    targets = {
        "thumb": _deg(45, 30, 45, 45),
        "index": _deg(45, 0, 45, 30),
        "middle": _deg(45, 0, 45, 30),
        "ring": _deg(70, 0, 95, 70),
        "little": _deg(70, 0, 95, 70),
    }
    return _settled_scene("distal-scissors", sk, slab, targets)


def bundled_scenes(skeleton: HandSkeleton | None = None) -> list[GraspScene]:
    sk = skeleton or default_skeleton()
    return [can_scene(sk), ball_scene(sk), marker_scene(sk), scissors_scene(sk)]
