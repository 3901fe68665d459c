"""Stratified target sampling, trial pairing and session ordering.

Targets are drawn from four strata of each finger's reach cloud: near the
object, near the static hand, the far boundary of the cloud, and the sample
nearest the cloud centroid. One target per non-empty stratum per finger and
scene; pairs are unordered combinations within a scene.

Region thresholds: "close" is the bottom 5% quantile of surface distance
capped at 5 mm absolute; "far" is the top 25% quantile of distance from the
initial fingertip over the cloud's boundary samples. A sample qualifying
for both surfaces goes to the object stratum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .geometry import distance_to_mesh, points_to_capsules_distance
from .hand import FINGERS, static_skin
from .simulate import GraspScene, ReachCloud

STRATA = ("on_object", "on_hand", "in_air", "in_air_mid")

CLOSE_QUANTILE = 0.05
CLOSE_CAP = 5e-3          # meters
FAR_QUANTILE = 0.75


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class TargetPoint:
    id: str
    scene_id: str
    finger: str
    stratum: str
    sample_index: int
    position: np.ndarray   # wrist frame, meters

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, float).reshape(3))


@dataclass(frozen=True)
class TrialPair:
    id: str
    scene_id: str
    target_a: str
    target_b: str

    def __post_init__(self):
        if self.target_a == self.target_b:
            raise SamplingError("a pair must reference two distinct targets")


@dataclass
class Regions:
    """Per-stratum sample indices into a reach cloud."""

    on_object: np.ndarray
    on_hand: np.ndarray
    in_air: np.ndarray
    in_air_mid: np.ndarray

    def by_name(self, stratum: str) -> np.ndarray:
        return getattr(self, stratum)

    def empty_strata(self) -> list[str]:
        return [s for s in STRATA if len(self.by_name(s)) == 0]


def _close_region(dist: np.ndarray) -> np.ndarray:
    cutoff = min(np.quantile(dist, CLOSE_QUANTILE), CLOSE_CAP)
    return np.nonzero(dist <= cutoff)[0]


def extract_regions(cloud: ReachCloud, scene: GraspScene) -> Regions:
    """Split a cloud's samples into the four sampling strata (may be empty)."""
    n = len(cloud)
    empty = np.empty(0, dtype=int)
    if n == 0:
        return Regions(empty, empty, empty, empty)

    dist_obj = cloud.dist_object
    dist_hand = cloud.dist_hand
    world = scene.frame().to_world(cloud.positions)
    sk = scene.skeleton
    tip_radius = sk.bones[sk.fingers[cloud.finger][-1]].skin_radius * sk.scale
    if dist_obj is None and scene.object_world() is not None:
        dist_obj = np.maximum(
            distance_to_mesh(world, scene.object_world()) - tip_radius, 0.0)
    if dist_hand is None:
        statics = static_skin(scene.skeleton, scene.grasp_pose, cloud.finger)
        if statics:
            dist_hand = np.maximum(
                points_to_capsules_distance(world, statics).min(axis=1) - tip_radius,
                0.0)

    on_object = _close_region(dist_obj) if dist_obj is not None else empty
    if dist_hand is not None:
        on_hand = _close_region(dist_hand)
        on_hand = np.setdiff1d(on_hand, on_object)  # object stratum wins overlaps
    else:
        on_hand = empty

    if cloud.boundary is not None and len(cloud.boundary.boundary_vertex_indices):
        candidates = cloud.boundary.boundary_vertex_indices
    else:
        candidates = np.arange(n)
    candidates = np.setdiff1d(candidates, np.concatenate([on_object, on_hand]))
    if len(candidates):
        d_init = np.linalg.norm(cloud.positions[candidates] - cloud.initial_fingertip,
                                axis=1)
        in_air = candidates[d_init >= np.quantile(d_init, FAR_QUANTILE)]
    else:
        in_air = empty

    mid = int(np.argmin(np.linalg.norm(cloud.positions - cloud.centroid, axis=1)))
    return Regions(on_object, on_hand, in_air, np.array([mid]))


def sample_targets(scene_clouds: dict[str, dict[str, tuple[ReachCloud, Regions]]],
                   seed: int) -> list[TargetPoint]:
    """One uniform draw per non-empty stratum per (scene, finger).

    `scene_clouds` maps scene id -> finger -> (cloud, regions). Iteration
    order is fixed (sorted scenes, canonical fingers, canonical strata), so
    a seed fully determines the draw.
    """
    rng = np.random.default_rng(seed)
    targets = []
    for scene_id in sorted(scene_clouds):
        fingers = scene_clouds[scene_id]
        for finger in FINGERS:
            if finger not in fingers:
                continue
            cloud, regions = fingers[finger]
            for stratum in STRATA:
                members = regions.by_name(stratum)
                if len(members) == 0:
                    warnings.warn(
                        f"empty stratum {stratum!r} for {finger!r} in scene "
                        f"{scene_id!r}", stacklevel=2)
                    continue
                pick = int(members[rng.integers(len(members))])
                targets.append(TargetPoint(
                    id=f"{scene_id}:{finger}:{stratum}",
                    scene_id=scene_id, finger=finger, stratum=stratum,
                    sample_index=pick, position=cloud.positions[pick]))
    return targets


def pair_targets(targets: list[TargetPoint]) -> list[TrialPair]:
    """All unordered within-scene pairs; C(n, 2) per scene."""
    by_scene: dict[str, list[TargetPoint]] = {}
    for t in targets:
        by_scene.setdefault(t.scene_id, []).append(t)
    pairs = []
    for scene_id in sorted(by_scene):
        members = sorted(by_scene[scene_id], key=lambda t: t.id)
        for k, (a, b) in enumerate(combinations(members, 2)):
            pairs.append(TrialPair(f"{scene_id}#p{k:03d}", scene_id, a.id, b.id))
    return pairs


def balanced_latin_square(n: int) -> np.ndarray:
    """Condition ordering matrix: each condition once per row and column,
    each ordered adjacency equally frequent. Odd n uses the doubled form."""
    if n < 2:
        raise SamplingError("a latin square needs at least 2 conditions")
    first = np.empty(n, dtype=int)
    first[0] = 0
    lo_val, hi_val = 1, n - 1
    for k in range(1, n):
        if k % 2 == 1:
            first[k] = lo_val
            lo_val += 1
        else:
            first[k] = hi_val
            hi_val -= 1
    rows = [(first + i) % n for i in range(n)]
    if n % 2 == 1:
        rows += [r[::-1] for r in rows]
    return np.array(rows)
