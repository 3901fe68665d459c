"""Flat-file persistence: scenes, clouds, targets, pairs, choices, models.

Everything is CSV (UTF-8, comma, '.' decimal, header row, leading
``# schema_version`` comment) or JSON with a ``schema_version`` field, plus
Wavefront OBJ for meshes and point clouds. Writers are deterministic: fixed
field order, repr-exact floats, sorted rows where order has no meaning, so
repeated exports are byte-identical.

Loads validate schemas and referential integrity with file/line context in
the error message: choices reference pairs, pairs reference targets,
targets reference scenes.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .emg import MLPModel
from .features import FEATURE_NAMES
from .geometry import RigidTransform, TriMesh
from .hand import FINGERS, HandPose, HandSkeleton
from .model import LogisticModel
from .simulate import GraspScene, ReachCloud
from .targets import STRATA, TargetPoint, TrialPair

SCHEMA_VERSION = 1


class DataFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Choice records
# ---------------------------------------------------------------------------

_RFC3339 = re.compile(
    r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:\d{2})$")


@dataclass(frozen=True)
class ChoiceRecord:
    """One forced-choice outcome; no neutral option exists."""

    pair_id: str
    scene_id: str
    target_a: str
    target_b: str
    chosen: str          # "A" or "B"
    participant: str
    timestamp: str       # RFC 3339, UTC

    def __post_init__(self):
        if self.chosen not in ("A", "B"):
            raise DataFormatError(f"chosen must be 'A' or 'B', got {self.chosen!r}")
        if not _RFC3339.match(self.timestamp):
            raise DataFormatError(f"timestamp {self.timestamp!r} is not RFC 3339")


# ---------------------------------------------------------------------------
# OBJ
# ---------------------------------------------------------------------------

def save_obj(path, mesh: TriMesh):
    with open(path, "w", newline="\n") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9f} {v[1]:.9f} {v[2]:.9f}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def load_obj(path) -> TriMesh:
    verts, faces = [], []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise DataFormatError(f"{path} line {ln}: short vertex line")
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
            # normals/UVs/groups ignored
    if not verts:
        raise DataFormatError(f"{path}: no vertices")
    return TriMesh.clean(np.array(verts), np.array(faces) if faces
                         else np.zeros((0, 3), int))


def score_to_color(score) -> np.ndarray:
    """Red channel rises with the score, blue falls; green stays 0."""
    s = np.clip(np.asarray(score, float), 0.0, 1.0)
    return np.stack([s, np.zeros_like(s), 1.0 - s], axis=-1)


def save_point_cloud_obj(path, points: np.ndarray, scores=None):
    """Point cloud as OBJ vertex lines, optionally with r g b from scores."""
    points = np.asarray(points, float).reshape(-1, 3)
    if len(points) == 0:
        raise DataFormatError("refusing to write an empty point cloud")
    colors = score_to_color(scores) if scores is not None else None
    with open(path, "w", newline="\n") as fh:
        for i, p in enumerate(points):
            if colors is None:
                fh.write(f"v {p[0]:.9f} {p[1]:.9f} {p[2]:.9f}\n")
            else:
                c = colors[i]
                fh.write(f"v {p[0]:.9f} {p[1]:.9f} {p[2]:.9f} "
                         f"{c[0]:.6f} {c[1]:.6f} {c[2]:.6f}\n")


def load_point_cloud_obj(path) -> tuple[np.ndarray, np.ndarray | None]:
    points, colors = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if parts and parts[0] == "v":
                points.append([float(x) for x in parts[1:4]])
                if len(parts) >= 7:
                    colors.append([float(x) for x in parts[4:7]])
    pts = np.array(points)
    return pts, (np.array(colors) if colors else None)


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------

def _write_csv(path, header: list, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _read_csv(path, expected_header: list) -> list[dict]:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# schema_version"):
            raise DataFormatError(f"{path}: missing schema_version comment")
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if header != expected_header:
            raise DataFormatError(
                f"{path}: header {header} does not match schema {expected_header}")
        out = []
        for ln, row in enumerate(reader, start=3):
            if len(row) != len(header):
                raise DataFormatError(f"{path} line {ln}: expected "
                                      f"{len(header)} fields, got {len(row)}")
            out.append(dict(zip(header, row)))
        return out


def _f(row: dict, key: str, path, ln="?") -> float:
    try:
        return float(row[key])
    except ValueError:
        raise DataFormatError(
            f"{path}: field {key}={row[key]!r} is not a number") from None


# ---------------------------------------------------------------------------
# Clouds
# ---------------------------------------------------------------------------

def save_cloud_csv(path, cloud: ReachCloud):
    d = cloud.angles.shape[1]
    header = ["finger"] + [f"angle_{k}" for k in range(d)] + ["x", "y", "z"]
    rows = ([cloud.finger] + [repr(float(a)) for a in ang]
            + [repr(float(p)) for p in pos]
            for ang, pos in zip(cloud.angles, cloud.positions))
    _write_csv(path, header, rows)


def load_cloud_positions(path) -> tuple[str, np.ndarray, np.ndarray]:
    """(finger, angles, positions) from a cloud CSV."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# schema_version"):
            raise DataFormatError(f"{path}: missing schema_version comment")
        reader = csv.reader(fh)
        header = next(reader)
        n_angles = sum(1 for h in header if h.startswith("angle_"))
        finger = None
        angles, positions = [], []
        for row in reader:
            finger = row[0]
            angles.append([float(x) for x in row[1:1 + n_angles]])
            positions.append([float(x) for x in row[1 + n_angles:4 + n_angles]])
    return finger, np.array(angles).reshape(-1, n_angles), np.array(positions).reshape(-1, 3)


def export_cloud(path, cloud: ReachCloud, fmt: str = "csv", scores=None):
    """Spec export surface: CSV sample table or OBJ point cloud."""
    if len(cloud) == 0:
        raise DataFormatError("cloud is empty")
    if fmt == "csv":
        save_cloud_csv(path, cloud)
    elif fmt == "obj":
        save_point_cloud_obj(path, cloud.positions, scores)
    else:
        raise DataFormatError(f"unknown export format {fmt!r}")


# ---------------------------------------------------------------------------
# Targets / pairs / choices
# ---------------------------------------------------------------------------

_TARGET_HEADER = ["id", "scene", "finger", "stratum", "sample_index", "x", "y", "z"]


def save_targets(path, targets: list[TargetPoint]):
    rows = ([t.id, t.scene_id, t.finger, t.stratum, t.sample_index,
             repr(float(t.position[0])), repr(float(t.position[1])),
             repr(float(t.position[2]))]
            for t in sorted(targets, key=lambda t: t.id))
    _write_csv(path, _TARGET_HEADER, rows)


def load_targets(path, scene_ids=None) -> list[TargetPoint]:
    out = []
    for row in _read_csv(path, _TARGET_HEADER):
        if scene_ids is not None and row["scene"] not in scene_ids:
            raise DataFormatError(f"{path}: target {row['id']} references "
                                  f"unknown scene {row['scene']!r}")
        if row["finger"] not in FINGERS or row["stratum"] not in STRATA:
            raise DataFormatError(f"{path}: target {row['id']} has invalid "
                                  f"finger/stratum")
        out.append(TargetPoint(row["id"], row["scene"], row["finger"],
                               row["stratum"], int(row["sample_index"]),
                               [_f(row, k, path) for k in ("x", "y", "z")]))
    return out


_PAIR_HEADER = ["pair_id", "scene", "target_a", "target_b"]


def save_pairs(path, pairs: list[TrialPair]):
    rows = ([p.id, p.scene_id, p.target_a, p.target_b]
            for p in sorted(pairs, key=lambda p: p.id))
    _write_csv(path, _PAIR_HEADER, rows)


def load_pairs(path, target_ids=None) -> list[TrialPair]:
    out = []
    for row in _read_csv(path, _PAIR_HEADER):
        for key in ("target_a", "target_b"):
            if target_ids is not None and row[key] not in target_ids:
                raise DataFormatError(f"{path}: pair {row['pair_id']} references "
                                      f"unknown target {row[key]!r}")
        out.append(TrialPair(row["pair_id"], row["scene"],
                             row["target_a"], row["target_b"]))
    return out


_CHOICE_HEADER = ["pair_id", "scene", "target_a", "target_b", "chosen",
                  "participant", "timestamp"]


def _choice_row(c: ChoiceRecord) -> list:
    return [c.pair_id, c.scene_id, c.target_a, c.target_b, c.chosen,
            c.participant, c.timestamp]


def save_choices(path, choices: list[ChoiceRecord]):
    _write_csv(path, _CHOICE_HEADER, (_choice_row(c) for c in choices))


def append_choice(path, choice: ChoiceRecord):
    """Single-writer append; creates the file with a header when missing."""
    path = Path(path)
    if not path.exists():
        save_choices(path, [choice])
        return
    with open(path, "a", newline="\n") as fh:
        csv.writer(fh, lineterminator="\n").writerow(_choice_row(choice))


def load_choices(path, pair_ids=None) -> list[ChoiceRecord]:
    out = []
    for row in _read_csv(path, _CHOICE_HEADER):
        if pair_ids is not None and row["pair_id"] not in pair_ids:
            raise DataFormatError(f"{path}: choice references unknown pair "
                                  f"{row['pair_id']!r}")
        out.append(ChoiceRecord(row["pair_id"], row["scene"], row["target_a"],
                                row["target_b"], row["chosen"],
                                row["participant"], row["timestamp"]))
    return out


# ---------------------------------------------------------------------------
# Feature tables
# ---------------------------------------------------------------------------

_FEATURES_HEADER = ["task_id", "scene", "finger"] + list(FEATURE_NAMES)


def save_task_features(path, rows: dict[str, tuple[str, str, np.ndarray]]):
    """rows: task id -> (scene id, finger, 16-feature array)."""
    body = ([tid, scene, finger] + [repr(float(v)) for v in vec]
            for tid, (scene, finger, vec) in sorted(rows.items()))
    _write_csv(path, _FEATURES_HEADER, body)


def load_task_features(path) -> dict[str, tuple[str, str, np.ndarray]]:
    out = {}
    for row in _read_csv(path, _FEATURES_HEADER):
        vec = np.array([_f(row, n, path) for n in FEATURE_NAMES])
        out[row["task_id"]] = (row["scene"], row["finger"], vec)
    return out


_DELTA_HEADER = ["pair_id"] + [f"delta_{n}" for n in FEATURE_NAMES] + ["choice"]


def save_delta_features(path, rows):
    """rows: iterable of (pair id, 16-delta array, choice label or '')."""
    body = ([pid] + [repr(float(v)) for v in vec] + [choice]
            for pid, vec, choice in rows)
    _write_csv(path, _DELTA_HEADER, body)


def load_delta_features(path) -> list[tuple[str, np.ndarray, str]]:
    out = []
    for row in _read_csv(path, _DELTA_HEADER):
        vec = np.array([_f(row, f"delta_{n}", path) for n in FEATURE_NAMES])
        out.append((row["pair_id"], vec, row["choice"]))
    return out


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------

def save_scene(path, scene: GraspScene, obj_relpath: str | None,
               step_deg: float | None = None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "condition_id": scene.condition_id,
        "skeleton": scene.skeleton.to_json(),
        "grasp": {
            "wrist_rotation": scene.grasp_pose.wrist.rotation.tolist(),
            "wrist_translation": scene.grasp_pose.wrist.translation.tolist(),
            "angles_deg": np.rad2deg(scene.grasp_pose.angles).tolist(),
        },
        "object": None if scene.obj is None else {
            "obj_path": obj_relpath,
            "rotation": scene.object_transform.rotation.tolist(),
            "translation": scene.object_transform.translation.tolist(),
        },
        "collision_tolerance": scene.collision_tolerance,
        "contact_tolerance": scene.contact_tolerance,
        "alpha": scene.alpha,
        "step_deg": step_deg,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scene(path, validate: bool = True) -> tuple[GraspScene, float | None]:
    """Load a scene JSON; the object OBJ path resolves next to the file.

    Returns (scene, recommended sweep step in degrees or None).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc})") from exc
    for fieldname in ("condition_id", "skeleton", "grasp"):
        if fieldname not in doc:
            raise DataFormatError(f"{path}: missing field {fieldname!r}")
    skeleton = HandSkeleton.from_json(doc["skeleton"])
    g = doc["grasp"]
    pose = HandPose(skeleton,
                    RigidTransform(np.array(g["wrist_rotation"], float),
                                   np.array(g["wrist_translation"], float)),
                    np.deg2rad(np.array(g["angles_deg"], float)))
    obj = None
    xf = RigidTransform.identity()
    if doc.get("object"):
        obj_path = path.parent / doc["object"]["obj_path"]
        if not obj_path.exists():
            raise DataFormatError(f"{path}: object mesh {obj_path} not found")
        obj = load_obj(obj_path)
        xf = RigidTransform(np.array(doc["object"]["rotation"], float),
                            np.array(doc["object"]["translation"], float))
    scene = GraspScene(doc["condition_id"], skeleton, pose, obj=obj,
                       object_transform=xf,
                       collision_tolerance=doc.get("collision_tolerance", 1e-3),
                       contact_tolerance=doc.get("contact_tolerance", 2e-3),
                       alpha=doc.get("alpha", 0.1), validate=validate)
    return scene, doc.get("step_deg")


# ---------------------------------------------------------------------------
# Study bundles
# ---------------------------------------------------------------------------

@dataclass
class StudyBundle:
    """Everything one study run produces, cross-referenced and validated."""

    scenes: dict[str, GraspScene]
    steps: dict[str, float | None]
    clouds: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]]  # angles, positions
    targets: dict[str, TargetPoint]
    pairs: dict[str, TrialPair]
    features: dict[str, tuple[str, str, np.ndarray]]
    model: LogisticModel | None
    root: Path


def load_bundle(root, validate_scenes: bool = False) -> StudyBundle:
    root = Path(root)
    scenes = {}
    steps = {}
    scene_dir = root / "scenes"
    if scene_dir.is_dir():
        for p in sorted(scene_dir.glob("*.json")):
            scene, step = load_scene(p, validate=validate_scenes)
            if scene.condition_id in scenes:
                raise DataFormatError(f"duplicate condition id {scene.condition_id!r}")
            scenes[scene.condition_id] = scene
            steps[scene.condition_id] = step
    clouds = {}
    cloud_dir = root / "clouds"
    if cloud_dir.is_dir():
        for p in sorted(cloud_dir.glob("*.csv")):
            scene_id, finger = p.stem.rsplit("__", 1)
            _, angles, positions = load_cloud_positions(p)
            clouds[(scene_id, finger)] = (angles, positions)
    targets = {}
    if (root / "targets.csv").exists():
        for t in load_targets(root / "targets.csv",
                              scene_ids=set(scenes) if scenes else None):
            targets[t.id] = t
    pairs = {}
    if (root / "pairs.csv").exists():
        for p in load_pairs(root / "pairs.csv",
                            target_ids=set(targets) if targets else None):
            pairs[p.id] = p
    features = {}
    if (root / "features.csv").exists():
        features = load_task_features(root / "features.csv")
        for tid in features:
            if targets and tid not in targets:
                raise DataFormatError(f"features.csv: unknown task id {tid!r}")
    model = None
    if (root / "model.json").exists():
        model = LogisticModel.load(root / "model.json")
    return StudyBundle(scenes, steps, clouds, targets, pairs, features, model, root)


def utc_timestamp(moment: datetime | None = None) -> str:
    from datetime import timezone
    moment = moment or datetime.now(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")
