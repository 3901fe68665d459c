"""Region extraction, stratified draws, pairing arithmetic, latin squares."""

import itertools

import numpy as np
import pytest

from graspr.geometry import RigidTransform
from graspr.hand import HandPose
from graspr.primitives import make_uv_sphere
from graspr.simulate import GraspScene, ReachCloud, simulate_finger
from graspr.targets import (
    STRATA,
    Regions,
    SamplingError,
    TargetPoint,
    TrialPair,
    balanced_latin_square,
    extract_regions,
    pair_targets,
    sample_targets,
)
from tests.test_simulate import one_dof_finger, scene_for


def synthetic_cloud(finger="index", n=500, seed=0, dist_obj=None, dist_hand=None):
    rng = np.random.default_rng(seed)
    pos = rng.normal(size=(n, 3)) * 0.03
    from graspr.geometry import alpha_shape
    boundary = alpha_shape(pos, 0.1)
    return ReachCloud(finger, np.zeros((n, 1)), pos, pos.mean(axis=0), boundary.volume,
                      boundary, np.zeros(3), 0.1, dist_obj, dist_hand)


def make_regions_map(scene_ids, fingers=("thumb", "index", "middle", "ring", "little"),
                     empty=()):
    """Synthetic map with one sample per stratum unless listed in `empty`."""
    out = {}
    k = 0
    for sid in scene_ids:
        out[sid] = {}
        for f in fingers:
            n = 40
            rng = np.random.default_rng(k)
            k += 1
            pos = rng.normal(size=(n, 3)) * 0.02
            cloud = ReachCloud(f, np.zeros((n, 1)), pos, pos.mean(axis=0), 0.0,
                               None, np.zeros(3), 0.1)
            idx = np.arange(n)
            regions = Regions(idx[:10], idx[10:20], idx[20:30], idx[30:31])
            if (sid, f, "on_object") in empty:
                regions = Regions(np.empty(0, int), idx[10:20], idx[20:30], idx[30:31])
            out[sid][f] = (cloud, regions)
    return out


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

def test_regions_by_analytic_radii():
    # spherical shell cloud around a central object: near-object samples are
    # the inner shell, far in-air samples the outer shell
    rng = np.random.default_rng(1)
    n = 800
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.where(np.arange(n) % 2 == 0, 0.04, 0.08)
    pos = dirs * radii[:, None]
    obj_r = 0.035
    dist_obj = radii - obj_r            # sphere object of radius 35 mm
    dist_hand = np.full(n, 1.0)          # hand far away: on-hand must be empty
    from graspr.geometry import alpha_shape
    boundary = alpha_shape(pos, 0.1)
    cloud = ReachCloud("index", np.zeros((n, 1)), pos, pos.mean(axis=0),
                       boundary.volume, boundary, np.zeros(3), 0.1,
                       dist_obj, dist_hand)
    sk = one_dof_finger()
    scene = scene_for(sk)
    regions = extract_regions(cloud, scene)
    assert len(regions.on_object) > 0
    np.testing.assert_array_less(np.linalg.norm(pos[regions.on_object], axis=1), 0.045)
    assert len(regions.on_hand) == 0
    assert len(regions.in_air) > 0
    in_air_r = np.linalg.norm(pos[regions.in_air], axis=1)
    np.testing.assert_array_less(0.075, in_air_r)
    assert len(regions.in_air_mid) == 1


def test_regions_single_sample_cloud():
    pos = np.array([[0.01, 0.0, 0.0]])
    cloud = ReachCloud("index", np.zeros((1, 1)), pos, pos[0], 0.0, None,
                       np.zeros(3), 0.1, np.array([0.004]), np.array([0.1]))
    scene = scene_for(one_dof_finger())
    regions = extract_regions(cloud, scene)
    assert regions.in_air_mid.tolist() == [0]
    for s in STRATA:
        assert set(regions.by_name(s).tolist()) <= {0}
    # 4 mm from the object: within the cap, so the object stratum claims it
    assert regions.on_object.tolist() == [0]
    assert regions.on_hand.tolist() == []


def test_regions_empty_cloud():
    cloud = ReachCloud("index", np.zeros((0, 1)), np.zeros((0, 3)),
                       np.full(3, np.nan), 0.0, None, np.zeros(3), 0.1)
    regions = extract_regions(cloud, scene_for(one_dof_finger()))
    assert all(len(regions.by_name(s)) == 0 for s in STRATA)


def test_regions_on_object_beats_on_hand():
    n = 100
    pos = np.random.default_rng(2).normal(size=(n, 3)) * 0.02
    close = np.full(n, 0.05)
    close[:5] = 0.001   # same five samples near both surfaces
    cloud = ReachCloud("index", np.zeros((n, 1)), pos, pos.mean(axis=0), 0.0,
                       None, np.zeros(3), 0.1, close.copy(), close.copy())
    regions = extract_regions(cloud, scene_for(one_dof_finger()))
    assert set(regions.on_object.tolist()) == set(range(5))
    assert len(regions.on_hand) == 0


def test_regions_from_simulated_sphere_grasp():
    # real sweep around a sphere: strata are subsets of the cloud and the
    # near-object stratum is nonempty
    sk = one_dof_finger(L=0.05, limits=(0, 90), radius=0.002)
    ball = make_uv_sphere(0.02, center=(0.05, 0.03, 0.0), segments=24, rings=16)
    scene = scene_for(sk, obj=ball, collision_tolerance=1e-3)
    cloud = simulate_finger(scene, "index", step=np.deg2rad(2))
    regions = extract_regions(cloud, scene)
    assert len(regions.on_object) > 0
    assert (cloud.dist_object[regions.on_object] <= 5e-3 + 1e-12).all()
    for s in STRATA:
        assert np.all(regions.by_name(s) < len(cloud))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def test_full_layout_gives_80_targets():
    m = make_regions_map(["s1", "s2", "s3", "s4"])
    targets = sample_targets(m, seed=7)
    assert len(targets) == 80


def test_one_empty_stratum_gives_79_targets():
    m = make_regions_map(["s1", "s2", "s3", "s4"],
                         empty={("s2", "little", "on_object")})
    with pytest.warns(UserWarning, match="empty stratum"):
        targets = sample_targets(m, seed=7)
    assert len(targets) == 79
    ids = {t.id for t in targets}
    assert "s2:little:on_object" not in ids


def test_sampling_deterministic_and_member_of_region():
    m = make_regions_map(["s1"])
    t1 = sample_targets(m, seed=11)
    t2 = sample_targets(m, seed=11)
    assert [t.id for t in t1] == [t.id for t in t2]
    assert all(np.array_equal(a.position, b.position) for a, b in zip(t1, t2))
    for t in t1:
        cloud, regions = m[t.scene_id][t.finger]
        assert t.sample_index in regions.by_name(t.stratum)
        np.testing.assert_array_equal(t.position, cloud.positions[t.sample_index])
    t3 = sample_targets(m, seed=12)
    assert any(a.sample_index != b.sample_index for a, b in zip(t1, t3))


# ---------------------------------------------------------------------------
# Pairing
# ---------------------------------------------------------------------------

def _fake_targets(scene_id, n):
    return [TargetPoint(f"{scene_id}:t{i:02d}", scene_id, "index", "in_air",
                        i, np.zeros(3)) for i in range(n)]


def test_pairing_counts():
    assert len(pair_targets(_fake_targets("s", 20))) == 190
    assert len(pair_targets(_fake_targets("s", 19))) == 171
    targets = sum([_fake_targets(f"s{k}", 20) for k in range(3)],
                  _fake_targets("s3", 19))
    pairs = pair_targets(targets)
    assert len(pairs) == 741


def test_pairs_are_within_scene_unordered_distinct():
    targets = _fake_targets("a", 5) + _fake_targets("b", 4)
    pairs = pair_targets(targets)
    assert len(pairs) == 10 + 6
    seen = set()
    for p in pairs:
        assert p.target_a.split(":")[0] == p.target_b.split(":")[0] == p.scene_id
        key = frozenset((p.target_a, p.target_b))
        assert key not in seen
        seen.add(key)


def test_pairing_scene_with_one_target_yields_none():
    assert pair_targets(_fake_targets("s", 1)) == []


def test_trial_pair_rejects_self_pair():
    with pytest.raises(SamplingError):
        TrialPair("p", "s", "t1", "t1")


# ---------------------------------------------------------------------------
# Latin squares
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_latin_square_rows_and_columns(n):
    sq = balanced_latin_square(n)
    assert sq.shape == (n, n)
    for row in sq:
        assert sorted(row) == list(range(n))
    for col in sq.T:
        assert sorted(col) == list(range(n))


def test_latin_square_n2():
    np.testing.assert_array_equal(balanced_latin_square(2), [[0, 1], [1, 0]])


@pytest.mark.parametrize("n", [4, 6])
def test_latin_square_balanced_adjacency_bruteforce(n):
    sq = balanced_latin_square(n)
    counts = np.zeros((n, n), dtype=int)
    for row in sq:
        for a, b in zip(row[:-1], row[1:]):
            counts[a, b] += 1
    off_diag = counts[~np.eye(n, dtype=bool)]
    assert off_diag.min() == off_diag.max() == 1


def test_latin_square_odd_doubles_rows():
    sq = balanced_latin_square(5)
    assert sq.shape == (10, 5)
    counts = np.zeros((5, 5), dtype=int)
    for row in sq:
        for a, b in zip(row[:-1], row[1:]):
            counts[a, b] += 1
    off_diag = counts[~np.eye(5, dtype=bool)]
    assert off_diag.min() == off_diag.max() == 2


def test_latin_square_rejects_small_n():
    with pytest.raises(SamplingError):
        balanced_latin_square(1)
