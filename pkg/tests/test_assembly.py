import numpy as np
import pytest

from rmap.assembly import PatchTransform, denormalize_patch, merge_predictions, normalize_patch, patch_scale
from rmap.occupancy import voxel_keys


def test_single_point():
    out, tf = normalize_patch([[2.0, 3.0, 4.0]], [1.0, 3.0, 4.0])
    np.testing.assert_array_equal(out, [[1.0, 0, 0]])
    assert tf.scale == 1.0


def test_round_trip(rng):
    pts = rng.normal(size=(100, 3)) * 5 + 30
    out, tf = normalize_patch(pts, pts[7])
    assert np.abs(np.linalg.norm(out, axis=1)).max() == pytest.approx(1.0)
    np.testing.assert_allclose(denormalize_patch(out, tf), pts, atol=1e-9)


def test_shared_scale(rng):
    lidar = rng.normal(size=(50, 3))
    _, tf = normalize_patch(lidar, lidar[0])
    radar, tf2 = normalize_patch(lidar[:5], lidar[0], scale=patch_scale(lidar, lidar[0]))
    assert tf2.scale == tf.scale


def test_zero_scale():
    with pytest.raises(ValueError, match="zero scale"):
        normalize_patch([[1.0, 1, 1]], [1.0, 1, 1])


def test_merge_one_and_idempotent(rng):
    tf = PatchTransform([1.0, 2.0, 0.5], 2.0)
    pts = rng.uniform(-1, 1, size=(200, 3))
    one = merge_predictions([(pts, tf)], 0.15)
    two = merge_predictions([(pts, tf), (pts, tf)], 0.15)
    assert one == two
    keys = np.unique(voxel_keys(tf.invert(pts), 0.15), axis=0)
    np.testing.assert_allclose(one.points, (keys + 0.5) * 0.15)


def test_merge_is_union_and_order_free(rng):
    items = [(rng.uniform(-1, 1, size=(100, 3)), PatchTransform(rng.uniform(-3, 3, size=3), 1.5)) for _ in range(8)]
    merged = merge_predictions(items, 0.15)
    want = set()
    for pts, tf in items:
        want |= {tuple(k) for k in voxel_keys(tf.invert(pts), 0.15)}
    got = {tuple(k) for k in voxel_keys(merged.points, 0.15)}
    assert got == want and len(merged) == len(want)
    assert merge_predictions(items[::-1], 0.15) == merged
    assert len(merge_predictions([], 0.15)) == 0
