import numpy as np
import pytest

from gradseek.errors import InvalidArgument
from gradseek.imageseg import (
    features_to_image,
    grid_centers,
    image_to_features,
    lattice_steps,
    oriented_grid,
    read_image,
    read_label_matrix,
    segment,
    segment_bandwidths,
    write_image,
    write_label_matrix,
)
from gradseek.metrics import ari


def two_tone(h=20, w=30, noise=8.0, seed=0):
    rng = np.random.default_rng(seed)
    img = np.zeros((h, w, 3))
    img[:, : w // 2] = (200, 40, 40)
    img[:, w // 2:] = (30, 60, 190)
    img += rng.normal(scale=noise, size=img.shape)
    truth = np.zeros((h, w), dtype=int)
    truth[:, w // 2:] = 1
    return np.clip(np.round(img), 0, 255).astype(np.uint8), truth


def test_features_layout():
    img = np.array([[[255, 0, 0], [0, 255, 0]], [[0, 0, 255], [255, 255, 255]]], dtype=np.uint8)
    f = image_to_features(img)
    assert f.values.shape == (4, 5)
    np.testing.assert_array_equal(f.values[1], [0, 1, 0, 0, 1])
    np.testing.assert_array_equal(f.values[2], [0, 0, 1, 1, 0])
    np.testing.assert_array_equal(f.values[3], [1, 1, 1, 1, 1])


def test_constant_image_has_constant_color_columns():
    img = np.full((6, 4, 3), 77, dtype=np.uint8)
    for normalize in (False, True):
        f = image_to_features(img, normalize=normalize)
        assert np.all(f.values[:, :3] == f.values[0, :3])
    assert np.all(image_to_features(img, normalize=True).values[:, :3] == 0.0)


@pytest.mark.parametrize("normalize", [False, True])
def test_features_round_trip(normalize):
    img, _ = two_tone(7, 9)
    f = image_to_features(img, normalize=normalize)
    back = features_to_image(f)
    np.testing.assert_array_equal(back, img)
    if normalize:
        np.testing.assert_allclose(f.values.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(f.raw()[:, 3:], image_to_features(img).values[:, 3:], atol=1e-12)


def test_ppm_round_trip_with_comments(tmp_path):
    img, _ = two_tone(5, 6)
    path = tmp_path / "a.ppm"
    write_image(path, img)
    np.testing.assert_array_equal(read_image(path), img)
    raw = path.read_bytes()
    body = raw[len(b"P6\n6 5\n255\n"):]
    commented = tmp_path / "b.ppm"
    commented.write_bytes(b"P6\n# made by hand\n6 # width\n5\n255\n" + body)
    np.testing.assert_array_equal(read_image(commented), img)


def test_ppm_maxval_scaling(tmp_path):
    path = tmp_path / "c.ppm"
    path.write_bytes(b"P6 1 1 15\n" + bytes([15, 0, 5]))
    np.testing.assert_array_equal(read_image(path), [[[255, 0, 85]]])


def test_png_round_trip(tmp_path):
    img, _ = two_tone(5, 6)
    write_image(tmp_path / "a.png", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.png"), img)


def test_bad_image_files(tmp_path):
    with pytest.raises(InvalidArgument):
        read_image(tmp_path / "missing.ppm")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(InvalidArgument):
        read_image(tmp_path / "junk.png")
    (tmp_path / "short.ppm").write_bytes(b"P6\n4 4\n255\n" + bytes(10))
    with pytest.raises(InvalidArgument):
        read_image(tmp_path / "short.ppm")


def test_label_matrix_round_trip(tmp_path):
    labels = np.array([[0, 1, 1], [2, 0, 1]])
    write_label_matrix(tmp_path / "l.txt", labels)
    np.testing.assert_array_equal(read_label_matrix(tmp_path / "l.txt"), labels)
    (tmp_path / "one.txt").write_text("3 4 5\n")
    assert read_label_matrix(tmp_path / "one.txt").shape == (1, 3)


def test_full_grid_uses_every_pixel():
    img, _ = two_tone(4, 5)
    f = image_to_features(img)
    np.testing.assert_array_equal(grid_centers(f, 4, 5), f.values)


def test_grid_center_count_and_block_means():
    img, _ = two_tone(33, 50)
    f = image_to_features(img)
    centers = grid_centers(f, 11, 16)
    assert centers.shape == (176, 5)
    # first block covers rows 0..2 and cols 0..3
    block = f.values.reshape(33, 50, 5)[:3, :4].reshape(-1, 5)
    np.testing.assert_allclose(centers[0], block.mean(axis=0), atol=1e-14)


def test_constant_image_centers_share_color():
    f = image_to_features(np.full((20, 30, 3), 9, dtype=np.uint8))
    c = grid_centers(f, 11, 16)
    assert np.all(c[:, :3] == c[0, :3])


def test_oriented_grid():
    assert oriented_grid((81, 121)) == (11, 16)
    assert oriented_grid((121, 81)) == (16, 11)
    assert oriented_grid((4, 5)) == (4, 5)
    with pytest.raises(InvalidArgument):
        grid_centers(image_to_features(np.zeros((2, 2, 3), dtype=np.uint8)), 3, 1)


def test_lattice_filtering():
    f = image_to_features(np.zeros((10, 10, 3), dtype=np.uint8))
    color, space = lattice_steps(f)
    assert color == pytest.approx(1 / 255) and space == 1.0
    pairs = segment_bandwidths(f, [0.001, 0.01, 1.0, 10.0])
    assert pairs == [(c, s) for c in (0.01, 1.0, 10.0) for s in (1.0, 10.0)]
    assert segment_bandwidths(f, [(0.001, 0.1)]) == [(0.001, 0.1)]
    with pytest.raises(InvalidArgument):
        segment_bandwidths(f, [0.001])


@pytest.fixture(scope="module")
def two_tone_run():
    img, truth = two_tone()
    return img, truth, segment(img, seed=0)


def test_two_tone_finds_two_segments(two_tone_run):
    img, truth, res = two_tone_run
    sizes = np.sort(np.bincount(res.labels.ravel()))[::-1]
    assert sizes[:2].sum() >= 0.95 * truth.size
    assert ari(truth.ravel(), res.labels.ravel()) >= 0.9


def test_smoothed_image_consistent_with_labels(two_tone_run):
    img, _, res = two_tone_run
    assert res.smoothed.shape == img.shape and res.smoothed.dtype == np.uint8
    flat = res.smoothed.reshape(-1, 3)
    labels = res.labels.ravel()
    for k in range(res.n_segments):
        assert np.all(flat[labels == k] == flat[labels == k][0])
    summary = res.summary()
    assert summary["n_segments"] == res.n_segments
    assert sum(summary["segment_sizes"]) == img.shape[0] * img.shape[1]
    assert summary["n_centers"] == 176


def test_constant_image_is_one_segment():
    img = np.full((8, 12, 3), 120, dtype=np.uint8)
    res = segment(img, bandwidth_grid=[(1.0, 10.0)], lambda_grid=[1.0], folds=2)
    assert res.n_segments == 1
    np.testing.assert_array_equal(res.smoothed, img)


def test_transpose_transposes_partition():
    img, _ = two_tone(12, 16)
    grid, lam = [(1.0, 1.0)], [0.1]
    a = segment(img, grid, lam, folds=2, seed=3)
    b = segment(img.transpose(1, 0, 2), grid, lam, folds=2, seed=3)
    assert a.features.shape == b.features.shape[::-1]
    assert ari(a.labels.ravel(), b.labels.T.ravel()) == 1.0


def test_segment_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        segment(np.zeros((4, 4)).astype(float))
