# Copyright 2026 The tubeseq Authors
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

tubeseq = pytest.importorskip("tubeseq")


def r5_fixture():
    g = tubeseq.VoxelGrid(5)
    for z in (1, 3, 4, 5):
        g.set(4, 4, z - 1)
    return g


def test_grid_numpy_round_trip():
    rng = np.random.default_rng(0)
    a = (rng.random((6, 6, 6)) < 0.4).astype(np.uint8)
    g = tubeseq.VoxelGrid.from_numpy(a)
    assert g.occupied_count() == int(a.sum())
    assert np.array_equal(g.to_numpy(), a)
    assert g.get(1, 2, 3) == bool(a[1, 2, 3])


def test_iou():
    a = tubeseq.VoxelGrid(2)
    b = tubeseq.VoxelGrid(2)
    a.set(0, 0, 0)
    b.set(0, 0, 0)
    b.set(1, 1, 1)
    assert tubeseq.volumetric_iou(a, b) == pytest.approx(0.5)


def test_fixture_tube():
    t = tubeseq.tubelize(r5_fixture(), "Z")
    tube = t.at(4, 4)
    assert tube.segments == [(1, 1), (3, 5)]
    assert tubeseq.tokens(tube) == ["TRUE", "1", "1", "3", "5", "EOS"]
    assert tubeseq.token_classes(tube, 5) == [5, 0, 0, 2, 4, 8]
    assert t.segment_counts()[4, 4] == 2


@pytest.mark.parametrize("axis", ["X", "Y", "Z"])
def test_codec_round_trip(axis):
    shapes = tubeseq.generate_shapes("mixed", 12, 4, 3)
    for g in shapes.grids:
        t = tubeseq.tubelize(g, axis)
        assert tubeseq.detubelize(t) == g
        assert tubeseq.detubelize(tubeseq.read_vtz(tubeseq.write_vtz(t))) == g
        assert tubeseq.read_voxd(tubeseq.write_voxd(g)) == g


def test_format_errors():
    data = bytearray(tubeseq.write_voxd(r5_fixture()))
    data[0:4] = b"XXXX"
    with pytest.raises(tubeseq.FormatError, match="bad-magic"):
        tubeseq.read_voxd(bytes(data))
    with pytest.raises(ValueError):
        tubeseq.tubelize(r5_fixture(), "W")


def test_shape_dir(tmp_path):
    shapes = tubeseq.generate_shapes("sphere", 8, 3, 1)
    assert shapes.ids == ["shape_0", "shape_1", "shape_2"]
    tubeseq.write_shape_dir(shapes, str(tmp_path))
    loaded = tubeseq.load_shape_dir(str(tmp_path))
    assert loaded.ids == shapes.ids
    assert all(a == b for a, b in zip(loaded.grids, shapes.grids))


def test_gradcheck():
    for name, err in tubeseq.gradcheck(1):
        assert err < tubeseq.GRADCHECK_TOLERANCE, name


def test_tiny_training_is_deterministic():
    cfg = tubeseq.RunConfig.parse(
        "resolution = 6\nembed_dim = 8\nhidden_dim = 8\nbatch_size = 8\n"
        "max_steps = 20\neval_interval = 10\nseed = 2\n"
    )
    shapes = tubeseq.generate_shapes("sphere", 6, 2, 4)
    a = tubeseq.train(cfg, shapes)
    b = tubeseq.train(cfg, shapes)
    assert len(a.losses) == 20
    assert a.metrics == b.metrics
    assert a.state.to_bytes() == b.state.to_bytes()
    assert a.state.latent_ids == shapes.ids
    grid = a.state.reconstruct("shape_0")
    assert grid.resolution == 6
    assert 0.0 <= a.state.evaluate(shapes) <= 100.0
    restored = tubeseq.TrainingState.from_bytes(a.state.to_bytes())
    assert restored.checksum == a.state.checksum


def test_bad_config():
    with pytest.raises(ValueError, match="unknown key"):
        tubeseq.RunConfig.parse("bogus = 1\n")
