import numpy as np
import pytest

from hexplain.bench import gen_instance
from hexplain.errors import DimensionMismatch, SchemaError
from hexplain.nn import Image
from hexplain.render import (
    mask_overlay,
    read_netpbm,
    tile_explanation,
    tile_images,
    tile_instance,
    write_netpbm,
)
from hexplain.tasks import TaskSpec


class TestMaskOverlay:
    def test_dims_background_keeps_explanation(self):
        image = Image(2, 1, 1, [0.8, 0.4])
        masked = mask_overlay(image, {0})
        assert masked.pixels[0] == pytest.approx(0.8)
        assert masked.pixels[1] == pytest.approx(0.1)

    def test_out_of_range_feature(self):
        with pytest.raises(DimensionMismatch):
            mask_overlay(Image(1, 1, 1, [0.5]), {3})


class TestTiling:
    def test_strip_for_strings(self):
        task = TaskSpec.lex(6)
        instance = gen_instance(task, seed=1, glyph_size=4)
        tiled = tile_instance(instance)
        assert (tiled.width, tiled.height) == (24, 4)

    def test_grid_for_pacman(self):
        task = TaskSpec.pacman()
        instance = gen_instance(task, seed=1)
        tiled = tile_instance(instance)
        assert (tiled.width, tiled.height) == (40, 40)

    def test_blocks_preserved(self):
        a = Image(2, 2, 1, [0.1, 0.2, 0.3, 0.4])
        b = Image(2, 2, 1, [0.5, 0.6, 0.7, 0.8])
        tiled = tile_images([a, b], columns=2)
        grid = tiled.pixels.reshape(2, 4)
        assert np.allclose(grid[0], [0.1, 0.2, 0.5, 0.6])
        assert np.allclose(grid[1], [0.3, 0.4, 0.7, 0.8])

    def test_explanation_tile_dims_unselected_inputs(self):
        task = TaskSpec.lex(4)
        instance = gen_instance(task, seed=2, glyph_size=4)
        tiled = tile_explanation(instance, {1: (0, 1)})
        block0 = tiled.pixels.reshape(4, 16)[:, 0:4]
        original0 = instance.images[0].pixels.reshape(4, 4)
        assert np.allclose(block0, original0 * 0.25)


class TestNetpbm:
    def test_pgm_round_trip(self, tmp_path):
        image = Image(3, 2, 1, [0.0, 0.5, 1.0, 0.25, 0.75, 0.1])
        path = tmp_path / "image.pgm"
        write_netpbm(image, path)
        data = path.read_bytes()
        assert data.startswith(b"P5\n3 2\n255\n")
        loaded = read_netpbm(path)
        assert (loaded.width, loaded.height, loaded.channels) == (3, 2, 1)
        assert np.abs(loaded.pixels - image.pixels).max() <= 1 / 255 + 1e-9

    def test_ppm_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        image = Image(4, 2, 3, rng.uniform(0, 1, 24))
        path = tmp_path / "image.ppm"
        write_netpbm(image, path)
        assert path.read_bytes().startswith(b"P6\n4 2\n255\n")
        loaded = read_netpbm(path)
        assert loaded.channels == 3
        assert np.abs(loaded.pixels - image.pixels).max() <= 1 / 255 + 1e-9

    def test_byte_identical_rewrites(self, tmp_path):
        image = Image(3, 3, 1, np.linspace(0, 1, 9))
        first, second = tmp_path / "a.pgm", tmp_path / "b.pgm"
        write_netpbm(image, first)
        write_netpbm(image, second)
        assert first.read_bytes() == second.read_bytes()

    def test_rejects_two_channel(self, tmp_path):
        with pytest.raises(DimensionMismatch):
            write_netpbm(Image(1, 1, 2, [0.5, 0.5]), tmp_path / "x.pgm")

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"JFIF....")
        with pytest.raises(SchemaError):
            read_netpbm(path)
