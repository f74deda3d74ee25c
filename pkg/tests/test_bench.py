import struct

import numpy as np
import pytest

from hexplain.bench import (
    CELL_SYMBOLS,
    DIGIT_SYMBOLS,
    GlyphParams,
    gen_benchmark,
    gen_dataset,
    gen_instance,
    gen_whole_image_dataset,
    load_idx,
    read_instance,
    render_glyph,
    write_instance,
)
from hexplain.errors import BadMagic, CountMismatch, MalformedInput, TruncatedFile
from hexplain.tasks import ACTOR, EMPTY, FLAG, GHOST, TaskSpec, decision_class_count


class TestRenderGlyph:
    def test_deterministic(self):
        params = GlyphParams("digit0", jitter=0.05, noise=0.1, seed=123)
        a, b = render_glyph(params), render_glyph(params)
        assert np.array_equal(a.pixels, b.pixels)

    def test_templates_far_apart(self):
        # Frozen regression: the digit templates differ by a full-intensity
        # pixel at every size the suite uses.
        for size in (4, 6, 10):
            zero = render_glyph(GlyphParams("digit0", size, size)).pixels
            one = render_glyph(GlyphParams("digit1", size, size)).pixels
            assert np.abs(zero - one).max() >= 0.5

    def test_pixels_in_range(self):
        for symbol in DIGIT_SYMBOLS + CELL_SYMBOLS:
            image = render_glyph(
                GlyphParams(symbol, jitter=0.08, noise=0.29, seed=5)
            )
            assert image.pixels.min() >= 0.0
            assert image.pixels.max() <= 1.0

    def test_noise_cap_enforced(self):
        with pytest.raises(MalformedInput):
            GlyphParams("digit0", noise=0.3)

    def test_unknown_symbol(self):
        with pytest.raises(MalformedInput):
            GlyphParams("digit7")

    def test_multichannel(self):
        image = render_glyph(GlyphParams("ghost", 8, 8, channels=3))
        assert image.channels == 3
        assert image.num_features == 8 * 8 * 3


class TestGenInstance:
    def test_pacman_cardinalities(self):
        task = TaskSpec.pacman()
        for seed in range(50):
            labels = gen_instance(task, seed).true_labels
            assert labels.count(ACTOR) == 1
            assert labels.count(FLAG) == 1
            assert labels.count(GHOST) == 8
            assert labels.count(EMPTY) == 15

    def test_deterministic(self):
        task = TaskSpec.lex(6)
        a = gen_instance(task, seed=99)
        b = gen_instance(task, seed=99)
        assert a.true_labels == b.true_labels
        for left, right in zip(a.images, b.images):
            assert np.array_equal(left.pixels, right.pixels)

    def test_benchmark_unique_labels(self):
        task = TaskSpec.lex(6)
        instances = gen_benchmark(task, 40, seed=1)
        labels = [inst.true_labels for inst in instances]
        assert len(set(labels)) == len(labels)

    def test_benchmark_uniqueness_exhaustion(self):
        task = TaskSpec.lex(2)  # only 4 distinct strings
        with pytest.raises(MalformedInput):
            gen_benchmark(task, 5, seed=1)
        assert len(gen_benchmark(task, 5, seed=1, unique=False)) == 5

    def test_whole_image_dataset_shapes(self):
        task = TaskSpec.lex(4)
        dataset = gen_whole_image_dataset(task, 10, seed=2, glyph_size=4)
        image, label = dataset[0]
        assert (image.width, image.height) == (16, 4)
        assert 0 <= label < decision_class_count(task)

    def test_dataset_balanced_and_seeded(self):
        dataset = gen_dataset("digits", 40, seed=5, glyph_size=4)
        labels = [label for _, label in dataset]
        assert labels.count(0) == labels.count(1) == 20
        again = gen_dataset("digits", 40, seed=5, glyph_size=4)
        assert all(
            np.array_equal(a[0].pixels, b[0].pixels) for a, b in zip(dataset, again)
        )


class TestInstanceFiles:
    def test_round_trip(self, tmp_path):
        task = TaskSpec.pacman()
        instance = gen_instance(task, seed=7)
        path = tmp_path / "instance.json"
        write_instance(instance, path)
        loaded = read_instance(path)
        assert loaded.task == instance.task
        assert loaded.seed == instance.seed
        assert loaded.true_labels == instance.true_labels
        for a, b in zip(loaded.images, instance.images):
            assert np.array_equal(a.pixels, b.pixels)


def write_idx_fixture(tmp_path, images, labels, image_magic=0x803, label_magic=0x801):
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    image_path = tmp_path / "images.idx"
    label_path = tmp_path / "labels.idx"
    image_path.write_bytes(
        struct.pack(">IIII", image_magic, count, rows, cols) + images.tobytes()
    )
    label_path.write_bytes(
        struct.pack(">II", label_magic, len(labels)) + bytes(labels)
    )
    return image_path, label_path


class TestLoadIdx:
    def test_parses_fixture(self, tmp_path):
        images = [[[0, 128], [255, 64]], [[1, 2], [3, 4]]]
        image_path, label_path = write_idx_fixture(tmp_path, images, [0, 1])
        dataset = load_idx(image_path, label_path)
        assert len(dataset) == 2
        first, label = dataset[0]
        assert label == 0
        assert (first.width, first.height) == (2, 2)
        assert first.pixels[0] == 0.0
        assert first.pixels[2] == 1.0
        assert first.pixels[1] == pytest.approx(128 / 255)

    def test_bad_magic(self, tmp_path):
        image_path, label_path = write_idx_fixture(
            tmp_path, [[[0]]], [0], image_magic=0x804
        )
        with pytest.raises(BadMagic):
            load_idx(image_path, label_path)

    def test_truncated(self, tmp_path):
        image_path, label_path = write_idx_fixture(tmp_path, [[[0, 1], [2, 3]]], [0])
        image_path.write_bytes(image_path.read_bytes()[:-2])
        with pytest.raises(TruncatedFile):
            load_idx(image_path, label_path)

    def test_count_mismatch(self, tmp_path):
        image_path, label_path = write_idx_fixture(tmp_path, [[[0]]], [0, 1])
        with pytest.raises(CountMismatch):
            load_idx(image_path, label_path)

    def test_label_filter(self, tmp_path):
        images = [[[1]], [[2]], [[3]]]
        image_path, label_path = write_idx_fixture(tmp_path, images, [0, 1, 7])
        dataset = load_idx(image_path, label_path, keep_labels={0, 1})
        assert len(dataset) == 2
        assert [label for _, label in dataset] == [0, 1]
