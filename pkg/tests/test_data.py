import numpy as np
import pytest

from fracturekit import data as d
from fracturekit.errors import InvalidArgumentError
from fracturekit.imaging import PixelGrid8, encode_pgm


def make_dataset(n0, n1):
    samples = [d.Sample(label=0, image=PixelGrid8(np.zeros((4, 4), np.uint8)))
               for _ in range(n0)]
    samples += [d.Sample(label=1, image=PixelGrid8(np.zeros((4, 4), np.uint8)))
                for _ in range(n1)]
    return d.LabeledDataset(tuple(samples))


class TestSplitCounts:
    def test_reference_class_sizes(self):
        r = d.SplitRatios()
        assert d.split_counts(4840, r) == (3388, 726, 726)
        assert d.split_counts(4623, r) == (3236, 693, 694)

    def test_ten_per_class(self):
        assert d.split_counts(10, d.SplitRatios()) == (7, 1, 2)

    def test_all_train(self):
        assert d.split_counts(50, d.SplitRatios(1.0, 0.0, 0.0)) == (50, 0, 0)

    def test_bad_ratios(self):
        with pytest.raises(InvalidArgumentError):
            d.SplitRatios(0.5, 0.5, 0.5)


class TestStratifiedSplit:
    def test_partition_properties(self):
        ds = make_dataset(37, 23)
        train, val, test = d.stratified_split(ds, seed=1)
        all_ids = [id(s) for part in (train, val, test) for s in part.samples]
        assert len(all_ids) == len(ds)
        assert len(set(all_ids)) == len(ds)
        assert train.class_counts() == (
            int(37 * 0.7), int(23 * 0.7))

    def test_same_seed_same_membership(self):
        ds = make_dataset(20, 20)
        a = d.stratified_split(ds, seed=7)
        b = d.stratified_split(ds, seed=7)
        for pa, pb in zip(a, b):
            assert [id(s) for s in pa.samples] == [id(s) for s in pb.samples]

    def test_different_seed_differs(self):
        ds = make_dataset(50, 50)
        a = d.stratified_split(ds, seed=1)
        b = d.stratified_split(ds, seed=2)
        assert [id(s) for s in a[0].samples] != [id(s) for s in b[0].samples]

    def test_all_train_ratio(self):
        ds = make_dataset(5, 5)
        train, val, test = d.stratified_split(ds, d.SplitRatios(1.0, 0.0, 0.0))
        assert len(train) == 10 and len(val) == 0 and len(test) == 0

    def test_empty_class_rejected(self):
        ds = make_dataset(5, 0)
        with pytest.raises(InvalidArgumentError):
            d.stratified_split(ds)


class TestLoadDirectory:
    def test_two_folders(self, tmp_path):
        img = encode_pgm(PixelGrid8(np.zeros((4, 4), np.uint8)))
        for cls, n in (("fractured", 3), ("not fractured", 2)):
            folder = tmp_path / cls
            folder.mkdir()
            for i in range(n):
                (folder / f"{i}.pgm").write_bytes(img)
        ds = d.load_directory(str(tmp_path))
        assert ds.class_counts() == (3, 2)
        assert ds.class_names == ("fractured", "not fractured")

    def test_empty_dir_warns(self, tmp_path, caplog):
        ds = d.load_directory(str(tmp_path))
        assert len(ds) == 0

    def test_junk_file_skipped(self, tmp_path):
        (tmp_path / "fractured").mkdir()
        (tmp_path / "not fractured").mkdir()
        (tmp_path / "fractured" / "notes.txt").write_text("junk")
        img = encode_pgm(PixelGrid8(np.zeros((4, 4), np.uint8)))
        (tmp_path / "fractured" / "a.pgm").write_bytes(img)
        ds = d.load_directory(str(tmp_path))
        assert ds.class_counts() == (1, 0)


class TestSynthetic:
    def test_deterministic(self):
        cfg = d.SyntheticConfig(seed=42)
        a = d.generate_synthetic(cfg, 5)
        b = d.generate_synthetic(cfg, 5)
        for sa, sb in zip(a.samples, b.samples):
            assert np.array_equal(sa.image.pixels, sb.image.pixels)
            assert sa.crack_box == sb.crack_box

    def test_balanced_labels(self):
        ds = d.generate_synthetic(d.SyntheticConfig(seed=0), 8)
        assert ds.class_counts() == (8, 8)

    def test_crack_darker_than_band(self):
        ds = d.generate_synthetic(d.SyntheticConfig(seed=3), 10)
        for s in ds.samples[:10]:
            x0, y0, x1, y1 = s.crack_box
            crack = s.image.pixels[y0:y1 + 1, x0:x1 + 1].astype(float)
            band_above = s.image.pixels[max(0, y0 - 8):y0, x0:x1 + 1].astype(float)
            assert crack.mean() < band_above.mean()

    def test_crack_box_only_on_fractured(self):
        ds = d.generate_synthetic(d.SyntheticConfig(seed=1), 4)
        for s in ds.samples:
            assert (s.crack_box is not None) == (s.label == 0)

    def test_crack_wider_than_band_rejected(self):
        with pytest.raises(InvalidArgumentError):
            d.SyntheticConfig(band_width_range=(4, 8), crack_thickness=6)


class TestBatches:
    def test_sizes(self):
        sizes = [len(b) for b in d.batches(100, 32)]
        assert sizes == [32, 32, 32, 4]

    def test_same_seed_identical(self):
        a = [b.tolist() for b in d.batches(50, 8, shuffle_seed=3, epoch=2)]
        b = [x.tolist() for x in d.batches(50, 8, shuffle_seed=3, epoch=2)]
        assert a == b

    def test_epoch_changes_order(self):
        a = np.concatenate(list(d.batches(50, 8, shuffle_seed=3, epoch=0)))
        b = np.concatenate(list(d.batches(50, 8, shuffle_seed=3, epoch=1)))
        assert not np.array_equal(a, b)

    def test_union_is_everything(self):
        idx = np.concatenate(list(d.batches(37, 5, shuffle_seed=0)))
        assert sorted(idx.tolist()) == list(range(37))


def test_split_manifest(tmp_path):
    ds = make_dataset(6, 4)
    splits = d.stratified_split(ds, seed=0)
    path = tmp_path / "manifest.csv"
    d.write_split_manifest(str(path), splits)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "path,label,split"
    assert len(lines) == 11
