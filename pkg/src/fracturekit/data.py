"""Dataset loading, the 70-15-15 stratified split, batching, and a synthetic
fracture-image generator for desk-scale end-to-end verification.

Synthetic images are 8-bit grayscale: a bright, smooth vertical bone band on
a noisy background; "fractured" samples additionally carry a dark jagged
transverse crack across the band, whose bounding box is recorded per sample
for Grad-CAM locality checks.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError
from .imaging import PixelGrid8, decode_image, to_grayscale

log = logging.getLogger(__name__)

CLASS_NAMES = ("fractured", "not fractured")
IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".pgm", ".ppm", ".bmp"}


@dataclass(frozen=True)
class Sample:
    label: int                       # 0 = fractured, 1 = not fractured
    image: PixelGrid8 | None = None  # in-memory (synthetic) sample
    path: str | None = None          # on-disk sample
    crack_box: tuple[int, int, int, int] | None = None  # (x0, y0, x1, y1) inclusive

    def load(self) -> PixelGrid8:
        if self.image is not None:
            return self.image
        with open(self.path, "rb") as f:
            return to_grayscale(decode_image(f.read()))


@dataclass(frozen=True)
class LabeledDataset:
    samples: tuple[Sample, ...]
    class_names: tuple[str, str] = CLASS_NAMES

    def __len__(self):
        return len(self.samples)

    def class_counts(self) -> tuple[int, int]:
        labels = [s.label for s in self.samples]
        return labels.count(0), labels.count(1)

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(tuple(self.samples[i] for i in indices), self.class_names)


@dataclass(frozen=True)
class SplitRatios:
    train: float = 0.70
    val: float = 0.15
    test: float = 0.15

    def __post_init__(self):
        if self.train < 0 or self.val < 0 or self.test < 0:
            raise InvalidArgumentError("split ratios must be non-negative")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise InvalidArgumentError("split ratios must sum to 1")


def split_counts(n: int, ratios: SplitRatios) -> tuple[int, int, int]:
    """Floor-floor-remainder policy: floor(n*train), floor(n*val), rest."""
    tr = int(n * ratios.train)
    va = int(n * ratios.val)
    return tr, va, n - tr - va


def stratified_split(dataset: LabeledDataset, ratios: SplitRatios = SplitRatios(),
                     seed: int = 0):
    """Per-class seeded shuffle, then floor-floor-remainder partition.

    Returns (train, val, test) LabeledDatasets; membership is a function of
    (dataset order, ratios, seed) only.
    """
    rng = np.random.default_rng(seed)
    parts: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    for cls in (0, 1):
        idx = [i for i, s in enumerate(dataset.samples) if s.label == cls]
        if not idx:
            raise InvalidArgumentError(f"class {cls} ({dataset.class_names[cls]}) is empty")
        order = rng.permutation(len(idx))
        shuffled = [idx[i] for i in order]
        tr, va, _ = split_counts(len(idx), ratios)
        parts["train"] += shuffled[:tr]
        parts["val"] += shuffled[tr:tr + va]
        parts["test"] += shuffled[tr + va:]
    return tuple(dataset.subset(sorted(parts[k])) for k in ("train", "val", "test"))


def load_directory(root: str) -> LabeledDataset:
    """Two-subfolder layout: lexicographically sorted subdirectories define
    class indices. Unreadable entries are skipped with a warning."""
    subdirs = sorted(d for d in os.listdir(root)
                     if os.path.isdir(os.path.join(root, d)))
    if not subdirs:
        log.warning("no class subdirectories under %s", root)
        return LabeledDataset((), CLASS_NAMES)
    if len(subdirs) > 2:
        raise InvalidArgumentError(f"expected at most 2 class folders, found {subdirs}")
    samples = []
    for cls, sub in enumerate(subdirs):
        folder = os.path.join(root, sub)
        for name in sorted(os.listdir(folder)):
            path = os.path.join(folder, name)
            if os.path.splitext(name)[1].lower() not in IMAGE_EXTENSIONS:
                log.warning("skipping non-image file %s", path)
                continue
            samples.append(Sample(label=cls, path=path))
    names = tuple(subdirs) + (CLASS_NAMES[1],) * (2 - len(subdirs))
    return LabeledDataset(tuple(samples), names[:2])


@dataclass(frozen=True)
class SyntheticConfig:
    size: int = 64
    band_width_range: tuple[int, int] = (14, 22)
    crack_thickness: int = 3
    crack_amplitude: int = 3      # jaggedness of the crack path, pixels
    noise_std: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.crack_thickness > self.band_width_range[0]:
            raise InvalidArgumentError("crack thicker than the narrowest bone band")
        if self.size < 16:
            raise InvalidArgumentError("synthetic size must be >= 16")


def _render_sample(rng: np.random.Generator, cfg: SyntheticConfig, fractured: bool):
    s = cfg.size
    img = 60.0 + rng.normal(0.0, cfg.noise_std, (s, s))

    band_w = int(rng.integers(cfg.band_width_range[0], cfg.band_width_range[1] + 1))
    cx = int(rng.integers(s // 3, 2 * s // 3))
    x0 = max(0, cx - band_w // 2)
    x1 = min(s - 1, x0 + band_w - 1)
    xs = np.arange(s)
    # smooth band profile: bright core, soft falloff at the edges
    dist = np.maximum(0, np.maximum(x0 - xs, xs - x1))
    profile = 120.0 * np.exp(-(dist ** 2) / 8.0)
    img += profile[None, :]

    box = None
    if fractured:
        cy = int(rng.integers(s // 4, 3 * s // 4))
        half = cfg.crack_thickness / 2.0
        offsets = rng.integers(-cfg.crack_amplitude, cfg.crack_amplitude + 1,
                               size=x1 - x0 + 1)
        ys_lo, ys_hi = [], []
        for j, x in enumerate(range(x0, x1 + 1)):
            y_mid = cy + int(offsets[j])
            lo = max(0, int(np.floor(y_mid - half)))
            hi = min(s - 1, int(np.ceil(y_mid + half)))
            img[lo:hi + 1, x] = 25.0 + rng.normal(0.0, 3.0, hi - lo + 1)
            ys_lo.append(lo)
            ys_hi.append(hi)
        box = (x0, min(ys_lo), x1, max(ys_hi))

    grid = PixelGrid8(np.clip(img, 0, 255).astype(np.uint8))
    return grid, box


def generate_synthetic(cfg: SyntheticConfig = SyntheticConfig(),
                       n_per_class: int = 100) -> LabeledDataset:
    """Balanced synthetic dataset, fully determined by cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    samples = []
    for _ in range(n_per_class):
        grid, box = _render_sample(rng, cfg, fractured=True)
        samples.append(Sample(label=0, image=grid, crack_box=box))
    for _ in range(n_per_class):
        grid, _ = _render_sample(rng, cfg, fractured=False)
        samples.append(Sample(label=1, image=grid))
    return LabeledDataset(tuple(samples))


def batches(n: int, batch_size: int = 32, shuffle_seed: int | None = None,
            epoch: int = 0):
    """Index batches over range(n); the final short batch is retained.

    With shuffle_seed set, the permutation is a deterministic function of
    (shuffle_seed, epoch); otherwise order is sequential.
    """
    if batch_size < 1:
        raise InvalidArgumentError("batch_size must be >= 1")
    if shuffle_seed is None:
        order = np.arange(n)
    else:
        order = np.random.default_rng([shuffle_seed, epoch]).permutation(n)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def write_split_manifest(path: str, splits, names=("train", "val", "test")):
    """CSV manifest: path (or synthetic index), label, split."""
    with open(path, "w") as f:
        f.write("path,label,split\n")
        for name, ds in zip(names, splits):
            for j, s in enumerate(ds.samples):
                ident = s.path if s.path is not None else f"synthetic:{name}:{j}"
                f.write(f"{ident},{s.label},{name}\n")
