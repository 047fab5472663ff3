"""Dataset registry: synthetic shape corpus, splits, and few-shot sampling.

The desk-scale corpus is a fully seeded 10-class 32x32 shape dataset whose
class identity is the drawn glyph (colors are shared across classes), so
classifiers must rely on shape/texture features. A "shifted" style variant
of the same classes stands in for a cross-domain evaluation target.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigError, DataError, SamplerError

TOY_CLASS_NAMES = (
    "circle", "ring", "square", "diamond", "triangle",
    "cross", "star", "stripe", "check", "dot",
)

# Published roster of the paper-scale benchmark datasets, kept for naming
# parity in configs and reports; none of these are bundled or downloaded.
PAPER_SCALE_ROSTER = {
    "imagenet-1k": {"classes": 1000, "train": 1_280_000, "val": 50_000},
    "cub-200-2011": {"classes": 200, "train": 5_994, "val": 5_794},
    "stanford-cars": {"classes": 196, "train": 8_144, "val": 8_041},
    "fgvc-aircraft": {"classes": 100, "train": 6_667, "val": 3_333},
}

_SPLIT_CODES = {"train": 0, "val": 1}

_PALETTE = np.array([
    [0.95, 0.30, 0.25], [0.30, 0.85, 0.35], [0.25, 0.45, 0.95],
    [0.95, 0.80, 0.25], [0.85, 0.35, 0.90], [0.30, 0.85, 0.85],
    [0.95, 0.55, 0.20], [0.60, 0.90, 0.30], [0.75, 0.35, 0.55],
    [0.55, 0.60, 0.95],
])


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe + bookkeeping for one dataset; synthetic or disk-backed."""

    id: str
    class_names: tuple[str, ...]
    train_per_class: int
    val_per_class: int
    resolution: int = 32
    data_range: tuple[float, float] = (0.0, 1.0)
    source: str = "synthetic"  # "synthetic" or "disk:<root>"
    recipe_seed: int = 0
    style: str = "base"  # "base" | "shifted"

    def __post_init__(self):
        if len(set(self.class_names)) != len(self.class_names):
            raise ConfigError(f"dataset {self.id}: duplicate class names")
        if len(self.class_names) < 2:
            raise ConfigError(f"dataset {self.id}: need at least 2 classes")
        if self.data_range[0] >= self.data_range[1]:
            raise ConfigError(f"dataset {self.id}: empty data range")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass
class LabeledImages:
    """A materialized split: (N, 3, H, W) float images plus integer labels."""

    images: torch.Tensor
    labels: torch.Tensor
    class_names: tuple[str, ...]
    dataset_id: str = ""
    split: str = ""

    def __len__(self):
        return self.images.shape[0]


def toy_spec(train_per_class: int = 200, val_per_class: int = 50,
             resolution: int = 32, recipe_seed: int = 0,
             style: str = "base", dataset_id: str | None = None) -> DatasetSpec:
    if dataset_id is None:
        dataset_id = "toy-shapes" if style == "base" else f"toy-shapes-{style}"
    return DatasetSpec(
        id=dataset_id, class_names=TOY_CLASS_NAMES,
        train_per_class=train_per_class, val_per_class=val_per_class,
        resolution=resolution, recipe_seed=recipe_seed, style=style)


def _rot(xx, yy, theta):
    c, s = np.cos(theta), np.sin(theta)
    return c * xx + s * yy, -s * xx + c * yy


def _shape_mask(name: str, rng: np.random.Generator, res: int) -> np.ndarray:
    lin = np.linspace(-1.0, 1.0, res)
    yy, xx = np.meshgrid(lin, lin, indexing="ij")
    cx, cy = rng.uniform(-0.25, 0.25, size=2)
    r = rng.uniform(0.45, 0.62)
    u, v = xx - cx, yy - cy

    if name == "circle":
        return u * u + v * v <= r * r
    if name == "ring":
        d2 = u * u + v * v
        return (d2 <= r * r) & (d2 >= (0.55 * r) ** 2)
    if name == "square":
        u, v = _rot(u, v, rng.uniform(-0.30, 0.30))
        return np.maximum(np.abs(u), np.abs(v)) <= 0.82 * r
    if name == "diamond":
        u, v = _rot(u, v, rng.uniform(-0.30, 0.30))
        return np.abs(u) + np.abs(v) <= 1.12 * r
    if name == "triangle":
        u, v = _rot(u, v, rng.uniform(-0.25, 0.25))
        h, w = 0.9 * r, 0.95 * r
        return (v >= -h) & (v <= h) & (np.abs(u) <= (v + h) / (2 * h) * w)
    if name == "cross":
        u, v = _rot(u, v, rng.uniform(-0.25, 0.25))
        return ((np.abs(u) <= 0.30 * r) & (np.abs(v) <= r)) | (
            (np.abs(v) <= 0.30 * r) & (np.abs(u) <= r))
    if name == "star":
        u, v = _rot(u, v, rng.uniform(-0.18, 0.18))
        return (np.maximum(np.abs(u), np.abs(v)) <= 0.62 * r) | (
            np.abs(u) + np.abs(v) <= 1.05 * r)
    if name == "stripe":
        u, v = _rot(u, v, 0.6 + rng.uniform(-0.25, 0.25))
        phase = ((u / (0.55 * r)) % 2.0) < 1.0
        return phase & (np.maximum(np.abs(u), np.abs(v)) <= 0.95 * r)
    if name == "check":
        u, v = _rot(u, v, rng.uniform(-0.18, 0.18))
        cell = 0.5 * r
        parity = (np.floor(u / cell) + np.floor(v / cell)) % 2 == 0
        return parity & (np.maximum(np.abs(u), np.abs(v)) <= 0.92 * r)
    if name == "dot":
        mask = np.zeros_like(u, dtype=bool)
        theta0 = rng.uniform(0, 2 * np.pi)
        for k in range(5):
            ang = theta0 + 2 * np.pi * k / 5
            du = u - 0.62 * r * np.cos(ang)
            dv = v - 0.62 * r * np.sin(ang)
            mask |= du * du + dv * dv <= (0.26 * r) ** 2
        return mask
    raise ConfigError(f"unknown shape class {name!r}")


def _toy_image(class_name: str, rng: np.random.Generator, res: int,
               style: str) -> np.ndarray:
    if style == "base":
        bg = rng.uniform(0.05, 0.38, size=3)
        fg = _PALETTE[rng.integers(len(_PALETTE))] + rng.uniform(-0.08, 0.08, 3)
        noise_sigma = 0.035
    elif style == "shifted":
        bg = rng.uniform(0.62, 0.95, size=3)
        fg = 1.0 - _PALETTE[rng.integers(len(_PALETTE))] * rng.uniform(0.7, 1.0)
        noise_sigma = 0.055
    else:
        raise ConfigError(f"unknown dataset style {style!r}")

    lin = np.linspace(0.0, 1.0, res)
    grad = np.outer(lin, np.ones(res)) * rng.uniform(-0.08, 0.08)
    img = np.empty((3, res, res), dtype=np.float64)
    for c in range(3):
        img[c] = bg[c] + grad
    mask = _shape_mask(class_name, rng, res)
    for c in range(3):
        img[c][mask] = fg[c]
    img += rng.normal(0.0, noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def _synthesize_split(spec: DatasetSpec, split: str) -> LabeledImages:
    per_class = spec.train_per_class if split == "train" else spec.val_per_class
    split_code = _SPLIT_CODES[split]
    images, labels = [], []
    for k, cname in enumerate(spec.class_names):
        for i in range(per_class):
            # per-image seed stream keyed on (recipe, split, class, index)
            # keeps splits disjoint by construction
            rng = np.random.default_rng(
                np.random.SeedSequence([spec.recipe_seed, split_code, k, i]))
            images.append(_toy_image(cname, rng, spec.resolution, spec.style))
            labels.append(k)
    return LabeledImages(
        images=torch.from_numpy(np.stack(images)),
        labels=torch.tensor(labels, dtype=torch.long),
        class_names=spec.class_names, dataset_id=spec.id, split=split)


def _load_disk_split(spec: DatasetSpec, split: str, root: Path) -> LabeledImages:
    from PIL import Image

    problems = []
    images, labels = [], []
    for k, cname in enumerate(spec.class_names):
        class_dir = root / split / cname
        if not class_dir.is_dir():
            problems.append(f"missing class directory: {class_dir}")
            continue
        files = sorted(p for p in class_dir.iterdir() if p.is_file())
        if not files:
            problems.append(f"no image files in {class_dir}")
            continue
        for f in files:
            try:
                with Image.open(f) as im:
                    im = im.convert("RGB").resize((spec.resolution, spec.resolution))
                    arr = np.asarray(im, dtype=np.float32) / 255.0
            except Exception as exc:
                problems.append(f"unreadable image {f}: {exc}")
                continue
            images.append(torch.from_numpy(arr.transpose(2, 0, 1)))
            labels.append(k)
    if problems:
        raise DataError("dataset problems:\n  " + "\n  ".join(problems))
    lo, hi = spec.data_range
    stacked = torch.stack(images) * (hi - lo) + lo
    return LabeledImages(
        images=stacked, labels=torch.tensor(labels, dtype=torch.long),
        class_names=spec.class_names, dataset_id=spec.id, split=split)


def load_split(spec: DatasetSpec, split: str) -> LabeledImages:
    """Materialize a split in deterministic (class, index) order."""
    if split not in _SPLIT_CODES:
        raise ConfigError(f"unknown split {split!r}; expected train or val")
    if spec.source == "synthetic":
        return _synthesize_split(spec, split)
    if spec.source.startswith("disk:"):
        return _load_disk_split(spec, split, Path(spec.source[len("disk:"):]))
    raise ConfigError(f"unknown dataset source {spec.source!r}")


def few_shot_sample(data: LabeledImages, shots: int, seed: int) -> LabeledImages:
    """Select exactly ``shots`` images per class, seed-stable."""
    if shots < 1:
        raise ConfigError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF5]))
    chosen = []
    short = []
    for k, cname in enumerate(data.class_names):
        pool = torch.nonzero(data.labels == k, as_tuple=True)[0].numpy()
        if len(pool) < shots:
            short.append(f"{cname} ({len(pool)} < {shots})")
            continue
        picks = rng.choice(pool, size=shots, replace=False)
        chosen.extend(int(p) for p in np.sort(picks))
    if short:
        raise SamplerError(
            "not enough images for few-shot sampling: " + ", ".join(short))
    idx = torch.tensor(chosen, dtype=torch.long)
    return LabeledImages(
        images=data.images[idx], labels=data.labels[idx],
        class_names=data.class_names, dataset_id=data.dataset_id,
        split=f"{data.split}-few{shots}")
