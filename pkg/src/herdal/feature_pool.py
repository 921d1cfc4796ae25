"""Pixel pools, synthetic task generation, and stochastic feature providers.

A FeaturePool owns pixel identities and one base feature vector per pixel.
The stochastic feature provider abstracts whatever backbone produced the
features: it hands out seeded per-pixel feature samples, so disagreement
scores can be computed without any backbone in the loop.  Ground-truth
labels are stored in the pool but should only be read through
``reveal_labels`` (the annotation oracle) or by the evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, FormatError, InsufficientSamplesError

LABEL_GEOMETRIES = ("voronoi", "stripes", "blobs")


@dataclass(frozen=True)
class PixelRef:
    """Identity of one pixel: which image, and where in it."""

    image_id: int
    row: int
    col: int


@dataclass
class FeaturePool:
    """All candidate pixels with base features and (hidden) ground truth.

    Attributes:
        pixels: ordered list of PixelRef; position defines the pixel index.
        base_features: (P, D) float64 array, row i belongs to pixels[i].
        labels: (P,) int array of class ids, or None when unknown. -1 marks
            an unknown label in imported pools.
        image_index: image_id -> (start, stop) contiguous range into pixels.
        n_classes: C, number of classes (>= 2).
        image_shape: (H, W) declared per-image dimensions.
    """

    pixels: list[PixelRef]
    base_features: np.ndarray
    labels: np.ndarray | None
    image_index: dict[int, tuple[int, int]]
    n_classes: int
    image_shape: tuple[int, int]

    def __post_init__(self):
        if self.base_features.shape[0] != len(self.pixels):
            raise ConfigurationError(
                "feature rows (%d) != pixel count (%d)"
                % (self.base_features.shape[0], len(self.pixels))
            )
        if self.base_features.ndim != 2 or self.base_features.shape[1] < 1:
            raise ConfigurationError("base_features must be (P, D) with D > 0")
        if self.n_classes < 2:
            raise ConfigurationError("need at least 2 classes")
        referenced = {p.image_id for p in self.pixels}
        missing = referenced - set(self.image_index)
        if missing:
            raise ConfigurationError(f"image ids missing from index: {sorted(missing)}")
        H, W = self.image_shape
        seen = set()
        for p in self.pixels:
            if not (0 <= p.row < H and 0 <= p.col < W):
                raise ConfigurationError(f"pixel {p} outside {H}x{W} image")
            key = (p.image_id, p.row, p.col)
            if key in seen:
                raise FormatError(f"duplicate pixel {key}")
            seen.add(key)

    @property
    def size(self) -> int:
        return len(self.pixels)

    @property
    def feature_dim(self) -> int:
        return self.base_features.shape[1]

    def image_pixel_indices(self, image_id: int) -> np.ndarray:
        start, stop = self.image_index[image_id]
        return np.arange(start, stop)

    def reveal_labels(self, indices) -> np.ndarray:
        """Annotation oracle: return ground-truth class ids for `indices`.

        This is the only sanctioned read path for labels during selection.
        """
        if self.labels is None:
            raise ConfigurationError("pool has no ground-truth labels to reveal")
        return self.labels[np.asarray(indices, dtype=int)].copy()


def _sample_rng(seed: int, pixel: int, sample_index: int) -> np.random.Generator:
    # Hash-based stream: order-independent reproducibility per (seed, pixel, m).
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(pixel, sample_index))
    )


class StochasticFeatureProvider:
    """Seeded source of per-pixel feature samples.

    Modes:
        deterministic        -- every sample is the base feature.
        gaussian(noise)      -- base + N(0, noise^2 I); noise=0 degenerates
                                to deterministic bit-for-bit.
        replay(samples)      -- returns stored samples keyed by
                                (pixel_index, sample_index).
    """

    def __init__(self, mode: str = "deterministic", noise: float = 0.0,
                 samples: dict[tuple[int, int], np.ndarray] | None = None):
        if mode not in ("deterministic", "gaussian", "replay"):
            raise ConfigurationError(f"unknown provider mode {mode!r}")
        if mode == "gaussian" and noise < 0:
            raise ConfigurationError("noise scale must be >= 0")
        if mode == "replay" and samples is None:
            raise ConfigurationError("replay mode needs a samples table")
        self.mode = mode
        self.noise = float(noise)
        self.samples = samples

    def sample_one(self, pool: FeaturePool, pixel: int, sample_index: int,
                   seed: int) -> np.ndarray:
        """One feature sample for (pixel, sample_index) under `seed`."""
        base = pool.base_features[pixel]
        if self.mode == "replay":
            key = (pixel, sample_index)
            if key not in self.samples:
                raise InsufficientSamplesError(
                    f"no stored sample for pixel {pixel}, index {sample_index}"
                )
            return self.samples[key].copy()
        if self.mode == "deterministic" or self.noise == 0.0:
            return base.copy()
        rng = _sample_rng(seed, pixel, sample_index)
        return base + rng.normal(0.0, self.noise, size=base.shape)


def default_noise_scale(pool: FeaturePool) -> float:
    """Default gaussian noise: 0.1 x median feature norm of the pool."""
    norms = np.linalg.norm(pool.base_features, axis=1)
    return 0.1 * float(np.median(norms))


def sample_features(pool: FeaturePool, provider: StochasticFeatureProvider,
                    pixel: int, count: int, seed: int,
                    first_index: int = 1) -> np.ndarray:
    """`count` feature samples for one pixel, sample indices starting at
    `first_index` (index 0 is reserved for the independent extra draw).

    Returns a (count, D) array.
    """
    if count < 1:
        raise ConfigurationError("count must be >= 1")
    if not (0 <= pixel < pool.size):
        raise ConfigurationError(f"pixel index {pixel} out of range")
    out = np.empty((count, pool.feature_dim))
    for i in range(count):
        out[i] = provider.sample_one(pool, pixel, first_index + i, seed)
    return out


@dataclass
class SyntheticTaskSpec:
    """Desk-scale synthetic segmentation task."""

    n_images: int = 4
    image_side: int = 16
    n_classes: int = 3
    cluster_spread: float = 0.5
    feature_dim: int = 2
    label_geometry: str = "voronoi"

    def validate(self):
        if self.n_images < 1 or self.image_side < 1:
            raise ConfigurationError("n_images and image_side must be positive")
        if self.n_classes < 2:
            raise ConfigurationError("need n_classes >= 2")
        if self.feature_dim < 1:
            raise ConfigurationError("feature_dim must be positive")
        if self.cluster_spread <= 0:
            raise ConfigurationError("cluster_spread must be positive")
        if self.label_geometry not in LABEL_GEOMETRIES:
            raise ConfigurationError(
                f"label_geometry must be one of {LABEL_GEOMETRIES}"
            )
        if self.label_geometry == "stripes" and self.image_side < self.n_classes:
            raise ConfigurationError("stripes need image_side >= n_classes")


def _class_centers(C: int, D: int, spread: float) -> np.ndarray:
    # One nonzero coordinate per center, cycling through axes; magnitudes grow
    # by 4*spread per lap so any two centers are >= 4*spread apart.
    centers = np.zeros((C, D))
    for c in range(C):
        if D == 1:
            centers[c, 0] = 4.0 * spread * c
        else:
            centers[c, c % D] = 4.0 * spread * (1 + c // D)
    return centers


def _geometry_labels(spec: SyntheticTaskSpec, rng: np.random.Generator) -> np.ndarray:
    """Class-id map of shape (side, side) for one image."""
    S, C = spec.image_side, spec.n_classes
    rows, cols = np.meshgrid(np.arange(S), np.arange(S), indexing="ij")
    if spec.label_geometry == "stripes":
        return (cols * C) // S
    if spec.label_geometry == "voronoi":
        n_anchors = C
    else:  # blobs: two seeds per class
        n_anchors = 2 * C
    anchor_flat = rng.choice(S * S, size=n_anchors, replace=False)
    ar, ac = anchor_flat // S, anchor_flat % S
    d2 = (rows[..., None] - ar) ** 2 + (cols[..., None] - ac) ** 2
    nearest = np.argmin(d2, axis=-1)
    return nearest % C


def generate_synthetic(spec: SyntheticTaskSpec, seed: int) -> FeaturePool:
    """Deterministic synthetic pool: per-class feature clusters with labels
    laid out by the chosen geometry.

    Every class is guaranteed to appear in every image (anchors are distinct
    pixels; stripes span all classes when image_side >= n_classes).
    """
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xFEA7,)))
    centers = _class_centers(spec.n_classes, spec.feature_dim, spec.cluster_spread)

    S = spec.image_side
    pixels: list[PixelRef] = []
    labels = []
    feats = []
    image_index = {}
    for img in range(spec.n_images):
        lab = _geometry_labels(spec, rng)
        start = len(pixels)
        for r in range(S):
            for c in range(S):
                pixels.append(PixelRef(img, r, c))
        image_index[img] = (start, len(pixels))
        lab_flat = lab.ravel()
        labels.append(lab_flat)
        noise = rng.normal(0.0, spec.cluster_spread, size=(S * S, spec.feature_dim))
        feats.append(centers[lab_flat] + noise)
    return FeaturePool(
        pixels=pixels,
        base_features=np.vstack(feats),
        labels=np.concatenate(labels),
        image_index=image_index,
        n_classes=spec.n_classes,
        image_shape=(S, S),
    )


# ---------------------------------------------------------------------------
# Feature file format:
#   header line: "N H W D C"  (ASCII integers)
#   then one record per pixel: "image_id row col label f_1 ... f_D"
#   (label = -1 when unknown); row order defines the pixel index.
# Companion samples file (replay mode): "pixel_index sample_index f_1 ... f_D".
# ---------------------------------------------------------------------------

def export_pool(pool: FeaturePool, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        n_images = len(pool.image_index)
        H, W = pool.image_shape
        fh.write(f"{n_images} {H} {W} {pool.feature_dim} {pool.n_classes}\n")
        for i, p in enumerate(pool.pixels):
            label = -1 if pool.labels is None else int(pool.labels[i])
            feats = " ".join("%.17g" % v for v in pool.base_features[i])
            fh.write(f"{p.image_id} {p.row} {p.col} {label} {feats}\n")


def import_features(path) -> FeaturePool:
    """Parse a feature file into a pool; raises FormatError on malformed input."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise FormatError("header must be 'N H W D C'")
        try:
            n_images, H, W, D, C = (int(x) for x in header)
        except ValueError as e:
            raise FormatError(f"non-integer header field: {e}") from e
        if min(n_images, H, W, D) < 1 or C < 2:
            raise FormatError("header dimensions out of range")

        pixels: list[PixelRef] = []
        labels = []
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4 + D:
                raise FormatError(
                    f"line {lineno}: expected {4 + D} fields, got {len(parts)}"
                )
            try:
                img, r, c, label = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])
                feat = np.array([float(x) for x in parts[4:]])
            except ValueError as e:
                raise FormatError(f"line {lineno}: {e}") from e
            pixels.append(PixelRef(img, r, c))
            labels.append(label)
            rows.append(feat)

    if not pixels:
        raise FormatError("file has no pixel records")
    labels_arr = np.array(labels, dtype=int)
    image_index = {}
    for i, p in enumerate(pixels):
        if p.image_id not in image_index:
            image_index[p.image_id] = (i, i + 1)
        else:
            start, stop = image_index[p.image_id]
            if stop != i:
                raise FormatError("pixels of one image must be contiguous")
            image_index[p.image_id] = (start, i + 1)
    try:
        return FeaturePool(
            pixels=pixels,
            base_features=np.vstack(rows),
            labels=None if np.all(labels_arr == -1) else labels_arr,
            image_index=image_index,
            n_classes=C,
            image_shape=(H, W),
        )
    except ConfigurationError as e:
        raise FormatError(str(e)) from e


def load_replay_samples(path) -> dict[tuple[int, int], np.ndarray]:
    """Parse a companion samples file for replay-mode providers."""
    table: dict[tuple[int, int], np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise FormatError(f"line {lineno}: too few fields")
            try:
                key = (int(parts[0]), int(parts[1]))
                vec = np.array([float(x) for x in parts[2:]])
            except ValueError as e:
                raise FormatError(f"line {lineno}: {e}") from e
            if key in table:
                raise FormatError(f"line {lineno}: duplicate sample key {key}")
            table[key] = vec
    return table
