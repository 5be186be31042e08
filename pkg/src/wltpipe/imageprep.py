"""Image-bundle preprocessing for the two encoder input layouts.

Posts carry zero to four images. Both layouts pad to four slots with
all-zero rasters; the stitch layout downsamples each slot to 112x112 and
tiles them 2x2 into one 224x224 raster, the concat layout resizes each
present slot to a full 224x224 raster.
"""

from __future__ import annotations

import io
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import Corpus, Post

logger = logging.getLogger(__name__)

SLOT_COUNT = 4
TILE_SIZE = 112
TARGET_SIZE = 224


@dataclass(frozen=True, eq=False)
class Raster:
    """RGB image: (height, width, 3) uint8 array, row-major."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3 or self.data.dtype != np.uint8:
            raise ValueError("raster data must be (h, w, 3) uint8")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def zeros(cls, height: int, width: int) -> "Raster":
        return cls(np.zeros((height, width, 3), dtype=np.uint8))

    def same_pixels(self, other: "Raster") -> bool:
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class ImageBundle:
    """Exactly four slots; absent slots are all-zero and trail present ones."""

    slots: tuple[Raster, Raster, Raster, Raster]
    present_mask: tuple[bool, bool, bool, bool]


def bilinear_resize(raster: Raster, out_height: int, out_width: int) -> Raster:
    """Corner-aligned bilinear resize; identity sizes pass through untouched."""
    h, w = raster.height, raster.width
    if (out_height, out_width) == (h, w):
        return raster
    src = raster.data.astype(np.float64)

    def coords(n_in: int, n_out: int) -> np.ndarray:
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out)
        return np.arange(n_out) * ((n_in - 1) / (n_out - 1))

    ys = coords(h, out_height)
    xs = coords(w, out_width)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]

    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return Raster(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def pad_with_empty(
    images: Sequence[Raster], empty_size: int = TARGET_SIZE
) -> ImageBundle:
    """Place images into four slots, filling the rest with zero rasters."""
    if len(images) > SLOT_COUNT:
        raise ValueError("at most %d images per post, got %d" % (SLOT_COUNT, len(images)))
    slots = list(images) + [
        Raster.zeros(empty_size, empty_size) for _ in range(SLOT_COUNT - len(images))
    ]
    mask = tuple(i < len(images) for i in range(SLOT_COUNT))
    return ImageBundle(slots=tuple(slots), present_mask=mask)


def stitch(bundle: ImageBundle) -> Raster:
    """Tile the four slots, each downsampled to 112x112, into one 224x224 raster.

    Slot order is row-major: 0 top-left, 1 top-right, 2 bottom-left,
    3 bottom-right.
    """
    out = np.zeros((TARGET_SIZE, TARGET_SIZE, 3), dtype=np.uint8)
    offsets = ((0, 0), (0, TILE_SIZE), (TILE_SIZE, 0), (TILE_SIZE, TILE_SIZE))
    for slot, (oy, ox) in zip(bundle.slots, offsets):
        tile = bilinear_resize(slot, TILE_SIZE, TILE_SIZE)
        out[oy:oy + TILE_SIZE, ox:ox + TILE_SIZE] = tile.data
    return Raster(out)


def concat_layout(bundle: ImageBundle) -> tuple[Raster, Raster, Raster, Raster]:
    """Resize each present slot to 224x224; absent slots stay all-zero."""
    outputs = []
    for slot, present in zip(bundle.slots, bundle.present_mask):
        if present:
            outputs.append(bilinear_resize(slot, TARGET_SIZE, TARGET_SIZE))
        else:
            outputs.append(Raster.zeros(TARGET_SIZE, TARGET_SIZE))
    return tuple(outputs)


def decode_image(path: str | Path) -> Optional[Raster]:
    """Decode a PNG/JPEG file to a Raster; None (absent slot) on failure."""
    from PIL import Image

    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            return Raster(np.asarray(rgb, dtype=np.uint8))
    except Exception as exc:
        logger.warning("cannot decode image %s: %s", path, exc)
        return None


def encode_png(raster: Raster) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(raster.data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_bundle(post: Post, media_root: Optional[str | Path] = None) -> ImageBundle:
    """Decode a post's image refs into a bundle; undecodable refs are absent."""
    rasters = []
    for ref in post.image_refs:
        path = Path(media_root) / ref if media_root else Path(ref)
        raster = decode_image(path)
        if raster is not None:
            rasters.append(raster)
    return pad_with_empty(rasters)


@dataclass(frozen=True)
class ImageCountDistribution:
    """Per-class histogram over the number of images per post (0..4)."""

    counts: dict[int, dict[int, int]]

    @property
    def fractions(self) -> dict[int, dict[int, float]]:
        out: dict[int, dict[int, float]] = {}
        for cls, hist in self.counts.items():
            total = sum(hist.values())
            out[cls] = {k: v / total for k, v in hist.items()}
        return out


def image_count_distribution(corpus: Corpus, labels: dict[str, int]) -> ImageCountDistribution:
    """Exact per-class counts of posts by number of attached images."""
    per_class: dict[int, Counter] = {}
    for post_id, label in labels.items():
        n = len(corpus[post_id].image_refs)
        per_class.setdefault(label, Counter())[n] += 1
    return ImageCountDistribution(
        counts={cls: dict(sorted(c.items())) for cls, c in per_class.items()}
    )
