"""Deterministic rasterization of scenes.

All drawing is integer-only (no anti-aliasing, no float pixel math), so a
rendered buffer is bit-identical across runs and platforms for the same
(scene, config) pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, GeometryError
from . import vocab
from .vocab import BACKGROUND, Triplet

Rgb = tuple[int, int, int]

DEFAULT_COLORS: dict[str, Rgb] = {
    "White": (255, 255, 255),
    "Grey": (128, 128, 128),
    "Blue": (30, 100, 220),
    "Orange": (245, 130, 30),
    "Black": (0, 0, 0),
}

# 5x7 bitmap glyphs; text objects render the fixed string "TXT"
_GLYPHS = {
    "T": (
        "11111",
        "00100",
        "00100",
        "00100",
        "00100",
        "00100",
        "00100",
    ),
    "X": (
        "10001",
        "10001",
        "01010",
        "00100",
        "01010",
        "10001",
        "10001",
    ),
}
TEXT_STRING = "TXT"
_GLYPH_COLS = 5
_GLYPH_ROWS = 7
# three glyphs plus two 1-column gaps
_TEXT_COLS = len(TEXT_STRING) * _GLYPH_COLS + (len(TEXT_STRING) - 1)


@dataclass(frozen=True)
class RenderConfig:
    """Pixel-level rendering parameters.

    Geometry scales linearly with resolution: at 224 px a Normal square is
    56 px and a Small one 28 px; other objects follow the same ratios.
    """

    resolution: int = 64
    colors: tuple[tuple[str, Rgb], ...] = tuple(sorted(DEFAULT_COLORS.items()))
    noise_fraction: float = 0.05
    stripe_width: int = 0  # 0 means derive from resolution
    margin: int = 1
    max_attempts: int = 1000

    def __post_init__(self):
        if self.resolution < 32:
            raise ConfigError("resolution must be at least 32")
        normal = self.resolution // 4
        small = self.resolution // 8
        if not (normal > small >= 4):
            raise ConfigError("object sizes must satisfy normal > small >= 4 px")
        if not (0.0 <= self.noise_fraction <= 1.0):
            raise ConfigError("noise_fraction must be in [0, 1]")

    @property
    def color_table(self) -> dict[str, Rgb]:
        return dict(self.colors)

    @property
    def effective_stripe_width(self) -> int:
        if self.stripe_width > 0:
            return self.stripe_width
        return max(1, round(self.resolution / 56))

    def object_extent(self, layer: str, size: str) -> tuple[int, int]:
        """(height, width) in pixels of a layer's bounding box."""
        res = self.resolution
        unit = res // 4 if size == "Normal" else res // 8
        if layer in ("Square", "Circle"):
            return unit, unit
        if layer == "Rectangle":
            return unit // 2, unit
        if layer == "Text":
            k = self.text_scale(size)
            return _GLYPH_ROWS * k, _TEXT_COLS * k
        raise GeometryError(f"layer {layer!r} has no extent")

    def text_scale(self, size: str) -> int:
        if size == "Normal":
            return max(2, round(3 * self.resolution / 224))
        return max(1, round(1.5 * self.resolution / 224))

    def to_json(self) -> dict:
        return {
            "resolution": self.resolution,
            "colors": {name: list(rgb) for name, rgb in self.colors},
            "noise_fraction": self.noise_fraction,
            "stripe_width": self.stripe_width,
            "margin": self.margin,
            "max_attempts": self.max_attempts,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RenderConfig":
        return cls(
            resolution=obj["resolution"],
            colors=tuple(sorted((n, tuple(v)) for n, v in obj["colors"].items())),
            noise_fraction=obj["noise_fraction"],
            stripe_width=obj["stripe_width"],
            margin=obj["margin"],
            max_attempts=obj["max_attempts"],
        )


RENDER_PRESETS = {
    "desk": RenderConfig(resolution=64),
    "paper": RenderConfig(resolution=224),
}


def render_preset(name: str) -> RenderConfig:
    try:
        return RENDER_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown render preset {name!r}") from None


def scene_value(triplets, layer: str, attribute: str):
    """The value a scene takes for a key: the rolled value if present in the
    triplet list, else the vocabulary default."""
    for t in triplets:
        if t.layer == layer and t.attribute == attribute:
            return t.value
    return vocab.default_value(vocab.AttributeKey(layer, attribute))


def stripe_secondary(object_rgb: Rgb, base_rgb: Rgb) -> Rgb:
    """Per-channel integer average of the object color and the background
    base color; used as the alternating stripe color."""
    return tuple((a + b) // 2 for a, b in zip(object_rgb, base_rgb))


def _object_mask(layer: str, h: int, w: int) -> np.ndarray:
    if layer in ("Square", "Rectangle"):
        return np.ones((h, w), dtype=bool)
    if layer == "Circle":
        d = h
        i = np.arange(d)
        a = 2 * i - (d - 1)
        return (a[:, None] ** 2 + a[None, :] ** 2) <= (d - 1) ** 2
    if layer == "Text":
        k = h // _GLYPH_ROWS
        mask = np.zeros((h, w), dtype=bool)
        col = 0
        for ch in TEXT_STRING:
            glyph = _GLYPHS[ch]
            for r, rowbits in enumerate(glyph):
                for c, bit in enumerate(rowbits):
                    if bit == "1":
                        r0, c0 = r * k, (col + c) * k
                        mask[r0 : r0 + k, c0 : c0 + k] = True
            col += _GLYPH_COLS + 1
        return mask
    raise GeometryError(f"layer {layer!r} cannot be drawn")


def render(scene, cfg: RenderConfig = RENDER_PRESETS["desk"]) -> np.ndarray:
    """Rasterize a scene to an (res, res, 3) uint8 RGB buffer.

    Background first (color then texture noise), then each placed object in
    placement order with its color, size, and texture.
    """
    res = cfg.resolution
    colors = cfg.color_table
    base = colors[scene_value(scene.triplets, BACKGROUND, "Color")]
    img = np.empty((res, res, 3), dtype=np.uint8)
    img[:, :] = base

    if scene_value(scene.triplets, BACKGROUND, "Texture") == "SaltAndPepper":
        npix = res * res
        k = round(cfg.noise_fraction * npix)
        rng = np.random.default_rng([scene.seed, scene.image_id, 1])
        perm = rng.permutation(npix)
        flat = img.reshape(npix, 3)
        flat[perm[:k]] = colors["Black"]
        flat[perm[k : 2 * k]] = colors["White"]

    stripe_w = cfg.effective_stripe_width
    for pl in scene.placements:
        h, w = pl.height, pl.width
        if pl.row < 0 or pl.col < 0 or pl.row + h > res or pl.col + w > res:
            raise GeometryError(
                f"{pl.layer} at ({pl.row},{pl.col}) size ({h},{w}) exceeds the {res}px frame"
            )
        rgb = colors[scene_value(scene.triplets, pl.layer, "Color")]
        mask = _object_mask(pl.layer, h, w)
        patch = img[pl.row : pl.row + h, pl.col : pl.col + w]
        if scene_value(scene.triplets, pl.layer, "Texture") == "VerticalStripes":
            second = stripe_secondary(rgb, base)
            cols = np.arange(w)
            odd = ((cols // stripe_w) % 2).astype(bool)
            patch[mask & ~odd[None, :]] = rgb
            patch[mask & odd[None, :]] = second
        else:
            patch[mask] = rgb
    return img


def object_pixel_mask(scene, placement, cfg: RenderConfig) -> np.ndarray:
    """Full-frame boolean mask of the pixels one placed object covers."""
    res = cfg.resolution
    mask = np.zeros((res, res), dtype=bool)
    local = _object_mask(placement.layer, placement.height, placement.width)
    mask[
        placement.row : placement.row + placement.height,
        placement.col : placement.col + placement.width,
    ] = local
    return mask
