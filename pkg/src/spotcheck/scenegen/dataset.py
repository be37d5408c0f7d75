"""Dataset specifications and scene sampling.

A dataset fixes the set of layers and which attribute keys are rollable
(uniform Default/Alternative per image); a scene is one sampled triplet
list plus non-overlapping object placements and the meta-attributes that
follow from the layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PlacementFailure, VocabularyError
from . import vocab
from .render import RENDER_PRESETS, RenderConfig, scene_value
from .vocab import (
    BACKGROUND,
    EXTRA_OBJECT_LAYERS,
    OBJECT_LAYERS,
    RELATIVE_POSITION,
    SQUARE,
    AttributeKey,
    Triplet,
)

ROLLABLE_RANGE = (6, 8)
EXTRA_LAYER_RANGE = (1, 3)


@dataclass(frozen=True)
class DatasetSpec:
    layers: tuple[str, ...]
    rollable: tuple[AttributeKey, ...]
    seed: int

    def to_json(self) -> dict:
        return {
            "layers": list(self.layers),
            "rollable": [[k.layer, k.attribute] for k in self.rollable],
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetSpec":
        return cls(
            layers=tuple(obj["layers"]),
            rollable=tuple(AttributeKey(l, a) for l, a in obj["rollable"]),
            seed=obj["seed"],
        )


@dataclass(frozen=True)
class Placement:
    layer: str
    row: int
    col: int
    height: int
    width: int

    def to_json(self) -> dict:
        return {
            "layer": self.layer,
            "row": self.row,
            "col": self.col,
            "height": self.height,
            "width": self.width,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Placement":
        return cls(obj["layer"], obj["row"], obj["col"], obj["height"], obj["width"])


@dataclass(frozen=True)
class SceneDescription:
    image_id: int
    triplets: tuple[Triplet, ...]
    placements: tuple[Placement, ...]
    seed: int

    def value(self, layer: str, attribute: str):
        return scene_value(self.triplets, layer, attribute)

    def to_json(self) -> dict:
        return {
            "image_id": self.image_id,
            "seed": self.seed,
            "triplets": [vocab.triplet_to_json(t) for t in self.triplets],
            "placements": [p.to_json() for p in self.placements],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SceneDescription":
        return cls(
            image_id=obj["image_id"],
            triplets=tuple(vocab.triplet_from_json(t) for t in obj["triplets"]),
            placements=tuple(Placement.from_json(p) for p in obj["placements"]),
            seed=obj["seed"],
        )


def validate_dataset_spec(spec: DatasetSpec) -> None:
    """Checks every DatasetSpec invariant; raises VocabularyError otherwise."""
    if len(set(spec.layers)) != len(spec.layers):
        raise VocabularyError("duplicate layers")
    for layer in spec.layers:
        if layer not in vocab.LAYERS:
            raise VocabularyError(f"unknown layer {layer!r}")
    if BACKGROUND not in spec.layers or SQUARE not in spec.layers:
        raise VocabularyError("Background and Square layers are required")
    n_extra = len([l for l in spec.layers if l in EXTRA_OBJECT_LAYERS])
    if not (EXTRA_LAYER_RANGE[0] <= n_extra <= EXTRA_LAYER_RANGE[1]):
        raise VocabularyError(f"need 1-3 extra object layers, got {n_extra}")
    if len(set(spec.rollable)) != len(spec.rollable):
        raise VocabularyError("duplicate rollable keys")
    if not (ROLLABLE_RANGE[0] <= len(spec.rollable) <= ROLLABLE_RANGE[1]):
        raise VocabularyError(f"need 6-8 rollable attributes, got {len(spec.rollable)}")
    for key in spec.rollable:
        if vocab.is_meta(key):
            raise VocabularyError(f"meta-attribute {key} cannot be rollable")
        vocab.values_of(key)  # raises on unknown keys
        if key.layer not in spec.layers:
            raise VocabularyError(f"rollable key {key} references a missing layer")
    for layer in spec.layers:
        if vocab.is_object_layer(layer) and AttributeKey(layer, "Presence") not in spec.rollable:
            raise VocabularyError(f"{layer}.Presence must be rollable")


def sample_dataset_spec(seed) -> DatasetSpec:
    """Samples a dataset: Background + Square always, 1-3 extra object layers,
    then 6-8 rollable attributes with every object layer's Presence rollable
    first and the rest chosen layer-uniform then attribute-uniform."""
    rng = np.random.default_rng(seed)
    n_extra = int(rng.integers(EXTRA_LAYER_RANGE[0], EXTRA_LAYER_RANGE[1] + 1))
    picked = rng.choice(len(EXTRA_OBJECT_LAYERS), size=n_extra, replace=False)
    extras = [EXTRA_OBJECT_LAYERS[i] for i in sorted(int(i) for i in picked)]
    layers = (BACKGROUND, SQUARE, *extras)

    target = int(rng.integers(ROLLABLE_RANGE[0], ROLLABLE_RANGE[1] + 1))
    rollable = [
        AttributeKey(layer, "Presence") for layer in layers if vocab.is_object_layer(layer)
    ]
    remaining = {
        layer: [k for k in vocab.attribute_keys(layer) if k not in rollable]
        for layer in layers
    }
    while len(rollable) < target:
        candidates = [layer for layer in layers if remaining[layer]]
        layer = candidates[int(rng.integers(len(candidates)))]
        attrs = remaining[layer]
        rollable.append(attrs.pop(int(rng.integers(len(attrs)))))

    seed_value = int(seed) if np.isscalar(seed) else [int(s) for s in seed]
    spec = DatasetSpec(layers=layers, rollable=tuple(rollable), seed=seed_value)
    validate_dataset_spec(spec)
    return spec


def _overlaps(a: Placement, b: Placement, margin: int) -> bool:
    if a.row + a.height + margin <= b.row or b.row + b.height + margin <= a.row:
        return False
    if a.col + a.width + margin <= b.col or b.col + b.width + margin <= a.col:
        return False
    return True


def relative_position(placements, resolution: int) -> int:
    """1 if the first-placed square's center is above the horizontal
    centerline, 0 if on or below it, -1 if no square is placed."""
    for pl in placements:
        if pl.layer == SQUARE:
            return 1 if 2 * pl.row + pl.height < resolution else 0
    return -1


def compute_meta_attributes(scene_or_placements, cfg: RenderConfig) -> list[Triplet]:
    placements = getattr(scene_or_placements, "placements", scene_or_placements)
    rel = relative_position(placements, cfg.resolution)
    return [Triplet(RELATIVE_POSITION.layer, RELATIVE_POSITION.attribute, rel)]


def sample_scene(
    spec: DatasetSpec,
    image_id: int,
    seed,
    cfg: RenderConfig = RENDER_PRESETS["desk"],
) -> SceneDescription:
    """Rolls every rollable key 50/50, places present objects by rejection
    sampling (non-overlapping with a margin), then appends meta-attributes."""
    rng = np.random.default_rng([seed, image_id])
    triplets = []
    for key in spec.rollable:
        default, alternative = vocab.values_of(key)
        value = alternative if int(rng.integers(2)) == 1 else default
        triplets.append(Triplet(key.layer, key.attribute, value))

    res = cfg.resolution
    placements: list[Placement] = []
    for layer in OBJECT_LAYERS:
        if layer not in spec.layers:
            continue
        if scene_value(triplets, layer, "Presence") is not True:
            continue
        count = scene_value(triplets, layer, "Number") if layer == SQUARE else 1
        size = scene_value(triplets, layer, "Size")
        h, w = cfg.object_extent(layer, size)
        for _ in range(count):
            for _ in range(cfg.max_attempts):
                row = int(rng.integers(0, res - h + 1))
                col = int(rng.integers(0, res - w + 1))
                candidate = Placement(layer, row, col, h, w)
                if not any(_overlaps(candidate, other, cfg.margin) for other in placements):
                    placements.append(candidate)
                    break
            else:
                raise PlacementFailure(
                    f"no non-overlapping spot for {layer} in image {image_id} "
                    f"after {cfg.max_attempts} attempts"
                )

    triplets.extend(compute_meta_attributes(placements, cfg))
    return SceneDescription(
        image_id=image_id,
        triplets=tuple(triplets),
        placements=tuple(placements),
        seed=int(seed),
    )


def label_of(scene: SceneDescription) -> bool:
    """The task label: is a square present."""
    return Triplet(SQUARE, "Presence", True) in scene.triplets
