"""Synthetic scene generation: vocabulary, dataset/scene sampling, rendering."""

from .dataset import (
    DatasetSpec,
    Placement,
    SceneDescription,
    compute_meta_attributes,
    label_of,
    relative_position,
    sample_dataset_spec,
    sample_scene,
    validate_dataset_spec,
)
from .render import (
    RENDER_PRESETS,
    RenderConfig,
    render,
    render_preset,
    scene_value,
    stripe_secondary,
)
from .vocab import (
    ATTRIBUTES,
    BACKGROUND,
    EXTRA_OBJECT_LAYERS,
    LAYERS,
    META_ATTRIBUTES,
    OBJECT_LAYERS,
    RELATIVE_POSITION,
    SQUARE,
    SQUARE_PRESENCE,
    AttributeKey,
    Triplet,
)

__all__ = [
    "ATTRIBUTES",
    "BACKGROUND",
    "EXTRA_OBJECT_LAYERS",
    "LAYERS",
    "META_ATTRIBUTES",
    "OBJECT_LAYERS",
    "RELATIVE_POSITION",
    "RENDER_PRESETS",
    "SQUARE",
    "SQUARE_PRESENCE",
    "AttributeKey",
    "DatasetSpec",
    "Placement",
    "RenderConfig",
    "SceneDescription",
    "Triplet",
    "compute_meta_attributes",
    "label_of",
    "relative_position",
    "render",
    "render_preset",
    "sample_dataset_spec",
    "sample_scene",
    "scene_value",
    "stripe_secondary",
    "validate_dataset_spec",
]
