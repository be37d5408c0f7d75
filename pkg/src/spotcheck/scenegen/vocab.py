"""The semantic-feature vocabulary: layers, attributes, and their values.

Every attribute has exactly two values (Default first, then Alternative).
Meta-attributes are computed from the rendered layout, never sampled, and
RelativePosition additionally admits -1 for "no square".
"""

from __future__ import annotations

from typing import NamedTuple, Union

from ..errors import VocabularyError

Value = Union[bool, int, str]


class AttributeKey(NamedTuple):
    layer: str
    attribute: str


class Triplet(NamedTuple):
    layer: str
    attribute: str
    value: Value

    @property
    def key(self) -> AttributeKey:
        return AttributeKey(self.layer, self.attribute)


BACKGROUND = "Background"
SQUARE = "Square"
OBJECT_LAYERS = ("Square", "Rectangle", "Circle", "Text")
EXTRA_OBJECT_LAYERS = ("Rectangle", "Circle", "Text")
LAYERS = (BACKGROUND,) + OBJECT_LAYERS

_OBJECT_ATTRS: dict[str, tuple[Value, Value]] = {
    "Presence": (False, True),
    "Size": ("Normal", "Small"),
    "Color": ("Blue", "Orange"),
    "Texture": ("Solid", "VerticalStripes"),
}

ATTRIBUTES: dict[str, dict[str, tuple[Value, Value]]] = {
    BACKGROUND: {"Color": ("White", "Grey"), "Texture": ("Solid", "SaltAndPepper")},
    "Square": {**_OBJECT_ATTRS, "Number": (1, 2)},
    "Rectangle": dict(_OBJECT_ATTRS),
    "Circle": dict(_OBJECT_ATTRS),
    "Text": dict(_OBJECT_ATTRS),
}

META_ATTRIBUTES: dict[str, dict[str, tuple[Value, ...]]] = {
    BACKGROUND: {"RelativePosition": (-1, 0, 1)},
}

RELATIVE_POSITION = AttributeKey(BACKGROUND, "RelativePosition")
SQUARE_PRESENCE = AttributeKey(SQUARE, "Presence")


def is_meta(key: AttributeKey) -> bool:
    return key.attribute in META_ATTRIBUTES.get(key.layer, ())


def is_object_layer(layer: str) -> bool:
    return layer in OBJECT_LAYERS


def values_of(key: AttributeKey) -> tuple[Value, ...]:
    """The allowed values of a key: (Default, Alternative) for sampled
    attributes, the full ternary tuple for meta-attributes."""
    layer_attrs = ATTRIBUTES.get(key.layer)
    if layer_attrs is not None and key.attribute in layer_attrs:
        return layer_attrs[key.attribute]
    meta_attrs = META_ATTRIBUTES.get(key.layer)
    if meta_attrs is not None and key.attribute in meta_attrs:
        return meta_attrs[key.attribute]
    raise VocabularyError(f"unknown attribute {key.layer}.{key.attribute}")


def default_value(key: AttributeKey) -> Value:
    if is_meta(key):
        raise VocabularyError(f"meta-attribute {key} has no default value")
    return values_of(key)[0]


def attribute_keys(layer: str) -> tuple[AttributeKey, ...]:
    """All sampled (non-meta) attribute keys of a layer."""
    if layer not in ATTRIBUTES:
        raise VocabularyError(f"unknown layer {layer!r}")
    return tuple(AttributeKey(layer, a) for a in ATTRIBUTES[layer])


def meta_keys(layer: str) -> tuple[AttributeKey, ...]:
    return tuple(AttributeKey(layer, a) for a in META_ATTRIBUTES.get(layer, ()))


def validate_triplet(t: Triplet) -> None:
    allowed = values_of(t.key)
    for v in allowed:
        # bool is an int subclass; require exact type so (Square, Number, True)
        # cannot pass as the value 1
        if type(t.value) is type(v) and t.value == v:
            return
    raise VocabularyError(f"value {t.value!r} not allowed for {t.layer}.{t.attribute}")


def triplet_to_json(t: Triplet) -> dict:
    return {"layer": t.layer, "attribute": t.attribute, "value": t.value}


def triplet_from_json(obj: dict) -> Triplet:
    try:
        t = Triplet(obj["layer"], obj["attribute"], obj["value"])
    except (KeyError, TypeError) as exc:
        raise VocabularyError(f"malformed triplet object: {obj!r}") from exc
    validate_triplet(t)
    return t
