"""Vocabulary contract tests: which (layer, attribute, value) combinations
exist and how triplets validate and serialize."""

import pytest

from spotcheck.errors import VocabularyError
from spotcheck.scenegen import vocab
from spotcheck.scenegen.vocab import AttributeKey, Triplet


class TestValuesOf:
    def test_every_sampled_attribute_is_binary(self):
        for layer, attrs in vocab.ATTRIBUTES.items():
            for attribute in attrs:
                values = vocab.values_of(AttributeKey(layer, attribute))
                assert len(values) == 2

    def test_number_only_on_square(self):
        assert vocab.values_of(AttributeKey("Square", "Number")) == (1, 2)
        for layer in ("Background", "Rectangle", "Circle", "Text"):
            with pytest.raises(VocabularyError):
                vocab.values_of(AttributeKey(layer, "Number"))

    def test_relative_position_is_background_meta(self):
        key = vocab.RELATIVE_POSITION
        assert key == AttributeKey("Background", "RelativePosition")
        assert vocab.is_meta(key)
        assert vocab.values_of(key) == (-1, 0, 1)
        for layer in ("Square", "Rectangle", "Circle", "Text"):
            assert not vocab.is_meta(AttributeKey(layer, "RelativePosition"))
            with pytest.raises(VocabularyError):
                vocab.values_of(AttributeKey(layer, "RelativePosition"))

    def test_background_has_no_object_attributes(self):
        for attribute in ("Presence", "Size"):
            with pytest.raises(VocabularyError):
                vocab.values_of(AttributeKey("Background", attribute))

    def test_unknown_layer_rejected(self):
        with pytest.raises(VocabularyError):
            vocab.values_of(AttributeKey("Triangle", "Color"))


class TestDefaults:
    def test_defaults_come_first(self):
        assert vocab.default_value(AttributeKey("Background", "Color")) == "White"
        assert vocab.default_value(AttributeKey("Square", "Presence")) is False
        assert vocab.default_value(AttributeKey("Square", "Number")) == 1
        assert vocab.default_value(AttributeKey("Circle", "Texture")) == "Solid"

    def test_meta_has_no_default(self):
        with pytest.raises(VocabularyError):
            vocab.default_value(vocab.RELATIVE_POSITION)


class TestKeyListings:
    def test_attribute_keys_per_layer(self):
        assert len(vocab.attribute_keys("Background")) == 2
        assert len(vocab.attribute_keys("Square")) == 5
        assert len(vocab.attribute_keys("Circle")) == 4
        with pytest.raises(VocabularyError):
            vocab.attribute_keys("Sky")

    def test_meta_keys(self):
        assert vocab.meta_keys("Background") == (vocab.RELATIVE_POSITION,)
        assert vocab.meta_keys("Square") == ()

    def test_object_layers(self):
        assert vocab.is_object_layer("Square")
        assert not vocab.is_object_layer("Background")
        assert set(vocab.LAYERS) == {"Background", "Square", "Rectangle", "Circle", "Text"}


class TestTripletValidation:
    def test_valid_triplets_pass(self):
        vocab.validate_triplet(Triplet("Square", "Presence", True))
        vocab.validate_triplet(Triplet("Square", "Number", 2))
        vocab.validate_triplet(Triplet("Background", "RelativePosition", -1))

    def test_wrong_value_rejected(self):
        with pytest.raises(VocabularyError):
            vocab.validate_triplet(Triplet("Background", "Color", "Blue"))

    def test_bool_does_not_pass_as_number(self):
        # bool subclasses int, so (Square, Number, True) must still fail
        with pytest.raises(VocabularyError):
            vocab.validate_triplet(Triplet("Square", "Number", True))
        with pytest.raises(VocabularyError):
            vocab.validate_triplet(Triplet("Square", "Presence", 1))

    def test_json_round_trip(self):
        for t in (
            Triplet("Square", "Color", "Orange"),
            Triplet("Background", "RelativePosition", 0),
            Triplet("Circle", "Presence", False),
        ):
            assert vocab.triplet_from_json(vocab.triplet_to_json(t)) == t

    def test_malformed_json_rejected(self):
        with pytest.raises(VocabularyError):
            vocab.triplet_from_json({"layer": "Square", "attribute": "Color"})
        with pytest.raises(VocabularyError):
            vocab.triplet_from_json({"layer": "Square", "attribute": "Color", "value": "Red"})
