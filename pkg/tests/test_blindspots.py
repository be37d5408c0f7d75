"""Blindspot tests: membership semantics, constrained sampling, the
feasibility and ambiguity constraints, and extensional (atom-space) checks."""

import itertools

import numpy as np
import pytest

from spotcheck.blindspots import (
    BlindspotSet,
    BlindspotSpec,
    ambiguity_ok,
    eligible_keys,
    enumerate_atoms,
    extension_atoms,
    matches,
    matches_triplets,
    nested_pairs,
    sample_blindspot,
    sample_blindspot_set,
    validate_blindspot,
    validate_blindspot_set,
)
from spotcheck.errors import GenerationExhausted, InfeasibleSpec, VocabularyError
from spotcheck.scenegen.dataset import DatasetSpec, sample_scene
from spotcheck.scenegen.vocab import AttributeKey, Triplet


class TestMatches:
    def test_square_and_circle_conjunction(self, small_spec, desk_cfg):
        b = BlindspotSpec(
            id=0,
            triplets=(
                Triplet("Square", "Presence", True),
                Triplet("Circle", "Presence", True),
            ),
        )
        hits = 0
        for image_id in range(80):
            scene = sample_scene(small_spec, image_id=image_id, seed=21, cfg=desk_cfg)
            both = (
                scene.value("Square", "Presence") is True
                and scene.value("Circle", "Presence") is True
            )
            assert matches(b, scene) == both
            hits += both
        assert hits > 0

    def test_empty_blindspot_matches_everything(self, small_scenes):
        empty = BlindspotSpec(id=1, triplets=())
        for scene in small_scenes[:50]:
            assert matches(empty, scene)

    def test_wrong_value_rejects(self, small_scenes):
        b = BlindspotSpec(id=2, triplets=(Triplet("Square", "Color", "Blue"),))
        for scene in small_scenes[:50]:
            expected = scene.value("Square", "Color") == "Blue"
            assert matches(b, scene) == expected

    def test_monotone_in_triplets(self, small_spec):
        # adding a triplet can only shrink the extension
        atoms = enumerate_atoms(small_spec)
        rng = np.random.default_rng(0)
        for trial in range(40):
            b = sample_blindspot(small_spec, rng, size_range=(5, 6), next_id=trial)
            taken = {t.key for t in b.triplets}
            extra = [k for k in eligible_keys(small_spec) if k not in taken]
            if not extra:
                continue
            key = extra[int(rng.integers(len(extra)))]
            value = 0 if key.attribute == "RelativePosition" else True
            bigger = BlindspotSpec(id=trial, triplets=b.triplets + (Triplet(*key, value),))
            assert extension_atoms(bigger, atoms) <= extension_atoms(b, atoms)


class TestSampleBlindspot:
    def test_feasibility_presence_forced(self, small_spec):
        for seed in range(300):
            b = sample_blindspot(small_spec, seed)
            by_key = {t.key: t.value for t in b.triplets}
            for key in by_key:
                if key.layer != "Background" and key.attribute != "Presence":
                    assert by_key.get(AttributeKey(key.layer, "Presence")) is True

    def test_never_presence_false_with_other_attributes(self, small_spec):
        for seed in range(300):
            b = sample_blindspot(small_spec, seed)
            by_layer = {}
            for t in b.triplets:
                by_layer.setdefault(t.layer, []).append(t)
            for layer, ts in by_layer.items():
                values = {t.attribute: t.value for t in ts}
                if values.get("Presence") is False:
                    assert len(ts) == 1

    def test_sampler_specific_rules(self, small_spec):
        for seed in range(300):
            b = sample_blindspot(small_spec, seed)
            by_key = {t.key: t.value for t in b.triplets}
            assert by_key.get(AttributeKey("Square", "Presence")) is not False
            rel = by_key.get(AttributeKey("Background", "RelativePosition"))
            assert rel in (None, 0, 1)

    def test_output_revalidates(self, small_spec):
        for seed in range(300):
            validate_blindspot(small_spec, sample_blindspot(small_spec, seed))

    def test_size_distribution_uniform(self, small_spec):
        n = 1000
        sizes = np.array([len(sample_blindspot(small_spec, seed).triplets) for seed in range(n)])
        counts = np.bincount(sizes, minlength=8)[5:8]
        assert counts.sum() == n
        sigma = np.sqrt(n * (1 / 3) * (2 / 3))
        for c in counts:
            assert abs(c - n / 3) < 3 * sigma

    def test_deterministic(self, small_spec):
        assert sample_blindspot(small_spec, 7) == sample_blindspot(small_spec, 7)

    def test_infeasible_when_budget_exceeds_keys(self, small_spec):
        # the spec offers 8 constrainable keys (7 rollable + square position)
        with pytest.raises(InfeasibleSpec):
            sample_blindspot(small_spec, 0, size_range=(9, 9))

    def test_key_pool_restricts_choices(self, small_spec):
        pool = (
            AttributeKey("Background", "Color"),
            AttributeKey("Square", "Size"),
            AttributeKey("Square", "Color"),
        )
        allowed = set(pool) | {AttributeKey("Square", "Presence")}
        for seed in range(100):
            b = sample_blindspot(small_spec, seed, size_range=(3, 4), key_pool=pool)
            assert set(b.keys()) <= allowed


class TestAmbiguityOk:
    def test_single_shared_differing_key_fails(self):
        a = BlindspotSpec(
            id=0,
            triplets=(
                Triplet("Square", "Presence", True),
                Triplet("Square", "Color", "Blue"),
            ),
        )
        b = BlindspotSpec(
            id=1,
            triplets=(
                Triplet("Square", "Presence", True),
                Triplet("Square", "Color", "Orange"),
                Triplet("Background", "Color", "Grey"),
            ),
        )
        assert not ambiguity_ok(a, b)

    def test_two_shared_differing_keys_pass(self):
        a = BlindspotSpec(
            id=0,
            triplets=(
                Triplet("Background", "Color", "White"),
                Triplet("Background", "Texture", "Solid"),
            ),
        )
        b = BlindspotSpec(
            id=1,
            triplets=(
                Triplet("Background", "Color", "Grey"),
                Triplet("Background", "Texture", "SaltAndPepper"),
            ),
        )
        assert ambiguity_ok(a, b)
        assert ambiguity_ok(b, a)

    def test_identical_blindspots_fail(self, small_spec):
        b = sample_blindspot(small_spec, 3)
        assert not ambiguity_ok(b, b)

    def test_symmetry(self, small_spec):
        rng = np.random.default_rng(1)
        for trial in range(60):
            a = sample_blindspot(small_spec, rng)
            b = sample_blindspot(small_spec, rng)
            assert ambiguity_ok(a, b) == ambiguity_ok(b, a)


class TestSampleBlindspotSet:
    def test_single_blindspot_trivially_valid(self, small_spec):
        bset = sample_blindspot_set(small_spec, m=1, seed=0)
        assert len(bset) == 1
        validate_blindspot_set(bset)

    def test_all_pairs_ambiguous_for_m3(self, small_spec):
        for seed in range(20):
            bset = sample_blindspot_set(small_spec, m=3, seed=seed)
            assert len(bset) == 3
            for a, b in itertools.combinations(bset.blindspots, 2):
                assert ambiguity_ok(a, b)

    def test_deterministic(self, small_spec):
        assert sample_blindspot_set(small_spec, m=2, seed=5) == sample_blindspot_set(
            small_spec, m=2, seed=5
        )

    def test_no_extensional_nesting(self, small_spec):
        for seed in range(50):
            m = 1 + seed % 3
            bset = sample_blindspot_set(small_spec, m=m, seed=seed)
            assert nested_pairs(bset) == []

    def test_exhaustion_when_pool_cannot_be_ambiguous(self, small_spec):
        # a pool whose only shared differing key is the square color can
        # never satisfy the two-key ambiguity constraint
        pool = (AttributeKey("Square", "Presence"), AttributeKey("Square", "Color"))
        with pytest.raises(GenerationExhausted):
            sample_blindspot_set(
                small_spec, m=2, seed=0, size_range=(2, 2), max_attempts=60, key_pool=pool
            )

    def test_validate_rejects_ambiguity_violation(self, small_spec):
        a = BlindspotSpec(
            id=0,
            triplets=(
                Triplet("Background", "Color", "White"),
                Triplet("Background", "Texture", "Solid"),
                Triplet("Square", "Presence", True),
                Triplet("Square", "Color", "Blue"),
                Triplet("Square", "Size", "Normal"),
            ),
        )
        b = BlindspotSpec(
            id=1,
            triplets=(
                Triplet("Background", "Color", "Grey"),
                Triplet("Square", "Presence", True),
                Triplet("Square", "Color", "Blue"),
                Triplet("Square", "Size", "Normal"),
                Triplet("Square", "Texture", "Solid"),
            ),
        )
        bset = BlindspotSet(blindspots=(a, b), dataset=small_spec)
        with pytest.raises(VocabularyError):
            validate_blindspot_set(bset)


class TestValidateBlindspot:
    def test_duplicate_key_rejected(self, small_spec):
        b = BlindspotSpec(
            id=0,
            triplets=(
                Triplet("Square", "Color", "Blue"),
                Triplet("Square", "Color", "Orange"),
            ),
        )
        with pytest.raises(VocabularyError):
            validate_blindspot(small_spec, b, size_range=None)

    def test_non_eligible_key_rejected(self, small_spec):
        b = BlindspotSpec(id=0, triplets=(Triplet("Text", "Presence", True),))
        with pytest.raises(VocabularyError):
            validate_blindspot(small_spec, b, size_range=None)

    def test_attribute_without_presence_rejected(self, small_spec):
        b = BlindspotSpec(id=0, triplets=(Triplet("Square", "Color", "Blue"),))
        with pytest.raises(VocabularyError):
            validate_blindspot(small_spec, b, size_range=None)

    def test_square_presence_false_rejected(self, small_spec):
        b = BlindspotSpec(id=0, triplets=(Triplet("Square", "Presence", False),))
        with pytest.raises(VocabularyError):
            validate_blindspot(small_spec, b, size_range=None)

    def test_no_square_position_value_rejected(self, small_spec):
        b = BlindspotSpec(
            id=0, triplets=(Triplet("Background", "RelativePosition", -1),)
        )
        with pytest.raises(VocabularyError):
            validate_blindspot(small_spec, b, size_range=None)

    def test_size_range_enforced(self, small_spec):
        b = BlindspotSpec(
            id=0,
            triplets=(
                Triplet("Square", "Presence", True),
                Triplet("Square", "Color", "Blue"),
            ),
        )
        validate_blindspot(small_spec, b, size_range=None)
        with pytest.raises(VocabularyError):
            validate_blindspot(small_spec, b, size_range=(5, 7))


class TestExtensionalFrequency:
    def test_matched_fraction_is_two_to_minus_t(self, small_spec):
        # over the full joint assignment of the 7 rollable keys, a blindspot
        # fixing t of them matches exactly 2^(7-t) assignments
        from spotcheck.scenegen import vocab

        value_pairs = [vocab.values_of(k) for k in small_spec.rollable]
        assignments = [
            tuple(Triplet(k.layer, k.attribute, v) for k, v in zip(small_spec.rollable, combo))
            for combo in itertools.product(*value_pairs)
        ]
        assert len(assignments) == 2 ** 7
        for seed in range(30):
            b = sample_blindspot(small_spec, seed)
            rollable_part = BlindspotSpec(
                id=b.id,
                triplets=tuple(t for t in b.triplets if t.attribute != "RelativePosition"),
            )
            t = len(rollable_part.triplets)
            matched = sum(matches_triplets(rollable_part, a) for a in assignments)
            assert matched == 2 ** (7 - t)

    def test_extension_atoms_agree_with_matcher(self, small_spec):
        atoms = enumerate_atoms(small_spec)
        # square-present assignments produce two atoms, square-free one
        assert len(atoms) == 2 ** 6 * 2 + 2 ** 6
        for seed in range(20):
            b = sample_blindspot(small_spec, seed)
            ext = extension_atoms(b, atoms)
            for i, atom in enumerate(atoms):
                assert (i in ext) == matches_triplets(b, atom)


class TestSerialization:
    def test_blindspot_round_trip(self, small_spec):
        for seed in range(20):
            b = sample_blindspot(small_spec, seed)
            assert BlindspotSpec.from_json(b.to_json()) == b

    def test_set_round_trip(self, small_spec):
        bset = sample_blindspot_set(small_spec, m=3, seed=2)
        assert BlindspotSet.from_json(bset.to_json()) == bset

    def test_triplets_canonically_ordered(self):
        # construction order must not leak into equality or serialization
        forward = (
            Triplet("Background", "Color", "White"),
            Triplet("Square", "Color", "Blue"),
            Triplet("Square", "Presence", True),
        )
        scrambled = BlindspotSpec(id=0, triplets=forward[::-1])
        assert scrambled.triplets == forward
        assert scrambled == BlindspotSpec(id=0, triplets=forward)
