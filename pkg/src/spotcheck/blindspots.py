"""Blindspot specifications, membership, and constrained generation.

A blindspot is a set of (layer, attribute, value) triplets over a dataset's
rollable keys plus meta-attributes; an image belongs to it iff the triplets
are a subset of the image's triplet list. Generation enforces the
feasibility constraint (non-presence attributes force presence True) and,
for sets, the pairwise ambiguity constraint (at least two shared keys with
differing values).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import GenerationExhausted, InfeasibleSpec, VocabularyError
from .scenegen import vocab
from .scenegen.dataset import DatasetSpec
from .scenegen.vocab import (
    RELATIVE_POSITION,
    SQUARE,
    SQUARE_PRESENCE,
    AttributeKey,
    Triplet,
)

TRIPLET_RANGE = (5, 7)
BLINDSPOT_COUNT_RANGE = (1, 3)


@dataclass(frozen=True)
class BlindspotSpec:
    id: int
    triplets: tuple[Triplet, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.triplets, key=lambda t: (t.layer, t.attribute)))
        object.__setattr__(self, "triplets", ordered)

    def keys(self) -> tuple[AttributeKey, ...]:
        return tuple(t.key for t in self.triplets)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "triplets": [vocab.triplet_to_json(t) for t in self.triplets],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BlindspotSpec":
        return cls(
            id=obj["id"],
            triplets=tuple(vocab.triplet_from_json(t) for t in obj["triplets"]),
        )


@dataclass(frozen=True)
class BlindspotSet:
    blindspots: tuple[BlindspotSpec, ...]
    dataset: DatasetSpec

    def __len__(self) -> int:
        return len(self.blindspots)

    def to_json(self) -> dict:
        return {
            "blindspots": [b.to_json() for b in self.blindspots],
            "dataset": self.dataset.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BlindspotSet":
        return cls(
            blindspots=tuple(BlindspotSpec.from_json(b) for b in obj["blindspots"]),
            dataset=DatasetSpec.from_json(obj["dataset"]),
        )


def matches(b: BlindspotSpec, scene) -> bool:
    """True iff every triplet of b appears in the scene's triplet list."""
    return matches_triplets(b, scene.triplets)


def matches_triplets(b: BlindspotSpec, triplets) -> bool:
    scene_set = set(triplets)
    return all(t in scene_set for t in b.triplets)


def matches_any(bset: BlindspotSet, scene) -> bool:
    return any(matches(b, scene) for b in bset.blindspots)


def eligible_keys(spec: DatasetSpec) -> tuple[AttributeKey, ...]:
    """Keys a blindspot may constrain: the dataset's rollable keys plus the
    meta-attributes of its layers (meta-attributes count as rollable here)."""
    metas = tuple(k for layer in spec.layers for k in vocab.meta_keys(layer))
    return spec.rollable + metas


def validate_blindspot(
    spec: DatasetSpec,
    b: BlindspotSpec,
    size_range: tuple[int, int] | None = TRIPLET_RANGE,
) -> None:
    """Independent checker for sampler outputs: key eligibility/uniqueness,
    value validity, the feasibility constraint, and the sampler-specific
    restrictions (square presence never False, relative position in {0, 1})."""
    keys = [t.key for t in b.triplets]
    if len(set(keys)) != len(keys):
        raise VocabularyError(f"blindspot {b.id} repeats an attribute key")
    allowed = set(eligible_keys(spec))
    for t in b.triplets:
        vocab.validate_triplet(t)
        if t.key not in allowed:
            raise VocabularyError(f"blindspot {b.id} uses non-rollable key {t.key}")
    if size_range is not None and not (size_range[0] <= len(b.triplets) <= size_range[1]):
        raise VocabularyError(
            f"blindspot {b.id} has {len(b.triplets)} triplets, expected {size_range}"
        )
    by_key = {t.key: t.value for t in b.triplets}
    for key, value in by_key.items():
        if vocab.is_object_layer(key.layer) and key.attribute != "Presence":
            if by_key.get(AttributeKey(key.layer, "Presence")) is not True:
                raise VocabularyError(
                    f"blindspot {b.id} constrains {key.layer}.{key.attribute} "
                    "without presence True"
                )
    if by_key.get(SQUARE_PRESENCE) is False:
        raise VocabularyError(f"blindspot {b.id} excludes squares")
    if by_key.get(RELATIVE_POSITION) == -1:
        raise VocabularyError(f"blindspot {b.id} uses the no-square position value")


def sample_blindspot(
    spec: DatasetSpec,
    seed,
    size_range: tuple[int, int] = TRIPLET_RANGE,
    next_id: int = 0,
    key_pool: tuple[AttributeKey, ...] | None = None,
) -> BlindspotSpec:
    """Samples one blindspot: size uniform in size_range, then iteratively a
    uniform layer with unconstrained eligible keys, presence-first for object
    layers (re-picking an object layer forces its presence to True), and a
    uniform value.

    Square presence is always True and relative position is drawn from
    {0, 1}: hypothesized blindspots are searched for among the images of the
    positive (square) class, so a square-free blindspot could never be
    discovered or scored there.

    key_pool, when given, restricts the constrainable keys to that subset
    (presence keys of its object layers are always eligible alongside it).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    target = int(rng.integers(size_range[0], size_range[1] + 1))
    pool = eligible_keys(spec)
    if key_pool is not None:
        wanted = set(key_pool)
        for key in key_pool:
            if vocab.is_object_layer(key.layer):
                wanted.add(AttributeKey(key.layer, "Presence"))
        pool = tuple(k for k in pool if k in wanted)
    if target > len(pool):
        raise InfeasibleSpec(
            f"dataset offers {len(pool)} constrainable keys, blindspot needs {target}"
        )
    by_layer: dict[str, list[AttributeKey]] = {}
    for key in pool:
        by_layer.setdefault(key.layer, []).append(key)

    chosen: dict[AttributeKey, object] = {}
    while len(chosen) < target:
        layers = [l for l, keys in by_layer.items() if any(k not in chosen for k in keys)]
        layer = layers[int(rng.integers(len(layers)))]
        presence = AttributeKey(layer, "Presence")
        if vocab.is_object_layer(layer) and presence not in chosen:
            key = presence
        else:
            rest = [k for k in by_layer[layer] if k not in chosen and k != presence]
            key = rest[int(rng.integers(len(rest)))]
            if vocab.is_object_layer(layer):
                chosen[presence] = True
        if key == SQUARE_PRESENCE:
            value = True
        elif key == RELATIVE_POSITION:
            value = int(rng.integers(2))
        else:
            default, alternative = vocab.values_of(key)
            value = alternative if int(rng.integers(2)) == 1 else default
        chosen[key] = value

    b = BlindspotSpec(
        id=next_id,
        triplets=tuple(Triplet(k.layer, k.attribute, v) for k, v in chosen.items()),
    )
    validate_blindspot(spec, b, size_range)
    return b


def ambiguity_ok(a: BlindspotSpec, b: BlindspotSpec) -> bool:
    """True iff the pair shares at least two attribute keys with differing
    values (the constraint that rules out interchangeable decompositions)."""
    a_vals = {t.key: t.value for t in a.triplets}
    differing = 0
    for t in b.triplets:
        if t.key in a_vals and a_vals[t.key] != t.value:
            differing += 1
    return differing >= 2


def sample_blindspot_set(
    spec: DatasetSpec,
    m: int,
    seed,
    size_range: tuple[int, int] = TRIPLET_RANGE,
    max_attempts: int = 10000,
    key_pool: tuple[AttributeKey, ...] | None = None,
) -> BlindspotSet:
    """Rejection-samples m blindspots until every pair passes the ambiguity
    constraint."""
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        candidates = [
            sample_blindspot(spec, rng, size_range=size_range, next_id=i, key_pool=key_pool)
            for i in range(m)
        ]
        if all(
            ambiguity_ok(a, b) for a, b in itertools.combinations(candidates, 2)
        ):
            return BlindspotSet(blindspots=tuple(candidates), dataset=spec)
    raise GenerationExhausted(
        f"no ambiguity-safe set of {m} blindspots after {max_attempts} attempts"
    )


def validate_blindspot_set(bset: BlindspotSet, size_range=TRIPLET_RANGE) -> None:
    for b in bset.blindspots:
        validate_blindspot(bset.dataset, b, size_range)
    for a, b in itertools.combinations(bset.blindspots, 2):
        if not ambiguity_ok(a, b):
            raise VocabularyError(f"blindspots {a.id} and {b.id} violate ambiguity")


def enumerate_atoms(spec: DatasetSpec) -> list[frozenset]:
    """Every realizable joint assignment of the rollable keys plus the
    square-position meta value, as frozensets of triplets. The discrete
    attribute space behind extensional (image-set) reasoning."""
    atoms = []
    value_pairs = [vocab.values_of(k) for k in spec.rollable]
    for combo in itertools.product(*value_pairs):
        triplets = [
            Triplet(k.layer, k.attribute, v) for k, v in zip(spec.rollable, combo)
        ]
        square_present = dict(zip(spec.rollable, combo)).get(SQUARE_PRESENCE) is True
        positions = (0, 1) if square_present else (-1,)
        for rel in positions:
            atom = frozenset(
                triplets + [Triplet(RELATIVE_POSITION.layer, RELATIVE_POSITION.attribute, rel)]
            )
            atoms.append(atom)
    return atoms


def extension_atoms(b: BlindspotSpec, atoms) -> frozenset:
    required = set(b.triplets)
    return frozenset(i for i, atom in enumerate(atoms) if required <= atom)


def nested_pairs(bset: BlindspotSet) -> list[tuple[int, int]]:
    """Brute-force extensional check over the discrete attribute space:
    returns every (id, id) pair where one blindspot's extension is a subset
    of another's."""
    atoms = enumerate_atoms(bset.dataset)
    ext = {b.id: extension_atoms(b, atoms) for b in bset.blindspots}
    out = []
    for a, b in itertools.permutations(bset.blindspots, 2):
        if ext[a.id] <= ext[b.id]:
            out.append((a.id, b.id))
    return out
