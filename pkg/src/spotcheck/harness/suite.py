"""Suite generation and persistence of experiment configurations.

An experiment configuration (EC) bundles a dataset spec, a blindspot set,
split sizes, a model kind, and every seed needed to reproduce it. Suites
are generated from one master seed: each EC gets an independent block of
seeds drawn from the master stream, and any data-dependent retries consume
seeds derived from the EC's own block, so the master stream advances the
same amount per EC no matter how many retries happened. Re-generation with
the same master seed is therefore byte-identical.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..blindspots import (
    BLINDSPOT_COUNT_RANGE,
    TRIPLET_RANGE,
    BlindspotSet,
    matches,
    sample_blindspot_set,
    validate_blindspot_set,
)
from ..errors import (
    ConfigError,
    GenerationExhausted,
    InfeasibleSpec,
    PlacementFailure,
    SamplingError,
)
from ..scenegen.dataset import (
    DatasetSpec,
    SceneDescription,
    label_of,
    sample_dataset_spec,
    sample_scene,
)
from ..scenegen.vocab import AttributeKey
from ..scenegen.io import (
    image_filename,
    load_png,
    read_json,
    read_scenes_jsonl,
    save_png,
    write_json,
    write_scenes_jsonl,
)
from ..scenegen.render import RenderConfig, render

SPLIT_NAMES = ("train", "val", "test")
SPLIT_ID_BASES = {"train": 0, "val": 100_000, "test": 200_000}
MATERIALIZE_LEVELS = ("spec", "scenes", "images")
MODEL_KINDS = ("oracle", "trained")


def derive_seed(seed: int, *tags: int) -> int:
    """A fresh 31-bit seed deterministically derived from (seed, tags)."""
    return int(np.random.default_rng([int(seed), *[int(t) for t in tags]]).integers(2**31 - 1))


@dataclass(frozen=True)
class EcSeeds:
    dataset: int
    blindspots: int
    scenes: int
    training: int
    bdm: int

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "blindspots": self.blindspots,
            "scenes": self.scenes,
            "training": self.training,
            "bdm": self.bdm,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EcSeeds":
        return cls(**{k: int(v) for k, v in obj.items()})

    @classmethod
    def draw(cls, rng: np.random.Generator) -> "EcSeeds":
        return cls(*(int(rng.integers(2**31 - 1)) for _ in range(5)))


@dataclass(frozen=True)
class SuiteConfig:
    count: int = 20
    model_kind: str = "oracle"
    m_range: tuple[int, int] = BLINDSPOT_COUNT_RANGE
    triplet_range: tuple[int, int] = TRIPLET_RANGE
    split_sizes: tuple[int, int, int] = (4000, 1000, 2000)
    materialize: str = "scenes"
    resolution: int = 64
    min_train_members: int = 20
    min_val_members: int = 3
    min_test_members: int = 5
    max_ec_attempts: int = 50
    # optional conditioned pool: blindspots constrain only these keys
    # (format "Layer.Attribute"); None keeps the unrestricted distribution
    key_pool: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if self.materialize not in MATERIALIZE_LEVELS:
            raise ConfigError(
                f"materialize must be one of {MATERIALIZE_LEVELS}, got {self.materialize!r}"
            )
        if self.count < 1:
            raise ConfigError(f"count must be positive, got {self.count}")
        lo, hi = self.m_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad m_range {self.m_range}")
        if len(self.split_sizes) != 3 or any(s < 1 for s in self.split_sizes):
            raise ConfigError(f"bad split_sizes {self.split_sizes}")
        if self.key_pool is not None:
            for name in self.key_pool:
                if name.count(".") != 1:
                    raise ConfigError(f"key_pool entries must be 'Layer.Attribute', got {name!r}")

    def pool_keys(self) -> tuple[AttributeKey, ...] | None:
        if self.key_pool is None:
            return None
        return tuple(AttributeKey(*name.split(".", 1)) for name in self.key_pool)

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "model_kind": self.model_kind,
            "m_range": list(self.m_range),
            "triplet_range": list(self.triplet_range),
            "split_sizes": list(self.split_sizes),
            "materialize": self.materialize,
            "resolution": self.resolution,
            "min_train_members": self.min_train_members,
            "min_val_members": self.min_val_members,
            "min_test_members": self.min_test_members,
            "max_ec_attempts": self.max_ec_attempts,
            "key_pool": list(self.key_pool) if self.key_pool is not None else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SuiteConfig":
        obj = dict(obj)
        for key in ("m_range", "triplet_range", "split_sizes"):
            if key in obj:
                obj[key] = tuple(obj[key])
        if obj.get("key_pool") is not None:
            obj["key_pool"] = tuple(obj["key_pool"])
        return cls(**obj)


@dataclass(frozen=True)
class ExperimentConfiguration:
    id: str
    spec: DatasetSpec
    blindspots: BlindspotSet
    split_sizes: tuple[int, int, int]
    seeds: EcSeeds
    model_kind: str
    materialize: str
    resolution: int
    attempt: int  # accepted derived-seed attempt (retries re-roll everything)
    verified: tuple[bool, ...] | None = None  # populated from disk, not part of the manifest

    @property
    def m(self) -> int:
        return len(self.blindspots.blindspots)

    def render_config(self) -> RenderConfig:
        return RenderConfig(resolution=self.resolution)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "spec": self.spec.to_json(),
            "blindspots": self.blindspots.to_json(),
            "split_sizes": list(self.split_sizes),
            "seeds": self.seeds.to_json(),
            "model_kind": self.model_kind,
            "materialize": self.materialize,
            "resolution": self.resolution,
            "attempt": self.attempt,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfiguration":
        return cls(
            id=obj["id"],
            spec=DatasetSpec.from_json(obj["spec"]),
            blindspots=BlindspotSet.from_json(obj["blindspots"]),
            split_sizes=tuple(obj["split_sizes"]),
            seeds=EcSeeds.from_json(obj["seeds"]),
            model_kind=obj["model_kind"],
            materialize=obj["materialize"],
            resolution=obj["resolution"],
            attempt=obj["attempt"],
        )


def sample_split_scenes(
    spec: DatasetSpec, n: int, seed: int, id_base: int, cfg: RenderConfig
) -> list[SceneDescription]:
    """Sample n scenes with ids counting up from id_base; ids whose object
    placement fails are skipped deterministically."""
    scenes: list[SceneDescription] = []
    for image_id in itertools.count(id_base):
        if len(scenes) == n:
            break
        try:
            scenes.append(sample_scene(spec, image_id=image_id, seed=seed, cfg=cfg))
        except PlacementFailure:
            continue
    return scenes


def truth_members(
    scenes: list[SceneDescription], bset: BlindspotSet
) -> list[list[int]]:
    """Per blindspot (in set order), the sorted image ids it extends to."""
    out = []
    for b in bset.blindspots:
        out.append(sorted(s.image_id for s in scenes if matches(b, s)))
    return out


def sample_ec(
    index: int, cfg: SuiteConfig, seeds: EcSeeds
) -> tuple[ExperimentConfiguration, dict[str, list[SceneDescription]] | None]:
    """Draw one EC's factors independently, retrying with derived seeds until
    the blindspot extensions clear the per-split member floors (floors apply
    only when scenes are materialized)."""
    render_cfg = RenderConfig(resolution=cfg.resolution)
    for attempt in range(cfg.max_ec_attempts):
        spec = sample_dataset_spec(derive_seed(seeds.dataset, attempt))
        m_rng = np.random.default_rng([seeds.blindspots, attempt, 0])
        m = int(m_rng.integers(cfg.m_range[0], cfg.m_range[1] + 1))
        try:
            bset = sample_blindspot_set(
                spec,
                m=m,
                seed=derive_seed(seeds.blindspots, attempt, 1),
                size_range=cfg.triplet_range,
                key_pool=cfg.pool_keys(),
            )
        except (InfeasibleSpec, GenerationExhausted):
            continue
        ec = ExperimentConfiguration(
            id=f"ec{index:04d}",
            spec=spec,
            blindspots=bset,
            split_sizes=tuple(cfg.split_sizes),
            seeds=seeds,
            model_kind=cfg.model_kind,
            materialize=cfg.materialize,
            resolution=cfg.resolution,
            attempt=attempt,
        )
        if cfg.materialize == "spec":
            return ec, None
        scenes = {
            split: sample_split_scenes(
                spec,
                cfg.split_sizes[i],
                derive_seed(seeds.scenes, attempt, i),
                SPLIT_ID_BASES[split],
                render_cfg,
            )
            for i, split in enumerate(SPLIT_NAMES)
        }
        floors = {
            "train": cfg.min_train_members,
            "val": cfg.min_val_members,
            "test": cfg.min_test_members,
        }
        ok = all(
            all(len(members) >= floors[split] for members in truth_members(scenes[split], bset))
            for split in SPLIT_NAMES
        )
        if ok:
            return ec, scenes
    raise GenerationExhausted(
        f"no viable EC for index {index} within {cfg.max_ec_attempts} derived-seed attempts"
    )


def ec_dir(suite_dir: Path, ec_id: str) -> Path:
    return Path(suite_dir) / ec_id


def persist_ec(
    suite_dir: Path,
    ec: ExperimentConfiguration,
    scenes: dict[str, list[SceneDescription]] | None,
) -> Path:
    directory = ec_dir(suite_dir, ec.id)
    directory.mkdir(parents=True, exist_ok=True)
    write_json(directory / "manifest.json", ec.to_json())
    if scenes is not None:
        for split in SPLIT_NAMES:
            write_scenes_jsonl(directory / "scenes" / f"{split}.jsonl", scenes[split])
            members = truth_members(scenes[split], ec.blindspots)
            write_json(
                directory / "truth" / f"{split}.json",
                {
                    "blindspots": [
                        {"id": b.id, "members": members[i]}
                        for i, b in enumerate(ec.blindspots.blindspots)
                    ]
                },
            )
        if ec.materialize == "images":
            render_cfg = ec.render_config()
            for split in SPLIT_NAMES:
                for scene in scenes[split]:
                    save_png(
                        render(scene, render_cfg),
                        directory / "images" / split / image_filename(scene.image_id),
                    )
    return directory


def generate_ec_suite(
    out_dir: Path, cfg: SuiteConfig, master_seed: int
) -> list[ExperimentConfiguration]:
    """Generate and persist cfg.count ECs under out_dir.

    Every factor of every EC derives from master_seed alone; regenerating
    into a fresh directory yields byte-identical manifests.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    master = np.random.default_rng(int(master_seed))
    ecs = []
    for index in range(cfg.count):
        seeds = EcSeeds.draw(master)
        ec, scenes = sample_ec(index, cfg, seeds)
        persist_ec(out_dir, ec, scenes)
        ecs.append(ec)
    write_json(
        out_dir / "suite.json",
        {
            "config": cfg.to_json(),
            "master_seed": int(master_seed),
            "ec_ids": [ec.id for ec in ecs],
        },
    )
    return ecs


def load_ec(directory: Path) -> ExperimentConfiguration:
    """Load and re-validate one EC; picks up verification flags if a model
    has been prepared."""
    directory = Path(directory)
    ec = ExperimentConfiguration.from_json(read_json(directory / "manifest.json"))
    validate_blindspot_set(ec.blindspots)
    induction_path = directory / "models" / "induction.json"
    if induction_path.exists():
        ec = replace(ec, verified=tuple(read_json(induction_path)["verified"]))
    return ec


def load_suite(suite_dir: Path) -> tuple[SuiteConfig, list[ExperimentConfiguration]]:
    suite_dir = Path(suite_dir)
    info = read_json(suite_dir / "suite.json")
    cfg = SuiteConfig.from_json(info["config"])
    return cfg, [load_ec(ec_dir(suite_dir, ec_id)) for ec_id in info["ec_ids"]]


def load_split_scenes(directory: Path, split: str) -> list[SceneDescription]:
    path = Path(directory) / "scenes" / f"{split}.jsonl"
    if not path.exists():
        raise SamplingError(
            f"{path} missing: EC was materialized at spec level; regenerate with "
            f"materialize=scenes or images"
        )
    return read_scenes_jsonl(path)


def load_truth(directory: Path, split: str) -> list[list[int]]:
    obj = read_json(Path(directory) / "truth" / f"{split}.json")
    return [entry["members"] for entry in obj["blindspots"]]


def split_images(
    directory: Path, ec: ExperimentConfiguration, scenes: list[SceneDescription], split: str
) -> np.ndarray:
    """The split's images as one (n, res, res, 3) uint8 stack, loaded from
    disk when materialized and rendered on the fly otherwise."""
    directory = Path(directory)
    if ec.materialize == "images":
        return np.stack(
            [
                load_png(directory / "images" / split / image_filename(s.image_id))
                for s in scenes
            ]
        )
    render_cfg = ec.render_config()
    return np.stack([render(s, render_cfg) for s in scenes])


def positive_scenes(scenes: list[SceneDescription]) -> list[SceneDescription]:
    return [s for s in scenes if label_of(s)]
