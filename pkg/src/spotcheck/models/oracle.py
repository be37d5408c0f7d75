"""A deterministic stand-in model built directly from ground truth.

Its representation encodes each scene's rollable values as +/-1 coordinates
(plus the raw square-position value) with optional Gaussian jitter, and its
confidence is (1 - epsilon) when the model would be right and epsilon when
it would be wrong, where "wrong" means the scene belongs to an induced
blindspot. This gives fast, exact end-to-end tests of discovery methods
and metrics without any training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..blindspots import BlindspotSet, matches
from ..scenegen import vocab
from ..scenegen.dataset import DatasetSpec, SceneDescription, label_of
from ..scenegen.vocab import RELATIVE_POSITION
from .outputs import ModelOutputs


@dataclass(frozen=True)
class OracleConfig:
    epsilon: float = 0.0
    jitter: float = 0.05
    confidence_noise: float = 0.0

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "jitter": self.jitter,
            "confidence_noise": self.confidence_noise,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "OracleConfig":
        return cls(**obj)


class OracleModel:
    """Representation and confidence computed per image from its triplets,
    so row order never affects row contents."""

    def __init__(self, spec: DatasetSpec, bset: BlindspotSet, cfg: OracleConfig, seed: int):
        self.spec = spec
        self.bset = bset
        self.cfg = cfg
        self.seed = int(seed)

    @property
    def rep_dim(self) -> int:
        return len(self.spec.rollable) + 1

    def _represent_one(self, scene: SceneDescription) -> np.ndarray:
        coords = []
        for key in self.spec.rollable:
            _, alternative = vocab.values_of(key)
            coords.append(1.0 if scene.value(*key) == alternative else -1.0)
        coords.append(float(scene.value(*RELATIVE_POSITION)))
        rep = np.array(coords, dtype=np.float64)
        if self.cfg.jitter > 0:
            rng = np.random.default_rng([self.seed, scene.image_id, 3])
            rep = rep + self.cfg.jitter * rng.standard_normal(rep.shape)
        return rep

    def _confidence_one(self, scene: SceneDescription) -> float:
        label = label_of(scene)
        inside = any(matches(b, scene) for b in self.bset.blindspots)
        correct_prob = self.cfg.epsilon if inside else 1.0 - self.cfg.epsilon
        conf = correct_prob if label else 1.0 - correct_prob
        if self.cfg.confidence_noise > 0:
            rng = np.random.default_rng([self.seed, scene.image_id, 5])
            conf += self.cfg.confidence_noise * float(rng.standard_normal())
        return float(min(1.0, max(0.0, conf)))

    def outputs(self, scenes: list[SceneDescription]) -> ModelOutputs:
        reps = np.stack([self._represent_one(s) for s in scenes])
        confs = np.array([self._confidence_one(s) for s in scenes])
        return ModelOutputs(
            image_ids=tuple(s.image_id for s in scenes),
            representations=reps,
            confidences=confs,
        )
