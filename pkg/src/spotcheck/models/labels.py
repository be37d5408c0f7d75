"""Blindspot induction by label flipping, and its verification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..blindspots import BlindspotSet, matches
from ..scenegen.dataset import SceneDescription, label_of

TEST_TAG = "test"


@dataclass(frozen=True)
class LabeledSplit:
    tag: str
    image_ids: tuple[int, ...]
    clean_labels: np.ndarray
    training_labels: np.ndarray

    def __post_init__(self):
        if not (len(self.image_ids) == len(self.clean_labels) == len(self.training_labels)):
            raise ValueError("split arrays must align")
        if self.tag == TEST_TAG and not np.array_equal(self.clean_labels, self.training_labels):
            raise ValueError("test labels must stay clean")


def membership_matrix(scenes: list[SceneDescription], bset: BlindspotSet) -> np.ndarray:
    """(n, M) boolean matrix: scene i belongs to blindspot m."""
    out = np.zeros((len(scenes), len(bset.blindspots)), dtype=bool)
    for i, scene in enumerate(scenes):
        for m, b in enumerate(bset.blindspots):
            out[i, m] = matches(b, scene)
    return out


def induce_labels(scenes: list[SceneDescription], bset: BlindspotSet, tag: str) -> LabeledSplit:
    """Training label = clean label XOR (scene belongs to any blindspot) for
    train/val splits; test labels are never flipped."""
    clean = np.array([label_of(s) for s in scenes], dtype=bool)
    if tag == TEST_TAG:
        flipped = clean.copy()
    else:
        in_any = membership_matrix(scenes, bset).any(axis=1)
        flipped = clean ^ in_any
    return LabeledSplit(
        tag=tag,
        image_ids=tuple(s.image_id for s in scenes),
        clean_labels=clean,
        training_labels=flipped,
    )


@dataclass(frozen=True)
class VerifyThresholds:
    mode: str = "synthetic"  # or "real"
    accuracy_outside: float = 0.97
    accuracy_inside: float = 0.05
    recall_gap: float = 0.20


@dataclass(frozen=True)
class InductionReport:
    mode: str
    accuracy_outside: float
    accuracy_inside: tuple[float, ...]
    recall_outside: float
    recall_inside: tuple[float, ...]
    verified: tuple[bool, ...]

    @property
    def all_verified(self) -> bool:
        return all(self.verified)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "accuracy_outside": self.accuracy_outside,
            "accuracy_inside": list(self.accuracy_inside),
            "recall_outside": self.recall_outside,
            "recall_inside": list(self.recall_inside),
            "verified": list(self.verified),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "InductionReport":
        return cls(
            mode=obj["mode"],
            accuracy_outside=obj["accuracy_outside"],
            accuracy_inside=tuple(obj["accuracy_inside"]),
            recall_outside=obj["recall_outside"],
            recall_inside=tuple(obj["recall_inside"]),
            verified=tuple(obj["verified"]),
        )


def _mean_or_nan(values: np.ndarray) -> float:
    return float(values.mean()) if values.size else float("nan")


def verify_induction(
    confidences: np.ndarray,
    clean_labels: np.ndarray,
    membership: np.ndarray,
    thresholds: VerifyThresholds = VerifyThresholds(),
) -> InductionReport:
    """Checks that a model learned exactly the induced blindspots, from its
    confidences on a clean-labeled validation split.

    Synthetic mode: clean-label accuracy outside all blindspots must reach
    accuracy_outside and accuracy inside each blindspot must stay below
    accuracy_inside. Real-data mode: the recall gap between positives outside
    and inside each blindspot must reach recall_gap.
    """
    preds = np.asarray(confidences) >= 0.5
    clean = np.asarray(clean_labels, dtype=bool)
    correct = preds == clean
    outside = ~membership.any(axis=1)
    acc_out = _mean_or_nan(correct[outside])
    rec_out = _mean_or_nan(correct[outside & clean])

    acc_in, rec_in, verified = [], [], []
    for m in range(membership.shape[1]):
        inside = membership[:, m]
        a = _mean_or_nan(correct[inside])
        r = _mean_or_nan(correct[inside & clean])
        acc_in.append(a)
        rec_in.append(r)
        if thresholds.mode == "real":
            ok = np.isfinite(rec_out) and np.isfinite(r) and (
                rec_out - r >= thresholds.recall_gap
            )
        else:
            ok = (
                np.isfinite(acc_out)
                and np.isfinite(a)
                and acc_out >= thresholds.accuracy_outside
                and a <= thresholds.accuracy_inside
            )
        verified.append(bool(ok))

    return InductionReport(
        mode=thresholds.mode,
        accuracy_outside=acc_out,
        accuracy_inside=tuple(acc_in),
        recall_outside=rec_out,
        recall_inside=tuple(rec_in),
        verified=tuple(verified),
    )
