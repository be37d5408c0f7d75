"""Model outputs for a split: per-image confidence and representation.

This is the interface between models and discovery methods. Outputs round
trip through CSV so externally computed confidences and representations
can be scored with the same pipeline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, ImportFormatError


@dataclass(frozen=True)
class ModelOutputs:
    image_ids: tuple[int, ...]
    representations: np.ndarray  # (n, d) float64
    confidences: np.ndarray  # (n,) float64 in [0, 1]

    def __post_init__(self):
        n = len(self.image_ids)
        if self.representations.shape[0] != n or self.confidences.shape != (n,):
            raise DimensionMismatch(
                f"outputs misaligned: {n} ids, representations "
                f"{self.representations.shape}, confidences {self.confidences.shape}"
            )

    def __len__(self) -> int:
        return len(self.image_ids)

    def subset(self, mask: np.ndarray) -> "ModelOutputs":
        idx = np.flatnonzero(mask)
        return ModelOutputs(
            image_ids=tuple(self.image_ids[i] for i in idx),
            representations=self.representations[idx],
            confidences=self.confidences[idx],
        )

    @property
    def errors(self) -> np.ndarray:
        """Predicted-wrong mask: confidence in the true label below 0.5."""
        return self.confidences < 0.5


def write_outputs_csv(path: str | Path, outputs: ModelOutputs) -> None:
    d = outputs.representations.shape[1]
    header = ["image_id", "confidence"] + [f"r{j}" for j in range(d)]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i, image_id in enumerate(outputs.image_ids):
            row = [str(image_id), repr(float(outputs.confidences[i]))]
            row += [repr(float(v)) for v in outputs.representations[i]]
            writer.writerow(row)


def read_outputs_csv(path: str | Path) -> ModelOutputs:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ImportFormatError(f"{path}: empty outputs file") from None
        if header[:2] != ["image_id", "confidence"]:
            raise ImportFormatError(
                f"{path}: expected header starting with image_id, confidence; got {header[:2]}"
            )
        d = len(header) - 2
        expected_rep_cols = [f"r{j}" for j in range(d)]
        if header[2:] != expected_rep_cols:
            raise ImportFormatError(f"{path}: representation columns must be r0..r{d - 1}")
        ids: list[int] = []
        confs: list[float] = []
        reps: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 2 + d:
                raise ImportFormatError(f"{path}:{line_no}: expected {2 + d} fields, got {len(row)}")
            try:
                ids.append(int(row[0]))
                confs.append(float(row[1]))
                reps.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise ImportFormatError(f"{path}:{line_no}: {exc}") from None
    if not ids:
        raise ImportFormatError(f"{path}: no output rows")
    return ModelOutputs(
        image_ids=tuple(ids),
        representations=np.array(reps, dtype=np.float64),
        confidences=np.array(confs, dtype=np.float64),
    )
