"""Image and manifest serialization for generated datasets."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import SceneDescription, label_of


def canonical_json(obj) -> str:
    """Stable serialization: sorted keys, fixed separators, no whitespace
    drift. Used wherever byte-identical re-runs are promised."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path: Path, obj, pretty: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if pretty:
        text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
    else:
        text = canonical_json(obj) + "\n"
    path.write_text(text)


def read_json(path: Path):
    return json.loads(Path(path).read_text())


def save_png(img: np.ndarray, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) uint8 RGB buffer")
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


def load_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def buffer_digest(img: np.ndarray) -> str:
    """Hash of the raw pixel buffer (render determinism is promised on the
    buffer; PNG bytes additionally depend on the codec build)."""
    h = hashlib.sha256()
    h.update(str(img.shape).encode())
    h.update(np.ascontiguousarray(img).tobytes())
    return h.hexdigest()


def image_filename(image_id: int) -> str:
    return f"img_{image_id:06d}.png"


def write_dataset_manifest(path: Path, scenes: list[SceneDescription], files: dict[int, str]) -> None:
    """Per-dataset manifest: image_id -> file, triplet list, label."""
    entries = []
    for scene in sorted(scenes, key=lambda s: s.image_id):
        entries.append(
            {
                "image_id": scene.image_id,
                "file": files[scene.image_id],
                "label": label_of(scene),
                "triplets": [
                    {"layer": t.layer, "attribute": t.attribute, "value": t.value}
                    for t in scene.triplets
                ],
            }
        )
    write_json(path, {"images": entries})


def write_scenes_jsonl(path: Path, scenes: list[SceneDescription]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for scene in sorted(scenes, key=lambda s: s.image_id):
            fh.write(canonical_json(scene.to_json()) + "\n")


def read_scenes_jsonl(path: Path) -> list[SceneDescription]:
    scenes = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                scenes.append(SceneDescription.from_json(json.loads(line)))
    return scenes
