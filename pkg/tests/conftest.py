import numpy as np
import pytest

from spotcheck.blindspots import BlindspotSet, BlindspotSpec
from spotcheck.scenegen.dataset import DatasetSpec, sample_scene
from spotcheck.scenegen.render import RenderConfig, render
from spotcheck.scenegen.vocab import AttributeKey, Triplet


@pytest.fixture(scope="session")
def desk_cfg():
    return RenderConfig(resolution=64)


@pytest.fixture(scope="session")
def small_spec():
    """A fixed spec with seven rollable keys over three layers."""
    return DatasetSpec(
        layers=("Background", "Square", "Circle"),
        rollable=(
            AttributeKey("Background", "Color"),
            AttributeKey("Background", "Texture"),
            AttributeKey("Square", "Presence"),
            AttributeKey("Square", "Size"),
            AttributeKey("Square", "Color"),
            AttributeKey("Square", "Texture"),
            AttributeKey("Circle", "Presence"),
        ),
        seed=0,
    )


@pytest.fixture(scope="session")
def small_bset(small_spec):
    """One fixed five-triplet blindspot on the small spec."""
    b = BlindspotSpec(
        id=0,
        triplets=(
            Triplet("Square", "Presence", True),
            Triplet("Background", "Color", "Grey"),
            Triplet("Background", "Texture", "Solid"),
            Triplet("Square", "Color", "Blue"),
            Triplet("Square", "Texture", "Solid"),
        ),
    )
    return BlindspotSet(blindspots=(b,), dataset=small_spec)


def make_scenes(spec, n, seed, cfg, id_base=0):
    """n scenes, skipping ids whose placement fails."""
    from spotcheck.errors import PlacementFailure

    scenes = []
    image_id = id_base
    while len(scenes) < n:
        try:
            scenes.append(sample_scene(spec, image_id=image_id, seed=seed, cfg=cfg))
        except PlacementFailure:
            pass
        image_id += 1
    return scenes


@pytest.fixture(scope="session")
def small_scenes(small_spec, desk_cfg):
    return make_scenes(small_spec, 200, seed=7, cfg=desk_cfg)


@pytest.fixture(scope="session")
def small_images(small_scenes, desk_cfg):
    return np.stack([render(s, desk_cfg) for s in small_scenes])
