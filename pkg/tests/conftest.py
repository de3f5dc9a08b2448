import numpy as np
import pytest

from configadapt.detector.config import DetectorConfig
from configadapt.simworld.dataset import generate_dataset
from configadapt.simworld.rigs import make_rig
from configadapt.simworld.types import SceneSpec


def tiny_detector() -> DetectorConfig:
    """Small model + small grid, for tests that only exercise mechanics."""
    return DetectorConfig(range_half_extent=9.6, pillar_size=0.6,
                          c_encoder=4, c_stage1=8, c_stage2=8, c_neck=8,
                          max_pillars=1024)


@pytest.fixture(scope="session")
def tiny_cfg() -> DetectorConfig:
    return tiny_detector()


@pytest.fixture(scope="session")
def tiny_data(tmp_path_factory):
    """Two very small labeled datasets (one per rig) shared across tests."""
    root = tmp_path_factory.mktemp("tiny_data")
    from configadapt.simworld.types import ObjectClass
    spec = SceneSpec(area_half_extent=12.0, count_ranges={
        ObjectClass.Car: (1, 3),
        ObjectClass.Bicycle: (0, 2),
        ObjectClass.Pedestrian: (1, 2),
    })
    taxi = generate_dataset(make_rig("taxisim", azimuth_steps=90), spec, 6,
                            "train", 11, root / "taxi")
    bus = generate_dataset(make_rig("bussim", azimuth_steps=90), spec, 4,
                           "train", 11, root / "bus")
    return {"taxi": taxi, "bus": bus}


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
