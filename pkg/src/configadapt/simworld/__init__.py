from .dataset import generate_dataset, load_all_frames, load_frame, load_manifest, make_frame, stable_hash
from .raycast import mount_directions, raycast
from .rigs import bussim, make_rig, taxisim
from .scene import footprints_overlap, sample_scene
from .types import (
    CLASS_NAMES,
    CLASS_SIZE_MEANS,
    Box3D,
    Frame,
    LidarMount,
    ObjectClass,
    SceneSpec,
    SensorRig,
    normalize_yaw,
)
