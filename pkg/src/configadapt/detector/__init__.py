from .config import DetectorConfig, make_teacher
from .decode import Detection, decode
from .losses import detection_loss
from .model import Detector, HeadOutput, N_CLASSES, N_REG
from .pillars import PillarGrid, pillarize
from .targets import Targets, build_targets, gaussian_radius_cells
