from .ablation import ALL_MASKS, TABLE3_MASKS, ablation_grid, mask_label
from .infer import evaluate_checkpoint, load_model, predict_dataset
from .plan import ExperimentPlan, run_plan
from .pseudo import DEFAULT_PSEUDO_THRESHOLD, generate_pseudo_labels, uda_finetune
from .stages import (
    DEFAULT_FT_MASK,
    StageSpec,
    downstream_finetune,
    subsample_indices,
    train_stage,
)
