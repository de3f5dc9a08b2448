"""Detection loss: penalty-reduced focal on the heatmap + L1 at center cells."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ShapeMismatch
from ..numcore import tensor as T
from ..numcore.tensor import Tensor
from .model import HeadOutput
from .targets import Targets

FOCAL_ALPHA = 2.0
FOCAL_BETA = 4.0
REG_WEIGHT = 0.25


def detection_loss(pred: HeadOutput, targets: list[Targets]) -> Tensor:
    """Scalar loss for a batch; targets align with the batch axis of pred."""
    hm_t = np.stack([t.heatmap for t in targets])
    reg_t = np.stack([t.regression for t in targets])
    mask = np.stack([t.center_mask for t in targets])[:, None]  # (N, 1, Hg, Hg)
    if pred.heatmap.shape != hm_t.shape or pred.regression.shape != reg_t.shape:
        raise ShapeMismatch(
            f"loss shapes: pred {pred.heatmap.shape}/{pred.regression.shape} "
            f"vs targets {hm_t.shape}/{reg_t.shape}")
    focal = T.focal_heatmap_loss(pred.heatmap, hm_t, FOCAL_ALPHA, FOCAL_BETA)
    reg = T.l1_loss_at(pred.regression, reg_t, mask)
    loss = T.add(focal, T.scale(reg, REG_WEIGHT))
    if not np.isfinite(loss.data).all():
        raise NumericError("non-finite detection loss")
    return loss
