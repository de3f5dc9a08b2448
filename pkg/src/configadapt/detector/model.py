"""Pillar-BEV detector with the four-module decomposition.

encoder:  per-point linear 7->C_e + ReLU, per-pillar max pool, scatter to a
          dense BEV image.
backbone: two stages of (stride-2 conv + 2 convs), 3x3 kernels, bias + ReLU.
neck:     nearest upsample of stage2 to stage1 resolution, channel concat,
          1x1 fuse conv.
head:     1x1 convs to a 5-class center heatmap (sigmoid) and 8 regression
          channels (dx, dy, z, log l, log w, log h, sin yaw, cos yaw).

Every parameter name carries exactly one module prefix so freeze masks and
checkpoint drift analysis can categorize by name.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..numcore import tensor as T
from ..numcore.tensor import Tensor, parameter
from .config import DetectorConfig
from .pillars import N_POINT_FEATURES, PillarGrid

N_CLASSES = 5
N_REG = 8

# sigmoid(-2.1972) ~= 0.1: start with a quiet heatmap
HEATMAP_BIAS_INIT = -2.1972245773362196


@dataclass
class HeadOutput:
    """heatmap: (N, 5, Hg, Hg) probabilities; regression: (N, 8, Hg, Hg)."""

    heatmap: Union[Tensor, np.ndarray]
    regression: Union[Tensor, np.ndarray]

    def numpy(self) -> "HeadOutput":
        hm = self.heatmap.data if isinstance(self.heatmap, Tensor) else self.heatmap
        rg = self.regression.data if isinstance(self.regression, Tensor) else self.regression
        return HeadOutput(heatmap=np.asarray(hm), regression=np.asarray(rg))


class Detector:
    def __init__(self, cfg: DetectorConfig, seed: int = 0, dtype=np.float32,
                 params: dict[str, np.ndarray] | None = None):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Tensor] = {}
        if params is None:
            self._init_params(np.random.default_rng(seed))
        else:
            for name, arr in params.items():
                self.params[name] = parameter(np.asarray(arr, dtype=self.dtype), name)

    # ---- parameter construction ----

    def _add(self, name: str, arr: np.ndarray) -> None:
        self.params[name] = parameter(arr.astype(self.dtype), name)

    def _conv_init(self, rng, cout, cin, k) -> np.ndarray:
        fan_in = cin * k * k
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(cout, cin, k, k))

    def _init_params(self, rng: np.random.Generator) -> None:
        c = self.cfg
        self._add("encoder.linear.weight",
                  rng.normal(0.0, np.sqrt(2.0 / N_POINT_FEATURES),
                             size=(N_POINT_FEATURES, c.c_encoder)))
        self._add("encoder.linear.bias", np.zeros(c.c_encoder))
        stages = [("stage1", c.c_encoder, c.c_stage1), ("stage2", c.c_stage1, c.c_stage2)]
        for stage, cin, cout in stages:
            self._add(f"backbone.{stage}.conv0.weight", self._conv_init(rng, cout, cin, 3))
            self._add(f"backbone.{stage}.conv0.bias", np.zeros(cout))
            for i in (1, 2):
                self._add(f"backbone.{stage}.conv{i}.weight",
                          self._conv_init(rng, cout, cout, 3))
                self._add(f"backbone.{stage}.conv{i}.bias", np.zeros(cout))
        self._add("neck.fuse.weight",
                  self._conv_init(rng, c.c_neck, c.c_stage1 + c.c_stage2, 1))
        self._add("neck.fuse.bias", np.zeros(c.c_neck))
        self._add("head.heatmap.weight", self._conv_init(rng, N_CLASSES, c.c_neck, 1))
        self._add("head.heatmap.bias", np.full(N_CLASSES, HEATMAP_BIAS_INIT))
        self._add("head.reg.weight", self._conv_init(rng, N_REG, c.c_neck, 1))
        self._add("head.reg.bias", np.zeros(N_REG))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, arr in state.items():
            self.params[name].data = np.asarray(arr, dtype=self.dtype).reshape(
                self.params[name].shape).copy()

    def set_trainable(self, trainable_modules) -> None:
        from ..numcore.optim import module_of
        for name, p in self.params.items():
            p.requires_grad = module_of(name) in trainable_modules
            p.grad = None

    # ---- forward ----

    def _encode_frame(self, grid: PillarGrid) -> Tensor:
        c = self.cfg
        if grid.n_pillars == 0:
            return Tensor(np.zeros((c.c_encoder, c.grid, c.grid), dtype=self.dtype))
        p, k, _ = grid.features.shape
        x = Tensor(grid.features.reshape(p * k, N_POINT_FEATURES).astype(self.dtype))
        h = T.relu(T.add_bias(T.matmul(x, self.params["encoder.linear.weight"]),
                              self.params["encoder.linear.bias"]))
        h = T.reshape(h, (p, k, c.c_encoder))
        pooled = T.max_pool_over_points(h, grid.valid)
        return T.scatter_to_grid(pooled, grid.ix, grid.iy, c.grid)

    def _conv_block(self, x: Tensor, name: str, stride: int) -> Tensor:
        y = T.conv2d(x, self.params[f"{name}.weight"], stride=stride,
                     pad=self.params[f"{name}.weight"].shape[2] // 2)
        return T.relu(T.add_bias(y, self.params[f"{name}.bias"], channel_axis=1))

    def forward(self, grids: list[PillarGrid]) -> HeadOutput:
        bev = T.stack([self._encode_frame(g) for g in grids])
        s1 = self._conv_block(bev, "backbone.stage1.conv0", 2)
        s1 = self._conv_block(s1, "backbone.stage1.conv1", 1)
        s1 = self._conv_block(s1, "backbone.stage1.conv2", 1)
        s2 = self._conv_block(s1, "backbone.stage2.conv0", 2)
        s2 = self._conv_block(s2, "backbone.stage2.conv1", 1)
        s2 = self._conv_block(s2, "backbone.stage2.conv2", 1)
        fused = T.concat_channels(s1, T.upsample2x_nearest(s2))
        neck = self._conv_block(fused, "neck.fuse", 1)
        hm = T.sigmoid(T.add_bias(
            T.conv2d(neck, self.params["head.heatmap.weight"]),
            self.params["head.heatmap.bias"], channel_axis=1))
        reg = T.add_bias(T.conv2d(neck, self.params["head.reg.weight"]),
                         self.params["head.reg.bias"], channel_axis=1)
        return HeadOutput(heatmap=hm, regression=reg)
