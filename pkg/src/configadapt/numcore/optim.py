"""Adam optimizer with per-module freeze masks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

MODULE_TAGS = ("encoder", "backbone", "neck", "head")


def module_of(name: str) -> str:
    """Module tag of a parameter name ('backbone.stage1.conv0.weight' -> 'backbone')."""
    for tag in MODULE_TAGS:
        if name.startswith(tag + "."):
            return tag
    return "uncategorized"


@dataclass(frozen=True)
class FreezeMask:
    """The subset of model modules that remains trainable in a stage."""

    trainable: frozenset = frozenset(MODULE_TAGS)

    def __post_init__(self):
        unknown = set(self.trainable) - set(MODULE_TAGS)
        if unknown:
            raise ValueError(f"unknown module tags: {sorted(unknown)}")
        object.__setattr__(self, "trainable", frozenset(self.trainable))

    @classmethod
    def from_csv(cls, text: str) -> "FreezeMask":
        parts = [p.strip() for p in text.split(",") if p.strip()]
        return cls(frozenset(parts))

    def allows(self, param_name: str) -> bool:
        return module_of(param_name) in self.trainable

    def to_list(self) -> list[str]:
        return [t for t in MODULE_TAGS if t in self.trainable]


@dataclass
class Adam:
    """Adam over the trainable subset of a named parameter dict.

    Moments exist only for trainable parameters; frozen parameters are never
    touched, so their bytes are identical before and after any number of steps.
    """

    params: dict[str, Tensor]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.params = {k: p for k, p in self.params.items() if p.requires_grad}
        for k, p in self.params.items():
            self.m[k] = np.zeros(p.shape, dtype=np.float64)
            self.v[k] = np.zeros(p.shape, dtype=np.float64)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for k in self.params:  # insertion order: deterministic
            p = self.params[k]
            if p.grad is None:
                continue
            g = p.grad.astype(np.float64)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            update = self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
            p.data = (p.data.astype(np.float64) - update).astype(p.data.dtype)
