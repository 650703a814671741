"""Configuration and trainable tensors of the multi-label text CNN."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class CnnConfig:
    kernel: int = 2  # convolution window, in tokens
    filters: int = 100
    dim: int = 300  # embedding dimensionality
    labels: int = 8
    learning_rate: float = 1e-3
    threshold: float = 0.5  # probability cut for predicting a label
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 5  # epochs without dev improvement before stopping
    seed: int = 1
    max_len: int = 1000  # tokens kept per document at encoding time

    def __post_init__(self):
        if self.kernel < 1:
            raise ValueError(f"kernel must be >= 1, got {self.kernel}")
        if self.filters < 1:
            raise ValueError(f"filters must be >= 1, got {self.filters}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        # learning_rate 0 is allowed (a no-op optimizer is a useful control);
        # negative rates are not.
        if self.learning_rate < 0:
            raise ValueError(f"learning rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 0:
            raise ValueError("batch_size/max_epochs must be >= 1, patience >= 0")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")

    def with_values(self, **kwargs) -> "CnnConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "filters": self.filters,
            "dim": self.dim,
            "labels": self.labels,
            "learning_rate": self.learning_rate,
            "threshold": self.threshold,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CnnConfig":
        return cls(**data)


@dataclass
class CnnParams:
    """All trainable tensors; embeddings are frozen and live elsewhere."""

    conv_w: np.ndarray  # (filters, kernel, dim)
    conv_b: np.ndarray  # (filters,)
    out_w: np.ndarray  # (labels, filters)
    out_b: np.ndarray  # (labels,)

    def __post_init__(self):
        f, k, d = self.conv_w.shape
        if self.conv_b.shape != (f,):
            raise ValueError("conv bias shape mismatch")
        if self.out_w.shape[1] != f or self.out_b.shape != (self.out_w.shape[0],):
            raise ValueError("output layer shape mismatch")

    @property
    def kernel(self) -> int:
        return self.conv_w.shape[1]

    @property
    def dim(self) -> int:
        return self.conv_w.shape[2]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "conv_w": self.conv_w,
            "conv_b": self.conv_b,
            "out_w": self.out_w,
            "out_b": self.out_b,
        }

    def copy(self) -> "CnnParams":
        return CnnParams(
            conv_w=self.conv_w.copy(),
            conv_b=self.conv_b.copy(),
            out_w=self.out_w.copy(),
            out_b=self.out_b.copy(),
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors().values())


INIT_SCALE = 0.05


def init_params(config: CnnConfig, rng: np.random.Generator) -> CnnParams:
    """Seeded uniform(-0.05, 0.05) initialization of every tensor."""
    u = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
    return CnnParams(
        conv_w=u(config.filters, config.kernel, config.dim),
        conv_b=u(config.filters),
        out_w=u(config.labels, config.filters),
        out_b=u(config.labels),
    )


@dataclass
class TrainHistory:
    """Per-epoch trace of one training run."""

    train_loss: list[float] = field(default_factory=list)
    dev_f1: list[float] = field(default_factory=list)
    chosen_epoch: int = 0  # 1-based; earliest argmax of dev F1
    wall_time: float = 0.0
    backend: str = ""

    def epochs_run(self) -> int:
        return len(self.train_loss)
