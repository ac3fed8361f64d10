"""Feature-matrix container and configuration types."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class FeatureKind(enum.Enum):
    MFCC13 = "MFCC13"
    MFCC26 = "MFCC26"
    EGEMAPS23 = "EGEMAPS23"
    STACKED = "STACKED"
    PCA_PROJECTED = "PCA_PROJECTED"


@dataclass(eq=False)
class FeatureMatrix:
    """Frames-by-coefficients matrix with a kind tag and transform history."""

    values: np.ndarray
    kind: FeatureKind
    frame_period_ms: float = 10.0
    history: tuple[str, ...] = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature values must be a 2-D (frames x dim) matrix")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def derived(self, values: np.ndarray, kind: FeatureKind, step: str) -> "FeatureMatrix":
        return FeatureMatrix(values, kind, self.frame_period_ms, self.history + (step,))


@dataclass(frozen=True)
class MfccConfig:
    num_ceps: int = 13
    num_filters: int = 26
    frame_ms: float = 25.0
    shift_ms: float = 10.0
    pre_emphasis: float = 0.97
    use_c0: bool = True
    lifter: int = 0
    low_hz: float = 0.0
    high_hz: float = 8000.0

    def __post_init__(self):
        if self.num_ceps > self.num_filters:
            raise ValueError("num_ceps must not exceed num_filters")
