"""Global classifier configuration shared by every speaker model."""

from __future__ import annotations

import enum
from dataclasses import dataclass

CONTEXT_CHOICES = (1, 5, 11, 15)
WIDTH_CHOICES = (32, 64, 128, 256, 512)
ALPHA_CHOICES = (0.001, 0.003, 0.01)
PCA_VARIANCE_FRACTION = 0.95


class FeatureSet(enum.Enum):
    MFCC = "mfcc"
    MFCC_DELTA = "mfcc_delta"
    EGEMAPS = "egemaps"


@dataclass(frozen=True)
class GlobalConfig:
    feature_set: FeatureSet = FeatureSet.MFCC_DELTA
    use_pca: bool = True
    context: int = 11
    hidden: tuple[int, ...] = (512, 128)
    learning_rate: float = 0.003

    def __post_init__(self):
        if self.context < 1 or self.context % 2 == 0:
            raise ValueError("context must be odd and positive")
        if not 1 <= len(self.hidden) <= 3:
            raise ValueError("hidden layer count must be 1..3")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")

    def describe(self) -> str:
        pca = "pca" if self.use_pca else "raw"
        arch = "-".join(str(w) for w in self.hidden)
        return f"{self.feature_set.value}+{pca} ctx={self.context} arch={arch} lr={self.learning_rate}"

    def to_dict(self) -> dict:
        return {
            "feature_set": self.feature_set.value,
            "use_pca": self.use_pca,
            "context": self.context,
            "hidden": list(self.hidden),
            "learning_rate": self.learning_rate,
        }

    @staticmethod
    def from_dict(payload: dict) -> "GlobalConfig":
        return GlobalConfig(
            FeatureSet(payload["feature_set"]),
            bool(payload["use_pca"]),
            int(payload["context"]),
            tuple(int(w) for w in payload["hidden"]),
            float(payload["learning_rate"]),
        )


# The six known-good configurations, one per feature set and PCA setting.
REFERENCE_CONFIGS = (
    GlobalConfig(FeatureSet.MFCC, False, 15, (512, 128), 0.003),
    GlobalConfig(FeatureSet.MFCC_DELTA, False, 15, (512, 128), 0.01),
    GlobalConfig(FeatureSet.EGEMAPS, False, 15, (128, 64), 0.001),
    GlobalConfig(FeatureSet.MFCC, True, 15, (256, 128, 32), 0.01),
    GlobalConfig(FeatureSet.MFCC_DELTA, True, 11, (512, 128), 0.003),
    GlobalConfig(FeatureSet.EGEMAPS, True, 15, (512, 128), 0.003),
)

DEFAULT_CONFIG = REFERENCE_CONFIGS[4]


def architecture_choices() -> list[tuple[int, ...]]:
    """1-3 hidden layers with non-increasing widths from WIDTH_CHOICES."""
    archs: list[tuple[int, ...]] = [(w,) for w in WIDTH_CHOICES]
    archs += [
        (w1, w2) for w1 in WIDTH_CHOICES for w2 in WIDTH_CHOICES if w2 <= w1
    ]
    archs += [
        (w1, w2, w3)
        for w1 in WIDTH_CHOICES
        for w2 in WIDTH_CHOICES
        for w3 in WIDTH_CHOICES
        if w3 <= w2 <= w1
    ]
    return archs


def full_search_space() -> list[GlobalConfig]:
    """The complete grid; large, so most runs restrict it."""
    return [
        GlobalConfig(fs, pca, ctx, arch, lr)
        for fs in FeatureSet
        for pca in (False, True)
        for ctx in CONTEXT_CHOICES
        for arch in architecture_choices()
        for lr in ALPHA_CHOICES
    ]
