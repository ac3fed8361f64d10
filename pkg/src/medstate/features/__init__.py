"""Acoustic feature pipelines and input-preparation transforms."""

from .cache import load_features, save_features
from .lld import DEFAULT_LLD_NAMES, EXTENDED_LLD_NAMES, egemaps_lld, track_pitch
from .mfcc import mel_filterbank, mfcc
from .pca import PcaModel, apply_pca, fit_pca, load_pca, save_pca
from .transforms import delta, stack_context, znorm_per_file
from .types import FeatureKind, FeatureMatrix, MfccConfig

__all__ = [
    "DEFAULT_LLD_NAMES",
    "EXTENDED_LLD_NAMES",
    "FeatureKind",
    "FeatureMatrix",
    "MfccConfig",
    "PcaModel",
    "apply_pca",
    "delta",
    "egemaps_lld",
    "fit_pca",
    "load_features",
    "load_pca",
    "mel_filterbank",
    "mfcc",
    "save_features",
    "save_pca",
    "stack_context",
    "track_pitch",
    "znorm_per_file",
]
