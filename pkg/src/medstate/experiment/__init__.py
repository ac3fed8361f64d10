"""Experimental protocol: partitioning, grid search, banks, reports."""

from .bank import SpeakerModelBank, load_bank, save_bank, train_speaker_bank
from .config import (
    DEFAULT_CONFIG,
    REFERENCE_CONFIGS,
    FeatureSet,
    GlobalConfig,
    full_search_space,
)
from .manifest import (
    DEFAULT_SPLIT,
    CorpusManifest,
    ManifestEntry,
    SplitPlan,
    load_manifest,
    partition,
    save_manifest,
)
from .pipeline import (
    FeatureRepository,
    extract_stage,
    filter_stage,
    load_filter_models,
    save_filter_models,
    segment_stage,
    train_therapist_filter,
)
from .report import EvaluationReport, evaluate, render_text, save_report
from .search import GridCell, cells_to_dict, grid_search

__all__ = [
    "DEFAULT_CONFIG",
    "DEFAULT_SPLIT",
    "REFERENCE_CONFIGS",
    "CorpusManifest",
    "EvaluationReport",
    "FeatureRepository",
    "FeatureSet",
    "GlobalConfig",
    "GridCell",
    "ManifestEntry",
    "SpeakerModelBank",
    "SplitPlan",
    "cells_to_dict",
    "evaluate",
    "extract_stage",
    "filter_stage",
    "full_search_space",
    "grid_search",
    "load_bank",
    "load_filter_models",
    "load_manifest",
    "partition",
    "render_text",
    "save_bank",
    "save_filter_models",
    "save_manifest",
    "save_report",
    "segment_stage",
    "train_speaker_bank",
    "train_therapist_filter",
]
