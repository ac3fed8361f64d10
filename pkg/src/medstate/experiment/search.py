"""Hyperparameter grid search scored by averaged dev utterance accuracy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..neuralnet import DnnArchitecture, TrainConfig
from .bank import SpeakerModelBank, train_speaker_bank
from .config import GlobalConfig
from .manifest import CorpusManifest, SplitPlan
from .pipeline import FeatureRepository
from .report import evaluate


@dataclass
class GridCell:
    config: GlobalConfig
    mean_dev_accuracy: float | None     # None when disqualified
    per_speaker: dict[str, float] = field(default_factory=dict)
    error: str | None = None
    num_parameters: int | None = None


def _cell_sort_key(config: GlobalConfig):
    return (
        config.feature_set.value,
        config.use_pca,
        config.context,
        config.hidden,
        config.learning_rate,
    )


def grid_search(
    repo: FeatureRepository,
    manifest: CorpusManifest,
    plan: SplitPlan,
    space: list[GlobalConfig],
    seed: int = 0,
    train_cfg: TrainConfig | None = None,
    jobs: int = 1,
) -> tuple[GlobalConfig, list[GridCell]]:
    """Train a bank per candidate and return the dev-accuracy argmax.

    The score of a cell is each speaker's dev utterance accuracy averaged
    across speakers.  A cell that fails for any speaker is disqualified.
    Ties break toward fewer parameters, then smaller context, then smaller
    learning rate.
    """
    if not space:
        raise ValueError("search space is empty")
    cells: list[GridCell] = []
    for config in sorted(set(space), key=_cell_sort_key):
        cfg = train_cfg or TrainConfig(learning_rate=config.learning_rate)
        cfg = TrainConfig(
            learning_rate=config.learning_rate,
            batch_size=cfg.batch_size,
            max_epochs=cfg.max_epochs,
            patience=cfg.patience,
            seed=cfg.seed,
            balance_classes=cfg.balance_classes,
        )
        try:
            bank = train_speaker_bank(repo, manifest, plan, config, seed, cfg, jobs)
            if bank.excluded:
                reasons = "; ".join(f"{k}: {v}" for k, v in sorted(bank.excluded.items()))
                cells.append(GridCell(config, None, error=f"speaker failures: {reasons}"))
                continue
            dev_report = evaluate(bank, repo, manifest, plan, "dev")
            per_speaker = {
                speaker: row.accuracy for speaker, row in dev_report.per_speaker.items()
            }
            score = float(np.mean(list(per_speaker.values())))
            params = DnnArchitecture(bank.input_dim, config.hidden).num_parameters()
            cells.append(GridCell(config, score, per_speaker, None, params))
        except Exception as exc:
            cells.append(GridCell(config, None, error=str(exc)))

    viable = [c for c in cells if c.mean_dev_accuracy is not None]
    if not viable:
        raise RuntimeError("every grid cell failed; see per-cell errors")
    best = min(
        viable,
        key=lambda c: (
            -c.mean_dev_accuracy,
            c.num_parameters,
            c.config.context,
            c.config.learning_rate,
            _cell_sort_key(c.config),
        ),
    )
    return best.config, cells


def cells_to_dict(cells: list[GridCell]) -> list[dict]:
    return [
        {
            "config": cell.config.to_dict(),
            "mean_dev_accuracy": cell.mean_dev_accuracy,
            "per_speaker": {k: cell.per_speaker[k] for k in sorted(cell.per_speaker)},
            "error": cell.error,
            "num_parameters": cell.num_parameters,
        }
        for cell in cells
    ]
