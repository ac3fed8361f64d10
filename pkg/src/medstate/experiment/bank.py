"""Per-speaker model bank sharing one global configuration."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..features import FeatureMatrix, PcaModel, apply_pca, fit_pca, load_pca, save_pca, stack_context
from ..neuralnet import DnnArchitecture, DnnModel, TrainConfig, init_network, load_dnn, predict_frames, save_dnn, train
from ..seeds import derive_seed
from ..signalio import State
from .config import PCA_VARIANCE_FRACTION, GlobalConfig
from .manifest import CorpusManifest, ManifestEntry, SplitPlan, partition
from .pipeline import FeatureRepository

STATE_TO_LABEL = {State.ON: 1.0, State.OFF: 0.0}


@dataclass
class SpeakerModelBank:
    config: GlobalConfig
    models: dict[str, DnnModel]
    pca: PcaModel | None
    seed: int
    input_dim: int
    excluded: dict[str, str] = field(default_factory=dict)
    dev_accuracy: dict[str, float] = field(default_factory=dict)

    def prepare(self, feat: FeatureMatrix) -> np.ndarray:
        """Stack context and project exactly as at training time."""
        stacked = stack_context(feat, self.config.context)
        if self.pca is not None:
            return apply_pca(self.pca, stacked.values)
        return stacked.values

    def frame_probs(self, entry: ManifestEntry, prepared: np.ndarray) -> np.ndarray:
        model = self.models[entry.speaker_id]
        return predict_frames(model, prepared)

    @property
    def size(self) -> int:
        return len(self.models)


def _stacked_utterances(repo: FeatureRepository, entries, config: GlobalConfig):
    """(entry, stacked values, label) triples, skipping missing caches."""
    out = []
    for entry in entries:
        if not repo.has(entry, config.feature_set.value):
            continue
        feat = repo.load(entry, config.feature_set.value)
        stacked = stack_context(feat, config.context)
        out.append((entry, stacked.values, STATE_TO_LABEL[entry.state]))
    return out


def _train_one_speaker(args):
    speaker_id, train_x, train_y, dev_sets, input_dim, hidden, cfg_dict = args
    try:
        cfg = TrainConfig(**cfg_dict)
        classes = np.unique(train_y)
        if classes.size < 2:
            return speaker_id, None, None, "single-class training data"
        model = init_network(DnnArchitecture(input_dim, hidden), cfg.seed)
        model, history = train(model, (train_x, train_y), dev_sets, cfg)
        best_acc = max(record.dev_accuracy for record in history)
        return speaker_id, model, best_acc, None
    except Exception as exc:
        return speaker_id, None, None, str(exc)


def train_speaker_bank(
    repo: FeatureRepository,
    manifest: CorpusManifest,
    plan: SplitPlan,
    config: GlobalConfig,
    seed: int = 0,
    train_cfg: TrainConfig | None = None,
    jobs: int = 1,
) -> SpeakerModelBank:
    """Train one classifier per speaker on that speaker's train-split frames.

    A single PCA basis (when enabled) is fit on the pooled training frames
    and shared by the whole bank; each speaker's RNG seed derives from the
    master seed and the speaker id.  Speakers whose data violates the
    training preconditions are excluded with a reason instead of aborting.
    """
    base_cfg = train_cfg or TrainConfig(learning_rate=config.learning_rate)
    train_manifest, dev_manifest, _ = partition(manifest, plan)

    per_speaker_train: dict[str, list] = {}
    for entry, values, label in _stacked_utterances(repo, train_manifest.entries, config):
        per_speaker_train.setdefault(entry.speaker_id, []).append((values, label))
    per_speaker_dev: dict[str, list] = {}
    for entry, values, label in _stacked_utterances(repo, dev_manifest.entries, config):
        per_speaker_dev.setdefault(entry.speaker_id, []).append((values, label))

    pca = None
    input_dim = None
    if config.use_pca:
        pooled = np.vstack(
            [values for utts in per_speaker_train.values() for values, _ in utts]
        )
        pca = fit_pca(pooled, PCA_VARIANCE_FRACTION)
        input_dim = pca.kept
    else:
        any_values = next(iter(per_speaker_train.values()))[0][0]
        input_dim = any_values.shape[1]

    jobs_args = []
    excluded: dict[str, str] = {}
    for speaker_id in sorted(manifest.speakers()):
        train_utts = per_speaker_train.get(speaker_id, [])
        dev_utts = per_speaker_dev.get(speaker_id, [])
        if not train_utts:
            excluded[speaker_id] = "no training utterances"
            continue
        if not dev_utts:
            excluded[speaker_id] = "no development utterances"
            continue
        project = (lambda v: apply_pca(pca, v)) if pca is not None else (lambda v: v)
        train_x = np.vstack([project(values) for values, _ in train_utts])
        train_y = np.concatenate(
            [np.full(values.shape[0], label) for values, label in train_utts]
        )
        dev_sets = [(project(values), label) for values, label in dev_utts]
        cfg_dict = {
            "learning_rate": base_cfg.learning_rate,
            "batch_size": base_cfg.batch_size,
            "max_epochs": base_cfg.max_epochs,
            "patience": base_cfg.patience,
            "seed": derive_seed(seed, speaker_id),
            "balance_classes": base_cfg.balance_classes,
        }
        jobs_args.append(
            (speaker_id, train_x, train_y, dev_sets, input_dim, config.hidden, cfg_dict)
        )

    if jobs <= 1 or len(jobs_args) <= 1:
        results = [_train_one_speaker(a) for a in jobs_args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_one_speaker, jobs_args))

    models: dict[str, DnnModel] = {}
    dev_accuracy: dict[str, float] = {}
    for speaker_id, model, best_acc, error in results:
        if error is not None:
            excluded[speaker_id] = error
        else:
            models[speaker_id] = model
            dev_accuracy[speaker_id] = best_acc
    return SpeakerModelBank(config, models, pca, seed, input_dim, excluded, dev_accuracy)


def save_bank(out_dir, bank: SpeakerModelBank) -> None:
    out = Path(out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    for speaker_id in sorted(bank.models):
        save_dnn(
            out / "models" / f"{speaker_id}.dnn",
            bank.models[speaker_id],
            {"speaker_id": speaker_id, "dev_accuracy": bank.dev_accuracy.get(speaker_id)},
        )
    if bank.pca is not None:
        save_pca(out / "pca.txt", bank.pca)
    manifest = {
        "config": bank.config.to_dict(),
        "seed": bank.seed,
        "input_dim": bank.input_dim,
        "speakers": sorted(bank.models),
        "excluded": bank.excluded,
        "dev_accuracy": {k: bank.dev_accuracy[k] for k in sorted(bank.dev_accuracy)},
    }
    (out / "bank.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_bank(bank_dir) -> SpeakerModelBank:
    bank_dir = Path(bank_dir)
    payload = json.loads((bank_dir / "bank.json").read_text())
    models = {}
    for speaker_id in payload["speakers"]:
        model, _meta = load_dnn(bank_dir / "models" / f"{speaker_id}.dnn")
        models[speaker_id] = model
    pca = load_pca(bank_dir / "pca.txt") if (bank_dir / "pca.txt").exists() else None
    return SpeakerModelBank(
        GlobalConfig.from_dict(payload["config"]),
        models,
        pca,
        payload["seed"],
        payload["input_dim"],
        dict(payload.get("excluded", {})),
        {k: float(v) for k, v in payload.get("dev_accuracy", {}).items()},
    )
