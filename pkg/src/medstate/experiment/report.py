"""Utterance-level evaluation and report rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..neuralnet import utterance_decision
from ..signalio import State, TaskKind
from .bank import STATE_TO_LABEL, SpeakerModelBank
from .manifest import CorpusManifest, SplitPlan, partition
from .pipeline import FeatureRepository

# Fixed row order mirroring the per-task results table.
TASK_ORDER = [task for task in TaskKind]
COMBINED_ROW = "text+story"


@dataclass
class TaskResult:
    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


@dataclass
class EvaluationReport:
    split: str
    seed: int
    config: dict
    overall: TaskResult = field(default_factory=TaskResult)
    per_task: dict[str, TaskResult] = field(default_factory=dict)
    per_speaker: dict[str, TaskResult] = field(default_factory=dict)
    confusion: dict[str, int] = field(
        default_factory=lambda: {"on_on": 0, "on_off": 0, "off_on": 0, "off_off": 0}
    )
    skipped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def pack(result: TaskResult) -> dict:
            return {
                "correct": result.correct,
                "total": result.total,
                "accuracy": result.accuracy,
            }

        return {
            "split": self.split,
            "seed": self.seed,
            "config": self.config,
            "overall": pack(self.overall),
            "per_task": {k: pack(v) for k, v in sorted(self.per_task.items())},
            "per_speaker": {k: pack(v) for k, v in sorted(self.per_speaker.items())},
            "confusion": dict(sorted(self.confusion.items())),
            "skipped": sorted(self.skipped),
        }


def evaluate(
    bank: SpeakerModelBank,
    repo: FeatureRepository,
    manifest: CorpusManifest,
    plan: SplitPlan,
    split: str = "test",
) -> EvaluationReport:
    """Score every utterance of the chosen split with its speaker's model.

    Utterances whose speaker has no model (or whose feature cache is
    missing) are skipped and reported, not counted in the denominator.
    When the sustained-vowel task is part of the split, an aggregate row
    without it is added so reading and storytelling can be read together.
    """
    splits = {"train": 0, "dev": 1, "test": 2}
    if split not in splits:
        raise ValueError("split must be train, dev or test")
    subset = partition(manifest, plan)[splits[split]]
    plan_tasks = {
        "train": plan.train_tasks,
        "dev": plan.dev_tasks,
        "test": plan.test_tasks,
    }[split]

    report = EvaluationReport(split, bank.seed, bank.config.to_dict())
    for task in sorted(plan_tasks, key=lambda t: TASK_ORDER.index(t)):
        report.per_task[task.value] = TaskResult()
    combined = TaskKind.VOWEL_A in plan_tasks and len(plan_tasks) > 1
    if combined:
        report.per_task[COMBINED_ROW] = TaskResult()

    for entry in subset.entries:
        if entry.speaker_id not in bank.models:
            report.skipped.append(f"{entry.recording_id}: no model for speaker")
            continue
        if not repo.has(entry, bank.config.feature_set.value):
            report.skipped.append(f"{entry.recording_id}: missing feature cache")
            continue
        feat = repo.load(entry, bank.config.feature_set.value)
        prepared = bank.prepare(feat)
        decision = utterance_decision(bank.frame_probs(entry, prepared))
        truth_label = STATE_TO_LABEL[entry.state]
        correct = decision.label == truth_label

        report.overall.total += 1
        report.overall.correct += correct
        task_row = report.per_task[entry.task.value]
        task_row.total += 1
        task_row.correct += correct
        if combined and entry.task != TaskKind.VOWEL_A:
            report.per_task[COMBINED_ROW].total += 1
            report.per_task[COMBINED_ROW].correct += correct
        speaker_row = report.per_speaker.setdefault(entry.speaker_id, TaskResult())
        speaker_row.total += 1
        speaker_row.correct += correct
        key = ("on_" if entry.state == State.ON else "off_") + ("on" if decision.is_on else "off")
        report.confusion[key] += 1
    return report


def render_text(report: EvaluationReport) -> str:
    lines = [
        f"medication-state evaluation ({report.split} split)",
        f"seed: {report.seed}",
        "config: "
        + " ".join(f"{k}={v}" for k, v in sorted(report.config.items())),
        "",
        f"overall accuracy: {100.0 * report.overall.accuracy:6.2f}%"
        f"  ({report.overall.correct}/{report.overall.total})",
        "",
        f"{'task':<18} {'correct':>8} {'total':>6} {'acc%':>7}",
    ]
    for name, row in report.per_task.items():
        lines.append(f"{name:<18} {row.correct:>8} {row.total:>6} {100.0 * row.accuracy:>7.2f}")
    lines += ["", f"{'speaker':<12} {'correct':>8} {'total':>6} {'acc%':>7}"]
    for name in sorted(report.per_speaker):
        row = report.per_speaker[name]
        lines.append(f"{name:<12} {row.correct:>8} {row.total:>6} {100.0 * row.accuracy:>7.2f}")
    conf = report.confusion
    lines += [
        "",
        "confusion (truth -> decision):",
        f"  ON->ON  {conf['on_on']:>5}   ON->OFF  {conf['on_off']:>5}",
        f"  OFF->ON {conf['off_on']:>5}   OFF->OFF {conf['off_off']:>5}",
    ]
    if report.skipped:
        lines += ["", "skipped utterances:"] + [f"  {s}" for s in sorted(report.skipped)]
    return "\n".join(lines) + "\n"


def save_report(out_dir, report: EvaluationReport, stem: str | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or f"eval_{report.split}"
    (out / f"{stem}.txt").write_text(render_text(report))
    (out / f"{stem}.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
