"""Corpus manifest and the task-based train/dev/test partition."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from ..signalio import State, TaskKind

MANIFEST_COLUMNS = ("path", "speaker_id", "task", "state", "truth")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    speaker_id: str
    task: TaskKind
    state: State
    truth_path: str | None = None

    @property
    def recording_id(self) -> str:
        return f"{self.speaker_id}_{self.task.value}_{self.state.value}"


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        self.root = Path(self.root)
        seen = set()
        for entry in self.entries:
            key = (entry.speaker_id, entry.task, entry.state)
            if entry.state != State.UNKNOWN and key in seen:
                raise ValueError(f"duplicate (speaker, task, state) entry: {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.entries)

    def speakers(self) -> list[str]:
        return sorted({e.speaker_id for e in self.entries})

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path

    def resolve_truth(self, entry: ManifestEntry) -> Path | None:
        return self.root / entry.truth_path if entry.truth_path else None


@dataclass(frozen=True)
class SplitPlan:
    train_tasks: frozenset[TaskKind]
    dev_tasks: frozenset[TaskKind]
    test_tasks: frozenset[TaskKind]

    def __post_init__(self):
        for name, tasks in (
            ("train_tasks", self.train_tasks),
            ("dev_tasks", self.dev_tasks),
            ("test_tasks", self.test_tasks),
        ):
            if not tasks:
                raise ValueError(f"{name} must not be empty")
        combined = list(self.train_tasks) + list(self.dev_tasks) + list(self.test_tasks)
        if len(combined) != len(set(combined)):
            raise ValueError("task sets must be disjoint")


# Speaker-dependent default: split by task, every speaker in all subsets.
DEFAULT_SPLIT = SplitPlan(
    train_tasks=frozenset(
        {
            TaskKind.MPT,
            TaskKind.DDK,
            TaskKind.READ_WORDS,
            TaskKind.READ_PROSODIC,
            TaskKind.CONVERSATION,
        }
    ),
    dev_tasks=frozenset({TaskKind.READ_SENTENCES}),
    test_tasks=frozenset({TaskKind.VOWEL_A, TaskKind.READ_TEXT, TaskKind.STORYTELLING}),
)


def save_manifest(path, manifest: CorpusManifest) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for e in manifest.entries:
            writer.writerow([e.path, e.speaker_id, e.task.value, e.state.value, e.truth_path or ""])


def load_manifest(path, check_files: bool = True) -> CorpusManifest:
    path = Path(path)
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:4]) != MANIFEST_COLUMNS[:4]:
            raise ValueError(f"{path}: expected manifest header {','.join(MANIFEST_COLUMNS[:4])}")
        for row in reader:
            if not row:
                continue
            rec_path, speaker, task, state = row[:4]
            truth = row[4] if len(row) > 4 and row[4] else None
            entries.append(
                ManifestEntry(rec_path, speaker, TaskKind(task), State(state or "UNKNOWN"), truth)
            )
    manifest = CorpusManifest(entries, root=path.parent)
    if check_files:
        missing = [str(e.path) for e in entries if not manifest.resolve(e).exists()]
        missing += [
            str(e.truth_path)
            for e in entries
            if e.truth_path and not manifest.resolve_truth(e).exists()
        ]
        if missing:
            raise FileNotFoundError(f"{path}: missing referenced files: {missing[:5]}")
    return manifest


def partition(
    manifest: CorpusManifest, plan: SplitPlan
) -> tuple[CorpusManifest, CorpusManifest, CorpusManifest]:
    """Split by task into train/dev/test; every speaker appears in all three.

    Requires every speaker to have both states for every task in the plan;
    missing (speaker, task, state) triples are listed in the error.
    """
    planned = set(plan.train_tasks) | set(plan.dev_tasks) | set(plan.test_tasks)
    have = {(e.speaker_id, e.task, e.state) for e in manifest.entries}
    missing = [
        (speaker, task.value, state.value)
        for speaker in manifest.speakers()
        for task in sorted(planned, key=lambda t: t.value)
        for state in (State.ON, State.OFF)
        if (speaker, task, state) not in have
    ]
    if missing:
        raise ValueError(f"manifest incomplete for plan; missing entries: {missing}")

    def subset(tasks: frozenset[TaskKind]) -> CorpusManifest:
        picked = [
            e for e in manifest.entries if e.task in tasks and e.state in (State.ON, State.OFF)
        ]
        return CorpusManifest(picked, root=manifest.root)

    return subset(plan.train_tasks), subset(plan.dev_tasks), subset(plan.test_tasks)
