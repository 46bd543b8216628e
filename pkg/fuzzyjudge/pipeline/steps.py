"""The pipeline steps behind the CLI subcommands.

Each step reads its inputs from the workspace (or the configured raw files),
writes its artifact and returns a summary for display.
"""

import warnings
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from ..annotation import (
    InsufficientJudges,
    JudgeAnnotation,
    LabeledExample,
    agreement_stats,
    build_gold,
    group_by_utterance,
    judge_consensus_kappa,
    read_gold,
    read_judge_annotations,
    read_manifest,
    split_dataset,
    write_gold,
    write_manifest,
)
from ..backend import BackendRegistry, ClassifierBackend, ClassifierBackendRef, GeneratorBackend
from ..backend.registry import register_builtin_backends
from ..config import PipelineConfig
from ..corpus import extract_utterances, read_conversations_csv, read_corpus, write_corpus
from ..finetune.trainer import TrainRun, open_checkpoint, train
from ..judge import JudgingResources, batch_judge, batch_judge_ensemble
from ..judgment import JudgmentEntry, JudgmentSource, read_judgments, split_entries, write_judgments
from ..metrics import EvalReport, ReportFormat, SystemName, build_report, emit_report, report_from_dict, report_to_dict
from ..prompting.exemplars import ExemplarStrategy, read_exemplars, select_exemplars
from ..prompting.template import Exemplar, PromptTemplate
from ..rubric import CRITERIA_ORDER, describe_rubric
from ..utils.artifacts import (
    MissingArtifact,
    build_meta,
    content_fingerprint,
    file_fingerprint,
    read_json,
    read_jsonl,
    write_json,
)
from .stage_logger import StageLogger, timed_stage
from .workspace import Workspace

MODE_SYSTEMS = {
    JudgmentSource.HYBRID: SystemName.HYBRID,
    JudgmentSource.SFT: SystemName.SFT,
    JudgmentSource.PROMPT: SystemName.PROMPT,
}


@contextmanager
def forward_warnings(logger: StageLogger) -> Iterator[None]:
    """Show warnings raised inside the block through the stage logger."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        yield
    for warning in caught:
        logger.warn(str(warning.message))


def _require(path: Optional[Path], what: str, hint: str = "") -> Path:
    if path is None:
        raise MissingArtifact(Path(what), hint or f"set `{what}` in the configuration")
    if not path.exists():
        raise MissingArtifact(path, hint)
    return path


@dataclass(frozen=True)
class IngestSummary:
    rows: int
    utterances: int
    path: Path


def ingest(config: PipelineConfig, workspace: Workspace, logger: StageLogger) -> IngestSummary:
    source = _require(config.resolved_paths.conversations, "conversations")
    with timed_stage(logger, "ingest"):
        rows = read_conversations_csv(source)
        utterances = extract_utterances(rows, config.corpus.bootstrap_phrases)
        meta = build_meta("corpus", config.snapshot(), {"conversations": file_fingerprint(source)})
        write_corpus(workspace.corpus, utterances, meta)
    if len(utterances) < len(rows):
        logger.info(f"{len(rows) - len(utterances)} row(s) left no utterance after cleaning")
    return IngestSummary(len(rows), len(utterances), workspace.corpus)


@dataclass(frozen=True)
class MergeSummary:
    judges: int
    examples: int
    unannotated: int
    agreement: dict[str, float]
    path: Path


def read_annotation_dir(directory: Path) -> list[JudgeAnnotation]:
    """All ``*.csv`` files in a directory, one judge per file, in name order."""
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise MissingArtifact(directory, "no annotation CSV files")
    records: list[JudgeAnnotation] = []
    for path in files:
        records.extend(read_judge_annotations(path))
    return records


def _pairwise_agreement(records: Sequence[JudgeAnnotation]) -> dict[str, float]:
    # Utterances with a single judge have no pairs.
    grouped = group_by_utterance(records)
    multi = [r for group in grouped.values() if len(group) >= 2 for r in group]
    try:
        stats = agreement_stats(multi)
    except InsufficientJudges:
        return {}
    return {c.value: stats[c] for c in CRITERIA_ORDER}


def merge(config: PipelineConfig, workspace: Workspace, logger: StageLogger) -> MergeSummary:
    annotations_dir = _require(config.resolved_paths.annotations, "annotations")
    _require(workspace.corpus, "corpus", "run `judge ingest` first")
    with timed_stage(logger, "merge"), forward_warnings(logger):
        utterances = read_corpus(workspace.corpus)
        records = read_annotation_dir(annotations_dir)
        examples, unannotated = build_gold(utterances, records, config.annotation.expected_judges)
        inputs = {
            "corpus": file_fingerprint(workspace.corpus),
            "annotations": content_fingerprint(
                {"judge": r.judge_id, "utterance_id": r.utterance_id, "labels": [r.labels[c].index for c in CRITERIA_ORDER]}
                for r in records
            ),
        }
        write_gold(workspace.gold, examples, build_meta("gold", config.snapshot(), inputs))

        pairwise = _pairwise_agreement(records)
        kappa = judge_consensus_kappa(records, examples)
        write_json(
            workspace.agreement,
            {
                "pairwise": pairwise,
                "judge_consensus_kappa": {
                    judge: {c.value: value for c, value in per.items()} for judge, per in kappa.items()
                },
                "judges": sorted({r.judge_id for r in records}),
                "annotated": len(examples),
                "unannotated": unannotated,
            },
            build_meta("agreement", config.snapshot(), inputs),
        )
    if unannotated:
        logger.info(f"{len(unannotated)} utterance(s) have no annotations")
    return MergeSummary(
        judges=len({r.judge_id for r in records}),
        examples=len(examples),
        unannotated=len(unannotated),
        agreement=pairwise,
        path=workspace.gold,
    )


def dataset_fingerprint(workspace: Workspace) -> str:
    return file_fingerprint(workspace.gold)


def split(config: PipelineConfig, workspace: Workspace, logger: StageLogger) -> dict[str, int]:
    _require(workspace.gold, "gold", "run `judge merge` first")
    with timed_stage(logger, "split"):
        examples = read_gold(workspace.gold)
        parts = split_dataset(examples, config.split)
        inputs = {"gold": dataset_fingerprint(workspace)}
        sizes: dict[str, int] = {}
        for name, subset in zip(Workspace.SPLIT_NAMES, parts):
            meta = build_meta(f"split:{name}", config.snapshot(), inputs)
            sizes[name] = write_manifest(workspace.split(name), subset, meta)
    return sizes


def _read_split(workspace: Workspace, name: str) -> list[LabeledExample]:
    _require(workspace.split(name), f"{name} split", "run `judge split` first")
    return read_manifest(workspace.split(name))


def make_classifier(config: PipelineConfig, name: Optional[str] = None) -> ClassifierBackend:
    register_builtin_backends()
    name = name or config.backend.classifier
    options = config.backend.classifier_options(config.train) if name == config.backend.classifier else {}
    return BackendRegistry.classifier(name, **options)


def make_generator(config: PipelineConfig) -> Optional[GeneratorBackend]:
    register_builtin_backends()
    if config.backend.generator is None:
        return None
    return BackendRegistry.generator(
        config.backend.generator, **config.backend.generator_options(config.prompt.retries)
    )


def train_classifier(
    config: PipelineConfig,
    workspace: Workspace,
    logger: StageLogger,
    backend: Optional[ClassifierBackend] = None,
) -> TrainRun:
    train_set = _read_split(workspace, "train")
    val_set = _read_split(workspace, "val")
    backend = backend or make_classifier(config)
    with timed_stage(logger, f"train ({backend.get_backend_name()})"), forward_warnings(logger):
        return train(
            train_set,
            val_set,
            config.train,
            backend,
            workspace.checkpoint,
            on_epoch=logger.log_epoch,
            config_snapshot=config.snapshot(),
        )


def _exemplars(
    config: PipelineConfig, workspace: Workspace, pass_index: int
) -> list[Exemplar]:
    prompt = config.prompt
    curated: Optional[list[Exemplar]] = None
    train_set: list[LabeledExample] = []
    if prompt.strategy is ExemplarStrategy.FIXED:
        exemplars_path = config.resolved_paths.exemplars
        if exemplars_path is not None:
            curated = read_exemplars(_require(exemplars_path, "exemplars"))
    else:
        train_set = _read_split(workspace, "train")
    return select_exemplars(train_set, prompt.k, prompt.strategy, prompt.seed + pass_index, curated)


def judging_resources(
    config: PipelineConfig,
    workspace: Workspace,
    mode: JudgmentSource,
    pass_index: int = 0,
    generator: Optional[GeneratorBackend] = None,
) -> JudgingResources:
    """Backends, checkpoint and exemplars a mode needs, loaded from config and workspace.

    Raises:
        CheckpointNotFound: If the mode needs a classifier and none was trained
    """
    classifier: Optional[ClassifierBackend] = None
    checkpoint: Optional[ClassifierBackendRef] = None
    if mode in (JudgmentSource.SFT, JudgmentSource.HYBRID):
        checkpoint = open_checkpoint(workspace.checkpoint)
        classifier = make_classifier(config, checkpoint.backend_name)

    exemplars: list[Exemplar] = []
    template: Optional[PromptTemplate] = None
    if mode in (JudgmentSource.PROMPT, JudgmentSource.HYBRID):
        generator = generator or make_generator(config)
        exemplars = _exemplars(config, workspace, pass_index)
        template_path = config.resolved_paths.template
        if template_path is not None:
            template = PromptTemplate(template_path)

    resources = JudgingResources(
        classifier=classifier,
        checkpoint=checkpoint,
        generator=generator,
        exemplars=exemplars,
        template=template,
        retries=config.prompt.retries,
        policy=config.hybrid,
        concurrency=config.prompt.concurrency,
        max_output_length=config.prompt.max_output_length,
        temperature=config.prompt.temperature,
    )
    resources.require(mode)
    return resources


@dataclass(frozen=True)
class JudgeSummary:
    mode: JudgmentSource
    judged: int
    errors: int
    flagged: int
    prompt_calls: int
    path: Path


def judge_split(
    config: PipelineConfig,
    workspace: Workspace,
    logger: StageLogger,
    mode: JudgmentSource,
    split_name: str = "test",
    ensemble: int = 1,
    generator: Optional[GeneratorBackend] = None,
) -> tuple[JudgeSummary, list[JudgmentEntry]]:
    """Judge one split in one mode and write ``judgments/<mode>.jsonl``."""
    if ensemble < 1:
        raise ValueError(f"ensemble must be >= 1, got {ensemble}")
    passes = [
        judging_resources(config, workspace, mode, index, generator) for index in range(ensemble)
    ]
    items = _read_split(workspace, split_name)
    with timed_stage(logger, f"judge ({mode.value})"):
        if ensemble == 1:
            entries = batch_judge(items, mode, passes[0])
        else:
            entries = batch_judge_ensemble(items, mode, passes)

        meta = build_meta("judgments", config.snapshot(), judgment_inputs(workspace, mode, split_name)) | {
            "mode": mode.value,
            "split": split_name,
            "ensemble": ensemble,
        }
        path = workspace.judgments(mode)
        write_judgments(path, entries, meta)

    results, errors = split_entries(entries)
    for error in errors:
        logger.warn(f"{error.utterance_id}: {error.error_type}: {error.message}")
    summary = JudgeSummary(
        mode=mode,
        judged=len(results),
        errors=len(errors),
        flagged=sum(1 for r in results if r.low_confidence_flags),
        prompt_calls=sum(r.prompt_calls for r in results),
        path=path,
    )
    return summary, entries


# Config sections a mode's judgments depend on beyond the split and checkpoint.
JUDGING_SECTIONS = {
    JudgmentSource.SFT: (),
    JudgmentSource.PROMPT: ("prompt", "backend"),
    JudgmentSource.HYBRID: ("prompt", "backend", "hybrid"),
}


def judgment_inputs(workspace: Workspace, mode: JudgmentSource, split_name: str = "test") -> dict[str, str]:
    inputs = {split_name: file_fingerprint(workspace.split(split_name))}
    if mode in (JudgmentSource.SFT, JudgmentSource.HYBRID):
        inputs["checkpoint"] = file_fingerprint(workspace.checkpoint / "config.json")
    return inputs


def _reusable_judgments(
    config: PipelineConfig, workspace: Workspace, logger: StageLogger, mode: JudgmentSource
) -> Optional[list[JudgmentEntry]]:
    """Stored test judgments, unless the split, checkpoint or judging config changed."""
    path = workspace.judgments(mode)
    if not path.exists():
        return None
    meta, _ = read_jsonl(path)
    if meta.get("split") != "test":
        return None
    current = config.snapshot()
    stored = meta.get("config", {})
    stale = meta.get("inputs") != judgment_inputs(workspace, mode) or any(
        stored.get(section) != current[section] for section in JUDGING_SECTIONS[mode]
    )
    if stale:
        logger.info(f"Stale judgments in {path}, judging again")
        return None
    return read_judgments(path)


def evaluate(
    config: PipelineConfig,
    workspace: Workspace,
    logger: StageLogger,
    modes: Sequence[JudgmentSource],
    rejudge: bool = False,
    generator: Optional[GeneratorBackend] = None,
) -> EvalReport:
    """Score each mode on the test split plus the majority-class baseline."""
    for mode in modes:
        if mode in (JudgmentSource.SFT, JudgmentSource.HYBRID):
            open_checkpoint(workspace.checkpoint)
            break
    test_gold = _read_split(workspace, "test")
    train_gold = _read_split(workspace, "train")

    judgment_sets: dict[SystemName, list[JudgmentEntry]] = {}
    for mode in modes:
        entries = None if rejudge else _reusable_judgments(config, workspace, logger, mode)
        if entries is None:
            _, entries = judge_split(config, workspace, logger, mode, generator=generator)
        else:
            logger.info(f"Reusing {workspace.judgments(mode)}")
        judgment_sets[MODE_SYSTEMS[mode]] = entries

    with timed_stage(logger, "evaluate"), forward_warnings(logger):
        report = build_report(
            judgment_sets,
            test_gold,
            train_gold,
            dataset_fingerprint=dataset_fingerprint(workspace),
            split_seed=config.split.seed,
            config=config.snapshot(),
            threshold=config.hybrid.confidence_threshold,
        )
        inputs = {"test": file_fingerprint(workspace.split("test"))}
        for mode in modes:
            inputs[f"judgments:{mode.value}"] = file_fingerprint(workspace.judgments(mode))
        write_json(workspace.eval_report, report_to_dict(report), build_meta("eval_report", config.snapshot(), inputs))
    return report


def load_report(workspace: Workspace) -> EvalReport:
    _require(workspace.eval_report, "eval report", "run `judge evaluate` first")
    _, payload = read_json(workspace.eval_report)
    return report_from_dict(payload)


def render_report(config: PipelineConfig, workspace: Workspace, logger: StageLogger) -> EvalReport:
    """Write ``report.md`` and ``report.json`` from the stored evaluation."""
    with timed_stage(logger, "report"):
        report = load_report(workspace)
        workspace.report_dir.mkdir(parents=True, exist_ok=True)
        workspace.report_markdown.write_text(emit_report(report, ReportFormat.TABLE_TEXT), encoding="utf-8")
        workspace.report_structured.write_text(emit_report(report, ReportFormat.STRUCTURED), encoding="utf-8")
    return report


def write_rubric(config: PipelineConfig, workspace: Workspace) -> Path:
    payload: dict[str, Any] = describe_rubric()
    write_json(workspace.rubric, payload, build_meta("rubric", config.snapshot()))
    return workspace.rubric
