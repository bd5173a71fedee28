"""Crowdsourced label aggregation and quality control.

Workers answer one sentiment question per sample; three answers per sample
get collapsed to a gold label by taking the median of the ordinal encodings.
Quality control has three prongs: per-worker statistics (answer time, gold
accuracy), a cheater screen that flags workers far below both averages, and
Fleiss' Kappa as an agreement statistic per dataset.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from .core import (
    DatasetVariant,
    MissingColumn,
    SentimentClass,
    SentitradeError,
    as_text_stream,
)

N_CLASSES = 3
DEFAULT_CHEATER_FRACTION = 0.30

RESPONSE_HEADER = (
    "hit_id",
    "sample_id",
    "dataset_variant",
    "worker_id",
    "answer",
    "work_time_seconds",
    "is_gold",
    "gold_answer",
)


class EmptyGroup(SentitradeError):
    """A sample arrived with zero responses."""


class UnevenRaters(SentitradeError):
    """Some sample does not have exactly the expected number of responses."""


class TooFewRaters(SentitradeError):
    """Agreement statistics need at least two raters."""


@dataclass(frozen=True)
class HitResponse:
    """One worker's answer to one labeling question."""

    hit_id: str
    sample_id: str
    dataset_variant: DatasetVariant
    worker_id: str
    answer: SentimentClass
    work_time_seconds: float
    is_gold: bool = False
    gold_answer: SentimentClass | None = None

    def __post_init__(self) -> None:
        if self.work_time_seconds < 0:
            raise ValueError("work_time_seconds must be nonnegative")
        if self.is_gold != (self.gold_answer is not None):
            raise ValueError("gold_answer must be present exactly when is_gold is set")


@dataclass(frozen=True)
class WorkerStats:
    worker_id: str
    n_responses: int
    mean_work_time: float
    gold_accuracy: float | None  # absent when the worker saw no gold questions


@dataclass(frozen=True)
class AggregatedLabel:
    sample_id: str
    label: SentimentClass
    n_responses: int


def group_by_sample(responses: Iterable[HitResponse]) -> dict[str, list[HitResponse]]:
    groups: dict[str, list[HitResponse]] = defaultdict(list)
    for resp in responses:
        groups[resp.sample_id].append(resp)
    return dict(groups)


def _median_class(answers: Sequence[SentimentClass]) -> SentimentClass:
    ordered = sorted(int(a) for a in answers)
    n = len(ordered)
    if n % 2 == 1:
        return SentimentClass(ordered[n // 2])
    lo, hi = ordered[n // 2 - 1], ordered[n // 2]
    # Even group (possible after relisting): a split middle pair resolves to
    # neutral, whether the pair is adjacent or {negative, positive}.
    return SentimentClass(lo) if lo == hi else SentimentClass.NEUTRAL


def aggregate_median(groups: Mapping[str, Sequence[HitResponse]]) -> list[AggregatedLabel]:
    """Collapse each sample's responses to the median ordinal label.

    Output is sorted by sample_id so downstream files are reproducible.
    """
    labels = []
    for sample_id in sorted(groups):
        group = groups[sample_id]
        if not group:
            raise EmptyGroup(f"sample {sample_id} has no responses")
        labels.append(
            AggregatedLabel(
                sample_id=sample_id,
                label=_median_class([r.answer for r in group]),
                n_responses=len(group),
            )
        )
    return labels


def worker_stats(responses: Iterable[HitResponse]) -> list[WorkerStats]:
    """Per-worker response count, mean answer time, and gold accuracy."""
    times: dict[str, list[float]] = defaultdict(list)
    gold_seen: dict[str, int] = defaultdict(int)
    gold_right: dict[str, int] = defaultdict(int)
    for resp in responses:
        times[resp.worker_id].append(resp.work_time_seconds)
        if resp.is_gold:
            gold_seen[resp.worker_id] += 1
            if resp.answer == resp.gold_answer:
                gold_right[resp.worker_id] += 1
    stats = []
    for worker_id in sorted(times):
        worker_times = times[worker_id]
        seen = gold_seen[worker_id]
        stats.append(
            WorkerStats(
                worker_id=worker_id,
                n_responses=len(worker_times),
                mean_work_time=sum(worker_times) / len(worker_times),
                gold_accuracy=(gold_right[worker_id] / seen) if seen else None,
            )
        )
    return stats


def screen_cheaters(
    stats: Sequence[WorkerStats], fraction: float = DEFAULT_CHEATER_FRACTION
) -> list[str]:
    """Flag workers whose gold accuracy AND mean answer time both fall below
    ``fraction`` of the respective worker averages.

    Mean gold accuracy is averaged over the workers that have one; mean time
    over all workers. Workers with no gold exposure are never flagged.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if not stats:
        return []
    with_gold = [s for s in stats if s.gold_accuracy is not None]
    if not with_gold:
        return []
    mean_accuracy = sum(s.gold_accuracy for s in with_gold) / len(with_gold)
    mean_time = sum(s.mean_work_time for s in stats) / len(stats)
    flagged = [
        s.worker_id
        for s in stats
        if s.gold_accuracy is not None
        and s.gold_accuracy < fraction * mean_accuracy
        and s.mean_work_time < fraction * mean_time
    ]
    return sorted(flagged)


def fleiss_kappa(
    groups: Mapping[str, Sequence[HitResponse]], n_raters: int
) -> float | None:
    """Fleiss' Kappa over the three sentiment categories.

    Every sample must have exactly ``n_raters`` responses. Returns None when
    agreement is degenerate (every answer in one category), where the
    statistic has a zero denominator.
    """
    if n_raters < 2:
        raise TooFewRaters("fleiss_kappa needs at least 2 raters")
    if not groups:
        raise EmptyGroup("fleiss_kappa needs at least one sample")
    n_subjects = len(groups)
    category_totals = [0] * N_CLASSES
    agreement_sum = 0.0
    for sample_id, group in groups.items():
        if len(group) != n_raters:
            raise UnevenRaters(
                f"sample {sample_id} has {len(group)} responses, expected {n_raters}"
            )
        counts = [0] * N_CLASSES
        for resp in group:
            counts[int(resp.answer)] += 1
        for j, c in enumerate(counts):
            category_totals[j] += c
        agreement_sum += (sum(c * c for c in counts) - n_raters) / (n_raters * (n_raters - 1))
    total = n_subjects * n_raters
    if max(category_totals) == total:
        return None  # all answers in a single category: chance term is exactly 1
    p_bar = agreement_sum / n_subjects
    p_expected = sum((c / total) ** 2 for c in category_totals)
    return (p_bar - p_expected) / (1.0 - p_expected)


def answer_distribution(labels: Iterable[SentimentClass]) -> tuple[int, int, int]:
    """Counts per class, in (negative, neutral, positive) order."""
    counts = Counter(int(label) for label in labels)
    return (counts.get(0, 0), counts.get(1, 0), counts.get(2, 0))


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no", ""):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def read_responses_csv(stream: IO) -> list[HitResponse]:
    """Parse worker responses from the response CSV format."""
    reader = csv.DictReader(as_text_stream(stream))
    header = reader.fieldnames or []
    missing = [col for col in RESPONSE_HEADER if col not in header]
    if missing:
        raise MissingColumn(f"response CSV header lacks: {', '.join(missing)}")
    responses = []
    for index, row in enumerate(reader):
        try:
            is_gold = _parse_bool(row.get("is_gold") or "")
            raw_gold = (row.get("gold_answer") or "").strip()
            responses.append(
                HitResponse(
                    hit_id=row["hit_id"],
                    sample_id=row["sample_id"],
                    dataset_variant=DatasetVariant.from_text(row["dataset_variant"]),
                    worker_id=row["worker_id"],
                    answer=SentimentClass.from_text(row["answer"]),
                    work_time_seconds=float(row["work_time_seconds"]),
                    is_gold=is_gold,
                    gold_answer=SentimentClass.from_text(raw_gold) if raw_gold else None,
                )
            )
        except (ValueError, KeyError) as exc:
            raise SentitradeError(f"response CSV row {index}: {exc}") from exc
    return responses
