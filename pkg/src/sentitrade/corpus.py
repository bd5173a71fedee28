"""Article ingestion and the four per-field text datasets.

A corpus arrives as a CSV of news records, one row per article per company.
This module normalizes it (UTF-8 with replacement characters for broken
bytes), removes duplicates, and materializes the four datasets used by
everything downstream: title, description, content, and their combination.
It also holds the query template and the transport-injected fetcher for
pulling fresh articles from a JSON news endpoint.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from datetime import date, timedelta
from typing import IO, Callable, Iterable, Mapping, Sequence

from .core import (
    BadDate,
    DatasetVariant,
    MissingColumn,
    SentimentClass,
    SentitradeError,
    as_text_stream,
    normalize_text,
    parse_iso_date,
)

REQUIRED_COLUMNS = ("company_id", "ticker", "title", "description", "content", "published_at")
CSV_HEADER = ("company_id", "ticker", "title", "description", "content", "author", "published_at", "source")

MAX_FETCH_RETRIES = 3


class EmptyName(SentitradeError):
    """A query was requested for a company with no name."""


class TransportError(SentitradeError):
    """The injected transport kept failing; carries the request context."""


class ParseError(SentitradeError):
    """A fetch response body was not the expected JSON article document."""


@dataclass(frozen=True)
class ArticleRecord:
    """One news item tied to a company."""

    company_id: str
    ticker: str
    title: str
    description: str
    content: str
    author: str
    published_at: date
    source: str = ""


@dataclass(frozen=True)
class Query:
    """A search query string for one company."""

    company_id: str
    query_string: str


@dataclass(frozen=True)
class DatasetRow:
    sample_id: str
    company_id: str
    published_at: date
    text: str
    label: SentimentClass | None = None


@dataclass(frozen=True)
class FeatureDataset:
    """All rows of one text variant; sample_ids are stable across variants."""

    variant: DatasetVariant
    rows: tuple[DatasetRow, ...]

    def texts(self) -> list[str]:
        return [row.text for row in self.rows]

    def labels(self) -> list[SentimentClass | None]:
        return [row.label for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def ingest_articles(stream: IO) -> list[ArticleRecord]:
    """Read article records from a CSV stream (text or UTF-8 bytes).

    Rows come back in input order with all text fields normalized to valid
    Unicode. Raises MissingColumn if the header lacks a required field and
    BadDate (naming the row) if a published_at value does not parse.
    """
    reader = csv.DictReader(as_text_stream(stream))
    header = reader.fieldnames or []
    missing = [col for col in REQUIRED_COLUMNS if col not in header]
    if missing:
        raise MissingColumn(f"article CSV header lacks: {', '.join(missing)}")
    records = []
    for index, row in enumerate(reader):
        raw_date = (row.get("published_at") or "").strip()
        try:
            published = parse_iso_date(raw_date)
        except ValueError:
            raise BadDate(f"row {index}: bad published_at {raw_date!r}") from None
        records.append(
            ArticleRecord(
                company_id=normalize_text(row.get("company_id") or ""),
                ticker=normalize_text(row.get("ticker") or ""),
                title=normalize_text(row.get("title") or ""),
                description=normalize_text(row.get("description") or ""),
                content=normalize_text(row.get("content") or ""),
                author=normalize_text(row.get("author") or ""),
                published_at=published,
                source=normalize_text(row.get("source") or ""),
            )
        )
    return records


def write_articles_csv(records: Iterable[ArticleRecord], stream: IO[str]) -> None:
    """Serialize records so that ingest_articles round-trips them."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(
            (
                rec.company_id,
                rec.ticker,
                rec.title,
                rec.description,
                rec.content,
                rec.author,
                rec.published_at.isoformat(),
                rec.source,
            )
        )


def dedup_key(record: ArticleRecord) -> tuple[str, str, date]:
    return (record.company_id, record.title, record.published_at)


def deduplicate(records: Sequence[ArticleRecord]) -> list[ArticleRecord]:
    """Keep the first occurrence per (company_id, title, published_at)."""
    seen = set()
    unique = []
    for rec in records:
        key = dedup_key(rec)
        if key in seen:
            continue
        seen.add(key)
        unique.append(rec)
    return unique


def combination_text(record: ArticleRecord) -> str:
    """Title, description and content joined by single spaces; empty fields
    are skipped so they never produce doubled separators."""
    return " ".join(part for part in (record.title, record.description, record.content) if part)


def variant_text(record: ArticleRecord, variant: DatasetVariant) -> str:
    if variant is DatasetVariant.TITLE:
        return record.title
    if variant is DatasetVariant.DESCRIPTION:
        return record.description
    if variant is DatasetVariant.CONTENT:
        return record.content
    return combination_text(record)


def sample_id_for(record: ArticleRecord) -> str:
    payload = "\x1f".join((record.company_id, record.title, record.published_at.isoformat()))
    return "s" + hashlib.sha1(payload.encode("utf-8", "replace")).hexdigest()[:12]


def build_datasets(records: Sequence[ArticleRecord]) -> dict[DatasetVariant, FeatureDataset]:
    """Materialize the four text datasets from deduplicated records.

    The same article gets the same sample_id in every variant, so labels
    collected against one variant line up with the other three.
    """
    ids = [sample_id_for(rec) for rec in records]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sample ids; deduplicate() the records first")
    datasets = {}
    for variant in DatasetVariant:
        rows = tuple(
            DatasetRow(
                sample_id=sid,
                company_id=rec.company_id,
                published_at=rec.published_at,
                text=variant_text(rec, variant),
            )
            for sid, rec in zip(ids, records)
        )
        datasets[variant] = FeatureDataset(variant=variant, rows=rows)
    return datasets


def write_dataset_csv(dataset: FeatureDataset, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("sample_id", "company_id", "published_at", "text", "label"))
    for row in dataset.rows:
        writer.writerow(
            (
                row.sample_id,
                row.company_id,
                row.published_at.isoformat(),
                row.text,
                "" if row.label is None else row.label.text,
            )
        )


def read_dataset_csv(stream: IO, variant: DatasetVariant) -> FeatureDataset:
    reader = csv.DictReader(as_text_stream(stream))
    header = reader.fieldnames or []
    required = ("sample_id", "company_id", "published_at", "text")
    missing = [col for col in required if col not in header]
    if missing:
        raise MissingColumn(f"dataset CSV header lacks: {', '.join(missing)}")
    rows = []
    for index, row in enumerate(reader):
        try:
            published = parse_iso_date(row["published_at"])
        except ValueError:
            raise BadDate(f"row {index}: bad published_at {row['published_at']!r}") from None
        raw_label = (row.get("label") or "").strip()
        label = SentimentClass.from_text(raw_label) if raw_label else None
        rows.append(
            DatasetRow(
                sample_id=row["sample_id"],
                company_id=row["company_id"],
                published_at=published,
                text=row["text"],
                label=label,
            )
        )
    return FeatureDataset(variant=variant, rows=tuple(rows))


def with_labels(
    dataset: FeatureDataset, labels: Mapping[str, SentimentClass]
) -> FeatureDataset:
    """Attach labels by sample_id, keeping only the rows that have one."""
    rows = tuple(
        DatasetRow(r.sample_id, r.company_id, r.published_at, r.text, labels[r.sample_id])
        for r in dataset.rows
        if r.sample_id in labels
    )
    return FeatureDataset(variant=dataset.variant, rows=rows)


def build_query(company_name: str, ticker: str, company_id: str | None = None) -> Query:
    """Search query per company: the quoted name, OR'd with the ticker when
    one exists."""
    if not company_name:
        raise EmptyName("company_name must be non-empty")
    query = f'"{company_name}" OR {ticker}' if ticker else f'"{company_name}"'
    return Query(company_id=company_id if company_id is not None else company_name, query_string=query)


@dataclass(frozen=True)
class FetchRequest:
    """One transport call: a query restricted to a single day window."""

    query_string: str
    day: date
    page: int = 1


Transport = Callable[[FetchRequest], "str | bytes"]


def _parse_fetch_payload(body: str | bytes, query: Query, day: date) -> list[ArticleRecord]:
    if isinstance(body, bytes):
        body = body.decode("utf-8", errors="replace")
    try:
        document = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ParseError(f"fetch response for {query.company_id} on {day} is not JSON: {exc}") from exc
    articles = document.get("articles") if isinstance(document, dict) else None
    if not isinstance(articles, list):
        raise ParseError(f"fetch response for {query.company_id} on {day} lacks an 'articles' array")
    records = []
    for item in articles:
        if not isinstance(item, dict):
            raise ParseError(f"fetch response for {query.company_id} on {day} has a non-object article")
        raw_when = item.get("publishedAt")
        if raw_when:
            try:
                published = parse_iso_date(str(raw_when))
            except ValueError:
                raise ParseError(f"article for {query.company_id} has bad publishedAt {raw_when!r}") from None
        else:
            published = day
        records.append(
            ArticleRecord(
                company_id=query.company_id,
                ticker="",
                title=normalize_text(str(item.get("title") or "")),
                description=normalize_text(str(item.get("description") or "")),
                content=normalize_text(str(item.get("content") or "")),
                author=normalize_text(str(item.get("author") or "")),
                published_at=published,
                source="",
            )
        )
    return records


def fetch_articles(
    query: Query, from_date: date, to_date: date, transport: Transport
) -> list[ArticleRecord]:
    """Fetch articles one day-window at a time through the injected transport.

    Each day's request is retried at most MAX_FETCH_RETRIES times before the
    failure propagates as TransportError. The transport returns the raw
    response body; the body must be a JSON document with an ``articles``
    array.
    """
    if from_date > to_date:
        raise ValueError("from_date must not be after to_date")
    records = []
    day = from_date
    while day <= to_date:
        request = FetchRequest(query_string=query.query_string, day=day)
        last_error: Exception | None = None
        for _ in range(1 + MAX_FETCH_RETRIES):
            try:
                body = transport(request)
                last_error = None
                break
            except Exception as exc:  # noqa: BLE001 - transport is caller code
                last_error = exc
        if last_error is not None:
            raise TransportError(
                f"transport failed for {query.company_id} on {day} "
                f"after {1 + MAX_FETCH_RETRIES} attempts: {last_error}"
            ) from last_error
        records.extend(_parse_fetch_payload(body, query, day))
        day = day + timedelta(days=1)
    return records
