"""Daily sentiment-signal trading simulation.

Each article gets four ordinal predictions (one per text variant); the mean
over a company's same-day predictions is that day's signal. The strategy
buys at the close when the signal rises above 1 and sells at the close when
it drops to 1 or below; positions still open at the end are liquidated at
the last available close. Per-asset ROI compounds round trips
(sell/buy products minus one); the buy-and-hold benchmark applies the same
return formula to a full price window.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .core import (
    BadDate,
    DatasetVariant,
    MissingColumn,
    SentitradeError,
    as_text_stream,
    parse_iso_date,
)
from .corpus import ArticleRecord, variant_text
from .selection import FittedPipeline


class MissingPrice(SentitradeError):
    """A signal date inside the backtest window has no closing price."""


class InsufficientData(SentitradeError):
    """A price series does not cover enough of the requested window."""


class EmptyReport(SentitradeError):
    """Summary statistics need at least one asset."""


@dataclass(frozen=True)
class PriceSeries:
    """Closing prices for one asset, strictly increasing dates."""

    ticker: str
    dates: tuple[date, ...]
    closes: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.dates) != len(self.closes):
            raise ValueError("dates and closes must align")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError(f"{self.ticker}: dates must be strictly increasing")
        if any(c <= 0 for c in self.closes):
            raise ValueError(f"{self.ticker}: closes must be positive")

    def close_on(self, day: date) -> float | None:
        # Linear scan is fine at daily granularity; series stay small.
        for d, c in zip(self.dates, self.closes):
            if d == day:
                return c
            if d > day:
                return None
        return None

    def window(self, start: date, end: date) -> list[tuple[date, float]]:
        return [(d, c) for d, c in zip(self.dates, self.closes) if start <= d <= end]


@dataclass(frozen=True)
class SignalEntry:
    mean_sentiment: float  # in [0, 2]
    n_predictions: int
    n_articles: int


@dataclass
class SentimentSignal:
    """Per-date mean sentiment for one company; only dates with scored
    articles appear."""

    company_id: str
    ticker: str
    by_date: dict[date, SignalEntry] = field(default_factory=dict)

    @property
    def total_articles(self) -> int:
        return sum(entry.n_articles for entry in self.by_date.values())


@dataclass(frozen=True)
class RoundTrip:
    buy_date: date
    buy_close: float
    sell_date: date
    sell_close: float


@dataclass
class TradeLedger:
    company_id: str
    ticker: str
    trips: list[RoundTrip] = field(default_factory=list)
    open_position: bool = False


@dataclass(frozen=True)
class Summary:
    avg_roi: float
    max_win: float
    max_loss: float
    avg_win: float | None  # absent when there are no winners
    avg_loss: float | None  # absent when there are no losers
    wl_ratio: float | None  # winners/losers; inf when no losers; absent when neither
    n_winners: int
    n_losers: int


@dataclass(frozen=True)
class BacktestReport:
    min_articles: int
    asset_rois: dict[str, float]  # keyed by ticker
    summary: Summary
    benchmarks: dict[str, float]

    @property
    def n_assets(self) -> int:
        return len(self.asset_rois)


def read_prices_csv(stream: IO) -> dict[str, PriceSeries]:
    """Parse the price CSV (ticker,date,close) into per-ticker series."""
    reader = csv.DictReader(as_text_stream(stream))
    header = reader.fieldnames or []
    missing = [col for col in ("ticker", "date", "close") if col not in header]
    if missing:
        raise MissingColumn(f"price CSV header lacks: {', '.join(missing)}")
    rows: dict[str, list[tuple[date, float]]] = defaultdict(list)
    for index, row in enumerate(reader):
        try:
            day = parse_iso_date(row["date"])
        except ValueError:
            raise BadDate(f"price row {index}: bad date {row['date']!r}") from None
        try:
            close = float(row["close"])
        except ValueError:
            raise SentitradeError(f"price row {index}: bad close {row['close']!r}") from None
        rows[row["ticker"]].append((day, close))
    series = {}
    for ticker in sorted(rows):
        pairs = sorted(rows[ticker])
        dates = tuple(d for d, _ in pairs)
        if len(set(dates)) != len(dates):
            raise SentitradeError(f"{ticker}: duplicate price dates")
        series[ticker] = PriceSeries(ticker=ticker, dates=dates, closes=tuple(c for _, c in pairs))
    return series


def daily_signal(
    pipelines: Mapping[DatasetVariant, FittedPipeline],
    articles: Sequence[ArticleRecord],
) -> SignalEntry:
    """Score one company-day: every article through every variant's model,
    mean over all 4 x n_articles ordinal predictions."""
    missing = [v.value for v in DatasetVariant if v not in pipelines]
    if missing:
        raise ValueError(f"need one pipeline per variant, missing: {', '.join(missing)}")
    if not articles:
        raise ValueError("daily_signal needs at least one article")
    predictions: list[int] = []
    for variant in DatasetVariant:
        texts = [variant_text(article, variant) for article in articles]
        predictions.extend(int(p) for p in pipelines[variant].predict_texts(texts))
    return SignalEntry(
        mean_sentiment=float(np.mean(predictions)),
        n_predictions=len(predictions),
        n_articles=len(articles),
    )


def build_signals(
    pipelines: Mapping[DatasetVariant, FittedPipeline],
    records: Iterable[ArticleRecord],
) -> dict[str, SentimentSignal]:
    """Group articles by (company, day) and score each group."""
    grouped: dict[str, dict[date, list[ArticleRecord]]] = defaultdict(lambda: defaultdict(list))
    tickers: dict[str, str] = {}
    for record in records:
        grouped[record.company_id][record.published_at].append(record)
        tickers.setdefault(record.company_id, record.ticker)
    signals = {}
    for company_id in sorted(grouped):
        signal = SentimentSignal(company_id=company_id, ticker=tickers[company_id])
        for day in sorted(grouped[company_id]):
            signal.by_date[day] = daily_signal(pipelines, grouped[company_id][day])
        signals[company_id] = signal
    return signals


def run_backtest(
    prices: Mapping[str, PriceSeries],
    signals: Mapping[str, SentimentSignal],
    min_articles: int,
    start: date,
    end: date,
) -> dict[str, TradeLedger]:
    """Walk each asset's signals through the buy/sell state machine.

    Assets with total article count at or below min_articles are excluded.
    Buy at the close when not owned and the signal exceeds 1; sell at the
    close when owned and the signal is at or below 1; days without a signal
    hold. Every in-range signal date must have a close (MissingPrice
    otherwise). Open positions liquidate at the final in-range close; a
    position opened at that final close becomes a zero-length trip and is
    dropped.
    """
    if start > end:
        raise ValueError("start must not be after end")
    ledgers: dict[str, TradeLedger] = {}
    selected = [
        signals[company_id]
        for company_id in signals
        if signals[company_id].total_articles > min_articles
    ]
    for signal in sorted(selected, key=lambda s: (s.ticker, s.company_id)):
        series = prices.get(signal.ticker)
        ledger = TradeLedger(company_id=signal.company_id, ticker=signal.ticker)
        buy_date: date | None = None
        buy_close = 0.0
        for day in sorted(signal.by_date):
            if not start <= day <= end:
                continue
            close = series.close_on(day) if series is not None else None
            if close is None:
                raise MissingPrice(f"{signal.ticker}: no close for signal date {day}")
            sentiment = signal.by_date[day].mean_sentiment
            if buy_date is None and sentiment > 1.0:
                buy_date, buy_close = day, close
            elif buy_date is not None and sentiment <= 1.0:
                ledger.trips.append(RoundTrip(buy_date, buy_close, day, close))
                buy_date = None
        if buy_date is not None:
            in_range = series.window(start, end) if series is not None else []
            if in_range:
                last_day, last_close = in_range[-1]
                if last_day > buy_date:
                    ledger.trips.append(RoundTrip(buy_date, buy_close, last_day, last_close))
        ledgers[signal.company_id] = ledger
    return ledgers


def asset_roi(ledger: TradeLedger) -> float:
    """Compounded return over the ledger's round trips; 0 with no trades."""
    if ledger.open_position:
        raise ValueError("ledger still has an open position")
    ratio = 1.0
    for trip in ledger.trips:
        ratio *= trip.sell_close / trip.buy_close
    return ratio - 1.0


def benchmark_roi(series: PriceSeries, start: date, end: date) -> float:
    """Buy-and-hold return between the first close at/after start and the
    last close at/before end."""
    window = series.window(start, end)
    if len(window) < 2:
        raise InsufficientData(
            f"{series.ticker}: need at least two closes in [{start}, {end}], have {len(window)}"
        )
    initial = window[0][1]
    final = window[-1][1]
    return (final - initial) / initial


def summary_stats(rois: Sequence[float]) -> Summary:
    """The per-simulation summary row: mean ROI, extremes, winner/loser
    aggregates, and the winner-to-loser count ratio."""
    if not rois:
        raise EmptyReport("summary_stats needs at least one asset")
    winners = [r for r in rois if r > 0]
    losers = [r for r in rois if r < 0]
    if losers:
        wl = len(winners) / len(losers)
    elif winners:
        wl = math.inf
    else:
        wl = None
    return Summary(
        avg_roi=sum(rois) / len(rois),
        max_win=max(rois),
        max_loss=min(rois),
        avg_win=sum(winners) / len(winners) if winners else None,
        avg_loss=sum(losers) / len(losers) if losers else None,
        wl_ratio=wl,
        n_winners=len(winners),
        n_losers=len(losers),
    )


def run_report(
    prices: Mapping[str, PriceSeries],
    signals: Mapping[str, SentimentSignal],
    min_articles: int,
    start: date,
    end: date,
    benchmark_tickers: Sequence[str] = (),
) -> BacktestReport:
    """One full simulation at one min-article threshold."""
    ledgers = run_backtest(prices, signals, min_articles, start, end)
    asset_rois = {
        ledgers[company_id].ticker: asset_roi(ledgers[company_id])
        for company_id in sorted(ledgers, key=lambda c: ledgers[c].ticker)
    }
    if not asset_rois:
        raise EmptyReport(f"no asset exceeds {min_articles} articles")
    benchmarks = {
        ticker: benchmark_roi(prices[ticker], start, end)
        for ticker in benchmark_tickers
        if ticker in prices
    }
    return BacktestReport(
        min_articles=min_articles,
        asset_rois=asset_rois,
        summary=summary_stats(list(asset_rois.values())),
        benchmarks=benchmarks,
    )


def emit_chart_data(
    series: PriceSeries,
    signal: SentimentSignal,
    start: date | None = None,
    end: date | None = None,
) -> list[tuple[date, float | None, float | None]]:
    """Rows of (date, scaled_close, scaled_sentiment) for plotting one
    asset. Closes are min-max scaled over the window (all zero when the
    price never moves); sentiment is divided by 2 so the buy threshold sits
    at 0.5."""
    if not series.dates:
        return []
    lo = start if start is not None else series.dates[0]
    hi = end if end is not None else series.dates[-1]
    window = series.window(lo, hi)
    closes = {d: c for d, c in window}
    signal_days = {d: e.mean_sentiment for d, e in signal.by_date.items() if lo <= d <= hi}
    if closes:
        cmin = min(closes.values())
        cmax = max(closes.values())
        span = cmax - cmin
    else:
        span = 0.0
    rows = []
    for day in sorted(set(closes) | set(signal_days)):
        scaled_close = None
        if day in closes:
            scaled_close = (closes[day] - cmin) / span if span > 0 else 0.0
        scaled_sent = signal_days[day] / 2.0 if day in signal_days else None
        rows.append((day, scaled_close, scaled_sent))
    return rows
