"""Threshold trading rule and its daily bid/ask backtest.

The rule buys one option contract on day k whenever the one-day-ahead
estimate is at least the price payable now (the current ask), enters at the
day-k ask and exits unconditionally at the day-(k+1) bid, so every trade
pays the spread.  In classifier mode the signal is a probability and the
threshold is 0.5.  The last day never opens a trade.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from typing import Sequence

from .errors import DataError
from .market_data import QuoteRecord

__all__ = [
    "BacktestResult",
    "TradeDecision",
    "backtest",
    "decide",
    "emit_plot_data",
]

BUY = "buy"
ABSTAIN = "abstain"
CLASSIFIER_THRESHOLD = 0.5


def decide(est: float, real0: float) -> str:
    """``"buy"`` iff est >= real0 (boundary included), else ``"abstain"``."""
    if not math.isfinite(real0) or real0 <= 0:
        raise ValueError(f"real0 must be finite and positive, got {real0}")
    if math.isnan(est):
        return ABSTAIN
    return BUY if est >= real0 else ABSTAIN


@dataclass(frozen=True)
class TradeDecision:
    """One tradable day: the signal pair, the action, and realized P&L.

    ``pnl`` is None on abstain days.  In classifier mode ``est`` holds the
    probability and ``real0`` the 0.5 threshold.  A missing signal is stored
    as est = nan, which always abstains.
    """

    day: date
    action: str
    est: float
    real0: float
    pnl: float | None = None

    def __post_init__(self) -> None:
        expected = BUY if est_covers(self.est, self.real0) else ABSTAIN
        if self.action != expected:
            raise DataError(
                f"action {self.action!r} contradicts est={self.est} vs real0={self.real0}"
            )
        if (self.pnl is not None) != (self.action == BUY):
            raise DataError("pnl must be set exactly on buy days")


def est_covers(est: float, real0: float) -> bool:
    return not math.isnan(est) and est >= real0


@dataclass(frozen=True)
class BacktestResult:
    """Per-day decisions, the cumulative P&L curve, and trade statistics."""

    decisions: list[TradeDecision]
    equity_curve: list[float]
    final_pnl: float
    n_trades: int
    hit_rate: float

    def to_json(self) -> dict:
        return {
            "final_pnl": self.final_pnl,
            "n_trades": self.n_trades,
            "hit_rate": self.hit_rate,
        }


def backtest(
    records: Sequence[QuoteRecord],
    signals: Sequence[float | None],
    mode: str = "qrm",
) -> BacktestResult:
    """Run the rule over a series with day-aligned signals.

    ``signals[k]`` drives the day-k decision: a price estimate compared
    against the day-k ask in ``"qrm"`` mode, a probability compared against
    0.5 in ``"classifier"`` mode, or None to abstain.  A buy enters at the
    day-k ask and exits at the day-(k+1) bid.
    """
    if mode not in ("qrm", "classifier"):
        raise DataError(f"mode must be 'qrm' or 'classifier', got {mode!r}")
    if len(signals) != len(records):
        raise DataError(
            f"signals ({len(signals)}) must align 1:1 with records ({len(records)})"
        )
    if len(records) < 2:
        raise DataError(f"need at least 2 records to backtest, got {len(records)}")

    decisions: list[TradeDecision] = []
    equity_curve: list[float] = []
    cumulative = 0.0
    wins = 0
    n_trades = 0
    for k in range(len(records) - 1):
        rec = records[k]
        signal = signals[k]
        est = math.nan if signal is None else float(signal)
        real0 = rec.option_ask if mode == "qrm" else CLASSIFIER_THRESHOLD
        action = decide(est, real0)
        pnl = None
        if action == BUY:
            pnl = records[k + 1].option_bid - rec.option_ask
            cumulative += pnl
            n_trades += 1
            if pnl > 0:
                wins += 1
        decisions.append(TradeDecision(day=rec.day, action=action, est=est, real0=real0, pnl=pnl))
        equity_curve.append(cumulative)
    return BacktestResult(
        decisions=decisions,
        equity_curve=equity_curve,
        final_pnl=cumulative,
        n_trades=n_trades,
        hit_rate=wins / n_trades if n_trades else 0.0,
    )


def emit_plot_data(result: BacktestResult, path) -> None:
    """Plot-ready CSV ``date,cumulative_pnl,trade_pnl,action``, one row per day."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "cumulative_pnl", "trade_pnl", "action"])
        for decision, equity in zip(result.decisions, result.equity_curve):
            writer.writerow(
                [
                    decision.day.isoformat(),
                    repr(equity),
                    repr(decision.pnl if decision.pnl is not None else 0.0),
                    decision.action,
                ]
            )
