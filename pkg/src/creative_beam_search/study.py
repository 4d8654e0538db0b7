"""A/B preference study: blinded comparisons, an append-only record log,
and the aggregate statistics.

Each comparison pairs the pipeline output with the standard-sampling
output for one prompt, shows them in a random order, and records a single
human preference. The log is line-delimited JSON, one record state per
line; on reload the latest state of each record wins.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from fractions import Fraction
from itertools import product
from pathlib import Path
from random import Random
from typing import Iterable

from .model import LanguageModel
from .pipeline import CbsConfig, run_cbs, run_standard

RETENTION_STATE_CAP = 10**7


class Arm(str, Enum):
    CBS = "CBS"
    STD = "STD"


class Preference(str, Enum):
    CBS = "CBS"
    STD = "STD"
    SAME = "SAME"
    PENDING = "PENDING"


class Choice(str, Enum):
    FIRST = "first"
    SECOND = "second"
    SAME = "same"


class RecordNotFoundError(KeyError):
    """No comparison with the given id exists."""


class AlreadyAnsweredError(RuntimeError):
    """The comparison already holds a preference; votes are single-shot."""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class ComparisonRecord:
    id: str
    prompt: str
    cbs_text: str
    std_text: str
    first_shown: Arm
    cbs_equals_dbs: bool
    preference: Preference
    created_at: str
    answered_at: str | None

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "id": self.id,
                "prompt": self.prompt,
                "cbs_text": self.cbs_text,
                "std_text": self.std_text,
                "first_shown": self.first_shown.value,
                "cbs_equals_dbs": self.cbs_equals_dbs,
                "preference": self.preference.value,
                "created_at": self.created_at,
                "answered_at": self.answered_at,
            },
            sort_keys=True,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "ComparisonRecord":
        return cls(
            id=data["id"],
            prompt=data["prompt"],
            cbs_text=data["cbs_text"],
            std_text=data["std_text"],
            first_shown=Arm(data["first_shown"]),
            cbs_equals_dbs=bool(data["cbs_equals_dbs"]),
            preference=Preference(data["preference"]),
            created_at=data["created_at"],
            answered_at=data.get("answered_at"),
        )


class RecordLog:
    """Append-only JSONL store; one record state per line, last state wins."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, record: ComparisonRecord) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(record.to_json_line() + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load(self) -> dict[str, ComparisonRecord]:
        records: dict[str, ComparisonRecord] = {}
        if not self.path.exists():
            return records
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = ComparisonRecord.from_dict(json.loads(line))
                records[record.id] = record
        return records


def derandomize(first_shown: Arm, choice: Choice) -> Preference:
    """Map the blinded choice back onto the arm the voter actually saw."""
    if choice is Choice.SAME:
        return Preference.SAME
    chosen_first = choice is Choice.FIRST
    arm = first_shown if chosen_first else (Arm.STD if first_shown is Arm.CBS else Arm.CBS)
    return Preference(arm.value)


def draw_first_shown(rng: Random) -> Arm:
    """Unbiased coin for which arm takes the first display slot."""
    return Arm.CBS if rng.random() < 0.5 else Arm.STD


class StudyService:
    """Creates comparisons, records votes, and serializes log writes.

    State transitions are atomic under a single lock: concurrent votes on
    one record yield exactly one success and one conflict.
    """

    def __init__(
        self,
        model: LanguageModel,
        cfg: CbsConfig,
        log: RecordLog,
        judge_model: LanguageModel | None = None,
        order_seed: int | None = None,
    ):
        self.model = model
        self.cfg = cfg
        self.log = log
        self.judge_model = judge_model
        self._order_rng = Random(order_seed) if order_seed is not None else Random()
        self._lock = threading.Lock()
        self._records = log.load()

    def new_comparison(self, prompt: str, order_seed: int | None = None) -> ComparisonRecord:
        """Run both arms, shuffle their order, persist a PENDING record.

        Generation happens outside the lock; a generation failure leaves
        the log untouched. With ``order_seed`` given, the shown order is a
        deterministic function of the seed.
        """
        if not prompt.strip():
            raise ValueError("prompt must be non-empty")
        cbs = run_cbs(self.model, prompt, self.cfg, judge_model=self.judge_model)
        std_text = run_standard(self.model, prompt, self.cfg)
        rng = Random(order_seed) if order_seed is not None else self._order_rng
        first_shown = draw_first_shown(rng)
        record = ComparisonRecord(
            id=secrets.token_hex(16),
            prompt=prompt,
            cbs_text=cbs.output_text,
            std_text=std_text,
            first_shown=first_shown,
            cbs_equals_dbs=cbs.cbs_equals_dbs,
            preference=Preference.PENDING,
            created_at=_now(),
            answered_at=None,
        )
        with self._lock:
            self._records[record.id] = record
            self.log.append(record)
        return record

    def submit_preference(self, record_id: str, choice: Choice | str) -> ComparisonRecord:
        choice = Choice(choice)
        with self._lock:
            record = self._records.get(record_id)
            if record is None:
                raise RecordNotFoundError(record_id)
            if record.preference is not Preference.PENDING:
                raise AlreadyAnsweredError(record_id)
            updated = replace(
                record,
                preference=derandomize(record.first_shown, choice),
                answered_at=_now(),
            )
            self._records[record_id] = updated
            self.log.append(updated)
        return updated

    def records(self) -> list[ComparisonRecord]:
        with self._lock:
            return list(self._records.values())

    def answered_records(self) -> list[ComparisonRecord]:
        return [r for r in self.records() if r.preference is not Preference.PENDING]


_ROWS = (Preference.CBS, Preference.STD, Preference.SAME)


@dataclass(frozen=True)
class StatsTable:
    """Exact preference proportions, split by whether the vote could matter.

    Rows follow ``_ROWS``; column 0 is cbs != dbs, column 1 is cbs == dbs.
    Cells are counts divided by the number of answered records.
    """

    cells: tuple[tuple[float, float], ...]
    row_totals: tuple[float, float, float]
    col_totals: tuple[float, float]
    n: int

    def to_dict(self) -> dict:
        return {
            "rows": [p.value for p in _ROWS],
            "columns": ["cbs_neq_dbs", "cbs_eq_dbs"],
            "cells": [list(row) for row in self.cells],
            "row_totals": list(self.row_totals),
            "col_totals": list(self.col_totals),
            "n": self.n,
        }


def compute_stats(records: Iterable[ComparisonRecord]) -> StatsTable:
    """Tally answered records into the 3x2 proportion matrix."""
    answered = [r for r in records if r.preference is not Preference.PENDING]
    if not answered:
        raise ValueError("no answered records to aggregate")
    n = len(answered)
    counts = [[0, 0] for _ in _ROWS]
    for record in answered:
        row = _ROWS.index(record.preference)
        col = 1 if record.cbs_equals_dbs else 0
        counts[row][col] += 1
    cells = tuple((row[0] / n, row[1] / n) for row in counts)
    row_totals = tuple((row[0] + row[1]) / n for row in counts)
    col_totals = (
        sum(row[0] for row in counts) / n,
        sum(row[1] for row in counts) / n,
    )
    return StatsTable(cells=cells, row_totals=row_totals, col_totals=col_totals, n=n)  # type: ignore[arg-type]


def random_retention_probability(k: int, num_votes: int) -> Fraction:
    """Probability that rank 0 wins when every vote is uniform over k.

    Exhaustively enumerates all k**num_votes vote vectors, applies the
    plurality rule with the lowest-rank tie-break, and returns the exact
    fraction of vectors in which the rank-0 candidate is retained.
    """
    if k < 1 or num_votes < 1:
        raise ValueError("k and num_votes must be >= 1")
    states = k**num_votes
    if states > RETENTION_STATE_CAP:
        raise ValueError(f"{states} vote vectors exceed the enumeration cap of {RETENTION_STATE_CAP}")
    wins = 0
    for vector in product(range(k), repeat=num_votes):
        counts = [0] * k
        for v in vector:
            counts[v] += 1
        best = max(counts)
        winner = counts.index(best)  # first (= lowest-rank) maximum
        if winner == 0:
            wins += 1
    return Fraction(wins, states)
