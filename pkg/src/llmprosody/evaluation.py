"""Listening-test aggregation: MOS summaries, paired t-tests, preference shares.

Ratings are 1-5 opinion scores per (stimulus, system, rater); preferences are
three-way forced choices per stimulus set.  Display values round half-up to
one decimal; the raw values are always kept alongside.  Confidence intervals
are t-based and labelled as such in the formatted output.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
from scipy import stats as sps

from .errors import DataError


class InsufficientData(DataError):
    """Too few ratings for the requested summary."""


class NoPairs(DataError):
    """Fewer than two complete pairs for a paired test."""


class MixedSystemSets(DataError):
    """Preference records do not all share one system set."""


class EmptyInput(DataError):
    """No records to aggregate."""


class UnlabeledSet(DataError):
    """A preference set has no style label."""


class RecordFormatError(DataError):
    """A ratings/preferences document does not follow the expected format."""


@dataclass(frozen=True)
class RatingRecord:
    stimulus_id: str
    system_id: str
    rater_id: str
    score: int

    def __post_init__(self) -> None:
        if self.score not in (1, 2, 3, 4, 5):
            raise RecordFormatError(f"score must be an integer 1..5, got {self.score!r}")


@dataclass(frozen=True)
class PreferenceRecord:
    set_id: str
    rater_id: str
    chosen_system: str
    systems_in_set: tuple[str, str, str]

    def __post_init__(self) -> None:
        if len(self.systems_in_set) != 3 or len(set(self.systems_in_set)) != 3:
            raise RecordFormatError(
                f"systems_in_set must name 3 distinct systems, got {self.systems_in_set!r}"
            )
        if self.chosen_system not in self.systems_in_set:
            raise RecordFormatError(
                f"chosen system {self.chosen_system!r} not in {self.systems_in_set!r}"
            )


def _round_half_up_1(value: Decimal) -> Decimal:
    return value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class MosSummary:
    """Per-system MOS with a t-based confidence interval."""

    mean: float
    ci_halfwidth: float
    n: int
    display: str  # e.g. "3.1±0.2", half-up rounding to 1 decimal


def mos_summary(
    records: list[RatingRecord] | tuple[RatingRecord, ...],
    confidence: float = 0.95,
) -> dict[str, MosSummary]:
    """Mean opinion score per system with a two-tailed t confidence interval."""
    if not 0 < confidence < 1:
        raise DataError(f"confidence must be in (0, 1), got {confidence}")
    by_system: dict[str, list[int]] = {}
    for record in records:
        by_system.setdefault(record.system_id, []).append(record.score)
    if not by_system:
        raise EmptyInput("no rating records")
    summaries: dict[str, MosSummary] = {}
    for system in sorted(by_system):
        scores = by_system[system]
        n = len(scores)
        if n < 2:
            raise InsufficientData(f"system {system!r} has {n} rating(s); need at least 2")
        mean = float(np.mean(scores))
        sd = float(np.std(scores, ddof=1))
        tcrit = float(sps.t.ppf(0.5 + confidence / 2.0, n - 1))
        halfwidth = tcrit * sd / math.sqrt(n)
        display_mean = _round_half_up_1(Decimal(sum(scores)) / Decimal(n))
        display_hw = _round_half_up_1(Decimal(str(halfwidth)))
        summaries[system] = MosSummary(
            mean=mean,
            ci_halfwidth=halfwidth,
            n=n,
            display=f"{display_mean}±{display_hw}",
        )
    return summaries


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    flag: str | None = None  # 'all_zero_differences' or 'zero_variance'


def paired_t_test(
    a: list[RatingRecord] | tuple[RatingRecord, ...],
    b: list[RatingRecord] | tuple[RatingRecord, ...],
) -> TTestResult:
    """Two-tailed paired t-test, pairing ratings by (stimulus_id, rater_id).

    Degenerate difference sets are flagged instead of crashing: identical
    pairs give (t=0, p=1), constant nonzero differences give p=0 with an
    infinite t.
    """

    def keyed(records) -> dict[tuple[str, str], int]:
        table: dict[tuple[str, str], int] = {}
        for record in records:
            key = (record.stimulus_id, record.rater_id)
            if key in table:
                raise DataError(f"duplicate rating for stimulus/rater pair {key!r}")
            table[key] = record.score
        return table

    table_a = keyed(a)
    table_b = keyed(b)
    keys = sorted(set(table_a) & set(table_b))
    if len(keys) < 2:
        raise NoPairs(f"need at least 2 complete pairs, got {len(keys)}")
    diffs = np.array([table_a[k] - table_b[k] for k in keys], dtype=float)
    df = len(keys) - 1
    if np.all(diffs == 0):
        return TTestResult(t=0.0, p=1.0, df=df, flag="all_zero_differences")
    sd = float(np.std(diffs, ddof=1))
    mean = float(np.mean(diffs))
    if sd == 0.0:
        return TTestResult(
            t=math.copysign(math.inf, mean), p=0.0, df=df, flag="zero_variance"
        )
    t = mean / (sd / math.sqrt(len(keys)))
    p = 2.0 * float(sps.t.sf(abs(t), df))
    return TTestResult(t=t, p=p, df=df)


@dataclass(frozen=True)
class PreferenceShare:
    system: str
    wins: int
    fraction: float  # raw wins/total
    percent: float  # half-up rounded to 1 decimal


@dataclass(frozen=True)
class PreferenceSummary:
    shares: tuple[PreferenceShare, ...]  # ordered by wins desc, then name
    total: int


def preference_summary(
    records: list[PreferenceRecord] | tuple[PreferenceRecord, ...],
) -> PreferenceSummary:
    """Win percentage per system over three-way preference records."""
    if not records:
        raise EmptyInput("no preference records")
    system_sets = {frozenset(record.systems_in_set) for record in records}
    if len(system_sets) != 1:
        raise MixedSystemSets(f"records mix {len(system_sets)} different system sets")
    systems = sorted(system_sets.pop())
    wins = Counter(record.chosen_system for record in records)
    total = len(records)
    ordered = sorted(systems, key=lambda s: (-wins[s], s))
    shares = tuple(
        PreferenceShare(
            system=system,
            wins=wins[system],
            fraction=wins[system] / total,
            percent=float(_round_half_up_1(Decimal(100 * wins[system]) / Decimal(total))),
        )
        for system in ordered
    )
    return PreferenceSummary(shares=shares, total=total)


def style_breakdown(
    records: list[PreferenceRecord] | tuple[PreferenceRecord, ...],
    style_of_set: dict[str, str],
) -> dict[str, PreferenceSummary]:
    """Group preference records by style label and summarize each group."""
    if not records:
        raise EmptyInput("no preference records")
    groups: dict[str, list[PreferenceRecord]] = {}
    for record in records:
        style = style_of_set.get(record.set_id)
        if style is None:
            raise UnlabeledSet(f"set {record.set_id!r} has no style label")
        groups.setdefault(style, []).append(record)
    return {style: preference_summary(groups[style]) for style in sorted(groups)}


RATINGS_HEADER = "stimulus_id\tsystem_id\trater_id\tscore"
PREFERENCES_HEADER = "set_id\trater_id\tchosen_system\tsystems_in_set"
STYLE_LABELS_HEADER = "set_id\tstyle"


def _rows(document: str, header: str, n_fields: int, what: str):
    lines = document.split("\n")
    if not lines or lines[0] != header:
        raise RecordFormatError(f"{what} file must start with header {header!r}")
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != n_fields:
            raise RecordFormatError(
                f"line {line_number}: expected {n_fields} tab-separated fields, got {len(fields)}"
            )
        yield line_number, fields


def parse_ratings(document: str) -> list[RatingRecord]:
    records = []
    for line_number, fields in _rows(document, RATINGS_HEADER, 4, "ratings"):
        try:
            score = int(fields[3])
        except ValueError:
            raise RecordFormatError(
                f"line {line_number}: score {fields[3]!r} is not an integer"
            ) from None
        try:
            records.append(
                RatingRecord(
                    stimulus_id=fields[0], system_id=fields[1], rater_id=fields[2], score=score
                )
            )
        except RecordFormatError as exc:
            raise RecordFormatError(f"line {line_number}: {exc}") from None
    return records


def parse_preferences(document: str) -> list[PreferenceRecord]:
    records = []
    for line_number, fields in _rows(document, PREFERENCES_HEADER, 4, "preferences"):
        systems = tuple(fields[3].split(","))
        try:
            records.append(
                PreferenceRecord(
                    set_id=fields[0],
                    rater_id=fields[1],
                    chosen_system=fields[2],
                    systems_in_set=systems,
                )
            )
        except RecordFormatError as exc:
            raise RecordFormatError(f"line {line_number}: {exc}") from None
    return records


def parse_style_labels(document: str) -> dict[str, str]:
    labels: dict[str, str] = {}
    for line_number, fields in _rows(document, STYLE_LABELS_HEADER, 2, "style labels"):
        if fields[0] in labels:
            raise RecordFormatError(f"line {line_number}: duplicate set id {fields[0]!r}")
        labels[fields[0]] = fields[1]
    return labels


def format_mos_summary(summaries: dict[str, MosSummary], confidence: float = 0.95) -> str:
    """Key/value rows for a MOS summary (stable system order)."""
    lines = ["ci_method\tt-distribution", f"confidence\t{confidence!r}"]
    for system in sorted(summaries):
        s = summaries[system]
        lines.append(f"{system}.mean\t{s.mean!r}")
        lines.append(f"{system}.ci_halfwidth\t{s.ci_halfwidth!r}")
        lines.append(f"{system}.n\t{s.n}")
        lines.append(f"{system}.display\t{s.display}")
    return "\n".join(lines) + "\n"


def format_preference_summary(summary: PreferenceSummary) -> str:
    """Key/value rows for a preference summary, ordered by wins."""
    lines = [f"total\t{summary.total}"]
    for share in summary.shares:
        lines.append(f"{share.system}.percent\t{share.percent:.1f}")
        lines.append(f"{share.system}.wins\t{share.wins}")
        lines.append(f"{share.system}.fraction\t{share.fraction!r}")
    return "\n".join(lines) + "\n"


def format_style_breakdown(breakdown: dict[str, PreferenceSummary]) -> str:
    blocks = []
    for style in sorted(breakdown):
        summary = breakdown[style]
        lines = [f"{style}.total\t{summary.total}"]
        for share in summary.shares:
            lines.append(f"{style}.{share.system}.percent\t{share.percent:.1f}")
            lines.append(f"{style}.{share.system}.wins\t{share.wins}")
        blocks.append("\n".join(lines))
    return "\n".join(blocks) + "\n"
