"""Presentation-attack metrics: APCER, BPCER, ACER, accuracy, and the
threshold-sweep trade-off curve.

Conventions (fixed so the error-rate denominators come out as defined):
the positive class is the bona fide (live) presentation, label 0; a score
is the model's probability of bona fide; a sample is predicted live iff
``score >= threshold``. An attack accepted as live is therefore a false
positive, and APCER = FP / (FP + TN).

Rates are plain fractions internally; format as percentages only at the
report boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence


class UndefinedMetricError(ValueError):
    """A rate's denominator class is absent; returning 0 would corrupt sweeps."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int  # live predicted live
    fp: int  # attack predicted live
    tn: int  # attack predicted attack
    fn: int  # live predicted attack

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalReport:
    threshold: float
    counts: ConfusionCounts
    apcer: float
    bpcer: float
    acer: float
    accuracy: float


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    apcer: float
    bpcer: float


def _check_scored(scores: Sequence[float], labels: Sequence[int]) -> None:
    if len(scores) == 0:
        raise UndefinedMetricError("no scored samples")
    if len(scores) != len(labels):
        raise ValueError(f"scores/labels length mismatch: {len(scores)} vs {len(labels)}")
    bad = [v for v in labels if v not in (0, 1)]
    if bad:
        raise ValueError(f"labels must be 0 (live) or 1 (attack), got {bad[:3]}")


def confusion(scores: Sequence[float], labels: Sequence[int], threshold: float) -> ConfusionCounts:
    """Count outcomes under the predict-live-iff-score>=threshold rule."""
    _check_scored(scores, labels)
    tp = fp = tn = fn = 0
    for s, y in zip(scores, labels):
        live = s >= threshold
        if y == 0:
            if live:
                tp += 1
            else:
                fn += 1
        else:
            if live:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def apcer(c: ConfusionCounts) -> float:
    """Fraction of attack presentations incorrectly classified as bona fide."""
    if c.fp + c.tn == 0:
        raise UndefinedMetricError("APCER undefined: no attack samples")
    return c.fp / (c.fp + c.tn)


def bpcer(c: ConfusionCounts) -> float:
    """Fraction of bona fide presentations incorrectly classified as attacks."""
    if c.fn + c.tp == 0:
        raise UndefinedMetricError("BPCER undefined: no bona fide samples")
    return c.fn / (c.fn + c.tp)


def acer(apcer_rate: float, bpcer_rate: float) -> float:
    """Arithmetic mean of APCER and BPCER."""
    if not (0.0 <= apcer_rate <= 1.0 and 0.0 <= bpcer_rate <= 1.0):
        raise ValueError(f"rates must lie in [0, 1], got {apcer_rate}, {bpcer_rate}")
    return (apcer_rate + bpcer_rate) / 2.0


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise UndefinedMetricError("accuracy undefined: no samples")
    return (c.tp + c.tn) / c.total


def evaluate(scores: Sequence[float], labels: Sequence[int], threshold: float) -> EvalReport:
    c = confusion(scores, labels, threshold)
    a = apcer(c)
    b = bpcer(c)
    return EvalReport(threshold, c, a, b, acer(a, b), accuracy(c))


def threshold_sweep(scores: Sequence[float], labels: Sequence[int]) -> list[SweepPoint]:
    """APCER/BPCER trade-off over every distinct score plus ±inf boundaries.

    Thresholds are strictly increasing; APCER is non-increasing and BPCER
    non-decreasing along the curve (larger thresholds accept fewer samples
    as live).
    """
    _check_scored(scores, labels)
    if len(set(labels)) < 2:
        raise UndefinedMetricError("threshold sweep needs both classes present")
    thresholds = [float("-inf")] + sorted(set(float(s) for s in scores)) + [float("inf")]
    points = []
    for thr in thresholds:
        c = confusion(scores, labels, thr)
        points.append(SweepPoint(thr, apcer(c), bpcer(c)))
    return points


# ---------------------------------------------------------------------------
# Score files and report rendering
# ---------------------------------------------------------------------------

SCORES_HEADER = ["id", "score", "label", "dataset"]


@dataclass(frozen=True)
class ScoreRow:
    id: str
    score: float
    label: int
    dataset: str


def load_scores(path: str | Path) -> list[ScoreRow]:
    """Parse an ``id,score,label,dataset`` CSV; errors name their line."""
    path = Path(path)
    if not path.exists():
        raise ValueError(f"score file not found: {path}")
    rows = []
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected header {','.join(SCORES_HEADER)}")
        if [h.strip() for h in header] != SCORES_HEADER:
            raise ValueError(f"{path}: bad header {header!r}, expected {SCORES_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ValueError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            ident, score_s, label_s, dataset = (f.strip() for f in row)
            try:
                score = float(score_s)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: bad score {score_s!r}")
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"{path}: line {lineno}: score must be in [0, 1], got {score}")
            if label_s not in ("0", "1"):
                raise ValueError(f"{path}: line {lineno}: label must be 0 or 1, got {label_s!r}")
            rows.append(ScoreRow(ident, score, int(label_s), dataset))
    if not rows:
        raise ValueError(f"{path}: no score rows")
    return rows


def render_report_table(reports: dict[str, EvalReport]) -> str:
    """Aligned-text table, one column per dataset tag, rates as percentages."""
    names = list(reports)
    width = max(12, *(len(n) + 2 for n in names))
    header = f"{'Metric':<14}" + "".join(f"{n:>{width}}" for n in names)
    lines = [header]
    for metric, getter in [
        ("APCER", lambda r: r.apcer),
        ("BPCER", lambda r: r.bpcer),
        ("ACER", lambda r: r.acer),
        ("Accuracy (%)", lambda r: r.accuracy),
    ]:
        row = f"{metric:<14}" + "".join(
            f"{100.0 * getter(reports[n]):>{width}.4g}" for n in names
        )
        lines.append(row)
    thr = ", ".join(f"{n}: {reports[n].threshold:g}" for n in names)
    lines.append(f"(decision threshold on P(bona fide): {thr})")
    return "\n".join(lines)


def write_report_csv(reports: dict[str, EvalReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(
            ["dataset", "threshold", "tp", "fp", "tn", "fn", "apcer", "bpcer", "acer", "accuracy"]
        )
        for name, r in reports.items():
            writer.writerow(
                [
                    name,
                    repr(r.threshold),
                    r.counts.tp,
                    r.counts.fp,
                    r.counts.tn,
                    r.counts.fn,
                    repr(r.apcer),
                    repr(r.bpcer),
                    repr(r.acer),
                    repr(r.accuracy),
                ]
            )


def write_sweep_csv(points: list[SweepPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["threshold", "apcer", "bpcer"])
        for p in points:
            writer.writerow([repr(p.threshold), repr(p.apcer), repr(p.bpcer)])
