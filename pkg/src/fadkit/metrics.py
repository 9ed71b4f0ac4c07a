"""Evaluation analyses over per-song score tables.

Covers binary label prediction from score extremes (precision/recall/F1),
per-testset Pearson correlation against listening-test mean opinion scores,
and normalization of effect-degraded scores against a clean baseline.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .estimators import SongScoreTable, select_extremes
from .gaussian import FadScore

LABEL_VALUES = ("high", "medium", "low", "na")

# The five degradations reported by the sensitivity analysis.
EFFECT_NAMES = ("distortion", "lowpass", "reverb", "pitch_down", "pitch_up")


@dataclass(frozen=True)
class LabelRecord:
    """Ground-truth acoustic/musical quality labels for one song."""

    song_id: str
    aq: str
    mq: str

    def validate(self) -> None:
        if not self.song_id:
            raise ValidationError("song_id must be non-empty")
        for name, value in (("aq", self.aq), ("mq", self.mq)):
            if value not in LABEL_VALUES:
                raise ValidationError(
                    f"bad {name} label {value!r} for {self.song_id!r}; "
                    f"expected one of {LABEL_VALUES}"
                )


@dataclass(frozen=True)
class MosRecord:
    """Listening-test mean opinion scores for one song in one testset."""

    song_id: str
    testset: str
    aq_mos: float
    mq_mos: float

    def validate(self) -> None:
        if not self.song_id or not self.testset:
            raise ValidationError("song_id and testset must be non-empty")
        for name, value in (("aq_mos", self.aq_mos), ("mq_mos", self.mq_mos)):
            if not (1.0 <= value <= 5.0):
                raise ValidationError(
                    f"{name}={value} for {self.song_id!r} outside the five-point scale"
                )


def load_labels_csv(path: str | Path) -> list[LabelRecord]:
    """Read `song_id,aq,mq` rows with values in {high,medium,low,na}."""
    reader = csv.reader(io.StringIO(Path(path).read_text(encoding="utf-8")))
    header = next(reader, None)
    if header != ["song_id", "aq", "mq"]:
        raise ValidationError(f"unexpected labels header: {header}")
    records = []
    for parts in reader:
        if not parts:
            continue
        if len(parts) != 3:
            raise ValidationError(f"malformed label row: {parts}")
        rec = LabelRecord(parts[0], parts[1], parts[2])
        rec.validate()
        records.append(rec)
    return records


def load_mos_csv(path: str | Path) -> list[MosRecord]:
    """Read `song_id,testset,aq_mos,mq_mos` rows (one per song per testset)."""
    reader = csv.reader(io.StringIO(Path(path).read_text(encoding="utf-8")))
    header = next(reader, None)
    if header != ["song_id", "testset", "aq_mos", "mq_mos"]:
        raise ValidationError(f"unexpected MOS header: {header}")
    records = []
    seen: set[tuple[str, str]] = set()
    for parts in reader:
        if not parts:
            continue
        if len(parts) != 4:
            raise ValidationError(f"malformed MOS row: {parts}")
        try:
            rec = MosRecord(parts[0], parts[1], float(parts[2]), float(parts[3]))
        except ValueError as exc:
            raise ValidationError(f"malformed MOS row {parts}: {exc}") from exc
        rec.validate()
        key = (rec.song_id, rec.testset)
        if key in seen:
            raise ValidationError(f"duplicate MOS row for {key}")
        seen.add(key)
        records.append(rec)
    return records


def binarize_labels(
    records: Sequence[LabelRecord],
) -> tuple[dict[str, bool], dict[str, bool]]:
    """Collapse labels to the evaluated classes.

    Acoustic quality becomes "low" vs "not low", musical quality "high" vs
    "not high"; missing ("na") counts as the negative class in both.
    """
    aq_truth: dict[str, bool] = {}
    mq_truth: dict[str, bool] = {}
    for rec in records:
        rec.validate()
        if rec.song_id in aq_truth:
            raise ValidationError(f"duplicate song id {rec.song_id!r}")
        aq_truth[rec.song_id] = rec.aq == "low"
        mq_truth[rec.song_id] = rec.mq == "high"
    return aq_truth, mq_truth


def predict_labels(
    table: SongScoreTable, fraction: float
) -> tuple[dict[str, bool], dict[str, bool]]:
    """Predict labels from score extremes.

    The highest-scoring fraction is predicted acoustically "low", the
    lowest-scoring fraction musically "high"; everything else is negative.
    """
    top, bottom = select_extremes(table, fraction)
    top_set, bottom_set = set(top), set(bottom)
    aq_pred: dict[str, bool] = {}
    mq_pred: dict[str, bool] = {}
    for row in table.scored():
        aq_pred[row.song_id] = row.song_id in top_set
        mq_pred[row.song_id] = row.song_id in bottom_set
    return aq_pred, mq_pred


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class PrfResult:
    """Precision, recall, and their harmonic mean, with confusion counts.

    Zero-denominator cases yield 0.0 and a flag naming the undefined metric.
    """

    precision: float
    recall: float
    f1: float
    support: ConfusionCounts
    flags: frozenset[str] = frozenset()

    def to_json_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": {
                "tp": self.support.tp,
                "fp": self.support.fp,
                "fn": self.support.fn,
                "tn": self.support.tn,
            },
            "flags": sorted(self.flags),
        }


def prf(pred: Mapping[str, bool], truth: Mapping[str, bool]) -> PrfResult:
    """Precision/recall/F1 of a boolean prediction map against truth."""
    if set(pred) != set(truth):
        only_pred = sorted(set(pred) - set(truth))[:3]
        only_truth = sorted(set(truth) - set(pred))[:3]
        raise ValidationError(
            f"key mismatch between prediction and truth "
            f"(pred-only={only_pred}, truth-only={only_truth})"
        )
    tp = fp = fn = tn = 0
    for song_id, p in pred.items():
        t = truth[song_id]
        if p and t:
            tp += 1
        elif p and not t:
            fp += 1
        elif not p and t:
            fn += 1
        else:
            tn += 1
    flags: set[str] = set()
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        flags.add("precision-undefined")
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        flags.add("recall-undefined")
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return PrfResult(precision, recall, f1, ConfusionCounts(tp, fp, fn, tn), frozenset(flags))


@dataclass(frozen=True)
class PccResult:
    """Pearson coefficient for one testset; value is None when undefined."""

    value: float | None
    n_songs: int
    flag: str | None = None


def pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    """Pearson correlation; None when either variable has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def pearson_by_testset(
    table: SongScoreTable, mos: Sequence[MosRecord], target: str
) -> dict[str, PccResult]:
    """Pearson correlation between per-song score and MOS, per testset.

    A correlation tracking quality comes out negative (lower distance for
    higher-rated songs). Zero-variance testsets report an undefined value,
    never a coerced 0.
    """
    if target not in ("aq", "mq"):
        raise ValidationError(f"target must be 'aq' or 'mq', got {target!r}")
    fad_by_id = {r.song_id: r.fad for r in table.scored()}
    groups: dict[str, list[tuple[float, float]]] = {}
    for rec in mos:
        rec.validate()
        if rec.song_id not in fad_by_id:
            raise ValidationError(f"MOS song {rec.song_id!r} missing from the score table")
        value = rec.aq_mos if target == "aq" else rec.mq_mos
        groups.setdefault(rec.testset, []).append((fad_by_id[rec.song_id], value))

    out: dict[str, PccResult] = {}
    for testset in sorted(groups):
        pairs = groups[testset]
        if len(pairs) < 3:
            raise ValidationError(
                f"testset {testset!r} has {len(pairs)} songs; need >= 3"
            )
        fad = np.array([p[0] for p in pairs])
        score = np.array([p[1] for p in pairs])
        r = pearson(fad, score)
        if r is None:
            out[testset] = PccResult(None, len(pairs), "zero-variance")
        else:
            out[testset] = PccResult(r, len(pairs))
    return out


@dataclass(frozen=True)
class SensitivityReport:
    """Per-effect scores relative to the clean baseline.

    `normalized` is False when the clean score is zero; `values` then holds
    absolute scores instead of ratios.
    """

    values: dict[str, float]
    normalized: bool
    flags: frozenset[str] = frozenset()


def sensitivity_normalize(
    clean: FadScore, effected: Mapping[str, FadScore]
) -> SensitivityReport:
    """Express each effect's score as a multiple of the clean score."""
    if clean.value > 0.0:
        ratios = {name: score.value / clean.value for name, score in effected.items()}
        return SensitivityReport(ratios, normalized=True)
    absolute = {name: score.value for name, score in effected.items()}
    return SensitivityReport(absolute, normalized=False, flags=frozenset({"clean-score-zero"}))
