"""Set-level FAD, bias-corrected extrapolation, and per-song scoring.

The sample-size bias correction draws bootstrap samples (frames with
replacement) from the test pool at several sizes, averages the score per
size over repeats, and fits ordinary least squares of mean score against
1/size. The intercept is the estimate at infinite sample size; the slope is
the bias coefficient. The regressor is 1/N: the inverse-size extrapolation
this follows regresses on inverse sample size, and straight-line fits of
score against 1/N match observed bias curves.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FadkitWarning, ValidationError
from .gaussian import FadScore, GaussianStats, fit_frames, frechet_distance
from .parallel import ordered_map
from .store import EmbeddingFrameSet

DEFAULT_REPEATS = 5
DEFAULT_SEED = 42
DEFAULT_SIZE_COUNT = 10
SKIPPED_FLAG = "skipped"


def _pool_frames(test: Sequence[EmbeddingFrameSet] | np.ndarray) -> tuple[np.ndarray, str]:
    """Stack test frames into one float64 pool (songs in sorted id order)."""
    if isinstance(test, np.ndarray):
        if test.ndim != 2 or test.shape[0] < 1:
            raise ValidationError("frame pool must be a non-empty 2-D matrix")
        return np.asarray(test, dtype=np.float64), f"pool[n={test.shape[0]}]"
    framesets = sorted(test, key=lambda fs: fs.song_id)
    if not framesets:
        raise ValidationError("empty test set")
    dims = {fs.frames.shape[1] for fs in framesets}
    if len(dims) != 1:
        raise ValidationError(f"test songs disagree on dim: {sorted(dims)}")
    pool = np.vstack([fs.frames.astype(np.float64) for fs in framesets])
    return pool, f"set[{len(framesets)} songs, n={pool.shape[0]}]"


def fad_set(ref: GaussianStats, test: Sequence[EmbeddingFrameSet] | np.ndarray) -> FadScore:
    """FAD between the reference fit and one fit pooled over all test frames."""
    pool, _ = _pool_frames(test)
    if pool.shape[1] != ref.dim:
        raise ValidationError(f"dimension mismatch: test dim {pool.shape[1]}, ref dim {ref.dim}")
    n = pool.shape[0]
    if n < 2:
        raise ValidationError(f"need at least 2 test frames, got {n}")
    if n < ref.dim + 1:
        warnings.warn(
            f"test pool has {n} frames for dim {ref.dim}; covariance is rank-deficient",
            FadkitWarning,
            stacklevel=2,
        )
    return frechet_distance(ref, fit_frames(pool))


def default_size_grid(n_total: int, dim: int, count: int = DEFAULT_SIZE_COUNT) -> list[int]:
    """Geometric grid of bootstrap sizes from max(2(dim+1), n/64) up to n."""
    lo = max(2 * (dim + 1), math.ceil(n_total / 64))
    hi = n_total
    if lo >= hi:
        raise ValidationError(f"pool too small for a size grid: n_total={n_total}, dim={dim}")
    grid = np.rint(np.geomspace(lo, hi, num=count)).astype(int)
    grid = np.clip(grid, lo, hi)
    return sorted(set(int(s) for s in grid))


def fit_inverse_size_regression(points: Sequence[tuple[int, float]]) -> tuple[float, float, float]:
    """OLS of score against 1/size; returns (intercept, slope, r_squared)."""
    sizes = [int(n) for n, _ in points]
    if len(set(sizes)) < 2:
        raise ValidationError("need >= 2 distinct sizes")
    x = 1.0 / np.asarray(sizes, dtype=np.float64)
    y = np.asarray([s for _, s in points], dtype=np.float64)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    sxy = float(((x - xm) * (y - ym)).sum())
    slope = sxy / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float((resid**2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return intercept, slope, r_squared


@dataclass(frozen=True)
class FadInfEstimate:
    """Result of extrapolating bootstrap FAD scores to infinite sample size."""

    fad_inf: float
    slope: float
    points: tuple[tuple[int, float], ...]
    r_squared: float
    seed: int
    flags: frozenset[str] = frozenset()

    def to_json_dict(self) -> dict:
        return {
            "fad_inf": self.fad_inf,
            "slope": self.slope,
            "points": [[n, s] for n, s in self.points],
            "r_squared": self.r_squared,
            "seed": self.seed,
            "flags": sorted(self.flags),
        }


def fad_infinity(
    ref: GaussianStats,
    test: Sequence[EmbeddingFrameSet] | np.ndarray,
    sizes: Sequence[int] | None = None,
    repeats: int = DEFAULT_REPEATS,
    seed: int = DEFAULT_SEED,
    unit: str = "frame",
) -> FadInfEstimate:
    """Bootstrap FAD at several sample sizes and extrapolate to N = infinity.

    `unit="frame"` (default) resamples individual frames with replacement;
    `unit="song"` draws whole songs with replacement until a draw reaches the
    requested frame count (sizes then are nominal frame counts).
    """
    if repeats < 1:
        raise ValidationError("repeats must be >= 1")
    if unit not in ("frame", "song"):
        raise ValidationError(f"unknown bootstrap unit {unit!r}")
    if unit == "song" and isinstance(test, np.ndarray):
        raise ValidationError("song-unit bootstrap needs per-song frame sets, not a raw pool")

    pool, _ = _pool_frames(test)
    dim = ref.dim
    if pool.shape[1] != dim:
        raise ValidationError(f"dimension mismatch: test dim {pool.shape[1]}, ref dim {dim}")
    n_total = pool.shape[0]
    if n_total < 4 * (dim + 1):
        raise ValidationError(
            f"pool of {n_total} frames is too small: need >= 4*(dim+1) = {4 * (dim + 1)}"
        )

    if sizes is None:
        sizes = default_size_grid(n_total, dim)
    else:
        sizes = sorted(int(s) for s in sizes)
        for s in sizes:
            if s < dim + 2 or s > n_total:
                raise ValidationError(
                    f"size {s} outside valid range [{dim + 2}, {n_total}]"
                )
    if len(set(sizes)) < 2:
        raise ValidationError("need >= 2 distinct sizes")

    song_frames: list[np.ndarray] | None = None
    if unit == "song":
        framesets = sorted(test, key=lambda fs: fs.song_id)  # type: ignore[arg-type]
        song_frames = [fs.frames.astype(np.float64) for fs in framesets]

    children = np.random.SeedSequence(seed).spawn(len(sizes) * repeats)

    def one_draw(task: tuple[int, int]) -> float:
        size_idx, rep = task
        rng = np.random.default_rng(children[size_idx * repeats + rep])
        size = sizes[size_idx]
        if song_frames is None:
            idx = rng.integers(0, n_total, size=size)
            sample = pool[idx]
        else:
            drawn: list[np.ndarray] = []
            total = 0
            while total < size:
                pick = int(rng.integers(0, len(song_frames)))
                drawn.append(song_frames[pick])
                total += song_frames[pick].shape[0]
            sample = np.vstack(drawn)
        return frechet_distance(ref, fit_frames(sample)).value

    tasks = [(i, r) for i in range(len(sizes)) for r in range(repeats)]
    values = np.asarray(ordered_map(one_draw, tasks), dtype=np.float64).reshape(
        len(sizes), repeats
    )
    points = tuple((int(s), float(values[i].mean())) for i, s in enumerate(sizes))

    intercept, slope, r_squared = fit_inverse_size_regression(points)
    flags: set[str] = set()
    smallest_score = points[0][1]
    if intercept < -0.05 * smallest_score:
        flags.add("extrapolation-unstable")
    return FadInfEstimate(intercept, slope, points, r_squared, seed, frozenset(flags))


@dataclass(frozen=True)
class SongScore:
    """One row of a per-song score table."""

    song_id: str
    fad: float | None
    n_frames: int
    rank: int | None
    flags: frozenset[str] = frozenset()

    @property
    def skipped(self) -> bool:
        return SKIPPED_FLAG in self.flags


@dataclass(frozen=True)
class SongScoreTable:
    """Per-song FAD scores, ranked ascending (rank 1 = lowest distance).

    Skipped songs (fewer than 2 frames) carry no score or rank and sort
    after all scored rows. Ranks are a permutation of 1..#scored; ties
    break by song id.
    """

    rows: tuple[SongScore, ...]
    reference_id: str

    def scored(self) -> list[SongScore]:
        return [r for r in self.rows if not r.skipped]

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["song_id", "fad", "n_frames", "rank", "flags"])
        for row in self.rows:
            writer.writerow(
                [
                    row.song_id,
                    "" if row.fad is None else repr(row.fad),
                    row.n_frames,
                    "" if row.rank is None else row.rank,
                    ";".join(sorted(row.flags)),
                ]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path: str | Path, reference_id: str = "") -> "SongScoreTable":
        return cls.from_csv_text(Path(path).read_text(encoding="utf-8"), reference_id)

    @classmethod
    def from_csv_text(cls, text: str, reference_id: str = "") -> "SongScoreTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != ["song_id", "fad", "n_frames", "rank", "flags"]:
            raise ValidationError(f"unexpected score table header: {header}")
        rows = []
        for parts in reader:
            if not parts:
                continue
            if len(parts) != 5:
                raise ValidationError(f"malformed score row: {parts}")
            sid, fad_s, n_s, rank_s, flags_s = parts
            flags = frozenset(f for f in flags_s.split(";") if f)
            rows.append(
                SongScore(
                    song_id=sid,
                    fad=None if fad_s == "" else float(fad_s),
                    n_frames=int(n_s),
                    rank=None if rank_s == "" else int(rank_s),
                    flags=flags,
                )
            )
        return cls(rows=tuple(rows), reference_id=reference_id)


def per_song_scores(
    ref: GaussianStats,
    songs: Sequence[EmbeddingFrameSet],
    reference_id: str | None = None,
) -> SongScoreTable:
    """Score every song against the reference fit.

    Songs with fewer than 2 frames are listed with the "skipped" flag.
    Output is independent of input order.
    """
    if not songs:
        raise ValidationError("empty song collection")
    ordered = sorted(songs, key=lambda fs: fs.song_id)
    seen: set[str] = set()
    for fs in ordered:
        if fs.song_id in seen:
            raise ValidationError(f"duplicate song id {fs.song_id!r}")
        seen.add(fs.song_id)
        if fs.frames.shape[1] != ref.dim:
            raise ValidationError(
                f"dimension mismatch for song {fs.song_id!r}: "
                f"{fs.frames.shape[1]} vs ref dim {ref.dim}"
            )

    def score_one(fs: EmbeddingFrameSet) -> SongScore:
        if fs.n_frames < 2:
            return SongScore(fs.song_id, None, fs.n_frames, None, frozenset({SKIPPED_FLAG}))
        score = frechet_distance(ref, fit_frames(fs.frames.astype(np.float64)))
        return SongScore(fs.song_id, score.value, fs.n_frames, None, score.numerical_flags)

    scored_rows = ordered_map(score_one, ordered)
    ranked = sorted(
        (r for r in scored_rows if not r.skipped), key=lambda r: (r.fad, r.song_id)
    )
    skipped = sorted((r for r in scored_rows if r.skipped), key=lambda r: r.song_id)
    rows = [
        SongScore(r.song_id, r.fad, r.n_frames, i + 1, r.flags)
        for i, r in enumerate(ranked)
    ]
    rows.extend(skipped)
    if reference_id is None:
        reference_id = f"ref[dim={ref.dim},count={ref.count}]"
    return SongScoreTable(rows=tuple(rows), reference_id=reference_id)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def select_extremes(table: SongScoreTable, fraction: float) -> tuple[list[str], list[str]]:
    """Ids of the round(fraction * len) highest- and lowest-scored songs.

    Returns (top, bottom): top is highest-first, bottom lowest-first.
    """
    if not (0.0 < fraction < 0.5):
        raise ValidationError(f"fraction must be in (0, 0.5), got {fraction}")
    scored = table.scored()
    if len(scored) < 2:
        raise ValidationError("table has fewer than 2 scored songs")
    k = round_half_up(fraction * len(scored))
    ordered = sorted(scored, key=lambda r: r.rank)  # type: ignore[arg-type]
    bottom = [r.song_id for r in ordered[:k]]
    top = [r.song_id for r in ordered[len(ordered) - k :]][::-1]
    return top, bottom


def outlier_report(table: SongScoreTable, k: int) -> dict:
    """JSON-ready listing of the k highest and k lowest scored songs."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    scored = table.scored()
    if 2 * k > len(scored):
        raise ValidationError(
            f"k={k} too large: top and bottom would overlap in a table of {len(scored)}"
        )
    ordered = sorted(scored, key=lambda r: r.rank)  # type: ignore[arg-type]

    def entry(r: SongScore) -> dict:
        return {
            "song_id": r.song_id,
            "fad": r.fad,
            "n_frames": r.n_frames,
            "rank": r.rank,
            "flags": sorted(r.flags),
        }

    return {
        "reference_id": table.reference_id,
        "k": k,
        "highest": [entry(r) for r in ordered[len(ordered) - k :][::-1]],
        "lowest": [entry(r) for r in ordered[:k]],
    }


def render_outlier_report(report: dict) -> str:
    """Human-readable rendering of an outlier report."""
    lines = [f"outliers vs {report['reference_id']} (k={report['k']})"]
    for label, key in (("highest", "highest"), ("lowest", "lowest")):
        lines.append(f"{label} per-song FAD:")
        for e in report[key]:
            flags = f" [{';'.join(e['flags'])}]" if e["flags"] else ""
            lines.append(
                f"  #{e['rank']:>5} {e['song_id']}: fad={e['fad']:.6g} "
                f"(n_frames={e['n_frames']}){flags}"
            )
    return "\n".join(lines) + "\n"
