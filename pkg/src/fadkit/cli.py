"""Command-line surface: stats, score, songs, eval, synth.

Every error goes to stderr with the machine-parsable prefix
``fadkit-error:`` and a nonzero exit code. With a fixed seed and fixed
inputs, file outputs are byte-identical across runs and across worker
counts (songs are processed in sorted id order and merges use a fixed
tree shape).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FadkitError, ValidationError
from .estimators import (
    DEFAULT_REPEATS,
    DEFAULT_SEED,
    fad_infinity,
    fad_set,
    outlier_report,
    per_song_scores,
    render_outlier_report,
    select_extremes,
    SongScoreTable,
)
from .gaussian import (
    GaussianStats,
    fit_frames,
    load_stats_cache,
    merge_tree,
    save_stats_cache,
)
from .metrics import (
    binarize_labels,
    load_labels_csv,
    load_mos_csv,
    pearson_by_testset,
    predict_labels,
    prf,
)
from .parallel import ordered_map
from .store import (
    EmbeddingFrameSet,
    MODEL_REGISTRY,
    SyntheticSpec,
    generate_synthetic,
    read_set,
    set_fingerprint,
    write_set,
)

ERROR_PREFIX = "fadkit-error:"
DEFAULT_STATS_NAME = "stats.fads"
DEFAULT_FRACTION = 0.05
DEFAULT_TOP_K = 5
FORMATS = ("text", "json", "csv")


@dataclass
class RunConfig:
    """Validated per-command run parameters."""

    command: str
    ref: Path | None = None
    test_dir: Path | None = None
    output: Path | None = None
    scores: Path | None = None
    labels: Path | None = None
    mos: Path | None = None
    spec: Path | None = None
    out_dir: Path | None = None
    csv_out: Path | None = None
    outliers_out: Path | None = None
    mode: str | None = None
    sizes: list[int] | None = None
    repeats: int = DEFAULT_REPEATS
    seed: int = DEFAULT_SEED
    fraction: float = DEFAULT_FRACTION
    top_k: int = DEFAULT_TOP_K
    unit: str = "frame"
    use_inf: bool = False
    no_verify: bool = False
    fmt: str = "text"

    def validate(self) -> None:
        if self.fmt not in FORMATS:
            raise ValidationError(f"unknown format {self.fmt!r}")
        if self.command == "stats":
            if self.ref is None or not self.ref.is_dir():
                raise ValidationError(f"reference set directory not found: {self.ref}")
        elif self.command == "score":
            if self.ref is None or not self.ref.exists():
                raise ValidationError(f"reference not found: {self.ref}")
            if self.test_dir is None or not self.test_dir.is_dir():
                raise ValidationError(f"test set directory not found: {self.test_dir}")
            if self.repeats < 1:
                raise ValidationError("repeats must be >= 1")
            if self.sizes is not None and not self.use_inf:
                raise ValidationError("--sizes only applies with --inf")
        elif self.command == "songs":
            if self.ref is None or not self.ref.exists():
                raise ValidationError(f"reference not found: {self.ref}")
            if self.test_dir is None or not self.test_dir.is_dir():
                raise ValidationError(f"test set directory not found: {self.test_dir}")
            if not (0.0 < self.fraction < 0.5):
                raise ValidationError(f"fraction must be in (0, 0.5), got {self.fraction}")
            if self.top_k < 1:
                raise ValidationError("top-k must be >= 1")
        elif self.command == "eval":
            if self.mode not in ("labels", "mos"):
                raise ValidationError(f"eval mode must be labels or mos, got {self.mode!r}")
            if self.scores is None or not self.scores.is_file():
                raise ValidationError(f"scores CSV not found: {self.scores}")
            if self.mode == "labels" and (self.labels is None or not self.labels.is_file()):
                raise ValidationError(f"labels CSV not found: {self.labels}")
            if self.mode == "mos" and (self.mos is None or not self.mos.is_file()):
                raise ValidationError(f"MOS CSV not found: {self.mos}")
        elif self.command == "synth":
            if self.spec is None or not self.spec.is_file():
                raise ValidationError(f"synthesis spec not found: {self.spec}")
            if self.out_dir is None:
                raise ValidationError("output directory required")
        else:
            raise ValidationError(f"unknown command {self.command!r}")

    def provenance(self) -> dict:
        return {
            "sizes": "auto" if self.sizes is None else list(self.sizes),
            "repeats": self.repeats,
            "fraction": self.fraction,
            "seed": self.seed,
        }


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003
        self.exit(2, f"{ERROR_PREFIX} {message}\n")


def _fit_set_dir(directory: Path) -> tuple[GaussianStats, list[EmbeddingFrameSet]]:
    songs = read_set(directory)
    parts = ordered_map(lambda fs: fit_frames(fs.frames.astype(np.float64)), songs)
    return merge_tree(parts), songs


def _load_reference(ref: Path, no_verify: bool) -> tuple[GaussianStats, str]:
    if ref.is_dir():
        cache = ref / DEFAULT_STATS_NAME
        if cache.is_file():
            stats, _ = load_stats_cache(cache, source_dir=ref, verify=not no_verify)
        else:
            stats, _ = _fit_set_dir(ref)
        return stats, str(ref)
    stats, _ = load_stats_cache(ref)
    return stats, str(ref)


def _emit(report: dict, text: str, cfg: RunConfig) -> None:
    if cfg.fmt == "json":
        rendered = json.dumps(report, indent=2) + "\n"
    elif cfg.fmt == "csv":
        rendered = _flatten_csv(report)
    else:
        rendered = text
    sys.stdout.write(rendered)
    if cfg.output is not None:
        cfg.output.write_text(rendered, encoding="utf-8")


def _flatten_csv(report: dict) -> str:
    lines = ["key,value"]

    def walk(prefix: str, obj) -> None:
        if isinstance(obj, dict):
            for k in obj:
                walk(f"{prefix}.{k}" if prefix else str(k), obj[k])
        elif isinstance(obj, (list, tuple)):
            for i, item in enumerate(obj):
                walk(f"{prefix}[{i}]", item)
        else:
            value = "" if obj is None else (repr(obj) if isinstance(obj, float) else str(obj))
            if "," in value or '"' in value:
                value = '"' + value.replace('"', '""') + '"'
            lines.append(f"{prefix},{value}")

    walk("", report)
    return "\n".join(lines) + "\n"


def _header_lines(cfg: RunConfig, extra: dict) -> list[str]:
    prov = cfg.provenance()
    sizes = prov["sizes"] if prov["sizes"] == "auto" else ",".join(map(str, prov["sizes"]))
    lines = [f"fadkit {cfg.command}"]
    lines.extend(f"{k}: {v}" for k, v in extra.items())
    lines.append(
        f"defaults: sizes={sizes} repeats={prov['repeats']} "
        f"fraction={prov['fraction']} seed={prov['seed']}"
    )
    return lines


def cmd_stats(cfg: RunConfig) -> int:
    assert cfg.ref is not None
    stats, songs = _fit_set_dir(cfg.ref)
    out = cfg.output or (cfg.ref / DEFAULT_STATS_NAME)
    save_stats_cache(stats, out, fingerprint=set_fingerprint(cfg.ref))
    report = {
        "command": "stats",
        "provenance": cfg.provenance(),
        "set": str(cfg.ref),
        "cache": str(out),
        "dim": stats.dim,
        "songs": len(songs),
        "frames": stats.count,
    }
    text = "\n".join(
        _header_lines(cfg, {"set": cfg.ref, "cache": out})
        + [f"dim: {stats.dim}", f"songs: {len(songs)}", f"frames: {stats.count}"]
    ) + "\n"
    if cfg.fmt == "json":
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    elif cfg.fmt == "csv":
        sys.stdout.write(_flatten_csv(report))
    else:
        sys.stdout.write(text)
    return 0


def cmd_score(cfg: RunConfig) -> int:
    assert cfg.ref is not None and cfg.test_dir is not None
    ref_stats, ref_name = _load_reference(cfg.ref, cfg.no_verify)
    songs = read_set(cfg.test_dir)
    n_frames = sum(fs.n_frames for fs in songs)
    inputs = {
        "reference": f"{ref_name} (dim={ref_stats.dim}, count={ref_stats.count})",
        "test": f"{cfg.test_dir} (songs={len(songs)}, frames={n_frames})",
    }
    report: dict = {
        "command": "score",
        "provenance": cfg.provenance(),
        "reference": ref_name,
        "test": str(cfg.test_dir),
        "test_songs": len(songs),
        "test_frames": n_frames,
    }
    if cfg.use_inf:
        pool = np.vstack([fs.frames.astype(np.float64) for fs in songs])
        estimate = fad_infinity(
            ref_stats,
            songs if cfg.unit == "song" else pool,
            sizes=cfg.sizes,
            repeats=cfg.repeats,
            seed=cfg.seed,
            unit=cfg.unit,
        )
        report["fad_infinity"] = estimate.to_json_dict()
        lines = _header_lines(cfg, inputs)
        lines.append(
            f"FAD_inf: {estimate.fad_inf:.6g} (slope={estimate.slope:.6g}, "
            f"r_squared={estimate.r_squared:.6g})"
        )
        for n, s in estimate.points:
            lines.append(f"  size {n}: mean FAD {s:.6g}")
        if estimate.flags:
            lines.append(f"flags: {';'.join(sorted(estimate.flags))}")
        text = "\n".join(lines) + "\n"
    else:
        score = fad_set(ref_stats, songs)
        report["fad"] = score.to_json_dict()
        flags = ";".join(sorted(score.numerical_flags)) or "-"
        lines = _header_lines(cfg, inputs)
        lines.append(
            f"FAD: {score.value:.6g} (mean_term={score.mean_term:.6g}, "
            f"trace_term={score.trace_term:.6g}, flags={flags})"
        )
        text = "\n".join(lines) + "\n"
    _emit(report, text, cfg)
    return 0


def cmd_songs(cfg: RunConfig) -> int:
    assert cfg.ref is not None and cfg.test_dir is not None
    ref_stats, ref_name = _load_reference(cfg.ref, cfg.no_verify)
    songs = read_set(cfg.test_dir)
    table = per_song_scores(ref_stats, songs, reference_id=ref_name)
    top, bottom = select_extremes(table, cfg.fraction)
    outliers = outlier_report(table, cfg.top_k)

    if cfg.csv_out is not None:
        table.to_csv(cfg.csv_out)
    if cfg.outliers_out is not None:
        cfg.outliers_out.write_text(
            json.dumps(outliers, indent=2) + "\n", encoding="utf-8"
        )

    report = {
        "command": "songs",
        "provenance": cfg.provenance(),
        "reference": ref_name,
        "test": str(cfg.test_dir),
        "songs": len(table.rows),
        "skipped": sum(1 for r in table.rows if r.skipped),
        "extremes": {"fraction": cfg.fraction, "top": top, "bottom": bottom},
        "outliers": outliers,
        "table": [
            {
                "song_id": r.song_id,
                "fad": r.fad,
                "n_frames": r.n_frames,
                "rank": r.rank,
                "flags": sorted(r.flags),
            }
            for r in table.rows
        ],
    }
    if cfg.fmt == "csv":
        rendered = table.to_csv()
    elif cfg.fmt == "json":
        rendered = json.dumps(report, indent=2) + "\n"
    else:
        lines = _header_lines(
            cfg,
            {
                "reference": ref_name,
                "test": cfg.test_dir,
                "songs": len(table.rows),
                "skipped": report["skipped"],
            },
        )
        k = len(top)
        lines.append(f"extremes at fraction {cfg.fraction}: {k} per side")
        lines.append(f"  top (highest FAD): {', '.join(top[:10])}{' ...' if k > 10 else ''}")
        lines.append(f"  bottom (lowest FAD): {', '.join(bottom[:10])}{' ...' if k > 10 else ''}")
        lines.append(render_outlier_report(outliers).rstrip("\n"))
        rendered = "\n".join(lines) + "\n"
    sys.stdout.write(rendered)
    if cfg.output is not None:
        cfg.output.write_text(rendered, encoding="utf-8")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    assert cfg.scores is not None
    table = SongScoreTable.from_csv(cfg.scores)
    if cfg.mode == "labels":
        assert cfg.labels is not None
        aq_truth_all, mq_truth_all = binarize_labels(load_labels_csv(cfg.labels))
        aq_pred, mq_pred = predict_labels(table, cfg.fraction)
        missing = sorted(set(aq_pred) - set(aq_truth_all))
        if missing:
            raise ValidationError(
                f"{len(missing)} scored songs missing from labels, e.g. {missing[:3]}"
            )
        aq = prf(aq_pred, {k: aq_truth_all[k] for k in aq_pred})
        mq = prf(mq_pred, {k: mq_truth_all[k] for k in mq_pred})
        payload = {"aq": aq.to_json_dict(), "mq": mq.to_json_dict()}
        lines = _header_lines(cfg, {"scores": cfg.scores, "labels": cfg.labels})
        for name, res in (("aq", aq), ("mq", mq)):
            flags = ";".join(sorted(res.flags)) or "-"
            lines.append(
                f"{name}: precision={res.precision:.6g} recall={res.recall:.6g} "
                f"f1={res.f1:.6g} (tp={res.support.tp} fp={res.support.fp} "
                f"fn={res.support.fn} tn={res.support.tn}, flags={flags})"
            )
        text = "\n".join(lines) + "\n"
    else:
        assert cfg.mos is not None
        mos_records = load_mos_csv(cfg.mos)
        payload = {}
        lines = _header_lines(cfg, {"scores": cfg.scores, "mos": cfg.mos})
        for target in ("aq", "mq"):
            by_testset = pearson_by_testset(table, mos_records, target)
            payload[f"{target}_pcc"] = {
                ts: {"value": r.value, "n_songs": r.n_songs, "flag": r.flag}
                for ts, r in by_testset.items()
            }
            for ts, r in by_testset.items():
                shown = "undefined" if r.value is None else f"{r.value:.6g}"
                extra = f" [{r.flag}]" if r.flag else ""
                lines.append(f"{target} pcc {ts}: {shown} (n={r.n_songs}){extra}")
        text = "\n".join(lines) + "\n"
    report = {
        "command": f"eval-{cfg.mode}",
        "provenance": cfg.provenance(),
        **payload,
    }
    _emit(report, text, cfg)
    return 0


def _parse_synth_spec(path: Path) -> tuple[list[SyntheticSpec], str | None]:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed synthesis spec {path}: {exc}") from exc
    try:
        dim = int(obj["dim"])
        n_frames = int(obj["n_frames"])
        seed = int(obj["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"synthesis spec needs integer dim/n_frames/seed: {exc}") from exc

    mean_raw = obj.get("mean", 0.0)
    mean = (
        np.full(dim, float(mean_raw))
        if np.isscalar(mean_raw)
        else np.asarray(mean_raw, dtype=np.float64)
    )
    cov_raw = obj.get("covariance", 1.0)
    if np.isscalar(cov_raw):
        cov = float(cov_raw) * np.eye(dim)
    else:
        cov = np.asarray(cov_raw, dtype=np.float64)
        if cov.ndim == 1:
            cov = np.diag(cov)
    n_songs = int(obj.get("songs", 1))
    if n_songs < 1:
        raise ValidationError("songs must be >= 1")
    model_key = obj.get("model")
    if model_key is not None and model_key not in MODEL_REGISTRY:
        raise ValidationError(
            f"unknown model {model_key!r}; known: {', '.join(sorted(MODEL_REGISTRY))}"
        )
    specs = [
        SyntheticSpec(dim=dim, mean=mean, covariance=cov, n_frames=n_frames, seed=seed + i)
        for i in range(n_songs)
    ]
    return specs, model_key


def cmd_synth(cfg: RunConfig) -> int:
    assert cfg.spec is not None and cfg.out_dir is not None
    specs, model_key = _parse_synth_spec(cfg.spec)
    framesets = []
    for i, spec in enumerate(specs):
        fs = generate_synthetic(spec, song_id=f"synth{i:04d}")
        if model_key is not None:
            model = MODEL_REGISTRY[model_key]
            if model.dim != spec.dim:
                raise ValidationError(
                    f"spec dim {spec.dim} does not match model {model_key!r} dim {model.dim}"
                )
            fs = EmbeddingFrameSet(model=model, song_id=fs.song_id, frames=fs.frames)
        framesets.append(fs)
    write_set(cfg.out_dir, framesets)
    report = {
        "command": "synth",
        "provenance": cfg.provenance(),
        "spec": str(cfg.spec),
        "out_dir": str(cfg.out_dir),
        "songs": len(framesets),
        "frames_per_song": framesets[0].n_frames,
        "dim": framesets[0].frames.shape[1],
    }
    text = "\n".join(
        _header_lines(cfg, {"spec": cfg.spec, "out": cfg.out_dir})
        + [f"songs: {len(framesets)}", f"frames_per_song: {framesets[0].n_frames}"]
    ) + "\n"
    _emit(report, text, cfg)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fadkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: _Parser) -> None:
        p.add_argument("--format", choices=FORMATS, default="text", dest="fmt")
        p.add_argument("--out", type=Path, default=None, help="also write the report here")

    p_stats = sub.add_parser("stats", help="fit a reference set and write its stats cache")
    p_stats.add_argument("ref_dir", type=Path)
    p_stats.add_argument("-o", "--output", type=Path, default=None)
    p_stats.add_argument("--format", choices=FORMATS, default="text", dest="fmt")

    p_score = sub.add_parser("score", help="FAD between a reference and a test set")
    p_score.add_argument("ref", type=Path, help="stats cache file or set directory")
    p_score.add_argument("test_dir", type=Path)
    p_score.add_argument("--inf", action="store_true", dest="use_inf")
    p_score.add_argument("--sizes", type=str, default=None, help="comma-separated sizes")
    p_score.add_argument("--repeats", type=int, default=DEFAULT_REPEATS)
    p_score.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_score.add_argument("--unit", choices=("frame", "song"), default="frame")
    p_score.add_argument("--no-verify", action="store_true")
    add_common(p_score)

    p_songs = sub.add_parser("songs", help="per-song FAD table and outlier report")
    p_songs.add_argument("ref", type=Path)
    p_songs.add_argument("test_dir", type=Path)
    p_songs.add_argument("--fraction", type=float, default=DEFAULT_FRACTION)
    p_songs.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
    p_songs.add_argument("--csv-out", type=Path, default=None)
    p_songs.add_argument("--outliers-out", type=Path, default=None)
    p_songs.add_argument("--no-verify", action="store_true")
    add_common(p_songs)

    p_eval = sub.add_parser("eval", help="label-prediction or MOS-correlation metrics")
    p_eval.add_argument("mode", choices=("labels", "mos"))
    p_eval.add_argument("--scores", type=Path, required=True)
    p_eval.add_argument("--labels", type=Path, default=None)
    p_eval.add_argument("--mos", type=Path, default=None)
    p_eval.add_argument("--fraction", type=float, default=DEFAULT_FRACTION)
    add_common(p_eval)

    p_synth = sub.add_parser("synth", help="generate a synthetic set directory")
    p_synth.add_argument("spec", type=Path)
    p_synth.add_argument("out_dir", type=Path)
    p_synth.add_argument("--format", choices=FORMATS, default="text", dest="fmt")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    sizes = None
    if getattr(args, "sizes", None):
        try:
            sizes = [int(s) for s in str(args.sizes).split(",") if s]
        except ValueError as exc:
            raise ValidationError(f"bad --sizes value {args.sizes!r}: {exc}") from exc
        if not sizes:
            raise ValidationError("--sizes must name at least one size")
    cfg = RunConfig(
        command=args.command,
        ref=getattr(args, "ref", None) or getattr(args, "ref_dir", None),
        test_dir=getattr(args, "test_dir", None),
        output=getattr(args, "output", None) or getattr(args, "out", None),
        scores=getattr(args, "scores", None),
        labels=getattr(args, "labels", None),
        mos=getattr(args, "mos", None),
        spec=getattr(args, "spec", None),
        out_dir=getattr(args, "out_dir", None),
        csv_out=getattr(args, "csv_out", None),
        outliers_out=getattr(args, "outliers_out", None),
        mode=getattr(args, "mode", None),
        sizes=sizes,
        repeats=getattr(args, "repeats", DEFAULT_REPEATS),
        seed=getattr(args, "seed", DEFAULT_SEED),
        fraction=getattr(args, "fraction", DEFAULT_FRACTION),
        top_k=getattr(args, "top_k", DEFAULT_TOP_K),
        unit=getattr(args, "unit", "frame"),
        use_inf=getattr(args, "use_inf", False),
        no_verify=getattr(args, "no_verify", False),
        fmt=getattr(args, "fmt", "text"),
    )
    cfg.validate()
    return cfg


_COMMANDS = {
    "stats": cmd_stats,
    "score": cmd_score,
    "songs": cmd_songs,
    "eval": cmd_eval,
    "synth": cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return _COMMANDS[cfg.command](cfg)
    except (FadkitError, OSError) as exc:
        print(f"{ERROR_PREFIX} {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
