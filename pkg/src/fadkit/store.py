"""Embedding frame-set storage: binary frame files, set directories, synthesis.

On-disk layout
--------------
A *set* is a directory holding one binary frame file per song plus a
``set.json`` metadata file.

Frame file (little-endian):

    magic    4 bytes   b"FADE"
    version  u32       1
    dim      u32       columns per frame
    n_frames u64       rows
    payload  n_frames * dim IEEE-754 binary32, row-major

``set.json`` (UTF-8 JSON):

    {"model": {"name", "input_channels", "sample_rate_hz", "dim",
               "context_sec", "hop_sec"},
     "songs": [{"id", "file"}, ...]}

``context_sec`` is a number of seconds or the string ``"unbounded"``
(represented as ``math.inf`` in memory).

Frames are stored as 32-bit floats (typical embedding precision, half the
file size); all statistics downstream are computed in 64-bit.
"""
from __future__ import annotations

import json
import math
import re
import struct
import threading
from dataclasses import dataclass, field
from hashlib import sha256
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericalError, ValidationError

FRAME_MAGIC = b"FADE"
FRAME_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, n_frames

SET_METADATA_NAME = "set.json"

_UNBOUNDED = "unbounded"

# Serializes sidecar read-modify-write when songs are written in parallel.
_sidecar_lock = threading.Lock()


@dataclass(frozen=True)
class EmbeddingModelInfo:
    """Identity and framing geometry of an embedding model."""

    name: str
    input_channels: int
    sample_rate_hz: int
    dim: int
    context_sec: float  # math.inf when the model has no fixed context
    hop_sec: float

    def validate(self) -> None:
        if not self.name:
            raise ValidationError("model name must be non-empty")
        if self.input_channels < 1:
            raise ValidationError("input_channels must be >= 1")
        if self.sample_rate_hz < 1:
            raise ValidationError("sample_rate_hz must be >= 1")
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if math.isfinite(self.context_sec) and self.hop_sec <= 0:
            raise ValidationError("hop_sec must be > 0 for a finite context")

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "input_channels": self.input_channels,
            "sample_rate_hz": self.sample_rate_hz,
            "dim": self.dim,
            "context_sec": _UNBOUNDED if math.isinf(self.context_sec) else self.context_sec,
            "hop_sec": self.hop_sec,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EmbeddingModelInfo":
        try:
            context = obj["context_sec"]
            info = cls(
                name=str(obj["name"]),
                input_channels=int(obj["input_channels"]),
                sample_rate_hz=int(obj["sample_rate_hz"]),
                dim=int(obj["dim"]),
                context_sec=math.inf if context == _UNBOUNDED else float(context),
                hop_sec=float(obj["hop_sec"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed model metadata: {exc}") from exc
        info.validate()
        return info


# Known embedding models and their framing geometry (channels, rate, size,
# context, hop). EnCodec's 24 kHz variant has no fixed context window.
MODEL_REGISTRY: dict[str, EmbeddingModelInfo] = {
    "vggish": EmbeddingModelInfo("VGGish", 1, 16000, 128, 0.96, 0.96),
    "clap": EmbeddingModelInfo("CLAP", 1, 44100, 1024, 7.0, 1.0),
    "l-clap": EmbeddingModelInfo("L-CLAP", 1, 48000, 512, 10.0, 1.0),
    "mert": EmbeddingModelInfo("MERT", 1, 24000, 768, 5.0, 0.013),
    "cdpam": EmbeddingModelInfo("CDPAM", 1, 22050, 512, 5.0, 1.0),
    "encodec": EmbeddingModelInfo("EnCodec", 1, 24000, 128, math.inf, 0.013),
    "encodec-48k": EmbeddingModelInfo("EnCodec 48k", 2, 48000, 128, 1.0, 0.99),
    "dac": EmbeddingModelInfo("DAC", 2, 44100, 1024, 5.0, 0.012),
}


def synthetic_model_info(dim: int) -> EmbeddingModelInfo:
    """Placeholder model identity for synthesized frame sets."""
    return EmbeddingModelInfo(f"synthetic-{dim}d", 1, 16000, dim, 1.0, 1.0)


@dataclass
class EmbeddingFrameSet:
    """One song's embedding frames: N rows of `model.dim` columns."""

    model: EmbeddingModelInfo
    song_id: str
    frames: np.ndarray

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim == 1:
            frames = frames.reshape(1, -1)
        self.frames = np.ascontiguousarray(frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def validate(self) -> None:
        self.model.validate()
        if not self.song_id:
            raise ValidationError("song_id must be non-empty")
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValidationError("frames must be a non-empty 2-D matrix")
        if self.frames.shape[1] != self.model.dim:
            raise ValidationError(
                f"frame width {self.frames.shape[1]} does not match model dim {self.model.dim}"
            )
        if not np.isfinite(self.frames).all():
            raise ValidationError(f"non-finite frame value in song {self.song_id!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingFrameSet):
            return NotImplemented
        return (
            self.model == other.model
            and self.song_id == other.song_id
            and self.frames.shape == other.frames.shape
            and bool((self.frames == other.frames).all())
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for drawing a frame set from a target multinormal."""

    dim: int
    mean: np.ndarray
    covariance: np.ndarray
    n_frames: int
    seed: int

    # symmetry tolerance relative to the largest entry; eigenvalue floor
    # relative to the largest eigenvalue
    SYMMETRY_TOL = 1e-12
    EIGENVALUE_TOL = 1e-10

    def validate(self) -> None:
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.n_frames < 1:
            raise ValidationError("n_frames must be >= 1")
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.shape != (self.dim,):
            raise ValidationError(f"mean must have shape ({self.dim},)")
        if cov.shape != (self.dim, self.dim):
            raise ValidationError(f"covariance must have shape ({self.dim}, {self.dim})")
        scale = float(np.abs(cov).max())
        if scale > 0 and float(np.abs(cov - cov.T).max()) > self.SYMMETRY_TOL * scale:
            raise ValidationError("covariance is not symmetric within 1e-12")
        eigs = np.linalg.eigvalsh((cov + cov.T) / 2.0)
        lam_max = max(float(eigs[-1]), 0.0)
        if float(eigs[0]) < -self.EIGENVALUE_TOL * lam_max:
            raise NumericalError(
                "covariance is not positive semidefinite within tolerance "
                f"(min eigenvalue {eigs[0]:.3e}, max {lam_max:.3e})"
            )


def write_frameset(frameset: EmbeddingFrameSet, path: str | Path) -> None:
    """Write one song's frames to `path` and register it in the directory's
    ``set.json`` sidecar (created on first write).

    The parent directory must exist. Fails if the directory already holds a
    different model or the song id is already bound to another file.
    """
    frameset.validate()
    path = Path(path)
    if not path.parent.is_dir():
        raise ValidationError(f"parent directory does not exist: {path.parent}")

    header = _HEADER.pack(
        FRAME_MAGIC, FRAME_VERSION, frameset.model.dim, frameset.n_frames
    )
    payload = np.ascontiguousarray(frameset.frames, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)

    with _sidecar_lock:
        _register_song(path.parent, frameset.model, frameset.song_id, path.name)


def read_frameset(path: str | Path) -> EmbeddingFrameSet:
    """Read one song's frames, resolving song id and model metadata from the
    directory's ``set.json``."""
    path = Path(path)
    model, songs = _load_sidecar(path.parent)
    song_id = None
    for entry in songs:
        if entry["file"] == path.name:
            song_id = entry["id"]
            break
    if song_id is None:
        raise FormatError(f"{path.name} is not listed in {path.parent / SET_METADATA_NAME}")

    frames, dim = _read_frame_file(path)
    if dim != model.dim:
        raise FormatError(
            f"dim mismatch: {path.name} header says {dim}, set metadata says {model.dim}"
        )
    frameset = EmbeddingFrameSet(model=model, song_id=song_id, frames=frames)
    frameset.validate()
    return frameset


def _read_frame_file(path: Path) -> tuple[np.ndarray, int]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise FormatError(f"truncated payload: {path} shorter than header")
    magic, version, dim, n_frames = _HEADER.unpack_from(raw)
    if magic != FRAME_MAGIC:
        raise FormatError(f"bad magic in {path}: {magic!r}")
    if version != FRAME_VERSION:
        raise FormatError(f"unsupported version {version} in {path}")
    if dim < 1 or n_frames < 1:
        raise FormatError(f"invalid header in {path}: dim={dim}, n_frames={n_frames}")
    expected = _HEADER.size + 4 * dim * n_frames
    if len(raw) < expected:
        raise FormatError(
            f"truncated payload in {path}: expected {expected} bytes, found {len(raw)}"
        )
    if len(raw) > expected:
        raise FormatError(f"trailing data in {path}: {len(raw) - expected} extra bytes")
    frames = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n_frames, dim)
    return frames.copy(), dim


def _register_song(directory: Path, model: EmbeddingModelInfo, song_id: str, filename: str) -> None:
    sidecar = directory / SET_METADATA_NAME
    if sidecar.exists():
        existing_model, songs = _load_sidecar(directory)
        if existing_model != model:
            raise ValidationError(
                f"set {directory} already holds model {existing_model.name!r}; "
                f"cannot add {model.name!r}"
            )
    else:
        songs = []

    by_id = {entry["id"]: entry for entry in songs}
    by_file = {entry["file"]: entry for entry in songs}
    current = by_id.get(song_id)
    if current is not None and current["file"] != filename:
        raise ValidationError(
            f"song {song_id!r} already stored as {current['file']}, not {filename}"
        )
    clash = by_file.get(filename)
    if clash is not None and clash["id"] != song_id:
        raise ValidationError(f"file {filename} already used by song {clash['id']!r}")
    by_id[song_id] = {"id": song_id, "file": filename}
    _write_sidecar(directory, model, sorted(by_id.values(), key=lambda e: e["id"]))


def _write_sidecar(directory: Path, model: EmbeddingModelInfo, songs: list[dict]) -> None:
    payload = {"model": model.to_json_dict(), "songs": songs}
    text = json.dumps(payload, indent=2) + "\n"
    (directory / SET_METADATA_NAME).write_text(text, encoding="utf-8")


def _load_sidecar(directory: Path) -> tuple[EmbeddingModelInfo, list[dict]]:
    sidecar = directory / SET_METADATA_NAME
    if not sidecar.exists():
        raise FormatError(f"missing set metadata: {sidecar}")
    try:
        obj = json.loads(sidecar.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable set metadata {sidecar}: {exc}") from exc
    if not isinstance(obj, dict) or "model" not in obj or "songs" not in obj:
        raise FormatError(f"malformed set metadata: {sidecar}")
    model = EmbeddingModelInfo.from_json_dict(obj["model"])
    songs = []
    seen_ids: set[str] = set()
    for entry in obj["songs"]:
        if not isinstance(entry, dict) or "id" not in entry or "file" not in entry:
            raise FormatError(f"malformed song entry in {sidecar}")
        if entry["id"] in seen_ids:
            raise FormatError(f"duplicate song id {entry['id']!r} in {sidecar}")
        seen_ids.add(entry["id"])
        songs.append({"id": str(entry["id"]), "file": str(entry["file"])})
    return model, songs


def _song_filename(song_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", song_id) + ".fade"


def write_set(directory: str | Path, framesets: list[EmbeddingFrameSet]) -> None:
    """Write a whole set directory in one shot (songs plus one sidecar)."""
    directory = Path(directory)
    if not framesets:
        raise ValidationError("cannot write an empty set")
    model = framesets[0].model
    names: dict[str, str] = {}
    for fs in framesets:
        fs.validate()
        if fs.model != model:
            raise ValidationError("all songs in a set must share one model")
        if fs.song_id in names:
            raise ValidationError(f"duplicate song id {fs.song_id!r}")
        filename = _song_filename(fs.song_id)
        if filename in names.values():
            raise ValidationError(f"song id {fs.song_id!r} collides on filename {filename}")
        names[fs.song_id] = filename

    directory.mkdir(parents=True, exist_ok=True)
    for fs in framesets:
        header = _HEADER.pack(FRAME_MAGIC, FRAME_VERSION, fs.model.dim, fs.n_frames)
        payload = np.ascontiguousarray(fs.frames, dtype="<f4").tobytes()
        (directory / names[fs.song_id]).write_bytes(header + payload)
    songs = [{"id": sid, "file": names[sid]} for sid in sorted(names)]
    _write_sidecar(directory, model, songs)


def read_set(directory: str | Path) -> list[EmbeddingFrameSet]:
    """Read every song in a set directory, sorted by song id."""
    directory = Path(directory)
    model, songs = _load_sidecar(directory)
    if not songs:
        raise FormatError(f"no songs in set {directory}")
    out = []
    for entry in sorted(songs, key=lambda e: e["id"]):
        path = directory / entry["file"]
        frames, dim = _read_frame_file(path)
        if dim != model.dim:
            raise FormatError(
                f"dim mismatch: {path.name} header says {dim}, set metadata says {model.dim}"
            )
        fs = EmbeddingFrameSet(model=model, song_id=entry["id"], frames=frames)
        fs.validate()
        out.append(fs)
    return out


def set_fingerprint(directory: str | Path) -> bytes:
    """32-byte digest of a set directory listing (model, song ids, file
    names and sizes). Stored in stats caches to detect stale reuse."""
    directory = Path(directory)
    model, songs = _load_sidecar(directory)
    h = sha256()
    h.update(json.dumps(model.to_json_dict(), sort_keys=True).encode())
    for entry in sorted(songs, key=lambda e: e["id"]):
        path = directory / entry["file"]
        try:
            size = path.stat().st_size
        except OSError as exc:
            raise FormatError(f"cannot stat {path}: {exc}") from exc
        h.update(f"\n{entry['id']}\t{entry['file']}\t{size}".encode())
    return h.digest()


def generate_synthetic(
    spec: SyntheticSpec, song_id: str = "synth"
) -> EmbeddingFrameSet:
    """Draw `spec.n_frames` i.i.d. frames from multinormal(mean, covariance).

    Pure function of the spec (the seed fixes the draw). Marginally PSD
    covariances are tolerated via a small diagonal jitter before Cholesky.
    """
    spec.validate()
    mean = np.asarray(spec.mean, dtype=np.float64)
    cov = np.asarray(spec.covariance, dtype=np.float64)
    if float(np.abs(cov).max()) == 0.0:
        # point mass: every frame is the mean
        frames = np.broadcast_to(mean, (spec.n_frames, spec.dim)).astype(np.float32)
        fs = EmbeddingFrameSet(
            model=synthetic_model_info(spec.dim), song_id=song_id, frames=frames
        )
        fs.validate()
        return fs
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * float(np.trace(cov)) / spec.dim
        try:
            chol = np.linalg.cholesky(cov + jitter * np.eye(spec.dim))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "covariance is not positive semidefinite within tolerance"
            ) from exc
    rng = np.random.default_rng(spec.seed)
    z = rng.standard_normal((spec.n_frames, spec.dim))
    frames = (mean + z @ chol.T).astype(np.float32)
    fs = EmbeddingFrameSet(
        model=synthetic_model_info(spec.dim), song_id=song_id, frames=frames
    )
    fs.validate()
    return fs
