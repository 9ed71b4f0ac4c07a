"""Streaming multinormal fits and the Frechet distance between two fits.

The distance between fits (m1, C1) and (m2, C2) is

    ||m1 - m2||^2 + tr(C1 + C2 - 2*sqrt(C1 C2)).

C1 C2 is not symmetric, so sqrt(C1 C2) is evaluated through the similar
symmetric product: with A = sqrt(C1),

    tr sqrt(C1 C2) = tr sqrt(A C2 A),

because C1 C2 = A (A C2 A) A^-1 shares its eigenvalues with A C2 A, and the
trace of the square root is the sum of the square roots of the eigenvalues.
Both A and A C2 A are symmetric PSD, so a symmetric eigendecomposition
applies to each.

Accumulation is single-pass in 64-bit with a shifted origin (the first frame
seen), which keeps the sums small when embeddings have large means. Fits are
mergeable, enabling deterministic parallel tree reduction.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericalError, ValidationError

# Eigenvalues of a PSD matrix in [-NEG_EIG_TOL * lam_max, 0) are roundoff
# (rank-deficient per-song covariances make them routine) and clamp to zero;
# anything more negative is treated as numerical breakdown, not clamped.
NEG_EIG_TOL = 1e-6

STATS_MAGIC = b"FADS"
STATS_VERSION = 1
_STATS_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, count
FINGERPRINT_BYTES = 32

NO_FINGERPRINT = b"\x00" * FINGERPRINT_BYTES


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianStats:
    """Single-pass mergeable fit of a d-dimensional multinormal.

    State is (count, origin, dev_sum, dev_outer) where origin is the first
    accumulated frame, dev_sum = sum(x - origin) and
    dev_outer = sum of outer(x - origin, x - origin).

    `exact_mean`/`exact_cov`, when set, hold moments supplied verbatim (from
    a cache file or analytic parameters); reads return them bit-for-bit.
    """

    count: int
    origin: np.ndarray
    dev_sum: np.ndarray
    dev_outer: np.ndarray
    exact_mean: np.ndarray | None = field(default=None, repr=False)
    exact_cov: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def empty(cls, dim: int) -> "GaussianStats":
        if dim < 1:
            raise ValidationError("dim must be >= 1")
        zero = np.zeros(dim)
        return cls(0, _readonly(zero), _readonly(zero), _readonly(np.zeros((dim, dim))))

    @classmethod
    def from_moments(cls, count: int, mean: np.ndarray, cov: np.ndarray) -> "GaussianStats":
        """Build a fit from explicit moments (unbiased covariance)."""
        mean = np.asarray(mean, dtype=np.float64)
        cov = np.asarray(cov, dtype=np.float64)
        if count < 2:
            raise ValidationError("count must be >= 2 to carry a covariance")
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValidationError("mean/cov shapes are inconsistent")
        scale = float(np.abs(cov).max())
        if scale > 0 and float(np.abs(cov - cov.T).max()) > 1e-12 * scale:
            raise ValidationError("covariance is not symmetric within 1e-12")
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise ValidationError("non-finite moment value")
        return cls(
            count=count,
            origin=_readonly(mean),
            dev_sum=_readonly(np.zeros_like(mean)),
            dev_outer=_readonly((count - 1) * cov),
            exact_mean=_readonly(mean),
            exact_cov=_readonly((cov + cov.T) / 2.0),
        )

    @property
    def dim(self) -> int:
        return self.origin.size

    @property
    def mean(self) -> np.ndarray:
        if self.count < 1:
            raise ValidationError("mean undefined: no frames accumulated")
        if self.exact_mean is not None:
            return self.exact_mean
        return _readonly(self.origin + self.dev_sum / self.count)

    def covariance(self, ddof: int = 1) -> np.ndarray:
        """Covariance with divisor count - ddof (default unbiased)."""
        if ddof not in (0, 1):
            raise ValidationError("ddof must be 0 or 1")
        if self.count - ddof < 1 or self.count < 2:
            raise ValidationError(f"count < 2: covariance undefined at count={self.count}")
        if ddof == 1 and self.exact_cov is not None:
            return self.exact_cov
        c = (self.dev_outer - np.outer(self.dev_sum, self.dev_sum) / self.count) / (
            self.count - ddof
        )
        return _readonly((c + c.T) / 2.0)

    @property
    def cov(self) -> np.ndarray:
        return self.covariance(1)


def _check_frame(stats: GaussianStats, frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64).reshape(-1)
    if frame.size != stats.dim:
        raise ValidationError(f"frame length {frame.size} != dim {stats.dim}")
    if not np.isfinite(frame).all():
        raise ValidationError("non-finite frame value")
    return frame


def accumulate(stats: GaussianStats, frame: np.ndarray) -> GaussianStats:
    """Fold one frame into the fit (functional: returns a new value)."""
    frame = _check_frame(stats, frame)
    if stats.count == 0:
        return GaussianStats(
            1, _readonly(frame), _readonly(np.zeros_like(frame)),
            _readonly(np.zeros((frame.size, frame.size))),
        )
    dev = frame - stats.origin
    return GaussianStats(
        stats.count + 1,
        stats.origin,
        _readonly(stats.dev_sum + dev),
        _readonly(stats.dev_outer + np.outer(dev, dev)),
    )


def fit_frames(frames: np.ndarray) -> GaussianStats:
    """Fit a whole frame matrix (n rows, d columns) in one pass."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValidationError("frames must be a non-empty 2-D matrix")
    if not np.isfinite(frames).all():
        raise ValidationError("non-finite frame value")
    origin = frames[0].copy()
    dev = frames - origin
    return GaussianStats(
        frames.shape[0], _readonly(origin), _readonly(dev.sum(axis=0)),
        _readonly(dev.T @ dev),
    )


def merge(a: GaussianStats, b: GaussianStats) -> GaussianStats:
    """Combine two fits as if their streams had been concatenated."""
    if a.dim != b.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.count == 0:
        return b
    if b.count == 0:
        return a
    # rebase b's sums onto a's origin
    d = b.origin - a.origin
    dev_sum_b = b.dev_sum + b.count * d
    dev_outer_b = (
        b.dev_outer
        + np.outer(d, b.dev_sum)
        + np.outer(b.dev_sum, d)
        + b.count * np.outer(d, d)
    )
    return GaussianStats(
        a.count + b.count,
        a.origin,
        _readonly(a.dev_sum + dev_sum_b),
        _readonly(a.dev_outer + dev_outer_b),
    )


def merge_tree(parts: list[GaussianStats]) -> GaussianStats:
    """Pairwise reduction with a fixed tree shape, so the result does not
    depend on how many workers produced the parts."""
    if not parts:
        raise ValidationError("nothing to merge")
    level = list(parts)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            if i + 1 < len(level):
                nxt.append(merge(level[i], level[i + 1]))
            else:
                nxt.append(level[i])
        level = nxt
    return level[0]


@dataclass(frozen=True)
class FadScore:
    """Frechet distance split into its mean and trace terms.

    value = max(0, mean_term + trace_term); tiny negative totals are pure
    roundoff and clamp to zero with the "trace-clamped" flag.
    """

    value: float
    mean_term: float
    trace_term: float
    numerical_flags: frozenset[str] = frozenset()

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "mean_term": self.mean_term,
            "trace_term": self.trace_term,
            "numerical_flags": sorted(self.numerical_flags),
        }


def _clamped_psd_eigh(matrix: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray, bool]:
    """Symmetric eigendecomposition with the negative-eigenvalue policy."""
    try:
        w, v = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed for {what}") from exc
    lam_max = max(float(w[-1]), 0.0)
    floor = -NEG_EIG_TOL * lam_max
    lam_min = float(w[0])
    if lam_min < floor:
        raise NumericalError(
            f"negative eigenvalue {lam_min:.3e} below tolerance {floor:.3e} in {what}"
        )
    clamped = lam_min < 0.0
    if clamped:
        w = np.clip(w, 0.0, None)
    return w, v, clamped


def frechet_distance(ref: GaussianStats, test: GaussianStats, *, ddof: int = 1) -> FadScore:
    """Distance between the two fitted multinormals (see module docstring)."""
    if ref.dim != test.dim:
        raise ValidationError(f"dimension mismatch: {ref.dim} vs {test.dim}")
    if ref.count < 2 or test.count < 2:
        raise ValidationError("both fits need count >= 2")

    mu_r, mu_t = ref.mean, test.mean
    sig_r = ref.covariance(ddof)
    sig_t = test.covariance(ddof)

    diff = mu_r - mu_t
    mean_term = float(diff @ diff)

    flags: set[str] = set()
    w_r, v_r, clamped_r = _clamped_psd_eigh(sig_r, "reference covariance")
    root = (v_r * np.sqrt(w_r)) @ v_r.T  # sqrt(sig_r)
    inner = root @ sig_t @ root
    inner = (inner + inner.T) / 2.0
    w_m, _, clamped_m = _clamped_psd_eigh(inner, "covariance product")
    if clamped_r or clamped_m:
        flags.add("negative-eigs-clamped")

    tr_sqrt = float(np.sqrt(w_m).sum())
    trace_term = float(np.trace(sig_r) + np.trace(sig_t)) - 2.0 * tr_sqrt

    total = mean_term + trace_term
    value = total
    if total < 0.0:
        flags.add("trace-clamped")
        value = 0.0
    return FadScore(value, mean_term, trace_term, frozenset(flags))


def save_stats_cache(
    stats: GaussianStats, path: str | Path, fingerprint: bytes = NO_FINGERPRINT
) -> None:
    """Persist (count, mean, unbiased covariance) plus a source fingerprint."""
    if stats.count < 2:
        raise ValidationError("cannot cache a fit with count < 2")
    if len(fingerprint) != FINGERPRINT_BYTES:
        raise ValidationError(f"fingerprint must be {FINGERPRINT_BYTES} bytes")
    dim = stats.dim
    mean = np.ascontiguousarray(stats.mean, dtype="<f8")
    cov = stats.covariance(1)
    tril = np.ascontiguousarray(cov[np.tril_indices(dim)], dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_STATS_HEADER.pack(STATS_MAGIC, STATS_VERSION, dim, stats.count))
        fh.write(mean.tobytes())
        fh.write(tril.tobytes())
        fh.write(fingerprint)


def load_stats_cache(
    path: str | Path,
    source_dir: str | Path | None = None,
    verify: bool = True,
) -> tuple[GaussianStats, bytes]:
    """Load a stats cache; returns the fit and the stored fingerprint.

    When `source_dir` is given and `verify` is true, the stored fingerprint
    must match the directory's current listing.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _STATS_HEADER.size:
        raise FormatError(f"truncated stats cache: {path}")
    magic, version, dim, count = _STATS_HEADER.unpack_from(raw)
    if magic != STATS_MAGIC:
        raise FormatError(f"bad magic in {path}: {magic!r}")
    if version != STATS_VERSION:
        raise FormatError(f"unsupported stats cache version {version} in {path}")
    n_tril = dim * (dim + 1) // 2
    expected = _STATS_HEADER.size + 8 * (dim + n_tril) + FINGERPRINT_BYTES
    if len(raw) != expected:
        raise FormatError(
            f"truncated stats cache {path}: expected {expected} bytes, found {len(raw)}"
        )
    offset = _STATS_HEADER.size
    mean = np.frombuffer(raw, dtype="<f8", count=dim, offset=offset).copy()
    offset += 8 * dim
    tril = np.frombuffer(raw, dtype="<f8", count=n_tril, offset=offset)
    offset += 8 * n_tril
    fingerprint = raw[offset : offset + FINGERPRINT_BYTES]

    cov = np.zeros((dim, dim))
    idx = np.tril_indices(dim)
    cov[idx] = tril
    cov.T[idx] = tril
    stats = GaussianStats.from_moments(count, mean, cov)

    if source_dir is not None and verify:
        from .store import set_fingerprint

        current = set_fingerprint(source_dir)
        if current != fingerprint:
            raise FormatError(
                f"stats cache {path} does not match the current contents of {source_dir} "
                "(pass --no-verify to skip this check)"
            )
    return stats, fingerprint
