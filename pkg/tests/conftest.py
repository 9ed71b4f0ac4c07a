import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fadkit.store import (
    EmbeddingFrameSet,
    SyntheticSpec,
    generate_synthetic,
    synthetic_model_info,
    write_set,
)


def make_frameset(dim: int, n: int, seed: int, song_id: str = "song") -> EmbeddingFrameSet:
    rng = np.random.default_rng(seed)
    frames = rng.standard_normal((n, dim)).astype(np.float32)
    return EmbeddingFrameSet(model=synthetic_model_info(dim), song_id=song_id, frames=frames)


def make_gaussian_set(
    dim: int,
    n_songs: int,
    frames_per_song: int,
    seed: int,
    mean: np.ndarray | None = None,
    cov: np.ndarray | None = None,
) -> list[EmbeddingFrameSet]:
    mean = np.zeros(dim) if mean is None else mean
    cov = np.eye(dim) if cov is None else cov
    out = []
    for i in range(n_songs):
        spec = SyntheticSpec(
            dim=dim, mean=mean, covariance=cov, n_frames=frames_per_song, seed=seed + i
        )
        out.append(generate_synthetic(spec, song_id=f"song{i:04d}"))
    return out


@pytest.fixture
def small_set_dir(tmp_path):
    songs = make_gaussian_set(dim=4, n_songs=3, frames_per_song=50, seed=11)
    directory = tmp_path / "small_set"
    write_set(directory, songs)
    return directory
