import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_ppm_bytes(rng, w, h):
    """A canonical-header P6 file with random pixel bytes."""
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    pixels = rng.integers(0, 256, size=h * w * 3, dtype=np.uint8)
    return header + pixels.tobytes()


def smooth_plane(rng, h, w, lo=0.1, hi=0.9):
    """Random smooth plane in [lo, hi] (low-frequency cosine mixture)."""
    y, x = np.mgrid[0:h, 0:w]
    p = np.zeros((h, w))
    for _ in range(4):
        fy, fx = rng.uniform(0, 2, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        p += rng.uniform(0.2, 1.0) * np.cos(
            2 * np.pi * (fy * y / h + fx * x / w) + phase
        )
    p -= p.min()
    if p.max() > 0:
        p /= p.max()
    return lo + (hi - lo) * p
