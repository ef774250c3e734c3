import numpy as np
import pytest
from PIL import Image


def smooth_image(rng, h, w):
    """Synthetic clean natural-looking image: low-frequency cosine mixture."""
    y, x = np.mgrid[0:h, 0:w]
    p = np.zeros((h, w))
    for _ in range(6):
        fy, fx = rng.uniform(0, 4, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        p += rng.uniform(0.2, 1.0) * np.cos(
            2 * np.pi * (fy * y / h + fx * x / w) + phase
        )
    p -= p.min()
    p /= max(p.max(), 1e-9)
    return p


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """Desk-scale corpus: 24 synthetic 70x70 grayscale PNGs."""
    rng = np.random.default_rng(99)
    d = tmp_path_factory.mktemp("corpus")
    for k in range(24):
        img = (smooth_image(rng, 70, 70) * 255).round().astype(np.uint8)
        Image.fromarray(img, mode="L").save(d / f"clean{k:02d}.png")
    return str(d)
