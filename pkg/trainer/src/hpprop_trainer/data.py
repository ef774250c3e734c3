"""Seeded patch-pair dataset: clean crops plus Gaussian-noise residuals."""

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

_IMAGE_EXTS = (".png", ".ppm", ".jpg", ".jpeg", ".bmp")


@dataclass
class TrainConfig:
    corpus_dir: str
    patch_size: int = 35
    stride: int = 35
    noise_sigmas: tuple = (5 / 255, 15 / 255, 25 / 255)
    augment: bool = True
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        # receptive-field floor for the 1,2,3,4,3,2,1 dilation schedule
        if self.patch_size < 9:
            raise ValueError(f"patch_size must be >= 9, got {self.patch_size}")
        if not self.noise_sigmas:
            raise ValueError("noise_sigmas must be nonempty")
        if any(not 0 <= s < 1 for s in self.noise_sigmas):
            raise ValueError("each noise sigma must be in [0, 1)")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


def _load_value_plane(path):
    """Clean image as the per-pixel max of RGB (the plane the solver denoises)."""
    im = Image.open(path)
    im.load()
    if im.mode not in ("L", "RGB"):
        im = im.convert("RGB")
    arr = np.asarray(im, dtype=np.float64) / 255.0
    if arr.ndim == 3:
        arr = arr.max(axis=-1)
    return arr


def _augment_group(patch):
    """The 8 rotation/flip variants of a patch."""
    out = []
    for k in range(4):
        rotated = np.rot90(patch, k)
        out.append(rotated)
        out.append(np.fliplr(rotated))
    return out


def build_patch_dataset(cfg):
    """Returns (noisy, clean, residual) float32 arrays of shape (N, ps, ps).

    Patches come from a stride grid over every readable corpus image,
    optionally augmented by rotations and flips; one sigma is drawn per
    patch. Fully determined by cfg.seed.
    """
    names = sorted(
        n for n in os.listdir(cfg.corpus_dir)
        if os.path.splitext(n)[1].lower() in _IMAGE_EXTS
    )
    if not names:
        raise ValueError(f"no corpus images in {cfg.corpus_dir}")
    rng = np.random.default_rng(cfg.seed)
    clean_patches = []
    readable = 0
    for name in names:
        path = os.path.join(cfg.corpus_dir, name)
        try:
            plane = _load_value_plane(path)
        except OSError as e:
            warnings.warn(f"skipping unreadable corpus image {path}: {e}")
            continue
        readable += 1
        ps = cfg.patch_size
        h, w = plane.shape
        for i in range(0, h - ps + 1, cfg.stride):
            for j in range(0, w - ps + 1, cfg.stride):
                patch = plane[i : i + ps, j : j + ps]
                if cfg.augment:
                    clean_patches.extend(_augment_group(patch))
                else:
                    clean_patches.append(patch)
    if readable == 0:
        raise ValueError(f"no readable corpus images in {cfg.corpus_dir}")
    if not clean_patches:
        raise ValueError(
            f"corpus images smaller than patch_size {cfg.patch_size}"
        )
    clean = np.stack([np.ascontiguousarray(p) for p in clean_patches]).astype(
        np.float32
    )
    sigmas = rng.choice(np.asarray(cfg.noise_sigmas), size=len(clean))
    noise = rng.standard_normal(clean.shape) * sigmas[:, None, None]
    noisy = (clean + noise).astype(np.float32)
    residual = noisy - clean
    return noisy, clean, residual
