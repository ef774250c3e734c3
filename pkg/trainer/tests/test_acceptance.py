"""Trainer acceptance: held-out denoising gain and cross-engine parity."""

import time

import numpy as np
import pytest
import torch

from hpprop_trainer.data import TrainConfig, build_patch_dataset
from hpprop_trainer.export import export_hpw1
from hpprop_trainer.model import train

SIGMA = 15 / 255


@pytest.fixture(scope="session")
def trained(corpus_dir, tmp_path_factory):
    cfg = TrainConfig(corpus_dir=corpus_dir, noise_sigmas=(SIGMA,),
                      epochs=30, batch_size=32, learning_rate=1e-3, seed=42)
    dataset = build_patch_dataset(cfg)
    start = time.perf_counter()
    model, _, _ = train(cfg, dataset)
    elapsed = time.perf_counter() - start
    path = str(tmp_path_factory.mktemp("weights") / "net.hpw1")
    export_hpw1(model, path)
    return model, path, elapsed


def held_out_patches(n=40, size=35, seed=777):
    """Noisy/clean pairs from fresh smooth images never seen in training."""
    from conftest import smooth_image

    rng = np.random.default_rng(seed)
    clean = np.stack(
        [smooth_image(rng, size, size) for _ in range(n)]
    ).astype(np.float32)
    noisy = clean + rng.standard_normal(clean.shape).astype(np.float32) * SIGMA
    return noisy, clean


def test_held_out_mse_reduction(trained):
    model, _, elapsed = trained
    assert elapsed < 1800  # training budget: 30 min CPU
    noisy, clean = held_out_patches()
    with torch.no_grad():
        residual = model(torch.from_numpy(noisy)[:, None]).numpy()[:, 0]
    denoised = noisy - residual
    mse_noisy = float(np.mean((noisy - clean) ** 2))
    mse_denoised = float(np.mean((denoised - clean) ** 2))
    reduction = 1.0 - mse_denoised / mse_noisy
    print(f"[PASS] held-out MSE reduction {reduction:.1%} "
          f"(training took {elapsed:.0f}s)")
    assert reduction >= 0.30


def test_cross_engine_parity(trained):
    from hpprop.denoiser import NetworkDescent, load_weights, network_correction

    model, path, _ = trained
    weights = load_weights(path)
    noisy, _ = held_out_patches(n=10, seed=4242)
    with torch.no_grad():
        trainer_out = model(torch.from_numpy(noisy)[:, None]).numpy()[:, 0]
    worst = 0.0
    for k in range(10):
        engine_out = network_correction(weights, noisy[k].astype(np.float64))
        worst = max(worst, float(np.max(np.abs(engine_out - trainer_out[k]))))
    print(f"[PASS] cross-engine parity, max abs diff {worst:.2e}")
    assert worst <= 1e-4
