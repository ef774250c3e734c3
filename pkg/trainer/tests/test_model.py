import numpy as np
import pytest
import torch

from hpprop_trainer.data import TrainConfig, build_patch_dataset
from hpprop_trainer.export import export_hpw1, read_hpw1, write_hpw1
from hpprop_trainer.model import (
    DescentNet,
    fold_batch_norm,
    folded_forward,
    train,
)


@pytest.fixture
def small_cfg(corpus_dir):
    return TrainConfig(corpus_dir=corpus_dir, epochs=2, seed=3)


def randomized_net(seed=0):
    """A net with non-trivial BN statistics (as after real training)."""
    torch.manual_seed(seed)
    net = DescentNet()
    with torch.no_grad():
        x = torch.rand(8, 1, 35, 35)
        net.train()
        for _ in range(3):
            net(x + torch.randn_like(x) * 0.1)
    net.eval()
    return net


class TestArchitecture:
    def test_layer_shapes(self):
        net = DescentNet()
        assert len(net.conv) == 7 and len(net.bn) == 5
        assert net.conv[0].weight.shape == (64, 1, 3, 3)
        assert net.conv[6].weight.shape == (1, 64, 3, 3)
        dilations = tuple(c.dilation[0] for c in net.conv)
        assert dilations == (1, 2, 3, 4, 3, 2, 1)

    def test_output_shape_preserved(self):
        net = randomized_net()
        with torch.no_grad():
            y = net(torch.rand(2, 1, 35, 35))
        assert y.shape == (2, 1, 35, 35)


class TestFolding:
    def test_fold_matches_unfolded_forward(self):
        net = randomized_net()
        records = fold_batch_norm(net)
        x = np.random.default_rng(5).uniform(size=(35, 35)).astype(np.float32)
        with torch.no_grad():
            want = net(torch.from_numpy(x)[None, None]).numpy()[0, 0]
        got = folded_forward(records, x)
        assert np.max(np.abs(got - want)) <= 1e-5

    def test_export_reimport_identical(self, tmp_path):
        net = randomized_net(seed=1)
        path = str(tmp_path / "w.hpw1")
        export_hpw1(net, path)
        back = read_hpw1(path)
        for (k1, b1, d1, a1), (k2, b2, d2, a2) in zip(fold_batch_norm(net), back):
            assert np.array_equal(k1, k2)
            assert np.array_equal(b1, b2)
            assert (d1, a1) == (d2, a2)

    def test_write_read_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        records = [
            (rng.normal(size=(2, 1, 3, 3)).astype(np.float32),
             rng.normal(size=2).astype(np.float32), 3, "relu")
        ]
        path = str(tmp_path / "r.hpw1")
        write_hpw1(records, path)
        (k, b, d, a), = read_hpw1(path)
        assert np.array_equal(k, records[0][0])
        assert np.array_equal(b, records[0][1])
        assert (d, a) == (3, "relu")


class TestTraining:
    def test_zero_sigma_drives_val_mse_down(self, corpus_dir):
        cfg = TrainConfig(corpus_dir=corpus_dir, noise_sigmas=(0.0,),
                          augment=False, epochs=12, batch_size=16,
                          learning_rate=2e-3, seed=1)
        dataset = build_patch_dataset(cfg)
        _, _, val_mse = train(cfg, dataset)
        assert val_mse < 1e-3  # zero-noise target: net must learn ~zero output

    def test_seeded_training_reproducible(self, corpus_dir):
        cfg = TrainConfig(corpus_dir=corpus_dir, augment=False, epochs=1, seed=11)
        dataset = build_patch_dataset(cfg)
        _, _, val1 = train(cfg, dataset)
        _, _, val2 = train(cfg, dataset)
        assert val1 == pytest.approx(val2, rel=1e-6)
