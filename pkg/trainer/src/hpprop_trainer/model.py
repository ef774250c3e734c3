"""The 7-layer dilated CNN, its training loop, and batch-norm folding."""

import numpy as np
import torch
import torch.nn as nn

DILATIONS = (1, 2, 3, 4, 3, 2, 1)
HIDDEN = 64
BN_EPS = 1e-5


class DescentNet(nn.Module):
    """1->64, five 64->64 (BN on layers 2-6), 64->1; ReLU after layers 1-6.

    The output is the predicted correction (noise residual) that the
    solver subtracts from its iterate.
    """

    def __init__(self):
        super().__init__()
        self.conv = nn.ModuleList()
        self.bn = nn.ModuleList()
        channels = [1] + [HIDDEN] * 6 + [1]
        for idx, d in enumerate(DILATIONS):
            self.conv.append(
                nn.Conv2d(channels[idx], channels[idx + 1], 3,
                          padding=d, dilation=d)
            )
        for _ in range(5):  # layers 2..6
            self.bn.append(nn.BatchNorm2d(HIDDEN, eps=BN_EPS))

    def forward(self, x):
        for idx, conv in enumerate(self.conv):
            x = conv(x)
            if 1 <= idx <= 5:
                x = self.bn[idx - 1](x)
            if idx < 6:
                x = torch.relu(x)
        return x


class DivergenceError(RuntimeError):
    pass


def train(cfg, dataset, val_fraction=0.1, log=None):
    """Train on (noisy, residual) pairs; returns (model, train_mse, val_mse)."""
    noisy, _, residual = dataset
    torch.manual_seed(cfg.seed)
    n = len(noisy)
    n_val = max(1, int(n * val_fraction))
    perm = np.random.default_rng(cfg.seed).permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        train_idx = val_idx

    x_train = torch.from_numpy(noisy[train_idx]).unsqueeze(1)
    y_train = torch.from_numpy(residual[train_idx]).unsqueeze(1)
    x_val = torch.from_numpy(noisy[val_idx]).unsqueeze(1)
    y_val = torch.from_numpy(residual[val_idx]).unsqueeze(1)

    model = DescentNet()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    # Adam stalls at a loss floor set by the step size; decay to zero
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=cfg.epochs)
    loss_fn = nn.MSELoss()
    train_mse = float("nan")
    for epoch in range(cfg.epochs):
        model.train()
        order = torch.randperm(len(x_train))
        total, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            opt.zero_grad()
            pred = model(x_train[idx])
            loss = loss_fn(pred, y_train[idx])
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"training loss became non-finite at epoch {epoch}"
                )
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
            seen += len(idx)
        sched.step()
        train_mse = total / seen
        if log:
            log(f"epoch {epoch + 1}/{cfg.epochs}: train MSE {train_mse:.3e}")
    model.eval()
    with torch.no_grad():
        val_mse = float(loss_fn(model(x_val), y_val))
    return model, train_mse, val_mse


def fold_batch_norm(model):
    """Fold BN scale/shift into the adjacent convolutions.

    Returns a list of (kernel, bias, dilation, activation) records matching
    the inference engine's layer layout, kernels as float32
    out x in x 3 x 3 arrays.
    """
    model.eval()
    records = []
    for idx, conv in enumerate(model.conv):
        kernel = conv.weight.detach().numpy().astype(np.float32)
        bias = conv.bias.detach().numpy().astype(np.float32)
        if 1 <= idx <= 5:
            bn = model.bn[idx - 1]
            gamma = bn.weight.detach().numpy()
            beta = bn.bias.detach().numpy()
            mean = bn.running_mean.detach().numpy()
            var = bn.running_var.detach().numpy()
            scale = (gamma / np.sqrt(var + BN_EPS)).astype(np.float64)
            kernel = (kernel * scale[:, None, None, None]).astype(np.float32)
            bias = ((bias - mean) * scale + beta).astype(np.float32)
        activation = "none" if idx == 6 else "relu"
        records.append((kernel, bias, DILATIONS[idx], activation))
    return records


def folded_forward(records, plane):
    """Numpy forward pass over folded records (fold-correctness oracle)."""
    x = np.asarray(plane, dtype=np.float32)[None]
    for kernel, bias, dilation, activation in records:
        cin, h, w = x.shape
        padded = np.pad(x, ((0, 0), (dilation, dilation), (dilation, dilation)))
        taps = np.stack(
            [
                padded[:, u * dilation : u * dilation + h,
                       v * dilation : v * dilation + w]
                for u in range(3)
                for v in range(3)
            ],
            axis=1,
        )
        k = kernel.reshape(kernel.shape[0], cin, 9)
        x = np.einsum("oik,ikhw->ohw", k.astype(np.float64),
                      taps.astype(np.float64))
        x += bias.astype(np.float64)[:, None, None]
        if activation == "relu":
            x = np.maximum(x, 0.0)
        x = x.astype(np.float32)
    return x[0]
