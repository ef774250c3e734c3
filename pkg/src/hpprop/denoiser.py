"""Learned descent-direction inference: a 7-layer dilated CNN.

The network maps a single plane to a correction N(I) that the solver
subtracts from the current illumination iterate. Weights arrive with
batch norm already folded, in the HPW1 binary format. Identity and
Gaussian-blur variants stand in for the network in ablation runs.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

MAGIC = b"HPW1"
KERNEL_SIZE = 3
LAYER_COUNT = 7
HIDDEN_CHANNELS = 64
DILATIONS = (1, 2, 3, 4, 3, 2, 1)

ACT_NONE = 0
ACT_RELU = 1
_ACT_NAMES = {ACT_NONE: "none", ACT_RELU: "relu"}


class WeightFormatError(ValueError):
    """Bad magic or truncated HPW1 file."""


class WeightStructureError(ValueError):
    """HPW1 parsed but violates the 7-layer architecture invariants."""


@dataclass(frozen=True)
class ConvLayer:
    """One dilated 3x3 convolution: kernel[out][in][3][3], per-channel bias."""

    kernel: np.ndarray
    bias: np.ndarray
    dilation: int
    activation: str  # "relu" or "none"

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=np.float32)
        bias = np.asarray(self.bias, dtype=np.float32)
        if kernel.ndim != 4 or kernel.shape[2:] != (KERNEL_SIZE, KERNEL_SIZE):
            raise WeightStructureError(
                f"kernel must be out x in x 3 x 3, got {kernel.shape}"
            )
        if bias.shape != (kernel.shape[0],):
            raise WeightStructureError(
                f"bias length {bias.shape} != out channels {kernel.shape[0]}"
            )
        if self.dilation < 1:
            raise WeightStructureError(f"dilation must be >= 1, got {self.dilation}")
        if self.activation not in ("relu", "none"):
            raise WeightStructureError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "bias", bias)

    @property
    def out_channels(self):
        return self.kernel.shape[0]

    @property
    def in_channels(self):
        return self.kernel.shape[1]


@dataclass(frozen=True)
class DenoiserWeights:
    """The 7-layer stack: 1->64, five 64->64, 64->1; ReLU after layers 1-6."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if len(layers) != LAYER_COUNT:
            raise WeightStructureError(
                f"expected {LAYER_COUNT} layers, got {len(layers)}"
            )
        expected = [(1, HIDDEN_CHANNELS)]
        expected += [(HIDDEN_CHANNELS, HIDDEN_CHANNELS)] * 5
        expected += [(HIDDEN_CHANNELS, 1)]
        for idx, (layer, (cin, cout)) in enumerate(zip(layers, expected)):
            if (layer.in_channels, layer.out_channels) != (cin, cout):
                raise WeightStructureError(
                    f"layer {idx + 1}: expected {cin}->{cout}, "
                    f"got {layer.in_channels}->{layer.out_channels}"
                )
            want_act = "none" if idx == LAYER_COUNT - 1 else "relu"
            if layer.activation != want_act:
                raise WeightStructureError(
                    f"layer {idx + 1}: expected activation {want_act!r}, "
                    f"got {layer.activation!r}"
                )
        object.__setattr__(self, "layers", layers)


def conv2d_dilated(stack, layer):
    """Dilated cross-correlation with zero padding = dilation (shape preserved)."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim == 2:
        stack = stack[None, :, :]
    if stack.shape[0] != layer.in_channels:
        raise ValueError(
            f"input has {stack.shape[0]} channels, layer expects {layer.in_channels}"
        )
    d = layer.dilation
    _, h, w = stack.shape
    padded = np.pad(stack, ((0, 0), (d, d), (d, d)))
    # gather the 9 dilated taps, then contract kernels in one einsum
    taps = np.stack(
        [
            padded[:, u * d : u * d + h, v * d : v * d + w]
            for u in range(KERNEL_SIZE)
            for v in range(KERNEL_SIZE)
        ],
        axis=1,
    )  # (in, 9, H, W)
    k = layer.kernel.astype(np.float64).reshape(
        layer.out_channels, layer.in_channels, KERNEL_SIZE * KERNEL_SIZE
    )
    out = np.einsum("oik,ikhw->ohw", k, taps)
    out += layer.bias.astype(np.float64)[:, None, None]
    if layer.activation == "relu":
        out = np.maximum(out, 0.0)
    return out


def network_correction(weights, plane):
    """Run the 7-layer stack on a plane; returns the correction N(I)."""
    x = np.asarray(plane, dtype=np.float64)[None, :, :]
    for layer in weights.layers:
        x = conv2d_dilated(x, layer)
    return x[0]


@dataclass(frozen=True)
class IdentityDescent:
    """Zero correction: the auxiliary iterate equals the current one."""


@dataclass(frozen=True)
class GaussianBlurDescent:
    """Non-learned navigation: the auxiliary iterate is a Gaussian blur."""

    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class NetworkDescent:
    """Learned descent direction backed by folded HPW1 weights."""

    weights: DenoiserWeights


def apply_descent(d, plane):
    """Compute the auxiliary update I - N(I); not projected here."""
    plane = np.asarray(plane, dtype=np.float64)
    if isinstance(d, IdentityDescent):
        return plane
    if isinstance(d, GaussianBlurDescent):
        return gaussian_filter(plane, sigma=d.sigma)
    if isinstance(d, NetworkDescent):
        return plane - network_correction(d.weights, plane)
    raise TypeError(f"unknown descent direction {type(d).__name__}")


def save_weights(w, path):
    """Write HPW1: magic, u32 layer count, then per-layer records (LE, packed)."""
    chunks = [MAGIC, struct.pack("<I", len(w.layers))]
    for layer in w.layers:
        act = ACT_RELU if layer.activation == "relu" else ACT_NONE
        chunks.append(
            struct.pack(
                "<IIIB", layer.in_channels, layer.out_channels, layer.dilation, act
            )
        )
        chunks.append(
            np.ascontiguousarray(layer.kernel, dtype="<f4").tobytes()
        )
        chunks.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def load_weights(path):
    """Parse HPW1 and validate the architecture invariants."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise WeightFormatError(f"{path}: bad magic (expected HPW1)")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise WeightFormatError(f"{path}: truncated file")
        out = data[pos : pos + n]
        pos += n
        return out

    (layer_count,) = struct.unpack("<I", take(4))
    layers = []
    for _ in range(layer_count):
        cin, cout, dilation, act = struct.unpack("<IIIB", take(13))
        if act not in _ACT_NAMES:
            raise WeightFormatError(f"{path}: unknown activation code {act}")
        ksize = cout * cin * KERNEL_SIZE * KERNEL_SIZE * 4
        kernel = np.frombuffer(take(ksize), dtype="<f4").reshape(
            cout, cin, KERNEL_SIZE, KERNEL_SIZE
        )
        bias = np.frombuffer(take(cout * 4), dtype="<f4")
        layers.append(
            ConvLayer(kernel=kernel, bias=bias, dilation=dilation,
                      activation=_ACT_NAMES[act])
        )
    if pos != len(data):
        raise WeightFormatError(f"{path}: {len(data) - pos} trailing bytes")
    return DenoiserWeights(layers=tuple(layers))
