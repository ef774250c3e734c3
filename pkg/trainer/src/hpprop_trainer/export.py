"""HPW1 weight export (the wire format shared with the inference engine)."""

import struct

import numpy as np

from .model import fold_batch_norm

MAGIC = b"HPW1"
_ACT_CODES = {"none": 0, "relu": 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


def write_hpw1(records, path):
    """records: list of (kernel, bias, dilation, activation)."""
    chunks = [MAGIC, struct.pack("<I", len(records))]
    for kernel, bias, dilation, activation in records:
        cout, cin = kernel.shape[:2]
        chunks.append(
            struct.pack("<IIIB", cin, cout, dilation, _ACT_CODES[activation])
        )
        chunks.append(np.ascontiguousarray(kernel, dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(bias, dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def export_hpw1(model, path):
    """Fold batch norm and write the model in HPW1 form."""
    write_hpw1(fold_batch_norm(model), path)


def read_hpw1(path):
    """Parse HPW1 back into (kernel, bias, dilation, activation) records."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise ValueError(f"{path}: truncated")
        out = data[pos : pos + n]
        pos += n
        return out

    (count,) = struct.unpack("<I", take(4))
    records = []
    for _ in range(count):
        cin, cout, dilation, act = struct.unpack("<IIIB", take(13))
        kernel = np.frombuffer(take(cout * cin * 36), dtype="<f4").reshape(
            cout, cin, 3, 3
        )
        bias = np.frombuffer(take(cout * 4), dtype="<f4")
        records.append((kernel, bias, dilation, _ACT_NAMES[act]))
    if pos != len(data):
        raise ValueError(f"{path}: trailing bytes")
    return records
