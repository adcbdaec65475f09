#!/usr/bin/env python3
"""Convert the digits bundled in the npm `mnist` package (10,000 MNIST samples,
MIT licensed) into IDX files.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-subset

Samples are interleaved with a fixed permutation and split 8000 train / 2000 test.
"""
import json
import random
import struct
import sys
from pathlib import Path


def write_idx(path, dims, payload, dtype_code=0x08):
    with open(path, "wb") as f:
        f.write(struct.pack(">BBBB", 0, 0, dtype_code, len(dims)))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload)


def main(src, dst, n_train=8000):
    samples = []
    for digit in range(10):
        data = json.loads(Path(src, f"{digit}.json").read_text())["data"]
        for i in range(len(data) // 784):
            pix = bytes(min(255, max(0, round(v * 255))) for v in data[i * 784:(i + 1) * 784])
            samples.append((pix, digit))
    random.Random(20151104).shuffle(samples)
    out = Path(dst)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", samples[:n_train]), ("t10k", samples[n_train:])):
        write_idx(out / f"{name}-images-idx3-ubyte", [len(part), 28, 28], b"".join(p for p, _ in part))
        write_idx(out / f"{name}-labels-idx1-ubyte", [len(part)], bytes(l for _, l in part))
        print(name, len(part))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
