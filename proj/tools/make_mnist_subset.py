#!/usr/bin/env python3
"""Write a small MNIST subset in IDX format.

The source is the 5000-image MNIST sample bundled with the mlxtend wheel
(rows sorted by class, label in the last column). Rows are shuffled with a
fixed seed so any prefix is roughly class balanced, then the first
--count rows are written as an IDX3 image file and an IDX1 label file.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 tools/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl tests/data
"""
import argparse
import gzip
import random
import struct
import zipfile
from pathlib import Path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("wheel")
    ap.add_argument("out_dir")
    ap.add_argument("--count", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20211)
    args = ap.parse_args()

    with zipfile.ZipFile(args.wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    rows = [line.split(",") for line in raw.decode().splitlines() if line]
    random.Random(args.seed).shuffle(rows)
    rows = rows[: args.count]

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "mnist-subset-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for r in rows:
            f.write(bytes(int(float(v)) for v in r[:784]))
    with open(out / "mnist-subset-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(rows)))
        f.write(bytes(int(float(r[784])) for r in rows))


if __name__ == "__main__":
    main()
