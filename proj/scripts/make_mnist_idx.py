#!/usr/bin/env python3
"""Write MNIST IDX files into data/mnist.

If the four standard MNIST files are already present (optionally gzipped) in
the output directory they are decompressed and left alone. Otherwise the
5000-digit MNIST subset shipped inside the `mlxtend` wheel is split per class
into 400 training / 100 testing digits and written in the IDX layout used by
the original distribution (big-endian header words: magic, count, rows, cols).

Usage: make_mnist_idx.py [--out DIR] [--wheel PATH]
"""

import argparse
import gzip
import io
import pathlib
import shutil
import struct
import subprocess
import sys
import tempfile
import zipfile

import numpy as np

NAMES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def load_subset(wheel):
    if wheel is None:
        tmp = pathlib.Path(tempfile.mkdtemp())
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "mlxtend", "-d", str(tmp)],
            check=True,
        )
        wheel = next(tmp.glob("mlxtend-*.whl"))
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",")
    return table[:, :-1], table[:, -1].astype(int)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "mnist"))
    parser.add_argument("--wheel", default=None)
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for name in NAMES:
        gz = out / (name + ".gz")
        if gz.exists() and not (out / name).exists():
            with gzip.open(gz, "rb") as src, open(out / name, "wb") as dst:
                shutil.copyfileobj(src, dst)
    if all((out / n).exists() for n in NAMES):
        print(f"MNIST IDX files already present in {out}")
        return

    pixels, labels = load_subset(args.wheel)
    train_idx, test_idx = [], []
    for digit in range(10):
        members = np.flatnonzero(labels == digit)
        train_idx.extend(members[:400])
        test_idx.extend(members[400:500])
    train_idx = np.array(train_idx)
    test_idx = np.array(test_idx)

    write_images(out / NAMES[0], pixels[train_idx])
    write_labels(out / NAMES[1], labels[train_idx])
    write_images(out / NAMES[2], pixels[test_idx])
    write_labels(out / NAMES[3], labels[test_idx])
    print(f"wrote {len(train_idx)} training and {len(test_idx)} testing digits to {out}")


if __name__ == "__main__":
    main()
