#!/usr/bin/env python3
"""Build the bundled MNIST subset fixtures under data/mnist/.

Source: the `mnist` npm package (https://www.npmjs.com/package/mnist), which
ships ~10k genuine MNIST digits as JSON, one file per class, pixels normalized
to [0,1] at three decimals. Run `npm install mnist` somewhere and point
--source at node_modules/mnist/src/digits.

Per class the first 400 samples go to the train pool and the next 100 to the
test pool (4000/1000 total). Pixels are restored to their original byte values
(round(v*255) is exact at three-decimal quantization) and both pools are
written as gzipped IDX files with the standard MNIST names.
"""

import argparse
import gzip
import json
import struct
from pathlib import Path

import numpy as np

TRAIN_PER_CLASS = 400
TEST_PER_CLASS = 100
SHUFFLE_SEED = 12345


def read_digit(path: Path) -> np.ndarray:
    with open(path) as f:
        flat = np.asarray(json.load(f)["data"], dtype=np.float64)
    if flat.size % 784 != 0:
        raise ValueError(f"{path}: length {flat.size} not a multiple of 784")
    images = flat.reshape(-1, 784)
    return np.rint(images * 255.0).clip(0, 255).astype(np.uint8)


def write_idx_images(path: Path, images: np.ndarray) -> None:
    header = struct.pack(">IIII", 0x00000803, images.shape[0], 28, 28)
    with gzip.open(path, "wb", compresslevel=9) as f:
        f.write(header)
        f.write(images.tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    header = struct.pack(">II", 0x00000801, labels.shape[0])
    with gzip.open(path, "wb", compresslevel=9) as f:
        f.write(header)
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--source", required=True, type=Path,
                    help="node_modules/mnist/src/digits directory")
    ap.add_argument("--out", default=Path("data/mnist"), type=Path)
    args = ap.parse_args()

    train_x, train_y, test_x, test_y = [], [], [], []
    for digit in range(10):
        images = read_digit(args.source / f"{digit}.json")
        need = TRAIN_PER_CLASS + TEST_PER_CLASS
        if images.shape[0] < need:
            raise ValueError(f"digit {digit}: only {images.shape[0]} samples, need {need}")
        train_x.append(images[:TRAIN_PER_CLASS])
        train_y.append(np.full(TRAIN_PER_CLASS, digit, dtype=np.uint8))
        test_x.append(images[TRAIN_PER_CLASS:need])
        test_y.append(np.full(TEST_PER_CLASS, digit, dtype=np.uint8))

    rng = np.random.RandomState(SHUFFLE_SEED)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    for prefix, xs, ys in [("train", train_x, train_y), ("t10k", test_x, test_y)]:
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        order = rng.permutation(x.shape[0])
        write_idx_images(out / f"{prefix}-images-idx3-ubyte.gz", x[order].reshape(-1, 28, 28))
        write_idx_labels(out / f"{prefix}-labels-idx1-ubyte.gz", y[order])
        print(f"{prefix}: {x.shape[0]} samples -> {out}")


if __name__ == "__main__":
    main()
