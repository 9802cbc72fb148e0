"""Convert the npm ``fashion-mnist`` package into IDX files.

The npm tarball ships all 70000 images grouped by class as JSON arrays of
784 pixel values, with no train/test split. This script draws a seeded
per-class split of 6000 train / 1000 test images (the same class balance
as the official split) and writes the four standard IDX files.

    npm pack fashion-mnist && tar xzf fashion-mnist-*.tgz
    python scripts/fashion_mnist_from_npm.py package/src/clothes OUT_DIR
"""
import argparse
import json
from pathlib import Path

import numpy as np

from ssdp.data import write_idx

N_TRAIN_PER_CLASS = 6000
N_TEST_PER_CLASS = 1000


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("clothes_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    train_x, train_y, test_x, test_y = [], [], [], []
    for label in range(10):
        rows = json.loads((args.clothes_dir / f"{label}.json").read_text())["data"]
        # the class-0 file carries two empty trailing rows
        images = np.array([r for r in rows if len(r) == 784], dtype=np.uint8)
        assert len(images) == N_TRAIN_PER_CLASS + N_TEST_PER_CLASS, len(images)
        order = rng.permutation(len(images))
        train_x.append(images[order[:N_TRAIN_PER_CLASS]])
        test_x.append(images[order[N_TRAIN_PER_CLASS:]])
        train_y.append(np.full(N_TRAIN_PER_CLASS, label, dtype=np.uint8))
        test_y.append(np.full(N_TEST_PER_CLASS, label, dtype=np.uint8))

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for split, xs, ys in (("train", train_x, train_y), ("t10k", test_x, test_y)):
        x = np.concatenate(xs).reshape(-1, 28, 28)
        y = np.concatenate(ys)
        order = rng.permutation(len(y))
        write_idx(args.out_dir / f"{split}-images-idx3-ubyte", x[order])
        write_idx(args.out_dir / f"{split}-labels-idx1-ubyte", y[order])
        print(f"{split}: {len(y)} items")


if __name__ == "__main__":
    main()
