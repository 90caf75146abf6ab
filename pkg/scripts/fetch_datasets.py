#!/usr/bin/env python3
"""Best-effort download of the two large benchmark CSVs (needs network).

Fashion-MNIST comes via torchvision, CovType via scikit-learn. Both are
written in the CSV layouts that data/<name>.json describes. The workbench
itself never downloads anything: if these files are absent, experiments on
those datasets fail with a clear message and everything else still runs.
"""

import sys
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def fetch_fashion_mnist():
    try:
        from torchvision import datasets  # noqa: PLC0415

        train = datasets.FashionMNIST(root="/tmp/fmnist", train=True, download=True)
        imgs = train.data.numpy().reshape(len(train), -1).astype(np.float64)
        labels = train.targets.numpy()
    except Exception as exc:  # noqa: BLE001
        print(f"fashion_mnist: download failed ({exc})")
        return False
    out = DATA_DIR / "fashion_mnist.csv"
    with open(out, "w") as fh:
        for y, row in zip(labels, imgs):
            fh.write(",".join([str(int(y))] + [str(v) for v in row]) + "\n")
    print(f"wrote {out} ({len(labels)} rows)")
    return True


def fetch_covtype():
    try:
        from sklearn.datasets import fetch_covtype  # noqa: PLC0415

        bunch = fetch_covtype()
    except Exception as exc:  # noqa: BLE001
        print(f"covtype: download failed ({exc})")
        return False
    out = DATA_DIR / "covtype.csv"
    with open(out, "w") as fh:
        for row, y in zip(bunch.data, bunch.target):
            fh.write(",".join([str(v) for v in row] + [str(int(y))]) + "\n")
    print(f"wrote {out} ({len(bunch.target)} rows)")
    return True


if __name__ == "__main__":
    DATA_DIR.mkdir(exist_ok=True)
    ok = [fetch_fashion_mnist(), fetch_covtype()]
    sys.exit(0 if all(ok) else 1)
