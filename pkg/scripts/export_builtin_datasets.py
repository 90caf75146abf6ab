#!/usr/bin/env python3
"""Regenerate data/wine.csv and data/breast_cancer.csv from scikit-learn's
bundled copies, plus the JSON dataset configs for all four benchmarks.

The two small UCI datasets ship with scikit-learn, so this needs no
network. Run scripts/fetch_datasets.py for the two large ones.
"""

import json
from pathlib import Path

from sklearn.datasets import load_breast_cancer, load_wine

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def write_csv(path, header_cols, label, features):
    lines = [",".join(header_cols)]
    for y, row in zip(label, features):
        lines.append(",".join([str(int(y))] + [repr(float(v)) for v in row]))
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(lines) - 1} rows)")


def main():
    DATA_DIR.mkdir(exist_ok=True)

    wine = load_wine()
    write_csv(
        DATA_DIR / "wine.csv",
        ["label"] + [n.replace("/", "_") for n in wine.feature_names],
        wine.target,
        wine.data,
    )
    bc = load_breast_cancer()
    write_csv(
        DATA_DIR / "breast_cancer.csv",
        ["label"] + [n.replace(" ", "_") for n in bc.feature_names],
        bc.target,
        bc.data,
    )

    configs = {
        "wine": {
            "name": "wine",
            "csv": "wine.csv",
            "header": True,
            "label_column": 0,
            "feature_columns": None,
            "classes": [0, 1, 2],
            "subset_size": None,
            "subset_seed": 7,
            "pca_dim": None,
        },
        "breast_cancer": {
            "name": "breast_cancer",
            "csv": "breast_cancer.csv",
            "header": True,
            "label_column": 0,
            "feature_columns": None,
            "classes": [0, 1],
            "subset_size": None,
            "subset_seed": 7,
            "pca_dim": 10,
        },
        # label-first pixel CSV (the common flattened export layout)
        "fashion_mnist": {
            "name": "fashion_mnist",
            "csv": "fashion_mnist.csv",
            "header": False,
            "label_column": 0,
            "feature_columns": None,
            "classes": [0, 1, 2],
            "subset_size": 3000,
            "subset_seed": 7,
            "pca_dim": 16,
        },
        # UCI covtype.data layout: 54 features then the label; we keep the
        # 10 quantitative columns plus the first 2 wilderness flags and the
        # three most frequent cover types
        "covtype": {
            "name": "covtype",
            "csv": "covtype.csv",
            "header": False,
            "label_column": 54,
            "feature_columns": list(range(12)),
            "classes": [1, 2, 3],
            "subset_size": 5000,
            "subset_seed": 7,
            "pca_dim": None,
        },
    }
    for name, cfg in configs.items():
        path = DATA_DIR / f"{name}.json"
        path.write_text(json.dumps(cfg, indent=2) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
