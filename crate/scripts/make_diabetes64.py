"""Write the 442 x 64 quadratic diabetes design (plus response) as CSV.

Columns: the 10 standardized baseline variables, 9 squares (sex is binary and
has no square), then the 45 pairwise interactions in row-major order. Each
derived column is built from the standardized baseline variables.
"""
import sys

import numpy as np
from sklearn.datasets import load_diabetes

NAMES = ["age", "sex", "bmi", "map", "tc", "ldl", "hdl", "tch", "ltg", "glu"]


def standardize(v):
    v = v - v.mean()
    return v / np.sqrt((v * v).sum())


def main(path):
    raw = load_diabetes(scaled=False)
    base = np.column_stack([standardize(c) for c in raw.data.T])
    cols, names = [], []
    for j, name in enumerate(NAMES):
        cols.append(base[:, j])
        names.append(name)
    for j, name in enumerate(NAMES):
        if name == "sex":
            continue
        cols.append(standardize(base[:, j] ** 2))
        names.append(f"{name}^2")
    for a in range(len(NAMES)):
        for b in range(a + 1, len(NAMES)):
            cols.append(standardize(base[:, a] * base[:, b]))
            names.append(f"{NAMES[a]}:{NAMES[b]}")
    x = np.column_stack(cols)
    with open(path, "w") as fh:
        fh.write(",".join(["y"] + names) + "\n")
        for i in range(x.shape[0]):
            fh.write(",".join([repr(float(raw.target[i]))] + [repr(float(v)) for v in x[i]]) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "diabetes64.csv")
