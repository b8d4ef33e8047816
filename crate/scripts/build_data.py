"""Rebuild the bundled benchmark files under data/.

MNIST: the `mnist` npm package (v1.1.0) stores 10k MNIST digits as gray/255
rounded to 3 decimals; round(v * 255) recovers the original 8-bit level
exactly. Digits 0 and 6 are written interleaved into IDX files.

WDBC: scikit-learn's bundled breast_cancer.csv, rewritten in the UCI
`wdbc.data` row layout (id, M|B, 30 features). The id column is the
1-based row number because the sklearn copy drops the original ids.

usage: python3 scripts/build_data.py <mnist-package-dir> <sklearn-breast_cancer.csv>
"""
import json
import struct
import sys
from pathlib import Path

root = Path(__file__).resolve().parent.parent / "data"


def mnist(pkg):
    per_digit = {}
    for d in (0, 6):
        flat = json.load(open(Path(pkg) / "src" / "digits" / f"{d}.json"))["data"]
        imgs = [flat[i : i + 784] for i in range(0, len(flat), 784)]
        per_digit[d] = [bytes(round(v * 255) for v in img) for img in imgs]
    images, labels = [], []
    for i in range(max(len(v) for v in per_digit.values())):
        for d in (0, 6):
            if i < len(per_digit[d]):
                images.append(per_digit[d][i])
                labels.append(d)
    with open(root / "mnist-06-images.idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(img)
    with open(root / "mnist-06-labels.idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def wdbc(csv_path):
    lines = open(csv_path).read().strip().splitlines()[1:]
    out = []
    for i, line in enumerate(lines, start=1):
        fields = line.split(",")
        diag = "M" if fields[-1] == "0" else "B"
        out.append(",".join([str(i), diag] + fields[:-1]))
    (root / "wdbc.data").write_text("\n".join(out) + "\n")


if __name__ == "__main__":
    mnist(sys.argv[1])
    wdbc(sys.argv[2])
