"""Materialise the benchmark CSVs under ``data/`` from PyPI-hosted copies.

UCI is not always reachable, so the raw files are taken from two wheels
that bundle them:

* ``keel-ds``      -> Letter (20,000 rows), Iris, and the binarised Yeast
                      variants from which the 10-class Yeast table is rebuilt
* ``responsibly``  -> Adult (``adult.data`` + ``adult.test``, 48,842 rows)

Run from the repository root::

    python scripts/build_datasets.py

Output files are deterministic; re-running overwrites them byte-for-byte.
"""
from __future__ import annotations

import csv
import subprocess
import sys
import tempfile
import zipfile
from collections import Counter, defaultdict
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"

YEAST_COUNTS = {"CYT": 463, "NUC": 429, "MIT": 244, "ME3": 163, "ME2": 51,
                "ME1": 44, "EXC": 35, "VAC": 30, "POX": 20, "ERL": 5}
YEAST_COLUMNS = ["mcg", "gvh", "alm", "mit", "erl", "pox", "vac", "nuc", "class"]
ADULT_COLUMNS = ["age", "workclass", "fnlwgt", "education", "education_num",
                 "marital_status", "occupation", "relationship", "race", "sex",
                 "capital_gain", "capital_loss", "hours_per_week", "native_country",
                 "income"]
LETTER_COLUMNS = ["x_box", "y_box", "width", "high", "onpix", "x_bar", "y_bar",
                  "x2bar", "y2bar", "xybar", "x2ybr", "xy2br", "x_ege", "xegvy",
                  "y_ege", "yegvx", "letter"]
IRIS_COLUMNS = ["sepal_length", "sepal_width", "petal_length", "petal_width", "species"]


def fetch_wheel(name: str, version: str, dest: Path) -> zipfile.ZipFile:
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                    "-d", str(dest), f"{name}=={version}"], check=True)
    wheel = next(dest.glob(f"{name.replace('-', '_')}-{version}-*.whl"))
    return zipfile.ZipFile(wheel)


def read_dat(zf: zipfile.ZipFile, member: str) -> list[list[str]]:
    rows = []
    for line in zf.read(member).decode().splitlines():
        line = line.strip()
        if line and not line.startswith("@"):
            rows.append([c.strip() for c in line.split(",")])
    return rows


def write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def _key(row: list[str]) -> tuple[float, ...]:
    # some variants drop the near-constant ``pox`` column; key on the other seven
    vals = [round(float(v), 2) for v in row[:-1]]
    if len(vals) == 8:
        del vals[5]
    return tuple(vals)


def rebuild_yeast(zf: zipfile.ZipFile) -> list[list[str]]:
    """Recover the 10-class table by intersecting the one-vs-rest variants."""
    raw = "keel_ds/data/imbalanced/raw/"

    def positives(name, label="positive"):
        return Counter(_key(r) for r in read_dat(zf, raw + name + ".dat") if r[-1] == label)

    base = read_dat(zf, raw + "yeast1.dat")
    per_class = {
        "NUC": positives("yeast1"), "ME3": positives("yeast3"),
        "ME2": positives("yeast4"), "ME1": positives("yeast5"),
        "EXC": positives("yeast6"), "VAC": positives("yeast-1_vs_7"),
        "POX": positives("yeast-2_vs_8"),
        "CYT": positives("yeast-2_vs_4", "negative"),
    }
    rare = positives("yeast-0-2-5-6_vs_3-7-8-9")  # ME1 + VAC + POX + ERL
    key_rows = defaultdict(list)
    for i, r in enumerate(base):
        key_rows[_key(r)].append(i)

    labels = [None] * len(base)
    for key, idx in key_rows.items():
        want = {c: cnt[key] for c, cnt in per_class.items() if cnt[key]}
        erl = rare[key] - want.get("ME1", 0) - want.get("VAC", 0) - want.get("POX", 0)
        if erl:
            want["ERL"] = erl
        rest = len(idx) - sum(want.values())
        if rest < 0 or erl < 0:
            raise RuntimeError(f"inconsistent yeast variants at {key}")
        if rest:
            want["MIT"] = rest
        queue = [c for c in sorted(want) for _ in range(want[c])]
        for i, c in zip(idx, queue):
            labels[i] = c
    counts = Counter(labels)
    if dict(counts) != YEAST_COUNTS:
        raise RuntimeError(f"yeast class counts mismatch: {counts}")
    return [[f"{float(v):.2f}" for v in r[:8]] + [lab] for r, lab in zip(base, labels)]


def adult_rows(zf: zipfile.ZipFile) -> list[list[str]]:
    out = []
    for member in ("responsibly/dataset/adult/adult.data",
                   "responsibly/dataset/adult/adult.test"):
        for line in zf.read(member).decode().splitlines():
            if not line.strip() or line.startswith("|"):
                continue
            cells = [c.strip() for c in line.split(",")]
            cells = ["" if c == "?" else c for c in cells]
            cells[-1] = cells[-1].rstrip(".")
            out.append(cells)
    return out


def main() -> None:
    DATA.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        keel = fetch_wheel("keel-ds", "0.2.5", Path(tmp))
        bal = "keel_ds/data/balanced/raw/"
        write_csv(DATA / "yeast.csv", YEAST_COLUMNS, rebuild_yeast(keel))
        write_csv(DATA / "letter.csv", LETTER_COLUMNS, read_dat(keel, bal + "letter.dat"))
        write_csv(DATA / "iris.csv", IRIS_COLUMNS, read_dat(keel, bal + "iris.dat"))
        resp = fetch_wheel("responsibly", "0.1.2", Path(tmp))
        write_csv(DATA / "adult.csv", ADULT_COLUMNS, adult_rows(resp))


if __name__ == "__main__":
    main()
