#!/usr/bin/env python3
"""Download the UCI one-class benchmark datasets into ``data/uci``.

Every dataset is written as ``<name>.csv`` with features ``f1..fd`` and a
``class`` column, ``1`` for the target class and ``0`` for outliers.

Sources (UCI Machine Learning Repository) and target classes:

=================  ==============================================================================================  ===========================
name               URL                                                                                             target
=================  ==============================================================================================  ===========================
blood_transfusion  https://archive.ics.uci.edu/ml/machine-learning-databases/blood-transfusion/transfusion.data     donated (last column 1)
wholesale          https://archive.ics.uci.edu/ml/machine-learning-databases/00292/Wholesale%20customers%20data.csv  Channel 1 (Horeca)
breast_cancer      https://archive.ics.uci.edu/ml/machine-learning-databases/breast-cancer-wisconsin/breast-cancer-wisconsin.data  benign (2)
glass              https://archive.ics.uci.edu/ml/machine-learning-databases/glass/glass.data                      class 1
heart              https://archive.ics.uci.edu/ml/machine-learning-databases/statlog/heart/heart.dat               presence (2)
climate            https://archive.ics.uci.edu/ml/machine-learning-databases/00252/pop_failures.dat                outcome 1
hepatitis          https://archive.ics.uci.edu/ml/machine-learning-databases/hepatitis/hepatitis.data              LIVE (2)
parkinsons         https://archive.ics.uci.edu/ml/machine-learning-databases/parkinsons/parkinsons.data            status 1
qsar               https://archive.ics.uci.edu/ml/machine-learning-databases/00254/biodeg.csv                      RB
sonar              https://archive.ics.uci.edu/ml/machine-learning-databases/undocumented/connectionist-bench/sonar/sonar.all-data  M
=================  ==============================================================================================  ===========================

When the UCI host is unreachable, five datasets are taken from copies
bundled in PyPI wheels (``keel-ds`` 0.2.5 and ``imbalanced-databases``
0.1.1) fetched with ``pip download``. Dataset-specific handling:

* glass keeps the Id column (10 attributes, as in the reference table) and
  also emits ``glass_noid`` with the 9 chemical attributes. The Id is sorted
  by class, so it leaks the label.
* breast_cancer drops the sample-code column and the 16 rows with missing
  values (683 rows remain).
* hepatitis replaces ``?`` by the column median over all rows.
* parkinsons drops the ``name`` column; climate drops ``Study`` and ``Run``.

Usage: ``python scripts/fetch_uci.py [--out data/uci] [--only glass heart]``
"""

from __future__ import annotations

import argparse
import csv
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

import numpy as np

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases/"

WHEELS = {
    "keel": ("keel-ds==0.2.5", "keel_ds/data/balanced/raw/"),
    "imbdb": ("imbalanced-databases==0.1.1", "imbalanced_databases/data/"),
}


def _rows(text, delimiter=","):
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        if delimiter is None:
            out.append(line.split())
        else:
            out.append([c.strip() for c in line.split(delimiter)])
    return out


def _matrix(rows, cols):
    return np.array([[float(r[c]) for c in cols] for r in rows])


def parse_blood(text):
    rows = _rows(text)[1:]
    return _matrix(rows, range(4)), np.array([r[4] == "1" for r in rows])


def parse_wholesale(text):
    rows = _rows(text)[1:]
    return _matrix(rows, range(1, 8)), np.array([r[0] == "1" for r in rows])


def parse_wisconsin_uci(text):
    rows = [r for r in _rows(text) if "?" not in r]
    return _matrix(rows, range(1, 10)), np.array([r[10] == "2" for r in rows])


def parse_wisconsin_keel(text):
    rows = _rows(text)
    return _matrix(rows, range(9)), np.array([r[9] == "2" for r in rows])


def parse_glass(text):
    rows = _rows(text)
    return _matrix(rows, range(10)), np.array([r[10] == "1" for r in rows])


def parse_heart(text):
    rows = _rows(text, None if " " in text.splitlines()[0].strip() else ",")
    return _matrix(rows, range(13)), np.array([r[13] == "2" for r in rows])


def parse_climate(text):
    rows = _rows(text, None)[1:]
    return _matrix(rows, range(2, 20)), np.array([r[20] == "1" for r in rows])


def parse_hepatitis(text):
    rows = _rows(text)
    raw = np.array([[np.nan if v == "?" else float(v) for v in r[1:]] for r in rows])
    med = np.nanmedian(raw, axis=0)
    raw = np.where(np.isnan(raw), med, raw)
    return raw, np.array([r[0] == "2" for r in rows])


def parse_parkinsons(text):
    rows = _rows(text)
    header = rows[0]
    s = header.index("status")
    cols = [i for i in range(1, len(header)) if i != s]
    rows = rows[1:]
    return _matrix(rows, cols), np.array([r[s] == "1" for r in rows])


def parse_qsar(text):
    rows = _rows(text, ";")
    return _matrix(rows, range(41)), np.array([r[41] == "RB" for r in rows])


def parse_sonar(text):
    rows = _rows(text)
    return _matrix(rows, range(60)), np.array([r[60] == "M" for r in rows])


# name -> (UCI path, parser, fallback (wheel key, member, parser) or None)
SOURCES = {
    "blood_transfusion": ("blood-transfusion/transfusion.data", parse_blood, None),
    "wholesale": ("00292/Wholesale%20customers%20data.csv", parse_wholesale, None),
    "breast_cancer": ("breast-cancer-wisconsin/breast-cancer-wisconsin.data", parse_wisconsin_uci,
                      ("keel", "wisconsin.dat", parse_wisconsin_keel)),
    "glass": ("glass/glass.data", parse_glass, ("imbdb", "glass/glass.data.txt", parse_glass)),
    "heart": ("statlog/heart/heart.dat", parse_heart, ("keel", "heart.dat", parse_heart)),
    "climate": ("00252/pop_failures.dat", parse_climate, None),
    "hepatitis": ("hepatitis/hepatitis.data", parse_hepatitis,
                  ("imbdb", "hepatitis/hepatitis.data.txt", parse_hepatitis)),
    "parkinsons": ("parkinsons/parkinsons.data", parse_parkinsons, None),
    "qsar": ("00254/biodeg.csv", parse_qsar, None),
    "sonar": ("undocumented/connectionist-bench/sonar/sonar.all-data", parse_sonar,
              ("keel", "sonar.dat", parse_sonar)),
}


def write_csv(path: Path, X, y):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i + 1}" for i in range(X.shape[1])] + ["class"])
        for row, lab in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [1 if lab else 0])


def fetch_url(url, timeout=20) -> str:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read().decode("utf-8", errors="replace")


class WheelCache:
    def __init__(self, workdir: Path):
        self.workdir = workdir
        self.archives = {}

    def read(self, key, member) -> str:
        if key not in self.archives:
            spec, _ = WHEELS[key]
            dest = self.workdir / key
            dest.mkdir(exist_ok=True)
            subprocess.run(
                [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "--disable-pip-version-check", "-d", str(dest), spec],
                check=True,
            )
            wheel = next(dest.glob("*.whl"))
            self.archives[key] = zipfile.ZipFile(wheel)
        prefix = WHEELS[key][1]
        return self.archives[key].read(prefix + member).decode("utf-8", errors="replace")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data" / "uci")
    ap.add_argument("--only", nargs="*", help="subset of dataset names")
    ap.add_argument("--no-network", action="store_true", help="skip the UCI host, use wheels only")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    names = args.only or list(SOURCES)
    missing = []
    with tempfile.TemporaryDirectory() as tmp:
        wheels = WheelCache(Path(tmp))
        for name in names:
            path, parser, fallback = SOURCES[name]
            X = y = None
            origin = ""
            if not args.no_network:
                try:
                    X, y = parser(fetch_url(UCI + path))
                    origin = UCI + path
                except Exception as exc:  # network or format problem: try the fallback
                    print(f"{name}: UCI download failed ({exc.__class__.__name__})", file=sys.stderr)
            if X is None and fallback is not None:
                key, member, fparser = fallback
                try:
                    X, y = fparser(wheels.read(key, member))
                    origin = f"{WHEELS[key][0]}:{member}"
                except Exception as exc:
                    print(f"{name}: wheel fallback failed ({exc})", file=sys.stderr)
            if X is None:
                missing.append(name)
                continue
            write_csv(args.out / f"{name}.csv", X, y)
            print(f"{name}: {int(y.sum())} target / {int((~y).sum())} outliers, "
                  f"{X.shape[1]} attributes <- {origin}")
            if name == "glass":
                write_csv(args.out / "glass_noid.csv", X[:, 1:], y)
    if missing:
        print("unavailable: " + ", ".join(missing), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
