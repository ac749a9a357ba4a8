"""Registry of the UCI one-class benchmark datasets.

Each entry names the CSV written by ``scripts/fetch_uci.py`` (label column
``class``, ``1`` = target) and the reference row of the published UCI
table: target / outlier counts, attributes, train / test sizes and the AUC
of OCSVM and PB-OCSVM.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .core import Dataset, load_csv
from .exceptions import MissingDataset


@dataclass(frozen=True)
class UCIEntry:
    name: str
    title: str
    target: str
    n_target: int
    n_outliers: int
    n_attributes: int
    n_train: int
    n_test: int
    auc_ocsvm: float
    auc_pb: float
    note: Optional[str] = None

    @property
    def filename(self) -> str:
        return f"{self.name}.csv"


REGISTRY = {
    e.name: e
    for e in [
        UCIEntry("blood_transfusion", "Blood Transfusion", "donated in March 2007",
                 178, 570, 4, 142, 606, 0.86, 0.85),
        UCIEntry("wholesale", "Wholesale Customers", "channel Horeca",
                 298, 142, 7, 238, 202, 0.94, 0.96),
        UCIEntry("breast_cancer", "Breast Cancer", "benign",
                 77, 186, 9, 62, 201, 0.93, 0.96,
                 note="Wisconsin original data (683 complete rows); the reference counts do not match any public breast cancer file"),
        UCIEntry("glass", "Glass", "building windows, float processed (class 1)",
                 70, 77, 10, 56, 91, 0.98, 0.98,
                 note="10 attributes include the row Id, which is sorted by class"),
        UCIEntry("heart", "Heart", "disease present",
                 120, 150, 13, 96, 174, 0.95, 0.96),
        UCIEntry("climate", "Climate Model", "simulation success",
                 294, 46, 18, 235, 105, 0.94, 0.98),
        UCIEntry("hepatitis", "Hepatitis", "live",
                 123, 32, 19, 98, 57, 0.95, 0.95,
                 note="missing values median-imputed by the fetch script"),
        UCIEntry("parkinsons", "Parkinsons", "Parkinson's disease (status 1)",
                 147, 48, 22, 118, 77, 0.97, 0.98),
        UCIEntry("qsar", "QSAR biodegradation", "ready biodegradable",
                 356, 699, 41, 285, 770, 0.95, 0.94),
        UCIEntry("sonar", "Sonar", "mine (M)",
                 111, 97, 60, 89, 119, 0.93, 0.95),
    ]
}

# extra variants produced by the fetch script, not rows of the reference table
VARIANTS = {
    "glass_noid": UCIEntry("glass_noid", "Glass (no Id)", "class 1",
                           70, 144, 9, 56, 158, 0.98, 0.98,
                           note="the 9 chemical attributes only"),
}


def default_data_dir() -> Path:
    return Path(__file__).resolve().parents[2] / "data" / "uci"


def lookup(name: str) -> UCIEntry:
    if name in REGISTRY:
        return REGISTRY[name]
    if name in VARIANTS:
        return VARIANTS[name]
    raise KeyError(f"unknown UCI dataset {name!r}; known: {sorted(REGISTRY) + sorted(VARIANTS)}")


def load_uci(name: str, data_dir=None) -> Dataset:
    """Load a fetched dataset; raises MissingDataset if the CSV is absent."""
    entry = lookup(name)
    path = Path(data_dir or default_data_dir()) / entry.filename
    if not path.exists():
        raise MissingDataset(f"{path} not found; run scripts/fetch_uci.py")
    return load_csv(path, label_column="class", target_label="1", name=name)
